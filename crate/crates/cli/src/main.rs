fn main() {
    std::process::exit(geopulse_cli::main_with_args(std::env::args_os()));
}
