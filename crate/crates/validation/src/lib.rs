//! Holds the `acceptance` test target; there is no library code.
//!
//! Kept as its own package so the suite runs after every other test binary
//! in `cargo test --workspace`.
