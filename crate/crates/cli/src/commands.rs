//! Subcommand implementations. Each writes its artifacts plus a
//! `manifest.json` into the output directory and prints a short summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use geopulse::analysis::{
    a2_robustness_map, band_stats, bandwidth_at, compare_baselines, detuning_grid, fmt_sig9,
    write_contour_csv, write_curves_csv, write_map_csv, BandStats, Bandwidth, Experiment,
    FidelityCurve,
};
use geopulse::awg_export::{
    envelope_summary, export, sidecar_path, synthesize, synthesize_split, EnvelopeSummary,
};
use geopulse::dynamics::{fidelity, propagate, write_trace_csv, SimConfig};
use geopulse::gate_algebra::{target_state, Gate};
use geopulse::optimizer::{default_initial_point, optimize, ObjectiveSpec};
use geopulse::presets::Preset;
use geopulse::pulse_model::{PairRole, PulseSequence};
use geopulse::units::{khz_to_rad_per_us, mhz_to_rad_per_us, rad_per_us_to_mhz};
use serde::Serialize;

use crate::config::{CoeffSource, GateChoice, RunConfig};
use crate::error::CliError;
use crate::output::OutDir;
use crate::verify;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub gate: Option<GateChoice>,
    pub preset: Option<Preset>,
    pub t1_us: Option<f64>,
    pub seed: Option<u64>,
    /// Detuning point count of the command being run.
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sweep,
    Compare,
    Heatmap,
    Optimize,
    ExportAwg,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Compare => "compare",
            Command::Heatmap => "heatmap",
            Command::Optimize => "optimize",
            Command::ExportAwg => "export-awg",
            Command::Verify => "verify",
        }
    }
}

/// Loads the config (or defaults) and applies the overrides.
pub fn effective_config(
    path: Option<&Path>,
    cmd: Command,
    ov: &Overrides,
) -> Result<RunConfig, CliError> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(g) = ov.gate {
        cfg.gate = g;
    }
    if let Some(p) = ov.preset {
        cfg.coefficients = CoeffSource::Preset(p);
    }
    if let Some(t1) = ov.t1_us {
        cfg.t1_us = t1;
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(n) = ov.points {
        match cmd {
            Command::Sweep => cfg.sweep.points = n,
            Command::Compare => cfg.compare.points = n,
            Command::Heatmap => cfg.heatmap.delta_points = n,
            Command::Optimize => cfg.optimizer.grid_points = n,
            Command::Simulate | Command::ExportAwg | Command::Verify => {}
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Outcome of a command: process exit code and the files it wrote.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<String>,
}

pub fn run(cmd: Command, cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let mut out = OutDir::create(out_dir)?;
    let exit_code = match cmd {
        Command::Simulate => simulate(cfg, &mut out)?,
        Command::Sweep => sweep(cfg, &mut out)?,
        Command::Compare => compare(cfg, &mut out)?,
        Command::Heatmap => heatmap(cfg, &mut out)?,
        Command::Optimize => optimize_cmd(cfg, &mut out)?,
        Command::ExportAwg => export_awg(cfg, &mut out)?,
        Command::Verify => verify_cmd(cfg, &mut out)?,
    };
    out.write_manifest(cmd.name(), cfg)?;
    Ok(Outcome {
        exit_code,
        files: out.files().to_vec(),
    })
}

fn experiment(cfg: &RunConfig, gate: Gate) -> Result<Experiment, CliError> {
    let coeffs = cfg.coeffs()?;
    Ok(Experiment {
        gate: gate.params(),
        coeffs,
        t1_us: cfg.t1_us,
        t2_us: cfg.t2(),
        initial: cfg.initial.state(),
        label: cfg.coeff_label(),
    })
}

/// Band used for summary statistics: the preset's design band, else the
/// optimizer band.
fn summary_band(cfg: &RunConfig) -> f64 {
    match cfg.coefficients {
        CoeffSource::Preset(p) => p.design_band_khz(),
        _ => cfg.optimizer.band_khz,
    }
}

#[derive(Debug, Serialize)]
struct SimulateSummary {
    detuning_khz: f64,
    steps_per_pair: usize,
    fidelity: f64,
    final_populations: BTreeMap<&'static str, f64>,
    norm_drift: f64,
    peak_omega1_mhz: f64,
    peak_omega0_mhz: f64,
    peak_two_color_mhz: f64,
}

const PULSE_SAMPLES: usize = 4000;

fn write_pulse_csv(seq: &PulseSequence, buf: &mut Vec<u8>) -> Result<(), CliError> {
    use std::io::Write;
    writeln!(buf, "t_us,omega1_mhz,omega0_mhz").map_err(geopulse::Error::from)?;
    for i in 0..=PULSE_SAMPLES {
        let t = if i == PULSE_SAMPLES {
            seq.t2_us
        } else {
            seq.t2_us * i as f64 / PULSE_SAMPLES as f64
        };
        let (pair, start) = seq.pair_at(t)?;
        let omega = pair.envelope.value((t - start).min(pair.duration()))?;
        let (w1, w0) = pair.tone_weights();
        writeln!(
            buf,
            "{},{},{}",
            fmt_sig9(t),
            fmt_sig9(rad_per_us_to_mhz(w1 * omega)),
            fmt_sig9(rad_per_us_to_mhz(w0 * omega))
        )
        .map_err(geopulse::Error::from)?;
    }
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &mut OutDir) -> Result<i32, CliError> {
    let mut summary = BTreeMap::new();
    for gate in cfg.gate.gates() {
        let exp = experiment(cfg, gate)?;
        let seq = exp.sequence()?;
        let delta = khz_to_rad_per_us(cfg.simulate.detuning_khz);
        let sim = SimConfig::default()
            .with_steps(cfg.simulate.steps_per_pair)
            .with_detuning(delta)
            .resolved_for(&seq, delta.abs());
        let r = propagate(&seq, &exp.initial, &sim)?;
        let f = fidelity(&r.final_state, &target_state(&exp.initial, exp.gate));
        out.write_with(&format!("pulse_{gate}.csv"), |b| write_pulse_csv(&seq, b))?;
        out.write_with(&format!("trace_{gate}.csv"), |b| {
            Ok(write_trace_csv(&r.trace, b)?)
        })?;
        let [p1, p0, pe] = r.final_state.populations();
        let (w1, w0) = seq.pair1.tone_weights();
        let peak = seq.pair1.envelope.peak_abs();
        println!("{gate}: F = {f:.9}, populations |1⟩ {p1:.6} |0⟩ {p0:.6} |e⟩ {pe:.2e}");
        summary.insert(
            gate.name(),
            SimulateSummary {
                detuning_khz: cfg.simulate.detuning_khz,
                steps_per_pair: sim.steps_per_pair,
                fidelity: f,
                final_populations: BTreeMap::from([("p1", p1), ("p0", p0), ("pe", pe)]),
                norm_drift: r.norm_drift,
                peak_omega1_mhz: rad_per_us_to_mhz(w1.abs() * peak),
                peak_omega0_mhz: rad_per_us_to_mhz(w0.abs() * peak),
                peak_two_color_mhz: rad_per_us_to_mhz(seq.peak_two_color_rabi(PairRole::Gate)),
            },
        );
    }
    out.write_json("summary.json", &summary)?;
    Ok(0)
}

#[derive(Debug, Serialize)]
struct CurveSummary {
    f0: Option<f64>,
    /// `None` when F(0) is below 0.99.
    bandwidth_099: Option<Bandwidth>,
    band: BandStats,
    asymmetry: f64,
}

fn curve_summary(curve: &FidelityCurve, band_khz: f64) -> Result<CurveSummary, CliError> {
    Ok(CurveSummary {
        f0: curve.at_zero(),
        bandwidth_099: bandwidth_at(curve, 0.99).ok(),
        band: band_stats(curve, band_khz)?,
        asymmetry: curve.asymmetry(),
    })
}

fn describe(name: &str, s: &CurveSummary) -> String {
    let bw = match &s.bandwidth_099 {
        Some(b) => format!("[{:.1}, {:.1}] kHz", b.lo_khz, b.hi_khz),
        None => "none".into(),
    };
    format!(
        "{name}: 0.99-bandwidth {bw}, mean F over ±{} kHz {:.5}, min {:.5}",
        s.band.half_width_khz, s.band.average, s.band.min
    )
}

fn sweep(cfg: &RunConfig, out: &mut OutDir) -> Result<i32, CliError> {
    let band = summary_band(cfg);
    let mut summary = BTreeMap::new();
    for gate in cfg.gate.gates() {
        let curve = experiment(cfg, gate)?.sweep(cfg.sweep.max_khz, cfg.sweep.points)?;
        out.write_with(&format!("curve_{gate}.csv"), |b| {
            Ok(write_curves_csv(&[&curve], b)?)
        })?;
        let s = curve_summary(&curve, band)?;
        println!("{}", describe(gate.name(), &s));
        summary.insert(gate.name(), s);
    }
    out.write_json("summary.json", &summary)?;
    Ok(0)
}

fn compare(cfg: &RunConfig, out: &mut OutDir) -> Result<i32, CliError> {
    let band = summary_band(cfg);
    let grid = detuning_grid(cfg.compare.max_khz, cfg.compare.points)?;
    let mut summary = BTreeMap::new();
    for gate in cfg.gate.gates() {
        let b = compare_baselines(&experiment(cfg, gate)?, &grid)?;
        out.write_with(&format!("compare_{gate}.csv"), |buf| {
            Ok(write_curves_csv(&b.curves(), buf)?)
        })?;
        let mut per = BTreeMap::new();
        for (name, c) in [
            ("optimized", &b.optimized),
            ("gaussian", &b.gaussian),
            ("square", &b.square),
        ] {
            let s = curve_summary(c, band)?;
            println!("{}", describe(&format!("{gate}/{name}"), &s));
            per.insert(name, s);
        }
        summary.insert(gate.name(), (b.fwhm_us, per));
    }
    out.write_json("summary.json", &summary)?;
    Ok(0)
}

#[derive(Debug, Serialize)]
struct HeatmapSummary {
    /// Smallest F with |η| ≤ 0.3 and |Δ| ≤ 60 kHz.
    min_in_rectangle: f64,
    /// max |F − 1| along Δ = 0.
    zero_detuning_deviation: f64,
    contour_segments: usize,
}

fn heatmap(cfg: &RunConfig, out: &mut OutDir) -> Result<i32, CliError> {
    let mut summary = BTreeMap::new();
    for gate in cfg.gate.gates() {
        let map = a2_robustness_map(&experiment(cfg, gate)?, &cfg.heatmap.grid())?;
        out.write_with(&format!("map_{gate}.csv"), |b| Ok(write_map_csv(&map, b)?))?;
        out.write_with(&format!("contour_{gate}.csv"), |b| {
            Ok(write_contour_csv(&map, b)?)
        })?;
        let s = HeatmapSummary {
            min_in_rectangle: map.min_within(0.3, 60.0),
            zero_detuning_deviation: map
                .zero_detuning_column()
                .iter()
                .map(|f| (f - 1.0).abs())
                .fold(0.0, f64::max),
            contour_segments: map.contour.len(),
        };
        println!(
            "{gate}: min F over |η| ≤ 0.3, |Δ| ≤ 60 kHz = {:.5}; Δ = 0 deviation {:.1e}; {} contour segments",
            s.min_in_rectangle, s.zero_detuning_deviation, s.contour_segments
        );
        summary.insert(gate.name(), s);
    }
    out.write_json("summary.json", &summary)?;
    Ok(0)
}

fn optimize_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<i32, CliError> {
    let gate = match cfg.gate {
        GateChoice::One(g) => g,
        GateChoice::All => return Err(CliError::Invalid("optimize runs for a single gate".into())),
    };
    let o = &cfg.optimizer;
    let mut spec = ObjectiveSpec::uniform(gate.params(), o.band_khz, o.grid_points, cfg.t1_us)?
        .with_cap(o.rabi_cap_mhz.map(mhz_to_rad_per_us));
    spec.initial = cfg.initial.state();
    spec.t2_us = cfg.t2();
    let init = o
        .init
        .clone()
        .unwrap_or_else(|| default_initial_point(gate.params()));
    let report = optimize(&spec, &init, &o.settings(cfg.seed))?;
    out.write_json("report.json", &report)?;
    out.write_json("coeffs.json", &report.coeffs)?;
    println!(
        "{gate}: worst infidelity {:.3e} over ±{} kHz ({} points), converged = {}, {} evaluations",
        report.worst_infidelity, o.band_khz, o.grid_points, report.converged, report.evaluations
    );
    println!(
        "coefficients: [{}]",
        report
            .coeffs
            .iter()
            .map(|c| format!("{c:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(0)
}

fn export_awg(cfg: &RunConfig, out: &mut OutDir) -> Result<i32, CliError> {
    let block = cfg.export.as_ref().ok_or_else(|| {
        CliError::Invalid("export-awg needs an `export` block with the hardware constants".into())
    })?;
    let spec = block.rf_spec();
    let ext = match block.format {
        geopulse::awg_export::WaveformFormat::Csv => "csv",
        geopulse::awg_export::WaveformFormat::F32 => "f32",
    };
    let mut summary: BTreeMap<&str, EnvelopeSummary> = BTreeMap::new();
    for gate in cfg.gate.gates() {
        let seq = experiment(cfg, gate)?.sequence()?;
        let w = if block.split {
            synthesize_split(&seq, &spec)?
        } else {
            synthesize(&seq, &spec)?
        };
        let name = format!("waveform_{gate}.{ext}");
        let final_path = out.path(&name);
        let tmp = out.path(&format!(".{name}.tmp-{}", std::process::id()));
        export(&w, &tmp, block.format)?;
        rename(&sidecar_path(&tmp), &sidecar_path(&final_path))?;
        rename(&tmp, &final_path)?;
        out.record(&name);
        out.record(&format!("{name}.json"));
        let s = envelope_summary(&seq, &spec)?;
        println!(
            "{gate}: {} frames at {} samples/µs, max envelope slope {:.4}/µs, 99% envelope bandwidth {:.3} MHz",
            w.frames(),
            w.rate,
            s.max_slope,
            s.bandwidth_99_mhz
        );
        summary.insert(gate.name(), s);
    }
    out.write_json("summary.json", &summary)?;
    Ok(0)
}

fn rename(from: &Path, to: &PathBuf) -> Result<(), CliError> {
    fs::rename(from, to).map_err(|source| CliError::Io {
        path: to.display().to_string(),
        source,
    })
}

fn verify_cmd(cfg: &RunConfig, out: &mut OutDir) -> Result<i32, CliError> {
    let preset = match cfg.coefficients {
        CoeffSource::Preset(p) => p,
        _ => {
            return Err(CliError::Invalid(
                "verify needs a preset (--preset op1|op2)".into(),
            ))
        }
    };
    let checks = verify::run_checks(preset, cfg.t1_us)?;
    for c in &checks {
        println!("{c}");
    }
    out.write_json("verify.json", &checks)?;
    let failed = checks
        .iter()
        .filter(|c| !c.passed && !c.informational)
        .count();
    println!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 { 0 } else { 1 })
}
