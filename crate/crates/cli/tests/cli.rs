use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn geopulse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geopulse"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_reaches_targets_on_resonance() {
    let dir = tempfile::tempdir().unwrap();
    let o = geopulse(
        dir.path(),
        &["simulate", "--gate", "all", "--out-dir", "out"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = json(&dir.path().join("out/summary.json"));
    for gate in ["sigmax", "sigmay", "sigmaz", "hadamard"] {
        let f = summary[gate]["fidelity"].as_f64().unwrap();
        assert!((1.0 - f).abs() < 1e-6, "{gate}: {f}");
        assert!(dir.path().join(format!("out/pulse_{gate}.csv")).exists());
    }
    let pops = &summary["hadamard"]["final_populations"];
    assert!((pops["p0"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!((pops["p1"].as_f64().unwrap() - 0.5).abs() < 1e-6);

    let trace = fs::read_to_string(dir.path().join("out/trace_hadamard.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("t_us,p1,p0,pe"));
    let last: Vec<f64> = trace
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last[0], 8.0);

    let pulse = fs::read_to_string(dir.path().join("out/pulse_sigmax.csv")).unwrap();
    assert_eq!(pulse.lines().count(), 4002);
}

#[test]
fn manifest_lists_outputs_and_hashes_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = geopulse(
        dir.path(),
        &[
            "simulate",
            "--gate",
            "sigmaz",
            "--seed",
            "11",
            "--out-dir",
            "out",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = json(&dir.path().join("out/manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 11);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["timestamp_unix"].as_u64().unwrap() > 0);
    for f in m["files"].as_array().unwrap() {
        assert!(
            dir.path().join("out").join(f.as_str().unwrap()).exists(),
            "{f}"
        );
    }
    let leftovers = fs::read_dir(dir.path().join("out"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .contains(".tmp-")
        })
        .count();
    assert_eq!(leftovers, 0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        [
            "sweep",
            "--preset",
            "op2",
            "--gate",
            "sigmaz",
            "--points",
            "41",
            "--out-dir",
            out,
        ]
    };
    for out in ["a", "b"] {
        let o = geopulse(dir.path(), &args(out));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let read = |d: &str| fs::read(dir.path().join(d).join("curve_sigmaz.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let text = String::from_utf8(read("a")).unwrap();
    assert_eq!(text.lines().next(), Some("delta_khz,fidelity,label"));
    assert_eq!(text.lines().count(), 42);
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        "{\n  \"gate\": \"sigmax\",\n  \"t1_us\": ,\n}\n",
    )
    .unwrap();
    let o = geopulse(dir.path(), &["sweep", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.json:3:"), "{}", stderr(&o));
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"gate": "sigmaz", "sweep": {"max_khz": 100, "stride": 2}}"#,
    )
    .unwrap();
    let o = geopulse(dir.path(), &["sweep", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stride"), "{}", stderr(&o));
}

#[test]
fn inline_coefficients_must_satisfy_constraints() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"coefficients": {"inline": [0, 0, 0, 0, 0, 0, 0, 0]}}"#,
    )
    .unwrap();
    let o = geopulse(dir.path(), &["sweep", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("inline"), "{}", stderr(&o));

    // a₂ = −1/2 alone satisfies both constraints
    fs::write(
        dir.path().join("c.json"),
        r#"{"coefficients": {"inline": [0, -0.5, 0, 0, 0, 0, 0, 0]}, "gate": "sigmaz"}"#,
    )
    .unwrap();
    let o = geopulse(
        dir.path(),
        &[
            "sweep",
            "--config",
            "c.json",
            "--points",
            "5",
            "--out-dir",
            "out",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("out/curve_sigmaz.csv").exists());
}

#[test]
fn coefficient_file_accepts_optimizer_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"gate": "sigmaz", "optimizer": {"band_khz": 0, "grid_points": 3, "max_iterations": 20, "restarts": 1}}"#,
    )
    .unwrap();
    let o = geopulse(
        dir.path(),
        &["optimize", "--config", "c.json", "--out-dir", "opt"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    fs::write(
        dir.path().join("d.json"),
        r#"{"gate": "sigmaz", "coefficients": {"file": "opt/report.json"}}"#,
    )
    .unwrap();
    let o = geopulse(
        dir.path(),
        &["simulate", "--config", "d.json", "--out-dir", "sim"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&dir.path().join("sim/summary.json"));
    assert!((1.0 - s["sigmaz"]["fidelity"].as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn bad_flags_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        geopulse(dir.path(), &["simulate", "--gate", "sigmaq"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        geopulse(dir.path(), &["sweep", "--points", "40"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(geopulse(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(geopulse(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn optimize_converges_on_resonance_only_band() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"gate": "hadamard", "optimizer": {"band_khz": 0, "grid_points": 3, "max_iterations": 400, "restarts": 1}}"#,
    )
    .unwrap();
    let o = geopulse(
        dir.path(),
        &["optimize", "--config", "c.json", "--out-dir", "out"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&dir.path().join("out/report.json"));
    assert_eq!(r["converged"], true);
    assert!(r["worst_infidelity"].as_f64().unwrap() < 1e-6);
    let coeffs = json(&dir.path().join("out/coeffs.json"));
    assert_eq!(coeffs.as_array().unwrap().len(), 8);
}

#[test]
fn infeasible_band_reports_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"gate": "sigmax", "optimizer": {"band_khz": 50000, "grid_points": 3, "max_iterations": 10, "restarts": 1}}"#,
    )
    .unwrap();
    let o = geopulse(
        dir.path(),
        &["optimize", "--config", "c.json", "--out-dir", "out"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&dir.path().join("out/report.json"));
    assert_eq!(r["converged"], false);
    assert!(r["worst_infidelity"].as_f64().unwrap() > 0.01);
}

#[test]
fn optimize_rejects_gate_all() {
    let dir = tempfile::tempdir().unwrap();
    let o = geopulse(dir.path(), &["optimize", "--gate", "all"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_requires_hardware_block() {
    let dir = tempfile::tempdir().unwrap();
    let o = geopulse(dir.path(), &["export-awg", "--gate", "sigmax"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("export"));
}

#[test]
fn export_writes_waveform_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"gate": "sigmax", "export": {"f1_mhz": 80, "f0_mhz": 70, "qubit_splitting_mhz": 10,
            "conversion": 0.05, "sample_rate": 1000, "format": "f32", "split": true}}"#,
    )
    .unwrap();
    let o = geopulse(
        dir.path(),
        &["export-awg", "--config", "c.json", "--out-dir", "out"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bytes = fs::read(dir.path().join("out/waveform_sigmax.f32")).unwrap();
    let side = json(&dir.path().join("out/waveform_sigmax.f32.json"));
    assert_eq!(side["frames"], 8000);
    assert_eq!(side["channels"].as_array().unwrap().len(), 2);
    assert_eq!(bytes.len(), 4 * 2 * 8000);
}

#[test]
fn export_rejects_aliasing_rate() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"export": {"f1_mhz": 80, "f0_mhz": 70, "qubit_splitting_mhz": 10, "conversion": 1, "sample_rate": 150}}"#,
    )
    .unwrap();
    let o = geopulse(
        dir.path(),
        &["export-awg", "--config", "c.json", "--gate", "sigmaz"],
    );
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn heatmap_summary_is_written() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"gate": "sigmaz", "heatmap": {"eta_max": 0.5, "eta_points": 11, "delta_max_khz": 300, "delta_points": 31}}"#,
    )
    .unwrap();
    let o = geopulse(
        dir.path(),
        &["heatmap", "--config", "c.json", "--out-dir", "out"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&dir.path().join("out/summary.json"));
    assert!(s["sigmaz"]["zero_detuning_deviation"].as_f64().unwrap() < 1e-6);
    let map = fs::read_to_string(dir.path().join("out/map_sigmaz.csv")).unwrap();
    assert_eq!(map.lines().count(), 1 + 11 * 31);
}
