//! Preset-row checks run by `geopulse verify`.

use std::fmt;

use geopulse::analysis::{
    a2_robustness_map, bandwidth_at, compare_baselines, detuning_grid, Experiment, MapGrid,
};
use geopulse::gate_algebra::{Gate, GateParams};
use geopulse::optimizer::verify_published;
use geopulse::presets::Preset;
use geopulse::pulse_model::ConstraintSet;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Reported but not counted as a failure.
    pub informational: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match (self.passed, self.informational) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "INFO",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        informational: false,
        detail,
    }
}

const RESONANT_TOLERANCE: f64 = 1e-6;
const CONSTRAINT_RESIDUAL: f64 = 5e-4;

pub fn run_checks(preset: Preset, t1_us: f64) -> Result<Vec<Check>, CliError> {
    let coeffs = preset.coeffs();
    let mut out = Vec::new();

    let (odd, even) = ConstraintSet::gate_pair().residuals(&coeffs)?;
    out.push(check(
        "constraints",
        odd.abs() < CONSTRAINT_RESIDUAL && even.abs() < CONSTRAINT_RESIDUAL,
        format!("residuals ({odd:.1e}, {even:.1e}), limit {CONSTRAINT_RESIDUAL:.0e}"),
    ));

    for gate in Gate::ALL {
        let exp = Experiment::new(gate.params(), &coeffs, t1_us, preset.name());
        let f0 = exp.sweep(0.0, 3)?.at_zero().unwrap_or(f64::NAN);
        out.push(check(
            format!("resonance/{gate}"),
            (f0 - 1.0).abs() < RESONANT_TOLERANCE,
            format!("F(0) = {f0:.9}"),
        ));

        let p = verify_published(&coeffs, preset, gate.params(), t1_us)?;
        let band = preset.design_band_khz();
        match preset {
            Preset::Op1 => {
                let half = p.bandwidth_099.map(|b| b.half_width()).unwrap_or(0.0);
                let strict = p.bandwidth_099.is_some_and(|b| b.covers(band));
                let near = half >= 0.95 * band;
                out.push(check(
                    format!("plateau/{gate}"),
                    (strict || near) && p.band.average > 0.99,
                    format!(
                        "0.99-bandwidth ±{half:.1} kHz (need ±{band} within 5%), mean F over ±{band} kHz {:.5}, min {:.5}",
                        p.band.average, p.band.min
                    ),
                ));
            }
            Preset::Op2 => {
                out.push(check(
                    format!("plateau/{gate}"),
                    p.band.average >= 0.999,
                    format!(
                        "mean F over ±{band} kHz {:.5} (need ≥ 0.999), min {:.5}",
                        p.band.average, p.band.min
                    ),
                ));
                let mhz = p.peak_two_color_mhz;
                out.push(Check {
                    name: format!("peak-rabi/{gate}"),
                    passed: (mhz - 12.0).abs() <= 0.25 * 12.0,
                    informational: true,
                    detail: format!("gate-pair peak 2|Ω| = {mhz:.2} MHz (expected near 12 MHz)"),
                });
            }
        }

        if preset == Preset::Op1 {
            let grid = detuning_grid(1000.0, 801)?;
            let b = compare_baselines(&exp, &grid)?;
            let half = |c| bandwidth_at(c, 0.99).map(|b| b.half_width()).unwrap_or(0.0);
            let (o, g, s) = (half(&b.optimized), half(&b.gaussian), half(&b.square));
            out.push(check(
                format!("baselines/{gate}"),
                o > g && o > s,
                format!("0.99 half-widths: optimized {o:.1}, gaussian {g:.1}, square {s:.1} kHz"),
            ));

            let map = a2_robustness_map(&exp, &MapGrid::default())?;
            let min = map.min_within(0.3, 60.0);
            let dev = map
                .zero_detuning_column()
                .iter()
                .map(|f| (f - 1.0).abs())
                .fold(0.0, f64::max);
            out.push(check(
                format!("a2-rectangle/{gate}"),
                min >= 0.99 && dev <= RESONANT_TOLERANCE,
                format!("min F over |η| ≤ 0.3, |Δ| ≤ 60 kHz = {min:.5}; Δ = 0 deviation {dev:.1e}"),
            ));
        }
    }

    if preset == Preset::Op1 {
        let peak = |g: GateParams| {
            Experiment::new(g, &coeffs, t1_us, preset.name())
                .sequence()
                .map(|s| s.peak_omega1())
        };
        let ratio = peak(GateParams::sigma_z())? / peak(GateParams::hadamard())?;
        out.push(check(
            "rabi-ratio",
            (ratio - 1.082).abs() <= 0.01,
            format!("peak |Ω₁| σz / hadamard = {ratio:.4} (expected 1.082 ± 0.01)"),
        ));
    }
    Ok(out)
}
