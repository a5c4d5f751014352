//! Minimax search over the free envelope coefficients.
//!
//! Candidates live in the free space a₁..a₆; the two pivot coefficients are
//! always solved from the constraints, so every evaluated envelope has the
//! correct areas.

mod nelder_mead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    band_stats, bandwidth_at, detuning_grid, gate_label, sweep_detuning, BandStats, Bandwidth,
};
use crate::dynamics::{fidelity, Propagator, SimConfig};
use crate::error::{Error, Result};
use crate::gate_algebra::{target_state, GateParams, QubitState};
use crate::presets::{Preset, OP1};
use crate::pulse_model::{
    build_sequence, lift_free_dofs, project_free_dofs, ConstraintSet, PairRole, PulseSequence,
};
use crate::units::{khz_to_rad_per_us, rad_per_us_to_khz, rad_per_us_to_mhz};

use nelder_mead::{minimize, SimplexSettings};

pub const DEFAULT_GRID_POINTS: usize = 21;

/// Phase-error budget per pair while searching; the winner is re-scored at
/// full accuracy.
const SEARCH_PHASE_BUDGET: f64 = 1e-6;
const SEARCH_NORM_CEILING: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub gate: GateParams,
    pub initial: QubitState,
    /// Δ values in rad/µs.
    pub detuning_grid: Vec<f64>,
    pub t1_us: f64,
    pub t2_us: f64,
    /// Soft cap on the peak single-tone Rabi frequency of the gate pair, rad/µs.
    pub rabi_cap: Option<f64>,
    pub sim: SimConfig,
}

impl ObjectiveSpec {
    /// Spec on a uniform grid of `n` points over ±`band_khz`, starting from |1⟩
    /// with t₂ = 2t₁.
    pub fn uniform(gate: GateParams, band_khz: f64, n: usize, t1_us: f64) -> Result<Self> {
        Ok(Self {
            gate,
            initial: QubitState::one(),
            detuning_grid: uniform_grid(band_khz, n)?,
            t1_us,
            t2_us: 2.0 * t1_us,
            rabi_cap: None,
            sim: SimConfig::default(),
        })
    }

    pub fn with_cap(mut self, cap: Option<f64>) -> Self {
        self.rabi_cap = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.detuning_grid.is_empty() {
            return Err(Error::InvalidParameter("detuning grid is empty".into()));
        }
        if self.detuning_grid.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter(
                "detuning grid has non-finite entries".into(),
            ));
        }
        if let Some(cap) = self.rabi_cap {
            if !(cap.is_finite() && cap > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "rabi cap must be positive, got {cap}"
                )));
            }
        }
        Ok(())
    }

    fn max_abs_detuning(&self) -> f64 {
        self.detuning_grid
            .iter()
            .map(|d| d.abs())
            .fold(0.0, f64::max)
    }
}

/// `n` uniform detunings over ±`band_khz`, in rad/µs.
pub fn uniform_grid(band_khz: f64, n: usize) -> Result<Vec<f64>> {
    Ok(detuning_grid(band_khz, n)?
        .into_iter()
        .map(khz_to_rad_per_us)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub worst_infidelity: f64,
    pub penalty: f64,
    pub per_point: Vec<f64>,
}

impl ObjectiveValue {
    pub fn total(&self) -> f64 {
        self.worst_infidelity + self.penalty
    }
}

fn gate_constraints() -> ConstraintSet {
    ConstraintSet::gate_pair()
}

fn sequence_for(free: &[f64], spec: &ObjectiveSpec) -> Result<(Vec<f64>, PulseSequence)> {
    let coeffs = lift_free_dofs(free, &gate_constraints())?;
    let seq = build_sequence(spec.gate, &coeffs, spec.t1_us, spec.t2_us)?;
    Ok((coeffs, seq))
}

fn score(seq: &PulseSequence, spec: &ObjectiveSpec, cfg: &SimConfig) -> Result<ObjectiveValue> {
    let prop = Propagator::new(seq, cfg.steps_per_pair)?;
    let target = target_state(&spec.initial, spec.gate);
    let per_point = spec
        .detuning_grid
        .par_iter()
        .map(|&delta| {
            let end = prop.final_state(&spec.initial, delta, cfg.norm_ceiling)?;
            Ok(fidelity(&end, &target))
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst_infidelity = per_point
        .iter()
        .map(|f| 1.0 - f)
        .fold(f64::NEG_INFINITY, f64::max);
    let penalty = match spec.rabi_cap {
        Some(cap) => (seq.peak_tone_rabi(PairRole::Gate) - cap).max(0.0).powi(2),
        None => 0.0,
    };
    Ok(ObjectiveValue {
        worst_infidelity,
        penalty,
        per_point,
    })
}

/// Lifts `free` to a full coefficient vector, propagates at every grid
/// detuning and returns the worst infidelity plus the soft Rabi penalty.
pub fn evaluate_objective(free: &[f64], spec: &ObjectiveSpec) -> Result<ObjectiveValue> {
    spec.validate()?;
    let (_, seq) = sequence_for(free, spec)?;
    let cfg = spec.sim.resolved_for(&seq, spec.max_abs_detuning());
    score(&seq, spec, &cfg)
}

fn evaluate_for_search(free: &[f64], spec: &ObjectiveSpec) -> Result<ObjectiveValue> {
    let (_, seq) = sequence_for(free, spec)?;
    let cfg = SimConfig {
        norm_ceiling: SEARCH_NORM_CEILING,
        ..spec.sim
    }
    .resolved_within(&seq, spec.max_abs_detuning(), SEARCH_PHASE_BUDGET);
    score(&seq, spec, &cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Relative size of the first simplex.
    pub initial_step: f64,
    /// Half-width of the uniform kick applied to restart points.
    pub restart_spread: f64,
    /// A run counts as converged when the search settled and the worst
    /// infidelity is at or below this goal.
    pub goal_infidelity: f64,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            tolerance: 1e-6,
            restarts: 8,
            seed: 0,
            initial_step: 0.1,
            restart_spread: 0.25,
            goal_infidelity: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub coeffs: Vec<f64>,
    pub free: Vec<f64>,
    pub worst_infidelity: f64,
    pub penalty: f64,
    pub per_point_fidelity: Vec<f64>,
    /// Grid detunings in kHz.
    pub grid_khz: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub settings: OptimizeSettings,
    pub gate: GateParams,
    pub t1_us: f64,
    pub t2_us: f64,
    pub rabi_cap: Option<f64>,
    /// max |F(Δ) − F(−Δ)| over mirrored grid points.
    pub asymmetry: f64,
    /// Peak single-tone Rabi frequency of the gate pair, rad/µs.
    pub peak_tone_rabi: f64,
    /// Peak two-color magnitude 2|Ω| of the gate pair, MHz.
    pub peak_two_color_mhz: f64,
    /// Same for the compensation pair (twice the gate pair when t₂ = 2t₁).
    pub peak_two_color_comp_mhz: f64,
}

impl OptimizationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Warm start: Op1 projected onto the free coefficients for σx, σy and σz,
/// zeros otherwise.
pub fn default_initial_point(gate: GateParams) -> Vec<f64> {
    let set = gate_constraints();
    let is_sigma = [
        GateParams::sigma_x(),
        GateParams::sigma_y(),
        GateParams::sigma_z(),
    ]
    .contains(&gate);
    if is_sigma {
        project_free_dofs(&OP1, &set).expect("preset has the full coefficient count")
    } else {
        vec![0.0; set.free_count()]
    }
}

fn grid_asymmetry(grid: &[f64], fs: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (i, &d) in grid.iter().enumerate() {
        if let Some(j) = grid
            .iter()
            .position(|&e| (e + d).abs() <= 1e-12 * (1.0 + d.abs()))
        {
            worst = worst.max((fs[i] - fs[j]).abs());
        }
    }
    worst
}

struct RestartOutcome {
    x: Vec<f64>,
    iterations: usize,
    evaluations: usize,
    tolerance_reached: bool,
}

/// Nelder–Mead with seeded random restarts. Restart 0 starts from `init`;
/// the others from uniform kicks around it. The best search point is
/// re-scored at full accuracy and never reported worse than `init`.
pub fn optimize(
    spec: &ObjectiveSpec,
    init: &[f64],
    settings: &OptimizeSettings,
) -> Result<OptimizationReport> {
    spec.validate()?;
    let set = gate_constraints();
    if init.len() != set.free_count() {
        return Err(Error::LengthMismatch {
            expected: set.free_count(),
            got: init.len(),
        });
    }
    let simplex = SimplexSettings {
        max_iterations: settings.max_iterations,
        f_tolerance: settings.tolerance,
        x_tolerance: settings.tolerance,
        initial_step: settings.initial_step,
    };
    let objective = |x: &[f64]| {
        evaluate_for_search(x, spec)
            .map(|v| v.total())
            .unwrap_or(f64::INFINITY)
    };

    let starts: Vec<Vec<f64>> = (0..settings.restarts.max(1))
        .map(|r| {
            if r == 0 {
                return init.to_vec();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(r as u64);
            init.iter()
                .map(|&v| {
                    v + settings.restart_spread * v.abs().max(0.1) * rng.gen_range(-1.0..=1.0)
                })
                .collect()
        })
        .collect();

    let runs: Vec<(f64, RestartOutcome)> = starts
        .par_iter()
        .map(|x0| {
            let out = minimize(objective, x0, &simplex);
            (
                out.fx,
                RestartOutcome {
                    x: out.x,
                    iterations: out.iterations,
                    evaluations: out.evaluations,
                    tolerance_reached: out.tolerance_reached,
                },
            )
        })
        .collect();

    let iterations = runs.iter().map(|r| r.1.iterations).sum();
    let mut evaluations: usize = runs.iter().map(|r| r.1.evaluations).sum();
    // first of the equal minima, so the choice does not depend on scheduling
    let (_, best) = runs
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one restart");

    let initial_value = evaluate_objective(init, spec);
    let best_value = evaluate_objective(&best.x, spec);
    evaluations += 2;
    let (free, value, settled) = match (initial_value, best_value) {
        (Ok(i), Ok(b)) if b.total() <= i.total() => (best.x, b, best.tolerance_reached),
        (Ok(i), Ok(_)) => (init.to_vec(), i, false),
        (Ok(i), Err(_)) => (init.to_vec(), i, false),
        (Err(_), Ok(b)) => (best.x, b, best.tolerance_reached),
        (Err(e), Err(_)) => return Err(e),
    };

    let (coeffs, seq) = sequence_for(&free, spec)?;
    Ok(OptimizationReport {
        asymmetry: grid_asymmetry(&spec.detuning_grid, &value.per_point),
        converged: settled && value.worst_infidelity <= settings.goal_infidelity,
        coeffs,
        free,
        worst_infidelity: value.worst_infidelity,
        penalty: value.penalty,
        per_point_fidelity: value.per_point,
        grid_khz: spec
            .detuning_grid
            .iter()
            .map(|&d| rad_per_us_to_khz(d))
            .collect(),
        iterations,
        evaluations,
        settings: *settings,
        gate: spec.gate,
        t1_us: spec.t1_us,
        t2_us: spec.t2_us,
        rabi_cap: spec.rabi_cap,
        peak_tone_rabi: seq.peak_tone_rabi(PairRole::Gate),
        peak_two_color_mhz: rad_per_us_to_mhz(seq.peak_two_color_rabi(PairRole::Gate)),
        peak_two_color_comp_mhz: rad_per_us_to_mhz(seq.peak_two_color_rabi(PairRole::Compensation)),
    })
}

/// Sweep spacing used to check preset coefficient rows.
pub const VERIFY_SPACING_KHZ: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedCheck {
    pub preset: Preset,
    pub gate: String,
    pub design_band_khz: f64,
    /// `None` when F(0) is already below 0.99.
    pub bandwidth_099: Option<Bandwidth>,
    pub band: BandStats,
    /// Peak |Ω₁| of the gate pair, rad/µs.
    pub peak_omega1: f64,
    /// Peak 2|Ω| of the gate pair, MHz.
    pub peak_two_color_mhz: f64,
    pub peak_two_color_comp_mhz: f64,
}

/// Sweeps `coeffs` for `gate` over ±1.5 × the preset's design band at
/// 2.5 kHz spacing and summarizes the plateau.
pub fn verify_published(
    coeffs: &[f64],
    preset: Preset,
    gate: GateParams,
    t1_us: f64,
) -> Result<PublishedCheck> {
    let band = preset.design_band_khz();
    let half = 1.5 * band;
    let n = 2 * (half / VERIFY_SPACING_KHZ).round() as usize + 1;
    let grid = detuning_grid(half, n)?;
    let seq = build_sequence(gate, coeffs, t1_us, 2.0 * t1_us)?;
    let curve = sweep_detuning(
        &seq,
        &QubitState::one(),
        &grid,
        &SimConfig::default(),
        preset.name(),
        &gate_label(gate),
    )?;
    let bandwidth_099 = match bandwidth_at(&curve, 0.99) {
        Ok(b) => Some(b),
        Err(Error::NoPlateau { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(PublishedCheck {
        preset,
        gate: gate_label(gate),
        design_band_khz: band,
        bandwidth_099,
        band: band_stats(&curve, band)?,
        peak_omega1: seq.peak_omega1(),
        peak_two_color_mhz: rad_per_us_to_mhz(seq.peak_two_color_rabi(PairRole::Gate)),
        peak_two_color_comp_mhz: rad_per_us_to_mhz(seq.peak_two_color_rabi(PairRole::Compensation)),
    })
}
