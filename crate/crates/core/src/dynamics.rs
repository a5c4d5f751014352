//! Propagation of the detuned three-level system through a pulse sequence.
//!
//! Amplitudes are ordered (C₁, C₀, Cₑ) and obey
//!
//! ```text
//! Ċ₁ = −(i/2)·Ω₁·Cₑ
//! Ċ₀ = −(i/2)·Ω₀·Cₑ
//! Ċₑ = −(i/2)·Ω₁·C₁ − (i/2)·Ω₀*·C₀ − iΔ·Cₑ
//! ```
//!
//! with a single detuning Δ (rad/µs) on the excited level. Integration is
//! classical fixed-step RK4; each pair is stepped separately so the
//! discontinuity at t1 never falls inside a step. Envelopes are evaluated
//! analytically at the exact stage times, once per sequence, and the table is
//! shared by every detuning.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt_sig9;
use crate::gate_algebra::{dark_bright, QubitState};
use crate::pulse_model::{PulsePair, PulseSequence};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const HALF_I: Complex64 = Complex64 { re: 0.0, im: 0.5 };

pub const DEFAULT_STEPS_PER_PAIR: usize = 4000;
pub const DEFAULT_NORM_CEILING: f64 = 1e-8;

/// Accumulated RK4 phase error allowed per pair when picking a resolution.
const PHASE_ERROR_BUDGET: f64 = 1e-10;

/// Upper bound on automatically chosen resolutions.
const MAX_AUTO_STEPS: usize = 2_000_000;

/// Amplitudes (C₁, C₀, Cₑ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeLevelState {
    pub c1: Complex64,
    pub c0: Complex64,
    pub ce: Complex64,
}

impl ThreeLevelState {
    pub fn zero() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            c1: z,
            c0: z,
            ce: z,
        }
    }

    /// Embeds a qubit state (|0⟩, |1⟩ order) with Cₑ = 0.
    pub fn from_qubit(q: &QubitState) -> Self {
        Self {
            c1: q.c1,
            c0: q.c0,
            ce: Complex64::new(0.0, 0.0),
        }
    }

    /// Qubit-subspace projection, not renormalized.
    pub fn qubit_part(&self) -> QubitState {
        QubitState {
            c0: self.c0,
            c1: self.c1,
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c1.norm_sqr() + self.c0.norm_sqr() + self.ce.norm_sqr()
    }

    /// (|C₁|², |C₀|², |Cₑ|²).
    pub fn populations(&self) -> [f64; 3] {
        [self.c1.norm_sqr(), self.c0.norm_sqr(), self.ce.norm_sqr()]
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &ThreeLevelState) -> Complex64 {
        self.c1.conj() * other.c1 + self.c0.conj() * other.c0 + self.ce.conj() * other.ce
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self {
            c1: self.c1 * k,
            c0: self.c0 * k,
            ce: self.ce * k,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            c1: self.c1 + other.c1,
            c0: self.c0 + other.c0,
            ce: self.ce + other.ce,
        }
    }

    fn axpy(&self, h: f64, k: &Self) -> Self {
        Self {
            c1: self.c1 + k.c1 * h,
            c0: self.c0 + k.c0 * h,
            ce: self.ce + k.ce * h,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.c1 - other.c1)
            .norm()
            .max((self.c0 - other.c0).norm())
            .max((self.ce - other.ce).norm())
    }
}

/// Right-hand side of the coupled amplitude equations.
///
/// Ω₁ is real for every pulse in this scheme; the generator is Hermitian
/// only in that case, since the equations carry Ω₁ unconjugated on both
/// sides.
pub fn derivative(
    state: &ThreeLevelState,
    omega1: Complex64,
    omega0: Complex64,
    delta: f64,
) -> ThreeLevelState {
    ThreeLevelState {
        c1: -HALF_I * omega1 * state.ce,
        c0: -HALF_I * omega0 * state.ce,
        ce: -HALF_I * (omega1 * state.c1 + omega0.conj() * state.c0) - I * delta * state.ce,
    }
}

/// Hot-loop form of [`derivative`] with Ω₁ = w1·Ω and Ω₀ = w0·Ω.
#[inline(always)]
fn rhs(s: &ThreeLevelState, omega: f64, w1: f64, w0: Complex64, delta: f64) -> ThreeLevelState {
    let o1 = w1 * omega;
    let o0 = w0 * omega;
    let ce = s.ce;
    // −(i/2)·z = (z.im/2, −z.re/2)
    let m = |z: Complex64| Complex64::new(0.5 * z.im, -0.5 * z.re);
    let coupling = s.c1 * o1 + o0.conj() * s.c0;
    ThreeLevelState {
        c1: m(ce * o1),
        c0: m(o0 * ce),
        ce: m(coupling) + Complex64::new(delta * ce.im, -delta * ce.re),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub steps_per_pair: usize,
    /// Δ in rad/µs.
    pub detuning: f64,
    /// Largest tolerated |‖ψ‖² − 1| over the run.
    pub norm_ceiling: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            steps_per_pair: DEFAULT_STEPS_PER_PAIR,
            detuning: 0.0,
            norm_ceiling: DEFAULT_NORM_CEILING,
        }
    }
}

impl SimConfig {
    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.detuning = delta;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps_per_pair = steps;
        self
    }

    /// Copy of this configuration with `steps_per_pair` raised (never
    /// lowered) so that RK4 errors on `seq` stay inside the norm ceiling and
    /// a fixed phase-error budget, for every |Δ| ≤ `max_abs_detuning`.
    ///
    /// RK4 applied to an eigenmode with frequency ω loses (hω)⁶/72 of norm
    /// and (hω)⁵/120 of phase per step; summing over the pair gives
    /// h⁵∫ω⁶/72 and h⁴∫ω⁵/120, with ω(t) ≤ |Δ| + |Ω(t)|.
    pub fn resolved_for(&self, seq: &PulseSequence, max_abs_detuning: f64) -> SimConfig {
        self.resolved_within(seq, max_abs_detuning, PHASE_ERROR_BUDGET)
    }

    /// [`SimConfig::resolved_for`] with an explicit phase-error budget.
    pub fn resolved_within(
        &self,
        seq: &PulseSequence,
        max_abs_detuning: f64,
        phase_budget: f64,
    ) -> SimConfig {
        let norm_budget = self.norm_ceiling / 10.0;
        let mut steps = self.steps_per_pair;
        for pair in seq.pairs() {
            let duration = pair.duration();
            let samples = pair.envelope.sample(4000);
            let dt = duration / (samples.len() - 1) as f64;
            let (mut i5, mut i6) = (0.0, 0.0);
            for &(_, v) in &samples {
                let w = max_abs_detuning.abs() + v.abs();
                i5 += w.powi(5) * dt;
                i6 += w.powi(6) * dt;
            }
            let mut h = duration;
            if i6 > 0.0 {
                h = h.min((72.0 * norm_budget / i6).powf(0.2));
            }
            if i5 > 0.0 {
                h = h.min((120.0 * phase_budget / i5).powf(0.25));
            }
            let needed = (duration / h).ceil() as usize;
            steps = steps.max(needed.min(MAX_AUTO_STEPS));
        }
        SimConfig {
            steps_per_pair: steps,
            ..*self
        }
    }
}

/// One row of a population trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t_us: f64,
    pub p1: f64,
    pub p0: f64,
    pub pe: f64,
}

impl TracePoint {
    fn new(t_us: f64, s: &ThreeLevelState) -> Self {
        let [p1, p0, pe] = s.populations();
        Self { t_us, p1, p0, pe }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationResult {
    pub final_state: ThreeLevelState,
    pub trace: Vec<TracePoint>,
    pub norm_drift: f64,
}

/// Envelope samples at the RK4 stage times of one pair.
#[derive(Debug, Clone)]
struct PairTable {
    start: f64,
    h: f64,
    w1: f64,
    w0: Complex64,
    /// Ω at t = start + j·h/2, j = 0..=2N.
    omega: Vec<f64>,
}

impl PairTable {
    fn new(pair: &PulsePair, start: f64, steps: usize) -> Self {
        let duration = pair.duration();
        let h = duration / steps as f64;
        let omega = (0..=2 * steps)
            .map(|j| {
                let t = if j == 2 * steps {
                    duration
                } else {
                    0.5 * h * j as f64
                };
                pair.envelope.eval(t)
            })
            .collect();
        let (w1, w0) = pair.tone_weights();
        Self {
            start,
            h,
            w1,
            w0: Complex64::from_polar(w0, -pair.params.phi()),
            omega,
        }
    }

    fn steps(&self) -> usize {
        (self.omega.len() - 1) / 2
    }

    /// Steps through the pair; `observe` sees the state after every step.
    fn run(
        &self,
        mut s: ThreeLevelState,
        delta: f64,
        mut observe: impl FnMut(usize, &ThreeLevelState),
    ) -> ThreeLevelState {
        let (h, w1, w0) = (self.h, self.w1, self.w0);
        for k in 0..self.steps() {
            let (oa, ob, oc) = (
                self.omega[2 * k],
                self.omega[2 * k + 1],
                self.omega[2 * k + 2],
            );
            let k1 = rhs(&s, oa, w1, w0, delta);
            let k2 = rhs(&s.axpy(0.5 * h, &k1), ob, w1, w0, delta);
            let k3 = rhs(&s.axpy(0.5 * h, &k2), ob, w1, w0, delta);
            let k4 = rhs(&s.axpy(h, &k3), oc, w1, w0, delta);
            let h6 = h / 6.0;
            s = ThreeLevelState {
                c1: s.c1 + (k1.c1 + (k2.c1 + k3.c1) * 2.0 + k4.c1) * h6,
                c0: s.c0 + (k1.c0 + (k2.c0 + k3.c0) * 2.0 + k4.c0) * h6,
                ce: s.ce + (k1.ce + (k2.ce + k3.ce) * 2.0 + k4.ce) * h6,
            };
            observe(k, &s);
        }
        s
    }
}

/// Precomputed propagator for one sequence at a fixed resolution; reusable
/// across detunings and initial states.
#[derive(Debug, Clone)]
pub struct Propagator {
    tables: [PairTable; 2],
    t2: f64,
}

impl Propagator {
    pub fn new(seq: &PulseSequence, steps_per_pair: usize) -> Result<Self> {
        if steps_per_pair == 0 {
            return Err(Error::InvalidParameter("steps_per_pair must be ≥ 1".into()));
        }
        Ok(Self {
            tables: [
                PairTable::new(&seq.pair1, 0.0, steps_per_pair),
                PairTable::new(&seq.pair2, seq.t1_us, steps_per_pair),
            ],
            t2: seq.t2_us,
        })
    }

    pub fn steps_per_pair(&self) -> usize {
        self.tables[0].steps()
    }

    /// Full sequence from `initial`. With `record_trace` every step is
    /// recorded, starting at t = 0.
    pub fn run(
        &self,
        initial: ThreeLevelState,
        delta: f64,
        record_trace: bool,
        norm_ceiling: f64,
    ) -> Result<PropagationResult> {
        let n0 = initial.norm_sqr();
        let mut drift = 0.0f64;
        let mut trace = Vec::new();
        if record_trace {
            trace.reserve(2 * self.steps_per_pair() + 1);
            trace.push(TracePoint::new(0.0, &initial));
        }
        let mut s = initial;
        for (idx, table) in self.tables.iter().enumerate() {
            let last = table.steps() - 1;
            let end = if idx == 1 {
                self.t2
            } else {
                self.tables[1].start
            };
            s = table.run(s, delta, |k, st| {
                drift = drift.max((st.norm_sqr() - n0).abs());
                if record_trace {
                    let t = if k == last {
                        end
                    } else {
                        table.start + (k + 1) as f64 * table.h
                    };
                    trace.push(TracePoint::new(t, st));
                }
            });
        }
        if drift > norm_ceiling {
            let steps = self.steps_per_pair();
            let factor = (drift / norm_ceiling).powf(0.25) * 1.25;
            return Err(Error::NormDrift {
                drift,
                ceiling: norm_ceiling,
                steps,
                suggested_steps: (steps as f64 * factor).ceil() as usize,
            });
        }
        Ok(PropagationResult {
            final_state: s,
            trace,
            norm_drift: drift,
        })
    }

    /// Final state after a single pair (0 = gate, 1 = compensation).
    pub fn run_pair(
        &self,
        pair: usize,
        initial: ThreeLevelState,
        delta: f64,
    ) -> Result<ThreeLevelState> {
        let table = self
            .tables
            .get(pair)
            .ok_or_else(|| Error::InvalidParameter(format!("pair index {pair} out of range")))?;
        Ok(table.run(initial, delta, |_, _| {}))
    }

    /// Final state only, with the norm check.
    pub fn final_state(
        &self,
        initial: &QubitState,
        delta: f64,
        norm_ceiling: f64,
    ) -> Result<ThreeLevelState> {
        self.run(
            ThreeLevelState::from_qubit(initial),
            delta,
            false,
            norm_ceiling,
        )
        .map(|r| r.final_state)
        .map_err(|e| Error::Propagation {
            delta,
            source: Box::new(e),
        })
    }
}

/// Integrates from 0 to t2 with the population trace recorded at each step.
pub fn propagate(
    seq: &PulseSequence,
    initial: &QubitState,
    cfg: &SimConfig,
) -> Result<PropagationResult> {
    if (initial.norm_sqr() - 1.0).abs() > 1e-12 {
        return Err(Error::NotNormalized(initial.norm_sqr()));
    }
    Propagator::new(seq, cfg.steps_per_pair)?.run(
        ThreeLevelState::from_qubit(initial),
        cfg.detuning,
        true,
        cfg.norm_ceiling,
    )
}

/// |⟨ψ_tg|ψ⟩|² with the target in the qubit subspace. Any population left
/// in |e⟩ lowers the result.
pub fn fidelity(final_state: &ThreeLevelState, target: &QubitState) -> f64 {
    let overlap = target.c1.conj() * final_state.c1 + target.c0.conj() * final_state.c0;
    overlap.norm_sqr()
}

/// Resonant checks of the gate pair alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceCheck {
    /// |⟨d|ψ(t1)⟩|² starting from |d⟩.
    pub dark_overlap: f64,
    /// Re⟨−b|ψ(t1)⟩ starting from |b⟩; +1 for the ideal sign flip.
    pub bright_flip: f64,
    /// |⟨(d − b)/√2|ψ(t1)⟩|² starting from (d + b)/√2. Phase-insensitive
    /// confirmation of the relative sign between the two.
    pub superposition_fidelity: f64,
}

impl InvarianceCheck {
    /// Largest deviation of the three figures from 1.
    pub fn worst_error(&self) -> f64 {
        (1.0 - self.dark_overlap)
            .abs()
            .max((1.0 - self.bright_flip).abs())
            .max((1.0 - self.superposition_fidelity).abs())
    }
}

/// Propagates |d⟩, |b⟩ and (|d⟩ + |b⟩)/√2 through the gate pair at the
/// configured detuning (meaningful at Δ = 0).
pub fn dark_state_invariance_check(
    seq: &PulseSequence,
    cfg: &SimConfig,
) -> Result<InvarianceCheck> {
    let prop = Propagator::new(seq, cfg.steps_per_pair)?;
    let db = dark_bright(seq.gate_params());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let run = |q: &QubitState| prop.run_pair(0, ThreeLevelState::from_qubit(q), cfg.detuning);

    let d_end = run(&db.dark)?;
    let b_end = run(&db.bright)?;
    let plus = db.dark.combine(s.into(), &db.bright, s.into());
    let minus = db.dark.combine(s.into(), &db.bright, (-s).into());
    let sup_end = run(&plus)?;

    let d3 = ThreeLevelState::from_qubit(&db.dark);
    let minus_b = ThreeLevelState::from_qubit(&db.bright).scale((-1.0).into());
    Ok(InvarianceCheck {
        dark_overlap: d3.inner(&d_end).norm_sqr(),
        bright_flip: minus_b.inner(&b_end).re,
        superposition_fidelity: fidelity(&sup_end, &minus),
    })
}

/// Writes a trace as CSV with columns `t_us,p1,p0,pe`.
pub fn write_trace_csv<W: Write>(trace: &[TracePoint], mut out: W) -> Result<()> {
    writeln!(out, "t_us,p1,p0,pe")?;
    for p in trace {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_sig9(p.t_us),
            fmt_sig9(p.p1),
            fmt_sig9(p.p0),
            fmt_sig9(p.pe)
        )?;
    }
    Ok(())
}
