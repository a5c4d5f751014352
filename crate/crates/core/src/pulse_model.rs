//! Pulse envelopes, the endpoint constraints on the cosine coefficients, and
//! assembly of the two-pair pulse sequence.
//!
//! The robust envelope of duration T and area α is
//!
//! ```text
//! Ω(t) = α/T + Σₙ aₙ·(nπ/T)·cos(nπt/T),   n = 1..2k
//! ```
//!
//! Every cosine term integrates to zero over [0, T], so the pulse area is α
//! regardless of the coefficients. Requiring Ω(0) = Ω(T) = 0 gives two linear
//! constraints, one on the odd and one on the even coefficients
//! ([`ConstraintSet`]). For α = π the even target is −1/2, for α = 2π it is −1.
//!
//! All envelope values are angular Rabi frequencies in rad/µs.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::gate_algebra::{compensation_params, GateParams};

/// Harmonic cap k used throughout (8 coefficients).
pub const DEFAULT_HARMONICS: usize = 4;

/// Largest constraint residual accepted for externally supplied coefficients.
/// Published coefficient tables are rounded to four decimals.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-3;

/// Number of grid intervals used when scanning an envelope for extrema and
/// half-maximum crossings.
const SCAN_INTERVALS: usize = 20_000;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

fn check_area(area: f64) -> Result<()> {
    if area.is_finite() && area >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "pulse area must be finite and non-negative, got {area}"
        )))
    }
}

/// Constant term plus truncated cosine series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCosine")]
pub struct CosineEnvelope {
    duration_us: f64,
    area_rad: f64,
    coeffs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawCosine {
    duration_us: f64,
    area_rad: f64,
    coeffs: Vec<f64>,
}

impl TryFrom<RawCosine> for CosineEnvelope {
    type Error = Error;

    fn try_from(raw: RawCosine) -> Result<Self> {
        CosineEnvelope::new(raw.duration_us, raw.area_rad, raw.coeffs)
    }
}

impl CosineEnvelope {
    pub fn new(duration_us: f64, area_rad: f64, coeffs: Vec<f64>) -> Result<Self> {
        check_positive("duration", duration_us)?;
        check_area(area_rad)?;
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite cosine coefficient {bad}"
            )));
        }
        Ok(Self {
            duration_us,
            area_rad,
            coeffs,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration_us
    }

    pub fn area(&self) -> f64 {
        self.area_rad
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Ω(t) for t ∈ [0, duration].
    pub fn value(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.duration_us).contains(&t) {
            return Err(Error::OutsideDomain {
                t,
                duration: self.duration_us,
            });
        }
        Ok(self.eval(t))
    }

    /// Ω(t) without the domain check; the series is evaluated with the
    /// Chebyshev recurrence cos((n+1)x) = 2cos x·cos(nx) − cos((n−1)x).
    pub(crate) fn eval(&self, t: f64) -> f64 {
        let w = PI / self.duration_us;
        let x = w * t;
        let c1 = x.cos();
        let (mut prev, mut cur) = (1.0, c1);
        let mut series = 0.0;
        for (i, &a) in self.coeffs.iter().enumerate() {
            let n = (i + 1) as f64;
            series += a * n * cur;
            let next = 2.0 * c1 * cur - prev;
            prev = cur;
            cur = next;
        }
        self.area_rad / self.duration_us + w * series
    }

    /// Same shape with every coefficient multiplied by `factor` and the area
    /// scaled alike, i.e. `factor·Ω` stretched onto `duration_us`.
    pub fn scaled(&self, factor: f64, duration_us: f64) -> Result<CosineEnvelope> {
        CosineEnvelope::new(
            duration_us,
            self.area_rad * factor,
            self.coeffs.iter().map(|a| a * factor).collect(),
        )
    }
}

/// Truncated Gaussian centered at duration/2, renormalized so that the
/// truncated integral equals the requested area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian")]
pub struct GaussianEnvelope {
    duration_us: f64,
    fwhm_us: f64,
    area_rad: f64,
    #[serde(skip)]
    peak: f64,
}

#[derive(Deserialize)]
struct RawGaussian {
    duration_us: f64,
    fwhm_us: f64,
    area_rad: f64,
}

impl TryFrom<RawGaussian> for GaussianEnvelope {
    type Error = Error;

    fn try_from(raw: RawGaussian) -> Result<Self> {
        gaussian_envelope(raw.duration_us, raw.fwhm_us, raw.area_rad)
    }
}

impl GaussianEnvelope {
    pub fn duration(&self) -> f64 {
        self.duration_us
    }

    pub fn fwhm(&self) -> f64 {
        self.fwhm_us
    }

    pub fn area(&self) -> f64 {
        self.area_rad
    }

    fn sigma(&self) -> f64 {
        self.fwhm_us / (2.0 * (2.0 * LN_2).sqrt())
    }

    fn eval(&self, t: f64) -> f64 {
        let s = self.sigma();
        let d = t - 0.5 * self.duration_us;
        self.peak * (-d * d / (2.0 * s * s)).exp()
    }
}

/// Truncated Gaussian of the given FWHM and exact area on [0, duration].
pub fn gaussian_envelope(
    duration_us: f64,
    fwhm_us: f64,
    area_rad: f64,
) -> Result<GaussianEnvelope> {
    check_positive("duration", duration_us)?;
    check_positive("FWHM", fwhm_us)?;
    check_positive("area", area_rad)?;
    if fwhm_us >= duration_us {
        return Err(Error::InvalidParameter(format!(
            "FWHM {fwhm_us} µs must be shorter than the duration {duration_us} µs"
        )));
    }
    let sigma = fwhm_us / (2.0 * (2.0 * LN_2).sqrt());
    // ∫₀ᵀ exp(−(t − T/2)²/2σ²) dt
    let unit_area = sigma * (2.0 * PI).sqrt() * erf(duration_us / (2.0 * 2.0f64.sqrt() * sigma));
    Ok(GaussianEnvelope {
        duration_us,
        fwhm_us,
        area_rad,
        peak: area_rad / unit_area,
    })
}

/// Constant Rabi frequency area/duration; the edges are discontinuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareEnvelope {
    duration_us: f64,
    area_rad: f64,
}

impl SquareEnvelope {
    pub fn duration(&self) -> f64 {
        self.duration_us
    }

    pub fn area(&self) -> f64 {
        self.area_rad
    }
}

pub fn square_envelope(duration_us: f64, area_rad: f64) -> Result<SquareEnvelope> {
    check_positive("duration", duration_us)?;
    check_area(area_rad)?;
    Ok(SquareEnvelope {
        duration_us,
        area_rad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Cosine,
    Gaussian,
    Square,
}

impl EnvelopeKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvelopeKind::Cosine => "cosine",
            EnvelopeKind::Gaussian => "gaussian",
            EnvelopeKind::Square => "square",
        }
    }
}

/// Any real-valued envelope Ω(t) on [0, duration].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    Cosine(CosineEnvelope),
    Gaussian(GaussianEnvelope),
    Square(SquareEnvelope),
}

impl Envelope {
    pub fn kind(&self) -> EnvelopeKind {
        match self {
            Envelope::Cosine(_) => EnvelopeKind::Cosine,
            Envelope::Gaussian(_) => EnvelopeKind::Gaussian,
            Envelope::Square(_) => EnvelopeKind::Square,
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            Envelope::Cosine(e) => e.duration_us,
            Envelope::Gaussian(e) => e.duration_us,
            Envelope::Square(e) => e.duration_us,
        }
    }

    /// Pulse area ∫Ω dt, exact by construction.
    pub fn area(&self) -> f64 {
        match self {
            Envelope::Cosine(e) => e.area_rad,
            Envelope::Gaussian(e) => e.area_rad,
            Envelope::Square(e) => e.area_rad,
        }
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let duration = self.duration();
        if !(0.0..=duration).contains(&t) {
            return Err(Error::OutsideDomain { t, duration });
        }
        Ok(self.eval(t))
    }

    pub(crate) fn eval(&self, t: f64) -> f64 {
        match self {
            Envelope::Cosine(e) => e.eval(t),
            Envelope::Gaussian(e) => e.eval(t),
            Envelope::Square(e) => e.area_rad / e.duration_us,
        }
    }

    /// Envelope for the compensation pair: the same shape with twice the area,
    /// stretched onto `duration_us`. For equal durations this is exactly 2Ω(t).
    pub fn compensation(&self, duration_us: f64) -> Result<Envelope> {
        Ok(match self {
            Envelope::Cosine(e) => Envelope::Cosine(e.scaled(2.0, duration_us)?),
            Envelope::Gaussian(e) => {
                let fwhm = e.fwhm_us * duration_us / e.duration_us;
                Envelope::Gaussian(gaussian_envelope(duration_us, fwhm, 2.0 * e.area_rad)?)
            }
            Envelope::Square(e) => {
                Envelope::Square(square_envelope(duration_us, 2.0 * e.area_rad)?)
            }
        })
    }

    /// Uniform samples (t, Ω(t)) including both endpoints.
    pub fn sample(&self, intervals: usize) -> Vec<(f64, f64)> {
        let n = intervals.max(1);
        let h = self.duration() / n as f64;
        (0..=n)
            .map(|i| {
                let t = if i == n {
                    self.duration()
                } else {
                    i as f64 * h
                };
                (t, self.eval(t))
            })
            .collect()
    }

    /// max |Ω(t)| over a dense grid.
    pub fn peak_abs(&self) -> f64 {
        self.sample(SCAN_INTERVALS)
            .into_iter()
            .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
    }
}

impl From<CosineEnvelope> for Envelope {
    fn from(e: CosineEnvelope) -> Self {
        Envelope::Cosine(e)
    }
}

impl From<GaussianEnvelope> for Envelope {
    fn from(e: GaussianEnvelope) -> Self {
        Envelope::Gaussian(e)
    }
}

impl From<SquareEnvelope> for Envelope {
    fn from(e: SquareEnvelope) -> Self {
        Envelope::Square(e)
    }
}

/// Endpoint-zero constraints on a coefficient vector a₁..a₂ₖ:
///
/// ```text
/// a₁ + 3a₃ + … + (2k−1)a₂ₖ₋₁ = odd_target
/// a₂ + 2a₄ + … +     k·a₂ₖ   = even_target
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub odd_target: f64,
    pub even_target: f64,
    pub k: usize,
}

impl ConstraintSet {
    /// Area-π gate pair: targets (0, −1/2).
    pub fn gate_pair() -> Self {
        Self {
            odd_target: 0.0,
            even_target: -0.5,
            k: DEFAULT_HARMONICS,
        }
    }

    /// Area-2π compensation pair: targets (0, −1).
    pub fn compensation_pair() -> Self {
        Self {
            odd_target: 0.0,
            even_target: -1.0,
            k: DEFAULT_HARMONICS,
        }
    }

    /// Constraints that make an envelope of the given area vanish at both
    /// endpoints: the even target is −area/2π.
    pub fn for_area(area_rad: f64, k: usize) -> Self {
        Self {
            odd_target: 0.0,
            even_target: -area_rad / (2.0 * PI),
            k,
        }
    }

    pub fn coeff_count(&self) -> usize {
        2 * self.k
    }

    pub fn free_count(&self) -> usize {
        2 * self.k - 2
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("harmonic cap k must be ≥ 1".into()));
        }
        if len != self.coeff_count() {
            return Err(Error::LengthMismatch {
                expected: self.coeff_count(),
                got: len,
            });
        }
        Ok(())
    }

    /// (Σ(2j−1)a₂ⱼ₋₁ − odd_target, Σ j·a₂ⱼ − even_target).
    pub fn residuals(&self, coeffs: &[f64]) -> Result<(f64, f64)> {
        self.check_len(coeffs.len())?;
        let (mut odd, mut even) = (0.0, 0.0);
        for j in 1..=self.k {
            odd += (2 * j - 1) as f64 * coeffs[2 * j - 2];
            even += j as f64 * coeffs[2 * j - 1];
        }
        Ok((odd - self.odd_target, even - self.even_target))
    }

    pub fn check(&self, coeffs: &[f64], tolerance: f64) -> Result<()> {
        let (odd, even) = self.residuals(coeffs)?;
        if odd.abs() > tolerance || even.abs() > tolerance {
            return Err(Error::ConstraintViolation {
                odd,
                even,
                tolerance,
            });
        }
        Ok(())
    }
}

/// Free function form of [`ConstraintSet::residuals`].
pub fn constraint_residuals(coeffs: &[f64], set: &ConstraintSet) -> Result<(f64, f64)> {
    set.residuals(coeffs)
}

/// Maps the 2k − 2 free coefficients a₁..a₂ₖ₋₂ to a full vector that
/// satisfies both constraints exactly, solving for the two highest
/// harmonics a₂ₖ₋₁ and a₂ₖ.
pub fn lift_free_dofs(free: &[f64], set: &ConstraintSet) -> Result<Vec<f64>> {
    if set.k == 0 {
        return Err(Error::InvalidParameter("harmonic cap k must be ≥ 1".into()));
    }
    if free.len() != set.free_count() {
        return Err(Error::LengthMismatch {
            expected: set.free_count(),
            got: free.len(),
        });
    }
    let k = set.k;
    let (mut odd, mut even) = (0.0, 0.0);
    for j in 1..k {
        odd += (2 * j - 1) as f64 * free[2 * j - 2];
        even += j as f64 * free[2 * j - 1];
    }
    let mut coeffs = free.to_vec();
    coeffs.push((set.odd_target - odd) / (2 * k - 1) as f64);
    coeffs.push((set.even_target - even) / k as f64);
    Ok(coeffs)
}

/// Right inverse of [`lift_free_dofs`]: drops the two pivot coefficients.
pub fn project_free_dofs(coeffs: &[f64], set: &ConstraintSet) -> Result<Vec<f64>> {
    set.check_len(coeffs.len())?;
    Ok(coeffs[..set.free_count()].to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRole {
    Gate,
    Compensation,
}

/// One two-color pulse pair: Ω₁(t) = 2B·Ω(t) on |1⟩ ↔ |e⟩ and
/// Ω₀(t) = 2A·Ω(t)·e^{−iφ} on |0⟩ ↔ |e⟩, with t local to the pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulsePair {
    pub envelope: Envelope,
    pub params: GateParams,
    pub role: PairRole,
}

impl PulsePair {
    pub fn duration(&self) -> f64 {
        self.envelope.duration()
    }

    /// Real tone weights (2B, 2A) multiplying Ω(t).
    pub fn tone_weights(&self) -> (f64, f64) {
        (2.0 * self.params.b(), 2.0 * self.params.a())
    }

    /// (Ω₁, Ω₀) at local time t ∈ [0, duration].
    pub fn fields(&self, t: f64) -> Result<(Complex64, Complex64)> {
        let omega = self.envelope.value(t)?;
        Ok(self.fields_from_envelope(omega))
    }

    pub(crate) fn fields_from_envelope(&self, omega: f64) -> (Complex64, Complex64) {
        let (w1, w0) = self.tone_weights();
        (
            Complex64::new(w1 * omega, 0.0),
            Complex64::from_polar(w0 * omega, -self.params.phi()),
        )
    }
}

/// Gate pair on [0, t1] followed by the compensation pair on [t1, t2].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub pair1: PulsePair,
    pub pair2: PulsePair,
    pub t1_us: f64,
    pub t2_us: f64,
}

/// Default end time: the compensation pair lasts as long as the gate pair.
pub fn default_t2(t1_us: f64) -> f64 {
    2.0 * t1_us
}

/// Robust two-pair sequence from a gate-pair coefficient vector.
///
/// The coefficients must meet the area-π constraints within
/// [`CONSTRAINT_TOLERANCE`]. The compensation pair uses (π − θ, π + φ) and
/// coefficients 2aₙ on duration t2 − t1, which satisfy the area-2π
/// constraints and reproduce 2Ω(t − t1) when t2 = 2·t1.
pub fn build_sequence(
    params: GateParams,
    coeffs: &[f64],
    t1_us: f64,
    t2_us: f64,
) -> Result<PulseSequence> {
    let set = ConstraintSet {
        k: coeffs.len().div_ceil(2).max(1),
        ..ConstraintSet::gate_pair()
    };
    if !coeffs.len().is_multiple_of(2) {
        return Err(Error::LengthMismatch {
            expected: coeffs.len() + 1,
            got: coeffs.len(),
        });
    }
    set.check(coeffs, CONSTRAINT_TOLERANCE)?;
    let envelope = CosineEnvelope::new(t1_us, PI, coeffs.to_vec())?;
    PulseSequence::from_envelope(params, envelope.into(), t2_us)
}

impl PulseSequence {
    /// Sequence from an arbitrary gate-pair envelope (area π expected but not
    /// enforced). Used for Gaussian/square baselines and perturbation studies.
    pub fn from_envelope(
        params: GateParams,
        envelope: Envelope,
        t2_us: f64,
    ) -> Result<PulseSequence> {
        let t1_us = envelope.duration();
        if !(t2_us.is_finite() && t2_us > t1_us) {
            return Err(Error::InvalidParameter(format!(
                "t2 = {t2_us} µs must exceed t1 = {t1_us} µs"
            )));
        }
        let comp = envelope.compensation(t2_us - t1_us)?;
        Ok(PulseSequence {
            pair1: PulsePair {
                envelope,
                params,
                role: PairRole::Gate,
            },
            pair2: PulsePair {
                envelope: comp,
                params: compensation_params(params),
                role: PairRole::Compensation,
            },
            t1_us,
            t2_us,
        })
    }

    /// Sequence with Ω ≡ 0 in both pairs.
    pub fn zero(params: GateParams, t1_us: f64, t2_us: f64) -> Result<PulseSequence> {
        PulseSequence::from_envelope(params, square_envelope(t1_us, 0.0)?.into(), t2_us)
    }

    pub fn gate_params(&self) -> GateParams {
        self.pair1.params
    }

    pub fn pairs(&self) -> [&PulsePair; 2] {
        [&self.pair1, &self.pair2]
    }

    /// Pair active at global time t and its start time; t1 belongs to pair 2.
    pub fn pair_at(&self, t: f64) -> Result<(&PulsePair, f64)> {
        if !(0.0..=self.t2_us).contains(&t) {
            return Err(Error::OutsideDomain {
                t,
                duration: self.t2_us,
            });
        }
        if t < self.t1_us {
            Ok((&self.pair1, 0.0))
        } else {
            Ok((&self.pair2, self.t1_us))
        }
    }

    /// (Ω₁, Ω₀) at global time t ∈ [0, t2].
    pub fn fields_at(&self, t: f64) -> Result<(Complex64, Complex64)> {
        let (pair, start) = self.pair_at(t)?;
        pair.fields((t - start).min(pair.duration()))
    }

    /// Largest single-tone magnitude max(|Ω₁|, |Ω₀|) over the given pair.
    pub fn peak_tone_rabi(&self, pair: PairRole) -> f64 {
        let p = match pair {
            PairRole::Gate => &self.pair1,
            PairRole::Compensation => &self.pair2,
        };
        let (w1, w0) = p.tone_weights();
        p.envelope.peak_abs() * w1.abs().max(w0.abs())
    }

    /// Peak |Ω₁| of the gate pair.
    pub fn peak_omega1(&self) -> f64 {
        self.pair1.envelope.peak_abs() * self.pair1.tone_weights().0.abs()
    }

    /// Peak two-color magnitude √(|Ω₁|² + |Ω₀|²) = 2|Ω(t)| of the given pair.
    pub fn peak_two_color_rabi(&self, pair: PairRole) -> f64 {
        let p = match pair {
            PairRole::Gate => &self.pair1,
            PairRole::Compensation => &self.pair2,
        };
        2.0 * p.envelope.peak_abs()
    }
}

/// Result of a full-width-at-half-maximum measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fwhm {
    pub width: f64,
    pub left: f64,
    pub right: f64,
    /// More than two half-maximum crossings were found; `width` spans the
    /// outermost pair.
    pub multimodal: bool,
}

/// FWHM of the dominant lobe, located on a dense grid and refined by
/// bisection. An envelope still above half maximum at an edge (e.g. square)
/// contributes that edge as the crossing.
pub fn measure_fwhm(env: &Envelope) -> Result<Fwhm> {
    let samples = env.sample(SCAN_INTERVALS);
    let max = samples
        .iter()
        .fold(f64::NEG_INFINITY, |m, &(_, v)| m.max(v));
    if max.is_nan() || max <= 0.0 {
        return Err(Error::InvalidParameter(
            "envelope has no positive lobe".into(),
        ));
    }
    let half = 0.5 * max;
    let above = |v: f64| v >= half;

    let mut crossings = Vec::new();
    for w in samples.windows(2) {
        let ((ta, va), (tb, vb)) = (w[0], w[1]);
        if above(va) != above(vb) {
            crossings.push(bisect(|t| env.eval(t) - half, ta, tb));
        }
    }
    let first_above = above(samples[0].1);
    let last_above = above(samples[samples.len() - 1].1);
    let left = if first_above { 0.0 } else { crossings[0] };
    let right = if last_above {
        env.duration()
    } else {
        *crossings
            .last()
            .expect("a rising crossing implies a falling one")
    };
    let edges = crossings.len() + usize::from(first_above) + usize::from(last_above);
    Ok(Fwhm {
        width: right - left,
        left,
        right,
        multimodal: edges > 2,
    })
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) >= 0.0) == (f_lo >= 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{OP1, OP2};

    use proptest::prelude::*;

    /// Composite Simpson quadrature used as an independent area oracle.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    /// Direct evaluation of the series with one cosine per term.
    fn direct(coeffs: &[f64], t1: f64, area: f64, t: f64) -> f64 {
        area / t1
            + coeffs
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let n = (i + 1) as f64;
                    a * n * PI / t1 * (n * PI * t / t1).cos()
                })
                .sum::<f64>()
    }

    #[test]
    fn recurrence_matches_direct_cosines() {
        let env = CosineEnvelope::new(4.0, PI, OP2.to_vec()).unwrap();
        for i in 0..=400 {
            let t = 4.0 * i as f64 / 400.0;
            assert!((env.eval(t) - direct(&OP2, 4.0, PI, t)).abs() < 1e-11);
        }
    }

    #[test]
    fn op1_endpoints_vanish() {
        // Op1 is rounded to four decimals; the constraint residuals (≈3e-4)
        // leave Ω(0) ≈ (π/4)·(odd + 2·even) ≈ 4e-5.
        let env = CosineEnvelope::new(4.0, PI, OP1.to_vec()).unwrap();
        assert!(env.value(0.0).unwrap().abs() < 1e-3);
        assert!(env.value(4.0).unwrap().abs() < 1e-3);
        // after projection onto the constraint surface the zeros are exact
        let set = ConstraintSet::gate_pair();
        let exact = lift_free_dofs(&project_free_dofs(&OP1, &set).unwrap(), &set).unwrap();
        let env = CosineEnvelope::new(4.0, PI, exact).unwrap();
        assert!(env.value(0.0).unwrap().abs() < 1e-9);
        assert!(env.value(4.0).unwrap().abs() < 1e-9);
    }

    #[test]
    fn op1_midpoint_value() {
        // brute-force Eq.-2 style sum: at t = T/2 only even n survive, with
        // cos(nπ/2) = (−1)^{n/2}
        let t1 = 4.0;
        let expected = PI / t1 * (1.0 + 2.0 * 0.8980 + 4.0 * 0.3668 + 6.0 * 0.1358 + 8.0 * 0.0179);
        let env = CosineEnvelope::new(t1, PI, OP1.to_vec()).unwrap();
        let v = env.value(2.0).unwrap();
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        assert!((v - 4.10).abs() < 0.01);
        assert!((crate::units::rad_per_us_to_mhz(v) - 0.653).abs() < 1e-3);
    }

    #[test]
    fn zero_coefficients_give_square_limit() {
        let env = CosineEnvelope::new(4.0, PI, vec![0.0; 8]).unwrap();
        for t in [0.0, 1.3, 4.0] {
            assert!((env.value(t).unwrap() - PI / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn value_outside_domain_is_error() {
        let env = CosineEnvelope::new(4.0, PI, OP1.to_vec()).unwrap();
        assert!(matches!(env.value(-1e-9), Err(Error::OutsideDomain { .. })));
        assert!(matches!(
            env.value(4.0001),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(Envelope::from(env).value(5.0).is_err());
    }

    #[test]
    fn published_rows_residuals() {
        let set = ConstraintSet::gate_pair();
        let (odd, even) = set.residuals(&OP1).unwrap();
        // 0.0246 + 0.0198 − 0.0105 − 0.0336 and −0.898 + 0.7336 − 0.4074 + 0.0716 + 0.5
        assert!((odd - 0.0003).abs() < 1e-12, "{odd}");
        assert!((even - (-0.0002)).abs() < 1e-12, "{even}");
        let (odd, even) = set.residuals(&OP2).unwrap();
        assert!(odd.abs() < 5e-4 && even.abs() < 5e-4, "{odd} {even}");
    }

    #[test]
    fn zero_vector_residuals() {
        let (odd, even) = constraint_residuals(&[0.0; 8], &ConstraintSet::gate_pair()).unwrap();
        assert_eq!((odd, even), (0.0, 0.5));
    }

    #[test]
    fn residual_length_mismatch() {
        let err = ConstraintSet::gate_pair().residuals(&[0.0; 7]).unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                expected: 8,
                got: 7
            }
        ));
        assert!(lift_free_dofs(&[0.0; 5], &ConstraintSet::gate_pair()).is_err());
    }

    #[test]
    fn lift_of_zero_is_feasible() {
        let set = ConstraintSet::gate_pair();
        let c = lift_free_dofs(&[0.0; 6], &set).unwrap();
        assert_eq!(set.residuals(&c).unwrap(), (0.0, 0.0));
        assert_eq!(c[7], -0.125);
    }

    #[test]
    fn project_then_lift_recovers_op1() {
        let set = ConstraintSet::gate_pair();
        let c = lift_free_dofs(&project_free_dofs(&OP1, &set).unwrap(), &set).unwrap();
        for (a, b) in c.iter().zip(OP1.iter()) {
            assert!((a - b).abs() < 5e-4);
        }
    }

    #[test]
    fn build_rejects_infeasible_coefficients() {
        let err = build_sequence(GateParams::sigma_x(), &[0.0; 8], 4.0, 8.0).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation { .. }));
        assert!(build_sequence(GateParams::sigma_x(), &OP1, 4.0, 4.0).is_err());
        assert!(build_sequence(GateParams::sigma_x(), &OP1, 4.0, 8.0).is_ok());
    }

    #[test]
    fn sigma_z_has_no_zero_tone() {
        let seq = build_sequence(GateParams::sigma_z(), &OP1, 4.0, 8.0).unwrap();
        for i in 0..=100 {
            let t = 4.0 * i as f64 / 100.0;
            let (o1, o0) = seq.pair1.fields(t).unwrap();
            let omega = seq.pair1.envelope.value(t).unwrap();
            assert_eq!(o0.norm(), 0.0);
            assert!((o1.re + 2.0 * omega).abs() < 1e-14);
        }
    }

    #[test]
    fn sigma_x_tones_are_opposite() {
        let seq = build_sequence(GateParams::sigma_x(), &OP1, 4.0, 8.0).unwrap();
        for i in 0..=100 {
            let t = 4.0 * i as f64 / 100.0;
            let (o1, o0) = seq.pair1.fields(t).unwrap();
            assert!((o1 + o0).norm() < 1e-14);
        }
    }

    #[test]
    fn compensation_pair_exchanges_and_doubles() {
        for gate in crate::gate_algebra::Gate::ALL {
            let seq = build_sequence(gate.params(), &OP1, 4.0, 8.0).unwrap();
            for i in 0..=50 {
                let t = 4.0 * i as f64 / 50.0;
                let (a1, a0) = seq.pair1.fields(t).unwrap();
                let (b1, b0) = seq.pair2.fields(t).unwrap();
                assert!((b1.norm() - 2.0 * a0.norm()).abs() < 1e-12);
                assert!((b0.norm() - 2.0 * a1.norm()).abs() < 1e-12);
                let e1 = seq.pair1.envelope.value(t).unwrap();
                let e2 = seq.pair2.envelope.value(t).unwrap();
                assert!((e2 - 2.0 * e1).abs() < 1e-12);
            }
            let comp = &seq.pair2.envelope;
            assert!((comp.area() - 2.0 * PI).abs() < 1e-15);
            if let Envelope::Cosine(c) = comp {
                let (odd, even) = ConstraintSet::compensation_pair()
                    .residuals(c.coeffs())
                    .unwrap();
                assert!(odd.abs() < 1e-3 && even.abs() < 1e-3);
            }
        }
    }

    #[test]
    fn fields_at_switches_pairs() {
        let seq = build_sequence(GateParams::sigma_x(), &OP1, 4.0, 8.0).unwrap();
        let (o1, _) = seq.fields_at(2.0).unwrap();
        let (p1, _) = seq.pair1.fields(2.0).unwrap();
        assert_eq!(o1, p1);
        let (o1, _) = seq.fields_at(6.0).unwrap();
        let (p1, _) = seq.pair2.fields(2.0).unwrap();
        assert_eq!(o1, p1);
        assert!(seq.fields_at(8.5).is_err());
    }

    #[test]
    fn square_envelope_examples() {
        let sq = square_envelope(4.0, PI).unwrap();
        let env = Envelope::from(sq);
        assert!((env.value(0.0).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(env.value(4.0).unwrap(), PI / 4.0);
        assert!((simpson(|t| env.eval(t), 0.0, 4.0, 10) - PI).abs() < 1e-12);
        let w = measure_fwhm(&env).unwrap();
        assert_eq!(w.width, 4.0);
        assert!(!w.multimodal);
        assert!(square_envelope(0.0, PI).is_err());
    }

    #[test]
    fn gaussian_area_and_fwhm() {
        for fwhm in [0.5, 1.3, 2.0, 3.5] {
            let g = gaussian_envelope(4.0, fwhm, PI).unwrap();
            let env = Envelope::from(g);
            let area = simpson(|t| env.eval(t), 0.0, 4.0, 20_000);
            assert!((area - PI).abs() < 1e-9, "fwhm {fwhm}: area {area}");
            let w = measure_fwhm(&env).unwrap();
            assert!(
                (w.width - fwhm).abs() < 1e-3 * fwhm,
                "{} vs {fwhm}",
                w.width
            );
            assert!(((w.left + w.right) / 2.0 - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_rejects_bad_inputs() {
        assert!(gaussian_envelope(-1.0, 0.5, PI).is_err());
        assert!(gaussian_envelope(4.0, 0.0, PI).is_err());
        assert!(gaussian_envelope(4.0, 4.0, PI).is_err());
        assert!(gaussian_envelope(4.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn op1_fwhm_regression() {
        let env = Envelope::from(CosineEnvelope::new(4.0, PI, OP1.to_vec()).unwrap());
        let w = measure_fwhm(&env).unwrap();
        // frozen from the bisection measurement
        assert!((w.width - OP1_FWHM_US).abs() < 1e-9, "{}", w.width);
        let half = env.peak_abs() / 2.0;
        assert!((env.value(w.left).unwrap() - half).abs() < 1e-9);
        assert!((env.value(w.right).unwrap() - half).abs() < 1e-9);
        // odd harmonics shift the lobe slightly off t1/2
        assert!(((w.left + w.right) / 2.0 - 2.0).abs() < 0.1);
        assert!(!w.multimodal);
    }

    const OP1_FWHM_US: f64 = 0.785_915_508_779;

    #[test]
    fn multimodal_envelope_is_flagged() {
        // a₂ = 0.5 alone: Ω ∝ 1 + cos(2πt/T), two lobes at the edges plus
        // a small positive floor; use a strong a₄ to create an interior dip
        let env = Envelope::from(
            CosineEnvelope::new(4.0, PI, vec![0.0, 0.0, 0.0, 0.6, 0.0, 0.0, 0.0, 0.0]).unwrap(),
        );
        let w = measure_fwhm(&env).unwrap();
        assert!(w.multimodal);
    }

    #[test]
    fn peak_rabi_ratio_sigma_z_over_hadamard() {
        let z = build_sequence(GateParams::sigma_z(), &OP1, 4.0, 8.0).unwrap();
        let h = build_sequence(GateParams::hadamard(), &OP1, 4.0, 8.0).unwrap();
        let ratio = z.peak_omega1() / h.peak_omega1();
        assert!((ratio - 1.0 / (PI / 8.0).cos()).abs() < 1e-12);
    }

    #[test]
    fn envelope_json_round_trip() {
        let seq = build_sequence(GateParams::hadamard(), &OP1, 4.0, 8.0).unwrap();
        let json = serde_json::to_string(&seq).unwrap();
        let back: PulseSequence = serde_json::from_str(&json).unwrap();
        assert_eq!(back, seq);
        let g: Envelope = gaussian_envelope(4.0, 1.5, PI).unwrap().into();
        let back: Envelope = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<Envelope>(
            r#"{"kind":"cosine","duration_us":-1.0,"area_rad":3.14,"coeffs":[]}"#
        )
        .is_err());
    }

    fn free_strategy() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.0..2.0f64, 6)
    }

    proptest! {
        #[test]
        fn lift_then_project_is_identity(free in free_strategy()) {
            let set = ConstraintSet::gate_pair();
            let c = lift_free_dofs(&free, &set).unwrap();
            prop_assert_eq!(project_free_dofs(&c, &set).unwrap(), free);
            let (odd, even) = set.residuals(&c).unwrap();
            prop_assert!(odd.abs() < 1e-12 && even.abs() < 1e-12);
        }

        #[test]
        fn area_is_coefficient_independent(free in free_strategy()) {
            for (set, area) in [(ConstraintSet::gate_pair(), PI), (ConstraintSet::compensation_pair(), 2.0 * PI)] {
                let c = lift_free_dofs(&free, &set).unwrap();
                let env = CosineEnvelope::new(4.0, area, c).unwrap();
                let q = simpson(|t| env.eval(t), 0.0, 4.0, 4000);
                prop_assert!((q - area).abs() < 1e-9, "{} vs {}", q, area);
                prop_assert!(env.value(0.0).unwrap().abs() < 1e-9);
                prop_assert!(env.value(4.0).unwrap().abs() < 1e-9);
            }
        }

        #[test]
        fn tone_magnitudes_follow_envelope(theta in 0.0..PI, phi in 0.0..std::f64::consts::TAU, t in 0.0..4.0f64) {
            let seq = build_sequence(GateParams::new(theta, phi).unwrap(), &OP1, 4.0, 8.0).unwrap();
            for pair in seq.pairs() {
                let (o1, o0) = pair.fields(t).unwrap();
                let omega = pair.envelope.value(t).unwrap();
                prop_assert!((o1.norm_sqr() + o0.norm_sqr() - 4.0 * omega * omega).abs() < 1e-10);
            }
        }
    }
}
