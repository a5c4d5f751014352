//! Fidelity-versus-detuning sweeps, baseline comparisons, plateau widths and
//! the a₂-perturbation robustness map.
//!
//! Detunings here are cyclic kHz; they are converted to rad/µs only when a
//! propagation is launched.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{fidelity, Propagator, SimConfig};
use crate::error::{Error, Result};
pub use crate::format::fmt_sig9;
use crate::gate_algebra::{target_state, GateParams, QubitState};
use crate::pulse_model::{
    build_sequence, gaussian_envelope, measure_fwhm, square_envelope, CosineEnvelope, Envelope,
    EnvelopeKind, PulseSequence,
};
use crate::units::khz_to_rad_per_us;

/// Fidelities may overshoot [0, 1] by at most this much from rounding.
const FIDELITY_SLACK: f64 = 1e-9;

pub const DEFAULT_SWEEP_POINTS: usize = 121;
pub const DEFAULT_ETA_POINTS: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub delta_khz: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub points: Vec<CurvePoint>,
    pub gate: String,
    /// Coefficient source, e.g. `op1`.
    pub label: String,
    pub envelope: EnvelopeKind,
}

impl FidelityCurve {
    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.delta_khz)
    }

    pub fn fidelities(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.fidelity)
    }

    /// Fidelity at the sample closest to Δ = 0.
    pub fn at_zero(&self) -> Option<f64> {
        self.points
            .iter()
            .min_by(|a, b| a.delta_khz.abs().total_cmp(&b.delta_khz.abs()))
            .map(|p| p.fidelity)
    }

    /// Series label used in CSV output: `<label>/<envelope>`.
    pub fn series_name(&self) -> String {
        format!("{}/{}", self.label, self.envelope.name())
    }

    /// max |F(Δ) − F(−Δ)| over mirrored sample pairs.
    pub fn asymmetry(&self) -> f64 {
        let n = self.points.len();
        (0..n / 2)
            .filter(|&i| (self.points[i].delta_khz + self.points[n - 1 - i].delta_khz).abs() < 1e-9)
            .map(|i| (self.points[i].fidelity - self.points[n - 1 - i].fidelity).abs())
            .fold(0.0, f64::max)
    }
}

/// `n` uniformly spaced detunings over [−max, max] kHz; `n` must be odd and
/// at least 3 so that Δ = 0 is sampled.
pub fn detuning_grid(max_khz: f64, n: usize) -> Result<Vec<f64>> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "sweep needs an odd number of points ≥ 3, got {n}"
        )));
    }
    if !(max_khz.is_finite() && max_khz >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sweep half-width must be finite and non-negative, got {max_khz}"
        )));
    }
    let mid = (n / 2) as f64;
    Ok((0..n)
        .map(|i| {
            let j = i as f64 - mid;
            if j == 0.0 {
                0.0
            } else {
                max_khz * j / mid
            }
        })
        .collect())
}

/// Propagates `initial` through `seq` at every detuning and scores the end
/// states against the ideal target. The resolution of `base` is raised as
/// needed for the largest |Δ| (see [`SimConfig::resolved_for`]).
pub fn fidelities(
    seq: &PulseSequence,
    initial: &QubitState,
    deltas_khz: &[f64],
    base: &SimConfig,
) -> Result<Vec<f64>> {
    let max_delta = deltas_khz
        .iter()
        .map(|d| khz_to_rad_per_us(*d).abs())
        .fold(0.0, f64::max);
    let cfg = base.resolved_for(seq, max_delta);
    let prop = Propagator::new(seq, cfg.steps_per_pair)?;
    let target = target_state(initial, seq.gate_params());
    deltas_khz
        .par_iter()
        .map(|&khz| {
            let delta = khz_to_rad_per_us(khz);
            let end = prop.final_state(initial, delta, cfg.norm_ceiling)?;
            let f = fidelity(&end, &target);
            if !(-FIDELITY_SLACK..=1.0 + FIDELITY_SLACK).contains(&f) {
                return Err(Error::Propagation {
                    delta,
                    source: Box::new(Error::InvalidParameter(format!(
                        "fidelity {f} outside [0, 1]"
                    ))),
                });
            }
            Ok(f.clamp(0.0, 1.0))
        })
        .collect()
}

/// Fidelity curve of one sequence over `deltas_khz`.
pub fn sweep_detuning(
    seq: &PulseSequence,
    initial: &QubitState,
    deltas_khz: &[f64],
    base: &SimConfig,
    label: &str,
    gate: &str,
) -> Result<FidelityCurve> {
    let fs = fidelities(seq, initial, deltas_khz, base)?;
    Ok(FidelityCurve {
        points: deltas_khz
            .iter()
            .zip(fs)
            .map(|(&delta_khz, fidelity)| CurvePoint {
                delta_khz,
                fidelity,
            })
            .collect(),
        gate: gate.to_string(),
        label: label.to_string(),
        envelope: seq.pair1.envelope.kind(),
    })
}

/// A robust sequence and the state it acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub gate: GateParams,
    pub coeffs: Vec<f64>,
    pub t1_us: f64,
    pub t2_us: f64,
    pub initial: QubitState,
    /// Coefficient source, e.g. `op1`.
    pub label: String,
}

impl Experiment {
    /// t₂ = 2t₁, starting from |1⟩.
    pub fn new(gate: GateParams, coeffs: &[f64], t1_us: f64, label: &str) -> Self {
        Self {
            gate,
            coeffs: coeffs.to_vec(),
            t1_us,
            t2_us: 2.0 * t1_us,
            initial: QubitState::one(),
            label: label.to_string(),
        }
    }

    pub fn sequence(&self) -> Result<PulseSequence> {
        build_sequence(self.gate, &self.coeffs, self.t1_us, self.t2_us)
    }

    fn curve(&self, seq: &PulseSequence, deltas_khz: &[f64]) -> Result<FidelityCurve> {
        sweep_detuning(
            seq,
            &self.initial,
            deltas_khz,
            &SimConfig::default(),
            &self.label,
            &gate_label(self.gate),
        )
    }

    /// Symmetric uniform sweep over ±`max_khz`.
    pub fn sweep(&self, max_khz: f64, n_points: usize) -> Result<FidelityCurve> {
        let grid = detuning_grid(max_khz, n_points)?;
        self.curve(&self.sequence()?, &grid)
    }
}

pub(crate) fn gate_label(params: GateParams) -> String {
    crate::gate_algebra::Gate::ALL
        .into_iter()
        .find(|g| g.params() == params)
        .map(|g| g.name().to_string())
        .unwrap_or_else(|| format!("theta={:.6},phi={:.6}", params.theta(), params.phi()))
}

/// Contiguous detuning interval around 0 where F ≥ threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub lo_khz: f64,
    pub hi_khz: f64,
    /// The plateau reached the edge of the sweep on that side.
    pub lo_clipped: bool,
    pub hi_clipped: bool,
}

impl Bandwidth {
    /// Symmetric half-width min(|lo|, hi).
    pub fn half_width(&self) -> f64 {
        self.lo_khz.abs().min(self.hi_khz)
    }

    pub fn covers(&self, half_width_khz: f64) -> bool {
        self.lo_khz <= -half_width_khz && self.hi_khz >= half_width_khz
    }
}

/// Widest contiguous interval containing Δ = 0 with F ≥ `threshold`; the
/// endpoints are linearly interpolated between the straddling samples.
pub fn bandwidth_at(curve: &FidelityCurve, threshold: f64) -> Result<Bandwidth> {
    let pts = &curve.points;
    let zero = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.delta_khz.abs().total_cmp(&b.1.delta_khz.abs()))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidParameter("empty fidelity curve".into()))?;
    let f0 = pts[zero].fidelity;
    if f0 < threshold {
        return Err(Error::NoPlateau { f0, threshold });
    }
    let cross = |good: &CurvePoint, bad: &CurvePoint| {
        let s = (good.fidelity - threshold) / (good.fidelity - bad.fidelity);
        good.delta_khz + s * (bad.delta_khz - good.delta_khz)
    };

    let mut hi = zero;
    while hi + 1 < pts.len() && pts[hi + 1].fidelity >= threshold {
        hi += 1;
    }
    let (hi_khz, hi_clipped) = if hi + 1 < pts.len() {
        (cross(&pts[hi], &pts[hi + 1]), false)
    } else {
        (pts[hi].delta_khz, true)
    };

    let mut lo = zero;
    while lo > 0 && pts[lo - 1].fidelity >= threshold {
        lo -= 1;
    }
    let (lo_khz, lo_clipped) = if lo > 0 {
        (cross(&pts[lo], &pts[lo - 1]), false)
    } else {
        (pts[lo].delta_khz, true)
    };

    Ok(Bandwidth {
        lo_khz,
        hi_khz,
        lo_clipped,
        hi_clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandStats {
    pub half_width_khz: f64,
    /// Trapezoidal mean of F over [−w, w].
    pub average: f64,
    pub min: f64,
    pub samples: usize,
}

/// Mean and minimum fidelity over the samples with |Δ| ≤ `half_width_khz`.
pub fn band_stats(curve: &FidelityCurve, half_width_khz: f64) -> Result<BandStats> {
    let inside: Vec<&CurvePoint> = curve
        .points
        .iter()
        .filter(|p| p.delta_khz.abs() <= half_width_khz + 1e-9)
        .collect();
    if inside.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no samples within ±{half_width_khz} kHz"
        )));
    }
    let min = inside
        .iter()
        .map(|p| p.fidelity)
        .fold(f64::INFINITY, f64::min);
    let span = inside[inside.len() - 1].delta_khz - inside[0].delta_khz;
    let average = if span > 0.0 {
        inside
            .windows(2)
            .map(|w| 0.5 * (w[0].fidelity + w[1].fidelity) * (w[1].delta_khz - w[0].delta_khz))
            .sum::<f64>()
            / span
    } else {
        inside.iter().map(|p| p.fidelity).sum::<f64>() / inside.len() as f64
    };
    Ok(BandStats {
        half_width_khz,
        average,
        min,
        samples: inside.len(),
    })
}

/// Optimized envelope against Gaussian (matched FWHM and duration) and
/// square (matched duration) envelopes of the same area, on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub optimized: FidelityCurve,
    pub gaussian: FidelityCurve,
    pub square: FidelityCurve,
    /// FWHM of the optimized envelope, reused for the Gaussian.
    pub fwhm_us: f64,
}

impl Baselines {
    pub fn curves(&self) -> [&FidelityCurve; 3] {
        [&self.optimized, &self.gaussian, &self.square]
    }
}

pub fn compare_baselines(exp: &Experiment, deltas_khz: &[f64]) -> Result<Baselines> {
    let optimized_seq = exp.sequence()?;
    let fwhm = measure_fwhm(&optimized_seq.pair1.envelope)?;
    let area = optimized_seq.pair1.envelope.area();
    let gaussian_seq = PulseSequence::from_envelope(
        exp.gate,
        gaussian_envelope(exp.t1_us, fwhm.width, area)?.into(),
        exp.t2_us,
    )?;
    let square_seq = PulseSequence::from_envelope(
        exp.gate,
        square_envelope(exp.t1_us, area)?.into(),
        exp.t2_us,
    )?;
    Ok(Baselines {
        optimized: exp.curve(&optimized_seq, deltas_khz)?,
        gaussian: exp.curve(&gaussian_seq, deltas_khz)?,
        square: exp.curve(&square_seq, deltas_khz)?,
        fwhm_us: fwhm.width,
    })
}

/// One straight piece of an iso-fidelity line, in (η, Δ kHz) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSegment {
    pub start: (f64, f64),
    pub end: (f64, f64),
}

/// Fidelity over (η, Δ) where a₂ → (1 + η)·a₂ with every other coefficient
/// fixed. The constraints are deliberately left violated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessMap {
    pub eta_axis: Vec<f64>,
    pub delta_axis_khz: Vec<f64>,
    /// `grid[i][j]` = F(eta_axis[i], delta_axis_khz[j]).
    pub grid: Vec<Vec<f64>>,
    pub level: f64,
    pub contour: Vec<ContourSegment>,
}

impl RobustnessMap {
    /// Fidelities of the Δ column closest to 0.
    pub fn zero_detuning_column(&self) -> Vec<f64> {
        let j = self
            .delta_axis_khz
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(j, _)| j)
            .unwrap_or(0);
        self.grid.iter().map(|row| row[j]).collect()
    }

    /// Minimum F over the grid cells inside |η| ≤ eta, |Δ| ≤ delta.
    pub fn min_within(&self, eta: f64, delta_khz: f64) -> f64 {
        let mut m = f64::INFINITY;
        for (i, &e) in self.eta_axis.iter().enumerate() {
            if e.abs() > eta + 1e-12 {
                continue;
            }
            for (j, &d) in self.delta_axis_khz.iter().enumerate() {
                if d.abs() <= delta_khz + 1e-9 {
                    m = m.min(self.grid[i][j]);
                }
            }
        }
        m
    }
}

/// Axes of a robustness map; both point counts must be odd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapGrid {
    pub eta_max: f64,
    pub eta_points: usize,
    pub delta_max_khz: f64,
    pub delta_points: usize,
}

impl Default for MapGrid {
    fn default() -> Self {
        Self {
            eta_max: 0.5,
            eta_points: DEFAULT_ETA_POINTS,
            delta_max_khz: 300.0,
            delta_points: DEFAULT_SWEEP_POINTS,
        }
    }
}

pub fn a2_robustness_map(exp: &Experiment, axes: &MapGrid) -> Result<RobustnessMap> {
    let coeffs = &exp.coeffs;
    if coeffs.len() < 2 || coeffs[1] == 0.0 {
        return Err(Error::InvalidParameter(
            "a₂ must be present and nonzero for a fractional variation".into(),
        ));
    }
    let eta_axis = detuning_grid(axes.eta_max, axes.eta_points)?;
    let delta_axis_khz = detuning_grid(axes.delta_max_khz, axes.delta_points)?;
    let grid = eta_axis
        .iter()
        .map(|&eta| {
            let mut c = coeffs.to_vec();
            c[1] *= 1.0 + eta;
            let env = CosineEnvelope::new(exp.t1_us, std::f64::consts::PI, c)?;
            let seq = PulseSequence::from_envelope(exp.gate, Envelope::Cosine(env), exp.t2_us)?;
            Ok(exp.curve(&seq, &delta_axis_khz)?.fidelities().collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let level = 0.99;
    let contour = contour_segments(&eta_axis, &delta_axis_khz, &grid, level);
    Ok(RobustnessMap {
        eta_axis,
        delta_axis_khz,
        grid,
        level,
        contour,
    })
}

/// Marching squares on a rectilinear grid. Saddle cells are disambiguated
/// with the cell-center average.
pub fn contour_segments(
    xs: &[f64],
    ys: &[f64],
    grid: &[Vec<f64>],
    level: f64,
) -> Vec<ContourSegment> {
    let mut out = Vec::new();
    let lerp = |a: (f64, f64, f64), b: (f64, f64, f64)| {
        let s = (level - a.2) / (b.2 - a.2);
        (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1))
    };
    for i in 0..xs.len().saturating_sub(1) {
        for j in 0..ys.len().saturating_sub(1) {
            // corners counter-clockwise from (i, j)
            let c = [
                (xs[i], ys[j], grid[i][j]),
                (xs[i + 1], ys[j], grid[i + 1][j]),
                (xs[i + 1], ys[j + 1], grid[i + 1][j + 1]),
                (xs[i], ys[j + 1], grid[i][j + 1]),
            ];
            let inside = c.map(|p| p.2 >= level);
            let edges: Vec<usize> = (0..4)
                .filter(|&e| inside[e] != inside[(e + 1) % 4])
                .collect();
            let point = |e: usize| lerp(c[e], c[(e + 1) % 4]);
            match edges.len() {
                2 => out.push(ContourSegment {
                    start: point(edges[0]),
                    end: point(edges[1]),
                }),
                4 => {
                    let center = c.iter().map(|p| p.2).sum::<f64>() / 4.0;
                    // pair edges around the corners that disagree with the center
                    let pairs = if (center >= level) == inside[0] {
                        [(1, 2), (3, 0)]
                    } else {
                        [(0, 1), (2, 3)]
                    };
                    for (a, b) in pairs {
                        out.push(ContourSegment {
                            start: point(a),
                            end: point(b),
                        });
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// `delta_khz,fidelity,label` rows for each curve in turn.
pub fn write_curves_csv<W: Write>(curves: &[&FidelityCurve], mut out: W) -> Result<()> {
    writeln!(out, "delta_khz,fidelity,label")?;
    for c in curves {
        let name = c.series_name();
        for p in &c.points {
            writeln!(
                out,
                "{},{},{}",
                fmt_sig9(p.delta_khz),
                fmt_sig9(p.fidelity),
                name
            )?;
        }
    }
    Ok(())
}

/// `eta,delta_khz,fidelity`, η-major.
pub fn write_map_csv<W: Write>(map: &RobustnessMap, mut out: W) -> Result<()> {
    writeln!(out, "eta,delta_khz,fidelity")?;
    for (i, eta) in map.eta_axis.iter().enumerate() {
        for (j, d) in map.delta_axis_khz.iter().enumerate() {
            writeln!(
                out,
                "{},{},{}",
                fmt_sig9(*eta),
                fmt_sig9(*d),
                fmt_sig9(map.grid[i][j])
            )?;
        }
    }
    Ok(())
}

/// `eta,delta_khz`; each contour segment contributes two consecutive rows.
pub fn write_contour_csv<W: Write>(map: &RobustnessMap, mut out: W) -> Result<()> {
    writeln!(out, "eta,delta_khz")?;
    for s in &map.contour {
        for (eta, d) in [s.start, s.end] {
            writeln!(out, "{},{}", fmt_sig9(eta), fmt_sig9(d))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::OP1;

    fn curve(points: &[(f64, f64)]) -> FidelityCurve {
        FidelityCurve {
            points: points
                .iter()
                .map(|&(delta_khz, fidelity)| CurvePoint {
                    delta_khz,
                    fidelity,
                })
                .collect(),
            gate: "sigmax".into(),
            label: "test".into(),
            envelope: EnvelopeKind::Cosine,
        }
    }

    #[test]
    fn grid_shape() {
        let g = detuning_grid(600.0, 121).unwrap();
        assert_eq!(g.len(), 121);
        assert_eq!(g[60], 0.0);
        assert_eq!(g[0], -600.0);
        assert_eq!(g[120], 600.0);
        assert!((g[61] - 10.0).abs() < 1e-12);
        assert!(detuning_grid(600.0, 4).is_err());
        assert!(detuning_grid(600.0, 1).is_err());
        assert!(detuning_grid(-1.0, 5).is_err());
    }

    #[test]
    fn degenerate_sweep_repeats_resonance() {
        let c = Experiment::new(GateParams::sigma_x(), &OP1, 4.0, "op1")
            .sweep(0.0, 3)
            .unwrap();
        assert_eq!(c.points.len(), 3);
        for p in &c.points {
            assert_eq!(p.delta_khz, 0.0);
            assert!((p.fidelity - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn bandwidth_interpolates_crossings() {
        let c = curve(&[
            (-20.0, 0.9),
            (-10.0, 0.995),
            (0.0, 1.0),
            (10.0, 0.995),
            (20.0, 0.985),
        ]);
        let bw = bandwidth_at(&c, 0.99).unwrap();
        // 0.995 → 0.985 crosses 0.99 halfway
        assert!((bw.hi_khz - 15.0).abs() < 1e-12);
        // 0.995 → 0.9: s = 0.005/0.095
        assert!((bw.lo_khz - (-10.0 - 10.0 * 0.005 / 0.095)).abs() < 1e-12);
        assert!(!bw.lo_clipped && !bw.hi_clipped);
        assert!((bw.half_width() - 15.0).abs() < 1e-9 || bw.half_width() < 15.0);
    }

    #[test]
    fn bandwidth_of_flat_curve_is_full_range() {
        let c = curve(&[(-5.0, 1.0), (0.0, 1.0), (5.0, 1.0)]);
        let bw = bandwidth_at(&c, 0.99).unwrap();
        assert_eq!((bw.lo_khz, bw.hi_khz), (-5.0, 5.0));
        assert!(bw.lo_clipped && bw.hi_clipped);
        assert!(bw.covers(5.0));
    }

    #[test]
    fn bandwidth_requires_plateau() {
        let c = curve(&[(-5.0, 1.0), (0.0, 0.95), (5.0, 1.0)]);
        assert!(matches!(
            bandwidth_at(&c, 0.99),
            Err(Error::NoPlateau { .. })
        ));
    }

    #[test]
    fn bandwidth_stops_at_first_dip() {
        let c = curve(&[(0.0, 1.0), (1.0, 0.98), (2.0, 1.0), (3.0, 1.0)]);
        let bw = bandwidth_at(&c, 0.99).unwrap();
        assert!((bw.hi_khz - 0.5).abs() < 1e-12);
    }

    #[test]
    fn band_statistics() {
        let c = curve(&[(-2.0, 0.5), (-1.0, 0.9), (0.0, 1.0), (1.0, 0.8), (2.0, 0.5)]);
        let s = band_stats(&c, 1.0).unwrap();
        assert_eq!(s.samples, 3);
        assert!((s.average - (0.95 + 0.9) / 2.0).abs() < 1e-12);
        assert_eq!(s.min, 0.8);
    }

    #[test]
    fn asymmetry_diagnostic() {
        let c = curve(&[(-1.0, 0.9), (0.0, 1.0), (1.0, 0.95)]);
        assert!((c.asymmetry() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn contour_on_linear_field() {
        // F = x: level 0.5 is the vertical line x = 0.5
        let xs = [0.0, 1.0];
        let ys = [0.0, 1.0, 2.0];
        let grid = vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]];
        let segs = contour_segments(&xs, &ys, &grid, 0.5);
        assert_eq!(segs.len(), 2);
        for s in segs {
            assert!((s.start.0 - 0.5).abs() < 1e-12 && (s.end.0 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn contour_saddle_yields_two_segments() {
        let grid = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let segs = contour_segments(&[0.0, 1.0], &[0.0, 1.0], &grid, 0.4);
        assert_eq!(segs.len(), 2);
    }

    #[test]
    fn csv_writers_have_stable_headers() {
        let c = curve(&[(-1.0, 0.9), (0.0, 1.0), (1.0, 0.95)]);
        let mut buf = Vec::new();
        write_curves_csv(&[&c], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next(), Some("delta_khz,fidelity,label"));
        assert_eq!(s.lines().nth(1), Some("-1,0.9,test/cosine"));

        let map = RobustnessMap {
            eta_axis: vec![-0.1, 0.0, 0.1],
            delta_axis_khz: vec![-1.0, 0.0, 1.0],
            grid: vec![
                vec![0.98, 1.0, 0.98],
                vec![0.995, 1.0, 0.995],
                vec![0.98, 1.0, 0.98],
            ],
            level: 0.99,
            contour: vec![ContourSegment {
                start: (0.0, 0.5),
                end: (0.1, 0.25),
            }],
        };
        let mut buf = Vec::new();
        write_map_csv(&map, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 10);
        assert!(s.starts_with("eta,delta_khz,fidelity\n-0.1,-1,0.98\n"));
        let mut buf = Vec::new();
        write_contour_csv(&map, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "eta,delta_khz\n0,0.5\n0.1,0.25\n"
        );
        assert_eq!(map.zero_detuning_column(), vec![1.0, 1.0, 1.0]);
        assert_eq!(map.min_within(0.05, 1.0), 0.995);
    }

    #[test]
    fn a2_map_requires_nonzero_a2() {
        let mut c = OP1.to_vec();
        c[1] = 0.0;
        let exp = Experiment::new(GateParams::sigma_x(), &c, 4.0, "zero-a2");
        assert!(a2_robustness_map(&exp, &MapGrid::default()).is_err());
    }

    #[test]
    fn eta_zero_row_reproduces_sweep() {
        let exp = Experiment::new(GateParams::sigma_x(), &OP1, 4.0, "op1");
        let axes = MapGrid {
            eta_max: 0.5,
            eta_points: 5,
            delta_max_khz: 400.0,
            delta_points: 9,
        };
        let map = a2_robustness_map(&exp, &axes).unwrap();
        let curve = exp.sweep(400.0, 9).unwrap();
        for (a, b) in map.grid[2].iter().zip(curve.fidelities()) {
            assert!((a - b).abs() < 1e-9);
        }
        for f in map.zero_detuning_column() {
            assert!((f - 1.0).abs() < 1e-6);
        }
    }
}
