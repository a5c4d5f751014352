//! Ideal qubit-subspace operators and the dark/bright basis.
//!
//! All 2×2 matrices and [`QubitState`] amplitudes use the basis order
//! (|0⟩, |1⟩). The three-level order used by the propagator lives in
//! [`crate::dynamics`].
//!
//! A gate is parameterised by (θ, φ). The first pulse pair maps the qubit
//! through U = |d⟩⟨d| − |b⟩⟨b| = n̂·σ⃗ with n̂ = (sin θ cos φ, sin θ sin φ, cos θ),
//! a π rotation about n̂ up to global phase. Comparisons between states are
//! always made through |⟨a|b⟩|², so that global phase never matters.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 2.0 * PI;
const NORM_TOLERANCE: f64 = 1e-12;

/// Rotation-axis parameters (θ, φ) of a geometric gate, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGateParams")]
pub struct GateParams {
    theta: f64,
    phi: f64,
}

impl GateParams {
    /// Validates θ ∈ [0, π] and wraps φ into [0, 2π).
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gate angles must be finite (θ = {theta}, φ = {phi})"
            )));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "θ = {theta} outside [0, π]"
            )));
        }
        Ok(Self {
            theta,
            phi: wrap_phase(phi),
        })
    }

    pub fn sigma_x() -> Self {
        Self {
            theta: FRAC_PI_2,
            phi: 0.0,
        }
    }

    pub fn sigma_y() -> Self {
        Self {
            theta: FRAC_PI_2,
            phi: FRAC_PI_2,
        }
    }

    /// σz leaves φ arbitrary; it is fixed to 0 here.
    pub fn sigma_z() -> Self {
        Self {
            theta: 0.0,
            phi: 0.0,
        }
    }

    pub fn hadamard() -> Self {
        Self {
            theta: FRAC_PI_4,
            phi: 0.0,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// A = sin(θ/2), the weight of the |0⟩ ↔ |e⟩ tone.
    pub fn a(&self) -> f64 {
        (self.theta / 2.0).sin()
    }

    /// B = −cos(θ/2), the weight of the |1⟩ ↔ |e⟩ tone.
    pub fn b(&self) -> f64 {
        -(self.theta / 2.0).cos()
    }

    /// Unit rotation axis n̂.
    pub fn axis(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

#[derive(Deserialize)]
struct RawGateParams {
    theta: f64,
    phi: f64,
}

impl TryFrom<RawGateParams> for GateParams {
    type Error = Error;

    fn try_from(raw: RawGateParams) -> Result<Self> {
        GateParams::new(raw.theta, raw.phi)
    }
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// The four named gates of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    #[serde(alias = "x", alias = "sigma_x")]
    SigmaX,
    #[serde(alias = "y", alias = "sigma_y")]
    SigmaY,
    #[serde(alias = "z", alias = "sigma_z")]
    SigmaZ,
    #[serde(alias = "h")]
    Hadamard,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::SigmaX, Gate::SigmaY, Gate::SigmaZ, Gate::Hadamard];

    pub fn params(self) -> GateParams {
        match self {
            Gate::SigmaX => GateParams::sigma_x(),
            Gate::SigmaY => GateParams::sigma_y(),
            Gate::SigmaZ => GateParams::sigma_z(),
            Gate::Hadamard => GateParams::hadamard(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gate::SigmaX => "sigmax",
            Gate::SigmaY => "sigmay",
            Gate::SigmaZ => "sigmaz",
            Gate::Hadamard => "hadamard",
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "x" | "sigmax" => Ok(Gate::SigmaX),
            "y" | "sigmay" => Ok(Gate::SigmaY),
            "z" | "sigmaz" => Ok(Gate::SigmaZ),
            "h" | "hadamard" => Ok(Gate::Hadamard),
            other => Err(Error::InvalidParameter(format!("unknown gate '{other}'"))),
        }
    }
}

/// Pure qubit state c0|0⟩ + c1|1⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pub c0: Complex64,
    pub c1: Complex64,
}

impl QubitState {
    /// Checked constructor: |c0|² + |c1|² must equal 1 within 1e-12.
    pub fn new(c0: Complex64, c1: Complex64) -> Result<Self> {
        let s = Self { c0, c1 };
        let n = s.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(n));
        }
        Ok(s)
    }

    /// Normalizes an arbitrary nonzero pair of amplitudes.
    pub fn normalized(c0: Complex64, c1: Complex64) -> Result<Self> {
        let n = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NotNormalized(n * n));
        }
        Ok(Self {
            c0: c0 / n,
            c1: c1 / n,
        })
    }

    /// cos θ₀|0⟩ + sin θ₀ e^{iφ₀}|1⟩.
    pub fn from_angles(theta0: f64, phi0: f64) -> Self {
        Self {
            c0: Complex64::new(theta0.cos(), 0.0),
            c1: Complex64::from_polar(theta0.sin(), phi0),
        }
    }

    pub fn zero() -> Self {
        Self {
            c0: Complex64::new(1.0, 0.0),
            c1: Complex64::new(0.0, 0.0),
        }
    }

    pub fn one() -> Self {
        Self {
            c0: Complex64::new(0.0, 0.0),
            c1: Complex64::new(1.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &QubitState) -> Complex64 {
        self.c0.conj() * other.c0 + self.c1.conj() * other.c1
    }

    /// |⟨self|other⟩|², insensitive to global phase.
    pub fn overlap_sqr(&self, other: &QubitState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn scale(&self, k: Complex64) -> QubitState {
        QubitState {
            c0: self.c0 * k,
            c1: self.c1 * k,
        }
    }

    /// Unnormalized linear combination α·self + β·other.
    pub fn combine(&self, alpha: Complex64, other: &QubitState, beta: Complex64) -> QubitState {
        QubitState {
            c0: alpha * self.c0 + beta * other.c0,
            c1: alpha * self.c1 + beta * other.c1,
        }
    }
}

/// 2×2 complex matrix in the (|0⟩, |1⟩) basis, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub fn identity() -> Self {
        let o = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        Mat2([[o, z], [z, o]])
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Mat2([
            [Complex64::new(m[0][0], 0.0), Complex64::new(m[0][1], 0.0)],
            [Complex64::new(m[1][0], 0.0), Complex64::new(m[1][1], 0.0)],
        ])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn apply(&self, s: &QubitState) -> QubitState {
        let m = &self.0;
        QubitState {
            c0: m[0][0] * s.c0 + m[0][1] * s.c1,
            c1: m[1][0] * s.c0 + m[1][1] * s.c1,
        }
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).norm());
            }
        }
        worst
    }

    /// |a⟩⟨b|.
    pub fn outer(a: &QubitState, b: &QubitState) -> Self {
        let (a0, a1) = (a.c0, a.c1);
        let (b0, b1) = (b.c0.conj(), b.c1.conj());
        Mat2([[a0 * b0, a0 * b1], [a1 * b0, a1 * b1]])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Mat2(out)
    }
}

impl std::ops::Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, rhs: Mat2) -> Mat2 {
        let mut out = self.0;
        for (row, rrow) in out.iter_mut().zip(rhs.0) {
            for (x, y) in row.iter_mut().zip(rrow) {
                *x -= y;
            }
        }
        Mat2(out)
    }
}

/// n̂·σ⃗ in the (|0⟩, |1⟩) basis:
/// `[[cos θ, sin θ e^{−iφ}], [sin θ e^{iφ}, −cos θ]]`.
///
/// Hermitian, unitary, determinant −1. The physical operator differs from
/// exp(−iπ n̂·σ⃗/2) by the global phase i.
pub fn ideal_gate(params: GateParams) -> Mat2 {
    let (st, ct) = params.theta.sin_cos();
    Mat2([
        [
            Complex64::new(ct, 0.0),
            Complex64::from_polar(st, -params.phi),
        ],
        [
            Complex64::from_polar(st, params.phi),
            Complex64::new(-ct, 0.0),
        ],
    ])
}

/// Dark and bright states of a pulse pair with parameters (θ, φ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarkBrightBasis {
    /// |d⟩ = −B|0⟩ + A e^{iφ}|1⟩, decoupled from the excited state.
    pub dark: QubitState,
    /// |b⟩ = A e^{−iφ}|0⟩ + B|1⟩, the state the drive couples to |e⟩.
    pub bright: QubitState,
}

pub fn dark_bright(params: GateParams) -> DarkBrightBasis {
    let (a, b) = (params.a(), params.b());
    DarkBrightBasis {
        dark: QubitState {
            c0: Complex64::new(-b, 0.0),
            c1: Complex64::from_polar(a, params.phi),
        },
        bright: QubitState {
            c0: Complex64::from_polar(a, -params.phi),
            c1: Complex64::new(b, 0.0),
        },
    }
}

/// Parameters of the phase-compensation pair: (π − θ, π + φ mod 2π).
///
/// Its bright state equals −e^{−iφ} times the dark state of `params`.
pub fn compensation_params(params: GateParams) -> GateParams {
    GateParams {
        theta: PI - params.theta,
        phi: wrap_phase(PI + params.phi),
    }
}

/// Ideal final state of the full two-pair sequence.
///
/// The compensation pair has area 2π and acts as the identity on the
/// qubit subspace, so only the gate pair contributes.
pub fn target_state(initial: &QubitState, params: GateParams) -> QubitState {
    ideal_gate(params).apply(initial)
}
