use std::f64::consts::PI;

use geopulse::analysis::{bandwidth_at, compare_baselines, detuning_grid, fidelities, Experiment};
use geopulse::dynamics::{derivative, fidelity, SimConfig, ThreeLevelState};
use geopulse::gate_algebra::{target_state, Gate, QubitState};
use geopulse::presets::OP1;
use geopulse::pulse_model::{square_envelope, PulseSequence};
use geopulse::units::khz_to_rad_per_us;
use num_complex::Complex64;

type M3 = [[Complex64; 3]; 3];

fn to_vec(s: &ThreeLevelState) -> [Complex64; 3] {
    [s.c1, s.c0, s.ce]
}

/// Generator of the linear amplitude equations for constant fields, read
/// off column by column.
fn generator(omega1: Complex64, omega0: Complex64, delta: f64) -> M3 {
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let basis = [
        ThreeLevelState {
            c1: one,
            c0: z,
            ce: z,
        },
        ThreeLevelState {
            c1: z,
            c0: one,
            ce: z,
        },
        ThreeLevelState {
            c1: z,
            c0: z,
            ce: one,
        },
    ];
    let mut m = [[z; 3]; 3];
    for (j, e) in basis.iter().enumerate() {
        let col = to_vec(&derivative(e, omega1, omega0, delta));
        for i in 0..3 {
            m[i][j] = col[i];
        }
    }
    m
}

fn mul(a: &M3, b: &M3) -> M3 {
    let mut c = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// exp(m·t) by scaling and squaring a 30-term Taylor series.
fn expm(m: &M3, t: f64) -> M3 {
    let norm: f64 = m.iter().flatten().map(|z| z.norm()).sum::<f64>() * t;
    let squarings = norm.log2().ceil().max(0.0) as i32 + 4;
    let h = t / 2f64.powi(squarings);
    let z = Complex64::new(0.0, 0.0);
    let mut result = [[z; 3]; 3];
    let mut term = [[z; 3]; 3];
    for i in 0..3 {
        result[i][i] = Complex64::new(1.0, 0.0);
        term[i][i] = Complex64::new(1.0, 0.0);
    }
    let scaled: M3 = m.map(|row| row.map(|x| x * h));
    for n in 1..30 {
        term = mul(&term, &scaled).map(|row| row.map(|x| x / n as f64));
        for i in 0..3 {
            for j in 0..3 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

fn apply(m: &M3, v: [Complex64; 3]) -> ThreeLevelState {
    let r: Vec<Complex64> = (0..3)
        .map(|i| (0..3).map(|k| m[i][k] * v[k]).sum())
        .collect();
    ThreeLevelState {
        c1: r[0],
        c0: r[1],
        ce: r[2],
    }
}

#[test]
fn square_sweep_matches_matrix_exponential() {
    let deltas_khz = [-400.0, -150.0, 0.0, 37.5, 220.0, 900.0];
    for gate in Gate::ALL {
        let seq = PulseSequence::from_envelope(
            gate.params(),
            square_envelope(4.0, PI).unwrap().into(),
            8.0,
        )
        .unwrap();
        let initial = QubitState::one();
        let target = target_state(&initial, gate.params());
        let got = fidelities(&seq, &initial, &deltas_khz, &SimConfig::default()).unwrap();
        for (&d, f) in deltas_khz.iter().zip(got) {
            let delta = khz_to_rad_per_us(d);
            let (a1, b1) = seq.fields_at(2.0).unwrap();
            let (a2, b2) = seq.fields_at(6.0).unwrap();
            let u = mul(
                &expm(&generator(a2, b2, delta), 4.0),
                &expm(&generator(a1, b1, delta), 4.0),
            );
            let end = apply(&u, to_vec(&ThreeLevelState::from_qubit(&initial)));
            let exact = fidelity(&end, &target);
            assert!(
                (f - exact).abs() < 1e-9,
                "{gate} at {d} kHz: {f} vs {exact}"
            );
        }
    }
}

#[test]
fn baselines_are_exact_on_resonance() {
    let grid = detuning_grid(200.0, 5).unwrap();
    for gate in Gate::ALL {
        let exp = Experiment::new(gate.params(), &OP1, 4.0, "op1");
        let b = compare_baselines(&exp, &grid).unwrap();
        for curve in b.curves() {
            let f0 = curve.at_zero().unwrap();
            assert!(
                (f0 - 1.0).abs() < 1e-9,
                "{} {gate}: {f0}",
                curve.series_name()
            );
            assert!(curve.asymmetry() < 1e-9);
        }
        assert!(b.fwhm_us > 0.5 && b.fwhm_us < 1.5);
    }
}

#[test]
fn bandwidth_is_stable_under_grid_refinement() {
    let exp = Experiment::new(Gate::SigmaZ.params(), &OP1, 4.0, "op1");
    let coarse = bandwidth_at(&exp.sweep(800.0, 161).unwrap(), 0.99).unwrap();
    let fine = bandwidth_at(&exp.sweep(800.0, 641).unwrap(), 0.99).unwrap();
    assert!(
        (coarse.half_width() - fine.half_width()).abs() < 0.5,
        "{coarse:?} vs {fine:?}"
    );
    assert!(!fine.lo_clipped && !fine.hi_clipped);
}
