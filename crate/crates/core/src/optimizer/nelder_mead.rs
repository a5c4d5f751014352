//! Nelder–Mead downhill simplex with simplex re-seeding.

use std::cmp::Ordering;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SimplexSettings {
    pub max_iterations: usize,
    /// Spread of objective values across the simplex.
    pub f_tolerance: f64,
    /// Largest vertex distance from the best vertex (∞-norm).
    pub x_tolerance: f64,
    pub initial_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SimplexOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Stopped on the tolerances rather than the iteration budget.
    pub tolerance_reached: bool,
}

struct Vertex {
    x: Vec<f64>,
    fx: f64,
}

fn cmp_f(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

/// Minimizes `f` from `x0`. Non-finite objective values are treated as +∞.
/// After each collapse the simplex is rebuilt around the best vertex; the
/// run ends when a rebuilt simplex collapses without improving on the best
/// value by more than the f-tolerance, or the iteration budget is spent.
pub(crate) fn minimize(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    settings: &SimplexSettings,
) -> SimplexOutcome {
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let n = x0.len();
    let mut best = Vertex {
        x: x0.to_vec(),
        fx: eval(x0),
    };
    let mut iterations = 0usize;
    let mut tolerance_reached = false;

    while iterations < settings.max_iterations {
        let start_f = best.fx;
        let mut simplex = Vec::with_capacity(n + 1);
        simplex.push(Vertex {
            x: best.x.clone(),
            fx: best.fx,
        });
        for i in 0..n {
            let mut x = best.x.clone();
            let step = if x[i].abs() > 1e-3 {
                settings.initial_step * x[i].abs().max(0.1)
            } else {
                settings.initial_step
            };
            x[i] += step;
            let fx = eval(&x);
            simplex.push(Vertex { x, fx });
        }

        let collapsed = run_simplex(&mut simplex, &mut eval, settings, &mut iterations);
        simplex.sort_by(|a, b| cmp_f(a.fx, b.fx));
        let candidate = simplex.swap_remove(0);
        if candidate.fx < best.fx {
            best = candidate;
        }
        if collapsed && start_f - best.fx <= settings.f_tolerance {
            tolerance_reached = true;
            break;
        }
        if !collapsed {
            break;
        }
    }

    SimplexOutcome {
        x: best.x,
        fx: best.fx,
        iterations,
        evaluations,
        tolerance_reached,
    }
}

/// Runs until the simplex collapses (returns true) or the budget runs out.
fn run_simplex(
    simplex: &mut [Vertex],
    eval: &mut impl FnMut(&[f64]) -> f64,
    settings: &SimplexSettings,
    iterations: &mut usize,
) -> bool {
    let n = simplex.len() - 1;
    loop {
        simplex.sort_by(|a, b| cmp_f(a.fx, b.fx));
        let spread = simplex[n].fx - simplex[0].fx;
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.x.iter().zip(&simplex[0].x).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if (spread <= settings.f_tolerance || !spread.is_finite() && simplex[0].fx.is_infinite())
            && size <= settings.x_tolerance
        {
            return true;
        }
        if *iterations >= settings.max_iterations {
            return false;
        }
        *iterations += 1;

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(&v.x) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].x)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr);
        if fr < simplex[0].fx {
            let xe = along(EXPAND);
            let fe = eval(&xe);
            simplex[n] = if fe < fr {
                Vertex { x: xe, fx: fe }
            } else {
                Vertex { x: xr, fx: fr }
            };
            continue;
        }
        if fr < simplex[n - 1].fx {
            simplex[n] = Vertex { x: xr, fx: fr };
            continue;
        }
        // contraction: outside if the reflection beat the worst vertex
        let (xc, fc) = if fr < simplex[n].fx {
            let xc = along(CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < simplex[n].fx.min(fr) {
            simplex[n] = Vertex { x: xc, fx: fc };
            continue;
        }
        let best = simplex[0].x.clone();
        for v in simplex[1..].iter_mut() {
            for (x, b) in v.x.iter_mut().zip(&best) {
                *x = b + SHRINK * (*x - b);
            }
            v.fx = eval(&v.x);
        }
    }
}
