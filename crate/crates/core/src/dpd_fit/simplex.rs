//! Nelder–Mead simplex minimizer with the standard coefficients.

use alloc::vec::Vec;


const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone)]
pub(crate) struct SimplexOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexTol {
    /// Relative spread of function values across the simplex.
    pub ftol: f64,
    /// Largest coordinate distance from the best vertex.
    pub xtol: f64,
    pub max_iter: usize,
}

/// Minimizes `f` from `x0` with an axis-aligned initial simplex of the given steps.
/// Non-finite values are treated as `+∞`, so infeasible regions simply repel the simplex.
pub(crate) fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    tol: SimplexTol,
) -> SimplexOutcome {
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for k in 0..n {
        let mut p = x0.to_vec();
        p[k] += steps[k];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let mut order: Vec<usize> = (0..=n).collect();
    let mut iters = 0;
    let mut converged = false;

    while iters < tol.max_iter {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];
        if simplex_done(&pts, &vals, best, tol) {
            converged = true;
            break;
        }
        iters += 1;

        let mut centroid = alloc::vec![0.0; n];
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&pts[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr);
        if fr < vals[best] {
            let xe = along(REFLECT * EXPAND);
            let fe = eval(&xe);
            if fe < fr {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[worst] {
            let xc = along(REFLECT * CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < vals[worst].min(fr) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        let xb = pts[best].clone();
        for &i in &order[1..] {
            for (x, b) in pts[i].iter_mut().zip(&xb) {
                *x = b + SHRINK * (*x - b);
            }
            vals[i] = eval(&pts[i]);
        }
    }
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    let best = order[0];
    SimplexOutcome {
        x: pts[best].clone(),
        f: vals[best],
        iters,
        converged,
    }
}

fn simplex_done(pts: &[Vec<f64>], vals: &[f64], best: usize, tol: SimplexTol) -> bool {
    let fb = vals[best];
    if !fb.is_finite() {
        return false;
    }
    let spread = vals.iter().fold(0.0_f64, |m, v| m.max((v - fb).abs()));
    if !(spread <= tol.ftol * (fb.abs() + tol.ftol)) {
        return false;
    }
    let diam = pts
        .iter()
        .flat_map(|p| p.iter().zip(&pts[best]).map(|(a, b)| (a - b).abs()))
        .fold(0.0_f64, f64::max);
    diam <= tol.xtol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let out = minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.5, 0.5],
            SimplexTol {
                ftol: 1e-14,
                xtol: 1e-9,
                max_iter: 5000,
            },
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_region_is_avoided() {
        let out = minimize(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) + x[1] * x[1] },
            &[0.1, 0.3],
            &[0.2, 0.2],
            SimplexTol {
                ftol: 1e-14,
                xtol: 1e-9,
                max_iter: 2000,
            },
        );
        assert!((out.x[0] - 0.5).abs() < 1e-6 && out.x[1].abs() < 1e-6);
    }
}
