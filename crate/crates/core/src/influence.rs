//! Influence functions of the MDPDE and of the Wald-type test.
//!
//! Observation indices are 0-based. With `Ψ_n` the bread matrix at `θ`,
//!
//! ```text
//! IF_{i0}(y0) = Ψ_n⁻¹ (1/n) [u_{i0}(y0) f_{i0}^α(y0) − ξ_{i0,α}]
//! IF(y)       = Ψ_n⁻¹ (1/n) Σ_i [u_i(y_i) f_i^α(y_i) − ξ_{i,α}]
//! ```
//!
//! For `α > 0` the bracket tends to `−ξ` in both tails, so the IF is bounded; at
//! `α = 0` it grows like the score.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent on hosted targets
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{kernel, psi_omega_from_moments, sandwich_of, xi_from_kernel, DesignMoments, Kernel};
use crate::dpd_fit::RegressionData;
use crate::linalg::solve_symmetric_vec;
use crate::numerics::special::{chi2_quantile, chi2_sf};
use crate::sn_dist::{score, sn_logpdf, ParamVector};
use crate::wald::{check_null, q_matrix, HypothesisSpec};
use crate::{Error, Result};

/// Default number of contamination points in a curve.
pub const GRID_POINTS: usize = 400;
/// Default half-width of a curve, in units of `σ`.
pub const GRID_HALFWIDTH: f64 = 12.0;

const SERIES_CAP: usize = 500;
const SERIES_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Contamination of observation `i0` only.
    Single(usize),
    /// Every response set to the same contamination point.
    All,
}

/// An influence function evaluated on a grid of contamination points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IfCurve {
    pub contamination_points: Vec<f64>,
    /// One row per grid point: `p+2` columns for the estimator, one for scalar IFs.
    pub values: Vec<Vec<f64>>,
    pub direction: Direction,
    pub alpha: f64,
}

/// Where the contamination sits.
#[derive(Debug, Clone, PartialEq)]
pub enum Contamination {
    Single { y0: f64, i0: usize },
    All(Vec<f64>),
}

/// Everything at `θ` that does not depend on the contamination point.
struct Context<'a> {
    theta: &'a ParamVector,
    data: &'a RegressionData,
    alpha: f64,
    psi: DMatrix<f64>,
    kern: Kernel,
}

impl<'a> Context<'a> {
    fn new(theta: &'a ParamVector, data: &'a RegressionData, alpha: f64) -> Result<Self> {
        theta.validate()?;
        if theta.p() != data.p() {
            return Err(Error::Dimension { expected: data.p(), got: theta.p() });
        }
        if !(alpha >= 0.0) {
            return Err(Error::domain("alpha must be non-negative"));
        }
        let (psi, _) = psi_omega_from_moments(theta, &DesignMoments::from_data(data), alpha)?;
        Ok(Context {
            theta,
            data,
            alpha,
            psi,
            kern: kernel(theta.gamma, alpha)?,
        })
    }

    /// `u_i(y) f_i^α(y) − ξ_{i,α}`
    fn bracket(&self, i: usize, y: f64) -> Result<DVector<f64>> {
        let x = self.data.row(i)?;
        let u = score(y, &x, self.theta);
        let w = if self.alpha == 0.0 {
            1.0
        } else {
            (self.alpha * sn_logpdf(y, self.theta.error_law(&x))).exp()
        };
        let xi = xi_from_kernel(&self.kern, self.theta.sigma, &x);
        let mut out = DVector::zeros(u.len());
        for k in 0..u.len() {
            // w underflows to 0 long before u overflows, but guard the product anyway
            let uw = if w == 0.0 { 0.0 } else { u[k] * w };
            out[k] = uw - xi[k];
        }
        Ok(out)
    }

    fn solve(&self, b: DVector<f64>) -> Result<Vec<f64>> {
        let n = self.data.n() as f64;
        Ok((solve_symmetric_vec(&self.psi, &b)? / n).as_slice().to_vec())
    }

    fn single(&self, y0: f64, i0: usize) -> Result<Vec<f64>> {
        if i0 >= self.data.n() {
            return Err(Error::domain(format!("observation index {i0} out of range (n = {})", self.data.n())));
        }
        self.solve(self.bracket(i0, y0)?)
    }

    fn all(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.data.n() {
            return Err(Error::Dimension { expected: self.data.n(), got: y.len() });
        }
        let mut b = DVector::zeros(self.theta.dim());
        for (i, &yi) in y.iter().enumerate() {
            b += self.bracket(i, yi)?;
        }
        self.solve(b)
    }

    fn eval(&self, c: &Contamination) -> Result<Vec<f64>> {
        match c {
            Contamination::Single { y0, i0 } => self.single(*y0, *i0),
            Contamination::All(y) => self.all(y),
        }
    }

    /// `−Ψ_n⁻¹ ξ_{i,α}/n` (single) or `−Ψ_n⁻¹ Σ ξ_{i,α}/n` (all)
    fn tail_limit(&self, direction: Direction) -> Result<Vec<f64>> {
        let mut b = DVector::zeros(self.theta.dim());
        let rows: Vec<usize> = match direction {
            Direction::Single(i0) => alloc::vec![i0],
            Direction::All => (0..self.data.n()).collect(),
        };
        for i in rows {
            let x = self.data.row(i)?;
            b -= DVector::from_vec(xi_from_kernel(&self.kern, self.theta.sigma, &x));
        }
        self.solve(b)
    }
}

/// First-order IF of the MDPDE under contamination of observation `i0` at `y0`.
pub fn if_single(y0: f64, i0: usize, theta: &ParamVector, data: &RegressionData, alpha: f64) -> Result<Vec<f64>> {
    Context::new(theta, data, alpha)?.single(y0, i0)
}

/// First-order IF under contamination of every observation, `y_i` for row `i`.
pub fn if_all(y: &[f64], theta: &ParamVector, data: &RegressionData, alpha: f64) -> Result<Vec<f64>> {
    Context::new(theta, data, alpha)?.all(y)
}

/// Limit of the IF as the contamination point goes to `±∞`; only meaningful for `α > 0`.
pub fn if_tail_limit(direction: Direction, theta: &ParamVector, data: &RegressionData, alpha: f64) -> Result<Vec<f64>> {
    if let Direction::Single(i0) = direction {
        if i0 >= data.n() {
            return Err(Error::domain(format!("observation index {i0} out of range (n = {})", data.n())));
        }
    }
    Context::new(theta, data, alpha)?.tail_limit(direction)
}

/// `points` equispaced values over `center ± halfwidth`.
pub fn grid(center: f64, halfwidth: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => alloc::vec![center],
        _ => {
            let step = 2.0 * halfwidth / (points - 1) as f64;
            (0..points).map(|k| center - halfwidth + step * k as f64).collect()
        }
    }
}

/// Default grid `μ ± 12σ` for a direction: `μ_{i0}` for a single observation, the mean
/// location otherwise.
pub fn default_grid(direction: Direction, theta: &ParamVector, data: &RegressionData) -> Result<Vec<f64>> {
    let center = match direction {
        Direction::Single(i0) => theta.location(&data.row(i0)?),
        Direction::All => theta.location(&data.mean_row()),
    };
    Ok(grid(center, GRID_HALFWIDTH * theta.sigma, GRID_POINTS))
}

fn check_grid(points: &[f64]) -> Result<()> {
    if points.iter().any(|v| !v.is_finite()) || points.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("contamination grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// IF of the estimator along a grid; `None` uses [`default_grid`]. For
/// [`Direction::All`] every response is set to the grid value.
pub fn if_curve(
    direction: Direction,
    theta: &ParamVector,
    data: &RegressionData,
    alpha: f64,
    points: Option<Vec<f64>>,
) -> Result<IfCurve> {
    let points = match points {
        Some(p) => p,
        None => default_grid(direction, theta, data)?,
    };
    check_grid(&points)?;
    let ctx = Context::new(theta, data, alpha)?;
    let values = points
        .iter()
        .map(|&y| match direction {
            Direction::Single(i0) => ctx.single(y, i0),
            Direction::All => ctx.all(&alloc::vec![y; data.n()]),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IfCurve {
        contamination_points: points,
        values,
        direction,
        alpha,
    })
}

/// `Σ_α(θ₀)` for the test influence functions.
fn sigma_at(theta0: &ParamVector, data: &RegressionData, alpha: f64) -> Result<DMatrix<f64>> {
    let (psi, omega) = psi_omega_from_moments(theta0, &DesignMoments::from_data(data), alpha)?;
    sandwich_of(&psi, &omega)
}

/// Second-order IF of the Wald-type statistic, `2 IFᵀ Q_α(θ₀) IF`; the first-order IF
/// is identically zero.
pub fn if2_test(
    at: &Contamination,
    theta0: &ParamVector,
    hyp: &HypothesisSpec,
    data: &RegressionData,
    alpha: f64,
) -> Result<f64> {
    check_null(theta0, hyp)?;
    let infl = Context::new(theta0, data, alpha)?.eval(at)?;
    let q = q_matrix(hyp, theta0, &sigma_at(theta0, data, alpha)?)?;
    Ok(if2_from_if(&infl, &q))
}

/// `2 IFᵀ Q IF`, clipped at zero against rounding.
pub fn if2_from_if(infl: &[f64], q: &DMatrix<f64>) -> f64 {
    let v = DVector::from_column_slice(infl);
    (2.0 * v.dot(&(q * &v))).max(0.0)
}

/// `C_r*(s) = e^{−s/2} Σ_{v≥0} s^{v−1} 2^{−v} (2v − s) P(χ²_{r+2v} > χ²_{r,τ}) / v!`,
/// i.e. twice the derivative of the noncentral-χ² power in its noncentrality.
///
/// The `v = 0` term is evaluated as `−P(χ²_r > χ²_{r,τ})` so that `s = 0` is regular.
pub fn c_star(r: usize, s: f64, tau: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::domain("C_r* needs a finite, non-negative argument"));
    }
    let rf = r as f64;
    let c = chi2_quantile(rf, tau)?;
    if s == 0.0 {
        // only v = 0 and v = 1 survive: −P_r + s⁰ 2⁻¹ · 2 / 1! · P_{r+2}
        return Ok(chi2_sf(rf + 2.0, c) - chi2_sf(rf, c));
    }
    let mut sum = -(-0.5 * s).exp() * chi2_sf(rf, c);
    let ln_s = s.ln();
    for v in 1..SERIES_CAP {
        let vf = v as f64;
        let ln_mag = (vf - 1.0) * ln_s - vf * core::f64::consts::LN_2 - libm::lgamma(vf + 1.0) - 0.5 * s;
        let term = ln_mag.exp() * (2.0 * vf - s) * chi2_sf(rf + 2.0 * vf, c);
        sum += term;
        if 2.0 * vf > s && term.abs() < SERIES_TOL * (sum.abs() + 1e-300) {
            return Ok(sum);
        }
    }
    Err(Error::Series { terms: SERIES_CAP })
}

/// Power influence function `C_r*(dᵀQd) · dᵀ Q IF` at contiguous direction `d`.
#[allow(clippy::too_many_arguments)]
pub fn pif(
    at: &Contamination,
    theta0: &ParamVector,
    hyp: &HypothesisSpec,
    d: &[f64],
    tau: f64,
    data: &RegressionData,
    alpha: f64,
) -> Result<f64> {
    check_null(theta0, hyp)?;
    let infl = Context::new(theta0, data, alpha)?.eval(at)?;
    let q = q_matrix(hyp, theta0, &sigma_at(theta0, data, alpha)?)?;
    pif_from_if(&infl, &q, hyp.r(), d, tau)
}

/// [`pif`] from a precomputed IF and `Q`.
pub fn pif_from_if(infl: &[f64], q: &DMatrix<f64>, r: usize, d: &[f64], tau: f64) -> Result<f64> {
    if d.len() != q.nrows() || infl.len() != q.nrows() {
        return Err(Error::Dimension { expected: q.nrows(), got: d.len().min(infl.len()) });
    }
    let dv = DVector::from_column_slice(d);
    let qd = q * &dv;
    let s = dv.dot(&qd).max(0.0);
    Ok(c_star(r, s, tau)? * qd.dot(&DVector::from_column_slice(infl)))
}

/// Scalar curve of [`if2_test`] or [`pif`] along a grid of single-point contaminations.
#[allow(clippy::too_many_arguments)]
pub fn test_curve(
    kind: TestCurve,
    direction: Direction,
    theta0: &ParamVector,
    hyp: &HypothesisSpec,
    data: &RegressionData,
    alpha: f64,
    points: Option<Vec<f64>>,
) -> Result<IfCurve> {
    check_null(theta0, hyp)?;
    let points = match points {
        Some(p) => p,
        None => default_grid(direction, theta0, data)?,
    };
    check_grid(&points)?;
    let ctx = Context::new(theta0, data, alpha)?;
    let q = q_matrix(hyp, theta0, &sigma_at(theta0, data, alpha)?)?;
    let values = points
        .iter()
        .map(|&y| {
            let infl = match direction {
                Direction::Single(i0) => ctx.single(y, i0)?,
                Direction::All => ctx.all(&alloc::vec![y; data.n()])?,
            };
            let v = match &kind {
                TestCurve::SecondOrder => if2_from_if(&infl, &q),
                TestCurve::Power { d, tau } => pif_from_if(&infl, &q, hyp.r(), d, *tau)?,
            };
            Ok(alloc::vec![v])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IfCurve {
        contamination_points: points,
        values,
        direction,
        alpha,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestCurve {
    /// [`if2_test`]
    SecondOrder,
    /// [`pif`] at direction `d` and level `tau`
    Power { d: Vec<f64>, tau: f64 },
}

/// Level influence function. The level of the Wald-type test is insensitive to
/// contamination at every order, so this is identically zero.
pub fn lif(_at: &Contamination, _theta0: &ParamVector, _hyp: &HypothesisSpec, _tau: f64) -> f64 {
    0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::noncentral_chi2_sf;
    use crate::numerics::RngStream;
    use alloc::vec;

    fn design(n: usize, seed: u64) -> RegressionData {
        let mut rng = RngStream::new(seed, 0);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.normal(1.0, 1.0)]).collect();
        let theta = ParamVector::new(vec![3.0], 2.0, 2.0).unwrap();
        let y = rows.iter().map(|x| theta.location(x)).collect();
        RegressionData::from_rows(&rows, y, vec!["x".into()]).unwrap()
    }

    fn theta() -> ParamVector {
        ParamVector::new(vec![3.0], 2.0, 2.0).unwrap()
    }

    #[test]
    fn beta_if_vanishes_at_location_for_mle_at_gamma_zero() {
        let d = design(30, 1);
        let t = ParamVector::new(vec![3.0], 2.0, 0.0).unwrap();
        let x = d.row(4).unwrap();
        let infl = if_single(t.location(&x), 4, &t, &d, 0.0).unwrap();
        // the γ = 0 bread couples β and γ, so check the bracket itself
        let ctx = Context::new(&t, &d, 0.0).unwrap();
        let b = ctx.bracket(4, t.location(&x)).unwrap();
        assert_eq!(b[0], 0.0);
        assert!(infl.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn tail_limit_for_positive_alpha() {
        let d = design(50, 2);
        let t = theta();
        for alpha in [0.3, 0.5, 1.0] {
            let lim = if_tail_limit(Direction::Single(0), &t, &d, alpha).unwrap();
            let mu = t.location(&d.row(0).unwrap());
            for y in [mu + 40.0 * t.sigma, mu - 40.0 * t.sigma] {
                let v = if_single(y, 0, &t, &d, alpha).unwrap();
                for (a, b) in v.iter().zip(&lim) {
                    assert!((a - b).abs() <= 1e-6, "{a} {b}");
                }
            }
        }
    }

    #[test]
    fn mle_if_grows_without_bound() {
        let d = design(50, 3);
        let t = theta();
        let mu = t.location(&d.row(0).unwrap());
        let mut last = [0.0; 2];
        for k in 10..=50 {
            let v = if_single(mu + k as f64 * t.sigma, 0, &t, &d, 0.0).unwrap();
            for c in 0..2 {
                assert!(v[c].abs() > last[c], "component {c} at k = {k}");
                last[c] = v[c].abs();
            }
        }
    }

    #[test]
    fn if_all_is_sum_of_single_brackets() {
        let d = design(12, 4);
        let t = theta();
        let y: Vec<f64> = (0..12).map(|i| 1.0 + 0.7 * i as f64).collect();
        let all = if_all(&y, &t, &d, 0.4).unwrap();
        let mut sum = vec![0.0; 3];
        for (i, &yi) in y.iter().enumerate() {
            let s = if_single(yi, i, &t, &d, 0.4).unwrap();
            for k in 0..3 {
                sum[k] += s[k];
            }
        }
        for k in 0..3 {
            assert!((all[k] - sum[k]).abs() < 1e-10 * (1.0 + sum[k].abs()));
        }
    }

    #[test]
    fn if_all_identical_rows_matches_single() {
        let rows = vec![vec![1.5]; 6];
        let d = RegressionData::from_rows(&rows, vec![4.0; 6], vec!["x".into()]).unwrap();
        let t = theta();
        let a = if_all(&[7.0; 6], &t, &d, 0.5).unwrap();
        let s = if_single(7.0, 2, &t, &d, 0.5).unwrap();
        for k in 0..3 {
            assert!((a[k] - 6.0 * s[k]).abs() < 1e-12 * (1.0 + a[k].abs()));
        }
    }

    #[test]
    fn c_star_matches_power_derivative() {
        for (r, s) in [(1usize, 1.0), (1, 0.0), (2, 3.5), (3, 12.0)] {
            let c = chi2_quantile(r as f64, 0.05).unwrap();
            let h = 1e-5;
            let lo = if s == 0.0 { 0.0 } else { s - h };
            let fd = 2.0 * (noncentral_chi2_sf(r as f64, s + h, c).unwrap() - noncentral_chi2_sf(r as f64, lo, c).unwrap())
                / (s + h - lo);
            let tol = if s == 0.0 { 1e-4 } else { 1e-7 };
            assert!((c_star(r, s, 0.05).unwrap() - fd).abs() < tol, "r={r} s={s}");
        }
    }

    #[test]
    fn c_star_monte_carlo() {
        // C_r*(s) = E[P(χ²_{r+2V} > c)(2V/s − 1)] with V ~ Poisson(s/2)
        let (r, s, tau) = (1usize, 1.0, 0.05);
        let c = chi2_quantile(r as f64, tau).unwrap();
        let mut rng = RngStream::new(77, 0);
        let draws = 200_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..draws {
            let u = rng.uniform();
            let mut v = 0usize;
            let mut p = (-0.5 * s).exp();
            let mut cdf = p;
            while u >= cdf {
                v += 1;
                p *= 0.5 * s / v as f64;
                cdf += p;
            }
            let val = chi2_sf((r + 2 * v) as f64, c) * (2.0 * v as f64 / s - 1.0);
            sum += val;
            sumsq += val * val;
        }
        let mean = sum / draws as f64;
        let se = ((sumsq / draws as f64 - mean * mean) / draws as f64).sqrt();
        assert!((c_star(r, s, tau).unwrap() - mean).abs() < 4.0 * se);
    }

    #[test]
    fn second_order_and_power_if() {
        let d = design(40, 5);
        let t0 = ParamVector::new(vec![3.0], 1.0, 2.0).unwrap();
        let hyp = HypothesisSpec::beta(0, 3.0).unwrap();
        let mu = t0.location(&d.row(0).unwrap());
        let at = Contamination::Single { y0: mu + 2.0, i0: 0 };
        let v = if2_test(&at, &t0, &hyp, &d, 0.5).unwrap();
        assert!(v >= 0.0);
        // scalar case: 2 IF_β² / Σ_11
        let infl = if_single(mu + 2.0, 0, &t0, &d, 0.5).unwrap();
        let sig = sigma_at(&t0, &d, 0.5).unwrap();
        assert!((v - 2.0 * infl[0].powi(2) / sig[(0, 0)]).abs() < 1e-10 * v.max(1e-300));
        let q = q_matrix(&hyp, &t0, &sig).unwrap();
        assert_eq!(if2_from_if(&[0.0; 3], &q), 0.0);
        let dir = [0.01, 0.0, 0.0];
        let p1 = pif(&at, &t0, &hyp, &dir, 0.05, &d, 0.5).unwrap();
        let p2 = pif(&at, &t0, &hyp, &[-0.01, 0.0, 0.0], 0.05, &d, 0.5).unwrap();
        assert!((p1 + p2).abs() < 1e-15);
        let scaled: Vec<f64> = infl.iter().map(|v| 3.0 * v).collect();
        let a = pif_from_if(&infl, &q, 1, &dir, 0.05).unwrap();
        let b = pif_from_if(&scaled, &q, 1, &dir, 0.05).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-14 * a.abs().max(1e-300));
        assert_eq!(pif_from_if(&[0.0; 3], &q, 1, &dir, 0.05).unwrap(), 0.0);
        assert_eq!(lif(&at, &t0, &hyp, 0.05), 0.0);
    }

    #[test]
    fn bounded_pif_curve() {
        let d = design(40, 6);
        let t0 = ParamVector::new(vec![3.0], 1.0, 2.0).unwrap();
        let hyp = HypothesisSpec::beta(0, 3.0).unwrap();
        let kind = TestCurve::Power { d: vec![0.01, 0.0, 0.0], tau: 0.05 };
        let curve = test_curve(kind, Direction::Single(0), &t0, &hyp, &d, 0.5, None).unwrap();
        assert_eq!(curve.values.len(), GRID_POINTS);
        assert!(curve.values.iter().all(|v| v[0].is_finite()));
        let wide = grid(t0.location(&d.row(0).unwrap()), 50.0, 201);
        let kind = TestCurve::Power { d: vec![0.01, 0.0, 0.0], tau: 0.05 };
        let far = test_curve(kind, Direction::Single(0), &t0, &hyp, &d, 0.5, Some(wide)).unwrap();
        let sup = far.values.iter().map(|v| v[0].abs()).fold(0.0, f64::max);
        assert!(sup.is_finite() && sup < 1.0);
    }

    #[test]
    fn curve_shapes_and_validation() {
        let d = design(20, 7);
        let t = theta();
        let c = if_curve(Direction::All, &t, &d, 0.3, None).unwrap();
        assert_eq!(c.contamination_points.len(), GRID_POINTS);
        assert!(c.values.iter().all(|row| row.len() == 3 && row.iter().all(|v| v.is_finite())));
        assert!(c.contamination_points.windows(2).all(|w| w[1] > w[0]));
        assert!(if_curve(Direction::Single(0), &t, &d, 0.3, Some(vec![1.0, 1.0])).is_err());
        assert!(if_single(0.0, 20, &t, &d, 0.3).is_err());
    }
}
