//! Asymptotic distribution of the MDPDE: `ξ`, `J`, `K`, `Ψ_n`, `Ω_n` and the sandwich
//! covariance `Σ = Ψ_n⁻¹ Ω_n Ψ_n⁻¹`.
//!
//! Every integral reduces, after standardizing `z = (y − μ_i)/σ`, to a moment of the
//! standard kernel `g(z) = 2φ(z)Φ(γz)`:
//!
//! ```text
//! C = ∫ g^{1+α},   A_j = ∫ s_j g^{1+α},   B_jk = ∫ s_j s_k g^{1+α}
//! ```
//!
//! with `(s₁, s₂, s₃)` from [`crate::sn_dist::std_score`]. Since `u = (s₁x/σ, s₂/σ, s₃)` and
//! `f^{1+α} dy = σ^{−α} g^{1+α} dz`, the observation only enters through `x_i`, and one
//! quadrature per `(γ, α)` serves every observation.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent on hosted targets
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dpd_fit::{FitResult, RegressionData};
use crate::linalg::{self, solve_symmetric};
use crate::numerics::{integrate_real_line, integrate_real_line_array, inv_mills, log_norm_cdf, special, RngStream};
use crate::sn_dist::{ParamVector, SnParams};
use crate::{Error, Result};

/// Relative accuracy requested from the kernel quadrature.
pub const KERNEL_TOL: f64 = 1e-12;

/// Standardized moments of `g^{1+α}`; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub gamma: f64,
    pub alpha: f64,
    pub c: f64,
    pub a: [f64; 3],
    pub b: [[f64; 3]; 3],
}

pub fn kernel(gamma: f64, alpha: f64) -> Result<Kernel> {
    if !gamma.is_finite() || !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::domain("kernel needs finite γ and α ≥ 0"));
    }
    let power = 1.0 + alpha;
    let v = integrate_real_line_array::<10, _>(
        |z| {
            let gz = gamma * z;
            let w = (power * (LN_2 + special::log_norm_pdf(z) + log_norm_cdf(gz))).exp();
            if w == 0.0 {
                return [0.0; 10];
            }
            let lam = inv_mills(gz);
            let s1 = z - gamma * lam;
            let s2 = z * z - 1.0 - gamma * z * lam;
            let s3 = z * lam;
            [
                w,
                s1 * w,
                s2 * w,
                s3 * w,
                s1 * s1 * w,
                s1 * s2 * w,
                s1 * s3 * w,
                s2 * s2 * w,
                s2 * s3 * w,
                s3 * s3 * w,
            ]
        },
        KERNEL_TOL,
    )?;
    // ∫ u f = 0 exactly at α = 0; keep the quadrature residue out of ξ
    let a = if alpha == 0.0 { [0.0; 3] } else { [v[1], v[2], v[3]] };
    Ok(Kernel {
        gamma,
        alpha,
        c: v[0],
        a,
        b: [[v[4], v[5], v[6]], [v[5], v[7], v[8]], [v[6], v[8], v[9]]],
    })
}

/// `C = ∫ g^{1+α}` alone: the only kernel moment the DPD objective needs.
pub fn kernel_mass(gamma: f64, alpha: f64) -> Result<f64> {
    if !gamma.is_finite() || !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::domain("kernel needs finite γ and α ≥ 0"));
    }
    let power = 1.0 + alpha;
    integrate_real_line(
        |z| (power * (LN_2 + special::log_norm_pdf(z) + log_norm_cdf(gamma * z))).exp(),
        KERNEL_TOL,
    )
}

/// Sufficient design summaries `n`, `Σx_i` and `Σx_i x_iᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMoments {
    pub count: f64,
    pub sum_x: DVector<f64>,
    pub sum_xx: DMatrix<f64>,
}

impl DesignMoments {
    pub fn from_data(data: &RegressionData) -> Self {
        let ones = DVector::from_element(data.n(), 1.0);
        DesignMoments {
            count: data.n() as f64,
            sum_x: data.x.transpose() * ones,
            sum_xx: data.x.transpose() * &data.x,
        }
    }

    pub fn single(x: &[f64]) -> Self {
        let v = DVector::from_column_slice(x);
        DesignMoments {
            count: 1.0,
            sum_xx: &v * v.transpose(),
            sum_x: v,
        }
    }
}

// Σ_i of a matrix with the (β,σ,γ) block pattern of J:
//   ββ: m11 xxᵀ/σ², βσ: m12 x/σ², βγ: m13 x/σ, σσ: m22/σ², σγ: m23/σ, γγ: m33,
// all times σ^{-pow}.
fn structured(m: &[[f64; 3]; 3], sigma: f64, pow: f64, d: &DesignMoments) -> DMatrix<f64> {
    let p = d.sum_x.len();
    let s = sigma.powf(-pow);
    let s1 = s / sigma;
    let s2 = s1 / sigma;
    let mut out = DMatrix::zeros(p + 2, p + 2);
    for i in 0..p {
        for j in 0..p {
            out[(i, j)] = s2 * m[0][0] * d.sum_xx[(i, j)];
        }
        let bs = s2 * m[0][1] * d.sum_x[i];
        let bg = s1 * m[0][2] * d.sum_x[i];
        out[(i, p)] = bs;
        out[(p, i)] = bs;
        out[(i, p + 1)] = bg;
        out[(p + 1, i)] = bg;
    }
    out[(p, p)] = s2 * m[1][1] * d.count;
    out[(p, p + 1)] = s1 * m[1][2] * d.count;
    out[(p + 1, p)] = out[(p, p + 1)];
    out[(p + 1, p + 1)] = s * m[2][2] * d.count;
    out
}

fn outer(a: &[f64; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i] * a[j];
        }
    }
    m
}

/// `ξ = σ^{−α}(A₁x/σ, A₂/σ, A₃)` for covariate row `x`.
pub fn xi_from_kernel(k: &Kernel, sigma: f64, x: &[f64]) -> Vec<f64> {
    let s = sigma.powf(-k.alpha);
    let mut out: Vec<f64> = x.iter().map(|xj| s * k.a[0] * xj / sigma).collect();
    out.push(s * k.a[1] / sigma);
    out.push(s * k.a[2]);
    out
}

/// `ξ_{i,α}(θ) = ∫ u_i f_i^{1+α} dy`.
pub fn xi_alpha(i: usize, theta: &ParamVector, data: &RegressionData, alpha: f64) -> Result<Vec<f64>> {
    let x = data.row(i)?;
    let k = kernel(theta.gamma, alpha)?;
    Ok(xi_from_kernel(&k, theta.sigma, &x))
}

/// `J_α^{(i)}(θ) = ∫ u_i u_iᵀ f_i^{1+α} dy`.
pub fn j_matrix(i: usize, theta: &ParamVector, data: &RegressionData, alpha: f64) -> Result<DMatrix<f64>> {
    let x = data.row(i)?;
    let k = kernel(theta.gamma, alpha)?;
    Ok(structured(&k.b, theta.sigma, alpha, &DesignMoments::single(&x)))
}

/// `K_α^{(i)}(θ) = ∫ u_i u_iᵀ f_i^{1+2α} dy − ξ_{i,α} ξ_{i,α}ᵀ`.
pub fn k_matrix(i: usize, theta: &ParamVector, data: &RegressionData, alpha: f64) -> Result<DMatrix<f64>> {
    let x = data.row(i)?;
    let k1 = kernel(theta.gamma, alpha)?;
    let k2 = kernel(theta.gamma, 2.0 * alpha)?;
    let d = DesignMoments::single(&x);
    Ok(structured(&k2.b, theta.sigma, 2.0 * alpha, &d) - structured(&outer(&k1.a), theta.sigma, 2.0 * alpha, &d))
}

/// `Ψ_n` and `Ω_n` from precomputed design moments.
pub fn psi_omega_from_moments(
    theta: &ParamVector,
    design: &DesignMoments,
    alpha: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if design.sum_x.len() != theta.p() {
        return Err(Error::Dimension {
            expected: theta.p(),
            got: design.sum_x.len(),
        });
    }
    let k1 = kernel(theta.gamma, alpha)?;
    let k2 = kernel(theta.gamma, 2.0 * alpha)?;
    let inv_n = 1.0 / design.count;
    let psi = structured(&k1.b, theta.sigma, alpha, design) * inv_n;
    let omega = (structured(&k2.b, theta.sigma, 2.0 * alpha, design)
        - structured(&outer(&k1.a), theta.sigma, 2.0 * alpha, design))
        * inv_n;
    Ok((psi, omega))
}

/// Bread, meat and sandwich of the MDPDE at `θ`; `Σ` is per observation, so the
/// covariance of `θ̂` is `Σ/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticMatrices {
    #[serde(with = "crate::serde_nalgebra::matrix")]
    pub psi: DMatrix<f64>,
    #[serde(with = "crate::serde_nalgebra::matrix")]
    pub omega: DMatrix<f64>,
    #[serde(with = "crate::serde_nalgebra::matrix")]
    pub sigma: DMatrix<f64>,
    pub alpha: f64,
}

pub fn sandwich(theta: &ParamVector, data: &RegressionData, alpha: f64) -> Result<AsymptoticMatrices> {
    if data.p() != theta.p() {
        return Err(Error::Dimension {
            expected: data.p(),
            got: theta.p(),
        });
    }
    sandwich_from_moments(theta, &DesignMoments::from_data(data), alpha)
}

pub fn sandwich_from_moments(
    theta: &ParamVector,
    design: &DesignMoments,
    alpha: f64,
) -> Result<AsymptoticMatrices> {
    let (psi, omega) = psi_omega_from_moments(theta, design, alpha)?;
    let sigma = sandwich_of(&psi, &omega)?;
    Ok(AsymptoticMatrices {
        psi,
        omega,
        sigma,
        alpha,
    })
}

/// `Ψ⁻¹ Ω Ψ⁻¹` via two symmetric solves.
pub fn sandwich_of(psi: &DMatrix<f64>, omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let left = solve_symmetric(psi, omega)?;
    let mut sigma = solve_symmetric(psi, &left.transpose())?;
    linalg::symmetrize(&mut sigma);
    Ok(sigma)
}

/// `sqrt(diag(Σ)/n)`.
pub fn standard_errors(am: &AsymptoticMatrices, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("standard errors need n ≥ 1"));
    }
    let trace = am.sigma.trace().abs();
    (0..am.sigma.nrows())
        .map(|k| {
            let v = am.sigma[(k, k)];
            if v < -1e-8 * trace || !v.is_finite() {
                Err(Error::Numerical(alloc::format!("negative asymptotic variance {v:e} at index {k}")))
            } else {
                Ok((v.max(0.0) / n as f64).sqrt())
            }
        })
        .collect()
}

/// Fills `fit.se` from the sandwich at `θ̂`.
pub fn attach_standard_errors(fit: &mut FitResult, data: &RegressionData) -> Result<AsymptoticMatrices> {
    let am = sandwich(&fit.theta_hat, data, fit.alpha)?;
    fit.se = Some(standard_errors(&am, data.n())?);
    Ok(am)
}

/// Normal law of the single covariate used for ARE designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateLaw {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for CovariateLaw {
    /// `x ~ N(1, 1)`, 10 000 draws, fixed seed.
    fn default() -> Self {
        CovariateLaw {
            mean: 1.0,
            sd: 1.0,
            n: 10_000,
            seed: 20_170_301,
        }
    }
}

impl CovariateLaw {
    pub fn draw(&self) -> Vec<f64> {
        let mut rng = RngStream::new(self.seed, 0);
        (0..self.n).map(|_| rng.normal(self.mean, self.sd)).collect()
    }

    pub fn design(&self) -> DesignMoments {
        let xs = self.draw();
        let sx: f64 = xs.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        DesignMoments {
            count: xs.len() as f64,
            sum_x: DVector::from_element(1, sx),
            sum_xx: DMatrix::from_element(1, 1, sxx),
        }
    }
}

/// ARE percentages `100 · Σ₀(c,c)/Σ_α(c,c)` for the single-covariate model
/// `y = xβ + ε`, `ε ~ SN(0, σ, γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreTable {
    pub error: SnParams,
    pub alphas: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
    pub design: CovariateLaw,
}

pub fn are_table(error: SnParams, alphas: &[f64], law: &CovariateLaw) -> Result<AreTable> {
    error.validate()?;
    if !alphas.contains(&0.0) {
        return Err(Error::domain("ARE table needs α = 0 among the tuning parameters"));
    }
    let design = law.design();
    let theta = ParamVector::new(alloc::vec![1.0], error.sigma, error.gamma)?;
    let base = sandwich_from_moments(&theta, &design, 0.0)?.sigma;
    let mut table = AreTable {
        error,
        alphas: alphas.to_vec(),
        beta: Vec::new(),
        sigma: Vec::new(),
        gamma: Vec::new(),
        design: *law,
    };
    for &a in alphas {
        if a == 0.0 {
            table.beta.push(100.0);
            table.sigma.push(100.0);
            table.gamma.push(100.0);
            continue;
        }
        let s = sandwich_from_moments(&theta, &design, a)?.sigma;
        table.beta.push(100.0 * base[(0, 0)] / s[(0, 0)]);
        table.sigma.push(100.0 * base[(1, 1)] / s[(1, 1)]);
        table.gamma.push(100.0 * base[(2, 2)] / s[(2, 2)]);
    }
    Ok(table)
}

/// Closed-form `Ψ_n`, `Ω_n` at `γ = 0` for the model `y = xβ + ε` with one covariate,
/// given `x̄` and `mean(x²)`. Includes the `σ`-powers, so it holds for any `σ`.
///
/// The `(β, γ)` entry of `Ω_n` carries `(2π)^{−α}`, like every other entry; the
/// value `(2π)^{−2α}` sometimes printed for it does not follow from the integrals.
pub fn gamma0_closed_form(alpha: f64, sigma: f64, mean_x: f64, mean_xx: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = alpha;
    let c = (2.0 / PI).sqrt();
    let phi = (2.0 * PI).powf(-a / 2.0) * (1.0 + a).powf(-1.5);
    let psi1 = [
        [phi * mean_xx, 0.0, phi * c * mean_x],
        [0.0, phi * (a * a + 2.0) / (1.0 + a), 0.0],
        [phi * c * mean_x, 0.0, phi * 2.0 / PI],
    ];
    let b = (2.0 * PI).powf(-a) * (1.0 + 2.0 * a).powf(-1.5);
    let w22 = (2.0 * PI).powf(-a) * ((1.0 + 2.0 * a).powf(-2.5) * (4.0 * a * a + 2.0) - a * a * (1.0 + a).powi(-3));
    let omega1 = [
        [b * mean_xx, 0.0, b * c * mean_x],
        [0.0, w22, 0.0],
        [b * c * mean_x, 0.0, b * 2.0 / PI],
    ];
    // σ enters as σ^{-α} (Ψ) or σ^{-2α} (Ω) times 1/σ for each β or σ index
    let scale = [1.0 / sigma, 1.0 / sigma, 1.0];
    let psi = DMatrix::from_fn(3, 3, |i, j| sigma.powf(-a) * scale[i] * scale[j] * psi1[i][j]);
    let omega = DMatrix::from_fn(3, 3, |i, j| sigma.powf(-2.0 * a) * scale[i] * scale[j] * omega1[i][j]);
    (psi, omega)
}

/// Closed-form `Σ_α` at `γ = 0`, `σ = 1`, one covariate.
///
/// With `s_xx` the (biased) sample variance of `x`: `Σ₁₁ = b/(φ²s_xx)`,
/// `Σ₁₃ = −b x̄/(φ² c s_xx)`, `Σ₃₃ = b·mean(x²)/(φ² c² s_xx)` and
/// `Σ₂₂ = ω₂₂/ψ₂₂²`, where `b = (2π)^{−α}(1+2α)^{−3/2}`, `c = sqrt(2/π)` and
/// `φ = (2π)^{−α/2}(1+α)^{−3/2}`. The β and γ variances share the `α`-dependent
/// factor `b/φ²`, which is why their AREs coincide.
pub fn gamma0_sigma_closed_form(alpha: f64, mean_x: f64, mean_xx: f64) -> DMatrix<f64> {
    let a = alpha;
    let c = (2.0 / PI).sqrt();
    let phi = (2.0 * PI).powf(-a / 2.0) * (1.0 + a).powf(-1.5);
    let b = (2.0 * PI).powf(-a) * (1.0 + 2.0 * a).powf(-1.5);
    let sxx = mean_xx - mean_x * mean_x;
    let k = (a * a + 2.0) / (1.0 + a);
    let w22 = (2.0 * PI).powf(-a) * ((1.0 + 2.0 * a).powf(-2.5) * (4.0 * a * a + 2.0) - a * a * (1.0 + a).powi(-3));
    let f = b / (phi * phi * sxx);
    let mut s = DMatrix::zeros(3, 3);
    s[(0, 0)] = f;
    s[(0, 2)] = -f * mean_x / c;
    s[(2, 0)] = s[(0, 2)];
    s[(2, 2)] = f * mean_xx / (c * c);
    s[(1, 1)] = w22 / (phi * phi * k * k);
    s
}

/// `ARE_β(α) = ARE_γ(α) = 100 (1+2α)^{3/2} / (1+α)³` at `γ = 0`.
pub fn gamma0_are_beta(alpha: f64) -> f64 {
    100.0 * (1.0 + 2.0 * alpha).powf(1.5) / (1.0 + alpha).powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single_covariate_data(n: usize, seed: u64, theta: &ParamVector) -> RegressionData {
        let mut rng = RngStream::new(seed, 0);
        let xs: Vec<f64> = (0..n).map(|_| rng.normal(1.0, 1.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * theta.beta[0] + theta.sigma * rng.standard_normal()).collect();
        RegressionData::new(DMatrix::from_column_slice(n, 1, &xs), DVector::from_vec(ys), vec!["x".into()])
            .unwrap()
    }

    #[test]
    fn kernel_normalization_and_gamma0_values() {
        for &a in &[0.0, 0.3, 1.0] {
            let k = kernel(0.0, a).unwrap();
            let expect = (2.0 * PI).powf(-a / 2.0) * (1.0 + a).powf(-0.5);
            assert!((k.c - expect).abs() < 1e-12);
            // β-score is odd at γ = 0
            assert!(k.a[0].abs() < 1e-14 && k.a[2].abs() < 1e-14);
        }
        let k0 = kernel(2.5, 0.0).unwrap();
        assert!((k0.c - 1.0).abs() < 1e-12);
        assert_eq!(k0.a, [0.0; 3]);
    }

    #[test]
    fn xi_vanishes_at_mle_and_scales_with_sigma() {
        let t1 = ParamVector::new(vec![0.5, 1.0], 1.0, 1.5).unwrap();
        let t2 = ParamVector::new(vec![0.5, 1.0], 2.0, 1.5).unwrap();
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.2, 1.0, -1.0, 1.0, 2.0, 1.0, 0.5]);
        let data = RegressionData::new(x, DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0]), vec!["a".into(), "b".into()])
            .unwrap();
        let xi0 = xi_alpha(1, &t1, &data, 0.0).unwrap();
        assert!(xi0.iter().all(|v| v.abs() < 1e-8));
        let a = 0.4;
        let x1 = xi_alpha(2, &t1, &data, a).unwrap();
        let x2 = xi_alpha(2, &t2, &data, a).unwrap();
        let s = 2.0f64.powf(-a);
        for k in 0..2 {
            assert!((x2[k] - s * x1[k] / 2.0).abs() < 1e-12);
        }
        assert!((x2[2] - s * x1[2] / 2.0).abs() < 1e-12);
        assert!((x2[3] - s * x1[3]).abs() < 1e-12);
    }

    #[test]
    fn j_equals_k_at_alpha_zero() {
        let theta = ParamVector::new(vec![1.0, -0.5], 1.3, -2.0).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.7, 1.0, -1.2]);
        let data = RegressionData::new(x, DVector::from_vec(vec![0.0, 1.0]), vec!["a".into(), "b".into()]).unwrap();
        let j = j_matrix(0, &theta, &data, 0.0).unwrap();
        let k = k_matrix(0, &theta, &data, 0.0).unwrap();
        assert!((&j - &k).abs().max() < 1e-8);
        assert_eq!(j, j.transpose());
    }

    #[test]
    fn psi_omega_match_gamma0_closed_form() {
        let theta = ParamVector::new(vec![3.0], 1.0, 0.0).unwrap();
        let data = single_covariate_data(300, 11, &theta);
        let xs: Vec<f64> = data.x.column(0).iter().copied().collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let mxx = xs.iter().map(|x| x * x).sum::<f64>() / n;
        for &a in &[0.1, 0.5, 1.0] {
            let am = sandwich(&theta, &data, a).unwrap();
            let (psi, omega) = gamma0_closed_form(a, 1.0, mx, mxx);
            assert!((&am.psi - &psi).abs().max() < 1e-10, "α={a}");
            assert!((&am.omega - &omega).abs().max() < 1e-10, "α={a}");
            let sig = gamma0_sigma_closed_form(a, mx, mxx);
            assert!((&am.sigma - &sig).abs().max() < 1e-8 * sig.abs().max());
            for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
                assert!(am.sigma[(i, j)].abs() < 1e-8);
            }
        }
    }

    #[test]
    fn closed_form_holds_off_unit_scale() {
        let theta = ParamVector::new(vec![-1.0], 2.7, 0.0).unwrap();
        let data = single_covariate_data(50, 4, &theta);
        let d = DesignMoments::from_data(&data);
        let (mx, mxx) = (d.sum_x[0] / d.count, d.sum_xx[(0, 0)] / d.count);
        let (psi, omega) = psi_omega_from_moments(&theta, &d, 0.7).unwrap();
        let (cp, co) = gamma0_closed_form(0.7, 2.7, mx, mxx);
        assert!((&psi - &cp).abs().max() < 1e-10);
        assert!((&omega - &co).abs().max() < 1e-10);
    }

    #[test]
    fn sandwich_collapses_at_alpha_zero() {
        let theta = ParamVector::new(vec![1.0, 2.0], 1.0, 2.0).unwrap();
        let mut rng = RngStream::new(5, 5);
        let x = DMatrix::from_fn(40, 2, |_, j| if j == 0 { 1.0 } else { rng.normal(1.0, 1.0) });
        let data = RegressionData::new(x, DVector::zeros(40), vec!["1".into(), "x".into()]).unwrap();
        let am = sandwich(&theta, &data, 0.0).unwrap();
        let inv = am.psi.clone().try_inverse().unwrap();
        let rel = (&am.sigma - &inv).abs().max() / inv.abs().max();
        assert!(rel < 1e-6);
        assert!(linalg::is_psd(&am.sigma, 1e-8));
    }

    #[test]
    fn standard_error_arithmetic() {
        let am = AsymptoticMatrices {
            psi: DMatrix::identity(3, 3),
            omega: DMatrix::identity(3, 3),
            sigma: DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 9.0])),
            alpha: 0.0,
        };
        let se = standard_errors(&am, 100).unwrap();
        assert!((se[0] - 0.2).abs() < 1e-15 && (se[1] - 0.1).abs() < 1e-15 && (se[2] - 0.3).abs() < 1e-15);
        let se2 = standard_errors(&am, 200).unwrap();
        for (a, b) in se.iter().zip(&se2) {
            assert!((a / b - 2.0f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn are_gamma0_identities() {
        let law = CovariateLaw {
            n: 500,
            ..CovariateLaw::default()
        };
        let alphas = [0.0, 0.1, 0.5, 1.0];
        let t1 = are_table(SnParams::standard(0.0), &alphas, &law).unwrap();
        let t4 = are_table(SnParams::new(0.0, 4.0, 0.0).unwrap(), &alphas, &law).unwrap();
        assert_eq!(t1.beta[0], 100.0);
        for k in 0..alphas.len() {
            assert!((t1.beta[k] - t1.gamma[k]).abs() < 1e-6);
            assert!((t1.beta[k] - t4.beta[k]).abs() < 1e-6);
            assert!((t1.sigma[k] - t4.sigma[k]).abs() < 1e-6);
            assert!((t1.beta[k] - gamma0_are_beta(alphas[k])).abs() < 1e-6);
        }
        assert!(are_table(SnParams::standard(0.0), &[0.5], &law).is_err());
    }
}
