use core::f64::consts::PI;

#[allow(unused_imports)] // inherent on hosted targets
use num_traits::Float;

use super::special::{norm_cdf, norm_sf};
use crate::{Error, Result};

const ABS_TOL: f64 = 1e-15;
const MAX_DEPTH: u32 = 40;

/// Owen's T function `T(h, a) = (1/2π) ∫₀^a exp(-h²(1+x²)/2) / (1+x²) dx`.
///
/// `|a| ≤ 1` is integrated directly by adaptive Gauss–Legendre; `|a| > 1` is reduced
/// through `T(h,a) = ½Φ(h) + ½Φ(ah) − Φ(h)Φ(ah) − T(ah, 1/a)` (for `h ≥ 0`), written
/// with upper tails to avoid cancellation when `h` is large. `a = 1` uses the exact
/// `T(h,1) = ½Φ(h)(1−Φ(h))`.
pub fn owens_t(h: f64, a: f64) -> Result<f64> {
    if !h.is_finite() || !a.is_finite() {
        return Err(Error::domain("owens_t requires finite h and a"));
    }
    let sign = if a < 0.0 { -1.0 } else { 1.0 };
    let h = h.abs();
    let a = a.abs();
    if a == 0.0 {
        return Ok(0.0);
    }
    let t = if a == 1.0 {
        0.5 * norm_cdf(h) * norm_sf(h)
    } else if a < 1.0 {
        t_direct(h, a)
    } else {
        let ah = a * h;
        let (ph, qh) = (norm_cdf(h), norm_sf(h));
        let (pah, qah) = (norm_cdf(ah), norm_sf(ah));
        0.5 * (ph * qah + pah * qh) - t_direct(ah, 1.0 / a)
    };
    Ok(sign * t)
}

fn t_direct(h: f64, a: f64) -> f64 {
    let hs = -0.5 * h * h;
    let integrand = |x: f64| {
        let one_x2 = 1.0 + x * x;
        (hs * one_x2).exp() / one_x2
    };
    let whole = gl_panel(&integrand, 0.0, a);
    adaptive(&integrand, 0.0, a, whole, ABS_TOL * 2.0 * PI, 0) / (2.0 * PI)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (lo + hi);
    let left = gl_panel(f, lo, mid);
    let right = gl_panel(f, mid, hi);
    let sum = left + right;
    if (sum - whole).abs() <= tol || depth >= MAX_DEPTH {
        return sum;
    }
    adaptive(f, lo, mid, left, 0.5 * tol, depth + 1) + adaptive(f, mid, hi, right, 0.5 * tol, depth + 1)
}

// 10-point Gauss–Legendre on [lo, hi].
fn gl_panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    const X: [f64; 5] = [
        0.14887433898163122,
        0.4333953941292472,
        0.6794095682990244,
        0.8650633666889845,
        0.9739065285171717,
    ];
    const W: [f64; 5] = [
        0.29552422471475287,
        0.26926671930999635,
        0.21908636251598204,
        0.1494513491505806,
        0.06667134430868814,
    ];
    let c = 0.5 * (lo + hi);
    let r = 0.5 * (hi - lo);
    let mut s = 0.0;
    for k in 0..5 {
        s += W[k] * (f(c - r * X[k]) + f(c + r * X[k]));
    }
    s * r
}
