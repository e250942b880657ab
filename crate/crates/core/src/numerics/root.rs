use crate::{Error, Result};

const MIN_BRACKET: f64 = 1e-13;
const MAX_ITER: usize = 300;

/// Bracketed root of a continuous monotone `g` on `[lo, hi]`.
///
/// Secant steps are taken inside the bracket and replaced by bisection whenever they
/// fall outside it or fail to halve the bracket. Returns once `|g(x)| ≤ tol` or the
/// bracket is narrower than `1e-13`.
pub fn find_root<G: FnMut(f64) -> f64>(mut g: G, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut ga = g(a);
    let mut gb = g(b);
    if ga.is_nan() || gb.is_nan() || ga * gb > 0.0 {
        return Err(Error::Bracketing {
            lo: a,
            hi: b,
            g_lo: ga,
            g_hi: gb,
        });
    }
    if ga.abs() <= tol {
        return Ok(a);
    }
    if gb.abs() <= tol {
        return Ok(b);
    }
    let mut use_secant = true;
    for _ in 0..MAX_ITER {
        let width = b - a;
        if width <= MIN_BRACKET {
            break;
        }
        let mid = 0.5 * (a + b);
        let mut x = mid;
        if use_secant && gb != ga {
            let s = b - gb * (b - a) / (gb - ga);
            if s > a && s < b {
                x = s;
            }
        }
        if x <= a || x >= b {
            break;
        }
        let gx = g(x);
        if gx.abs() <= tol {
            return Ok(x);
        }
        if (gx < 0.0) == (ga < 0.0) {
            a = x;
            ga = gx;
        } else {
            b = x;
            gb = gx;
        }
        // a secant step that leaves more than half the bracket forces bisection next
        use_secant = (b - a) <= 0.5 * width;
    }
    Ok(if ga.abs() < gb.abs() { a } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::norm_cdf;

    #[test]
    fn linear_root() {
        let x = find_root(|x| x - 2.0, 0.0, 5.0, 1e-14).unwrap();
        assert!((x - 2.0).abs() < 1e-13);
    }

    #[test]
    fn normal_quantiles() {
        let m = find_root(|x| norm_cdf(x) - 0.5, -5.0, 5.0, 1e-15).unwrap();
        assert!(m.abs() < 1e-13);
        // 40-digit value of Φ⁻¹(0.975)
        let q = find_root(|x| norm_cdf(x) - 0.975, 0.0, 5.0, 1e-16).unwrap();
        assert!((q - 1.959_963_984_540_054).abs() < 1e-12);
    }

    #[test]
    fn no_sign_change() {
        let err = find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Bracketing { .. }));
    }

    #[test]
    fn reversed_bracket_and_decreasing() {
        let x = find_root(|x| 3.0 - x, 10.0, -10.0, 1e-14).unwrap();
        assert!((x - 3.0).abs() < 1e-12);
    }
}
