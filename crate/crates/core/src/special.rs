//! Special functions and log-space helpers.

use crate::error::{Error, Result};

pub use statrs::function::gamma::ln_gamma;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const MAX_ITER: usize = 500;
const EPS: f64 = 1e-16;

/// `log(Σ exp(v))`, ignoring `-inf` entries. Empty or all `-inf` gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalized weights `exp(v_i) / Σ exp(v_j)`, computed relative to the largest entry.
/// All `-inf` gives all zeros.
pub fn normalize_log_weights<const N: usize>(values: [f64; N]) -> [f64; N] {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return [0.0; N];
    }
    let scaled = values.map(|v| (v - max).exp());
    let total: f64 = scaled.iter().sum();
    scaled.map(|v| v / total)
}

/// `log φ(x; mean, var)`.
#[inline]
pub fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    -LN_SQRT_2PI - 0.5 * var.ln() - z * z / (2.0 * var)
}

/// `log((2k-1)!!)`, with `(-1)!! = 1`.
pub fn ln_double_factorial_odd(k: u32) -> f64 {
    (1..=k).map(|i| ((2 * i - 1) as f64).ln()).sum()
}

/// `log(k!)`.
pub fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Regularized lower incomplete gamma `P(a, x) = γ(a, x) / Γ(a)`.
pub fn regularized_lower_gamma(a: f64, x: f64) -> Result<f64> {
    regularized_gamma_pair(a, x).map(|(p, _)| p)
}

/// `(P(a, x), Q(a, x))` computed so that whichever is small keeps full relative accuracy.
///
/// Series for `x < a + 1`, Lentz continued fraction for `Q` otherwise.
pub fn regularized_gamma_pair(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !(x >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!(
            "incomplete gamma needs a > 0, x >= 0 (got a = {a}, x = {x})"
        )));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x == f64::INFINITY {
        return Ok((1.0, 0.0));
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                let p = (log_prefactor + sum.ln()).exp().min(1.0);
                return Ok((p, 1.0 - p));
            }
        }
        Err(Error::Numerical(format!(
            "incomplete gamma series did not converge (a = {a}, x = {x})"
        )))
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                let q = (log_prefactor + h.ln()).exp().min(1.0);
                return Ok((1.0 - q, q));
            }
        }
        Err(Error::Numerical(format!(
            "incomplete gamma continued fraction did not converge (a = {a}, x = {x})"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma_lr;

    #[test]
    fn lower_gamma_identities() {
        assert_eq!(regularized_lower_gamma(2.5, 0.0).unwrap(), 0.0);
        // erf reference values to 20 digits
        let erf_table = [
            (0.01, 0.011_283_415_555_849_617),
            (0.3, 0.328_626_759_459_127_42),
            (1.0, 0.842_700_792_949_714_87),
            (2.0, 0.995_322_265_018_952_73),
            (7.5, 1.0),
            (30.0, 1.0),
        ];
        for (x, erf_x) in erf_table {
            let p = regularized_lower_gamma(1.0, x).unwrap();
            assert!((p - (1.0 - (-x).exp())).abs() < 1e-14, "{x}: {p}");
            let h = regularized_lower_gamma(0.5, x * x).unwrap();
            assert!((h - erf_x).abs() < 1e-14, "{x}: {h}");
        }
        let p = regularized_lower_gamma(0.5, 1.0).unwrap();
        assert!((p - 0.842_700_792_949_714_9).abs() < 1e-12);
    }

    #[test]
    fn lower_gamma_matches_reference() {
        for a in [0.05, 0.25, 0.5, 1.0, 2.0, 3.7, 10.0, 50.0] {
            for x in [1e-4, 0.1, 0.9, 1.5, 3.0, 9.0, 40.0, 80.0] {
                let ours = regularized_lower_gamma(a, x).unwrap();
                let reference = gamma_lr(a, x);
                assert!((ours - reference).abs() < 1e-12, "a={a} x={x}: {ours} vs {reference}");
            }
        }
    }

    #[test]
    fn upper_tail_keeps_relative_accuracy() {
        let (_, q) = regularized_gamma_pair(0.5, 400.0).unwrap();
        let expected = 5.395_865_611_607_901e-176; // erfc(20)
        assert!((q / expected - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lower_gamma_domain() {
        assert!(regularized_lower_gamma(0.0, 1.0).is_err());
        assert!(regularized_lower_gamma(1.0, -1.0).is_err());
        assert!(regularized_lower_gamma(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn lse_behaviour() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_sum_exp(&[f64::NEG_INFINITY, -3.0]) + 3.0).abs() < 1e-15);
    }

    #[test]
    fn normalized_weights() {
        assert_eq!(normalize_log_weights([f64::NEG_INFINITY; 3]), [0.0; 3]);
        let w = normalize_log_weights([0.0, 800.0, 799.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((w[1] / w[2] - std::f64::consts::E).abs() < 1e-13);
        assert_eq!(normalize_log_weights([f64::NEG_INFINITY, 2.0]), [0.0, 1.0]);
    }

    #[test]
    fn factorials() {
        assert_eq!(ln_double_factorial_odd(0), 0.0);
        assert!((ln_double_factorial_odd(3).exp() - 15.0).abs() < 1e-12);
        assert!((ln_factorial(5).exp() - 120.0).abs() < 1e-10);
    }
}
