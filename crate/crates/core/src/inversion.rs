//! Numerical Laplace transform inversion.
//!
//! Two unrelated families are provided so that one can cross-check the other:
//! Gaver–Stehfest works on the real axis only, the Euler (Abate–Whitt) scheme
//! sums a Fourier series along a vertical contour.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEHFEST_ORDER: usize = 14;
pub const DEFAULT_EULER_TERMS: usize = 18;
/// Relative gap between orders `N` and `N + 2` above which Gaver–Stehfest is
/// reported as unstable.
pub const STEHFEST_STABILITY_TOL: f64 = 1e-6;
/// Agreement with the Euler scheme required to keep a Gaver–Stehfest value.
pub const CROSS_CHECK_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InversionMethod {
    GaverStehfest { order: usize },
    Euler { terms: usize },
}

impl Default for InversionMethod {
    fn default() -> Self {
        InversionMethod::GaverStehfest {
            order: DEFAULT_STEHFEST_ORDER,
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Stehfest weights `V_1..V_N` for even `N`.
pub fn stehfest_weights(n: usize) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "Stehfest order must be even and >= 2");
    let half = n / 2;
    (1..=n)
        .map(|k| {
            let mut s = 0.0;
            for j in (k + 1) / 2..=k.min(half) {
                s += (j as f64).powi(half as i32) * factorial(2 * j)
                    / (factorial(half - j)
                        * factorial(j)
                        * factorial(j - 1)
                        * factorial(k - j)
                        * factorial(2 * j - k));
            }
            if (k + half) % 2 == 0 {
                s
            } else {
                -s
            }
        })
        .collect()
}

pub fn gaver_stehfest<F: Fn(f64) -> f64>(transform: F, t: f64, order: usize) -> f64 {
    let ln2_t = std::f64::consts::LN_2 / t;
    stehfest_weights(order)
        .iter()
        .enumerate()
        .map(|(i, v)| v * transform((i + 1) as f64 * ln2_t))
        .sum::<f64>()
        * ln2_t
}

/// Gaver–Stehfest at `order`, checked against `order + 2`.
pub fn gaver_stehfest_checked<F: Fn(f64) -> f64>(transform: F, t: f64, order: usize, tol: f64) -> Result<f64> {
    let value = gaver_stehfest(&transform, t, order);
    let check = gaver_stehfest(&transform, t, order + 2);
    let rel = (value - check).abs() / value.abs().max(check.abs()).max(f64::MIN_POSITIVE);
    if !(rel <= tol) {
        return Err(Error::InversionUnstable { x: t, rel_diff: rel });
    }
    Ok(value)
}

fn euler_coefficients(m: usize) -> Vec<f64> {
    let mut xi = vec![0.0; 2 * m + 1];
    xi[0] = 0.5;
    for x in xi.iter_mut().take(m + 1).skip(1) {
        *x = 1.0;
    }
    let scale = 0.5f64.powi(m as i32);
    xi[2 * m] = scale;
    for k in 1..m {
        xi[2 * m - k] = xi[2 * m - k + 1] + scale * binomial(m, k);
    }
    xi.iter()
        .enumerate()
        .map(|(k, &x)| if k % 2 == 0 { x } else { -x })
        .collect()
}

/// Euler summation of the Bromwich integral with `2m + 1` complex evaluations.
pub fn euler<F: Fn(Complex64) -> Complex64>(transform: F, t: f64, m: usize) -> f64 {
    let a = m as f64 * std::f64::consts::LN_10 / 3.0;
    let eta = euler_coefficients(m);
    let sum: f64 = eta
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let beta = Complex64::new(a, std::f64::consts::PI * k as f64);
            e * transform(beta / t).re
        })
        .sum();
    10f64.powf(m as f64 / 3.0) / t * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stehfest_weights_sum_to_zero() {
        // a constant transform inverts to zero and 1/s inverts to one
        for n in [8, 12, 14, 16] {
            let w = stehfest_weights(n);
            let s: f64 = w.iter().sum();
            assert!(s.abs() < 1e-6 * w.iter().map(|v| v.abs()).fold(0.0, f64::max), "N={n} sum {s}");
            let inv_s: f64 = w.iter().enumerate().map(|(i, v)| v / (i + 1) as f64).sum();
            assert!((inv_s - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn stehfest_inverts_exponential() {
        for &t in &[0.1, 1.0, 3.0] {
            let f = gaver_stehfest(|s| 1.0 / (s + 1.0), t, 14);
            // real-axis inversion is only good to a few 1e-5 on decaying exponentials
            assert!((f - (-t as f64).exp()).abs() < 5e-5, "t={t}: {f}");
        }
        assert!(gaver_stehfest_checked(|s| 1.0 / (s * s), 2.0, 14, STEHFEST_STABILITY_TOL).is_ok());
    }

    #[test]
    fn stehfest_flags_oscillation() {
        // sin t has poles on the imaginary axis, which defeats real-axis inversion
        let r = gaver_stehfest_checked(|s| 1.0 / (s * s + 1.0), 20.0, 14, STEHFEST_STABILITY_TOL);
        assert!(matches!(r, Err(Error::InversionUnstable { .. })));
    }

    #[test]
    fn euler_inverts_standard_pairs() {
        for &t in &[0.1, 1.0, 5.0] {
            let f = euler(|s| 1.0 / (s + 1.0), t, DEFAULT_EULER_TERMS);
            assert!((f - (-t as f64).exp()).abs() < 1e-9, "t={t}: {f}");
            let g = euler(|s| 1.0 / (s * s + 1.0), t, DEFAULT_EULER_TERMS);
            assert!((g - t.sin()).abs() < 1e-8, "t={t}: {g}");
        }
    }
}
