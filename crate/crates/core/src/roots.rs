//! Safeguarded Newton iteration on a sign-changing bracket.

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Converged when `|f(x)| <= f_tol`.
    pub f_tol: f64,
    /// Also accept once the bracket is this narrow (relative to `max(1, |x|)`).
    pub x_rel_tol: f64,
    pub max_iterations: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            f_tol: 1e-12,
            x_rel_tol: 4.0 * f64::EPSILON,
            max_iterations: MAX_ITERATIONS,
        }
    }
}

/// Finds a root of `f` in `[lo, hi]` where `f(lo)` and `f(hi)` differ in sign.
/// `fdf` returns `(f(x), f'(x))`. Newton steps that leave the bracket or fail
/// to halve it are replaced by bisection.
pub fn newton_bisect<F>(mut fdf: F, mut lo: f64, mut hi: f64, opts: RootOptions) -> Result<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut flo, _) = fdf(lo);
    let (fhi, _) = fdf(hi);
    if flo.abs() <= opts.f_tol {
        return Ok(lo);
    }
    if fhi.abs() <= opts.f_tol {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::invalid(format!(
            "root not bracketed: f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    let mut dx_old = hi - lo;
    for _ in 0..opts.max_iterations {
        let (fx, dfx) = fdf(x);
        if fx.abs() <= opts.f_tol {
            return Ok(x);
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        if hi - lo <= opts.x_rel_tol * x.abs().max(1.0) {
            return Ok(x);
        }
        let newton = x - fx / dfx;
        let usable = newton > lo && newton < hi && (2.0 * fx).abs() <= (dx_old * dfx).abs();
        if usable {
            dx_old = (x - newton).abs();
            x = newton;
        } else {
            dx_old = 0.5 * (hi - lo);
            x = lo + dx_old;
        }
    }
    Err(Error::RootNotConverged {
        lo,
        hi,
        iterations: opts.max_iterations,
    })
}
