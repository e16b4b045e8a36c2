//! `Phi_q`, the scale functions `W_q` and `Z_q(., theta)` of a spectrally
//! negative model.
//!
//! `W_q` is evaluated either as an exact sum of exponentials over the roots of
//! the numerator of `psi - q`, or by numerically inverting `1 / (psi - q)`.
//! `Z_q` always goes through quadrature against `W_q`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{self, InversionMethod, CROSS_CHECK_TOL, STEHFEST_STABILITY_TOL};
use crate::levy_model::LevyModel;
use crate::quadrature::{try_integrate, try_integrate_semi_infinite, QuadOptions};
use crate::roots::{newton_bisect, RootOptions};

/// Relative tolerance of every quadrature in this module.
pub const QUAD_REL_TOL: f64 = 1e-10;
/// Semi-infinite integrals stop once a panel adds less than this fraction.
pub const TAIL_CUTOFF: f64 = 1e-16;
/// `Z` switches to the tail form once `(theta - Phi_q) * u` exceeds this.
pub const TAIL_SWITCH: f64 = 1.0;

fn require_sn(model: &LevyModel) -> Result<()> {
    if model.is_spectrally_negative() {
        Ok(())
    } else {
        Err(Error::NotSpectrallyNegative)
    }
}

fn check_q(q: f64) -> Result<()> {
    if q >= 0.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("q must be non-negative and finite, got {q}")))
    }
}

/// Minimiser of `psi` on `[0, inf)`.
fn argmin_psi(model: &LevyModel) -> Result<f64> {
    if model.psi_d1(0.0) >= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while model.psi_d1(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::RootNotConverged { lo: 0.0, hi, iterations: 0 });
        }
    }
    newton_bisect(
        |t| (model.psi_d1(t), model.psi_d2(t)),
        0.0,
        hi,
        RootOptions {
            f_tol: 0.0,
            ..Default::default()
        },
    )
}

/// Largest root of `psi(theta) = q`.
pub fn phi(model: &LevyModel, q: f64) -> Result<f64> {
    require_sn(model)?;
    check_q(q)?;
    let lo = argmin_psi(model)?;
    let f_tol = 1e-12 * q.max(1.0);
    let gap = model.psi(lo) - q;
    if gap >= -f_tol {
        // q equals the minimum of psi; the minimiser is the only root
        return Ok(lo);
    }
    let mut hi = lo.max(1.0);
    while model.psi(hi) <= q {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::RootNotConverged { lo, hi, iterations: 0 });
        }
    }
    let mut root = newton_bisect(
        |t| (model.psi(t) - q, model.psi_d1(t)),
        lo,
        hi,
        RootOptions {
            f_tol,
            ..Default::default()
        },
    )?;
    // the stopping rule is absolute, so tiny q would only get a few digits
    for _ in 0..3 {
        let step = (model.psi(root) - q) / model.psi_d1(root);
        if !step.is_finite() || root - step < lo || step == 0.0 {
            break;
        }
        root -= step;
    }
    Ok(root)
}

/// `d Phi_q / dq = 1 / psi'(Phi_q)`.
pub fn phi_derivative(model: &LevyModel, q: f64) -> Result<f64> {
    let root = phi(model, q)?;
    let slope = model.psi_d1(root);
    if !(slope > 0.0) {
        return Err(Error::Singular(format!(
            "psi'(Phi_{q}) = {slope}; Phi is not differentiable here"
        )));
    }
    Ok(1.0 / slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WMethod {
    PartialFraction,
    /// With `euler_fallback`, every Gaver–Stehfest value is checked against
    /// the Euler scheme, whose value replaces it on disagreement or when the
    /// order check fails.
    LaplaceInversion {
        inversion: InversionMethod,
        euler_fallback: bool,
    },
}

impl WMethod {
    pub fn inversion(inversion: InversionMethod) -> Self {
        WMethod::LaplaceInversion {
            inversion,
            euler_fallback: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZForm {
    /// Tail form when it is valid and the integral form would cancel badly.
    Auto,
    /// `e^{theta u}(1 - psi_q(theta) int_0^u e^{-theta y} W_q(y) dy)`.
    Integral,
    /// `psi_q(theta) int_0^inf e^{-theta y} W_q(u + y) dy`, needs `theta > Phi_q`.
    Tail,
}

#[derive(Debug, Clone)]
enum Evaluator {
    /// `(rho_j, 1 / psi'(rho_j))` over the zeros of `psi - q`.
    Exponentials(Vec<(Complex64, Complex64)>),
    Inversion(InversionMethod, bool),
}

/// One model and one killing rate `q`, with `Phi_q` and the `W_q` evaluator
/// resolved up front. Immutable, hence shareable across threads.
#[derive(Debug, Clone)]
pub struct ScaleContext {
    model: LevyModel,
    q: f64,
    phi_q: f64,
    w_zero: f64,
    evaluator: Evaluator,
}

fn partial_fraction_terms(model: &LevyModel, q: f64) -> Option<Vec<(Complex64, Complex64)>> {
    let (num, den) = model.psi_rational(q);
    let dnum = num.derivative();
    let mut roots = num.roots();
    for r in roots.iter_mut() {
        for _ in 0..8 {
            let d = dnum.eval_complex(*r);
            if d.norm() == 0.0 {
                break;
            }
            let step = num.eval_complex(*r) / d;
            *r -= step;
            if step.norm() <= 1e-16 * r.norm().max(1.0) {
                break;
            }
        }
    }
    let scale = roots.iter().map(|r| r.norm()).fold(1.0, f64::max);
    for i in 0..roots.len() {
        for j in 0..i {
            if (roots[i] - roots[j]).norm() < 1e-6 * scale {
                return None;
            }
        }
    }
    let mut terms: Vec<(Complex64, Complex64)> = roots
        .into_iter()
        .map(|r| (r, den.eval_complex(r) / dnum.eval_complex(r)))
        .collect();
    if terms.iter().any(|(r, c)| !r.is_finite() || !c.is_finite()) {
        return None;
    }
    terms.sort_by(|a, b| b.0.re.total_cmp(&a.0.re).then(a.0.im.total_cmp(&b.0.im)));
    Some(terms)
}

impl ScaleContext {
    /// Partial fractions when the roots are well separated, inversion otherwise.
    pub fn new(model: &LevyModel, q: f64) -> Result<Self> {
        match Self::with_method(model, q, WMethod::PartialFraction) {
            Err(Error::Unsupported(_)) => Self::with_method(
                model,
                q,
                WMethod::LaplaceInversion {
                    inversion: InversionMethod::default(),
                    euler_fallback: true,
                },
            ),
            other => other,
        }
    }

    pub fn with_method(model: &LevyModel, q: f64, method: WMethod) -> Result<Self> {
        require_sn(model)?;
        check_q(q)?;
        let phi_q = phi(model, q)?;
        let sigma = model.sigma();
        let w_zero = if sigma > 0.0 { 0.0 } else { 1.0 / model.drift() };
        let evaluator = match method {
            WMethod::PartialFraction => match partial_fraction_terms(model, q) {
                Some(t) => Evaluator::Exponentials(t),
                None => {
                    return Err(Error::Unsupported(
                        "partial fractions need distinct roots of psi - q".into(),
                    ))
                }
            },
            WMethod::LaplaceInversion {
                inversion,
                euler_fallback,
            } => {
                if let InversionMethod::GaverStehfest { order } = inversion {
                    if order < 2 || order % 2 == 1 {
                        return Err(Error::invalid("Gaver-Stehfest order must be even"));
                    }
                }
                Evaluator::Inversion(inversion, euler_fallback)
            }
        };
        Ok(ScaleContext {
            model: model.clone(),
            q,
            phi_q,
            w_zero,
            evaluator,
        })
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn phi_q(&self) -> f64 {
        self.phi_q
    }

    pub fn method(&self) -> WMethod {
        match self.evaluator {
            Evaluator::Exponentials(_) => WMethod::PartialFraction,
            Evaluator::Inversion(inversion, euler_fallback) => WMethod::LaplaceInversion {
                inversion,
                euler_fallback,
            },
        }
    }

    /// `psi(theta) - q`.
    pub fn psi_q(&self, theta: f64) -> f64 {
        self.model.psi(theta) - self.q
    }

    /// `W_q(0)`: zero with a Brownian part, `1 / drift` otherwise.
    pub fn w_zero(&self) -> f64 {
        self.w_zero
    }

    pub fn w(&self, x: f64) -> Result<f64> {
        self.w_scaled(x, 0.0)
    }

    /// `e^{-s x} W_q(x)`, evaluated without forming `W_q(x)` itself.
    pub fn w_scaled(&self, x: f64, s: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        if x == 0.0 {
            return Ok(self.w_zero);
        }
        match &self.evaluator {
            Evaluator::Exponentials(terms) => Ok(terms
                .iter()
                .map(|(r, c)| c * ((r - s) * x).exp())
                .sum::<Complex64>()
                .re),
            Evaluator::Inversion(method, fallback) => {
                let shift = self.phi_q;
                let euler = |terms| {
                    inversion::euler(|p| 1.0 / (self.model.psi_complex(p + shift) - self.q), x, terms)
                };
                let g = match *method {
                    InversionMethod::GaverStehfest { order } => {
                        let gs = inversion::gaver_stehfest_checked(
                            |p| 1.0 / self.psi_q(p + shift),
                            x,
                            order,
                            STEHFEST_STABILITY_TOL,
                        );
                        if *fallback {
                            // the order check alone does not certify 1e-6 in f64
                            let e = euler(inversion::DEFAULT_EULER_TERMS);
                            match gs {
                                Ok(g) if (g - e).abs() <= CROSS_CHECK_TOL * e.abs() => g,
                                Ok(_) | Err(Error::InversionUnstable { .. }) => e,
                                Err(other) => return Err(other),
                            }
                        } else {
                            gs?
                        }
                    }
                    InversionMethod::Euler { terms } => euler(terms),
                };
                Ok(((shift - s) * x).exp() * g)
            }
        }
    }

    fn tail_scale(&self, theta: f64) -> f64 {
        (1.0 / (theta - self.phi_q)).clamp(1e-3, 1e6)
    }

    /// `int_0^u y^k e^{-theta y} W_q(y) dy` for `k` in {0, 1}.
    fn head_integral(&self, u: f64, theta: f64, k: i32) -> Result<f64> {
        Ok(try_integrate(
            |y| Ok(y.powi(k) * self.w_scaled(y, theta)?),
            0.0,
            u,
            QuadOptions::relative(QUAD_REL_TOL),
        )?
        .value)
    }

    /// `e^{-Phi_q u} int_0^inf y^k e^{-theta y} W_q(u + y) dy`, `theta > Phi_q`.
    fn tail_integral(&self, u: f64, theta: f64, k: i32) -> Result<f64> {
        let phi = self.phi_q;
        Ok(try_integrate_semi_infinite(
            |y| Ok(y.powi(k) * self.w_scaled(u + y, phi)? * (-(theta - phi) * y).exp()),
            0.0,
            self.tail_scale(theta),
            QuadOptions::relative(QUAD_REL_TOL),
            TAIL_CUTOFF,
        )?
        .value)
    }

    fn check_z_args(&self, theta: f64) -> Result<()> {
        if theta >= 0.0 && theta.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("theta must be non-negative and finite, got {theta}")))
        }
    }

    fn resolve(&self, u: f64, theta: f64, form: ZForm) -> Result<ZForm> {
        match form {
            ZForm::Auto => {
                if theta > self.phi_q && (theta - self.phi_q) * u > TAIL_SWITCH {
                    Ok(ZForm::Tail)
                } else {
                    Ok(ZForm::Integral)
                }
            }
            ZForm::Tail if !(theta > self.phi_q) => Err(Error::invalid(format!(
                "tail form of Z needs theta > Phi_q = {}, got {theta}",
                self.phi_q
            ))),
            f => Ok(f),
        }
    }

    pub fn z(&self, u: f64, theta: f64) -> Result<f64> {
        self.z_with(u, theta, ZForm::Auto)
    }

    /// `Z_q(u, theta)`; for `u < 0` this is `e^{theta u}`.
    pub fn z_with(&self, u: f64, theta: f64, form: ZForm) -> Result<f64> {
        self.check_z_args(theta)?;
        self.z_extended(u, theta, form)
    }

    /// [`Self::z_with`] without the sign check on `theta`, for probing limits
    /// from both sides.
    pub(crate) fn z_extended(&self, u: f64, theta: f64, form: ZForm) -> Result<f64> {
        if !theta.is_finite() {
            return Err(Error::invalid("theta must be finite"));
        }
        if u <= 0.0 {
            return Ok((theta * u).exp());
        }
        match self.resolve(u, theta, form)? {
            ZForm::Tail => Ok(self.psi_q(theta) * (self.phi_q * u).exp() * self.tail_integral(u, theta, 0)?),
            _ => {
                let i0 = self.head_integral(u, theta, 0)?;
                Ok((theta * u).exp() * (1.0 - self.psi_q(theta) * i0))
            }
        }
    }

    /// `d/dtheta Z_q(u, theta)`.
    pub fn z_theta_derivative(&self, u: f64, theta: f64) -> Result<f64> {
        self.z_theta_derivative_with(u, theta, ZForm::Auto)
    }

    pub fn z_theta_derivative_with(&self, u: f64, theta: f64, form: ZForm) -> Result<f64> {
        self.check_z_args(theta)?;
        if u <= 0.0 {
            return Ok(u * (theta * u).exp());
        }
        let d1 = self.model.psi_d1(theta);
        match self.resolve(u, theta, form)? {
            ZForm::Tail => {
                let j0 = self.tail_integral(u, theta, 0)?;
                let j1 = self.tail_integral(u, theta, 1)?;
                Ok((self.phi_q * u).exp() * (d1 * j0 - self.psi_q(theta) * j1))
            }
            _ => {
                let i0 = self.head_integral(u, theta, 0)?;
                let i1 = self.head_integral(u, theta, 1)?;
                let e = (theta * u).exp();
                let z = e * (1.0 - self.psi_q(theta) * i0);
                Ok(u * z - e * (d1 * i0 - self.psi_q(theta) * i1))
            }
        }
    }

    /// `Z_q(u, Phi_{lambda + q})`, the recurring term of the Poisson-observed
    /// formulas.
    pub fn z_at_phi(&self, lambda: f64, u: f64) -> Result<f64> {
        let theta = phi(&self.model, lambda + self.q)?;
        self.z(u, theta)
    }
}

pub fn scale_w(ctx: &ScaleContext, x: f64) -> Result<f64> {
    ctx.w(x)
}

pub fn scale_z(ctx: &ScaleContext, u: f64, theta: f64) -> Result<f64> {
    ctx.z(u, theta)
}

pub fn z_at_phi(ctx: &ScaleContext, lambda: f64, u: f64) -> Result<f64> {
    ctx.z_at_phi(lambda, u)
}
