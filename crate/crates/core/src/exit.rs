//! Closed-form exit functionals for spectrally negative models.
//!
//! Every formula is a combination of `Phi`, `W_alpha` and `Z_alpha`. Removable
//! singularities are resolved by their analytic limits inside a radius of
//! [`SINGULARITY_RADIUS`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identity::{IdentityId, IdentityParams};
use crate::levy_model::LevyModel;
use crate::quadrature::{try_integrate_semi_infinite, QuadOptions};
use crate::scale::{phi, ScaleContext, ZForm, QUAD_REL_TOL};

pub const SINGULARITY_RADIUS: f64 = 1e-7;
/// Tail cutoff for expectations over `U`.
pub const COMPOSE_TAIL_CUTOFF: f64 = 1e-14;

/// Upper barrier; `Infinite` drops every barrier term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub enum Barrier {
    Finite(f64),
    Infinite,
}

impl From<f64> for Barrier {
    fn from(a: f64) -> Self {
        if a == f64::INFINITY {
            Barrier::Infinite
        } else {
            Barrier::Finite(a)
        }
    }
}

impl From<Barrier> for f64 {
    fn from(b: Barrier) -> f64 {
        b.level()
    }
}

impl Barrier {
    pub fn level(self) -> f64 {
        match self {
            Barrier::Finite(a) => a,
            Barrier::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Barrier::Finite(_))
    }
}

/// How a boundary crossing is detected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    Continuous,
    /// At the first observation epoch beyond the boundary.
    Poisson,
    /// Parisian rule with an Erlang(k, lambda) delay: the first epoch that
    /// closes `k - 1` consecutive inter-observation intervals spent entirely
    /// beyond the boundary. `k = 2` is the interval rule.
    ErlangParisian(u32),
    /// The first epoch closing a run of `k + 1` consecutive observations
    /// beyond the boundary.
    ObservedRun(u32),
}

impl Detection {
    /// Collapses the aliases `ErlangParisian(0)`, `ErlangParisian(1)` and
    /// `ObservedRun(0)`.
    pub fn normalized(self) -> Detection {
        match self {
            Detection::ErlangParisian(0) => Detection::Continuous,
            Detection::ErlangParisian(1) | Detection::ObservedRun(0) => Detection::Poisson,
            d => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Lower,
    Upper,
}

/// Reflection of the process at the upper barrier `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reflection {
    /// Regulator `(running sup - a)^+`.
    Continuous,
    /// Regulator `(max over observation epochs - a)^+`.
    Poisson,
}

/// A discounted exit functional.
///
/// For `Target::Lower` this is `E_u[e^{-alpha T + beta Y_T - gamma R_T}; T < T'']`,
/// for `Target::Upper` it is `E_u[e^{-alpha T - beta (Y_T - a)}; T < T'']`, where
/// `T''` is the passage at the other boundary (if any) and `Y = X - delta R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitQuery {
    pub u: f64,
    pub a: Barrier,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    /// `None` removes the lower boundary.
    pub lower_mode: Option<Detection>,
    /// `None` removes the upper boundary; ignored when `a` is infinite.
    pub upper_mode: Option<Detection>,
    pub target: Target,
    pub reflection: Option<Reflection>,
    /// Counts only passages up to the epoch `T_i`.
    pub horizon: Option<u32>,
}

impl ExitQuery {
    pub fn ruin(u: f64, lambda: f64, mode: Detection) -> Self {
        ExitQuery {
            u,
            a: Barrier::Infinite,
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            delta: 1.0,
            lambda,
            lower_mode: Some(mode),
            upper_mode: None,
            target: Target::Lower,
            reflection: None,
            horizon: None,
        }
    }

    pub fn up_crossing(u: f64, a: f64, lambda: f64, mode: Detection) -> Self {
        ExitQuery {
            a: Barrier::Finite(a),
            lower_mode: None,
            upper_mode: Some(mode),
            target: Target::Upper,
            ..ExitQuery::ruin(u, lambda, mode)
        }
    }

    pub fn with_discount(mut self, alpha: f64, beta: f64) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn lower(&self) -> Option<Detection> {
        self.lower_mode.map(Detection::normalized)
    }

    /// Upper detection, present only with a finite barrier and no reflection.
    pub fn upper(&self) -> Option<Detection> {
        if self.a.is_finite() && self.reflection.is_none() {
            self.upper_mode.map(Detection::normalized)
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.u.is_finite() {
            return Err(Error::invalid("u must be finite"));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::invalid(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        check_lambda(self.lambda)?;
        if let Barrier::Finite(a) = self.a {
            if !a.is_finite() {
                return Err(Error::invalid("barrier must be a number or +inf"));
            }
        }
        match self.target {
            Target::Lower if self.lower().is_none() => {
                return Err(Error::InconsistentQuery("lower target without a lower boundary".into()))
            }
            Target::Upper if self.upper().is_none() => {
                return Err(Error::InconsistentQuery(
                    "upper target needs a finite barrier with an upper detection mode".into(),
                ))
            }
            _ => {}
        }
        if let Some(r) = self.reflection {
            if self.target == Target::Upper {
                return Err(Error::InconsistentQuery("a reflected process has no upper exit".into()));
            }
            match (r, self.lower()) {
                (Reflection::Continuous, Some(Detection::Continuous)) => {
                    return Err(Error::InconsistentQuery(
                        "continuous reflection pairs with a discretely observed lower boundary".into(),
                    ))
                }
                (Reflection::Poisson, Some(d)) if d != Detection::Continuous => {
                    return Err(Error::InconsistentQuery(
                        "Poisson reflection pairs with a continuously observed lower boundary".into(),
                    ))
                }
                _ => {}
            }
        }
        let sided = |d: Detection| matches!(d, Detection::Continuous);
        if let (Some(l), Some(up)) = (self.lower(), self.upper()) {
            if sided(l) && sided(up) {
                return Err(Error::InconsistentQuery(
                    "two continuously observed boundaries are not supported".into(),
                ));
            }
        }
        for d in [self.lower(), self.upper()].into_iter().flatten() {
            if let Detection::ErlangParisian(k) = d {
                if k > 64 {
                    return Err(Error::invalid("Parisian order above 64 is not supported"));
                }
            }
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("lambda must be positive and finite, got {lambda}")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be non-negative and finite, got {v}")))
    }
}

/// Everything that depends on `(model, lambda, alpha)` only.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    pub ctx: ScaleContext,
    pub lambda: f64,
    pub alpha: f64,
    /// `Phi_lambda`.
    pub phi_l: f64,
    /// `Phi_{lambda + alpha}`.
    pub mu: f64,
    /// `Phi_alpha`.
    pub phi_a: f64,
}

impl Kernel {
    pub fn new(model: &LevyModel, lambda: f64, alpha: f64) -> Result<Self> {
        check_lambda(lambda)?;
        check_nonneg("alpha", alpha)?;
        let ctx = ScaleContext::new(model, alpha)?;
        Ok(Kernel {
            phi_l: phi(model, lambda)?,
            mu: phi(model, lambda + alpha)?,
            phi_a: ctx.phi_q(),
            ctx,
            lambda,
            alpha,
        })
    }

    fn model(&self) -> &LevyModel {
        self.ctx.model()
    }

    fn psi_a(&self, theta: f64) -> f64 {
        self.ctx.psi_q(theta)
    }

    fn dpsi(&self, theta: f64) -> f64 {
        self.model().psi_d1(theta)
    }

    pub fn wh_down_generic(&self, beta: f64) -> f64 {
        self.lambda / self.phi_l * (self.mu - beta) / (self.lambda - self.psi_a(beta))
    }

    pub fn wh_down(&self, beta: f64) -> f64 {
        if (beta - self.mu).abs() < SINGULARITY_RADIUS {
            self.lambda / self.phi_l / self.dpsi(self.mu)
        } else {
            self.wh_down_generic(beta)
        }
    }

    /// `psi_alpha(beta) / (beta - Phi_alpha)`, continuous through `Phi_alpha`.
    fn slope_ratio(&self, beta: f64) -> f64 {
        if (beta - self.phi_a).abs() < SINGULARITY_RADIUS {
            self.dpsi(self.phi_a)
        } else {
            self.psi_a(beta) / (beta - self.phi_a)
        }
    }

    #[cfg(test)]
    fn down_exit_continuous_generic(&self, u: f64, beta: f64) -> Result<f64> {
        if u < 0.0 {
            return Ok((beta * u).exp());
        }
        let zb = self.ctx.z_extended(u, beta, ZForm::Auto)?;
        Ok(zb - self.ctx.w(u)? * self.psi_a(beta) / (beta - self.phi_a))
    }

    pub fn down_exit_continuous(&self, u: f64, beta: f64) -> Result<f64> {
        if u < 0.0 {
            return Ok((beta * u).exp());
        }
        Ok(self.ctx.z(u, beta)? - self.ctx.w(u)? * self.slope_ratio(beta))
    }

    #[cfg(test)]
    fn down_exit_poisson_generic(&self, u: f64, beta: f64) -> Result<f64> {
        if u < 0.0 {
            return Ok((beta * u).exp());
        }
        let pb = self.psi_a(beta);
        let zb = self.ctx.z_extended(u, beta, ZForm::Auto)?;
        let zm = self.ctx.z(u, self.mu)?;
        Ok(self.lambda / (self.lambda - pb)
            * (zb - zm * pb / self.lambda * (self.mu - self.phi_a) / (beta - self.phi_a)))
    }

    pub fn down_exit_poisson(&self, u: f64, beta: f64) -> Result<f64> {
        if u < 0.0 {
            return Ok((beta * u).exp());
        }
        let zm = self.ctx.z(u, self.mu)?;
        if (beta - self.mu).abs() < SINGULARITY_RADIUS {
            // both the prefactor and the bracket vanish; l'Hopital in beta
            let dz = self.ctx.z_theta_derivative(u, self.mu)?;
            let d1 = self.dpsi(self.mu);
            let bracket_slope = dz - zm * (d1 / self.lambda - 1.0 / (self.mu - self.phi_a));
            return Ok(self.lambda * bracket_slope / -d1);
        }
        let pb = self.psi_a(beta);
        let zb = self.ctx.z(u, beta)?;
        Ok(self.lambda / (self.lambda - pb)
            * (zb - zm / self.lambda * (self.mu - self.phi_a) * self.slope_ratio(beta)))
    }

    pub fn up_crossing_poisson(&self, u: f64, a: Barrier, beta: f64) -> f64 {
        match a {
            Barrier::Infinite => 0.0,
            Barrier::Finite(a) if u > a => (-beta * (u - a)).exp(),
            Barrier::Finite(a) => {
                (-self.phi_a * (a - u)).exp() * (self.mu - self.phi_a) / (self.mu + beta)
            }
        }
    }

    pub fn lemma_first(&self, u: f64, form: ZForm) -> Result<f64> {
        Ok(self.phi_l / self.lambda * self.ctx.z_with(u, self.mu, form)?)
    }

    pub fn lemma_first_lhs(&self, u: f64) -> Result<f64> {
        let shift = self.phi_a;
        let decay = self.mu - shift;
        let scale = (shift * u).exp() * self.phi_l;
        let r = try_integrate_semi_infinite(
            |y| Ok(self.ctx.w_scaled(u + y, shift)? * (-decay * y).exp()),
            0.0,
            1.0 / decay,
            QuadOptions::relative(QUAD_REL_TOL),
            COMPOSE_TAIL_CUTOFF,
        )?;
        Ok(scale * r.value)
    }

    pub fn lemma_second_generic(&self, u: f64, beta: f64, form: ZForm) -> Result<f64> {
        let zb = self.ctx.z_with(u, beta, form)?;
        let zm = self.ctx.z_with(u, self.mu, form)?;
        Ok(self.phi_l / (self.mu - beta) * (zb - self.psi_a(beta) / self.lambda * zm))
    }

    pub fn lemma_second(&self, u: f64, beta: f64, form: ZForm) -> Result<f64> {
        if (beta - self.mu).abs() < SINGULARITY_RADIUS {
            let zm = self.ctx.z_with(u, self.mu, form)?;
            let dz = self.ctx.z_theta_derivative_with(u, self.mu, form)?;
            return Ok(self.phi_l * (self.dpsi(self.mu) * zm / self.lambda - dz));
        }
        self.lemma_second_generic(u, beta, form)
    }

    /// `E[e^{-alpha T^U} f(u + U)]` by quadrature against the density
    /// `Phi_lambda e^{-Phi_{lambda+alpha} y}` of `U` under the discount.
    pub fn expect_over_up<F: FnMut(f64) -> Result<f64>>(&self, u: f64, mut f: F) -> Result<f64> {
        let r = try_integrate_semi_infinite(
            |y| Ok(f(u + y)? * (-self.mu * y).exp()),
            0.0,
            1.0 / self.mu,
            QuadOptions::relative(QUAD_REL_TOL),
            COMPOSE_TAIL_CUTOFF,
        )?;
        Ok(self.phi_l * r.value)
    }

    pub fn lemma_second_lhs(&self, u: f64, beta: f64) -> Result<f64> {
        let phi_a = self.phi_a;
        let decay = self.mu - phi_a;
        // integrate e^{-Phi_alpha y} Z(u + y, beta) against e^{-(mu - Phi_alpha) y} for range
        let r = try_integrate_semi_infinite(
            |y| Ok(self.ctx.z(u + y, beta)? * (-self.mu * y).exp()),
            0.0,
            1.0 / decay,
            QuadOptions::relative(QUAD_REL_TOL),
            COMPOSE_TAIL_CUTOFF,
        )?;
        Ok(self.phi_l * r.value)
    }

    pub fn parisian_erlang2_zero_generic(&self) -> f64 {
        let (l, a, mu) = (self.lambda, self.alpha, self.mu);
        l / (l + a) - a / ((l + a) * (l + a)) * ((mu - self.phi_a) / self.phi_a) * mu * self.dpsi(mu)
    }

    pub fn parisian_erlang2_zero(&self) -> f64 {
        if self.alpha < SINGULARITY_RADIUS {
            let drift = self.dpsi(0.0);
            if drift > 0.0 && self.phi_a < SINGULARITY_RADIUS {
                // alpha / Phi_alpha -> psi'(0)
                let (l, pl) = (self.lambda, self.phi_l);
                return 1.0 - drift * pl * pl * self.dpsi(pl) / (l * l);
            }
            if self.alpha == 0.0 {
                return 1.0;
            }
        }
        self.parisian_erlang2_zero_generic()
    }
}

/// The two Wiener–Hopf factors at observation rate `lambda`.
#[derive(Debug, Clone)]
pub struct WienerHopfFactors {
    model: LevyModel,
    lambda: f64,
}

impl WienerHopfFactors {
    pub fn new(model: &LevyModel, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !model.is_spectrally_negative() {
            return Err(Error::NotSpectrallyNegative);
        }
        Ok(WienerHopfFactors {
            model: model.clone(),
            lambda,
        })
    }

    /// `E e^{-alpha T^U - beta U}`.
    pub fn up(&self, alpha: f64, beta: f64) -> Result<f64> {
        wh_up(&self.model, self.lambda, alpha, beta)
    }

    /// `E e^{-alpha T^D + beta D}`.
    pub fn down(&self, alpha: f64, beta: f64) -> Result<f64> {
        wh_down(&self.model, self.lambda, alpha, beta)
    }
}

pub fn wh_up(model: &LevyModel, lambda: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_nonneg("beta", beta)?;
    check_lambda(lambda)?;
    check_nonneg("alpha", alpha)?;
    Ok(phi(model, lambda)? / (phi(model, lambda + alpha)? + beta))
}

pub fn wh_down(model: &LevyModel, lambda: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_nonneg("beta", beta)?;
    Ok(Kernel::new(model, lambda, alpha)?.wh_down(beta))
}

/// `E_u e^{-alpha tau_a^+} = e^{-Phi_alpha (a - u)}`; zero for an infinite barrier.
pub fn up_crossing_continuous(model: &LevyModel, u: f64, a: Barrier, alpha: f64) -> Result<f64> {
    check_nonneg("alpha", alpha)?;
    let p = phi(model, alpha)?;
    Ok(match a {
        Barrier::Infinite => 0.0,
        Barrier::Finite(a) if u >= a => 1.0,
        Barrier::Finite(a) => (-p * (a - u)).exp(),
    })
}

/// `E_u[e^{-alpha tau_0^- + beta X}; tau_0^- < inf]`.
pub fn down_exit_continuous(model: &LevyModel, u: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_nonneg("alpha", alpha)?;
    check_nonneg("beta", beta)?;
    let ctx = ScaleContext::new(model, alpha)?;
    if u < 0.0 {
        return Ok((beta * u).exp());
    }
    let phi_a = ctx.phi_q();
    let ratio = if (beta - phi_a).abs() < SINGULARITY_RADIUS {
        model.psi_d1(phi_a)
    } else {
        ctx.psi_q(beta) / (beta - phi_a)
    };
    Ok(ctx.z(u, beta)? - ctx.w(u)? * ratio)
}

fn require_net_profit(model: &LevyModel) -> Result<()> {
    if !model.is_spectrally_negative() {
        return Err(Error::NotSpectrallyNegative);
    }
    if model.net_profit_check() {
        Ok(())
    } else {
        Err(Error::NetProfitViolated { drift: model.mean() })
    }
}

/// `P_u(tau_0^- = inf) = psi'(0) W_0(u)`.
pub fn survival_continuous(model: &LevyModel, u: f64) -> Result<f64> {
    require_net_profit(model)?;
    if u < 0.0 {
        return Ok(0.0);
    }
    Ok(model.psi_d1(0.0) * ScaleContext::new(model, 0.0)?.w(u)?)
}

/// `P_u(hat tau_0^- = inf) = psi'(0) (Phi_lambda / lambda) Z_0(u, Phi_lambda)`, with
/// an observation at time zero.
pub fn survival_poisson(model: &LevyModel, lambda: f64, u: f64) -> Result<f64> {
    require_net_profit(model)?;
    check_lambda(lambda)?;
    if u < 0.0 {
        return Ok(0.0);
    }
    let ctx = ScaleContext::new(model, 0.0)?;
    let pl = phi(model, lambda)?;
    Ok(model.psi_d1(0.0) * pl / lambda * ctx.z(u, pl)?)
}

/// `E_u[e^{-alpha hat tau_0^- + beta X}; hat tau_0^- < inf]`.
pub fn down_exit_poisson(model: &LevyModel, lambda: f64, u: f64, alpha: f64, beta: f64) -> Result<f64> {
    check_nonneg("beta", beta)?;
    Kernel::new(model, lambda, alpha)?.down_exit_poisson(u, beta)
}

/// `E_u[e^{-alpha hat tau_a^+ - beta (X - a)}; hat tau_a^+ < inf]`.
pub fn up_crossing_poisson(
    model: &LevyModel,
    lambda: f64,
    u: f64,
    a: Barrier,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_nonneg("beta", beta)?;
    Ok(Kernel::new(model, lambda, alpha)?.up_crossing_poisson(u, a, beta))
}

/// `E[e^{-alpha T^U} W_alpha(u + U)] = (Phi_lambda / lambda) Z_alpha(u, Phi_{lambda+alpha})`.
pub fn lemma_wz_first(model: &LevyModel, lambda: f64, alpha: f64, u: f64) -> Result<f64> {
    Kernel::new(model, lambda, alpha)?.lemma_first(u, ZForm::Auto)
}

/// The left side of [`lemma_wz_first`], by quadrature over the law of `U`.
pub fn lemma_wz_first_lhs(model: &LevyModel, lambda: f64, alpha: f64, u: f64) -> Result<f64> {
    Kernel::new(model, lambda, alpha)?.lemma_first_lhs(u)
}

/// `E[e^{-alpha T^U} Z_alpha(u + U, beta)]` in closed form.
pub fn lemma_wz_second(model: &LevyModel, lambda: f64, alpha: f64, u: f64, beta: f64) -> Result<f64> {
    check_nonneg("beta", beta)?;
    Kernel::new(model, lambda, alpha)?.lemma_second(u, beta, ZForm::Auto)
}

/// The left side of [`lemma_wz_second`], by nested quadrature.
pub fn lemma_wz_second_lhs(model: &LevyModel, lambda: f64, alpha: f64, u: f64, beta: f64) -> Result<f64> {
    check_nonneg("beta", beta)?;
    Kernel::new(model, lambda, alpha)?.lemma_second_lhs(u, beta)
}

/// `E_0[e^{-alpha tau^{(2)-}}; tau^{(2)-} < inf]`, ruin with an Erlang(2, lambda)
/// Parisian delay started from zero.
///
/// At `alpha = 0` the limit is returned: `1 - psi'(0) Phi_lambda^2 psi'(Phi_lambda) / lambda^2`
/// when `psi'(0) > 0`, and `1` otherwise.
pub fn parisian_erlang2_zero(model: &LevyModel, lambda: f64, alpha: f64) -> Result<f64> {
    Ok(Kernel::new(model, lambda, alpha)?.parisian_erlang2_zero())
}

/// Right side of an identity evaluated by quadrature against the law of `U`.
///
/// Supported: `I1` (yields the Poisson survival probability), `I4` (yields the
/// Poisson-observed ruin transform) and `I13` with `k = 2` (yields the
/// Erlang(2) Parisian transform). The other identities need the law of `D`.
pub fn compose_identity_rhs(
    id: IdentityId,
    model: &LevyModel,
    lambda: f64,
    params: &IdentityParams,
) -> Result<f64> {
    let p = params.effective(id);
    check_nonneg("u", p.u)?;
    match id {
        IdentityId::I1 => {
            require_net_profit(model)?;
            let k = Kernel::new(model, lambda, 0.0)?;
            let drift = model.psi_d1(0.0);
            k.expect_over_up(p.u, |x| Ok(drift * k.ctx.w(x)?))
        }
        IdentityId::I4 => {
            check_nonneg("beta", p.beta)?;
            let k = Kernel::new(model, lambda, p.alpha)?;
            Ok(k.expect_over_up(p.u, |x| k.down_exit_continuous(x, p.beta))? * k.wh_down(p.beta))
        }
        IdentityId::I13 => {
            check_nonneg("beta", p.beta)?;
            if p.k < 2 {
                return Err(Error::invalid(format!("the Parisian chain needs k >= 2, got {}", p.k)));
            }
            if p.k != 2 {
                return Err(Error::Unsupported(format!(
                    "closed-form inner transform exists for k = 2 only, got {}",
                    p.k
                )));
            }
            let k = Kernel::new(model, lambda, p.alpha)?;
            Ok(k.expect_over_up(p.u, |x| k.down_exit_poisson(x, p.beta))? * k.wh_down(p.beta))
        }
        other => Err(Error::Unsupported(format!(
            "{other} has no quadrature form over the law of U"
        ))),
    }
}

/// Dispatches an [`ExitQuery`] to the matching closed form. Spectrally
/// positive models are handled by mirroring.
#[derive(Debug, Clone)]
pub struct ExitSolver {
    model: LevyModel,
}

impl ExitSolver {
    pub fn new(model: &LevyModel) -> Self {
        ExitSolver { model: model.clone() }
    }

    pub fn evaluate(&self, q: &ExitQuery) -> Result<f64> {
        q.validate()?;
        if q.reflection.is_some() && !q.a.is_finite() {
            // reflection at an infinite barrier never binds
            return self.evaluate(&ExitQuery { reflection: None, ..*q });
        }
        if q.reflection.is_some() || q.horizon.is_some() {
            return Err(Error::Unsupported("no closed form for reflected or finite-horizon queries".into()));
        }
        let two_sided = q.lower().is_some() && q.upper().is_some();
        if two_sided {
            return Err(Error::Unsupported("no closed form for two-sided exits".into()));
        }
        if self.model.is_spectrally_negative() {
            return self.evaluate_sn(&self.model, q);
        }
        let mirror = self.model.negated();
        if !mirror.is_spectrally_negative() {
            return Err(Error::NotSpectrallyNegative);
        }
        // Y = a - X (upper target) or Y = u - X shifted (lower target)
        match q.target {
            Target::Upper => {
                let a = q.a.level();
                let m = ExitQuery {
                    u: a - q.u,
                    a: Barrier::Infinite,
                    lower_mode: q.upper_mode,
                    upper_mode: None,
                    target: Target::Lower,
                    ..*q
                };
                self.evaluate_sn(&mirror, &m)
            }
            Target::Lower => {
                let m = ExitQuery {
                    u: 0.0,
                    a: Barrier::Finite(q.u),
                    lower_mode: None,
                    upper_mode: q.lower_mode,
                    target: Target::Upper,
                    ..*q
                };
                self.evaluate_sn(&mirror, &m)
            }
        }
    }

    fn evaluate_sn(&self, model: &LevyModel, q: &ExitQuery) -> Result<f64> {
        match q.target {
            Target::Lower => match q.lower().expect("validated") {
                Detection::Continuous => down_exit_continuous(model, q.u, q.alpha, q.beta),
                Detection::Poisson => down_exit_poisson(model, q.lambda, q.u, q.alpha, q.beta),
                Detection::ErlangParisian(2) if q.u == 0.0 && q.beta == 0.0 => {
                    parisian_erlang2_zero(model, q.lambda, q.alpha)
                }
                d => Err(Error::Unsupported(format!("no closed form for lower detection {d:?}"))),
            },
            Target::Upper => match q.upper().expect("validated") {
                Detection::Continuous => up_crossing_continuous(model, q.u, q.a, q.alpha),
                Detection::Poisson => up_crossing_poisson(model, q.lambda, q.u, q.a, q.alpha, q.beta),
                d => Err(Error::Unsupported(format!("no closed form for upper detection {d:?}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::JumpDistribution;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bm() -> LevyModel {
        LevyModel::brownian(1.0, 2f64.sqrt()).unwrap()
    }

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(2.0, 1.0, JumpDistribution::exponential(1.0).unwrap()).unwrap()
    }

    const GOLDEN: f64 = 0.618_033_988_749_894_8;

    #[test]
    fn factor_examples() {
        assert_relative_eq!(wh_up(&bm(), 1.0, 0.0, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(wh_up(&bm(), 1.0, 0.0, 1.0).unwrap(), GOLDEN / (GOLDEN + 1.0), epsilon = 1e-12);
        assert_relative_eq!(wh_down(&bm(), 1.0, 0.0, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        // psi'(Phi_1) = 1 + 2 Phi_1 = sqrt 5
        let at_pole = wh_down(&bm(), 1.0, 0.0, GOLDEN).unwrap();
        assert_relative_eq!(at_pole, 1.0 / GOLDEN / 5f64.sqrt(), epsilon = 1e-10);
        let f = WienerHopfFactors::new(&cl(), 2.0).unwrap();
        assert_relative_eq!(f.up(0.0, 0.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.down(0.0, 0.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn one_sided_continuous_examples() {
        let m = bm();
        assert_eq!(up_crossing_continuous(&m, 3.0, Barrier::Finite(3.0), 1.0).unwrap(), 1.0);
        assert_eq!(up_crossing_continuous(&m, 0.0, Barrier::Finite(3.0), 0.0).unwrap(), 1.0);
        assert_relative_eq!(
            up_crossing_continuous(&m, 0.5, Barrier::Finite(2.0), 1.0).unwrap(),
            (-GOLDEN * 1.5).exp(),
            epsilon = 1e-12
        );
        assert_eq!(up_crossing_continuous(&m, 0.0, Barrier::Infinite, 1.0).unwrap(), 0.0);
        assert_relative_eq!(down_exit_continuous(&m, 0.0, 0.0, 0.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(down_exit_continuous(&m, 1.0, 0.0, 0.0).unwrap(), (-1f64).exp(), epsilon = 1e-10);
        assert_relative_eq!(survival_continuous(&m, 1.0).unwrap(), 1.0 - (-1f64).exp(), epsilon = 1e-12);
        assert_eq!(survival_continuous(&m, 0.0).unwrap(), 0.0);
        assert!(survival_continuous(&m, 14.0).unwrap() > 1.0 - 1e-6);
        let bad = LevyModel::brownian(-1.0, 1.0).unwrap();
        assert!(matches!(survival_continuous(&bad, 1.0), Err(Error::NetProfitViolated { .. })));
    }

    #[test]
    fn poisson_examples() {
        let m = bm();
        assert_relative_eq!(survival_poisson(&m, 1.0, 0.0).unwrap(), GOLDEN, epsilon = 1e-12);
        for &u in &[0.0, 0.7, 2.0] {
            let complement = 1.0 - survival_poisson(&m, 1.0, u).unwrap();
            assert_relative_eq!(down_exit_poisson(&m, 1.0, u, 0.0, 0.0).unwrap(), complement, epsilon = 1e-10);
        }
        // u = 0, beta = 0 reduces to the exponential-delay Parisian transform
        let (l, a) = (1.0, 0.5);
        let (mu, pa) = (phi(&m, l + a).unwrap(), phi(&m, a).unwrap());
        let expected = l / (l + a) * (1.0 - a / l * (mu - pa) / pa);
        assert_relative_eq!(down_exit_poisson(&m, l, 0.0, a, 0.0).unwrap(), expected, epsilon = 1e-12);
        assert_relative_eq!(
            up_crossing_poisson(&m, 1.0, 2.0, Barrier::Finite(2.0), 0.0, 0.0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert!(up_crossing_poisson(&m, 1.0, 0.0, Barrier::Finite(2.0), 0.3, 1e9).unwrap() < 1e-8);
        assert_eq!(up_crossing_poisson(&m, 1.0, 0.0, Barrier::Infinite, 0.3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn survival_poisson_is_expectation_over_exponential_overshoot() {
        for m in [bm(), cl()] {
            let lambda = 1.5;
            let pl = phi(&m, lambda).unwrap();
            for &u in &[0.0, 0.5, 2.0] {
                let r = try_integrate_semi_infinite(
                    |y| Ok(survival_continuous(&m, u + y)? * pl * (-pl * y).exp()),
                    0.0,
                    1.0 / pl,
                    QuadOptions::relative(1e-11),
                    1e-15,
                )
                .unwrap();
                assert_relative_eq!(survival_poisson(&m, lambda, u).unwrap(), r.value, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn lemma_sides_agree() {
        for m in [bm(), cl()] {
            for &u in &[0.0, 0.8, 2.0] {
                for &alpha in &[0.0, 0.5] {
                    let lhs = lemma_wz_first_lhs(&m, 1.0, alpha, u).unwrap();
                    let rhs = lemma_wz_first(&m, 1.0, alpha, u).unwrap();
                    assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
                    for &beta in &[0.0, 0.3, 2.0] {
                        let lhs = lemma_wz_second_lhs(&m, 1.0, alpha, u, beta).unwrap();
                        let rhs = lemma_wz_second(&m, 1.0, alpha, u, beta).unwrap();
                        assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn lemma_second_limit_at_zero_matches_phi_derivative() {
        let m = bm();
        let (l, a) = (1.0, 0.5);
        let mu = phi(&m, l + a).unwrap();
        let deriv = crate::scale::phi_derivative(&m, l + a).unwrap();
        let expected = phi(&m, l).unwrap() / (l * deriv);
        assert_relative_eq!(lemma_wz_second(&m, l, a, 0.0, mu).unwrap(), expected, epsilon = 1e-12);
        assert_relative_eq!(lemma_wz_second(&m, l, 0.0, 0.0, 0.0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_branches_continuous() {
        let h = 1e-4;
        for m in [bm(), cl()] {
            for &alpha in &[0.0, 0.5] {
                let k = Kernel::new(&m, 1.0, alpha).unwrap();
                let avg = |f: &dyn Fn(f64) -> f64, x: f64| 0.5 * (f(x + h) + f(x - h));
                let lim = k.wh_down(k.mu);
                assert_relative_eq!(lim, avg(&|b| k.wh_down_generic(b), k.mu), max_relative = 1e-6);
                for &u in &[0.0, 1.0] {
                    let lim = k.down_exit_poisson(u, k.mu).unwrap();
                    let gen = avg(&|b| k.down_exit_poisson_generic(u, b).unwrap(), k.mu);
                    assert_relative_eq!(lim, gen, max_relative = 1e-6);
                    let lim = k.down_exit_poisson(u, k.phi_a).unwrap();
                    let gen = avg(&|b| k.down_exit_poisson_generic(u, b).unwrap(), k.phi_a);
                    assert_relative_eq!(lim, gen, max_relative = 1e-6);
                    let lim = k.down_exit_continuous(u, k.phi_a).unwrap();
                    let gen = avg(&|b| k.down_exit_continuous_generic(u, b).unwrap(), k.phi_a);
                    assert_relative_eq!(lim, gen, max_relative = 1e-6, epsilon = 1e-12);
                    let lim = k.lemma_second(u, k.mu, ZForm::Auto).unwrap();
                    let gen = avg(&|b| k.lemma_second_generic(u, b, ZForm::Auto).unwrap(), k.mu);
                    assert_relative_eq!(lim, gen, max_relative = 1e-6);
                }
            }
            // alpha only moves to the right of zero: second-order extrapolation
            let lim = parisian_erlang2_zero(&m, 1.0, 0.0).unwrap();
            let f = |a: f64| Kernel::new(&m, 1.0, a).unwrap().parisian_erlang2_zero_generic();
            assert_relative_eq!(lim, 2.0 * f(h) - f(2.0 * h), max_relative = 1e-6);
        }
    }

    #[test]
    fn compose_reproduces_closed_forms() {
        let m = bm();
        let p = IdentityParams {
            u: 0.7,
            ..Default::default()
        };
        let i1 = compose_identity_rhs(IdentityId::I1, &m, 1.0, &p).unwrap();
        assert_relative_eq!(i1, survival_poisson(&m, 1.0, 0.7).unwrap(), max_relative = 1e-8);
        let i4 = compose_identity_rhs(IdentityId::I4, &m, 1.0, &p).unwrap();
        assert_relative_eq!(i4, down_exit_poisson(&m, 1.0, 0.7, 0.5, 0.3).unwrap(), max_relative = 1e-8);
        let p0 = IdentityParams {
            u: 0.0,
            beta: 0.0,
            ..Default::default()
        };
        let i13 = compose_identity_rhs(IdentityId::I13, &m, 1.0, &p0).unwrap();
        assert_relative_eq!(i13, parisian_erlang2_zero(&m, 1.0, 0.5).unwrap(), max_relative = 1e-8);
        assert!(matches!(
            compose_identity_rhs(IdentityId::I6, &m, 1.0, &p),
            Err(Error::Unsupported(_))
        ));
        let bad_k = IdentityParams { k: 1, ..p };
        assert!(matches!(
            compose_identity_rhs(IdentityId::I13, &m, 1.0, &bad_k),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn survival_ordering_and_dense_observation_limit() {
        let m = bm();
        for &u in &[0.0, 0.5, 1.0, 2.0, 4.0] {
            let c = survival_continuous(&m, u).unwrap();
            assert!(c <= survival_poisson(&m, 1.0, u).unwrap());
            assert!(survival_poisson(&m, 1e4, u).unwrap() - c < 0.01);
        }
    }

    #[test]
    fn solver_dispatch_and_mirroring() {
        let m = bm();
        let s = ExitSolver::new(&m);
        let q = ExitQuery::ruin(1.0, 1.0, Detection::Poisson).with_discount(0.5, 0.3);
        assert_relative_eq!(s.evaluate(&q).unwrap(), down_exit_poisson(&m, 1.0, 1.0, 0.5, 0.3).unwrap());
        // mirrored spectrally positive model: -X is the BM reference
        let sp = m.negated();
        let sps = ExitSolver::new(&sp);
        let up = ExitQuery::up_crossing(0.0, 1.0, 1.0, Detection::Continuous).with_discount(0.0, 0.0);
        assert_relative_eq!(sps.evaluate(&up).unwrap(), (-1f64).exp(), epsilon = 1e-10);
        let down = ExitQuery::ruin(2.0, 1.0, Detection::Continuous).with_discount(1.0, 0.0);
        assert_relative_eq!(sps.evaluate(&down).unwrap(), (-GOLDEN * 2.0).exp(), epsilon = 1e-12);
        let mut two = ExitQuery::ruin(1.0, 1.0, Detection::Poisson);
        two.a = Barrier::Finite(2.0);
        two.upper_mode = Some(Detection::Continuous);
        assert!(matches!(s.evaluate(&two), Err(Error::Unsupported(_))));
    }

    #[test]
    fn query_validation() {
        let mut q = ExitQuery::ruin(1.0, 1.0, Detection::Continuous);
        q.a = Barrier::Finite(2.0);
        q.upper_mode = Some(Detection::Continuous);
        assert!(matches!(q.validate(), Err(Error::InconsistentQuery(_))));
        let mut r = ExitQuery::ruin(1.0, 1.0, Detection::Continuous);
        r.a = Barrier::Finite(2.0);
        r.reflection = Some(Reflection::Continuous);
        assert!(matches!(r.validate(), Err(Error::InconsistentQuery(_))));
        r.lower_mode = Some(Detection::Poisson);
        assert!(r.validate().is_ok());
        let bad = ExitQuery { lambda: 0.0, ..r };
        assert!(bad.validate().is_err());
        assert_eq!(Detection::ErlangParisian(1).normalized(), Detection::Poisson);
        assert_eq!(Detection::ObservedRun(0).normalized(), Detection::Poisson);
        assert_eq!(Detection::ErlangParisian(0).normalized(), Detection::Continuous);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn transforms_lie_in_unit_interval(
            u in 0.0f64..3.0,
            alpha in 0.0f64..2.0,
            beta in 0.0f64..2.0,
            lambda in 0.2f64..5.0,
        ) {
            for m in [bm(), cl()] {
                let vals = [
                    wh_up(&m, lambda, alpha, beta).unwrap(),
                    wh_down(&m, lambda, alpha, beta).unwrap(),
                    down_exit_continuous(&m, u, alpha, beta).unwrap(),
                    down_exit_poisson(&m, lambda, u, alpha, beta).unwrap(),
                    up_crossing_poisson(&m, lambda, u, Barrier::Finite(u + 1.0), alpha, beta).unwrap(),
                    parisian_erlang2_zero(&m, lambda, alpha).unwrap(),
                ];
                for v in vals {
                    prop_assert!((-1e-9..=1.0 + 1e-9).contains(&v), "{v}");
                }
            }
        }

        #[test]
        fn poisson_survival_dominates(u in 0.0f64..5.0, lambda in 0.1f64..10.0) {
            for m in [bm(), cl()] {
                let c = survival_continuous(&m, u).unwrap();
                let p = survival_poisson(&m, lambda, u).unwrap();
                prop_assert!(c <= p + 1e-12);
            }
        }
    }
}
