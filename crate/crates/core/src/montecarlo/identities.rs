//! Monte Carlo verification of the identity catalog.
//!
//! Each side of an identity is an expectation over one path, possibly started
//! from `u + U` or `u + D` (with the weight `e^{-alpha T}` of the extremum
//! time) and multiplied by an independent Wiener-Hopf factor sample.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::estimate::{run, Estimate};
use super::path::{Dynamics, PathOutcome, PathPlan};
use crate::error::{Error, Result};
use crate::exit::{compose_identity_rhs, Barrier, Detection, ExitQuery, Reflection, Target};
use crate::identity::{IdentityId, IdentityParams};
use crate::levy_model::LevyModel;
use crate::scale::QUAD_REL_TOL;

/// How the right side is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsMode {
    /// Closed form where one exists, simulation otherwise.
    #[default]
    Auto,
    MonteCarlo,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Paths per simulated side.
    pub n: u64,
    pub seed: u64,
    pub threads: usize,
    /// A report passes when `z` is below this.
    pub threshold: f64,
    pub t_max: Option<f64>,
    pub rhs: RhsMode,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n: 1_000_000,
            seed: 0,
            threads: 0,
            threshold: 4.0,
            t_max: None,
            rhs: RhsMode::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rhs {
    MonteCarlo(Estimate),
    ClosedForm { value: f64, error_bound: f64 },
}

impl Rhs {
    pub fn value(&self) -> f64 {
        match self {
            Rhs::MonteCarlo(e) => e.mean,
            Rhs::ClosedForm { value, .. } => *value,
        }
    }

    /// Standard error, or the numerical error bound of a closed form.
    pub fn error(&self) -> f64 {
        match self {
            Rhs::MonteCarlo(e) => e.std_error,
            Rhs::ClosedForm { error_bound, .. } => *error_bound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub id: IdentityId,
    pub lhs: Estimate,
    pub rhs: Rhs,
    pub z: f64,
    pub pass: bool,
    pub threshold: f64,
}

/// `|lhs - rhs|` in units of the combined standard error.
pub fn z_score(lhs: f64, se_lhs: f64, rhs: f64, se_rhs: f64) -> f64 {
    let diff = (lhs - rhs).abs();
    let scale = se_lhs.hypot(se_rhs);
    if scale > 0.0 {
        diff / scale
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shift {
    None,
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Factor {
    None,
    Down,
    Up,
}

#[derive(Debug, Clone, Copy)]
struct SideSpec {
    query: ExitQuery,
    shift: Shift,
    factor: Factor,
    /// Survival form: one minus the passage indicator.
    complement: bool,
}

impl SideSpec {
    fn plain(query: ExitQuery) -> Self {
        SideSpec {
            query,
            shift: Shift::None,
            factor: Factor::None,
            complement: false,
        }
    }

    fn shift(mut self, s: Shift) -> Self {
        self.shift = s;
        self
    }

    fn factor(mut self, f: Factor) -> Self {
        self.factor = f;
        self
    }

    fn survival(mut self) -> Self {
        self.complement = true;
        self
    }

    fn sample<R: Rng + ?Sized>(&self, plan: &PathPlan, dy: &Dynamics, rng: &mut R) -> Result<PathOutcome> {
        let q = &self.query;
        let (start, weight) = match self.shift {
            Shift::None => (q.u, 1.0),
            Shift::Up | Shift::Down => {
                let e = dy.extreme_run(q.lambda, self.shift == Shift::Up, rng);
                (q.u + e.value, (-q.alpha * e.time).exp())
            }
        };
        let mut o = plan.run(dy, start, rng)?;
        if self.complement {
            o.value = 1.0 - o.value;
        }
        o.value *= weight;
        o.value *= match self.factor {
            Factor::None => 1.0,
            Factor::Down => {
                let e = dy.extreme_run(q.lambda, false, rng);
                (-q.alpha * e.time + q.beta * e.value).exp()
            }
            Factor::Up => {
                let e = dy.extreme_run(q.lambda, true, rng);
                (-q.alpha * e.time - q.beta * e.value).exp()
            }
        };
        Ok(o)
    }
}

fn base_query(p: &IdentityParams, lambda: f64) -> ExitQuery {
    ExitQuery {
        u: p.u,
        a: Barrier::Finite(p.a),
        alpha: p.alpha,
        beta: p.beta,
        gamma: 0.0,
        delta: p.delta,
        lambda,
        lower_mode: None,
        upper_mode: None,
        target: Target::Lower,
        reflection: None,
        horizon: None,
    }
}

fn lower(q: ExitQuery, d: Detection) -> ExitQuery {
    ExitQuery { lower_mode: Some(d), ..q }
}

fn two_sided(q: ExitQuery, low: Detection, up: Detection, target: Target) -> ExitQuery {
    ExitQuery {
        lower_mode: Some(low),
        upper_mode: Some(up),
        target,
        ..q
    }
}

fn reflected(q: ExitQuery, low: Detection, r: Reflection, gamma: f64) -> ExitQuery {
    ExitQuery {
        lower_mode: Some(low),
        reflection: Some(r),
        gamma,
        ..q
    }
}

/// Both sides of `id`, and whether the identity relies on observing `T_0 = 0`.
fn sides(id: IdentityId, p: &IdentityParams, lambda: f64) -> Result<(SideSpec, SideSpec, bool)> {
    use Detection::{Continuous as C, Poisson as P};
    use IdentityId::*;
    let b = base_query(p, lambda);
    let ruin = ExitQuery { a: Barrier::Infinite, ..b };
    Ok(match id {
        I1 => (
            SideSpec::plain(lower(ruin, P)).survival(),
            SideSpec::plain(lower(ruin, C)).shift(Shift::Up).survival(),
            false,
        ),
        I2 => (
            SideSpec::plain(lower(ruin, C)).survival(),
            SideSpec::plain(lower(ruin, P)).shift(Shift::Down).survival(),
            true,
        ),
        I3 => {
            let h = Some(p.horizon);
            (
                SideSpec::plain(ExitQuery { horizon: h, ..lower(ruin, P) }).survival(),
                SideSpec::plain(ExitQuery { horizon: h, ..lower(ruin, C) })
                    .shift(Shift::Up)
                    .survival(),
                false,
            )
        }
        I4 => (
            SideSpec::plain(lower(ruin, P)),
            SideSpec::plain(lower(ruin, C)).shift(Shift::Up).factor(Factor::Down),
            false,
        ),
        I5 => (
            SideSpec::plain(lower(ruin, C)).factor(Factor::Down),
            SideSpec::plain(lower(ruin, P)).shift(Shift::Down),
            true,
        ),
        I6 => (
            SideSpec::plain(two_sided(b, P, C, Target::Lower)),
            SideSpec::plain(two_sided(b, C, P, Target::Lower))
                .shift(Shift::Up)
                .factor(Factor::Down),
            true,
        ),
        I7 => (
            SideSpec::plain(two_sided(b, C, P, Target::Lower)).factor(Factor::Down),
            SideSpec::plain(two_sided(b, P, C, Target::Lower)).shift(Shift::Down),
            true,
        ),
        I8 => (
            SideSpec::plain(two_sided(b, C, P, Target::Upper)),
            SideSpec::plain(two_sided(b, P, C, Target::Upper))
                .shift(Shift::Down)
                .factor(Factor::Up),
            true,
        ),
        I9 => (
            SideSpec::plain(two_sided(b, P, C, Target::Upper)).factor(Factor::Up),
            SideSpec::plain(two_sided(b, C, P, Target::Upper)).shift(Shift::Up),
            true,
        ),
        I10 => (
            SideSpec::plain(reflected(b, P, Reflection::Continuous, p.gamma)),
            SideSpec::plain(reflected(b, C, Reflection::Poisson, p.gamma))
                .shift(Shift::Up)
                .factor(Factor::Down),
            true,
        ),
        I11 => (
            SideSpec::plain(reflected(b, C, Reflection::Poisson, p.gamma)).factor(Factor::Down),
            SideSpec::plain(reflected(b, P, Reflection::Continuous, p.gamma)).shift(Shift::Down),
            true,
        ),
        I12 => (
            SideSpec::plain(two_sided(b, P, P, Target::Lower)),
            SideSpec::plain(two_sided(b, C, Detection::ErlangParisian(2), Target::Lower)).shift(Shift::Up),
            true,
        ),
        I13 => {
            if p.k < 2 {
                return Err(Error::invalid(format!("the Parisian chain needs k >= 2, got {}", p.k)));
            }
            (
                SideSpec::plain(lower(ruin, Detection::ErlangParisian(p.k))),
                SideSpec::plain(lower(ruin, Detection::ObservedRun(p.k - 2)))
                    .shift(Shift::Up)
                    .factor(Factor::Down),
                false,
            )
        }
    })
}

fn simulate_side(
    side: &SideSpec,
    model: &LevyModel,
    include_t0: bool,
    opts: &VerifyOptions,
    salt: u64,
) -> Result<Estimate> {
    let plan = PathPlan::new(model, &side.query, include_t0, opts.t_max)?;
    let dy = Dynamics::new(model);
    run(opts.n, opts.seed, salt, opts.threads, |rng| side.sample(&plan, &dy, rng))
}

fn closed_form(id: IdentityId, model: &LevyModel, lambda: f64, p: &IdentityParams) -> Result<Rhs> {
    if !model.is_spectrally_negative() {
        return Err(Error::NotSpectrallyNegative);
    }
    let value = compose_identity_rhs(id, model, lambda, p)?;
    Ok(Rhs::ClosedForm {
        value,
        error_bound: 100.0 * QUAD_REL_TOL * value.abs().max(f64::MIN_POSITIVE),
    })
}

/// Checks identity `id` for `model` observed at rate `lambda`.
pub fn verify_identity(
    id: IdentityId,
    model: &LevyModel,
    lambda: f64,
    params: &IdentityParams,
    opts: &VerifyOptions,
) -> Result<IdentityReport> {
    params.validate()?;
    if !(opts.threshold > 0.0) {
        return Err(Error::invalid(format!("threshold must be positive, got {}", opts.threshold)));
    }
    let p = params.effective(id);
    let (lhs_side, rhs_side, needs_t0) = sides(id, &p, lambda)?;
    if needs_t0 && !p.include_t0 {
        return Err(Error::InconsistentQuery(format!(
            "{id} only holds when the process is also observed at time 0"
        )));
    }
    let salt = 2 * id.number() as u64;
    let lhs = simulate_side(&lhs_side, model, p.include_t0, opts, salt)?;
    let rhs = match opts.rhs {
        RhsMode::MonteCarlo => Rhs::MonteCarlo(simulate_side(&rhs_side, model, p.include_t0, opts, salt + 1)?),
        RhsMode::ClosedForm => closed_form(id, model, lambda, &p)?,
        RhsMode::Auto => match closed_form(id, model, lambda, &p) {
            Ok(r) => r,
            Err(Error::Unsupported(_) | Error::NotSpectrallyNegative | Error::NetProfitViolated { .. }) => {
                Rhs::MonteCarlo(simulate_side(&rhs_side, model, p.include_t0, opts, salt + 1)?)
            }
            Err(e) => return Err(e),
        },
    };
    let z = z_score(lhs.mean, lhs.std_error, rhs.value(), rhs.error());
    Ok(IdentityReport {
        id,
        lhs,
        rhs,
        z,
        pass: z < opts.threshold,
        threshold: opts.threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::JumpDistribution;

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(2.0, 1.0, JumpDistribution::exponential(1.0).unwrap()).unwrap()
    }

    fn quick(rhs: RhsMode) -> VerifyOptions {
        VerifyOptions {
            n: 20_000,
            seed: 11,
            threads: 1,
            rhs,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn z_score_edge_cases() {
        assert_eq!(z_score(1.0, 0.0, 1.0, 0.0), 0.0);
        assert_eq!(z_score(1.0, 0.0, 2.0, 0.0), f64::INFINITY);
        assert!((z_score(1.0, 0.3, 2.0, 0.4) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_rhs_used_when_available() {
        let r = verify_identity(IdentityId::I4, &cl(), 1.0, &IdentityParams::default(), &quick(RhsMode::Auto)).unwrap();
        assert!(matches!(r.rhs, Rhs::ClosedForm { .. }));
        assert!(r.pass, "{r:?}");
        let r = verify_identity(IdentityId::I6, &cl(), 1.0, &IdentityParams::default(), &quick(RhsMode::Auto)).unwrap();
        assert!(matches!(r.rhs, Rhs::MonteCarlo(_)));
        assert!(verify_identity(IdentityId::I6, &cl(), 1.0, &IdentityParams::default(), &quick(RhsMode::ClosedForm)).is_err());
    }

    #[test]
    fn time_zero_requirement_enforced() {
        let p = IdentityParams {
            include_t0: false,
            ..IdentityParams::default()
        };
        let e = verify_identity(IdentityId::I2, &cl(), 1.0, &p, &quick(RhsMode::MonteCarlo));
        assert!(matches!(e, Err(Error::InconsistentQuery(_))));
        assert!(verify_identity(IdentityId::I1, &cl(), 1.0, &p, &quick(RhsMode::MonteCarlo)).is_ok());
    }

    #[test]
    fn parisian_order_checked() {
        let p = IdentityParams {
            k: 1,
            ..IdentityParams::default()
        };
        assert!(verify_identity(IdentityId::I13, &cl(), 1.0, &p, &quick(RhsMode::MonteCarlo)).is_err());
    }
}
