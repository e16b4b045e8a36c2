//! Exact path simulation and Monte Carlo estimators.

mod bridge;
mod estimate;
mod identities;
mod path;
mod segment;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use estimate::{path_rng, Estimate, SimOptions, CHUNK};
pub use identities::{verify_identity, z_score, IdentityReport, Rhs, RhsMode, VerifyOptions};
pub use path::{default_t_max, STOP_TOL};
pub use segment::{simulate_segment, simulate_segment_from, PathSegment};

use crate::error::{Error, Result};
use crate::exit::ExitQuery;
use crate::levy_model::LevyModel;
use path::{Dynamics, PathPlan};
use rand::Rng;

/// Observation epochs: a Poisson process of rate `lambda`, optionally with
/// an extra observation at time 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationScheme {
    pub lambda: f64,
    pub include_t0: bool,
}

impl ObservationScheme {
    pub fn new(lambda: f64) -> Self {
        ObservationScheme {
            lambda,
            include_t0: true,
        }
    }
}

/// One draw of the Wiener-Hopf pair at an Exp(lambda) time: the infimum
/// `d` and its time `t_d` from one run, the supremum `u` and its time `t_u`
/// from an independent run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerHopfSample {
    pub d: f64,
    pub t_d: f64,
    pub u: f64,
    pub t_u: f64,
}

/// Draws `n` independent Wiener-Hopf pairs of `model`.
pub fn sample_wiener_hopf<R: Rng + ?Sized>(
    model: &LevyModel,
    lambda: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<WienerHopfSample>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let dy = Dynamics::new(model);
    Ok((0..n)
        .map(|_| {
            let d = dy.extreme_run(lambda, false, rng);
            let u = dy.extreme_run(lambda, true, rng);
            WienerHopfSample {
                d: d.value,
                t_d: d.time,
                u: u.value,
                t_u: u.time,
            }
        })
        .collect())
}

/// Monte Carlo estimate of the exit functional `query`.
pub fn estimate_exit(
    model: &LevyModel,
    scheme: &ObservationScheme,
    query: &ExitQuery,
    opts: &SimOptions,
) -> Result<Estimate> {
    if query.lambda != scheme.lambda {
        return Err(Error::InconsistentQuery(format!(
            "query rate {} differs from the observation rate {}",
            query.lambda, scheme.lambda
        )));
    }
    let plan = PathPlan::new(model, query, scheme.include_t0, opts.t_max)?;
    let dy = Dynamics::new(model);
    estimate::run(opts.n, opts.seed, 0, opts.threads, |rng| plan.run(&dy, query.u, rng))
}
