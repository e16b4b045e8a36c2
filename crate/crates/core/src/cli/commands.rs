//! The `compute`, `simulate` and `verify` commands.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use super::config::{Format, RunConfig};
use super::model_spec::parse_model;
use super::output::{Cell, Record, RecordWriter};
use super::{exit_code, Command, Quantity, EXIT_IDENTITY_FAILED, EXIT_OK, EXIT_USAGE};
use crate::error::Error;
use crate::exit::{self, Barrier, ExitQuery, ExitSolver};
use crate::identity::{IdentityId, IdentityParams};
use crate::levy_model::LevyModel;
use crate::montecarlo::{estimate_exit, verify_identity, ObservationScheme, Rhs, SimOptions, VerifyOptions};
use crate::scale::{self, ScaleContext};

#[derive(Debug)]
pub enum Failure {
    Lib(Error),
    Io(io::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Lib(e) => exit_code(e),
            Failure::Io(_) => EXIT_USAGE,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "output: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<i32, Failure>;

fn sink(cfg: &RunConfig) -> io::Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn execute(cmd: &Command) -> Outcome {
    let (flags, default_format) = match cmd {
        Command::Compute { flags, .. } => (flags, Format::Csv),
        Command::Simulate { flags } | Command::Verify { flags } => (flags, Format::Json),
    };
    let cfg = flags.resolve()?;
    if flags.dump_config {
        print!("{}", cfg.to_toml());
        return Ok(EXIT_OK);
    }
    let model = parse_model(&cfg.model)?;
    let mut out = RecordWriter::new(sink(&cfg)?, cfg.format.unwrap_or(default_format));
    match cmd {
        Command::Compute { quantity, .. } => compute(*quantity, &cfg, &model, &mut out),
        Command::Simulate { .. } => simulate(&cfg, &model, &mut out),
        Command::Verify { .. } => verify(&cfg, &model, &mut out),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Lambda,
    Alpha,
    Beta,
    U,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Lambda => "lambda",
            Axis::Alpha => "alpha",
            Axis::Beta => "beta",
            Axis::U => "u",
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Point {
    lambda: f64,
    alpha: f64,
    beta: f64,
    u: f64,
}

/// Cartesian product of the grids in the order lambda, alpha, beta, u (u fastest).
fn points(cfg: &RunConfig, axes: &[Axis]) -> Vec<Point> {
    let grid = |a: Axis| {
        let g = match a {
            Axis::Lambda => &cfg.lambda,
            Axis::Alpha => &cfg.alpha,
            Axis::Beta => &cfg.beta,
            Axis::U => &cfg.u,
        };
        if axes.contains(&a) {
            g.values()
        } else {
            vec![g.values()[0]]
        }
    };
    let mut pts = Vec::new();
    for &lambda in &grid(Axis::Lambda) {
        for &alpha in &grid(Axis::Alpha) {
            for &beta in &grid(Axis::Beta) {
                for &u in &grid(Axis::U) {
                    pts.push(Point { lambda, alpha, beta, u });
                }
            }
        }
    }
    pts
}

fn axis_value(p: &Point, a: Axis) -> f64 {
    match a {
        Axis::Lambda => p.lambda,
        Axis::Alpha => p.alpha,
        Axis::Beta => p.beta,
        Axis::U => p.u,
    }
}

fn compute<W: Write>(q: Quantity, cfg: &RunConfig, model: &LevyModel, out: &mut RecordWriter<W>) -> Outcome {
    use Axis::*;
    let axes: &[Axis] = match q {
        Quantity::Survival => &[Lambda, U],
        Quantity::DownExit | Quantity::UpCrossing | Quantity::WzIdentity | Quantity::Compose => &[Lambda, Alpha, Beta, U],
        Quantity::Wh => &[Lambda, Alpha, Beta],
        Quantity::Parisian => &[Lambda, Alpha],
        Quantity::Scale => &[Alpha, Beta, U],
        Quantity::Phi => &[Alpha],
        Quantity::Laplace => &[Beta],
    };
    let grid_len = |a: Axis| match a {
        Lambda => cfg.lambda.len(),
        Alpha => cfg.alpha.len(),
        Beta => cfg.beta.len(),
        U => cfg.u.len(),
    };
    let mut shown: Vec<Axis> = [Lambda, Alpha, Beta, U]
        .into_iter()
        .filter(|a| axes.contains(a) && grid_len(*a) > 1)
        .collect();
    if shown.is_empty() {
        shown.push(if axes.contains(&U) { U } else { axes[0] });
    }
    let a = barrier(cfg.a);
    for p in points(cfg, axes) {
        let mut rec: Record = shown.iter().map(|&ax| (ax.name(), Cell::Num(axis_value(&p, ax)))).collect();
        let values: Vec<(&'static str, f64)> = match q {
            Quantity::Survival => vec![
                ("phi", exit::survival_continuous(model, p.u)?),
                ("phi_hat", exit::survival_poisson(model, p.lambda, p.u)?),
            ],
            Quantity::DownExit => vec![
                ("continuous", exit::down_exit_continuous(model, p.u, p.alpha, p.beta)?),
                ("poisson", exit::down_exit_poisson(model, p.lambda, p.u, p.alpha, p.beta)?),
            ],
            Quantity::UpCrossing => vec![
                ("continuous", exit::up_crossing_continuous(model, p.u, a, p.alpha)?),
                ("poisson", exit::up_crossing_poisson(model, p.lambda, p.u, a, p.alpha, p.beta)?),
            ],
            Quantity::Wh => vec![
                ("wh_up", exit::wh_up(model, p.lambda, p.alpha, p.beta)?),
                ("wh_down", exit::wh_down(model, p.lambda, p.alpha, p.beta)?),
            ],
            Quantity::WzIdentity => vec![
                ("first", exit::lemma_wz_first(model, p.lambda, p.alpha, p.u)?),
                ("first_quadrature", exit::lemma_wz_first_lhs(model, p.lambda, p.alpha, p.u)?),
                ("second", exit::lemma_wz_second(model, p.lambda, p.alpha, p.u, p.beta)?),
                ("second_quadrature", exit::lemma_wz_second_lhs(model, p.lambda, p.alpha, p.u, p.beta)?),
            ],
            Quantity::Parisian => vec![("erlang2_zero", exit::parisian_erlang2_zero(model, p.lambda, p.alpha)?)],
            Quantity::Scale => {
                let ctx = ScaleContext::new(model, p.alpha)?;
                vec![("w", ctx.w(p.u)?), ("z", ctx.z(p.u, p.beta)?)]
            }
            Quantity::Phi => vec![
                ("phi", scale::phi(model, p.alpha)?),
                ("phi_derivative", scale::phi_derivative(model, p.alpha)?),
            ],
            Quantity::Laplace => vec![
                ("psi", model.laplace_exponent(p.beta)?),
                ("psi_derivative", model.laplace_exponent_derivative(p.beta)?),
            ],
            Quantity::Compose => {
                let params = IdentityParams {
                    u: p.u,
                    a: cfg.a,
                    alpha: p.alpha,
                    beta: p.beta,
                    gamma: cfg.gamma,
                    delta: cfg.delta,
                    k: cfg.k,
                    horizon: cfg.horizon.unwrap_or(2),
                    include_t0: cfg.include_t0,
                };
                cfg.ids
                    .0
                    .iter()
                    .map(|&id| Ok((id_name(id), exit::compose_identity_rhs(id, model, p.lambda, &params)?)))
                    .collect::<Result<_, Error>>()?
            }
        };
        rec.extend(values.into_iter().map(|(k, v)| (k, Cell::Num(v))));
        out.write(&rec)?;
    }
    Ok(EXIT_OK)
}

fn id_name(id: IdentityId) -> &'static str {
    const NAMES: [&str; 13] = ["I1", "I2", "I3", "I4", "I5", "I6", "I7", "I8", "I9", "I10", "I11", "I12", "I13"];
    NAMES[id.number() - 1]
}

fn barrier(a: f64) -> Barrier {
    if a == f64::INFINITY {
        Barrier::Infinite
    } else {
        Barrier::Finite(a)
    }
}

fn simulate<W: Write>(cfg: &RunConfig, model: &LevyModel, out: &mut RecordWriter<W>) -> Outcome {
    let solver = ExitSolver::new(model);
    let opts = SimOptions {
        n: cfg.n.0,
        seed: cfg.seed.0,
        threads: cfg.threads,
        t_max: cfg.t_max,
    };
    for p in points(cfg, &[Axis::Lambda, Axis::Alpha, Axis::Beta, Axis::U]) {
        let q = ExitQuery {
            u: p.u,
            a: barrier(cfg.a),
            alpha: p.alpha,
            beta: p.beta,
            gamma: cfg.gamma,
            delta: cfg.delta,
            lambda: p.lambda,
            lower_mode: cfg.lower.0,
            upper_mode: cfg.upper.0,
            target: cfg.target,
            reflection: cfg.reflection.get(),
            horizon: cfg.horizon,
        };
        let scheme = ObservationScheme {
            lambda: p.lambda,
            include_t0: cfg.include_t0,
        };
        let e = estimate_exit(model, &scheme, &q, &opts)?;
        // closed forms assume observation at time 0
        let closed = if cfg.include_t0 { solver.evaluate(&q).ok() } else { None };
        let rec: Record = vec![
            ("lambda", p.lambda.into()),
            ("u", p.u.into()),
            ("a", cfg.a.into()),
            ("alpha", p.alpha.into()),
            ("beta", p.beta.into()),
            ("gamma", cfg.gamma.into()),
            ("delta", cfg.delta.into()),
            ("mean", e.mean.into()),
            ("std_error", e.std_error.into()),
            ("n", e.n.into()),
            ("seed", e.seed.into()),
            ("seconds", e.seconds.into()),
            ("truncated", e.truncated.into()),
            ("truncation_bound", e.truncation_bound.into()),
            ("closed_form", closed.into()),
        ];
        out.write(&rec)?;
    }
    Ok(EXIT_OK)
}

fn verify<W: Write>(cfg: &RunConfig, model: &LevyModel, out: &mut RecordWriter<W>) -> Outcome {
    let params = IdentityParams {
        u: cfg.u.scalar("u")?,
        a: cfg.a,
        alpha: cfg.alpha.scalar("alpha")?,
        beta: cfg.beta.scalar("beta")?,
        gamma: cfg.gamma,
        delta: cfg.delta,
        k: cfg.k,
        horizon: cfg.horizon.unwrap_or(2),
        include_t0: cfg.include_t0,
    };
    let lambda = cfg.lambda.scalar("lambda")?;
    let opts = VerifyOptions {
        n: cfg.n.0,
        seed: cfg.seed.0,
        threads: cfg.threads,
        threshold: cfg.threshold,
        t_max: cfg.t_max,
        rhs: cfg.rhs,
    };
    let mut all_pass = true;
    for &id in &cfg.ids.0 {
        let r = verify_identity(id, model, lambda, &params, &opts)?;
        all_pass &= r.pass;
        let (kind, rhs_seconds, rhs_bound) = match r.rhs {
            Rhs::MonteCarlo(e) => ("monte_carlo", e.seconds, e.truncation_bound),
            Rhs::ClosedForm { .. } => ("closed_form", 0.0, 0.0),
        };
        let rec: Record = vec![
            ("identity_id", id_name(id).into()),
            ("lhs", r.lhs.mean.into()),
            ("rhs", r.rhs.value().into()),
            ("se_lhs", r.lhs.std_error.into()),
            ("se_rhs", r.rhs.error().into()),
            ("z", r.z.into()),
            ("n", r.lhs.n.into()),
            ("seed", r.lhs.seed.into()),
            ("seconds", (r.lhs.seconds + rhs_seconds).into()),
            ("pass", r.pass.into()),
            ("threshold", r.threshold.into()),
            ("rhs_kind", kind.into()),
            ("truncation_bound", (r.lhs.truncation_bound + rhs_bound).into()),
        ];
        out.write(&rec)?;
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_IDENTITY_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::Grid;

    #[test]
    fn grid_product_runs_u_fastest() {
        let cfg = RunConfig {
            lambda: Grid::List(vec![1.0, 2.0]),
            u: Grid::List(vec![0.0, 1.0, 2.0]),
            ..RunConfig::default()
        };
        let pts = points(&cfg, &[Axis::Lambda, Axis::U]);
        assert_eq!(pts.len(), 6);
        assert_eq!((pts[1].lambda, pts[1].u), (1.0, 1.0));
        assert_eq!((pts[3].lambda, pts[3].u), (2.0, 0.0));
        // axes outside the list keep their first value
        let pts = points(&cfg, &[Axis::U]);
        assert_eq!(pts.len(), 3);
    }

    #[test]
    fn identity_names_match_display() {
        for id in IdentityId::ALL {
            assert_eq!(id_name(id), id.to_string());
        }
    }
}
