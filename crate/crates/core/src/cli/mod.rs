//! Command line front end.

pub mod commands;
pub mod config;
pub mod model_spec;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::exit::Target;
use crate::montecarlo::RhsMode;
use config::{Count, Format, Grid, IdList, Mode, ReflectionMode, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IDENTITY_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "levy-exit", version, about = "Exit problems for Levy processes under continuous and Poisson observation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate closed-form values over parameter grids.
    Compute {
        #[arg(value_enum)]
        quantity: Quantity,
        #[command(flatten)]
        flags: Flags,
    },
    /// Monte Carlo estimates of an exit functional.
    Simulate {
        #[command(flatten)]
        flags: Flags,
    },
    /// Check identities of the catalog by simulation.
    Verify {
        #[command(flatten)]
        flags: Flags,
    },
}

/// Closed-form tables for `compute`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// Survival probability under continuous and Poisson observation (u, lambda).
    Survival,
    /// Discounted ruin transforms, continuous and Poisson (u, alpha, beta, lambda).
    DownExit,
    /// Discounted up-crossing transforms at barrier a (u, alpha, beta, lambda).
    UpCrossing,
    /// Wiener-Hopf factors E e^{-alpha T - beta U} and E e^{-alpha T + beta D} (alpha, beta, lambda).
    Wh,
    /// Both W/Z integral identities, closed form and quadrature (u, alpha, beta, lambda).
    WzIdentity,
    /// Erlang(2) Parisian ruin transform at zero (alpha, lambda).
    Parisian,
    /// Scale functions W_alpha(u) and Z_alpha(u, beta) (u, alpha, beta).
    Scale,
    /// Right inverse Phi(alpha) and its derivative (alpha).
    Phi,
    /// Laplace exponent psi(beta) and its derivative (beta).
    Laplace,
    /// Identity right sides by quadrature for the ids in --ids (u, alpha, beta, lambda).
    Compose,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RhsArg {
    Auto,
    MonteCarlo,
    ClosedForm,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    pub dump_config: bool,
    /// Model, e.g. bm:mu=1,sigma=1.4142 or cl:c=2,rate=1,jump=exp(1).
    #[arg(long)]
    pub model: Option<String>,
    /// Observation rate; scalar, start:stop:step or a comma list.
    #[arg(long)]
    pub lambda: Option<Grid>,
    /// Initial level; scalar, start:stop:step or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<Grid>,
    /// Upper barrier (inf for none).
    #[arg(long)]
    pub a: Option<f64>,
    /// Discount rate; scalar, start:stop:step or a comma list.
    #[arg(long)]
    pub alpha: Option<Grid>,
    /// Transform argument; scalar, start:stop:step or a comma list.
    #[arg(long)]
    pub beta: Option<Grid>,
    /// Penalty on the regulator.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Refraction fraction in [0, 1].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Parisian order.
    #[arg(long)]
    pub k: Option<u32>,
    /// Finite horizon as an epoch index.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Paths per estimate (1e6 accepted).
    #[arg(long)]
    pub n: Option<Count>,
    #[arg(long)]
    pub seed: Option<Count>,
    /// Pass when z is below this.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 uses all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Truncation horizon for undiscounted simulations.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Do not observe at time 0.
    #[arg(long)]
    pub no_t0: bool,
    /// Identity ids, e.g. I1,I4 or all.
    #[arg(long)]
    pub ids: Option<IdList>,
    /// Lower detection: none, continuous, poisson, parisian:K, run:K.
    #[arg(long)]
    pub lower: Option<Mode>,
    /// Upper detection: none, continuous, poisson, parisian:K, run:K.
    #[arg(long)]
    pub upper: Option<Mode>,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    #[arg(long, value_enum)]
    pub reflection: Option<ReflectionMode>,
    /// Right side evaluation for verify.
    #[arg(long, value_enum)]
    pub rhs: Option<RhsArg>,
}

impl Flags {
    /// Config file (if any) overridden by the flags that were given.
    pub fn resolve(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
                RunConfig::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(model, lambda, u, a, alpha, beta, gamma, delta, k, n, seed, threshold, threads, ids, lower, upper, reflection);
        if self.horizon.is_some() {
            c.horizon = self.horizon;
        }
        if self.format.is_some() {
            c.format = self.format;
        }
        if self.out.is_some() {
            c.out.clone_from(&self.out);
        }
        if self.t_max.is_some() {
            c.t_max = self.t_max;
        }
        if self.no_t0 {
            c.include_t0 = false;
        }
        if let Some(t) = self.target {
            c.target = match t {
                TargetArg::Lower => Target::Lower,
                TargetArg::Upper => Target::Upper,
            };
        }
        if let Some(r) = self.rhs {
            c.rhs = match r {
                RhsArg::Auto => RhsMode::Auto,
                RhsArg::MonteCarlo => RhsMode::MonteCarlo,
                RhsArg::ClosedForm => RhsMode::ClosedForm,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_)
        | Error::NotSpectrallyNegative
        | Error::NetProfitViolated { .. }
        | Error::InconsistentQuery(_)
        | Error::Unsupported(_) => EXIT_USAGE,
        Error::RootNotConverged { .. }
        | Error::InversionUnstable { .. }
        | Error::QuadratureFailed { .. }
        | Error::Singular(_)
        | Error::RejectionLimit(_) => EXIT_NUMERICAL,
    }
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
