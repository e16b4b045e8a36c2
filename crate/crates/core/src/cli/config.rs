//! Run configuration shared by the config file and the command line.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model_spec::parse_model;
use crate::error::{Error, Result};
use crate::exit::{Detection, Reflection, Target};
use crate::identity::IdentityId;
use crate::montecarlo::RhsMode;

const MAX_GRID: usize = 1_000_000;

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum Raw {
    Int(i64),
    Num(f64),
    Text(String),
}

/// A scalar, an inclusive range `start:stop:step`, or a list `x,y,z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Raw", into = "Raw")]
pub enum Grid {
    Value(f64),
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Value(v) => vec![*v],
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|i| start + i as f64 * step).collect()
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Value(_) => 1,
            Grid::List(v) => v.len(),
            Grid::Range { start, stop, step } => ((stop - start) / step + 1e-9).floor() as usize + 1,
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.len() == 1
    }

    /// The single value of a scalar grid.
    pub fn scalar(&self, name: &str) -> Result<f64> {
        match self.values().as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::invalid(format!("{name} must be a single value here, got {self}"))),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match self {
            Grid::Range { start, stop, step } => {
                if !(start.is_finite() && stop.is_finite() && *step > 0.0 && step.is_finite()) {
                    return Err(Error::invalid(format!("{name}: range needs finite ends and a positive step")));
                }
                if stop < start {
                    return Err(Error::invalid(format!("{name}: range stop {stop} is below start {start}")));
                }
                if (stop - start) / step > MAX_GRID as f64 {
                    return Err(Error::invalid(format!("{name}: range has more than {MAX_GRID} points")));
                }
            }
            Grid::List(v) if v.is_empty() => return Err(Error::invalid(format!("{name}: empty list"))),
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Value(v) => write!(f, "{v}"),
            Grid::Range { start, stop, step } => write!(f, "{start}:{stop}:{step}"),
            Grid::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("expected a number, got {t:?}")))
        };
        let g = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [a, b, c] = parts.as_slice() else {
                return Err(Error::invalid(format!("range must be start:stop:step, got {s:?}")));
            };
            Grid::Range {
                start: num(a)?,
                stop: num(b)?,
                step: num(c)?,
            }
        } else if s.contains(',') {
            Grid::List(s.split(',').map(num).collect::<Result<_>>()?)
        } else {
            Grid::Value(num(s)?)
        };
        g.validate("grid")?;
        Ok(g)
    }
}

impl TryFrom<Raw> for Grid {
    type Error = Error;

    fn try_from(r: Raw) -> Result<Self> {
        match r {
            Raw::Int(i) => Ok(Grid::Value(i as f64)),
            Raw::Num(v) => Ok(Grid::Value(v)),
            Raw::Text(s) => s.parse(),
        }
    }
}

impl From<Grid> for Raw {
    fn from(g: Grid) -> Raw {
        match g {
            Grid::Value(v) => Raw::Num(v),
            other => Raw::Text(other.to_string()),
        }
    }
}

/// A count or seed written as an integer or in scientific notation (`1e6`).
/// Values beyond the TOML integer range are written as strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Raw", into = "Raw")]
pub struct Count(pub u64);

impl FromStr for Count {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(n) = s.trim().parse::<u64>() {
            return Ok(Count(n));
        }
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("expected a count, got {s:?}")))?;
        Count::from_float(v)
    }
}

impl Count {
    fn from_float(v: f64) -> Result<Self> {
        if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(63) {
            Ok(Count(v as u64))
        } else {
            Err(Error::invalid(format!("expected a non-negative whole count, got {v}")))
        }
    }
}

impl TryFrom<Raw> for Count {
    type Error = Error;

    fn try_from(r: Raw) -> Result<Self> {
        match r {
            Raw::Int(i) if i >= 0 => Ok(Count(i as u64)),
            Raw::Int(i) => Err(Error::invalid(format!("count must be non-negative, got {i}"))),
            Raw::Num(v) => Count::from_float(v),
            Raw::Text(s) => s.parse(),
        }
    }
}

impl From<Count> for Raw {
    fn from(c: Count) -> Raw {
        i64::try_from(c.0).map_or_else(|_| Raw::Text(c.0.to_string()), Raw::Int)
    }
}

/// A boundary detection rule, or `none`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Mode(pub Option<Detection>);

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let order = || {
            arg.parse::<u32>()
                .map_err(|_| Error::invalid(format!("{name} needs an order, as in {name}:2; got {s:?}")))
        };
        Ok(Mode(match name {
            "none" => None,
            "continuous" => Some(Detection::Continuous),
            "poisson" => Some(Detection::Poisson),
            "parisian" => Some(Detection::ErlangParisian(order()?)),
            "run" => Some(Detection::ObservedRun(order()?)),
            _ => {
                return Err(Error::invalid(format!(
                    "detection must be none, continuous, poisson, parisian:K or run:K; got {s:?}"
                )))
            }
        }))
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            None => write!(f, "none"),
            Some(Detection::Continuous) => write!(f, "continuous"),
            Some(Detection::Poisson) => write!(f, "poisson"),
            Some(Detection::ErlangParisian(k)) => write!(f, "parisian:{k}"),
            Some(Detection::ObservedRun(k)) => write!(f, "run:{k}"),
        }
    }
}

impl TryFrom<String> for Mode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Mode> for String {
    fn from(m: Mode) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionMode {
    #[default]
    None,
    Continuous,
    Poisson,
}

impl ReflectionMode {
    pub fn get(self) -> Option<Reflection> {
        match self {
            ReflectionMode::None => None,
            ReflectionMode::Continuous => Some(Reflection::Continuous),
            ReflectionMode::Poisson => Some(Reflection::Poisson),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// Identity selection: a comma separated list of ids, or `all`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct IdList(pub Vec<IdentityId>);

impl FromStr for IdList {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ids = IdentityId::parse_list(s)?;
        if ids.is_empty() {
            return Err(Error::invalid("empty identity list"));
        }
        Ok(IdList(ids))
    }
}

impl TryFrom<String> for IdList {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<IdList> for String {
    fn from(l: IdList) -> String {
        if l.0 == IdentityId::ALL {
            return "all".into();
        }
        l.0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelField {
    Text(String),
    Table(std::collections::BTreeMap<String, Raw>),
}

/// Accepts the mini-language string or a table such as
/// `{ type = "cl", c = 2, rate = 1, jump = "exp(1)" }`.
fn model_field<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    use serde::de::Error as _;
    match ModelField::deserialize(d)? {
        ModelField::Text(s) => Ok(s),
        ModelField::Table(mut t) => {
            let kind = match t.remove("type") {
                Some(Raw::Text(k)) => k,
                _ => return Err(D::Error::custom("model table needs a string `type` key")),
            };
            let fields: Vec<String> = t
                .into_iter()
                .map(|(k, v)| match v {
                    Raw::Int(i) => format!("{k}={i}"),
                    Raw::Num(x) => format!("{k}={x:?}"),
                    Raw::Text(s) => format!("{k}={s}"),
                })
                .collect();
            Ok(format!("{kind}:{}", fields.join(",")))
        }
    }
}

/// Everything a run needs. Every key is optional in a config file; unknown
/// keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Model in the `kind:key=value,...` mini-language. A config file may
    /// also give a `[model]` table with a `type` key.
    #[serde(deserialize_with = "model_field")]
    pub model: String,
    pub lambda: Grid,
    pub u: Grid,
    /// Upper barrier; `inf` removes it.
    pub a: f64,
    pub alpha: Grid,
    pub beta: Grid,
    pub gamma: f64,
    pub delta: f64,
    pub k: u32,
    /// Finite epoch horizon, used by I3 and by simulations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    pub include_t0: bool,
    pub n: Count,
    pub seed: Count,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub ids: IdList,
    pub lower: Mode,
    pub upper: Mode,
    pub target: Target,
    pub reflection: ReflectionMode,
    pub rhs: RhsMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: "bm:mu=1,sigma=1.4142135623730951".into(),
            lambda: Grid::Value(1.0),
            u: Grid::Value(0.5),
            a: 2.0,
            alpha: Grid::Value(0.5),
            beta: Grid::Value(0.3),
            gamma: 0.4,
            delta: 1.0,
            k: 2,
            horizon: None,
            include_t0: true,
            n: Count(1_000_000),
            seed: Count(0),
            threshold: 4.0,
            format: None,
            out: None,
            threads: 0,
            t_max: None,
            ids: IdList(IdentityId::ALL.to_vec()),
            lower: Mode(Some(Detection::Poisson)),
            upper: Mode(None),
            target: Target::Lower,
            reflection: ReflectionMode::None,
            rhs: RhsMode::Auto,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {}", e.message())))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Checks every field; called before any computation.
    pub fn validate(&self) -> Result<()> {
        parse_model(&self.model)?;
        for (name, g) in [("lambda", &self.lambda), ("u", &self.u), ("alpha", &self.alpha), ("beta", &self.beta)] {
            g.validate(name)?;
            if g.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if self.lambda.values().iter().any(|&l| !(l > 0.0)) {
            return Err(Error::invalid("lambda must be positive"));
        }
        for (name, g) in [("alpha", &self.alpha), ("beta", &self.beta)] {
            if g.values().iter().any(|&v| v < 0.0) {
                return Err(Error::invalid(format!("{name} must be non-negative")));
            }
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::invalid(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        if self.a.is_nan() || self.a == f64::NEG_INFINITY {
            return Err(Error::invalid(format!("a must be a number or inf, got {}", self.a)));
        }
        if self.n.0 < 2 {
            return Err(Error::invalid(format!("n must be at least 2, got {}", self.n.0)));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::invalid(format!("threshold must be positive, got {}", self.threshold)));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return Err(Error::invalid(format!("t_max must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn model_table_matches_string() {
        let c = RunConfig::from_toml("n = 1000\n[model]\ntype = \"cl\"\nc = 2\nrate = 1.0\njump = \"exp(1)\"\n").unwrap();
        c.validate().unwrap();
        assert_eq!(parse_model(&c.model).unwrap(), parse_model("cl:c=2,rate=1,jump=exp(1)").unwrap());
        assert!(RunConfig::from_toml("[model]\nmu = 1\n").is_err());
    }

    #[test]
    fn grids_parse_and_expand() {
        let g: Grid = "0:2:0.5".parse().unwrap();
        assert_eq!(g.values(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.len(), 5);
        let g: Grid = "0:1:0.1".parse().unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!("1,3".parse::<Grid>().unwrap().values(), vec![1.0, 3.0]);
        assert!("2:1:0.5".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
    }

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!("1e6".parse::<Count>().unwrap(), Count(1_000_000));
        assert_eq!("250".parse::<Count>().unwrap(), Count(250));
        assert!("1.5".parse::<Count>().is_err());
        assert!("-3".parse::<Count>().is_err());
    }

    #[test]
    fn modes_round_trip() {
        for s in ["none", "continuous", "poisson", "parisian:3", "run:2"] {
            assert_eq!(s.parse::<Mode>().unwrap().to_string(), s);
        }
        assert!("parisian".parse::<Mode>().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("lamda = 2").is_err());
        let c = RunConfig::from_toml("lambda = 2\nu = \"0:1:0.5\"\nn = 1e5").unwrap();
        assert_eq!(c.lambda, Grid::Value(2.0));
        assert_eq!(c.u.len(), 3);
        assert_eq!(c.n, Count(100_000));
    }

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        let c = RunConfig {
            a: f64::INFINITY,
            horizon: Some(3),
            format: Some(Format::Csv),
            t_max: Some(12.5),
            ids: IdList(vec![IdentityId::I2, IdentityId::I13]),
            ..c
        };
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    proptest! {
        #[test]
        fn dumped_configs_reparse(
            u in -10.0f64..10.0,
            lo in 0.0f64..5.0,
            span in 0.0f64..5.0,
            step in 0.01f64..1.0,
            gamma in 0.0f64..3.0,
            delta in 0.0f64..=1.0,
            seed in any::<u64>(),
            n in 2u64..10_000_000,
            k in 0u32..10,
        ) {
            let c = RunConfig {
                u: Grid::Value(u),
                alpha: Grid::Range { start: lo, stop: lo + span, step },
                beta: Grid::List(vec![lo, lo + span]),
                gamma,
                delta,
                seed: Count(seed),
                n: Count(n),
                k,
                lower: Mode(Some(Detection::ErlangParisian(k))),
                ..RunConfig::default()
            };
            prop_assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        }
    }
}
