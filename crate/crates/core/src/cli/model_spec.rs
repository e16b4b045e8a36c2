//! The `kind:key=value,...` model mini-language.
//!
//! ```text
//! bm:mu=1,sigma=1.4142
//! cl:c=2,rate=1,jump=exp(1)
//! jd:mu=1,sigma=1,up_rate=0.5,up=exp(2),down_rate=0.5,down=erlang(2,3)
//! ```
//!
//! Jump laws are `exp(rate)`, `erlang(shape,rate)` and
//! `hyperexp(w1:r1;w2:r2;...)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::levy_model::{JumpDistribution, LevyModel};

/// Splits on commas that are not inside parentheses.
fn split_top(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn number(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("{key}: expected a number, got {v:?}")))
}

pub fn parse_jump(s: &str) -> Result<JumpDistribution> {
    let s = s.trim();
    let (name, rest) = s
        .split_once('(')
        .ok_or_else(|| Error::invalid(format!("jump law must look like exp(1), got {s:?}")))?;
    let args = rest
        .strip_suffix(')')
        .ok_or_else(|| Error::invalid(format!("unclosed parenthesis in {s:?}")))?;
    match name.trim() {
        "exp" => JumpDistribution::exponential(number("exp rate", args)?),
        "erlang" => {
            let (k, r) = args
                .split_once(',')
                .ok_or_else(|| Error::invalid(format!("erlang needs (shape,rate), got {s:?}")))?;
            let shape: u32 = k
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("erlang shape must be a positive integer, got {k:?}")))?;
            JumpDistribution::erlang(shape, number("erlang rate", r)?)
        }
        "hyperexp" => {
            let (mut w, mut r) = (Vec::new(), Vec::new());
            for term in args.split(';') {
                let (a, b) = term
                    .split_once(':')
                    .ok_or_else(|| Error::invalid(format!("hyperexp terms are weight:rate, got {term:?}")))?;
                w.push(number("hyperexp weight", a)?);
                r.push(number("hyperexp rate", b)?);
            }
            JumpDistribution::hyper_exponential(w, r)
        }
        other => Err(Error::invalid(format!("unknown jump law {other:?}; use exp, erlang or hyperexp"))),
    }
}

/// Parses a model spec.
pub fn parse_model(spec: &str) -> Result<LevyModel> {
    let (kind, body) = spec.trim().split_once(':').unwrap_or((spec.trim(), ""));
    let mut fields = BTreeMap::new();
    for part in split_top(body).into_iter().filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("model field must be key=value, got {part:?}")))?;
        if fields.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::invalid(format!("model field {k:?} given twice")));
        }
    }
    let mut take = |key: &str| fields.remove(key);
    let model = match kind {
        "bm" => {
            let mu = take("mu").map_or(Ok(0.0), |v| number("mu", &v))?;
            let sigma = take("sigma").map_or(Ok(1.0), |v| number("sigma", &v))?;
            LevyModel::brownian(mu, sigma)?
        }
        "cl" => {
            let c = number("c", &take("c").ok_or_else(|| Error::invalid("cl needs c"))?)?;
            let rate = number("rate", &take("rate").ok_or_else(|| Error::invalid("cl needs rate"))?)?;
            let jump = parse_jump(&take("jump").ok_or_else(|| Error::invalid("cl needs jump"))?)?;
            LevyModel::cramer_lundberg(c, rate, jump)?
        }
        "jd" => {
            let mu = take("mu").map_or(Ok(0.0), |v| number("mu", &v))?;
            let sigma = take("sigma").map_or(Ok(0.0), |v| number("sigma", &v))?;
            let up_rate = take("up_rate").map_or(Ok(0.0), |v| number("up_rate", &v))?;
            let down_rate = take("down_rate").map_or(Ok(0.0), |v| number("down_rate", &v))?;
            let placeholder = || JumpDistribution::exponential(1.0);
            let up = take("up").map_or_else(placeholder, |v| parse_jump(&v))?;
            let down = take("down").map_or_else(placeholder, |v| parse_jump(&v))?;
            LevyModel::jump_diffusion(mu, sigma, up_rate, up, down_rate, down)?
        }
        other => return Err(Error::invalid(format!("unknown model kind {other:?}; use bm, cl or jd"))),
    };
    if let Some(k) = fields.keys().next() {
        return Err(Error::invalid(format!("unknown field {k:?} for model kind {kind}")));
    }
    Ok(model)
}
