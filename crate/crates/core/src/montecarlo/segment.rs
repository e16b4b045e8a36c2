//! Exact simulation of a path over one interval, with its extremes.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::bridge::bridge_extremes;
use crate::error::{Error, Result};
use crate::levy_model::LevyModel;

/// Endpoints and extremes of a path over `[t_start, t_end]`. The infimum
/// time is the first time of occurrence, the supremum time the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub x_start: f64,
    pub x_end: f64,
    pub inf: f64,
    pub t_inf: f64,
    pub sup: f64,
    pub t_sup: f64,
}

impl PathSegment {
    fn point(t: f64, x: f64) -> Self {
        PathSegment {
            t_start: t,
            t_end: t,
            x_start: x,
            x_end: x,
            inf: x,
            t_inf: t,
            sup: x,
            t_sup: t,
        }
    }

    fn absorb_point(&mut self, t: f64, x: f64) {
        if x < self.inf {
            self.inf = x;
            self.t_inf = t;
        }
        if x >= self.sup {
            self.sup = x;
            self.t_sup = t;
        }
    }
}

/// Samples a path of `model` from 0 at time 0 over `duration`.
pub fn simulate_segment<R: Rng + ?Sized>(model: &LevyModel, duration: f64, rng: &mut R) -> Result<PathSegment> {
    simulate_segment_from(model, 0.0, 0.0, duration, rng)
}

/// Samples a path from `x0` at time `t0` over `duration`. Jump epochs are
/// drawn first; between them the path is a drifted Brownian bridge whose
/// extremes are sampled exactly (or read off the endpoints without volatility).
pub fn simulate_segment_from<R: Rng + ?Sized>(
    model: &LevyModel,
    t0: f64,
    x0: f64,
    duration: f64,
    rng: &mut R,
) -> Result<PathSegment> {
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::invalid(format!("duration must be finite and non-negative, got {duration}")));
    }
    let (drift, sigma, rate) = (model.drift(), model.sigma(), model.total_jump_rate());
    let end = t0 + duration;
    let mut seg = PathSegment::point(t0, x0);
    let (mut t, mut x) = (t0, x0);
    while t < end {
        let gap = if rate > 0.0 {
            rng.sample::<f64, _>(Exp1) / rate
        } else {
            f64::INFINITY
        };
        let t_next = (t + gap).min(end);
        let l = t_next - t;
        let x1 = if sigma > 0.0 {
            x + drift * l + sigma * l.sqrt() * rng.sample::<f64, _>(StandardNormal)
        } else {
            x + drift * l
        };
        if sigma > 0.0 && l > 0.0 {
            let e = bridge_extremes(x, x1, sigma, l, true, rng)?;
            if e.inf < seg.inf {
                seg.inf = e.inf;
                seg.t_inf = t + e.t_inf;
            }
            if e.sup >= seg.sup {
                seg.sup = e.sup;
                seg.t_sup = t + e.t_sup;
            }
        }
        seg.absorb_point(t_next, x1);
        t = t_next;
        x = x1;
        if t < end {
            x += model.sample_jump(rng);
            seg.absorb_point(t, x);
        }
    }
    seg.t_end = end;
    seg.x_end = x;
    Ok(seg)
}
