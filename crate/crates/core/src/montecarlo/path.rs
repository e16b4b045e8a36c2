//! Path simulation for exit functionals.
//!
//! A path is cut at jump epochs, observation epochs, the killing time and the
//! truncation horizon. Between cuts it is a drifted Brownian motion whose
//! endpoint is Gaussian and whose extremes are sampled exactly from the bridge
//! law, so continuous detection has no grid bias. Discounting at rate `alpha`
//! is realised by killing at an independent Exp(alpha) time.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::bridge::{bridge_extremes, bridge_max, bridge_min, extreme_time};
use crate::error::{Error, Result};
use crate::exit::{Detection, ExitQuery, Reflection, Target};
use crate::levy_model::LevyModel;

/// Early stopping tolerance: a path is abandoned once its remaining payoff is
/// bounded by this value.
pub const STOP_TOL: f64 = 1e-7;
/// Truncation horizon when the mean drift vanishes.
pub const FALLBACK_T_MAX: f64 = 1e4;

/// Default truncation horizon `(40 sd / |mean|)^2`, so that the drift exceeds
/// 40 standard deviations of the position at the horizon.
pub fn default_t_max(model: &LevyModel) -> f64 {
    let mean = model.mean();
    if mean == 0.0 {
        return FALLBACK_T_MAX;
    }
    let t = (40.0 * model.variance().sqrt() / mean.abs()).powi(2);
    if t.is_finite() && t > 0.0 {
        t
    } else {
        FALLBACK_T_MAX
    }
}

/// Sampling view of a model.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dynamics<'a> {
    model: &'a LevyModel,
    drift: f64,
    sigma: f64,
    rate: f64,
}

impl<'a> Dynamics<'a> {
    pub fn new(model: &'a LevyModel) -> Self {
        Dynamics {
            model,
            drift: model.drift(),
            sigma: model.sigma(),
            rate: model.total_jump_rate(),
        }
    }

    fn jump_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.rate > 0.0 {
            rng.sample::<f64, _>(Exp1) / self.rate
        } else {
            f64::INFINITY
        }
    }

    fn advance<R: Rng + ?Sized>(&self, x: f64, l: f64, rng: &mut R) -> f64 {
        if self.sigma > 0.0 {
            x + self.drift * l + self.sigma * l.sqrt() * rng.sample::<f64, _>(StandardNormal)
        } else {
            x + self.drift * l
        }
    }

    fn piece_min<R: Rng + ?Sized>(&self, x0: f64, x1: f64, l: f64, rng: &mut R) -> f64 {
        if self.sigma > 0.0 {
            bridge_min(x0, x1, self.sigma * self.sigma * l, rng.sample(Exp1))
        } else {
            x0.min(x1)
        }
    }

    fn piece_max<R: Rng + ?Sized>(&self, x0: f64, x1: f64, l: f64, rng: &mut R) -> f64 {
        if self.sigma > 0.0 {
            bridge_max(x0, x1, self.sigma * self.sigma * l, rng.sample(Exp1))
        } else {
            x0.max(x1)
        }
    }

    /// Extremum over `[0, T_1]` with `T_1 ~ Exp(lambda)`, with its time, plus
    /// the endpoint. `upper` selects the supremum (last time of occurrence)
    /// instead of the infimum (first time).
    pub fn extreme_run<R: Rng + ?Sized>(&self, lambda: f64, upper: bool, rng: &mut R) -> ExtremeRun {
        enum Where {
            Point(f64),
            Piece { t0: f64, da: f64, db: f64, l: f64 },
        }
        let horizon = rng.sample::<f64, _>(Exp1) / lambda;
        let sign = if upper { -1.0 } else { 1.0 };
        // work with s * X so that the extremum is always a minimum
        let (mut t, mut x) = (0.0, 0.0);
        let mut best = 0.0;
        let mut at = Where::Point(0.0);
        let better = |v: f64, best: f64| if upper { v <= best } else { v < best };
        loop {
            let t_next = (t + self.jump_gap(rng)).min(horizon);
            let l = t_next - t;
            let x1 = sign * self.advance(sign * x, l, rng);
            if self.sigma > 0.0 && l > 0.0 {
                let m = bridge_min(x, x1, self.sigma * self.sigma * l, rng.sample(Exp1)).min(x).min(x1);
                if better(m, best) {
                    best = m;
                    at = Where::Piece {
                        t0: t,
                        da: (x - m) / self.sigma,
                        db: (x1 - m) / self.sigma,
                        l,
                    };
                }
            } else if better(x1, best) {
                best = x1;
                at = Where::Point(t_next);
            }
            t = t_next;
            x = x1;
            if t >= horizon {
                break;
            }
            x += sign * self.model.sample_jump(rng);
            if better(x, best) {
                best = x;
                at = Where::Point(t);
            }
        }
        let time = match at {
            Where::Point(s) => s,
            Where::Piece { t0, da, db, l } => t0 + extreme_time(da, db, l, rng),
        };
        ExtremeRun {
            value: sign * best,
            time,
            end_value: sign * x,
            end_time: horizon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ExtremeRun {
    pub value: f64,
    pub time: f64,
    pub end_value: f64,
    pub end_time: f64,
}

/// Result of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PathOutcome {
    pub value: f64,
    pub truncated: bool,
    pub stopped: bool,
}

impl PathOutcome {
    fn miss() -> Self {
        PathOutcome {
            value: 0.0,
            truncated: false,
            stopped: false,
        }
    }

    fn hit(value: f64) -> Self {
        PathOutcome { value, ..Self::miss() }
    }
}

#[derive(Default)]
struct Counters {
    run_low: u32,
    run_up: u32,
    par_low: u32,
    par_up: u32,
}

enum Exit {
    Lower(f64),
    Upper(f64),
}

/// A validated exit query compiled for simulation.
#[derive(Debug, Clone)]
pub(crate) struct PathPlan {
    lambda: f64,
    include_t0: bool,
    lower: Option<Detection>,
    upper: Option<Detection>,
    a: f64,
    target: Target,
    reflection: Option<Reflection>,
    delta: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    horizon: Option<u32>,
    t_max: f64,
    stop_low: f64,
    stop_up: f64,
    need_min: bool,
    need_max: bool,
}

impl PathPlan {
    pub fn new(model: &LevyModel, q: &ExitQuery, include_t0: bool, t_max: Option<f64>) -> Result<Self> {
        q.validate()?;
        let q = &ExitQuery {
            reflection: q.reflection.filter(|_| q.a.is_finite()),
            ..*q
        };
        let lower = q.lower();
        let upper = q.upper();
        let parisian = |d: Option<Detection>| matches!(d, Some(Detection::ErlangParisian(_)));
        if q.reflection == Some(Reflection::Continuous) && parisian(lower) {
            return Err(Error::InconsistentQuery(
                "Parisian detection needs interval suprema, which continuous reflection does not expose".into(),
            ));
        }
        let t_max = match t_max {
            Some(t) => t,
            None if q.alpha > 0.0 => f64::INFINITY,
            None => default_t_max(model),
        };
        if !(t_max > 0.0) {
            return Err(Error::invalid(format!("t_max must be positive, got {t_max}")));
        }
        let threshold = (1.0 / STOP_TOL).ln();
        let stop_low = match (q.target, q.reflection) {
            (Target::Lower, None) => model.lundberg_exponent().map_or(f64::INFINITY, |r| threshold / r),
            _ => f64::INFINITY,
        };
        let stop_up = match q.target {
            Target::Upper => model
                .negated()
                .lundberg_exponent()
                .map_or(f64::INFINITY, |r| threshold / r),
            Target::Lower => f64::INFINITY,
        };
        Ok(PathPlan {
            lambda: q.lambda,
            include_t0,
            lower,
            upper,
            a: if upper.is_some() || q.reflection.is_some() { q.a.level() } else { f64::INFINITY },
            target: q.target,
            reflection: q.reflection,
            delta: q.delta,
            alpha: q.alpha,
            beta: q.beta,
            gamma: q.gamma,
            horizon: q.horizon,
            t_max,
            stop_low,
            stop_up,
            need_min: lower == Some(Detection::Continuous) || parisian(upper),
            need_max: upper == Some(Detection::Continuous)
                || parisian(lower)
                || q.reflection == Some(Reflection::Continuous),
        })
    }

    fn payoff(&self, exit: Exit, r: f64) -> PathOutcome {
        match (exit, self.target) {
            (Exit::Lower(y), Target::Lower) => PathOutcome::hit((self.beta * y - self.gamma * r).exp()),
            (Exit::Upper(overshoot), Target::Upper) => PathOutcome::hit((-self.beta * overshoot).exp()),
            _ => PathOutcome::miss(),
        }
    }

    /// Detection at an observation epoch. `interval` holds the supremum and
    /// infimum of `X` since the previous epoch (absent at `T_0`), `r_prev`
    /// the regulator in force during that interval.
    fn observe(&self, x: f64, r: f64, r_prev: f64, interval: Option<(f64, f64)>, c: &mut Counters) -> Option<Exit> {
        let y = x - self.delta * r;
        let bump = |flag: bool, n: &mut u32| {
            *n = if flag { *n + 1 } else { 0 };
            *n
        };
        match self.lower {
            Some(Detection::Poisson) if y < 0.0 => return Some(Exit::Lower(y)),
            Some(Detection::ObservedRun(k)) => {
                if bump(y < 0.0, &mut c.run_low) > k {
                    return Some(Exit::Lower(y));
                }
            }
            Some(Detection::ErlangParisian(k)) => {
                if let Some((sup, _)) = interval {
                    if bump(sup - self.delta * r_prev < 0.0, &mut c.par_low) + 1 >= k {
                        return Some(Exit::Lower(y));
                    }
                }
            }
            _ => {}
        }
        match self.upper {
            Some(Detection::Poisson) if x > self.a => return Some(Exit::Upper(x - self.a)),
            Some(Detection::ObservedRun(k)) => {
                if bump(x > self.a, &mut c.run_up) > k {
                    return Some(Exit::Upper(x - self.a));
                }
            }
            Some(Detection::ErlangParisian(k)) => {
                if let Some((_, inf)) = interval {
                    if bump(inf > self.a, &mut c.par_up) + 1 >= k {
                        return Some(Exit::Upper(x - self.a));
                    }
                }
            }
            _ => {}
        }
        None
    }

    fn extremes<R: Rng + ?Sized>(
        &self,
        dy: &Dynamics,
        x0: f64,
        x1: f64,
        l: f64,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        Ok(match (self.need_min, self.need_max) {
            (false, false) => (x0.min(x1), x0.max(x1)),
            (true, false) => (dy.piece_min(x0, x1, l, rng), x0.max(x1)),
            (false, true) => (x0.min(x1), dy.piece_max(x0, x1, l, rng)),
            (true, true) if dy.sigma > 0.0 && l > 0.0 => {
                let e = bridge_extremes(x0, x1, dy.sigma, l, false, rng)?;
                (e.inf, e.sup)
            }
            (true, true) => (x0.min(x1), x0.max(x1)),
        })
    }

    /// Simulates one path started at `u`.
    pub fn run<R: Rng + ?Sized>(&self, dy: &Dynamics, u: f64, rng: &mut R) -> Result<PathOutcome> {
        let (a, delta) = (self.a, self.delta);
        let continuous_low = self.lower == Some(Detection::Continuous);
        let continuous_up = self.upper == Some(Detection::Continuous);
        let mut x = u;
        let mut xbar = u;
        let mut obs_max = f64::NEG_INFINITY;
        let mut r = match self.reflection {
            Some(Reflection::Continuous) => (u - a).max(0.0),
            _ => 0.0,
        };
        let mut c = Counters::default();
        if self.include_t0 && self.reflection == Some(Reflection::Poisson) {
            obs_max = u;
            r = (u - a).max(0.0);
        }
        if continuous_low && x - delta * r < 0.0 {
            return Ok(self.payoff(Exit::Lower(x - delta * r), r));
        }
        if continuous_up && x > a {
            return Ok(self.payoff(Exit::Upper(x - a), r));
        }
        if self.include_t0 {
            if let Some(e) = self.observe(x, r, r, None, &mut c) {
                return Ok(self.payoff(e, r));
            }
            if self.horizon == Some(0) {
                return Ok(PathOutcome::miss());
            }
        }
        let kill = if self.alpha > 0.0 {
            rng.sample::<f64, _>(Exp1) / self.alpha
        } else {
            f64::INFINITY
        };
        let end = kill.min(self.t_max);
        let mut t = 0.0;
        let mut next_jump = dy.jump_gap(rng);
        let mut next_epoch = rng.sample::<f64, _>(Exp1) / self.lambda;
        let mut epoch = 0u32;
        let (mut isup, mut iinf) = (x, x);
        loop {
            let t_next = next_jump.min(next_epoch).min(end);
            let l = t_next - t;
            let x1 = dy.advance(x, l, rng);
            let (m, mx) = self.extremes(dy, x, x1, l, rng)?;
            if continuous_low && m < delta * r {
                return Ok(self.payoff(Exit::Lower(0.0), r));
            }
            if continuous_up && mx > a {
                return Ok(self.payoff(Exit::Upper(0.0), r));
            }
            isup = isup.max(mx);
            iinf = iinf.min(m);
            if self.reflection == Some(Reflection::Continuous) && mx > xbar {
                xbar = mx;
                r = (xbar - a).max(0.0);
            }
            t = t_next;
            x = x1;
            if t >= end {
                return Ok(PathOutcome {
                    truncated: t < kill,
                    ..PathOutcome::miss()
                });
            }
            if t == next_jump {
                x += dy.model.sample_jump(rng);
                isup = isup.max(x);
                iinf = iinf.min(x);
                if self.reflection == Some(Reflection::Continuous) && x > xbar {
                    xbar = x;
                    r = (xbar - a).max(0.0);
                }
                if continuous_low && x - delta * r < 0.0 {
                    return Ok(self.payoff(Exit::Lower(x - delta * r), r));
                }
                if continuous_up && x > a {
                    return Ok(self.payoff(Exit::Upper(x - a), r));
                }
                next_jump = t + dy.jump_gap(rng);
            } else {
                epoch += 1;
                let r_prev = r;
                if self.reflection == Some(Reflection::Poisson) && x > obs_max {
                    obs_max = x;
                    r = (obs_max - a).max(0.0);
                }
                if let Some(e) = self.observe(x, r, r_prev, Some((isup, iinf)), &mut c) {
                    return Ok(self.payoff(e, r));
                }
                if self.horizon.is_some_and(|h| epoch >= h) {
                    return Ok(PathOutcome::miss());
                }
                isup = x;
                iinf = x;
                next_epoch = t + rng.sample::<f64, _>(Exp1) / self.lambda;
            }
            if x - delta * r > self.stop_low
                || a - x > self.stop_up
                || (self.gamma > 0.0 && (-self.gamma * r).exp() < STOP_TOL)
            {
                return Ok(PathOutcome {
                    stopped: true,
                    ..PathOutcome::miss()
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exit::Barrier;
    use crate::levy_model::JumpDistribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bm() -> LevyModel {
        LevyModel::brownian(1.0, 2f64.sqrt()).unwrap()
    }

    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(2.0, 1.0, JumpDistribution::exponential(1.0).unwrap()).unwrap()
    }

    fn mean_of(plan: &PathPlan, model: &LevyModel, u: f64, n: usize, seed: u64) -> f64 {
        let dy = Dynamics::new(model);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| plan.run(&dy, u, &mut rng).unwrap().value).sum::<f64>() / n as f64
    }

    #[test]
    fn negative_start_is_observed_at_time_zero() {
        let q = ExitQuery::ruin(-0.1, 1.0, Detection::Poisson);
        let plan = PathPlan::new(&bm(), &q, true, None).unwrap();
        assert_eq!(mean_of(&plan, &bm(), -0.1, 100, 1), 1.0);
        let plan = PathPlan::new(&bm(), &q, false, None).unwrap();
        assert!(mean_of(&plan, &bm(), -0.1, 2000, 1) < 1.0);
    }

    #[test]
    fn creeping_crossing_lands_on_the_barrier() {
        // beta large: any overshoot would be visible as a payoff below one
        let q = ExitQuery::up_crossing(0.0, 1.0, 1.0, Detection::Continuous).with_discount(0.0, 5.0);
        for model in [bm(), cl()] {
            let plan = PathPlan::new(&model, &q, true, None).unwrap();
            let dy = Dynamics::new(&model);
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            for _ in 0..500 {
                let o = plan.run(&dy, 0.0, &mut rng).unwrap();
                assert!(o.value == 1.0 || o.value == 0.0, "{o:?}");
            }
        }
    }

    #[test]
    fn detection_order_holds_pathwise() {
        // same random stream: continuous <= Poisson <= interval <= Erlang(3)
        let model = bm();
        let dy = Dynamics::new(&model);
        let modes = [
            Detection::Continuous,
            Detection::Poisson,
            Detection::ErlangParisian(2),
            Detection::ErlangParisian(3),
        ];
        for seed in 0..300 {
            let mut values = Vec::new();
            for mode in modes {
                let q = ExitQuery::ruin(0.3, 1.0, mode).with_discount(0.2, 0.0);
                let plan = PathPlan {
                    need_min: true,
                    need_max: true,
                    stop_low: f64::INFINITY,
                    ..PathPlan::new(&model, &q, true, None).unwrap()
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                values.push(plan.run(&dy, 0.3, &mut rng).unwrap().value);
            }
            // discounting by killing: an earlier passage survives at least as often
            for w in values.windows(2) {
                assert!(w[0] >= w[1], "seed {seed}: {values:?}");
            }
        }
    }

    #[test]
    fn reflection_collapses_without_penalty() {
        let model = cl();
        let dy = Dynamics::new(&model);
        let base = ExitQuery::ruin(0.5, 1.0, Detection::Poisson).with_discount(0.5, 0.3);
        let refl = ExitQuery {
            reflection: Some(Reflection::Continuous),
            a: Barrier::Infinite,
            gamma: 0.0,
            ..base
        };
        let p0 = PathPlan::new(&model, &base, true, None).unwrap();
        let p1 = PathPlan::new(&model, &refl, true, None).unwrap();
        let mut r0 = ChaCha8Rng::seed_from_u64(9);
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let a = p0.run(&dy, 0.5, &mut r0).unwrap();
            let b = p1.run(&dy, 0.5, &mut r1).unwrap();
            assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }

    #[test]
    fn wiener_hopf_runs_have_correct_signs() {
        let model = cl();
        let dy = Dynamics::new(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let d = dy.extreme_run(1.0, false, &mut rng);
            assert!(d.value <= 0.0 && d.value <= d.end_value);
            assert!((0.0..=d.end_time).contains(&d.time));
            let u = dy.extreme_run(1.0, true, &mut rng);
            assert!(u.value >= 0.0 && u.value >= u.end_value);
            assert!((0.0..=u.end_time).contains(&u.time));
        }
    }

    #[test]
    fn default_horizon_from_moments() {
        assert!((default_t_max(&bm()) - 3200.0).abs() < 1e-9);
        let flat = LevyModel::brownian(0.0, 1.0).unwrap();
        assert_eq!(default_t_max(&flat), FALLBACK_T_MAX);
    }
}
