//! Drift + Brownian + compound Poisson Lévy models.
//!
//! Every model in this family has exactly simulatable paths and, when it is
//! spectrally negative, a Laplace exponent that is a rational function of
//! `theta`. The rational form is what makes partial-fraction scale functions
//! possible downstream.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Law of a jump magnitude. Magnitudes are positive; the direction of the
/// jump is given by the model slot it occupies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpDistribution {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
}

impl JumpDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        let d = JumpDistribution::Exponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn erlang(shape: u32, rate: f64) -> Result<Self> {
        let d = JumpDistribution::Erlang { shape, rate };
        d.validate()?;
        Ok(d)
    }

    pub fn hyper_exponential(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let d = JumpDistribution::HyperExponential { weights, rates };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            JumpDistribution::Exponential { rate } => check_rate(*rate),
            JumpDistribution::Erlang { shape, rate } => {
                if *shape == 0 {
                    return Err(Error::invalid("Erlang shape must be at least 1"));
                }
                check_rate(*rate)
            }
            JumpDistribution::HyperExponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return Err(Error::invalid(
                        "hyper-exponential needs matching, non-empty weight and rate lists",
                    ));
                }
                for &r in rates {
                    check_rate(r)?;
                }
                if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                    return Err(Error::invalid("hyper-exponential weights must be non-negative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!(
                        "hyper-exponential weights sum to {total}, expected 1"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            JumpDistribution::Exponential { rate } => 1.0 / rate,
            JumpDistribution::Erlang { shape, rate } => *shape as f64 / rate,
            JumpDistribution::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(p, m)| p / m).sum()
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            JumpDistribution::Exponential { rate } => 2.0 / (rate * rate),
            JumpDistribution::Erlang { shape, rate } => {
                let n = *shape as f64;
                n * (n + 1.0) / (rate * rate)
            }
            JumpDistribution::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(p, m)| 2.0 * p / (m * m)).sum()
            }
        }
    }

    /// Smallest rate among the components; `E e^{sC}` is finite for `s` below it.
    pub fn min_rate(&self) -> f64 {
        match self {
            JumpDistribution::Exponential { rate } | JumpDistribution::Erlang { rate, .. } => *rate,
            JumpDistribution::HyperExponential { rates, .. } => {
                rates.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// `E e^{-theta C}` for `theta > -min_rate`.
    pub fn laplace(&self, theta: f64) -> f64 {
        match self {
            JumpDistribution::Exponential { rate } => rate / (rate + theta),
            JumpDistribution::Erlang { shape, rate } => (rate / (rate + theta)).powi(*shape as i32),
            JumpDistribution::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(p, m)| p * m / (m + theta))
                .sum(),
        }
    }

    pub fn laplace_d1(&self, theta: f64) -> f64 {
        match self {
            JumpDistribution::Exponential { rate } => -rate / (rate + theta).powi(2),
            JumpDistribution::Erlang { shape, rate } => {
                let n = *shape as i32;
                -(n as f64) * rate.powi(n) / (rate + theta).powi(n + 1)
            }
            JumpDistribution::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(p, m)| -p * m / (m + theta).powi(2))
                .sum(),
        }
    }

    pub fn laplace_d2(&self, theta: f64) -> f64 {
        match self {
            JumpDistribution::Exponential { rate } => 2.0 * rate / (rate + theta).powi(3),
            JumpDistribution::Erlang { shape, rate } => {
                let n = *shape as i32;
                let nf = n as f64;
                nf * (nf + 1.0) * rate.powi(n) / (rate + theta).powi(n + 2)
            }
            JumpDistribution::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(p, m)| 2.0 * p * m / (m + theta).powi(3))
                .sum(),
        }
    }

    pub fn laplace_complex(&self, z: Complex64) -> Complex64 {
        match self {
            JumpDistribution::Exponential { rate } => *rate / (*rate + z),
            JumpDistribution::Erlang { shape, rate } => (*rate / (*rate + z)).powi(*shape as i32),
            JumpDistribution::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(p, m)| *p * *m / (*m + z))
                .sum(),
        }
    }

    /// `E e^{-theta C}` as `numerator / denominator` polynomials in theta.
    /// Hyper-exponential components sharing a rate are merged.
    pub(crate) fn rational_laplace(&self) -> (Poly, Poly) {
        match self {
            JumpDistribution::Exponential { rate } => {
                (Poly::constant(*rate), Poly::new(vec![*rate, 1.0]))
            }
            JumpDistribution::Erlang { shape, rate } => {
                let base = Poly::new(vec![*rate, 1.0]);
                (Poly::constant(rate.powi(*shape as i32)), base.pow(*shape))
            }
            JumpDistribution::HyperExponential { weights, rates } => {
                let mut merged: Vec<(f64, f64)> = Vec::new();
                for (&p, &m) in weights.iter().zip(rates) {
                    if p == 0.0 {
                        continue;
                    }
                    match merged.iter_mut().find(|(_, r)| *r == m) {
                        Some(entry) => entry.0 += p,
                        None => merged.push((p, m)),
                    }
                }
                let mut den = Poly::constant(1.0);
                for &(_, m) in &merged {
                    den = den.mul(&Poly::new(vec![m, 1.0]));
                }
                let mut num = Poly::constant(0.0);
                for (i, &(p, m)) in merged.iter().enumerate() {
                    let mut term = Poly::constant(p * m);
                    for (j, &(_, mj)) in merged.iter().enumerate() {
                        if i != j {
                            term = term.mul(&Poly::new(vec![mj, 1.0]));
                        }
                    }
                    num = num.add(&term);
                }
                (num, den)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpDistribution::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            JumpDistribution::Erlang { shape, rate } => {
                let mut s = 0.0;
                for _ in 0..*shape {
                    let e: f64 = Exp1.sample(rng);
                    s += e;
                }
                s / rate
            }
            JumpDistribution::HyperExponential { weights, rates } => {
                let v: f64 = rng.random();
                let mut acc = 0.0;
                let mut idx = rates.len() - 1;
                for (i, &p) in weights.iter().enumerate() {
                    acc += p;
                    if v < acc {
                        idx = i;
                        break;
                    }
                }
                let e: f64 = Exp1.sample(rng);
                e / rates[idx]
            }
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("rate must be positive and finite, got {rate}")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be non-negative and finite, got {v}")))
    }
}

/// A Lévy process made of drift, a Brownian component and compound Poisson
/// jumps in either direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LevyModel {
    BrownianMotion {
        mu: f64,
        sigma: f64,
    },
    /// Premium income at rate `c`, claims are downward jumps.
    CramerLundberg {
        c: f64,
        jump_rate: f64,
        jumps: JumpDistribution,
    },
    JumpDiffusion {
        mu: f64,
        sigma: f64,
        up_rate: f64,
        up: JumpDistribution,
        down_rate: f64,
        down: JumpDistribution,
    },
}

/// Flattened view shared by all formulas.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Parts<'a> {
    pub drift: f64,
    pub sigma: f64,
    pub up: Option<(f64, &'a JumpDistribution)>,
    pub down: Option<(f64, &'a JumpDistribution)>,
}

impl LevyModel {
    pub fn brownian(mu: f64, sigma: f64) -> Result<Self> {
        let m = LevyModel::BrownianMotion { mu, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn cramer_lundberg(c: f64, jump_rate: f64, jumps: JumpDistribution) -> Result<Self> {
        let m = LevyModel::CramerLundberg { c, jump_rate, jumps };
        m.validate()?;
        Ok(m)
    }

    pub fn jump_diffusion(
        mu: f64,
        sigma: f64,
        up_rate: f64,
        up: JumpDistribution,
        down_rate: f64,
        down: JumpDistribution,
    ) -> Result<Self> {
        let m = LevyModel::JumpDiffusion {
            mu,
            sigma,
            up_rate,
            up,
            down_rate,
            down,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LevyModel::BrownianMotion { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(Error::invalid("mu must be finite"));
                }
                check_nonneg("sigma", *sigma)?;
            }
            LevyModel::CramerLundberg { c, jump_rate, jumps } => {
                check_rate(*c).map_err(|_| Error::invalid("premium rate c must be positive"))?;
                check_rate(*jump_rate)?;
                jumps.validate()?;
            }
            LevyModel::JumpDiffusion {
                mu,
                sigma,
                up_rate,
                up,
                down_rate,
                down,
            } => {
                if !mu.is_finite() {
                    return Err(Error::invalid("mu must be finite"));
                }
                check_nonneg("sigma", *sigma)?;
                check_nonneg("up_rate", *up_rate)?;
                check_nonneg("down_rate", *down_rate)?;
                up.validate()?;
                down.validate()?;
            }
        }
        let p = self.parts();
        if p.sigma == 0.0 && p.drift == 0.0 && p.up.is_none() && p.down.is_none() {
            return Err(Error::invalid("degenerate model: no drift, volatility or jumps"));
        }
        Ok(())
    }

    pub(crate) fn parts(&self) -> Parts<'_> {
        match self {
            LevyModel::BrownianMotion { mu, sigma } => Parts {
                drift: *mu,
                sigma: *sigma,
                up: None,
                down: None,
            },
            LevyModel::CramerLundberg { c, jump_rate, jumps } => Parts {
                drift: *c,
                sigma: 0.0,
                up: None,
                down: Some((*jump_rate, jumps)),
            },
            LevyModel::JumpDiffusion {
                mu,
                sigma,
                up_rate,
                up,
                down_rate,
                down,
            } => Parts {
                drift: *mu,
                sigma: *sigma,
                up: (*up_rate > 0.0).then_some((*up_rate, up)),
                down: (*down_rate > 0.0).then_some((*down_rate, down)),
            },
        }
    }

    pub fn drift(&self) -> f64 {
        self.parts().drift
    }

    pub fn sigma(&self) -> f64 {
        self.parts().sigma
    }

    pub fn has_upward_jumps(&self) -> bool {
        self.parts().up.is_some()
    }

    /// No upward jumps and not a non-increasing process.
    pub fn is_spectrally_negative(&self) -> bool {
        let p = self.parts();
        p.up.is_none() && (p.sigma > 0.0 || p.drift > 0.0)
    }

    fn require_sn(&self) -> Result<()> {
        if self.is_spectrally_negative() {
            Ok(())
        } else {
            Err(Error::NotSpectrallyNegative)
        }
    }

    /// `psi(theta) = log E e^{theta X_1}` for spectrally negative models.
    pub fn laplace_exponent(&self, theta: f64) -> Result<f64> {
        self.require_sn()?;
        if !(theta >= 0.0) {
            return Err(Error::invalid(format!("theta must be non-negative, got {theta}")));
        }
        Ok(self.psi(theta))
    }

    pub fn laplace_exponent_derivative(&self, theta: f64) -> Result<f64> {
        self.require_sn()?;
        if !(theta >= 0.0) {
            return Err(Error::invalid(format!("theta must be non-negative, got {theta}")));
        }
        Ok(self.psi_d1(theta))
    }

    /// Unchecked exponent; valid for `theta` above minus the smallest
    /// downward jump rate. Upward jumps are ignored, so callers must have
    /// checked spectral negativity.
    pub(crate) fn psi(&self, theta: f64) -> f64 {
        let p = self.parts();
        let mut v = p.drift * theta + 0.5 * p.sigma * p.sigma * theta * theta;
        if let Some((rate, d)) = p.down {
            v += rate * (d.laplace(theta) - 1.0);
        }
        v
    }

    pub(crate) fn psi_d1(&self, theta: f64) -> f64 {
        let p = self.parts();
        let mut v = p.drift + p.sigma * p.sigma * theta;
        if let Some((rate, d)) = p.down {
            v += rate * d.laplace_d1(theta);
        }
        v
    }

    pub(crate) fn psi_d2(&self, theta: f64) -> f64 {
        let p = self.parts();
        let mut v = p.sigma * p.sigma;
        if let Some((rate, d)) = p.down {
            v += rate * d.laplace_d2(theta);
        }
        v
    }

    pub(crate) fn psi_complex(&self, z: Complex64) -> Complex64 {
        let p = self.parts();
        let mut v = p.drift * z + 0.5 * p.sigma * p.sigma * z * z;
        if let Some((rate, d)) = p.down {
            v += rate * (d.laplace_complex(z) - 1.0);
        }
        v
    }

    /// `psi(theta) - q = numerator / denominator` as polynomials in theta.
    pub(crate) fn psi_rational(&self, q: f64) -> (Poly, Poly) {
        let p = self.parts();
        let base = Poly::new(vec![-q, p.drift, 0.5 * p.sigma * p.sigma]);
        match p.down {
            None => (base, Poly::constant(1.0)),
            Some((rate, d)) => {
                let (num, den) = d.rational_laplace();
                let shifted = base.add(&Poly::constant(-rate));
                let numerator = shifted.mul(&den).add(&num.scale(rate));
                (numerator, den)
            }
        }
    }

    /// `E X_1`.
    pub fn mean(&self) -> f64 {
        let p = self.parts();
        let mut m = p.drift;
        if let Some((rate, d)) = p.up {
            m += rate * d.mean();
        }
        if let Some((rate, d)) = p.down {
            m -= rate * d.mean();
        }
        m
    }

    /// `Var X_1`.
    pub fn variance(&self) -> f64 {
        let p = self.parts();
        let mut v = p.sigma * p.sigma;
        if let Some((rate, d)) = p.up {
            v += rate * d.second_moment();
        }
        if let Some((rate, d)) = p.down {
            v += rate * d.second_moment();
        }
        v
    }

    /// True iff `E X_1 > 0`, which equals `psi'(0)` for spectrally negative models.
    pub fn net_profit_check(&self) -> bool {
        self.mean() > 0.0
    }

    /// `log E e^{s X_1}` for any model, on `(-min down rate, min up rate)`.
    pub fn cumulant(&self, s: f64) -> Option<f64> {
        let p = self.parts();
        let mut v = p.drift * s + 0.5 * p.sigma * p.sigma * s * s;
        if let Some((rate, d)) = p.up {
            if s >= d.min_rate() {
                return None;
            }
            v += rate * (d.laplace(-s) - 1.0);
        }
        if let Some((rate, d)) = p.down {
            if -s >= d.min_rate() {
                return None;
            }
            v += rate * (d.laplace(s) - 1.0);
        }
        Some(v)
    }

    /// Adjustment coefficient `r > 0` with `E e^{-r X_1} = 1`, when it exists.
    /// Gives the bound `P_x(inf X < 0) <= exp(-r x)`.
    pub fn lundberg_exponent(&self) -> Option<f64> {
        if !self.net_profit_check() {
            return None;
        }
        let k = |r: f64| self.cumulant(-r);
        let cap = self
            .parts()
            .down
            .map(|(_, d)| d.min_rate())
            .unwrap_or(f64::INFINITY);
        let mut hi = if cap.is_finite() { 0.5 * cap } else { 1.0 };
        loop {
            match k(hi) {
                Some(v) if v > 0.0 => break,
                Some(_) if cap.is_finite() => {
                    // the cumulant blows up at the pole, so a sign change lies below it
                    hi = 0.5 * (hi + cap);
                    if cap - hi < 1e-12 * cap {
                        return None;
                    }
                }
                Some(_) => {
                    hi *= 2.0;
                    if hi > 1e12 {
                        return None;
                    }
                }
                None => return None,
            }
        }
        let mut lo = 0.0;
        // cumulant(-r) < 0 just right of 0 because the mean is positive.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            match k(mid) {
                Some(v) if v > 0.0 => hi = mid,
                Some(_) => lo = mid,
                None => hi = mid,
            }
            if hi - lo < 1e-14 * hi {
                break;
            }
        }
        Some(lo)
    }

    /// Mirror image `-X`.
    pub fn negated(&self) -> LevyModel {
        let p = self.parts();
        let placeholder = JumpDistribution::Exponential { rate: 1.0 };
        let (up_rate, up) = p
            .down
            .map(|(r, d)| (r, d.clone()))
            .unwrap_or((0.0, placeholder.clone()));
        let (down_rate, down) = p
            .up
            .map(|(r, d)| (r, d.clone()))
            .unwrap_or((0.0, placeholder));
        LevyModel::JumpDiffusion {
            mu: -p.drift,
            sigma: p.sigma,
            up_rate,
            up,
            down_rate,
            down,
        }
    }

    pub(crate) fn total_jump_rate(&self) -> f64 {
        let p = self.parts();
        p.up.map_or(0.0, |(r, _)| r) + p.down.map_or(0.0, |(r, _)| r)
    }

    /// Signed jump drawn from the superposed jump law.
    pub(crate) fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p = self.parts();
        match (p.up, p.down) {
            (Some((ru, du)), Some((rd, dd))) => {
                let v: f64 = rng.random();
                if v * (ru + rd) < ru {
                    du.sample(rng)
                } else {
                    -dd.sample(rng)
                }
            }
            (Some((_, du)), None) => du.sample(rng),
            (None, Some((_, dd))) => -dd.sample(rng),
            (None, None) => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bm_ref() -> LevyModel {
        LevyModel::brownian(1.0, 2f64.sqrt()).unwrap()
    }

    fn cl_ref() -> LevyModel {
        LevyModel::cramer_lundberg(2.0, 1.0, JumpDistribution::exponential(1.0).unwrap()).unwrap()
    }

    #[test]
    fn exponent_examples() {
        assert_relative_eq!(bm_ref().laplace_exponent(1.0).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(bm_ref().laplace_exponent(0.0).unwrap(), 0.0);
        assert_eq!(cl_ref().laplace_exponent(0.0).unwrap(), 0.0);
        assert_relative_eq!(cl_ref().laplace_exponent(1.0).unwrap(), 1.5, epsilon = 1e-14);
    }

    #[test]
    fn derivative_examples() {
        assert_relative_eq!(bm_ref().laplace_exponent_derivative(0.0).unwrap(), 1.0);
        assert_relative_eq!(cl_ref().laplace_exponent_derivative(0.0).unwrap(), 1.0);
        assert_relative_eq!(bm_ref().laplace_exponent_derivative(2.0).unwrap(), 5.0, epsilon = 1e-14);
    }

    #[test]
    fn net_profit() {
        assert!(LevyModel::brownian(1.0, 1.0).unwrap().net_profit_check());
        assert!(!LevyModel::brownian(-1.0, 1.0).unwrap().net_profit_check());
        let cl = LevyModel::cramer_lundberg(1.0, 1.0, JumpDistribution::exponential(1.0).unwrap())
            .unwrap();
        assert!(!cl.net_profit_check());
    }

    #[test]
    fn rejects_two_sided() {
        let jd = LevyModel::jump_diffusion(
            0.0,
            1.0,
            1.0,
            JumpDistribution::exponential(2.0).unwrap(),
            0.0,
            JumpDistribution::exponential(1.0).unwrap(),
        )
        .unwrap();
        assert!(!jd.is_spectrally_negative());
        assert_eq!(jd.laplace_exponent(1.0), Err(Error::NotSpectrallyNegative));
        assert!(jd.negated().is_spectrally_negative());
    }

    #[test]
    fn non_increasing_is_not_spectrally_negative() {
        let m = LevyModel::jump_diffusion(
            -1.0,
            0.0,
            0.0,
            JumpDistribution::exponential(1.0).unwrap(),
            1.0,
            JumpDistribution::exponential(1.0).unwrap(),
        )
        .unwrap();
        assert!(!m.is_spectrally_negative());
    }

    #[test]
    fn validation() {
        assert!(LevyModel::brownian(0.0, 0.0).is_err());
        assert!(LevyModel::brownian(1.0, -1.0).is_err());
        assert!(JumpDistribution::hyper_exponential(vec![0.5, 0.6], vec![1.0, 2.0]).is_err());
        assert!(JumpDistribution::erlang(0, 1.0).is_err());
        assert!(JumpDistribution::exponential(0.0).is_err());
    }

    #[test]
    fn rational_form_matches_direct() {
        let models = [
            bm_ref(),
            cl_ref(),
            LevyModel::jump_diffusion(
                1.5,
                0.7,
                0.0,
                JumpDistribution::exponential(1.0).unwrap(),
                2.0,
                JumpDistribution::hyper_exponential(vec![0.3, 0.7], vec![1.0, 4.0]).unwrap(),
            )
            .unwrap(),
            LevyModel::cramer_lundberg(3.0, 1.0, JumpDistribution::erlang(3, 2.0).unwrap()).unwrap(),
        ];
        for m in &models {
            let (num, den) = m.psi_rational(0.7);
            for &t in &[0.0, 0.3, 1.0, 2.5] {
                assert_relative_eq!(
                    num.eval(t) / den.eval(t),
                    m.psi(t) - 0.7,
                    epsilon = 1e-12,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn lundberg_exponent_known_cases() {
        // psi(theta) = theta + theta^2 vanishes at -1.
        assert_relative_eq!(bm_ref().lundberg_exponent().unwrap(), 1.0, epsilon = 1e-12);
        // theta(2 theta + 1)/(1 + theta) vanishes at -1/2.
        assert_relative_eq!(cl_ref().lundberg_exponent().unwrap(), 0.5, epsilon = 1e-12);
        assert!(LevyModel::brownian(-1.0, 1.0).unwrap().lundberg_exponent().is_none());
    }

    #[test]
    fn moments_of_two_sided_model() {
        let jd = LevyModel::jump_diffusion(
            1.0,
            1.0,
            0.5,
            JumpDistribution::exponential(2.0).unwrap(),
            0.5,
            JumpDistribution::exponential(1.0).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(jd.mean(), 0.75, epsilon = 1e-15);
        assert_relative_eq!(jd.variance(), 1.0 + 0.5 * 0.5 + 0.5 * 2.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn exponent_is_convex(t1 in 0.0f64..5.0, dt in 0.0f64..5.0, w in 0.0f64..1.0) {
            let t2 = t1 + dt;
            for m in [bm_ref(), cl_ref()] {
                let mid = m.psi(w * t1 + (1.0 - w) * t2);
                let chord = w * m.psi(t1) + (1.0 - w) * m.psi(t2);
                prop_assert!(mid <= chord + 1e-12);
            }
        }

        #[test]
        fn derivative_matches_central_difference(t in 0.1f64..5.0) {
            let h = 1e-4;
            for m in [bm_ref(), cl_ref()] {
                let fd = (m.psi(t + h) - m.psi(t - h)) / (2.0 * h);
                prop_assert!((fd - m.psi_d1(t)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn exponent_superlinear_with_brownian_part() {
        let m = bm_ref();
        let ratios: Vec<f64> = [10.0, 100.0, 1000.0].iter().map(|&t| m.psi(t) / t).collect();
        assert!(ratios.windows(2).all(|w| w[1] > 5.0 * w[0]));
    }
}
