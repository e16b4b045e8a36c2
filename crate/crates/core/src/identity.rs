//! Identity catalog ids and their parameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IdentityId {
    I1,
    I2,
    I3,
    I4,
    I5,
    I6,
    I7,
    I8,
    I9,
    I10,
    I11,
    I12,
    I13,
}

impl IdentityId {
    pub const ALL: [IdentityId; 13] = [
        IdentityId::I1,
        IdentityId::I2,
        IdentityId::I3,
        IdentityId::I4,
        IdentityId::I5,
        IdentityId::I6,
        IdentityId::I7,
        IdentityId::I8,
        IdentityId::I9,
        IdentityId::I10,
        IdentityId::I11,
        IdentityId::I12,
        IdentityId::I13,
    ];

    pub fn number(self) -> usize {
        self as usize + 1
    }

    /// Survival and two-sided probability identities carry no discounting.
    pub fn forces_undiscounted(self) -> bool {
        matches!(self, IdentityId::I1 | IdentityId::I2 | IdentityId::I3 | IdentityId::I12)
    }

    /// Parses a comma separated list, or `all`.
    pub fn parse_list(s: &str) -> Result<Vec<IdentityId>> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(IdentityId::ALL.to_vec());
        }
        s.split(',').map(|p| p.trim().parse()).collect()
    }
}

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I{}", self.number())
    }
}

impl FromStr for IdentityId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .strip_prefix('I')
            .or_else(|| s.strip_prefix('i'))
            .ok_or_else(|| Error::invalid(format!("identity id must look like I7, got {s:?}")))?;
        let n: usize = digits
            .parse()
            .map_err(|_| Error::invalid(format!("identity id must look like I7, got {s:?}")))?;
        IdentityId::ALL
            .get(n.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::invalid(format!("no identity {s}; ids run from I1 to I13")))
    }
}

/// Parameters shared by the identity catalog. Identities that do not use a
/// field ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityParams {
    pub u: f64,
    pub a: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub k: u32,
    /// Epoch index `i` of the finite horizon `T_i` in I3.
    pub horizon: u32,
    pub include_t0: bool,
}

impl Default for IdentityParams {
    fn default() -> Self {
        IdentityParams {
            u: 0.5,
            a: 2.0,
            alpha: 0.5,
            beta: 0.3,
            gamma: 0.4,
            delta: 1.0,
            k: 2,
            horizon: 2,
            include_t0: true,
        }
    }
}

impl IdentityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::invalid(format!("delta must lie in [0, 1], got {}", self.delta)));
        }
        if !(self.u >= 0.0) || !self.u.is_finite() {
            return Err(Error::invalid(format!("u must be non-negative, got {}", self.u)));
        }
        if !(self.a >= self.u) {
            return Err(Error::invalid(format!("need a >= u, got a = {}, u = {}", self.a, self.u)));
        }
        Ok(())
    }

    /// The parameters actually used for `id`: discounting and overshoot
    /// arguments are zeroed for the probability identities.
    pub fn effective(&self, id: IdentityId) -> IdentityParams {
        let mut p = *self;
        if id.forces_undiscounted() {
            p.alpha = 0.0;
            p.beta = 0.0;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_ids() {
        assert_eq!("I7".parse::<IdentityId>().unwrap(), IdentityId::I7);
        assert_eq!(IdentityId::parse_list("I1, I4").unwrap(), vec![IdentityId::I1, IdentityId::I4]);
        assert_eq!(IdentityId::parse_list("all").unwrap().len(), 13);
        assert!("I0".parse::<IdentityId>().is_err());
        assert!("I14".parse::<IdentityId>().is_err());
        assert!("X1".parse::<IdentityId>().is_err());
        assert_eq!(IdentityId::I13.to_string(), "I13");
    }

    #[test]
    fn probability_identities_drop_discounting() {
        let p = IdentityParams::default();
        assert_eq!(p.effective(IdentityId::I1).alpha, 0.0);
        assert_eq!(p.effective(IdentityId::I12).beta, 0.0);
        assert_eq!(p.effective(IdentityId::I4).alpha, 0.5);
        assert!(p.validate().is_ok());
        assert!(IdentityParams { delta: 1.5, ..p }.validate().is_err());
    }
}
