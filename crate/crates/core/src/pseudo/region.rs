use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::Family;

/// Which sufficient condition for `T_[a]: X_p^{s1,q} → X_p^{s2,t}`,
/// `a ∈ S^m_{0,0}`, applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// F: `m − s1 + s2 < −d|1/2 − 1/p|`.
    F1,
    /// F: `p = 2`, `q ≤ 2 ≤ t`, `m − s1 + s2 = 0`.
    F2,
    /// F: `p < 2`, `p ≤ t`, `m − s1 + s2 = −d(1/p − 1/2)`.
    F3,
    /// F: `p > 2`, `q ≤ p`, `m − s1 + s2 = −d(1/2 − 1/p)`.
    F4,
    /// B: `m − s1 + s2 < −d|1/2 − 1/p|`.
    B1,
    /// B: `q ≤ t`, `m − s1 + s2 = −d|1/2 − 1/p|`.
    B2,
    Outside,
}

impl Region {
    pub fn id(&self) -> &'static str {
        match self {
            Region::F1 => "F1",
            Region::F2 => "F2",
            Region::F3 => "F3",
            Region::F4 => "F4",
            Region::B1 => "B1",
            Region::B2 => "B2",
            Region::Outside => "outside",
        }
    }

    pub fn is_bounded(&self) -> bool {
        *self != Region::Outside
    }
}

const EQ_TOL: f64 = 1e-12;

/// Pure decision on exponents in `(0, ∞]` (infinite exponents as
/// `f64::INFINITY`); equalities are tested to 1e-12.
#[allow(clippy::too_many_arguments)]
pub fn boundedness_region(
    family: Family,
    dim: usize,
    m: f64,
    s1: f64,
    s2: f64,
    p: f64,
    q: f64,
    t: f64,
) -> Result<Region> {
    for (name, v) in [("p", p), ("q", q), ("t", t)] {
        if !(v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} must lie in (0, inf], got {v}")));
        }
    }
    if !(m.is_finite() && s1.is_finite() && s2.is_finite()) || !(1..=2).contains(&dim) {
        return Err(Error::InvalidParameter("m, s1, s2 must be finite and dim 1 or 2".into()));
    }
    let d = dim as f64;
    let excess = m - s1 + s2;
    let critical = -d * (0.5 - 1.0 / p).abs();
    let strict = excess < critical - EQ_TOL;
    let on_line = (excess - critical).abs() <= EQ_TOL;
    let region = match family {
        Family::TriebelLizorkin => {
            if strict {
                Region::F1
            } else if !on_line {
                Region::Outside
            } else if p == 2.0 && q <= 2.0 && t >= 2.0 {
                Region::F2
            } else if p < 2.0 && p <= t {
                Region::F3
            } else if p > 2.0 && q <= p {
                Region::F4
            } else {
                Region::Outside
            }
        }
        Family::Besov => {
            if strict {
                Region::B1
            } else if on_line && q <= t {
                Region::B2
            } else {
                Region::Outside
            }
        }
    };
    Ok(region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Family::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn triebel_cases() {
        // p = 1, d = 1: critical line -1/2
        assert_eq!(boundedness_region(TriebelLizorkin, 1, -0.6, 0.0, 0.0, 1.0, 2.0, 1.0).unwrap(), Region::F1);
        assert_eq!(boundedness_region(TriebelLizorkin, 1, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0).unwrap(), Region::F2);
        assert_eq!(boundedness_region(TriebelLizorkin, 1, 0.0, 0.0, 0.0, 2.0, 3.0, 2.0).unwrap(), Region::Outside);
        assert_eq!(boundedness_region(TriebelLizorkin, 1, -0.5, 0.0, 0.0, 1.0, INF, 1.0).unwrap(), Region::F3);
        assert_eq!(boundedness_region(TriebelLizorkin, 1, -0.5, 0.0, 0.0, 1.0, 1.0, 0.5).unwrap(), Region::Outside);
        // s-shift moves the line: m - s1 + s2 = -1 with d = 2, p = 1
        assert_eq!(boundedness_region(TriebelLizorkin, 2, 0.0, 1.5, 0.5, 1.0, 1.0, 1.0).unwrap(), Region::F3);
        assert_eq!(boundedness_region(TriebelLizorkin, 1, -0.25, 0.0, 0.0, 4.0, 4.0, 0.1).unwrap(), Region::F4);
        assert_eq!(boundedness_region(TriebelLizorkin, 1, -0.5, 0.0, 0.0, INF, 1.0, 1.0).unwrap(), Region::F4);
        assert_eq!(boundedness_region(TriebelLizorkin, 1, -0.25, 0.0, 0.0, 4.0, 5.0, 1.0).unwrap(), Region::Outside);
        assert_eq!(boundedness_region(TriebelLizorkin, 1, 0.1, 0.0, 0.0, 2.0, 1.0, 3.0).unwrap(), Region::Outside);
    }

    #[test]
    fn besov_cases() {
        assert_eq!(boundedness_region(Besov, 1, -0.6, 0.0, 0.0, 1.0, 9.0, 0.1).unwrap(), Region::B1);
        assert_eq!(boundedness_region(Besov, 1, 0.0, 0.0, 0.0, 2.0, INF, INF).unwrap(), Region::B2);
        assert_eq!(boundedness_region(Besov, 1, 0.0, 0.0, 0.0, 2.0, INF, 1.0).unwrap(), Region::Outside);
        assert!(boundedness_region(Besov, 1, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(Region::B2.is_bounded() && !Region::Outside.is_bounded());
        assert_eq!(Region::F3.id(), "F3");
    }
}
