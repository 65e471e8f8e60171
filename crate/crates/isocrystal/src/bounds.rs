//! Effective upper bounds for Dieudonne torsions and truncation levels.
//!
//! These are upper bounds obtained from one explicit reading of the
//! existence argument, not the optimal constants.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundParams {
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

impl BoundParams {
    pub fn new(a: u64, b: u64, c: u64) -> Result<Self> {
        if a == 0 {
            return Err(Error::BadParams("rank must be at least 1".into()));
        }
        Ok(Self { a, b, c })
    }
}

/// `D0(1..=a, c)` as a table indexed by rank.
fn d0_table(a: u64, c: u64) -> Vec<BigUint> {
    let a = a as usize;
    let c_big = BigUint::from(c);
    let mut d = vec![BigUint::zero(); a + 1];
    for rank in 2..=a {
        let split = (1..rank)
            .map(|a1| &d[a1] + &d[rank - a1] + &c_big * rank)
            .max()
            .unwrap_or_default();
        // c_{r+1} = c_r + D0(r, c) + r! * rank * c
        let mut chain = BigUint::zero();
        let mut fact = BigUint::from(1u32);
        for r in 1..rank {
            fact *= r;
            chain += &d[r] + &fact * rank * &c_big;
        }
        d[rank] = split.max(chain);
    }
    d
}

pub fn d_plus_bound0(a: u64, c: u64) -> BigUint {
    assert!(a >= 1, "rank must be at least 1");
    d0_table(a, c).pop().unwrap()
}

pub fn d_plus_bound(p: BoundParams) -> BigUint {
    BigUint::from(p.b) * (p.a - 1) + d_plus_bound0(p.a, p.c)
}

pub fn epsilon(p: u64) -> u32 {
    if p == 2 {
        2
    } else {
        1
    }
}

pub fn n_fam_bound(v: u64, s: u64, h: u64, p: u64) -> Result<BigUint> {
    let params = BoundParams::new(v, s, h)?;
    Ok(d_plus_bound(params) * 2u32 + epsilon(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationKind {
    /// p-divisible groups of height `r`; `dim` is the dimension if known.
    PDivisible { r: u64, dim: Option<u64> },
    /// Principally quasi-polarized p-divisible groups of height `2d`.
    Polarized { d: u64 },
}

pub fn truncation_level_bound(kind: TruncationKind, p: u64) -> Result<BigUint> {
    match kind {
        TruncationKind::PDivisible { r, dim } => {
            if r == 0 {
                return Err(Error::BadParams("height must be at least 1".into()));
            }
            if matches!(dim, Some(d) if d == 0 || d == r) {
                return Ok(BigUint::zero());
            }
            n_fam_bound(r * r, 1, 2, p)
        }
        TruncationKind::Polarized { d } => {
            if d == 0 {
                return Err(Error::BadParams("polarized dimension must be at least 1".into()));
            }
            n_fam_bound(2 * d * d + d, 1, 2, p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        assert_eq!(d_plus_bound0(1, 9), BigUint::zero());
        assert_eq!(d_plus_bound0(2, 1), BigUint::from(2u32));
        for a in 1..8 {
            assert_eq!(d_plus_bound0(a, 0), BigUint::zero());
        }
        assert_eq!(
            d_plus_bound(BoundParams::new(2, 1, 1).unwrap()),
            BigUint::from(3u32)
        );
        assert_eq!(
            d_plus_bound(BoundParams::new(1, 5, 7).unwrap()),
            BigUint::zero()
        );
    }

    #[test]
    fn truncation_kinds() {
        let k = TruncationKind::PDivisible { r: 4, dim: Some(4) };
        assert_eq!(truncation_level_bound(k, 3).unwrap(), BigUint::zero());
        let k = TruncationKind::PDivisible { r: 2, dim: None };
        let b3 = truncation_level_bound(k, 3).unwrap();
        let b2 = truncation_level_bound(k, 2).unwrap();
        assert_eq!(b2, b3 + 1u32);
    }
}
