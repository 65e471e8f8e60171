//! Sign and value deviations of exponent tuples, and the lattice rescaling
//! that turns a cyclic crystal into a Dieudonne-Fontaine one.
//!
//! A tuple `(n_1, ..., n_l)` describes the cyclic crystal
//! `phi(e_i) = p^{n_i} e_{i+1}` with indices read modulo `l`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExponentTuple(Vec<i64>);

impl ExponentTuple {
    pub fn new(entries: Vec<i64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::BadShape("exponent tuple must be nonempty".into()));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().sum()
    }

    /// Cyclic access.
    pub fn at(&self, i: isize) -> i64 {
        let l = self.0.len() as isize;
        self.0[i.rem_euclid(l) as usize]
    }

    pub fn rotated(&self, k: usize) -> Self {
        let mut v = self.0.clone();
        let l = v.len();
        v.rotate_left(k % l);
        Self(v)
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }
}

impl fmt::Display for ExponentTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for ExponentTuple {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('(').trim_end_matches(')');
        let entries = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i64>()
                    .map_err(|_| Error::Parse(format!("`{}` is not an integer", t.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }
}

/// Which one-sided deviation a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Windows whose suffix sums are all `<= 0`; the target is a tuple with
    /// nonnegative entries.
    NonNegative,
    /// Windows whose suffix sums are all `>= 0`.
    NonPositive,
}

/// Visits every window `[end - len + 1, end]` (cyclic, `len <= l`) whose
/// suffix sums all lie on the required side of zero, reporting
/// `(end, len, window_sum)`.
fn for_each_window(tau: &ExponentTuple, side: Side, mut f: impl FnMut(usize, usize, i64)) {
    let l = tau.len();
    for end in 0..l {
        let mut acc = 0i64;
        for len in 1..=l {
            acc += tau.at(end as isize + 1 - len as isize);
            let ok = match side {
                Side::NonNegative => acc <= 0,
                Side::NonPositive => acc >= 0,
            };
            if !ok {
                break;
            }
            f(end, len, acc);
        }
    }
}

pub fn one_sided_sign_deviation(tau: &ExponentTuple, side: Side) -> u64 {
    let mut best = 0u64;
    for_each_window(tau, side, |_, _, s| best = best.max(s.unsigned_abs()));
    best
}

pub fn one_sided_value_deviation(tau: &ExponentTuple, side: Side) -> u64 {
    tau.entries()
        .iter()
        .filter(|&&x| match side {
            Side::NonNegative => x < 0,
            Side::NonPositive => x > 0,
        })
        .map(|x| x.unsigned_abs())
        .sum()
}

fn two_sided(tau: &ExponentTuple, f: impl Fn(&ExponentTuple, Side) -> u64) -> u64 {
    match tau.sum().signum() {
        1 => f(tau, Side::NonNegative),
        -1 => f(tau, Side::NonPositive),
        _ => f(tau, Side::NonNegative).min(f(tau, Side::NonPositive)),
    }
}

pub fn sign_deviation(tau: &ExponentTuple) -> u64 {
    two_sided(tau, one_sided_sign_deviation)
}

pub fn value_deviation(tau: &ExponentTuple) -> u64 {
    two_sided(tau, one_sided_value_deviation)
}

/// `(S, W)`.
pub fn deviations(tau: &ExponentTuple) -> (u64, u64) {
    (sign_deviation(tau), value_deviation(tau))
}

/// Certified upper bound for the Dieudonne-Fontaine torsion of the cyclic
/// crystal on `tau`.
pub fn torsion_upper_from_tuple(tau: &ExponentTuple) -> u64 {
    sign_deviation(tau)
}

/// Output of [`df_reduce`]: the sublattice spanned by `p^{a_i} e_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DfReduction {
    pub rescale: Vec<u32>,
    /// Exponents of the cyclic crystal on the rescaled basis.
    pub tuple: Vec<i64>,
    /// Each cycle lists basis indices in the order `phi` visits them.
    pub cycles: Vec<Vec<usize>>,
    pub side: Side,
}

impl DfReduction {
    pub fn max_rescale(&self) -> u32 {
        self.rescale.iter().copied().max().unwrap_or(0)
    }

    /// Length of `M / Lambda`.
    pub fn cokernel_length(&self) -> u64 {
        self.rescale.iter().map(|&a| a as u64).sum()
    }

    pub fn is_uniform(&self) -> bool {
        self.cycles.iter().all(|c| {
            c.iter().all(|&i| self.tuple[i] >= 0) || c.iter().all(|&i| self.tuple[i] <= 0)
        })
    }
}

/// Operated windows for the nonnegative side, as `(start, len)` pairs with
/// `start` in `0..l`. Each round takes the longest window of inoperated
/// entries with all suffix sums `<= 0`; among equally long ones the one
/// with the smallest end index.
fn operated_windows(tau: &ExponentTuple) -> Vec<(usize, usize)> {
    let l = tau.len();
    let mut operated = vec![false; l];
    let mut out = Vec::new();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for end in 0..l {
            let mut acc = 0i64;
            for len in 1..=l {
                let idx = (end as isize + 1 - len as isize).rem_euclid(l as isize) as usize;
                if operated[idx] {
                    break;
                }
                acc += tau.0[idx];
                if acc > 0 {
                    break;
                }
                if best.map_or(true, |(_, bl)| len > bl) {
                    best = Some((end, len));
                }
            }
        }
        let Some((end, len)) = best else { break };
        let start = (end as isize + 1 - len as isize).rem_euclid(l as isize) as usize;
        for k in 0..len {
            operated[(start + k) % l] = true;
        }
        out.push((start, len));
    }
    out
}

/// Rescales a cyclic crystal into a Dieudonne-Fontaine sublattice.
///
/// For a positive sum the operated windows get `a_{t-v} = -sum_{i=t-v}^{t} n_i`.
/// A negative sum is handled on the mirrored side: the same windows (suffix
/// sums `>= 0`) give a superlattice with exponents `-sum`, which is then
/// multiplied by `p^m` with `m` the largest such sum. A zero sum uses the
/// side with the smaller sign deviation, preferring the nonnegative one.
pub fn df_reduce(tau: &ExponentTuple) -> DfReduction {
    let l = tau.len();
    let side = match tau.sum().signum() {
        1 => Side::NonNegative,
        -1 => Side::NonPositive,
        _ => {
            if one_sided_sign_deviation(tau, Side::NonNegative)
                <= one_sided_sign_deviation(tau, Side::NonPositive)
            {
                Side::NonNegative
            } else {
                Side::NonPositive
            }
        }
    };
    let work = match side {
        Side::NonNegative => tau.clone(),
        Side::NonPositive => tau.negated(),
    };
    // exps[i] = -n_{i,t} on operated entries (>= 0 on the working side).
    let mut exps = vec![0i64; l];
    for (start, len) in operated_windows(&work) {
        let mut acc = 0i64;
        for k in (0..len).rev() {
            let idx = (start + k) % l;
            acc += work.0[idx];
            exps[idx] = -acc;
        }
    }
    let rescale: Vec<u32> = match side {
        Side::NonNegative => exps.iter().map(|&a| a as u32).collect(),
        Side::NonPositive => {
            let m = exps.iter().copied().max().unwrap_or(0);
            exps.iter().map(|&a| (m - a) as u32).collect()
        }
    };
    let tuple = (0..l)
        .map(|i| tau.0[i] + rescale[i] as i64 - rescale[(i + 1) % l] as i64)
        .collect();
    DfReduction {
        rescale,
        tuple,
        cycles: vec![(0..l).collect()],
        side,
    }
}
