//! sigma-semilinear equations at finite precision.
//!
//! The equation `g B1 = B2 sigma(g)` is Z/p^m-linear in the coordinates of
//! `g` on the basis `1, t, ..., t^{q-1}`, so Hom modules, fixed lattices and
//! their relatives reduce to linear algebra over Z/p^m.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::crystal::FCrystal;
use crate::error::{Error, Result};
use crate::plinalg::{howell_form, kernel_mod, smith_normal_form, solve_linear_module, Matrix};
use crate::witt::{make_witt_ring, FieldCtx, WittRing};

/// Default cap on the extension degree used by the finite-field solvers.
pub const DEFAULT_DMAX: usize = 6;

/// `CRYSTAL_DMAX` from the environment, or [`DEFAULT_DMAX`].
pub fn dmax_from_env() -> usize {
    std::env::var("CRYSTAL_DMAX")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&d| d >= 1)
        .unwrap_or(DEFAULT_DMAX)
}

/// Above this many candidates the unit search samples instead of
/// enumerating.
pub const EXHAUSTIVE_LIMIT: u64 = 1 << 20;
pub const RANDOM_TRIALS: usize = 1 << 14;

pub(crate) fn flatten(g: &Matrix) -> Vec<u64> {
    g.entries().iter().flatten().copied().collect()
}

pub(crate) fn unflatten(ring: &Arc<WittRing>, rows: usize, cols: usize, v: &[u64]) -> Matrix {
    let q = ring.q();
    Matrix::from_coeffs(ring, rows, cols, v.chunks(q).map(|c| c.to_vec()).collect())
        .expect("flattened shape")
}

/// All `g` (r2 x r1) over W_m with `g B1 = B2 sigma(g)`.
#[derive(Clone, Debug)]
pub struct HomModule {
    pub ring: Arc<WittRing>,
    pub rows: usize,
    pub cols: usize,
    /// Howell-form generators.
    pub basis: Vec<Matrix>,
    /// Pivot valuations: the module is the direct sum of Z/p^{m - e}.
    pub exponents: Vec<u32>,
}

impl HomModule {
    pub fn precision(&self) -> u32 {
        self.ring.n()
    }

    /// log_p of the number of elements.
    pub fn log_size(&self) -> u64 {
        let m = self.precision();
        self.exponents.iter().map(|&e| (m - e) as u64).sum()
    }

    pub fn contains(&self, g: &Matrix) -> bool {
        if **g.ring() != *self.ring || g.rows() != self.rows || g.cols() != self.cols {
            return false;
        }
        let target = flatten(g);
        let ncols = self.basis.len();
        let a: Vec<Vec<u64>> = (0..target.len())
            .map(|i| self.basis.iter().map(|b| flatten(b)[i]).collect())
            .collect();
        if ncols == 0 {
            return target.iter().all(|&x| x == 0);
        }
        solve_linear_module(&a, &target, ncols, self.ring.p(), self.ring.n()).is_some()
    }

    /// Canonical generators of the image of this module at precision `m`.
    pub fn image_at(&self, m: u32) -> Result<Vec<Vec<u64>>> {
        let rows: Vec<Vec<u64>> = self
            .basis
            .iter()
            .map(|b| b.reduce(m).map(|r| flatten(&r)))
            .collect::<Result<_>>()?;
        if rows.is_empty() {
            return Ok(rows);
        }
        Ok(howell_form(rows, self.ring.p(), m))
    }
}

fn same_field(a: &WittRing, b: &WittRing) -> Result<()> {
    if a.p() != b.p() || a.q() != b.q() {
        return Err(Error::RingMismatch);
    }
    Ok(())
}

/// Solution module of `g B1 = B2 sigma(g)` over W_m.
pub fn hom_module(c1: &FCrystal, c2: &FCrystal, m: u32) -> Result<HomModule> {
    same_field(c1.ring(), c2.ring())?;
    if c1.shift() != c2.shift() {
        return Err(Error::ShiftUnsupported);
    }
    let n = c1.ring().n().min(c2.ring().n());
    if m == 0 || m > n {
        return Err(Error::PrecisionExhausted {
            needed: m,
            available: n,
        });
    }
    let b1 = c1.matrix().reduce(m)?;
    let b2 = c2.matrix().reduce(m)?;
    let ring = b1.ring().clone();
    Ok(linear_module(&ring, c2.rank(), c1.rank(), |g| {
        vec![g.mul(&b1).sub(&b2.mul(&g.sigma()))]
    }))
}

/// All `g` (rows x cols over `ring`) with `cond(g) = 0`, for a condition
/// that is additive and Z/p^m-linear in `g` (sigma qualifies).
pub fn linear_module(
    ring: &Arc<WittRing>,
    rows: usize,
    cols: usize,
    cond: impl Fn(&Matrix) -> Vec<Matrix>,
) -> HomModule {
    let nvars = rows * cols * ring.q();
    // Column k of the system is the image of the k-th coordinate vector.
    let columns: Vec<Vec<u64>> = (0..nvars)
        .map(|idx| {
            let mut v = vec![0u64; nvars];
            v[idx] = 1;
            let g = unflatten(ring, rows, cols, &v);
            cond(&g).iter().flat_map(flatten).collect()
        })
        .collect();
    let neq = columns.first().map_or(0, Vec::len);
    let a: Vec<Vec<u64>> = (0..neq)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    let p = ring.p();
    let kernel = kernel_mod(&a, nvars, p, ring.n());
    let exponents = kernel
        .iter()
        .map(|row| {
            let x = *row.iter().find(|&&x| x != 0).expect("nonzero row");
            crate::witt::val_u64(x, p)
        })
        .collect();
    let basis = kernel.iter().map(|v| unflatten(ring, rows, cols, v)).collect();
    HomModule {
        ring: ring.clone(),
        rows,
        cols,
        basis,
        exponents,
    }
}

#[derive(Clone, Debug)]
pub struct FixedLattice {
    pub module: HomModule,
    /// Smallest e with p^e End contained in the W-span of the basis.
    pub exponent: u32,
}

/// phi-fixed endomorphisms at precision `m`, computed at the full ring
/// precision and restricted, so that solutions which do not lift are
/// discarded.
pub fn fixed_lattice(c: &FCrystal, m: u32) -> Result<FixedLattice> {
    let n = c.ring().n();
    let full = hom_module(c, c, n)?;
    let ring = c.ring().with_precision(m)?;
    let basis: Vec<Matrix> = full
        .basis
        .iter()
        .map(|b| b.reduce(m))
        .collect::<Result<_>>()?;
    let r = c.rank();
    let exponent = if basis.is_empty() {
        m
    } else {
        let span = Matrix::from_fn(&ring, basis.len(), r * r, |i, j| {
            basis[i].entry(j / r, j % r).clone()
        });
        let exps = smith_normal_form(&span).exponents;
        let mut exps: Vec<u32> = exps.into_iter().take(r * r).collect();
        exps.resize(r * r, m);
        exps.into_iter().max().unwrap_or(0)
    };
    if exponent >= m {
        return Err(Error::PrecisionExhausted {
            needed: m + 1,
            available: m,
        });
    }
    let rows = full.image_at(m)?;
    let p = ring.p();
    let exponents = rows
        .iter()
        .map(|row| crate::witt::val_u64(*row.iter().find(|&&x| x != 0).unwrap(), p))
        .collect();
    let module = HomModule {
        basis: rows.iter().map(|v| unflatten(&ring, r, r, v)).collect(),
        ring,
        rows: r,
        cols: r,
        exponents,
    };
    Ok(FixedLattice { module, exponent })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchRegime {
    Exhaustive { candidates: u64 },
    Randomized { trials: usize },
}

#[derive(Clone, Debug)]
pub struct IsomResult {
    pub witness: Option<Matrix>,
    pub regime: SearchRegime,
    pub hom_log_size: u64,
}

/// F_p-basis of the mod-p image of a Hom module, each with a lift inside
/// the module.
fn residue_basis(module: &HomModule) -> Vec<(Vec<u64>, Matrix)> {
    let p = module.ring.p();
    let mut out: Vec<(Vec<u64>, Matrix)> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();
    for b in &module.basis {
        let mut res: Vec<u64> = flatten(b).iter().map(|x| x % p).collect();
        let mut lift = b.clone();
        for (k, (r, l)) in out.iter().enumerate() {
            let c = res[pivots[k]];
            if c != 0 {
                let f = p - c;
                for (x, y) in res.iter_mut().zip(r) {
                    *x = (*x + f * y) % p;
                }
                lift = lift.add(&l.scale_int(f));
            }
        }
        if let Some(piv) = res.iter().position(|&x| x != 0) {
            let inv = crate::plinalg::inv_unit_mod(res[piv], p, p);
            for x in res.iter_mut() {
                *x = *x * inv % p;
            }
            lift = lift.scale_int(inv);
            // keep earlier rows reduced at the new pivot
            for (r, l) in out.iter_mut() {
                let c = r[piv];
                if c != 0 {
                    let f = p - c;
                    for (x, y) in r.iter_mut().zip(&res) {
                        *x = (*x + f * y) % p;
                    }
                    *l = l.add(&lift.scale_int(f));
                }
            }
            pivots.push(piv);
            out.push((res, lift));
        }
    }
    out
}

struct UnitTester {
    field: Option<FieldCtx>,
    residue: Arc<WittRing>,
    dim: usize,
}

impl UnitTester {
    fn new(ring: &WittRing, dim: usize) -> Self {
        UnitTester {
            field: FieldCtx::new(ring.p(), ring.q()).ok(),
            residue: ring.residue_ring(),
            dim,
        }
    }

    /// `res` is a flattened residue matrix.
    fn is_unit(&self, res: &[u64]) -> bool {
        let q = self.residue.q();
        match &self.field {
            Some(f) => {
                let codes: Vec<u32> = res.chunks(q).map(|c| f.encode(c)).collect();
                f.det(&codes, self.dim) != 0
            }
            None => !unflatten(&self.residue, self.dim, self.dim, res)
                .det()
                .is_zero(),
        }
    }
}

/// Searches the Hom module at precision `m` for an isomorphism `C1 -> C2`.
///
/// An element of the module is invertible iff its reduction mod p is, so the
/// search runs over the F_p-span of the reduced basis. Below
/// [`EXHAUSTIVE_LIMIT`] candidates it is exhaustive and returns the
/// lexicographically first witness; above it, a seeded random sample.
pub fn isom_search(c1: &FCrystal, c2: &FCrystal, m: u32) -> Result<IsomResult> {
    isom_search_seeded(c1, c2, m, DEFAULT_SEED)
}

/// Seed of the randomized regime when none is given.
pub const DEFAULT_SEED: u64 = 0x150c_0157;

pub fn isom_search_seeded(c1: &FCrystal, c2: &FCrystal, m: u32, seed: u64) -> Result<IsomResult> {
    if c1.rank() != c2.rank() {
        return Err(Error::BadShape("ranks differ".into()));
    }
    let module = hom_module(c1, c2, m)?;
    if c1 == c2 {
        // Try the identity before anything else so that equal inputs give the obvious witness.
        return Ok(IsomResult {
            witness: Some(Matrix::identity(&module.ring, c1.rank())),
            regime: SearchRegime::Exhaustive { candidates: 1 },
            hom_log_size: module.log_size(),
        });
    }
    unit_search(&module, seed)
}

/// Searches a module of square matrices for an invertible element.
pub fn unit_search(module: &HomModule, seed: u64) -> Result<IsomResult> {
    if module.rows != module.cols {
        return Err(Error::BadShape("unit search needs square matrices".into()));
    }
    let hom_log_size = module.log_size();
    let basis = residue_basis(module);
    let p = module.ring.p();
    let r = module.rows;
    let tester = UnitTester::new(&module.ring, r);
    let d = basis.len() as u32;
    let len = r * r * module.ring.q();
    let combine = |coeffs: &[u64]| -> Vec<u64> {
        let mut v = vec![0u64; len];
        for (c, (res, _)) in coeffs.iter().zip(&basis) {
            if *c != 0 {
                for (x, y) in v.iter_mut().zip(res) {
                    *x = (*x + c * y) % p;
                }
            }
        }
        v
    };
    let lift = |coeffs: &[u64]| -> Matrix {
        let mut g = Matrix::zeros(&module.ring, r, r);
        for (c, (_, l)) in coeffs.iter().zip(&basis) {
            if *c != 0 {
                g = g.add(&l.scale_int(*c));
            }
        }
        g
    };
    let total = p.checked_pow(d).filter(|&t| t <= EXHAUSTIVE_LIMIT);
    if let Some(total) = total {
        // Most significant digit first, so index order is lexicographic.
        let digits = |mut idx: u64| -> Vec<u64> {
            let mut c = vec![0u64; d as usize];
            for k in (0..d as usize).rev() {
                c[k] = idx % p;
                idx /= p;
            }
            c
        };
        let hit = (0..total)
            .into_par_iter()
            .find_first(|&idx| tester.is_unit(&combine(&digits(idx))));
        return Ok(IsomResult {
            witness: hit.map(|idx| lift(&digits(idx))),
            regime: SearchRegime::Exhaustive { candidates: total },
            hom_log_size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<u64>> = (0..RANDOM_TRIALS)
        .map(|_| (0..d).map(|_| rng.gen_range(0..p)).collect())
        .collect();
    let hit = samples
        .par_iter()
        .position_first(|c| tester.is_unit(&combine(c)));
    match hit {
        Some(i) => Ok(IsomResult {
            witness: Some(lift(&samples[i])),
            regime: SearchRegime::Randomized {
                trials: RANDOM_TRIALS,
            },
            hom_log_size,
        }),
        None => Err(Error::SearchSpaceTooLarge),
    }
}

/// Every element of the module, as `sum c_i b_i` with `c_i < p^{m - e_i}`;
/// errors above `limit` elements.
pub fn module_elements(module: &HomModule, limit: u64) -> Result<Vec<Matrix>> {
    let p = module.ring.p();
    let m = module.precision();
    let orders: Vec<u64> = module.exponents.iter().map(|&e| p.pow(m - e)).collect();
    let total = orders
        .iter()
        .try_fold(1u64, |acc, &o| acc.checked_mul(o))
        .filter(|&t| t <= limit)
        .ok_or(Error::SearchSpaceTooLarge)?;
    let zero = Matrix::zeros(&module.ring, module.rows, module.cols);
    Ok((0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut g = zero.clone();
            for (b, &o) in module.basis.iter().zip(&orders) {
                let c = idx % o;
                idx /= o;
                if c != 0 {
                    g = g.add(&b.scale_int(c));
                }
            }
            g
        })
        .collect())
}

/// Outcome of comparing restriction images of Hom modules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizationReport {
    /// Level the images live at, `n12 + t`.
    pub level: u32,
    /// Predicted onset `n12 + v12 + t`.
    pub predicted: u32,
    /// Highest precision compared.
    pub checked_to: u32,
    /// Smallest `N` from which every image agrees with the deepest one.
    pub onset: u32,
}

impl StabilizationReport {
    pub fn holds(&self) -> bool {
        self.onset <= self.predicted
    }
}

/// Compares `Im(Hom(N) -> Hom(n12 + t))` for `N` from `n12 + t` up to the
/// ring precision, with `n12 = m12 + eps_p` and `v12 = m12 + h12`.
pub fn hom_stabilization(
    c1: &FCrystal,
    c2: &FCrystal,
    m12: u32,
    h12: u32,
    t: u32,
) -> Result<StabilizationReport> {
    let p = c1.ring().p();
    let n12 = m12 + crate::bounds::epsilon(p);
    let level = n12 + t;
    let predicted = n12 + m12 + h12 + t;
    let n = c1.ring().n().min(c2.ring().n());
    if predicted > n {
        return Err(Error::PrecisionExhausted {
            needed: predicted,
            available: n,
        });
    }
    let images: Vec<Vec<Vec<u64>>> = (level..=n)
        .map(|big| hom_module(c1, c2, big)?.image_at(level))
        .collect::<Result<_>>()?;
    let last = images.last().expect("nonempty range");
    let agree = images.iter().rev().take_while(|im| *im == last).count() as u32;
    let onset = n + 1 - agree;
    Ok(StabilizationReport {
        level,
        predicted,
        checked_to: n,
        onset,
    })
}

/// Descent of endomorphisms: every element of `hom_module(C, C, h e_M + m)`
/// reduced to precision `m` has coordinates in `W_m(F_{p^{r!}})`. Returns
/// the number of generators checked, or `Ok(None)` if one fails.
pub fn descent_check(c: &FCrystal, m: u32) -> Result<Option<usize>> {
    let r = c.rank() as u64;
    let fact: u64 = (1..=r).product();
    let q = c.ring().q() as u64;
    if q % fact != 0 {
        return Err(Error::BadParams(format!("{fact} does not divide the field degree {q}")));
    }
    let h = c.hodge_data()?.h;
    let e_m = r.max(r * r / 4) as u32;
    let big = h * e_m + m;
    let module = hom_module(c, c, big)?;
    for b in &module.basis {
        let red = b.reduce(m)?;
        if red.sigma_pow(fact as i64) != red {
            return Ok(None);
        }
    }
    Ok(Some(module.basis.len()))
}

/// Length of the cokernel of `f`, i.e. log_p of its degree as an isogeny.
pub fn cokernel_length(f: &Matrix) -> Result<u32> {
    if !f.is_square() {
        return Err(Error::BadShape("isogeny must be square".into()));
    }
    let n = f.ring().n();
    let exps = smith_normal_form(f).exponents;
    if exps.iter().any(|&e| e >= n) {
        return Err(Error::SingularAtPrecision);
    }
    Ok(exps.iter().sum())
}

/// Solves `L(x) = rhs` over F_p for an F_p-linear map on F_{p^M}^k given by
/// its action on coefficient vectors; returns a particular solution and a
/// kernel basis.
pub(crate) fn fp_linear_solve(
    p: u64,
    dim: usize,
    map: impl Fn(&[u64]) -> Vec<u64>,
    rhs: &[u64],
) -> Option<(Vec<u64>, Vec<Vec<u64>>)> {
    let cols: Vec<Vec<u64>> = (0..dim)
        .map(|k| {
            let mut e = vec![0u64; dim];
            e[k] = 1;
            map(&e)
        })
        .collect();
    let a: Vec<Vec<u64>> = (0..rhs.len())
        .map(|i| cols.iter().map(|c| c[i] % p).collect())
        .collect();
    let sol = solve_linear_module(&a, rhs, dim, p, 1)?;
    Some((sol.particular, sol.kernel))
}

pub(crate) fn residue_field(p: u64, m: usize) -> Option<Arc<WittRing>> {
    make_witt_ring(p, m, 1).ok()
}

/// Equations `b_j x_j + c_j - d_j x_{j-1}^p = 0` for `j = 1..q`, indices
/// cyclic, with coefficients in F_{p^Q} given as coefficient vectors.
#[derive(Clone, Debug)]
pub struct CircularSystem {
    pub field: Arc<WittRing>,
    pub b: Vec<Vec<u64>>,
    pub c: Vec<Vec<u64>>,
    pub d: Vec<Vec<u64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CircularCase {
    /// Every `b_j = 1`.
    Plus,
    /// Every `d_j = 1` and some `b_j = 0`.
    Minus,
}

#[derive(Clone, Debug)]
pub struct CircularSolution {
    /// Residue field of the solution, F_{p^{Q D}}.
    pub field: Arc<WittRing>,
    pub degree: usize,
    pub x: Vec<Vec<u64>>,
}

impl CircularSystem {
    pub fn new(
        field: Arc<WittRing>,
        b: Vec<Vec<u64>>,
        c: Vec<Vec<u64>>,
        d: Vec<Vec<u64>>,
    ) -> Result<Self> {
        if field.n() != 1 {
            return Err(Error::BadShape("coefficients must live in the residue field".into()));
        }
        let q = b.len();
        if q == 0 || c.len() != q || d.len() != q {
            return Err(Error::BadShape("coefficient lists must share a nonzero length".into()));
        }
        let fq = field.q();
        if b.iter().chain(&c).chain(&d).any(|v| v.len() != fq) {
            return Err(Error::BadShape("coefficient vector has the wrong degree".into()));
        }
        Ok(Self { field, b, c, d })
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    fn embedded(&self, target: &Arc<WittRing>) -> Result<[Vec<Vec<u64>>; 3]> {
        let emb = |v: &Vec<Vec<u64>>| -> Result<Vec<Vec<u64>>> {
            v.iter()
                .map(|x| Ok(self.field.elem(x.clone()).embed(target)?.into_coeffs()))
                .collect()
        };
        Ok([emb(&self.b)?, emb(&self.c)?, emb(&self.d)?])
    }

    /// Checks every equation in the field of `sol`.
    pub fn verify(&self, sol: &CircularSolution) -> Result<bool> {
        let f = &sol.field;
        let [b, c, d] = self.embedded(f)?;
        let q = self.len();
        Ok((0..q).all(|j| {
            let prev = &sol.x[(j + q - 1) % q];
            let lhs = f.add(&f.mul(&b[j], &sol.x[j]), &c[j]);
            let rhs = f.mul(&d[j], &f.frob(prev));
            lhs == rhs
        }))
    }
}

fn is_const(f: &WittRing, v: &[u64], k: u64) -> bool {
    f.reduce_coeffs(v, 1) == f.int_coeffs(k as i64)
}

/// Solves a circular system of shape (+) or (-).
///
/// In case (+) the system collapses to `x = u + v x^{p^q}`; the map
/// `x -> v x^{p^q} - x` is F_p-linear, so a root in F_{p^{Q D}} is found by
/// linear algebra for the smallest `D <= dmax` that has one. Case (-) has a
/// unique solution obtained by taking p-th roots backwards from an index
/// with `b_j = 0`.
pub fn solve_circular(
    sys: &CircularSystem,
    case: CircularCase,
    dmax: usize,
) -> Result<CircularSolution> {
    let f = &sys.field;
    let p = f.p();
    let q = sys.len();
    match case {
        CircularCase::Minus => {
            if !sys.d.iter().all(|d| is_const(f, d, 1)) {
                return Err(Error::BadShape("case (-) needs every d_j = 1".into()));
            }
            let j0 = sys
                .b
                .iter()
                .position(|b| f.is_zero(b))
                .ok_or_else(|| Error::BadShape("case (-) needs some b_j = 0".into()))?;
            let mut x = vec![f.zero_coeffs(); q];
            // x_{j-1} = (b_j x_j + c_j)^{1/p}, starting from j0 where b_j0 = 0.
            for step in 0..q {
                let j = (j0 + q - step) % q;
                let val = f.add(&f.mul(&sys.b[j], &x[j]), &sys.c[j]);
                x[(j + q - 1) % q] = f.frob_inv(&val);
            }
            Ok(CircularSolution {
                field: f.clone(),
                degree: f.q(),
                x,
            })
        }
        CircularCase::Plus => {
            if !sys.b.iter().all(|b| is_const(f, b, 1)) {
                return Err(Error::BadShape("case (+) needs every b_j = 1".into()));
            }
            for dext in 1..=dmax {
                let deg = f.q() * dext;
                let Some(big) = residue_field(p, deg) else { break };
                let [_, c, d] = sys.embedded(&big)?;
                // x_j = d_j x_{j-1}^p - c_j, so x_q = v x_q^{p^q} + u.
                let step = |x: &[u64]| -> Vec<Vec<u64>> {
                    let mut xs = Vec::with_capacity(q);
                    let mut cur = x.to_vec();
                    for j in 0..q {
                        cur = big.sub(&big.mul(&d[j], &big.frob(&cur)), &c[j]);
                        xs.push(cur.clone());
                    }
                    xs
                };
                let zero = big.zero_coeffs();
                let u = step(&zero).pop().unwrap();
                // x -> v x^{p^q} - x, computed as (affine map) - u - x.
                let lin = |x: &[u64]| -> Vec<u64> {
                    let last = step(x).pop().unwrap();
                    big.sub(&big.sub(&last, &u), x)
                };
                let rhs = big.neg(&u);
                if let Some((x, _)) = fp_linear_solve(p, deg, lin, &rhs) {
                    let xs = step(&x);
                    let sol = CircularSolution {
                        field: big.clone(),
                        degree: deg,
                        x: xs,
                    };
                    debug_assert!(sys.verify(&sol).unwrap_or(false));
                    return Ok(sol);
                }
            }
            Err(Error::ExtensionCapExceeded(dmax))
        }
    }
}

#[derive(Clone, Debug)]
pub struct LangSolution {
    pub field: Arc<WittRing>,
    pub degree: usize,
    /// Invertible over the residue field `field`.
    pub x: Matrix,
}

/// Finds `x` with `x g sigma(x)^{-1} = 1`, i.e. `x g = sigma(x)`.
///
/// Each row `v` of `x` satisfies `sigma(v) = v g`, an F_p-linear condition.
/// Over F_{p^{Q D}} the solutions form an F_p-space, and F_p-independent
/// solutions are independent over the field, so `x` exists exactly when that
/// space has dimension `r`.
pub fn sigma_conjugacy_trivialize(g: &Matrix, dmax: usize) -> Result<LangSolution> {
    if !g.is_square() {
        return Err(Error::BadShape("g must be square".into()));
    }
    let base = g.ring().residue_ring();
    let g = g.reduce(1)?;
    if g.det().is_zero() {
        return Err(Error::NotAUnit);
    }
    let p = base.p();
    let r = g.rows();
    for dext in 1..=dmax {
        let deg = base.q() * dext;
        let Some(big) = residue_field(p, deg) else { break };
        let gb = g.embed(&big)?;
        let map = |v: &[u64]| -> Vec<u64> {
            let row = unflatten(&big, 1, r, v);
            flatten(&row.sigma().sub(&row.mul(&gb)))
        };
        let dim = r * deg;
        let Some((_, kernel)) = fp_linear_solve(p, dim, map, &vec![0; dim]) else {
            continue;
        };
        if kernel.len() == r {
            let rows: Vec<u64> = kernel.concat();
            let x = unflatten(&big, r, r, &rows);
            debug_assert!(x.mul(&gb) == x.sigma());
            return Ok(LangSolution {
                field: big,
                degree: deg,
                x,
            });
        }
    }
    Err(Error::ExtensionCapExceeded(dmax))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{etale, isoclinic_3_3_6, supersingular};

    #[test]
    fn rank_one_homs() {
        let r = make_witt_ring(3, 1, 3).unwrap();
        let e = etale(&r, 1).unwrap();
        let hm = hom_module(&e, &e, 3).unwrap();
        assert_eq!(hm.exponents, vec![0]);
        assert_eq!(hm.log_size(), 3);
        let twisted = FCrystal::new(Matrix::from_ints(&r, 1, 1, &[3]), 0).unwrap();
        let hm = hom_module(&e, &twisted, 2).unwrap();
        assert!(hm.basis.is_empty());
        // brute force at m = 2: g = 3 sigma(g) in Z/9
        assert_eq!((0..9u64).filter(|g| g % 9 == (3 * g) % 9).count(), 1);
    }

    #[test]
    fn fixed_lattice_exponents() {
        let r = make_witt_ring(2, 1, 4).unwrap();
        assert_eq!(fixed_lattice(&etale(&r, 2).unwrap(), 3).unwrap().exponent, 0);
        let r = make_witt_ring(2, 3, 6).unwrap();
        let c = isoclinic_3_3_6(&r, 3, 2).unwrap();
        assert_eq!(fixed_lattice(&c, 3).unwrap().exponent, 1);
        let r = make_witt_ring(3, 2, 6).unwrap();
        let c = supersingular(&r, 1).unwrap();
        assert_eq!(fixed_lattice(&c, 3).unwrap().exponent, 1);
    }

    #[test]
    fn self_isomorphism_and_cokernel() {
        let r = make_witt_ring(2, 2, 3).unwrap();
        let c = supersingular(&r, 1).unwrap();
        let res = isom_search(&c, &c, 3).unwrap();
        assert!(matches!(res.regime, SearchRegime::Exhaustive { .. }));
        let g = res.witness.unwrap();
        assert_eq!(g.mul(c.matrix()), c.matrix().mul(&g.sigma()));
        assert_eq!(cokernel_length(&g).unwrap(), 0);
        assert_eq!(cokernel_length(&Matrix::identity(&r, 3).scale_int(2)).unwrap(), 3);
    }

    #[test]
    fn circular_systems() {
        let f4 = make_witt_ring(2, 2, 1).unwrap();
        let f2 = make_witt_ring(2, 1, 1).unwrap();
        // x = 1 + x^2 over F_2
        let sys = CircularSystem::new(f2.clone(), vec![vec![1]], vec![vec![1]], vec![vec![1]]).unwrap();
        let sol = solve_circular(&sys, CircularCase::Plus, 6).unwrap();
        assert_eq!(sol.degree, 2);
        assert!(sys.verify(&sol).unwrap());
        let roots: Vec<Vec<u64>> = (0..4u64)
            .map(|c| vec![c & 1, c >> 1])
            .filter(|x| *x == f4.add(&f4.one_coeffs(), &f4.mul(x, x)))
            .collect();
        assert_eq!(roots.len(), 2);
        assert!(roots.contains(&sol.x[0]));
        // case (-): unique solution, zero when c = 0
        let z = f4.zero_coeffs();
        let one = f4.one_coeffs();
        let sys = CircularSystem::new(
            f4.clone(),
            vec![z.clone(), one.clone()],
            vec![vec![0, 1], vec![1, 1]],
            vec![one.clone(), one.clone()],
        )
        .unwrap();
        let sol = solve_circular(&sys, CircularCase::Minus, 6).unwrap();
        assert!(sys.verify(&sol).unwrap());
    }

    #[test]
    fn lang_small_cases() {
        let r = make_witt_ring(2, 2, 1).unwrap();
        let id = Matrix::identity(&r, 2);
        let sol = sigma_conjugacy_trivialize(&id, 6).unwrap();
        assert_eq!(sol.degree, 2);
        assert!(sol.x.is_identity());
        let g = Matrix::from_coeffs(&r, 1, 1, vec![vec![0, 1]]).unwrap();
        let sol = sigma_conjugacy_trivialize(&g, 6).unwrap();
        assert_eq!(sol.x, g);
        let g = Matrix::from_coeffs(&r, 2, 2, vec![vec![0, 1], vec![1, 0], vec![1, 1], vec![0, 0]])
            .unwrap();
        let sol = sigma_conjugacy_trivialize(&g, 4).unwrap();
        let gb = g.embed(&sol.field).unwrap();
        assert_eq!(sol.x.mul(&gb), sol.x.sigma());
        assert!(!sol.x.det().is_zero());
    }
}
