//! Explicit isomorphisms between a crystal `(M, phi)` and its twists
//! `(M, g phi)` for `g` close to the identity.
//!
//! A stairs datum is a W-lattice `E` inside `End(M)` with a basis on which
//! `phi` acts monomially, `phi(e_l) = p^{n_l} e_{pi(l)}`, every cycle of `pi`
//! carrying exponents of one sign. Each round writes the current defect
//! `g_cur - 1` on this basis, solves one circular system per cycle over a
//! finite field and conjugates the defect one digit closer to the identity.

use std::sync::Arc;

use crate::bounds::epsilon;
use crate::crystal::FCrystal;
use crate::deviation::{df_reduce, ExponentTuple};
use crate::error::{Error, Result};
use crate::plinalg::{exp_trunc, inverse_with_shift, solve_linear_module, unit_inverse, Matrix};
use crate::semilinear::{
    fixed_lattice, flatten, fp_linear_solve, residue_field, solve_circular, CircularCase,
    CircularSystem,
};
use crate::witt::{make_witt_ring, WittRing};

/// Largest residue field the finite-field steps may move to.
pub const MAX_FIELD_DEGREE: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Rescaled matrix units of a monomial Frobenius matrix.
    Monomial,
    /// phi-fixed endomorphisms of a crystal whose End is isoclinic of slope 0.
    FixedLattice,
}

#[derive(Clone, Debug)]
pub struct StairsDatum {
    pub crystal: FCrystal,
    /// Basis `e_l` of `E`, as `r x r` matrices.
    pub basis: Vec<Matrix>,
    pub perm: Vec<usize>,
    pub exponents: Vec<i64>,
    /// Smallest `m` with `p^m End(M)` inside `E`.
    pub m: u32,
    /// Whether `E` is closed under multiplication.
    pub multiplicative: bool,
    pub strategy: Strategy,
}

impl StairsDatum {
    pub fn ring(&self) -> &Arc<WittRing> {
        self.crystal.ring()
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Orbits of `perm`, each listed in the order `phi` visits it.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.perm.len()];
        let mut out = Vec::new();
        for start in 0..self.perm.len() {
            if seen[start] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut l = start;
            while !seen[l] {
                seen[l] = true;
                cyc.push(l);
                l = self.perm[l];
            }
            out.push(cyc);
        }
        out
    }

    /// Checks the monomial action, the sign condition on cycles, the exponent
    /// `m` and, when claimed, closure under multiplication.
    pub fn validate(&self) -> Result<()> {
        let r = self.crystal.rank();
        let v = self.basis.len();
        if v != r * r || self.perm.len() != v || self.exponents.len() != v {
            return Err(Error::BadShape(format!(
                "datum needs {} basis elements, permutation entries and exponents",
                r * r
            )));
        }
        let mut hit = vec![false; v];
        for &t in &self.perm {
            if t >= v || std::mem::replace(&mut hit[t], true) {
                return Err(Error::BadShape("perm is not a permutation".into()));
            }
        }
        let ring = self.ring();
        if self
            .basis
            .iter()
            .any(|e| e.rows() != r || e.cols() != r || **e.ring() != **ring)
        {
            return Err(Error::BadShape("basis matrices must be r x r over the crystal ring".into()));
        }
        let b = self.crystal.matrix();
        for l in 0..v {
            let lhs = b.mul(&self.basis[l].sigma());
            let rhs = self.basis[self.perm[l]].mul(b);
            let k = self.exponents[l];
            let ok = if k >= 0 {
                lhs == rhs.mul_p_pow(k as u32)
            } else {
                lhs.mul_p_pow((-k) as u32) == rhs
            };
            if !ok {
                return Err(Error::BadParams(format!("phi(e_{l}) is not p^{k} e_{}", self.perm[l])));
            }
        }
        for cyc in self.cycles() {
            let pos = cyc.iter().all(|&l| self.exponents[l] >= 0);
            let neg = cyc.iter().all(|&l| self.exponents[l] <= 0);
            if !pos && !neg {
                return Err(Error::BadParams("a cycle mixes exponent signs".into()));
            }
        }
        let c = Coordinates::new(&self.basis)?;
        if c.shift != self.m {
            return Err(Error::BadParams(format!(
                "p^{} End(M) is the best containment, not p^{}",
                c.shift, self.m
            )));
        }
        if self.multiplicative && !self.products_inside(&c)? {
            return Err(Error::NotMultiplicative);
        }
        Ok(())
    }

    fn products_inside(&self, c: &Coordinates) -> Result<bool> {
        for a in &self.basis {
            for b in &self.basis {
                if c.coords(&a.mul(b)).is_err() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Whether `E E = 0`.
    pub fn square_zero(&self) -> bool {
        self.basis
            .iter()
            .all(|a| self.basis.iter().all(|b| a.mul(b).is_zero()))
    }

    pub fn embed(&self, target: &Arc<WittRing>) -> Result<StairsDatum> {
        Ok(StairsDatum {
            crystal: self.crystal.embed(target)?,
            basis: self
                .basis
                .iter()
                .map(|e| e.embed(target))
                .collect::<Result<_>>()?,
            ..self.clone()
        })
    }
}

/// Coordinates on the basis of `E`. With `P` the matrix of the basis and
/// `C P = p^e`, the coordinates of `x` are `p^{-e} C x`, known modulo
/// `p^{n - 2e}`.
struct Coordinates {
    inv: Matrix,
    shift: u32,
    ring: Arc<WittRing>,
    /// Ring of precision `n - 2e` in which coordinates are returned.
    out: Arc<WittRing>,
}

impl Coordinates {
    fn new(basis: &[Matrix]) -> Result<Self> {
        let ring = basis
            .first()
            .ok_or_else(|| Error::BadShape("empty basis".into()))?
            .ring()
            .clone();
        let dim = basis[0].rows() * basis[0].cols();
        if basis.len() != dim {
            return Err(Error::BadShape("basis must have r^2 elements".into()));
        }
        let p_mat = Matrix::from_fn(&ring, dim, dim, |i, l| basis[l].entries()[i].clone());
        let (inv, shift) = inverse_with_shift(&p_mat)?;
        let n = ring.n();
        if 2 * shift >= n {
            return Err(Error::PrecisionExhausted {
                needed: 2 * shift + 1,
                available: n,
            });
        }
        let out = ring.with_precision(n - 2 * shift)?;
        Ok(Self {
            inv,
            shift,
            ring,
            out,
        })
    }

    fn precision(&self) -> u32 {
        self.out.n()
    }

    /// Coordinates of `x`, or an error when `x` is not in `E`.
    fn coords(&self, x: &Matrix) -> Result<Vec<Vec<u64>>> {
        if **x.ring() != *self.ring {
            return Err(Error::RingMismatch);
        }
        let dim = x.rows() * x.cols();
        let col = Matrix::from_coeffs(&self.ring, dim, 1, x.entries().to_vec())?
            .reduce(self.ring.n() - self.shift)?;
        let y = self.inv.mul(&col);
        if y.valuation().is_some_and(|v| v < self.shift) {
            return Err(Error::BadParams("element lies outside the lattice".into()));
        }
        let y = y.div_p_pow(self.shift).reduce(self.out.n())?;
        Ok(y.entries().to_vec())
    }
}

/// Builds a datum, trying the monomial construction first.
pub fn build_stairs_datum(c: &FCrystal) -> Result<StairsDatum> {
    match build_stairs_datum_with(c, Strategy::Monomial) {
        Err(Error::UnsupportedShape) => build_stairs_datum_with(c, Strategy::FixedLattice),
        other => other,
    }
}

pub fn build_stairs_datum_with(c: &FCrystal, strategy: Strategy) -> Result<StairsDatum> {
    match strategy {
        Strategy::Monomial => monomial_datum(c),
        Strategy::FixedLattice => fixed_datum(c),
    }
}

/// `B` with one nonzero entry per row and column, all of the form `u p^k`
/// for a common unit `u`: returns `(pi, k)` with column `j` in row `pi(j)`.
fn monomial_shape(b: &Matrix) -> Option<(Vec<usize>, Vec<u32>)> {
    let ring = b.ring();
    let r = b.rows();
    let mut pi = vec![usize::MAX; r];
    let mut k = vec![0u32; r];
    let mut row_used = vec![false; r];
    for j in 0..r {
        let mut nz = (0..r).filter(|&i| !ring.is_zero(b.entry(i, j)));
        let i = nz.next()?;
        if nz.next().is_some() || std::mem::replace(&mut row_used[i], true) {
            return None;
        }
        pi[j] = i;
        k[j] = ring.val(b.entry(i, j))?;
    }
    let kmax = *k.iter().max()?;
    let normalized: Vec<Vec<u64>> = (0..r)
        .map(|j| ring.mul_p_pow(b.entry(pi[j], j), kmax - k[j]))
        .collect();
    if normalized.windows(2).any(|w| w[0] != w[1]) {
        return None;
    }
    Some((pi, k))
}

fn monomial_datum(c: &FCrystal) -> Result<StairsDatum> {
    let ring = c.ring().clone();
    let r = c.rank();
    let (pi, k) = monomial_shape(c.matrix()).ok_or(Error::UnsupportedShape)?;
    let v = r * r;
    // phi(E_ij) = p^{k_i - k_j} E_{pi(i) pi(j)}
    let perm: Vec<usize> = (0..v).map(|l| pi[l / r] * r + pi[l % r]).collect();
    let raw: Vec<i64> = (0..v).map(|l| k[l / r] as i64 - k[l % r] as i64).collect();
    let mut rescale = vec![0u32; v];
    let mut exponents = raw.clone();
    let mut seen = vec![false; v];
    for start in 0..v {
        if seen[start] {
            continue;
        }
        let mut cyc = Vec::new();
        let mut l = start;
        while !seen[l] {
            seen[l] = true;
            cyc.push(l);
            l = perm[l];
        }
        let tau = ExponentTuple::new(cyc.iter().map(|&l| raw[l]).collect())?;
        let red = df_reduce(&tau);
        for (pos, &l) in cyc.iter().enumerate() {
            rescale[l] = red.rescale[pos];
            exponents[l] = red.tuple[pos];
        }
    }
    let basis: Vec<Matrix> = (0..v)
        .map(|l| {
            let mut e = Matrix::zeros(&ring, r, r);
            e.set(l / r, l % r, ring.int_coeffs(1));
            e.mul_p_pow(rescale[l])
        })
        .collect();
    let a = |i: usize, j: usize| rescale[i * r + j];
    let multiplicative = (0..r).all(|i| (0..r).all(|j| (0..r).all(|l| a(i, l) <= a(i, j) + a(j, l))));
    let datum = StairsDatum {
        crystal: c.clone(),
        basis,
        perm,
        exponents,
        m: rescale.iter().copied().max().unwrap_or(0),
        multiplicative,
        strategy: Strategy::Monomial,
    };
    if datum.basis.iter().any(|e| e.is_zero()) {
        return Err(Error::PrecisionExhausted {
            needed: datum.m + 1,
            available: ring.n(),
        });
    }
    Ok(datum)
}

/// Digits given up so that phi-fixed solutions found at full precision are
/// read only where they lift.
fn fixed_margin(c: &FCrystal) -> Result<u32> {
    Ok(2 * c.hodge_data()?.h + 1)
}

fn fixed_datum(c: &FCrystal) -> Result<StairsDatum> {
    let n = c.ring().n();
    let margin = fixed_margin(c)?;
    if n <= margin + 1 {
        return Err(Error::PrecisionExhausted {
            needed: margin + 2,
            available: n,
        });
    }
    let np = n - margin;
    let fl = match fixed_lattice(c, np) {
        Err(Error::PrecisionExhausted { .. }) => return Err(Error::UnsupportedShape),
        other => other?,
    };
    let ring = fl.module.ring.clone();
    let r = c.rank();
    let rows: Vec<Vec<u64>> = fl.module.basis.iter().map(flatten).collect();
    let basis = minimal_generators(&ring, &rows)?;
    if basis.len() != r * r {
        return Err(Error::UnsupportedShape);
    }
    let crystal = c.reduce(np)?;
    let basis: Vec<Matrix> = basis
        .iter()
        .map(|v| crate::semilinear::unflatten(&ring, r, r, v))
        .collect();
    let v = basis.len();
    let mut datum = StairsDatum {
        crystal,
        basis,
        perm: (0..v).collect(),
        exponents: vec![0; v],
        m: fl.exponent,
        multiplicative: true,
        strategy: Strategy::FixedLattice,
    };
    datum.m = Coordinates::new(&datum.basis)?.shift;
    Ok(datum)
}

/// Greedy minimal generating set of the Z/p^n-module spanned by `rows`: keep
/// a row when it is not in the span of the kept rows plus `p` times the
/// module.
fn minimal_generators(ring: &WittRing, rows: &[Vec<u64>]) -> Result<Vec<Vec<u64>>> {
    let p = ring.p();
    let n = ring.n();
    let modulus = ring.modulus();
    let dim = rows.first().map_or(0, Vec::len);
    let in_span = |gens: &[Vec<u64>], target: &[u64]| -> bool {
        if gens.is_empty() {
            return target.iter().all(|&x| x % modulus == 0);
        }
        // columns are generators
        let a: Vec<Vec<u64>> = (0..dim)
            .map(|i| gens.iter().map(|g| g[i]).collect())
            .collect();
        solve_linear_module(&a, target, gens.len(), p, n).is_some()
    };
    let p_rows: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x * p % modulus).collect())
        .collect();
    let mut kept: Vec<Vec<u64>> = Vec::new();
    for row in rows {
        let mut gens = kept.clone();
        gens.extend(p_rows.iter().cloned());
        if !in_span(&gens, row) {
            kept.push(row.clone());
        }
    }
    if rows.iter().any(|row| !in_span(&kept, row)) {
        return Err(Error::LiftFailed("fixed lattice has no minimal generating set".into()));
    }
    Ok(kept)
}

/// Result of a stairs computation.
#[derive(Clone, Debug)]
pub struct StairsOutcome {
    /// `g~` with `g~ g B = B sigma(g~)` modulo `p^certified`, over the
    /// residue field actually needed.
    pub witness: Matrix,
    /// Exponent of the congruence, re-verified from scratch.
    pub certified: u32,
    /// Precision the run aimed for.
    pub target: u32,
    pub iterations: usize,
    /// Why the run stopped short of `target`, if it did.
    pub stall: Option<Error>,
}

impl StairsOutcome {
    pub fn degree(&self) -> usize {
        self.witness.ring().q()
    }

    pub fn complete(&self) -> bool {
        self.certified >= self.target
    }
}

/// Largest `k <= n` with `w g B = B sigma(w)` modulo `p^k`.
pub fn witness_precision(c: &FCrystal, g: &Matrix, w: &Matrix) -> Result<u32> {
    let ring = w.ring();
    let b = c.matrix().embed(ring)?;
    let g = g.embed(ring)?;
    let d = w.mul(&g).mul(&b).sub(&b.mul(&w.sigma()));
    Ok(d.valuation().map_or(ring.n(), |v| v.min(ring.n())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    /// `g~ = prod exp(p^k x_l e_l)`.
    Exponential,
    /// `g~ = 1 + sum p^k x_l e_l`; needs `E` multiplicative.
    Linear,
}

struct RunState {
    datum: StairsDatum,
    coords: Coordinates,
    g: Matrix,
    acc: Matrix,
    cur: Matrix,
}

impl RunState {
    fn new(datum: StairsDatum, g: Matrix) -> Result<Self> {
        let coords = Coordinates::new(&datum.basis)?;
        let id = Matrix::identity(datum.ring(), datum.crystal.rank());
        Ok(Self {
            coords,
            cur: g.clone(),
            g,
            acc: id,
            datum,
        })
    }

    fn embed(&mut self, degree: usize) -> Result<()> {
        let ring = self.datum.ring();
        let target = make_witt_ring(ring.p(), degree, ring.n())?;
        self.datum = self.datum.embed(&target)?;
        self.coords = Coordinates::new(&self.datum.basis)?;
        self.g = self.g.embed(&target)?;
        self.acc = self.acc.embed(&target)?;
        self.cur = self.cur.embed(&target)?;
        Ok(())
    }

    fn defect(&self) -> Result<Vec<Vec<u64>>> {
        let id = Matrix::identity(self.datum.ring(), self.datum.crystal.rank());
        self.coords.coords(&self.cur.sub(&id))
    }
}

/// One correction term: `p^k x e_l` and its image `p^{k + n_l} sigma(x) e_{pi(l)}`.
struct Term {
    l: usize,
    k: u32,
    x: Vec<u64>,
}

fn run(datum: &StairsDatum, g: &Matrix, step: Step, dmax: usize) -> Result<StairsOutcome> {
    let ring = datum.ring().clone();
    let g = if g.ring().n() > ring.n() { g.reduce(ring.n())? } else { g.clone() };
    if **g.ring() != *ring {
        return Err(Error::RingMismatch);
    }
    let max_degree = (ring.q() * dmax).min(MAX_FIELD_DEGREE);
    let n = ring.n();
    let cycles = datum.cycles();
    let mut st = RunState::new(datum.clone(), g)?;
    let target = st.coords.precision();
    let limit = n as usize;
    let mut iterations = 0;
    let mut stall = None;
    'outer: loop {
        if iterations >= limit {
            // each step raises the defect level, so this is a bug
            return Err(Error::LiftFailed("iteration cap exceeded".into()));
        }
        let y = st.defect()?;
        let out = st.coords.out.clone();
        let prec = out.n();
        let field = st.datum.ring().residue_ring();
        let exps = &st.datum.exponents;
        let mut terms = Vec::new();
        for cyc in &cycles {
            let u = cyc.iter().map(|&l| out.val_capped(&y[l])).min().unwrap_or(prec);
            if u >= prec {
                continue;
            }
            let plus = cyc.iter().all(|&l| exps[l] >= 0);
            let qv = |l: usize| if plus { 0 } else { (-exps[l]) as u32 };
            let len = cyc.len();
            let unit_or_zero = |is_one: bool| field.int_coeffs(i64::from(is_one));
            let mut b = Vec::with_capacity(len);
            let mut cc = Vec::with_capacity(len);
            let mut d = Vec::with_capacity(len);
            for j in 0..len {
                let l = cyc[j];
                let prev = cyc[(j + len - 1) % len];
                b.push(unit_or_zero(qv(l) == 0));
                cc.push(out.reduce_coeffs(&out.div_p_pow(&y[l], u), 1));
                d.push(unit_or_zero(qv(prev) as i64 + exps[prev] == 0));
            }
            let sys = CircularSystem::new(field.clone(), b, cc, d)?;
            let case = if plus { CircularCase::Plus } else { CircularCase::Minus };
            let cap = (max_degree / field.q()).max(1);
            let sol = match solve_circular(&sys, case, cap) {
                Ok(s) => s,
                Err(e @ Error::ExtensionCapExceeded(_)) => {
                    stall = Some(e);
                    break 'outer;
                }
                Err(e) => return Err(e),
            };
            if sol.degree > field.q() {
                if sol.degree > max_degree {
                    stall = Some(Error::ExtensionCapExceeded(dmax));
                    break 'outer;
                }
                st.embed(sol.degree)?;
                continue 'outer;
            }
            terms.extend(cyc.iter().zip(sol.x).map(|(&l, x)| Term { l, k: u + qv(l), x }));
        }
        if terms.is_empty() {
            break;
        }
        let (g1, phi_g1_inv) = correction(&st.datum, &terms, step)?;
        st.cur = g1.mul(&st.cur).mul(&phi_g1_inv);
        st.acc = g1.mul(&st.acc);
        iterations += 1;
    }
    let certified = witness_precision(&st.datum.crystal, &st.g, &st.acc)?;
    Ok(StairsOutcome {
        witness: st.acc,
        certified,
        target,
        iterations,
        stall: if certified >= target { None } else { stall },
    })
}

/// `(g~_1, phi(g~_1)^{-1})` for the given terms.
fn correction(datum: &StairsDatum, terms: &[Term], step: Step) -> Result<(Matrix, Matrix)> {
    let ring = datum.ring();
    let r = datum.crystal.rank();
    let id = Matrix::identity(ring, r);
    let pieces: Vec<(Matrix, Matrix)> = terms
        .iter()
        .map(|t| {
            let x = t.x.clone();
            let sx = ring.frob(&x);
            let a = datum.basis[t.l].scale(&x).mul_p_pow(t.k);
            let nk = t.k as i64 + datum.exponents[t.l];
            let b = datum.basis[datum.perm[t.l]].scale(&sx).mul_p_pow(nk as u32);
            (a, b)
        })
        .collect();
    match step {
        Step::Exponential => {
            let mut g1 = id.clone();
            let mut inv = id;
            for (a, _) in &pieces {
                g1 = g1.mul(&exp_trunc(a)?);
            }
            for (_, b) in pieces.iter().rev() {
                inv = inv.mul(&exp_trunc(&b.neg())?);
            }
            Ok((g1, inv))
        }
        Step::Linear => {
            let mut g1 = id.clone();
            let mut phi = id;
            for (a, b) in &pieces {
                g1 = g1.add(a);
                phi = phi.add(b);
            }
            Ok((g1, unit_inverse(&phi)?))
        }
    }
}

/// Stairs run with exponential corrections; needs `g = 1 mod p^{2m + eps}`.
pub fn stairs_run(datum: &StairsDatum, g: &Matrix, dmax: usize) -> Result<StairsOutcome> {
    let n = datum.ring().n();
    let have = twist_level(g).min(n);
    let need = 2 * datum.m + epsilon(datum.ring().p());
    if have < need {
        return Err(Error::PreconditionTooWeak { have, need });
    }
    run(datum, g, Step::Exponential, dmax)
}

/// Stairs run with linear corrections for a multiplicative `E`, starting
/// from `g - 1` in `p^j E`. `j = 0` is allowed only when `E E = 0`.
pub fn stairs_algebra_run(
    datum: &StairsDatum,
    g: &Matrix,
    j: u32,
    dmax: usize,
) -> Result<StairsOutcome> {
    if !datum.multiplicative {
        return Err(Error::NotMultiplicative);
    }
    if j == 0 && !datum.square_zero() {
        return Err(Error::BadParams("j = 0 needs E E = 0".into()));
    }
    let ring = datum.ring();
    let g = if g.ring().n() > ring.n() { g.reduce(ring.n())? } else { g.clone() };
    let coords = Coordinates::new(&datum.basis)?;
    let id = Matrix::identity(ring, datum.crystal.rank());
    let have = match coords.coords(&g.sub(&id)) {
        Ok(y) => y.iter().map(|c| coords.out.val_capped(c)).min().unwrap_or(0),
        Err(_) => 0,
    };
    if have < j {
        return Err(Error::PreconditionTooWeak { have, need: j });
    }
    run(datum, &g, Step::Linear, dmax)
}

/// Largest `k` with `g = 1 mod p^k` (the ring precision when `g = 1`).
pub fn twist_level(g: &Matrix) -> u32 {
    let id = Matrix::identity(g.ring(), g.rows());
    g.sub(&id).valuation().unwrap_or(g.ring().n())
}

/// Lang's theorem in the algebra `E` followed by a linear stairs run, for a
/// fixed-lattice datum and `g = 1 mod p^m`.
pub fn lang_run(datum: &StairsDatum, g: &Matrix, dmax: usize) -> Result<StairsOutcome> {
    if datum.strategy != Strategy::FixedLattice
        || datum.exponents.iter().any(|&k| k != 0)
        || datum.perm.iter().enumerate().any(|(i, &t)| i != t)
    {
        return Err(Error::UnsupportedShape);
    }
    let ring = datum.ring().clone();
    let g = if g.ring().n() > ring.n() { g.reduce(ring.n())? } else { g.clone() };
    let have = twist_level(&g).min(ring.n());
    if have < datum.m {
        return Err(Error::PreconditionTooWeak { have, need: datum.m });
    }
    let coords = Coordinates::new(&datum.basis)?;
    let v = datum.basis.len();
    let res = |c: &[u64]| coords.out.reduce_coeffs(c, 1);
    let gbar: Vec<Vec<u64>> = coords.coords(&g)?.iter().map(|c| res(c)).collect();
    let gamma: Vec<Vec<Vec<Vec<u64>>>> = datum
        .basis
        .iter()
        .map(|a| {
            datum
                .basis
                .iter()
                .map(|b| Ok(coords.coords(&a.mul(b))?.iter().map(|c| res(c)).collect()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let max_degree = (ring.q() * dmax).min(MAX_FIELD_DEGREE);
    let base = ring.residue_ring();
    let mut degree = ring.q();
    while degree <= max_degree {
        if let Some(big) = residue_field(ring.p(), degree) {
            if let Some(x) = lang_in_algebra(&base, &big, &gbar, &gamma)? {
                let target = make_witt_ring(ring.p(), degree, ring.n())?;
                let d = datum.embed(&target)?;
                let g = g.embed(&target)?;
                let r = d.crystal.rank();
                let mut xt = Matrix::zeros(&target, r, r);
                let mut phi_xt = Matrix::zeros(&target, r, r);
                for a in 0..v {
                    xt = xt.add(&d.basis[a].scale(&x[a]));
                    phi_xt = phi_xt.add(&d.basis[a].scale(&target.frob(&x[a])));
                }
                let g1 = xt.mul(&g).mul(&unit_inverse(&phi_xt)?);
                let mut out = run(&d, &g1, Step::Linear, dmax)?;
                let xt = xt.embed(out.witness.ring())?;
                out.witness = out.witness.mul(&xt);
                out.certified = witness_precision(&d.crystal, &g, &out.witness)?;
                if out.certified >= out.target {
                    out.stall = None;
                }
                return Ok(out);
            }
        }
        degree += ring.q();
    }
    Err(Error::ExtensionCapExceeded(dmax))
}

/// A unit `x` of `E/p` over `big` with `x g = sigma(x)`, if the solution
/// space is already defined over `big`.
fn lang_in_algebra(
    base: &Arc<WittRing>,
    big: &Arc<WittRing>,
    gbar: &[Vec<u64>],
    gamma: &[Vec<Vec<Vec<u64>>>],
) -> Result<Option<Vec<Vec<u64>>>> {
    let v = gbar.len();
    let deg = big.q();
    let p = big.p();
    let emb = |c: &Vec<u64>| -> Result<Vec<u64>> { Ok(base.elem(c.clone()).embed(big)?.into_coeffs()) };
    let gb: Vec<Vec<u64>> = gbar.iter().map(emb).collect::<Result<_>>()?;
    let gm: Vec<Vec<Vec<Vec<u64>>>> = gamma
        .iter()
        .map(|row| {
            row.iter()
                .map(|cs| cs.iter().map(emb).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mult = |x: &[Vec<u64>], y: &[Vec<u64>]| -> Vec<Vec<u64>> {
        let mut out = vec![big.zero_coeffs(); v];
        for a in 0..v {
            for b in 0..v {
                let xy = big.mul(&x[a], &y[b]);
                if big.is_zero(&xy) {
                    continue;
                }
                for c in 0..v {
                    out[c] = big.add(&out[c], &big.mul(&xy, &gm[a][b][c]));
                }
            }
        }
        out
    };
    let split = |flat: &[u64]| -> Vec<Vec<u64>> { flat.chunks(deg).map(<[u64]>::to_vec).collect() };
    let map = |flat: &[u64]| -> Vec<u64> {
        let x = split(flat);
        let prod = mult(&x, &gb);
        x.iter()
            .zip(&prod)
            .flat_map(|(xi, pi)| big.sub(&big.frob(xi), pi))
            .collect()
    };
    let dim = v * deg;
    let Some((_, kernel)) = fp_linear_solve(p, dim, map, &vec![0; dim]) else {
        return Ok(None);
    };
    if kernel.len() != v {
        return Ok(None);
    }
    // Left multiplication by x is invertible exactly when x is a unit.
    let is_unit = |x: &[Vec<u64>]| -> bool {
        let l = Matrix::from_fn(big, v, v, |c, b| {
            let mut s = big.zero_coeffs();
            for a in 0..v {
                s = big.add(&s, &big.mul(&x[a], &gm[a][b][c]));
            }
            s
        });
        !l.det().is_zero()
    };
    let total = (p as u128).pow(v as u32);
    if total > 1 << 20 {
        return Err(Error::SearchSpaceTooLarge);
    }
    for code in 1..total as u64 {
        let mut c = code;
        let mut flat = vec![0u64; dim];
        for k in kernel.iter() {
            let a = c % p;
            c /= p;
            for (f, &kv) in flat.iter_mut().zip(k) {
                *f = (*f + a * kv) % p;
            }
        }
        let x = split(&flat);
        if is_unit(&x) {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{isoclinic_3_3_6, ordinary, supersingular};

    #[test]
    fn ordinary_datum() {
        let r = make_witt_ring(3, 1, 6).unwrap();
        let d = build_stairs_datum(&ordinary(&r, 2, 1).unwrap()).unwrap();
        assert_eq!(d.strategy, Strategy::Monomial);
        assert_eq!(d.m, 0);
        assert!(d.multiplicative);
        // E_12 and E_21 are fixed with exponents -1 and 1
        assert_eq!((d.perm[1], d.exponents[1]), (1, -1));
        assert_eq!((d.perm[2], d.exponents[2]), (2, 1));
        d.validate().unwrap();
    }

    #[test]
    fn supersingular_and_isoclinic_data() {
        let r = make_witt_ring(2, 2, 8).unwrap();
        let d = build_stairs_datum(&supersingular(&r, 1).unwrap()).unwrap();
        assert_eq!((d.strategy, d.m), (Strategy::Monomial, 1));
        d.validate().unwrap();
        let r = make_witt_ring(2, 3, 8).unwrap();
        let c = isoclinic_3_3_6(&r, 3, 2).unwrap();
        let d = build_stairs_datum_with(&c, Strategy::FixedLattice).unwrap();
        assert_eq!(d.m, 1);
        d.validate().unwrap();
    }

    #[test]
    fn identity_twist() {
        let r = make_witt_ring(3, 1, 5).unwrap();
        let d = build_stairs_datum(&ordinary(&r, 2, 1).unwrap()).unwrap();
        let out = stairs_run(&d, &Matrix::identity(&r, 2), 4).unwrap();
        assert!(out.witness.is_identity());
        assert_eq!(out.certified, 5);
    }

    #[test]
    fn ordinary_twist_is_untwisted() {
        let r = make_witt_ring(3, 1, 5).unwrap();
        let c = ordinary(&r, 2, 1).unwrap();
        let d = build_stairs_datum(&c).unwrap();
        // cross terms reach the slope-0 diagonal, whose Artin-Schreier
        // digits need the extensions of degree 3 and 9
        let g = Matrix::from_ints(&r, 2, 2, &[1, 3, 6, 1]);
        let out = stairs_run(&d, &g, 9).unwrap();
        assert!(out.complete(), "{out:?}");
        assert_eq!(witness_precision(&c, &g, &out.witness).unwrap(), 5);
    }

    #[test]
    fn too_weak_twist_is_rejected() {
        let r = make_witt_ring(2, 2, 8).unwrap();
        let d = build_stairs_datum(&supersingular(&r, 1).unwrap()).unwrap();
        let g = Matrix::from_ints(&r, 2, 2, &[1, 4, 0, 1]);
        assert_eq!(
            stairs_run(&d, &g, 4).unwrap_err(),
            Error::PreconditionTooWeak { have: 2, need: 4 }
        );
    }
}
