//! D-truncations, the congruence upgrade from truncation isomorphisms to
//! twists close to the identity, and i-number probes.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::epsilon;
use crate::crystal::{FCrystal, PolarizedCrystal};
use crate::deviation::{sign_deviation, ExponentTuple};
use crate::error::{Error, Result};
use crate::plinalg::{inverse_with_shift, unit_inverse, Matrix};
use crate::semilinear::{
    flatten, hom_module, isom_search_seeded, linear_module, module_elements, unflatten,
    unit_search, HomModule, IsomResult, SearchRegime, EXHAUSTIVE_LIMIT,
};
use crate::stairs::{build_stairs_datum_with, Strategy, MAX_FIELD_DEGREE};
use crate::witt::{make_witt_ring, WittRing};

/// `(M / p^q M, phi, theta)` in coordinates: `phi = F sigma`,
/// `theta = V sigma^{-1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DTruncation {
    pub f: Matrix,
    pub v: Matrix,
}

impl DTruncation {
    pub fn ring(&self) -> &Arc<WittRing> {
        self.f.ring()
    }

    pub fn rank(&self) -> usize {
        self.f.rows()
    }

    /// `F sigma(V) = p` and `V sigma^{-1}(F) = p`.
    pub fn invariants_hold(&self) -> bool {
        let r = self.rank();
        let p = Matrix::identity(self.ring(), r).scale_int(self.ring().p());
        self.f.mul(&self.v.sigma()) == p && self.v.mul(&self.f.sigma_inv()) == p
    }

    pub fn reduce(&self, q: u32) -> Result<DTruncation> {
        Ok(DTruncation {
            f: self.f.reduce(q)?,
            v: self.v.reduce(q)?,
        })
    }
}

/// Whether `C` is a Dieudonne module: shift 0 and `p B^{-1}` integral.
fn verschiebung_matrix(c: &FCrystal) -> Result<Matrix> {
    if c.shift() != 0 {
        return Err(Error::NotDieudonne);
    }
    let (inv, e) = inverse_with_shift(c.matrix())?;
    match e {
        0 => Ok(inv.scale_int(c.ring().p()).sigma_inv()),
        1 => Ok(inv.sigma_inv()),
        _ => Err(Error::NotDieudonne),
    }
}

/// The D-truncation mod `p^q`; needs `q < n`.
pub fn verschiebung(c: &FCrystal, q: u32) -> Result<DTruncation> {
    let n = c.ring().n();
    if q == 0 || q >= n {
        return Err(Error::PrecisionExhausted {
            needed: q + 1,
            available: n,
        });
    }
    let v = verschiebung_matrix(c)?;
    let t = DTruncation {
        f: c.matrix().reduce(q)?,
        v: v.reduce(q)?,
    };
    debug_assert!(t.invariants_hold());
    Ok(t)
}

/// Module of `f` with `f F1 = F2 sigma(f)` and `f V1 = V2 sigma^{-1}(f)`.
pub fn d_trunc_hom(t1: &DTruncation, t2: &DTruncation) -> Result<HomModule> {
    if t1.ring() != t2.ring() {
        return Err(Error::RingMismatch);
    }
    Ok(linear_module(t1.ring(), t2.rank(), t1.rank(), |f| {
        vec![
            f.mul(&t1.f).sub(&t2.f.mul(&f.sigma())),
            f.mul(&t1.v).sub(&t2.v.mul(&f.sigma_inv())),
        ]
    }))
}

pub fn d_trunc_isom_search(t1: &DTruncation, t2: &DTruncation, seed: u64) -> Result<IsomResult> {
    if t1.rank() != t2.rank() {
        return Err(Error::BadShape("ranks differ".into()));
    }
    unit_search(&d_trunc_hom(t1, t2)?, seed)
}

/// `B = B0 diag(p^{deg_j})` with `B0` invertible: the basis vectors with
/// degree 1 span the second summand of a lift of the Hodge filtration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitForm {
    /// Over the ring of precision `n - 1`, where it is determined.
    pub b0: Matrix,
    pub degrees: Vec<u8>,
}

impl SplitForm {
    /// Reads the grading off the column valuations of `B`.
    pub fn detect(c: &FCrystal) -> Result<SplitForm> {
        if c.shift() != 0 {
            return Err(Error::NoSplitForm);
        }
        let b = c.matrix();
        let ring = b.ring();
        let n = ring.n();
        let r = b.rows();
        let mut degrees = Vec::with_capacity(r);
        for j in 0..r {
            let v = (0..r).filter_map(|i| ring.val(b.entry(i, j))).min();
            match v {
                Some(0) => degrees.push(0u8),
                Some(1) => degrees.push(1u8),
                _ => return Err(Error::NoSplitForm),
            }
        }
        let b0 = Matrix::from_fn(ring, r, r, |i, j| {
            ring.div_p_pow(b.entry(i, j), degrees[j] as u32)
        })
        .reduce(n - 1)?;
        if b0.det().valuation() != Some(0) {
            return Err(Error::NoSplitForm);
        }
        Ok(SplitForm { b0, degrees })
    }

    pub fn d(&self) -> usize {
        self.degrees.iter().filter(|&&x| x == 1).count()
    }

    /// Checks `B = B0 diag(p^{deg})` at the precision of `b0`.
    pub fn validate(&self, c: &FCrystal) -> Result<()> {
        let r = c.rank();
        if self.degrees.len() != r || self.degrees.iter().any(|&x| x > 1) {
            return Err(Error::NoSplitForm);
        }
        let ring = self.b0.ring();
        let diag: Vec<Vec<u64>> = self
            .degrees
            .iter()
            .map(|&x| ring.int_coeffs(if x == 1 { ring.p() as i64 } else { 1 }))
            .collect();
        let lhs = self.b0.mul(&Matrix::diag(ring, &diag));
        if lhs != c.matrix().reduce(ring.n())? || self.b0.det().valuation() != Some(0) {
            return Err(Error::NoSplitForm);
        }
        Ok(())
    }
}

/// Output of [`congruence_upgrade`].
#[derive(Clone, Debug)]
pub struct Upgrade {
    /// `g'` with `g' (g phi) g'^{-1} = g_q phi`.
    pub conjugator: Matrix,
    pub g_q: Matrix,
    pub q: u32,
}

/// Turns an isomorphism `f` of D-truncations mod `p^q` from `(M, phi)` to
/// `(M, g phi)` into `g'` with `g' g phi g'^{-1} = g_q phi`,
/// `g_q = 1 mod p^q`.
///
/// After conjugating by a lift of `f`, `phi` and `g phi` agree mod `p^q`.
/// Then `g_0 = sigma_0^{-1} g sigma_0` with `sigma_0 = B0 sigma` is
/// `1 + p^{q-1} u` mod `p^q` for `u` mapping the degree-1 summand into the
/// degree-0 one, and `1 + p^q u` does the rest.
pub fn congruence_upgrade(
    c: &FCrystal,
    split: &SplitForm,
    g: &Matrix,
    f: &Matrix,
) -> Result<Upgrade> {
    split.validate(c)?;
    let q = f.ring().n();
    let ring = c.ring().clone();
    let n = ring.n();
    if n < q + 3 {
        return Err(Error::PrecisionExhausted {
            needed: q + 3,
            available: n,
        });
    }
    let b = c.matrix();
    let big_f = f.lift_to(&ring).map_err(|_| Error::LiftFailed("f lives over another field".into()))?;
    let f_inv = unit_inverse(&big_f).map_err(|_| Error::LiftFailed("f is not invertible".into()))?;
    let g = g.reduce(n)?;
    let x = f_inv.mul(&g).mul(b).mul(&big_f.sigma());
    if x.sub(b).valuation().is_some_and(|v| v < q) {
        return Err(Error::LiftFailed("f does not intertwine phi mod p^q".into()));
    }
    // g' = X B^{-1}
    let (b_inv, e) = inverse_with_shift(b)?;
    let w = x.reduce(n - e)?.mul(&b_inv);
    if w.valuation().is_some_and(|v| v < e) {
        return Err(Error::LiftFailed("twist is not integral".into()));
    }
    let n2 = (n - 2 * e).min(split.b0.ring().n());
    let g1 = w.div_p_pow(e).reduce(n2)?;
    let b0 = split.b0.reduce(n2)?;
    let g0 = unit_inverse(&b0)?.mul(&g1).mul(&b0).sigma_inv();
    let ring2 = g0.ring().clone();
    let r = c.rank();
    let id = Matrix::identity(&ring2, r);
    let d0 = g0.sub(&id);
    if d0.valuation().is_some_and(|v| v < q - 1) {
        return Err(Error::LiftFailed("g_0 is not 1 mod p^{q-1}".into()));
    }
    let u_full = d0.div_p_pow(q - 1).reduce(1)?;
    let mut u = Matrix::zeros(&ring2, r, r);
    for i in 0..r {
        for j in 0..r {
            let entry = u_full.entry(i, j);
            if u_full.ring().is_zero(entry) {
                continue;
            }
            if split.degrees[i] != 0 || split.degrees[j] != 1 {
                return Err(Error::LiftFailed(
                    "theta is not compatible: g_0 leaves the unipotent radical".into(),
                ));
            }
            u.set(i, j, entry.clone());
        }
    }
    let g_tilde = id.add(&u.mul_p_pow(q));
    let conjugator = g_tilde.mul(&f_inv.reduce(n2)?);
    let g_q = conjugated_twist(c, &g, &conjugator)?;
    if !g_q.congruent_to_identity(q) {
        return Err(Error::LiftFailed("upgraded twist is not 1 mod p^q".into()));
    }
    Ok(Upgrade {
        conjugator,
        g_q,
        q,
    })
}

/// `h g B sigma(h)^{-1} B^{-1}`, over the precision where it is determined.
pub fn conjugated_twist(c: &FCrystal, g: &Matrix, h: &Matrix) -> Result<Matrix> {
    let m = h.ring().n();
    let b = c.matrix().reduce(m)?;
    let g = g.reduce(m)?;
    let y = h.mul(&g).mul(&b).mul(&unit_inverse(&h.sigma())?);
    let (b_inv, e) = inverse_with_shift(&b)?;
    let z = y.reduce(m - e)?.mul(&b_inv);
    if z.valuation().is_some_and(|v| v < e) {
        return Err(Error::LiftFailed("conjugated twist is not integral".into()));
    }
    z.div_p_pow(e).reduce(m - 2 * e)
}

/// Facts behind the bound 3 for a crystal `(1 + N) phi_0` with `phi_0`
/// monomial and block diagonal and `N` in `Hom(M_2, M_1)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParabolicCertificate {
    /// Basis indices spanning `M_1`.
    pub block: Vec<usize>,
    /// Largest sign deviation over the cycles of `Hom(M_2, M_1)`.
    pub upper_radical_s: u64,
    /// The same for `Hom(M_1, M_2)`.
    pub lower_radical_s: u64,
    /// Fixed-lattice exponents of `(M_1, phi_0)` and `(M_2, phi_0)`.
    pub block_exponents: [u32; 2],
    /// Residue degree over which the fixed lattices were computed.
    pub degree: usize,
}

impl ParabolicCertificate {
    pub fn holds(&self) -> bool {
        self.upper_radical_s <= 1 && self.lower_radical_s <= 1 && self.block_exponents.iter().all(|&m| m <= 1)
    }
}

/// Smallest coordinate subsets stable under `B`, other than the whole basis.
fn stable_blocks(b: &Matrix) -> Vec<Vec<usize>> {
    let r = b.rows();
    let ring = b.ring();
    let mut out: BTreeSet<Vec<usize>> = BTreeSet::new();
    for start in 0..r {
        let mut inside = vec![false; r];
        let mut stack = vec![start];
        inside[start] = true;
        while let Some(j) = stack.pop() {
            for i in 0..r {
                if !inside[i] && !ring.is_zero(b.entry(i, j)) {
                    inside[i] = true;
                    stack.push(i);
                }
            }
        }
        let set: Vec<usize> = (0..r).filter(|&i| inside[i]).collect();
        if set.len() < r {
            out.insert(set);
        }
    }
    out.into_iter().collect()
}

/// Cycles of `E_ij` (rows in `rows`, columns in `cols`) under the monomial
/// `B0`, with exponent tuples.
pub fn monomial_cycle_tuples(b0: &Matrix, rows: &[usize], cols: &[usize]) -> Option<Vec<ExponentTuple>> {
    let ring = b0.ring();
    let r = b0.rows();
    let mut pi = vec![0usize; r];
    let mut k = vec![0i64; r];
    for j in 0..r {
        let mut nz = (0..r).filter(|&i| !ring.is_zero(b0.entry(i, j)));
        let i = nz.next()?;
        if nz.next().is_some() {
            return None;
        }
        pi[j] = i;
        k[j] = ring.val(b0.entry(i, j))? as i64;
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &i0 in rows {
        for &j0 in cols {
            if seen.contains(&(i0, j0)) {
                continue;
            }
            let mut tuple = Vec::new();
            let (mut i, mut j) = (i0, j0);
            while seen.insert((i, j)) {
                tuple.push(k[i] - k[j]);
                (i, j) = (pi[i], pi[j]);
            }
            out.push(ExponentTuple::new(tuple).ok()?);
        }
    }
    Some(out)
}

/// Looks for a block decomposition certifying the bound 3 and checks its
/// numerical hypotheses. Fixed lattices are computed over the smallest
/// extension (degree at most 12) where they have full rank.
pub fn parabolic_certificate(c: &FCrystal) -> Result<ParabolicCertificate> {
    let b = c.matrix();
    let r = c.rank();
    let ring = c.ring().clone();
    for block in stable_blocks(b) {
        let rest: Vec<usize> = (0..r).filter(|i| !block.contains(i)).collect();
        let b11 = b.submatrix(&block, &block);
        let b22 = b.submatrix(&rest, &rest);
        let b12 = b.submatrix(&block, &rest);
        // N = B_12 B_22^{-1} must be integral
        let Ok((inv22, e)) = inverse_with_shift(&b22) else { continue };
        let n12 = b12.reduce(ring.n() - e)?.mul(&inv22);
        if n12.valuation().is_some_and(|v| v < e) {
            continue;
        }
        let mut b0 = Matrix::zeros(&ring, r, r);
        for (a, &i) in block.iter().enumerate() {
            for (bb, &j) in block.iter().enumerate() {
                b0.set(i, j, b11.entry(a, bb).clone());
            }
        }
        for (a, &i) in rest.iter().enumerate() {
            for (bb, &j) in rest.iter().enumerate() {
                b0.set(i, j, b22.entry(a, bb).clone());
            }
        }
        let Some(upper) = monomial_cycle_tuples(&b0, &block, &rest) else { continue };
        let Some(lower) = monomial_cycle_tuples(&b0, &rest, &block) else { continue };
        let s_max = |ts: &[ExponentTuple]| ts.iter().map(sign_deviation).max().unwrap_or(0);
        let c1 = FCrystal::new(b11, 0)?;
        let c2 = FCrystal::new(b22, 0)?;
        let Some((degree, m1, m2)) = block_fixed_exponents(&c1, &c2)? else { continue };
        return Ok(ParabolicCertificate {
            block,
            upper_radical_s: s_max(&upper),
            lower_radical_s: s_max(&lower),
            block_exponents: [m1, m2],
            degree,
        });
    }
    Err(Error::UnsupportedShape)
}

fn block_fixed_exponents(c1: &FCrystal, c2: &FCrystal) -> Result<Option<(usize, u32, u32)>> {
    let ring = c1.ring();
    let mut degree = ring.q();
    while degree <= MAX_FIELD_DEGREE {
        if let Ok(big) = make_witt_ring(ring.p(), degree, ring.n()) {
            let d1 = build_stairs_datum_with(&c1.embed(&big)?, Strategy::FixedLattice);
            let d2 = build_stairs_datum_with(&c2.embed(&big)?, Strategy::FixedLattice);
            if let (Ok(d1), Ok(d2)) = (d1, d2) {
                return Ok(Some((degree, d1.m, d2.m)));
            }
        }
        degree += ring.q();
    }
    Ok(None)
}

/// Where an i-number upper bound comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UpperSource {
    /// `B` invertible: every twist is isomorphic by Lang's theorem.
    H0,
    /// Fixed lattice of a slope-0 End with exponent `m1`.
    Lang,
    /// A verified stairs datum, or the block decomposition certificate.
    Stairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Exhaustive,
    Randomized,
}

/// Upper bound from a verified certificate plus sampling evidence below it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProbeReport {
    pub upper: Option<u32>,
    pub upper_source: Option<UpperSource>,
    /// `k + 1` for the largest sampled level `k` at which some twist
    /// `g = 1 mod p^k` was shown non-isomorphic over the base field; 0 when
    /// none was. Evidence, not a certified lower bound.
    pub floor_evidence: u32,
    pub regime: Regime,
}

#[derive(Clone, Copy, Debug)]
pub struct ProbeOptions {
    /// Largest twist level sampled.
    pub n_max: u32,
    /// Twists sampled per level.
    pub trials: usize,
    pub seed: u64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            n_max: 3,
            trials: 2,
            seed: 0,
        }
    }
}

/// Certified upper bounds on the i-number, smallest first.
pub fn i_number_certificates(c: &FCrystal) -> Vec<(u32, UpperSource)> {
    let mut out = Vec::new();
    let ring = c.ring();
    if c.shift() == 0 && c.matrix().det().valuation() == Some(0) {
        out.push((0, UpperSource::H0));
    }
    let mut degree = ring.q();
    while degree <= MAX_FIELD_DEGREE {
        let fixed = make_witt_ring(ring.p(), degree, ring.n())
            .and_then(|big| c.embed(&big))
            .and_then(|cb| build_stairs_datum_with(&cb, Strategy::FixedLattice));
        if let Ok(d) = fixed {
            if d.validate().is_ok() {
                out.push((d.m, UpperSource::Lang));
                break;
            }
        }
        degree += ring.q();
    }
    if let Ok(d) = build_stairs_datum_with(c, Strategy::Monomial) {
        if d.validate().is_ok() {
            let mut bound = 2 * d.m + epsilon(ring.p());
            if d.multiplicative {
                bound = bound.min(d.m + 1);
            }
            out.push((bound, UpperSource::Stairs));
        }
    }
    if let Ok(cert) = parabolic_certificate(c) {
        if cert.holds() {
            out.push((3, UpperSource::Stairs));
        }
    }
    out.sort_by_key(|&(v, _)| v);
    out
}

fn random_matrix(ring: &Arc<WittRing>, r: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let m = ring.modulus();
    let q = ring.q();
    Matrix::from_coeffs(
        ring,
        r,
        r,
        (0..r * r).map(|_| (0..q).map(|_| rng.gen_range(0..m)).collect()).collect(),
    )
    .expect("shape")
}

/// A random element of `1 + p^k M_r(W)`, or a random unit when `k = 0`.
pub fn random_twist(ring: &Arc<WittRing>, r: usize, k: u32, rng: &mut ChaCha8Rng) -> Matrix {
    let id = Matrix::identity(ring, r);
    if k > 0 {
        return id.add(&random_matrix(ring, r, rng).mul_p_pow(k));
    }
    loop {
        let g = random_matrix(ring, r, rng);
        if g.det().valuation() == Some(0) {
            return g;
        }
    }
}

pub fn i_number_probe(c: &FCrystal, opts: ProbeOptions) -> ProbeReport {
    let certs = i_number_certificates(c);
    let (upper, upper_source) = certs
        .first()
        .map_or((None, None), |&(v, s)| (Some(v), Some(s)));
    let n = c.ring().n();
    let top = upper.unwrap_or(opts.n_max).min(opts.n_max).min(n.saturating_sub(1));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut floor = 0;
    let mut regime = Regime::Exhaustive;
    for k in (0..top).rev() {
        let mut found = false;
        for _ in 0..opts.trials {
            let g = random_twist(c.ring(), c.rank(), k, &mut rng);
            let Ok(twisted) = c.twist(&g) else { continue };
            match isom_search_seeded(c, &twisted, n, opts.seed) {
                Ok(IsomResult {
                    witness: None,
                    regime: SearchRegime::Exhaustive { .. },
                    ..
                }) => found = true,
                Ok(IsomResult {
                    regime: SearchRegime::Randomized { .. },
                    ..
                })
                | Err(_) => regime = Regime::Randomized,
                Ok(_) => {}
            }
            if found {
                break;
            }
        }
        if found {
            floor = k + 1;
            break;
        }
    }
    ProbeReport {
        upper,
        upper_source,
        floor_evidence: floor,
        regime,
    }
}

/// Image of `Aut` at precision `big` in `GL_r(W_level)`, as sorted flattened
/// matrices.
fn aut_image(c: &FCrystal, big: u32, level: u32) -> Result<Vec<Vec<u64>>> {
    let module = hom_module(c, c, big)?;
    let rows = module.image_at(level)?;
    let ring = module.ring.with_precision(level)?;
    let p = ring.p();
    let r = c.rank();
    let image = HomModule {
        basis: rows.iter().map(|v| unflatten(&ring, r, r, v)).collect(),
        exponents: rows
            .iter()
            .map(|v| crate::witt::val_u64(*v.iter().find(|&&x| x != 0).expect("nonzero"), p))
            .collect(),
        ring,
        rows: r,
        cols: r,
    };
    let mut units: Vec<Vec<u64>> = module_elements(&image, EXHAUSTIVE_LIMIT)?
        .into_iter()
        .filter(|g| g.det().valuation() == Some(0))
        .map(|g| flatten(&g))
        .collect();
    units.sort_unstable();
    Ok(units)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AutStabilization {
    pub level: u32,
    pub from: u32,
    pub checked_to: u32,
    pub image_size: usize,
    pub pass: bool,
}

/// Compares the images of `Aut` mod `p^N` in `Aut` mod `p^{n - m + t}` for
/// `N` from `n + h + t` up to the ring precision, `n = 2m + eps`.
pub fn aut_image_stabilization_check(c: &FCrystal, t: u32) -> Result<AutStabilization> {
    let d = crate::stairs::build_stairs_datum(c)?;
    let h = c.hodge_data()?.h;
    let nn = 2 * d.m + epsilon(c.ring().p());
    let level = nn - d.m + t;
    let from = nn + h + t;
    let top = c.ring().n();
    if from > top {
        return Err(Error::PrecisionExhausted {
            needed: from,
            available: top,
        });
    }
    let reference = aut_image(c, from, level)?;
    let mut pass = true;
    for big in from + 1..=top {
        if aut_image(c, big, level)? != reference {
            pass = false;
        }
    }
    Ok(AutStabilization {
        level,
        from,
        checked_to: top,
        image_size: reference.len(),
        pass,
    })
}

/// Isomorphisms of polarized crystals: Hom-module units with
/// `f^T J2 f = J1`, searched exhaustively.
pub fn polarized_isom_search(
    p1: &PolarizedCrystal,
    p2: &PolarizedCrystal,
    m: u32,
) -> Result<IsomResult> {
    if p1.c != p2.c {
        return Err(Error::BadParams("polarizations have different weights".into()));
    }
    let module = hom_module(&p1.base, &p2.base, m)?;
    let j1 = p1.gram.reduce(m)?;
    let j2 = p2.gram.reduce(m)?;
    let elems = module_elements(&module, EXHAUSTIVE_LIMIT)?;
    let candidates = elems.len() as u64;
    let witness = elems
        .into_iter()
        .find(|f| f.det().valuation() == Some(0) && f.transpose().mul(&j2).mul(f) == j1);
    Ok(IsomResult {
        witness,
        regime: SearchRegime::Exhaustive { candidates },
        hom_log_size: module.log_size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{etale, ordinary, supersingular};

    #[test]
    fn verschiebung_examples() {
        let r = make_witt_ring(3, 1, 4).unwrap();
        let t = verschiebung(&etale(&r, 2).unwrap(), 3).unwrap();
        assert_eq!(t.v.valuation().unwrap(), 1);
        let t = verschiebung(&ordinary(&r, 2, 1).unwrap(), 3).unwrap();
        let rq = t.ring().clone();
        assert_eq!(t.v, Matrix::from_ints(&rq, 2, 2, &[3, 0, 0, 1]));
        let t = verschiebung(&supersingular(&r, 1).unwrap(), 3).unwrap();
        // theta(e1) = e2, theta(e2) = p e1
        assert_eq!(t.v, Matrix::from_ints(&rq, 2, 2, &[0, 3, 1, 0]));
        assert!(t.invariants_hold());
        let bad = FCrystal::new(Matrix::from_ints(&r, 1, 1, &[9]), 0).unwrap();
        assert_eq!(verschiebung(&bad, 2).unwrap_err(), Error::NotDieudonne);
    }

    #[test]
    fn split_form_of_ordinary() {
        let r = make_witt_ring(2, 1, 5).unwrap();
        let c = ordinary(&r, 2, 1).unwrap();
        let s = SplitForm::detect(&c).unwrap();
        assert_eq!(s.degrees, vec![0, 1]);
        assert_eq!(s.d(), 1);
        assert!(s.b0.is_identity());
    }
}
