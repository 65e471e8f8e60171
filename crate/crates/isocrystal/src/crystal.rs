//! Latticed F-isocrystals (M, phi) with phi(x) = p^{-e} B sigma(x), their
//! functorial constructions, Hodge and Newton polygons, and the worked
//! families used throughout the test corpus.

use std::fmt;
use std::sync::Arc;

use num_integer::Integer;
use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::plinalg::{inverse_with_shift, smith_normal_form, Matrix};
use crate::witt::{WittElem, WittRing};

#[derive(Clone, PartialEq, Eq)]
pub struct FCrystal {
    b: Matrix,
    shift: u32,
}

impl fmt::Debug for FCrystal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FCrystal(shift {}) {:?}", self.shift, self.b)
    }
}

/// Slopes with multiplicities, strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polygon {
    pub points: Vec<(Rational64, usize)>,
}

impl Polygon {
    pub fn from_slopes(mut slopes: Vec<Rational64>) -> Polygon {
        slopes.sort();
        let mut points: Vec<(Rational64, usize)> = Vec::new();
        for s in slopes {
            match points.last_mut() {
                Some((last, m)) if *last == s => *m += 1,
                _ => points.push((s, 1)),
            }
        }
        Polygon { points }
    }

    pub fn rank(&self) -> usize {
        self.points.iter().map(|(_, m)| m).sum()
    }

    /// Slopes listed with multiplicity, increasing.
    pub fn slopes(&self) -> Vec<Rational64> {
        self.points
            .iter()
            .flat_map(|(s, m)| std::iter::repeat(*s).take(*m))
            .collect()
    }

    /// Multiset union.
    pub fn union(&self, other: &Polygon) -> Polygon {
        let mut s = self.slopes();
        s.extend(other.slopes());
        Polygon::from_slopes(s)
    }

    /// Value of the polygon (partial sums of increasing slopes) at x = k.
    pub fn height_at(&self, k: usize) -> Rational64 {
        self.slopes().iter().take(k).copied().sum()
    }

    /// Whether `self` lies on or above `other` with the same endpoints.
    pub fn lies_above(&self, other: &Polygon) -> bool {
        let r = self.rank();
        r == other.rank()
            && self.height_at(r) == other.height_at(r)
            && (0..=r).all(|k| self.height_at(k) >= other.height_at(k))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HodgeData {
    pub hodge: Polygon,
    pub s: u32,
    pub h: u32,
}

impl FCrystal {
    /// Build a crystal from B and the shift e, normalizing so that e = 0 or
    /// some entry of B is a unit. Each division by p costs one digit of
    /// precision.
    pub fn new(b: Matrix, shift: u32) -> Result<FCrystal> {
        if !b.is_square() || b.rows() == 0 {
            return Err(Error::BadShape(format!("{}x{} matrix", b.rows(), b.cols())));
        }
        let mut b = b;
        let mut shift = shift;
        while shift > 0 {
            match b.valuation() {
                Some(v) if v >= 1 => {
                    let n = b.ring().n();
                    if n <= 1 {
                        return Err(Error::PrecisionExhausted {
                            needed: 2,
                            available: n,
                        });
                    }
                    b = b.div_p_pow(1).reduce(n - 1)?;
                    shift -= 1;
                }
                None => return Err(Error::SingularAtPrecision),
                _ => break,
            }
        }
        let n = b.ring().n();
        let exps = smith_normal_form(&b).exponents;
        if exps.iter().any(|&e| e >= n) || exps.iter().sum::<u32>() >= n {
            return Err(Error::SingularAtPrecision);
        }
        Ok(FCrystal { b, shift })
    }

    pub fn ring(&self) -> &Arc<WittRing> {
        self.b.ring()
    }
    pub fn rank(&self) -> usize {
        self.b.rows()
    }
    pub fn matrix(&self) -> &Matrix {
        &self.b
    }
    pub fn shift(&self) -> u32 {
        self.shift
    }

    /// The same crystal read at a lower precision.
    pub fn reduce(&self, m: u32) -> Result<FCrystal> {
        FCrystal::new(self.b.reduce(m)?, self.shift)
    }

    /// Base change to W_n(F_{p^Q}).
    pub fn embed(&self, target: &Arc<WittRing>) -> Result<FCrystal> {
        FCrystal::new(self.b.embed(target)?, self.shift)
    }

    /// The crystal (M, g phi).
    pub fn twist(&self, g: &Matrix) -> Result<FCrystal> {
        FCrystal::new(g.try_mul(&self.b)?, self.shift)
    }

    pub fn hodge_data(&self) -> Result<HodgeData> {
        let n = self.ring().n();
        let exps = smith_normal_form(&self.b).exponents;
        if let Some(&bad) = exps.iter().find(|&&e| e >= n) {
            return Err(Error::PrecisionExhausted {
                needed: bad + 1,
                available: n,
            });
        }
        let min = exps.iter().copied().min().unwrap_or(0) as i64;
        let e = self.shift as i64;
        let s = (e - min).max(0);
        let slopes: Vec<i64> = exps.iter().map(|&x| s - e + x as i64).collect();
        let h = slopes.iter().copied().max().unwrap_or(0);
        Ok(HodgeData {
            hodge: Polygon::from_slopes(slopes.iter().map(|&x| Rational64::from_integer(x)).collect()),
            s: s as u32,
            h: h as u32,
        })
    }

    /// Precision needed for the Newton polygon to be certified: q r h + 1.
    pub fn newton_precision_needed(&self) -> Result<u32> {
        let h = self.hodge_data()?.h;
        Ok(self.ring().q() as u32 * self.rank() as u32 * h + 1)
    }

    /// The linearization L = B sigma(B) ... sigma^{q-1}(B), so that
    /// p^{qe} phi^q acts as L.
    pub fn linearization(&self) -> Matrix {
        let q = self.ring().q();
        let mut l = self.b.clone();
        let mut sb = self.b.clone();
        for _ in 1..q {
            sb = sb.sigma();
            l = l.mul(&sb);
        }
        l
    }

    pub fn newton_polygon(&self) -> Result<Polygon> {
        let n = self.ring().n();
        let needed = self.newton_precision_needed()?;
        if n < needed {
            return Err(Error::PrecisionExhausted {
                needed,
                available: n,
            });
        }
        let q = self.ring().q() as i64;
        let r = self.rank();
        let cp = self.linearization().charpoly();
        let ring = self.ring();
        // points (k, v(a_{r-k})); a_r = 1.
        let pts: Vec<(i64, i64)> = (0..=r)
            .filter_map(|k| ring.val(&cp[r - k]).map(|v| (k as i64, v as i64)))
            .collect();
        if pts.last().map(|&(k, _)| k) != Some(r as i64) {
            return Err(Error::PrecisionExhausted {
                needed: n + 1,
                available: n,
            });
        }
        let hull = lower_hull(&pts);
        let e = self.shift as i64;
        let mut slopes = Vec::with_capacity(r);
        for w in hull.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let lam = Rational64::new(y1 - y0, x1 - x0);
            let s = lam / Rational64::from_integer(q) - Rational64::from_integer(e);
            slopes.extend(std::iter::repeat(s).take((x1 - x0) as usize));
        }
        Ok(Polygon::from_slopes(slopes))
    }

    /// The dual (M*, phi) with phi(f) = sigma o f o phi^{-1}; no Tate twist.
    pub fn dual(&self) -> Result<FCrystal> {
        let (c, e_inv) = inverse_with_shift(&self.b)?;
        let ct = c.transpose();
        let e = self.shift;
        if e >= e_inv {
            FCrystal::new(ct.mul_p_pow(e - e_inv), 0)
        } else {
            FCrystal::new(ct, e_inv - e)
        }
    }

    pub fn tensor(&self, other: &FCrystal) -> Result<FCrystal> {
        let (a, b) = common_precision(self, other)?;
        FCrystal::new(a.b.kron(&b.b), a.shift + b.shift)
    }

    pub fn direct_sum(&self, other: &FCrystal) -> Result<FCrystal> {
        let (a, b) = common_precision(self, other)?;
        let e = a.shift.max(b.shift);
        let ba = a.b.mul_p_pow(e - a.shift);
        let bb = b.b.mul_p_pow(e - b.shift);
        FCrystal::new(ba.block_diag(&bb), e)
    }

    /// End(M) = M tensor M*, with basis index i * r + j for the matrix unit
    /// E_{ij}; phi acts by X -> B sigma(X) B^{-1}.
    pub fn end(&self) -> Result<FCrystal> {
        self.tensor(&self.dual()?)
    }

    /// phi applied to a column vector: p^{-e} B sigma(x), returned as the
    /// integral vector B sigma(x) together with e.
    pub fn apply_phi(&self, x: &Matrix) -> Matrix {
        self.b.mul(&x.sigma())
    }
}

fn common_precision(a: &FCrystal, b: &FCrystal) -> Result<(FCrystal, FCrystal)> {
    let (ra, rb) = (a.ring(), b.ring());
    if ra.p() != rb.p() || ra.q() != rb.q() {
        return Err(Error::RingMismatch);
    }
    let n = ra.n().min(rb.n());
    Ok((
        if ra.n() == n { a.clone() } else { a.reduce(n)? },
        if rb.n() == n { b.clone() } else { b.reduce(n)? },
    ))
}

/// Lower convex hull of points sorted by x.
fn lower_hull(pts: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut hull: Vec<(i64, i64)> = Vec::new();
    for &p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b if it lies on or above segment a-p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Cyclic crystal with phi(e_i) = u_i p^{n_i} e_{i+1} (indices mod l).
pub fn cyclic_from_exponents(
    ring: &Arc<WittRing>,
    tau: &[i64],
    units: Option<&[WittElem]>,
) -> Result<FCrystal> {
    let l = tau.len();
    if l == 0 {
        return Err(Error::BadParams("empty exponent tuple".into()));
    }
    if let Some(u) = units {
        if u.len() != l {
            return Err(Error::BadParams("one unit per arrow required".into()));
        }
    }
    let e = (-tau.iter().copied().min().unwrap()).max(0);
    let mut b = Matrix::zeros(ring, l, l);
    for (i, &ni) in tau.iter().enumerate() {
        let mut c = ring.int_coeffs(1);
        c = ring.mul_p_pow(&c, (ni + e) as u32);
        if let Some(u) = units {
            c = ring.mul(&c, u[i].coeffs());
        }
        b.set((i + 1) % l, i, c);
    }
    FCrystal::new(b, e as u32)
}

/// A crystal with a perfect alternating form J satisfying
/// B^T J B = p^c sigma(J).
#[derive(Clone, Debug)]
pub struct PolarizedCrystal {
    pub base: FCrystal,
    pub gram: Matrix,
    pub c: u32,
}

impl PolarizedCrystal {
    pub fn new(base: FCrystal, gram: Matrix, c: u32) -> Result<PolarizedCrystal> {
        let pc = PolarizedCrystal { base, gram, c };
        pc.validate()?;
        Ok(pc)
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.base.matrix();
        let j = &self.gram;
        let r = b.rows();
        if self.base.shift() != 0 {
            return Err(Error::ShiftUnsupported);
        }
        if j.rows() != r || j.cols() != r {
            return Err(Error::BadShape("Gram matrix shape".into()));
        }
        if j.transpose() != j.neg() || (0..r).any(|i| !j.ring().is_zero(j.entry(i, i))) {
            return Err(Error::BadParams("Gram matrix is not alternating".into()));
        }
        if j.det().valuation() != Some(0) {
            return Err(Error::BadParams("Gram matrix is not perfect".into()));
        }
        let lhs = b.transpose().mul(j).mul(b);
        let rhs = j.sigma().mul_p_pow(self.c);
        if lhs != rhs {
            return Err(Error::BadParams("form is not compatible with phi".into()));
        }
        Ok(())
    }
}

/// Example 2.3.2: the cyclic crystal on (1, ..., 1, -1).
pub fn example_2_3_2(ring: &Arc<WittRing>, r: usize) -> Result<FCrystal> {
    if r < 2 {
        return Err(Error::BadParams("rank must be at least 2".into()));
    }
    let mut tau = vec![1i64; r];
    tau[r - 1] = -1;
    cyclic_from_exponents(ring, &tau, None)
}

/// The isoclinic family with phi(e_i) = e_{i+d} for i < c and p e_{i+d}
/// otherwise, d = r - c.
pub fn isoclinic_3_3_6(ring: &Arc<WittRing>, r: usize, c: usize) -> Result<FCrystal> {
    if c == 0 || c >= r || c.gcd(&(r - c)) != 1 {
        return Err(Error::BadParams(format!(
            "need 0 < c < r with gcd(c, r - c) = 1, got r = {r}, c = {c}"
        )));
    }
    let d = r - c;
    let mut b = Matrix::zeros(ring, r, r);
    for i in 0..r {
        let v = if i < c { 1 } else { ring.p() as i64 };
        b.set((i + d) % r, i, ring.int_coeffs(v));
    }
    FCrystal::new(b, 0)
}

/// phi_alpha: (e1, ..., e6) -> (e2, p e3, p e1, e5, e6 + alpha e1, p e4).
pub fn phi_alpha_4_5(ring: &Arc<WittRing>, alpha: &WittElem) -> Result<FCrystal> {
    if **alpha.ring() != **ring {
        return Err(Error::RingMismatch);
    }
    let p = ring.p() as i64;
    let mut b = Matrix::zeros(ring, 6, 6);
    // column j holds phi(e_{j+1})
    b.set(1, 0, ring.int_coeffs(1));
    b.set(2, 1, ring.int_coeffs(p));
    b.set(0, 2, ring.int_coeffs(p));
    b.set(4, 3, ring.int_coeffs(1));
    b.set(5, 4, ring.int_coeffs(1));
    b.set(0, 4, alpha.coeffs().to_vec());
    b.set(3, 5, ring.int_coeffs(p));
    FCrystal::new(b, 0)
}

/// The Gram matrix with lambda(e_i, e_j) = 1 for (i, j) in
/// {(1,6), (3,5), (2,4)}, extended alternatingly.
pub fn gram_4_5_4(ring: &Arc<WittRing>) -> Matrix {
    let mut j = Matrix::zeros(ring, 6, 6);
    for &(a, b) in &[(0usize, 5usize), (2, 4), (1, 3)] {
        j.set(a, b, ring.int_coeffs(1));
        j.set(b, a, ring.int_coeffs(-1));
    }
    j
}

pub fn polarized_4_5_4(ring: &Arc<WittRing>, alpha: &WittElem) -> Result<PolarizedCrystal> {
    PolarizedCrystal::new(phi_alpha_4_5(ring, alpha)?, gram_4_5_4(ring), 1)
}

/// d copies of the slope-1/2 object with B = [[0, p], [1, 0]].
pub fn supersingular(ring: &Arc<WittRing>, d: usize) -> Result<FCrystal> {
    if d == 0 {
        return Err(Error::BadParams("d must be positive".into()));
    }
    let p = ring.p() as i64;
    let block = FCrystal::new(Matrix::from_ints(ring, 2, 2, &[0, p, 1, 0]), 0)?;
    let mut out = block.clone();
    for _ in 1..d {
        out = out.direct_sum(&block)?;
    }
    Ok(out)
}

/// diag(1, ..., 1, p, ..., p) with d entries equal to p.
pub fn ordinary(ring: &Arc<WittRing>, r: usize, d: usize) -> Result<FCrystal> {
    if r == 0 || d > r {
        return Err(Error::BadParams(format!("need 0 <= d <= r, r > 0; got r = {r}, d = {d}")));
    }
    let p = ring.p() as i64;
    let entries: Vec<Vec<u64>> = (0..r)
        .map(|i| ring.int_coeffs(if i < r - d { 1 } else { p }))
        .collect();
    FCrystal::new(Matrix::diag(ring, &entries), 0)
}

/// The identity crystal of rank r.
pub fn etale(ring: &Arc<WittRing>, r: usize) -> Result<FCrystal> {
    FCrystal::new(Matrix::identity(ring, r), 0)
}

/// Named corpus entries, as accepted by the command line.
#[derive(Clone, Debug)]
pub enum CorpusEntry {
    Crystal(FCrystal),
    Polarized(PolarizedCrystal),
}

/// Look up a corpus crystal by name. `alpha` is given as coefficients over
/// the ring for the two families that take it.
pub fn paper_corpus(
    ring: &Arc<WittRing>,
    name: &str,
    params: &[usize],
    alpha: Option<&WittElem>,
) -> Result<CorpusEntry> {
    let need = |k: usize| -> Result<()> {
        if params.len() == k {
            Ok(())
        } else {
            Err(Error::BadParams(format!("{name} takes {k} integer parameters")))
        }
    };
    let default_alpha = ring.zero();
    let alpha = alpha.unwrap_or(&default_alpha);
    Ok(match name {
        "example_2_3_2" => {
            need(1)?;
            CorpusEntry::Crystal(example_2_3_2(ring, params[0])?)
        }
        "isoclinic_3_3_6" => {
            need(2)?;
            CorpusEntry::Crystal(isoclinic_3_3_6(ring, params[0], params[1])?)
        }
        "phi_alpha_4_5" => {
            need(0)?;
            CorpusEntry::Crystal(phi_alpha_4_5(ring, alpha)?)
        }
        "supersingular" => {
            need(1)?;
            CorpusEntry::Crystal(supersingular(ring, params[0])?)
        }
        "ordinary" => {
            need(2)?;
            CorpusEntry::Crystal(ordinary(ring, params[0], params[1])?)
        }
        "polarized_4_5_4" => {
            need(0)?;
            CorpusEntry::Polarized(polarized_4_5_4(ring, alpha)?)
        }
        "etale" => {
            need(1)?;
            CorpusEntry::Crystal(etale(ring, params[0])?)
        }
        other => return Err(Error::UnknownCorpusName(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witt::make_witt_ring;

    fn r(a: i64, b: i64) -> Rational64 {
        Rational64::new(a, b)
    }

    #[test]
    fn normalization() {
        let ring = make_witt_ring(3, 1, 4).unwrap();
        let c = FCrystal::new(Matrix::from_ints(&ring, 2, 2, &[3, 0, 0, 3]), 1).unwrap();
        assert_eq!(c.shift(), 0);
        assert!(c.matrix().is_identity());
        let ss = supersingular(&ring, 1).unwrap();
        assert_eq!(ss.matrix(), &Matrix::from_ints(&ring, 2, 2, &[0, 3, 1, 0]));
    }

    #[test]
    fn hodge_examples() {
        let ring = make_witt_ring(2, 1, 6).unwrap();
        let hd = etale(&ring, 3).unwrap().hodge_data().unwrap();
        assert_eq!((hd.s, hd.h), (0, 0));
        let hd = supersingular(&ring, 1).unwrap().hodge_data().unwrap();
        assert_eq!(hd.hodge.slopes(), vec![r(0, 1), r(1, 1)]);
        assert_eq!((hd.s, hd.h), (0, 1));
    }

    #[test]
    fn dual_of_supersingular() {
        let ring = make_witt_ring(2, 1, 6).unwrap();
        let ss = supersingular(&ring, 1).unwrap();
        let d = ss.dual().unwrap().hodge_data().unwrap();
        assert_eq!((d.s, d.h), (1, 1));
        assert_eq!(ss.end().unwrap().rank(), 4);
        assert_eq!(etale(&ring, 2).unwrap().dual().unwrap(), etale(&ring, 2).unwrap());
    }

    #[test]
    fn newton_examples() {
        let ring = make_witt_ring(3, 1, 20).unwrap();
        let np = etale(&ring, 3).unwrap().newton_polygon().unwrap();
        assert_eq!(np.slopes(), vec![r(0, 1); 3]);
        for rk in 3..=5 {
            let np = example_2_3_2(&ring, rk).unwrap().newton_polygon().unwrap();
            assert_eq!(np.points, vec![(r(rk as i64 - 2, rk as i64), rk)]);
        }
        let np = cyclic_from_exponents(&ring, &[1, 0], None)
            .unwrap()
            .newton_polygon()
            .unwrap();
        assert_eq!(np.points, vec![(r(1, 2), 2)]);
        let np = phi_alpha_4_5(&ring, &ring.one()).unwrap().newton_polygon().unwrap();
        assert_eq!(np.points, vec![(r(1, 3), 3), (r(2, 3), 3)]);
    }

    #[test]
    fn newton_gate() {
        let ring = make_witt_ring(3, 1, 4).unwrap();
        let c = phi_alpha_4_5(&ring, &ring.one()).unwrap();
        assert!(matches!(
            c.newton_polygon(),
            Err(Error::PrecisionExhausted { needed: 7, available: 4 })
        ));
    }

    #[test]
    fn polarization() {
        let ring = make_witt_ring(3, 1, 5).unwrap();
        for a in [0, 1, 2] {
            polarized_4_5_4(&ring, &ring.from_int(a)).unwrap();
        }
        let bad = PolarizedCrystal::new(ordinary(&ring, 2, 1).unwrap(), Matrix::from_ints(&ring, 2, 2, &[0, 1, -1, 0]), 0);
        assert!(bad.is_err());
    }

    #[test]
    fn corpus_errors() {
        let ring = make_witt_ring(3, 1, 5).unwrap();
        assert!(matches!(
            paper_corpus(&ring, "nope", &[], None),
            Err(Error::UnknownCorpusName(_))
        ));
        assert!(matches!(
            isoclinic_3_3_6(&ring, 4, 2),
            Err(Error::BadParams(_))
        ));
    }
}
