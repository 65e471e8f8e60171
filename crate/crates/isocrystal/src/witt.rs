//! Truncated Witt vectors W_n(F_{p^q}) realized as (Z/p^n)[t]/(f), where f is
//! the lift of the Conway polynomial whose root t is a Teichmuller
//! representative. With that choice Frobenius is simply t -> t^p.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;

use crate::error::{Error, Result};

/// Conway polynomials, coefficients from the constant term up (monic).
static CONWAY: &[(u64, usize, &[u64])] = &[
    (2, 1, &[1, 1]),
    (3, 1, &[1, 1]),
    (5, 1, &[3, 1]),
    (7, 1, &[4, 1]),
    (2, 2, &[1, 1, 1]),
    (3, 2, &[2, 2, 1]),
    (5, 2, &[2, 4, 1]),
    (7, 2, &[3, 6, 1]),
    (2, 3, &[1, 1, 0, 1]),
    (3, 3, &[1, 2, 0, 1]),
    (5, 3, &[3, 3, 0, 1]),
    (7, 3, &[4, 0, 6, 1]),
    (2, 4, &[1, 1, 0, 0, 1]),
    (3, 4, &[2, 0, 0, 2, 1]),
    (5, 4, &[2, 4, 4, 0, 1]),
    (7, 4, &[3, 4, 5, 0, 1]),
    (2, 5, &[1, 0, 1, 0, 0, 1]),
    (3, 5, &[1, 2, 0, 0, 0, 1]),
    (5, 5, &[3, 4, 0, 0, 0, 1]),
    (7, 5, &[4, 1, 0, 0, 0, 1]),
    (2, 6, &[1, 1, 0, 1, 1, 0, 1]),
    (3, 6, &[2, 2, 1, 0, 2, 0, 1]),
    (5, 6, &[2, 0, 1, 4, 1, 0, 1]),
    (7, 6, &[3, 6, 4, 5, 1, 0, 1]),
    (2, 7, &[1, 1, 0, 0, 0, 0, 0, 1]),
    (3, 7, &[1, 0, 2, 0, 0, 0, 0, 1]),
    (5, 7, &[3, 3, 0, 0, 0, 0, 0, 1]),
    (7, 7, &[4, 6, 0, 0, 0, 0, 0, 1]),
    (2, 8, &[1, 0, 1, 1, 1, 0, 0, 0, 1]),
    (3, 8, &[2, 2, 2, 0, 1, 2, 0, 0, 1]),
    (5, 8, &[2, 4, 3, 0, 1, 0, 0, 0, 1]),
    (7, 8, &[3, 2, 6, 4, 0, 0, 0, 0, 1]),
    (2, 9, &[1, 0, 0, 0, 1, 0, 0, 0, 0, 1]),
    (3, 9, &[1, 1, 2, 2, 0, 0, 0, 0, 0, 1]),
    (5, 9, &[3, 1, 0, 2, 0, 0, 0, 0, 0, 1]),
    (7, 9, &[4, 6, 0, 1, 6, 0, 0, 0, 0, 1]),
    (2, 10, &[1, 1, 1, 1, 0, 1, 1, 0, 0, 0, 1]),
    (3, 10, &[2, 1, 0, 0, 2, 2, 2, 0, 0, 0, 1]),
    (5, 10, &[2, 1, 4, 2, 3, 3, 0, 0, 0, 0, 1]),
    (7, 10, &[3, 3, 2, 1, 4, 1, 1, 0, 0, 0, 1]),
    (2, 11, &[1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1]),
    (3, 11, &[1, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 1]),
    (5, 11, &[3, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1]),
    (7, 11, &[4, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1]),
    (2, 12, &[1, 1, 0, 1, 0, 1, 1, 1, 0, 0, 0, 0, 1]),
    (3, 12, &[2, 0, 1, 0, 1, 1, 1, 0, 0, 0, 0, 0, 1]),
    (5, 12, &[2, 2, 3, 4, 4, 0, 1, 1, 0, 0, 0, 0, 1]),
    (7, 12, &[3, 0, 5, 0, 4, 2, 3, 5, 2, 0, 0, 0, 1]),
];

/// Largest supported precision exponent: p^n must stay below 2^62 so that
/// products fit comfortably in u128.
const MODULUS_LIMIT: u128 = 1 << 62;

pub fn conway_polynomial(p: u64, q: usize) -> Option<&'static [u64]> {
    CONWAY
        .iter()
        .find(|(pp, qq, _)| *pp == p && *qq == q)
        .map(|(_, _, c)| *c)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[inline]
pub(crate) fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

#[inline]
fn addmod(a: u64, b: u64, m: u64) -> u64 {
    let s = a + b;
    if s >= m {
        s - m
    } else {
        s
    }
}

#[inline]
fn submod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + m - b
    }
}

/// p-adic valuation of a nonzero integer.
pub(crate) fn val_u64(mut x: u64, p: u64) -> u32 {
    debug_assert!(x != 0);
    let mut v = 0;
    while x % p == 0 {
        x /= p;
        v += 1;
    }
    v
}

/// Multiply two polynomials of degree < q modulo a monic `f` of degree q,
/// all coefficients taken mod m.
fn polymulmod(a: &[u64], b: &[u64], f: &[u64], m: u64) -> Vec<u64> {
    let q = f.len() - 1;
    let mut r = vec![0u64; 2 * q.max(1) - 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            r[i + j] = addmod(r[i + j], mulmod(ai, bj, m), m);
        }
    }
    for k in (q..r.len()).rev() {
        let c = r[k];
        if c == 0 {
            continue;
        }
        r[k] = 0;
        for i in 0..q {
            r[k - q + i] = submod(r[k - q + i], mulmod(c, f[i], m), m);
        }
    }
    r.truncate(q);
    r
}

fn polypowmod(a: &[u64], mut e: u128, f: &[u64], m: u64) -> Vec<u64> {
    let q = f.len() - 1;
    let mut res = vec![0u64; q];
    res[0] = 1 % m;
    let mut b = a.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            res = polymulmod(&res, &b, f, m);
        }
        e >>= 1;
        if e > 0 {
            b = polymulmod(&b, &b, f, m);
        }
    }
    res
}

/// Inverse of a nonzero residue modulo a prime.
fn inv_mod_prime(a: u64, p: u64) -> u64 {
    let mut r = 1u64;
    let mut b = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, b, p);
        }
        b = mulmod(b, b, p);
        e >>= 1;
    }
    r
}

fn trim(v: &mut Vec<u64>) {
    while v.len() > 1 && *v.last().unwrap() == 0 {
        v.pop();
    }
}

/// Inverse of `a` in F_p[x]/(f) by the extended Euclidean algorithm.
fn field_inverse(a: &[u64], f: &[u64], p: u64) -> Option<Vec<u64>> {
    let q = f.len() - 1;
    let mut r0 = f.to_vec();
    let mut r1: Vec<u64> = a.iter().map(|c| c % p).collect();
    trim(&mut r1);
    if r1.iter().all(|&c| c == 0) {
        return None;
    }
    let mut s0 = vec![0u64];
    let mut s1 = vec![1u64];
    while !(r1.len() == 1 && r1[0] == 0) {
        // r0 = quot * r1 + rem
        let mut rem = r0.clone();
        let mut quot = vec![0u64; rem.len().saturating_sub(r1.len()) + 1];
        let lead_inv = inv_mod_prime(*r1.last().unwrap(), p);
        while rem.len() >= r1.len() && !(rem.len() == 1 && rem[0] == 0) {
            let shift = rem.len() - r1.len();
            let c = mulmod(*rem.last().unwrap(), lead_inv, p);
            quot[shift] = c;
            for (i, &ri) in r1.iter().enumerate() {
                rem[shift + i] = submod(rem[shift + i], mulmod(c, ri, p), p);
            }
            rem.pop();
            if rem.is_empty() {
                rem.push(0);
            }
            trim(&mut rem);
        }
        // s2 = s0 - quot * s1
        let mut prod = vec![0u64; quot.len() + s1.len()];
        for (i, &qi) in quot.iter().enumerate() {
            for (j, &sj) in s1.iter().enumerate() {
                prod[i + j] = addmod(prod[i + j], mulmod(qi, sj, p), p);
            }
        }
        let mut s2 = vec![0u64; prod.len().max(s0.len())];
        for (i, c) in s2.iter_mut().enumerate() {
            let x = s0.get(i).copied().unwrap_or(0);
            let y = prod.get(i).copied().unwrap_or(0);
            *c = submod(x, y, p);
        }
        trim(&mut s2);
        r0 = std::mem::replace(&mut r1, rem);
        s0 = std::mem::replace(&mut s1, s2);
    }
    // r0 is a nonzero constant gcd
    if r0.len() != 1 {
        return None;
    }
    let c = inv_mod_prime(r0[0], p);
    let mut out = vec![0u64; q];
    for (i, &s) in s0.iter().enumerate() {
        if i < q {
            out[i] = mulmod(s, c, p);
        }
    }
    Some(out)
}

/// The ring W_n(F_{p^q}).
pub struct WittRing {
    p: u64,
    q: usize,
    n: u32,
    modulus: u64,
    conway: Vec<u64>,
    lift: Vec<u64>,
    frob: Vec<Vec<u64>>,
    frob_inv: Vec<Vec<u64>>,
}

impl fmt::Debug for WittRing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W_{}(F_{}^{})", self.n, self.p, self.q)
    }
}

impl PartialEq for WittRing {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q && self.n == other.n
    }
}

impl Eq for WittRing {}

static RINGS: Lazy<Mutex<HashMap<(u64, usize, u32), Arc<WittRing>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Build (or fetch from the cache) the ring W_n(F_{p^q}).
pub fn make_witt_ring(p: u64, q: usize, n: u32) -> Result<Arc<WittRing>> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if q == 0 || n == 0 {
        return Err(Error::BadParams("q and n must be at least 1".into()));
    }
    let conway = conway_polynomial(p, q).ok_or(Error::UnknownField { p, q })?;
    let modulus = (p as u128)
        .checked_pow(n)
        .filter(|m| *m < MODULUS_LIMIT)
        .ok_or(Error::PrecisionTooLarge { p, n })? as u64;
    if let Some(r) = RINGS.lock().unwrap().get(&(p, q, n)) {
        return Ok(r.clone());
    }
    let ring = Arc::new(WittRing::build(p, q, n, modulus, conway));
    RINGS.lock().unwrap().insert((p, q, n), ring.clone());
    Ok(ring)
}

impl WittRing {
    fn build(p: u64, q: usize, n: u32, modulus: u64, conway: &[u64]) -> WittRing {
        // In (Z/p^n)[x]/(conway) the element T = x^{p^{q(n-1)}} is the
        // Teichmuller lift of the root; its conjugates are T^{p^i} and the
        // product of (X - T^{p^i}) has constant coefficients.
        let f0 = conway.to_vec();
        let mut x = vec![0u64; q];
        if q == 1 {
            x[0] = submod(0, f0[0], modulus);
        } else {
            x[1] = 1;
        }
        let mut big_t = x;
        for _ in 0..(q as u32) * (n - 1) {
            big_t = polypowmod(&big_t, p as u128, &f0, modulus);
        }
        // poly in X with coefficients in R0: start with 1
        let one = {
            let mut o = vec![0u64; q];
            o[0] = 1 % modulus;
            o
        };
        let mut prod: Vec<Vec<u64>> = vec![one];
        let mut conj = big_t.clone();
        for _ in 0..q {
            // prod *= (X - conj)
            let mut next = vec![vec![0u64; q]; prod.len() + 1];
            for (k, c) in prod.iter().enumerate() {
                for i in 0..q {
                    next[k + 1][i] = addmod(next[k + 1][i], c[i], modulus);
                }
                let cc = polymulmod(c, &conj, &f0, modulus);
                for i in 0..q {
                    next[k][i] = submod(next[k][i], cc[i], modulus);
                }
            }
            prod = next;
            conj = polypowmod(&conj, p as u128, &f0, modulus);
        }
        let lift: Vec<u64> = prod
            .iter()
            .map(|c| {
                debug_assert!(c[1..].iter().all(|&v| v == 0));
                c[0]
            })
            .collect();
        let mut ring = WittRing {
            p,
            q,
            n,
            modulus,
            conway: conway.to_vec(),
            lift,
            frob: Vec::new(),
            frob_inv: Vec::new(),
        };
        let t = ring.generator_coeffs();
        let tp = ring.pow(&t, p as u128);
        let tpinv = ring.pow(&t, (p as u128).pow(q as u32 - 1));
        let mut frob = Vec::with_capacity(q);
        let mut frob_inv = Vec::with_capacity(q);
        let mut a = ring.one_coeffs();
        let mut b = ring.one_coeffs();
        for _ in 0..q {
            frob.push(a.clone());
            frob_inv.push(b.clone());
            a = ring.mul(&a, &tp);
            b = ring.mul(&b, &tpinv);
        }
        ring.frob = frob;
        ring.frob_inv = frob_inv;
        ring
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn n(&self) -> u32 {
        self.n
    }
    /// p^n.
    pub fn modulus(&self) -> u64 {
        self.modulus
    }
    /// The Conway polynomial over F_p (low degree first, monic).
    pub fn conway(&self) -> &[u64] {
        &self.conway
    }
    /// The Teichmuller-compatible lift of the Conway polynomial to Z/p^n.
    pub fn modulus_lift(&self) -> &[u64] {
        &self.lift
    }

    /// The same field at another precision.
    pub fn with_precision(&self, n: u32) -> Result<Arc<WittRing>> {
        make_witt_ring(self.p, self.q, n)
    }

    /// The residue field F_{p^q} as the ring of precision 1.
    pub fn residue_ring(&self) -> Arc<WittRing> {
        make_witt_ring(self.p, self.q, 1).expect("residue ring of an existing ring")
    }

    /// p^k as an integer, saturating at p^n (which is zero in the ring).
    pub fn p_pow(&self, k: u32) -> u64 {
        if k >= self.n {
            0
        } else {
            self.p.pow(k)
        }
    }

    // ---- coefficient-slice arithmetic ----

    pub fn zero_coeffs(&self) -> Vec<u64> {
        vec![0; self.q]
    }

    pub fn one_coeffs(&self) -> Vec<u64> {
        let mut v = vec![0; self.q];
        v[0] = 1 % self.modulus;
        v
    }

    pub fn int_coeffs(&self, x: i64) -> Vec<u64> {
        let mut v = vec![0; self.q];
        let m = self.modulus as i128;
        v[0] = (((x as i128) % m + m) % m) as u64;
        v
    }

    fn generator_coeffs(&self) -> Vec<u64> {
        let mut v = vec![0; self.q];
        if self.q == 1 {
            v[0] = submod(0, self.lift[0], self.modulus);
        } else {
            v[1] = 1;
        }
        v
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| addmod(x, y, self.modulus))
            .collect()
    }

    pub fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| submod(x, y, self.modulus))
            .collect()
    }

    pub fn neg(&self, a: &[u64]) -> Vec<u64> {
        a.iter().map(|&x| submod(0, x, self.modulus)).collect()
    }

    pub fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        if self.q == 1 {
            return vec![mulmod(a[0], b[0], self.modulus)];
        }
        polymulmod(a, b, &self.lift, self.modulus)
    }

    /// Multiply by an integer.
    pub fn scale(&self, a: &[u64], k: u64) -> Vec<u64> {
        let k = k % self.modulus;
        a.iter().map(|&x| mulmod(x, k, self.modulus)).collect()
    }

    pub fn pow(&self, a: &[u64], e: u128) -> Vec<u64> {
        if self.q == 1 {
            let mut r = 1 % self.modulus;
            let mut b = a[0];
            let mut e = e;
            while e > 0 {
                if e & 1 == 1 {
                    r = mulmod(r, b, self.modulus);
                }
                b = mulmod(b, b, self.modulus);
                e >>= 1;
            }
            return vec![r];
        }
        polypowmod(a, e, &self.lift, self.modulus)
    }

    pub fn is_zero(&self, a: &[u64]) -> bool {
        a.iter().all(|&x| x == 0)
    }

    /// Valuation; `None` stands for +infinity (the element is zero).
    pub fn val(&self, a: &[u64]) -> Option<u32> {
        a.iter().filter(|&&x| x != 0).map(|&x| val_u64(x, self.p)).min()
    }

    /// Valuation with zero mapped to n.
    pub fn val_capped(&self, a: &[u64]) -> u32 {
        self.val(a).unwrap_or(self.n)
    }

    /// Exact division by p^k of an element of valuation >= k. The result is
    /// only meaningful modulo p^{n-k}; the representative returned has top
    /// digits zero.
    pub fn div_p_pow(&self, a: &[u64], k: u32) -> Vec<u64> {
        let d = self.p.pow(k);
        a.iter()
            .map(|&x| {
                debug_assert_eq!(x % d, 0);
                x / d
            })
            .collect()
    }

    /// Multiply by p^k.
    pub fn mul_p_pow(&self, a: &[u64], k: u32) -> Vec<u64> {
        self.scale(a, self.p_pow(k))
    }

    pub fn frob(&self, a: &[u64]) -> Vec<u64> {
        self.apply_linear(&self.frob, a)
    }

    pub fn frob_inv(&self, a: &[u64]) -> Vec<u64> {
        self.apply_linear(&self.frob_inv, a)
    }

    /// sigma^k for any integer k.
    pub fn frob_pow(&self, a: &[u64], k: i64) -> Vec<u64> {
        let k = k.rem_euclid(self.q as i64);
        let mut x = a.to_vec();
        for _ in 0..k {
            x = self.frob(&x);
        }
        x
    }

    fn apply_linear(&self, images: &[Vec<u64>], a: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; self.q];
        for (i, &c) in a.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(&images[i]) {
                *o = addmod(*o, mulmod(c, v, self.modulus), self.modulus);
            }
        }
        out
    }

    /// Inverse of a unit, via the residue-field inverse and Newton iteration.
    pub fn unit_inv(&self, a: &[u64]) -> Result<Vec<u64>> {
        if self.val(a) != Some(0) {
            return Err(Error::NotAUnit);
        }
        let abar: Vec<u64> = a.iter().map(|&x| x % self.p).collect();
        let inv0 = field_inverse(&abar, &self.conway, self.p).ok_or(Error::NotAUnit)?;
        // inv0 inverts a modulo (p, conway); as t is congruent to the
        // Conway root mod p the same coefficients invert a mod p here.
        let mut x = inv0;
        let two = self.int_coeffs(2);
        let mut prec = 1;
        while prec < self.n {
            let ax = self.mul(a, &x);
            x = self.mul(&x, &self.sub(&two, &ax));
            prec *= 2;
        }
        Ok(x)
    }

    /// Reduce coefficients modulo p^m (m <= n).
    pub fn reduce_coeffs(&self, a: &[u64], m: u32) -> Vec<u64> {
        let pm = self.p.pow(m.min(self.n));
        a.iter().map(|&x| x % pm).collect()
    }

    /// Teichmuller lift of a residue-field element given by coefficients mod p.
    pub fn teichmuller_coeffs(&self, abar: &[u64]) -> Vec<u64> {
        let mut x: Vec<u64> = abar.iter().map(|&c| c % self.p).collect();
        for _ in 0..(self.q as u32) * (self.n - 1) {
            x = self.pow(&x, self.p as u128);
        }
        x
    }

    // ---- element-level API ----

    pub fn elem(self: &Arc<Self>, coeffs: Vec<u64>) -> WittElem {
        assert_eq!(coeffs.len(), self.q);
        let coeffs = coeffs.into_iter().map(|c| c % self.modulus).collect();
        WittElem {
            ring: self.clone(),
            coeffs,
        }
    }

    pub fn zero(self: &Arc<Self>) -> WittElem {
        self.elem(self.zero_coeffs())
    }

    pub fn one(self: &Arc<Self>) -> WittElem {
        self.elem(self.one_coeffs())
    }

    pub fn from_int(self: &Arc<Self>, x: i64) -> WittElem {
        self.elem(self.int_coeffs(x))
    }

    /// The class of t, a Teichmuller root of unity of order p^q - 1.
    pub fn generator(self: &Arc<Self>) -> WittElem {
        self.elem(self.generator_coeffs())
    }

    /// Teichmuller lift of a residue-field element (an element of the
    /// precision-1 ring with the same p and q).
    pub fn teichmuller(self: &Arc<Self>, a: &WittElem) -> Result<WittElem> {
        if a.ring.p != self.p || a.ring.q != self.q || a.ring.n != 1 {
            return Err(Error::RingMismatch);
        }
        Ok(self.elem(self.teichmuller_coeffs(&a.coeffs)))
    }

    /// Image of t_q under the embedding into W_n(F_{p^Q}): the Conway
    /// compatibility makes this t_Q^{(p^Q-1)/(p^q-1)}.
    fn embedding_image(&self, target: &WittRing) -> Vec<u64> {
        let big = (self.p as u128).pow(target.q as u32) - 1;
        let small = (self.p as u128).pow(self.q as u32) - 1;
        target.pow(&target.generator_coeffs(), big / small)
    }
}

/// An element of W_n(F_{p^q}).
#[derive(Clone)]
pub struct WittElem {
    ring: Arc<WittRing>,
    coeffs: Vec<u64>,
}

impl fmt::Debug for WittElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coeffs)
    }
}

impl PartialEq for WittElem {
    fn eq(&self, other: &Self) -> bool {
        *self.ring == *other.ring && self.coeffs == other.coeffs
    }
}

impl Eq for WittElem {}

impl WittElem {
    pub fn ring(&self) -> &Arc<WittRing> {
        &self.ring
    }

    /// Coefficients of 1, t, ..., t^{q-1}, each in [0, p^n).
    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<u64> {
        self.coeffs
    }

    fn same_ring(&self, other: &WittElem) -> Result<()> {
        if *self.ring == *other.ring {
            Ok(())
        } else {
            Err(Error::RingMismatch)
        }
    }

    pub fn try_add(&self, other: &WittElem) -> Result<WittElem> {
        self.same_ring(other)?;
        Ok(self.ring.elem(self.ring.add(&self.coeffs, &other.coeffs)))
    }

    pub fn try_sub(&self, other: &WittElem) -> Result<WittElem> {
        self.same_ring(other)?;
        Ok(self.ring.elem(self.ring.sub(&self.coeffs, &other.coeffs)))
    }

    pub fn try_mul(&self, other: &WittElem) -> Result<WittElem> {
        self.same_ring(other)?;
        Ok(self.ring.elem(self.ring.mul(&self.coeffs, &other.coeffs)))
    }

    pub fn unit_inverse(&self) -> Result<WittElem> {
        Ok(self.ring.elem(self.ring.unit_inv(&self.coeffs)?))
    }

    pub fn pow(&self, e: u128) -> WittElem {
        self.ring.elem(self.ring.pow(&self.coeffs, e))
    }

    pub fn frobenius(&self) -> WittElem {
        self.ring.elem(self.ring.frob(&self.coeffs))
    }

    pub fn frobenius_inv(&self) -> WittElem {
        self.ring.elem(self.ring.frob_inv(&self.coeffs))
    }

    pub fn valuation(&self) -> Option<u32> {
        self.ring.val(&self.coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.ring.is_zero(&self.coeffs)
    }

    /// Image in the ring of precision m <= n.
    pub fn reduce(&self, m: u32) -> Result<WittElem> {
        let target = self.ring.with_precision(m.min(self.ring.n))?;
        Ok(target.elem(self.ring.reduce_coeffs(&self.coeffs, m)))
    }

    /// Residue class in F_{p^q}.
    pub fn residue(&self) -> WittElem {
        self.ring
            .residue_ring()
            .elem(self.ring.reduce_coeffs(&self.coeffs, 1))
    }

    /// Base change along W_n(F_{p^q}) -> W_n(F_{p^Q}).
    pub fn embed(&self, target: &Arc<WittRing>) -> Result<WittElem> {
        let (p, q) = (self.ring.p, self.ring.q);
        if target.p != p || target.n != self.ring.n || target.q % q != 0 {
            return Err(Error::NoEmbedding {
                p,
                from: q,
                to: target.q,
            });
        }
        if target.q == q {
            return Ok(target.elem(self.coeffs.clone()));
        }
        let img = self.ring.embedding_image(target);
        let mut acc = target.zero_coeffs();
        let mut pw = target.one_coeffs();
        for &c in &self.coeffs {
            acc = target.add(&acc, &target.scale(&pw, c));
            pw = target.mul(&pw, &img);
        }
        Ok(target.elem(acc))
    }
}

impl Add for &WittElem {
    type Output = WittElem;
    fn add(self, rhs: &WittElem) -> WittElem {
        self.try_add(rhs).expect("ring mismatch")
    }
}

impl Sub for &WittElem {
    type Output = WittElem;
    fn sub(self, rhs: &WittElem) -> WittElem {
        self.try_sub(rhs).expect("ring mismatch")
    }
}

impl Mul for &WittElem {
    type Output = WittElem;
    fn mul(self, rhs: &WittElem) -> WittElem {
        self.try_mul(rhs).expect("ring mismatch")
    }
}

impl Neg for &WittElem {
    type Output = WittElem;
    fn neg(self) -> WittElem {
        self.ring.elem(self.ring.neg(&self.coeffs))
    }
}

/// Table-driven arithmetic in F_{p^q} for enumeration-heavy searches.
/// Elements are encoded as sum c_i p^i over the Conway basis; since Conway
/// polynomials are primitive, t generates the multiplicative group.
pub struct FieldCtx {
    p: u64,
    q: usize,
    size: u32,
    exp: Vec<u32>,
    log: Vec<u32>,
}

/// Fields above this size are handled by polynomial arithmetic instead.
pub const FIELD_TABLE_LIMIT: u64 = 1 << 20;

impl FieldCtx {
    pub fn new(p: u64, q: usize) -> Result<FieldCtx> {
        let conway = conway_polynomial(p, q).ok_or(Error::UnknownField { p, q })?;
        let size = p
            .checked_pow(q as u32)
            .filter(|s| *s <= FIELD_TABLE_LIMIT)
            .ok_or(Error::SearchSpaceTooLarge)? as u32;
        let order = size - 1;
        let mut exp = vec![0u32; order as usize];
        let mut log = vec![u32::MAX; size as usize];
        let mut cur = vec![0u64; q];
        cur[0] = 1;
        let gen = {
            let mut g = vec![0u64; q];
            if q == 1 {
                g[0] = submod(0, conway[0], p);
            } else {
                g[1] = 1;
            }
            g
        };
        for k in 0..order {
            let code = encode(&cur, p);
            exp[k as usize] = code;
            log[code as usize] = k;
            cur = polymulmod(&cur, &gen, conway, p);
        }
        Ok(FieldCtx {
            p,
            q,
            size,
            exp,
            log,
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn encode(&self, coeffs: &[u64]) -> u32 {
        encode(coeffs, self.p)
    }

    pub fn decode(&self, mut code: u32) -> Vec<u64> {
        let mut v = vec![0u64; self.q];
        for c in v.iter_mut() {
            *c = (code as u64) % self.p;
            code /= self.p as u32;
        }
        v
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        if self.p == 2 {
            return a ^ b;
        }
        let p = self.p as u32;
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut place = 1;
        while a > 0 || b > 0 {
            out += ((a % p + b % p) % p) * place;
            a /= p;
            b /= p;
            place *= p;
        }
        out
    }

    pub fn neg(&self, a: u32) -> u32 {
        if self.p == 2 {
            return a;
        }
        let p = self.p as u32;
        let mut a = a;
        let mut out = 0;
        let mut place = 1;
        while a > 0 {
            out += ((p - a % p) % p) * place;
            a /= p;
            place *= p;
        }
        out
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        if a == 0 || b == 0 {
            return 0;
        }
        let order = self.size - 1;
        let s = (self.log[a as usize] as u64 + self.log[b as usize] as u64) % order as u64;
        self.exp[s as usize]
    }

    pub fn inv(&self, a: u32) -> Option<u32> {
        if a == 0 {
            return None;
        }
        let order = self.size - 1;
        Some(self.exp[((order - self.log[a as usize]) % order) as usize])
    }

    /// Multiply by an element of the prime field.
    pub fn scale(&self, a: u32, k: u64) -> u32 {
        let k = k % self.p;
        if k == 0 || a == 0 {
            return 0;
        }
        self.mul(a, k as u32)
    }

    /// Determinant of a square matrix given row-major.
    pub fn det(&self, m: &[u32], dim: usize) -> u32 {
        let mut a = m.to_vec();
        let mut det = 1u32;
        for col in 0..dim {
            let piv = (col..dim).find(|&r| a[r * dim + col] != 0);
            let Some(piv) = piv else { return 0 };
            if piv != col {
                for c in 0..dim {
                    a.swap(piv * dim + c, col * dim + c);
                }
                det = self.neg(det);
            }
            let pv = a[col * dim + col];
            det = self.mul(det, pv);
            let pinv = self.inv(pv).unwrap();
            for r in col + 1..dim {
                let f = a[r * dim + col];
                if f == 0 {
                    continue;
                }
                let f = self.mul(f, pinv);
                for c in col..dim {
                    let v = self.mul(f, a[col * dim + c]);
                    a[r * dim + c] = self.sub(a[r * dim + c], v);
                }
            }
        }
        det
    }
}

fn encode(coeffs: &[u64], p: u64) -> u32 {
    coeffs.iter().rev().fold(0u32, |acc, &c| acc * p as u32 + (c % p) as u32)
}
