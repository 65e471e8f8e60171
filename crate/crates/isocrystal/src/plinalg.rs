//! Matrices over W_n(F_{p^q}): Smith normal form, canonical solution modules
//! over Z/p^n, inverses with a denominator shift, characteristic polynomials
//! and truncated exponentials.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::witt::{mulmod, val_u64, FieldCtx, WittElem, WittRing};

#[derive(Clone)]
pub struct Matrix {
    ring: Arc<WittRing>,
    rows: usize,
    cols: usize,
    data: Vec<Vec<u64>>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:?} {}x{}", self.ring, self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<&Vec<u64>> = (0..self.cols).map(|j| self.entry(i, j)).collect();
            writeln!(f, "  {row:?}")?;
        }
        Ok(())
    }
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        *self.ring == *other.ring
            && self.rows == other.rows
            && self.cols == other.cols
            && self.data == other.data
    }
}

impl Eq for Matrix {}

impl Matrix {
    pub fn zeros(ring: &Arc<WittRing>, rows: usize, cols: usize) -> Matrix {
        Matrix {
            ring: ring.clone(),
            rows,
            cols,
            data: vec![ring.zero_coeffs(); rows * cols],
        }
    }

    pub fn identity(ring: &Arc<WittRing>, r: usize) -> Matrix {
        let mut m = Matrix::zeros(ring, r, r);
        for i in 0..r {
            m.data[i * r + i] = ring.one_coeffs();
        }
        m
    }

    pub fn from_elems(
        ring: &Arc<WittRing>,
        rows: usize,
        cols: usize,
        entries: &[WittElem],
    ) -> Result<Matrix> {
        if entries.len() != rows * cols {
            return Err(Error::BadShape(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|e| **e.ring() != **ring) {
            return Err(Error::RingMismatch);
        }
        Ok(Matrix {
            ring: ring.clone(),
            rows,
            cols,
            data: entries.iter().map(|e| e.coeffs().to_vec()).collect(),
        })
    }

    /// Build from raw coefficient vectors (each reduced mod p^n).
    pub fn from_coeffs(
        ring: &Arc<WittRing>,
        rows: usize,
        cols: usize,
        data: Vec<Vec<u64>>,
    ) -> Result<Matrix> {
        if data.len() != rows * cols || data.iter().any(|c| c.len() != ring.q()) {
            return Err(Error::BadShape(format!("bad coefficient data for {rows}x{cols}")));
        }
        let m = ring.modulus();
        let data = data
            .into_iter()
            .map(|c| c.into_iter().map(|x| x % m).collect())
            .collect();
        Ok(Matrix {
            ring: ring.clone(),
            rows,
            cols,
            data,
        })
    }

    /// Integer matrix, row-major.
    pub fn from_ints(ring: &Arc<WittRing>, rows: usize, cols: usize, vals: &[i64]) -> Matrix {
        assert_eq!(vals.len(), rows * cols);
        Matrix {
            ring: ring.clone(),
            rows,
            cols,
            data: vals.iter().map(|&v| ring.int_coeffs(v)).collect(),
        }
    }

    pub fn from_fn(
        ring: &Arc<WittRing>,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Vec<u64>,
    ) -> Matrix {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix {
            ring: ring.clone(),
            rows,
            cols,
            data,
        }
    }

    pub fn diag(ring: &Arc<WittRing>, entries: &[Vec<u64>]) -> Matrix {
        let r = entries.len();
        Matrix::from_fn(ring, r, r, |i, j| {
            if i == j {
                entries[i].clone()
            } else {
                ring.zero_coeffs()
            }
        })
    }

    pub fn ring(&self) -> &Arc<WittRing> {
        &self.ring
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &Vec<u64> {
        &self.data[i * self.cols + j]
    }

    pub fn get(&self, i: usize, j: usize) -> WittElem {
        self.ring.elem(self.entry(i, j).clone())
    }

    pub fn set(&mut self, i: usize, j: usize, v: Vec<u64>) {
        debug_assert_eq!(v.len(), self.ring.q());
        self.data[i * self.cols + j] = v;
    }

    /// All entries in row-major order.
    pub fn entries(&self) -> &[Vec<u64>] {
        &self.data
    }

    fn check_same(&self, other: &Matrix) -> Result<()> {
        if *self.ring != *other.ring {
            return Err(Error::RingMismatch);
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same(other)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::BadShape("addition of different shapes".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| self.ring.add(a, b))
            .collect();
        Ok(Matrix { data, ..self.clone() })
    }

    pub fn try_sub(&self, other: &Matrix) -> Result<Matrix> {
        self.try_add(&other.neg())
    }

    pub fn try_mul(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same(other)?;
        if self.cols != other.rows {
            return Err(Error::BadShape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let ring = &self.ring;
        let mut out = Matrix::zeros(ring, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.entry(i, k);
                if ring.is_zero(a) {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.entry(k, j);
                    if ring.is_zero(b) {
                        continue;
                    }
                    let idx = i * other.cols + j;
                    out.data[idx] = ring.add(&out.data[idx], &ring.mul(a, b));
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.try_add(other).expect("matrix addition")
    }
    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.try_sub(other).expect("matrix subtraction")
    }
    pub fn mul(&self, other: &Matrix) -> Matrix {
        self.try_mul(other).expect("matrix multiplication")
    }

    pub fn neg(&self) -> Matrix {
        self.map(|c| self.ring.neg(c))
    }

    pub fn map(&self, f: impl Fn(&[u64]) -> Vec<u64>) -> Matrix {
        Matrix {
            data: self.data.iter().map(|c| f(c)).collect(),
            ..self.clone()
        }
    }

    /// Multiply every entry by the ring element `c`.
    pub fn scale(&self, c: &[u64]) -> Matrix {
        self.map(|x| self.ring.mul(x, c))
    }

    pub fn scale_int(&self, k: u64) -> Matrix {
        self.map(|x| self.ring.scale(x, k))
    }

    pub fn mul_p_pow(&self, k: u32) -> Matrix {
        self.scale_int(self.ring.p_pow(k))
    }

    /// Exact division by p^k; requires valuation >= k. The quotient is only
    /// determined modulo p^{n-k}.
    pub fn div_p_pow(&self, k: u32) -> Matrix {
        self.map(|x| self.ring.div_p_pow(x, k))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(&self.ring, self.cols, self.rows, |i, j| {
            self.entry(j, i).clone()
        })
    }

    /// Entrywise Frobenius.
    pub fn sigma(&self) -> Matrix {
        self.map(|x| self.ring.frob(x))
    }

    pub fn sigma_inv(&self) -> Matrix {
        self.map(|x| self.ring.frob_inv(x))
    }

    pub fn sigma_pow(&self, k: i64) -> Matrix {
        self.map(|x| self.ring.frob_pow(x, k))
    }

    /// Minimal valuation of the entries; `None` for the zero matrix.
    pub fn valuation(&self) -> Option<u32> {
        self.data.iter().filter_map(|c| self.ring.val(c)).min()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|c| self.ring.is_zero(c))
    }

    pub fn is_identity(&self) -> bool {
        self.is_square() && *self == Matrix::identity(&self.ring, self.rows)
    }

    /// Whether the matrix is congruent to the identity modulo p^k.
    pub fn congruent_to_identity(&self, k: u32) -> bool {
        let d = self.sub(&Matrix::identity(&self.ring, self.rows));
        d.valuation().map_or(true, |v| v >= k)
    }

    /// Image in the ring of precision m <= n.
    pub fn reduce(&self, m: u32) -> Result<Matrix> {
        let target = self.ring.with_precision(m.min(self.ring.n()))?;
        Ok(Matrix {
            ring: target,
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|c| self.ring.reduce_coeffs(c, m))
                .collect(),
        })
    }

    /// Same integer representatives read in a ring of higher precision.
    pub fn lift_to(&self, target: &Arc<WittRing>) -> Result<Matrix> {
        if target.p() != self.ring.p() || target.q() != self.ring.q() {
            return Err(Error::RingMismatch);
        }
        Matrix::from_coeffs(target, self.rows, self.cols, self.data.clone())
    }

    pub fn embed(&self, target: &Arc<WittRing>) -> Result<Matrix> {
        let mut data = Vec::with_capacity(self.data.len());
        for c in &self.data {
            data.push(self.ring.elem(c.clone()).embed(target)?.into_coeffs());
        }
        Ok(Matrix {
            ring: target.clone(),
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Kronecker product; row index of the result is i1 * rows2 + i2.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let ring = &self.ring;
        Matrix::from_fn(ring, self.rows * other.rows, self.cols * other.cols, |i, j| {
            let (i1, i2) = (i / other.rows, i % other.rows);
            let (j1, j2) = (j / other.cols, j % other.cols);
            ring.mul(self.entry(i1, j1), other.entry(i2, j2))
        })
    }

    pub fn block_diag(&self, other: &Matrix) -> Matrix {
        let ring = &self.ring;
        Matrix::from_fn(ring, self.rows + other.rows, self.cols + other.cols, |i, j| {
            if i < self.rows && j < self.cols {
                self.entry(i, j).clone()
            } else if i >= self.rows && j >= self.cols {
                other.entry(i - self.rows, j - self.cols).clone()
            } else {
                ring.zero_coeffs()
            }
        })
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(&self.ring, rows.len(), cols.len(), |i, j| {
            self.entry(rows[i], cols[j]).clone()
        })
    }

    /// Characteristic polynomial det(xI - A), coefficients from the constant
    /// term up, computed division-free (Berkowitz).
    pub fn charpoly(&self) -> Vec<Vec<u64>> {
        assert!(self.is_square());
        let ring = &self.ring;
        let r = self.rows;
        // highest degree first
        let mut poly = vec![ring.one_coeffs()];
        for k in 0..r {
            let mut t = Vec::with_capacity(k + 2);
            t.push(ring.one_coeffs());
            t.push(ring.neg(self.entry(k, k)));
            // v = C, the column above the diagonal entry
            let mut v: Vec<Vec<u64>> = (0..k).map(|i| self.entry(i, k).clone()).collect();
            for _ in 0..k {
                let mut rc = ring.zero_coeffs();
                for (j, vj) in v.iter().enumerate() {
                    rc = ring.add(&rc, &ring.mul(self.entry(k, j), vj));
                }
                t.push(ring.neg(&rc));
                let mut nv = vec![ring.zero_coeffs(); k];
                for (i, slot) in nv.iter_mut().enumerate() {
                    for (j, vj) in v.iter().enumerate() {
                        *slot = ring.add(slot, &ring.mul(self.entry(i, j), vj));
                    }
                }
                v = nv;
            }
            let mut next = vec![ring.zero_coeffs(); k + 2];
            for (i, slot) in next.iter_mut().enumerate() {
                for (j, pj) in poly.iter().enumerate().take(i + 1) {
                    *slot = ring.add(slot, &ring.mul(&t[i - j], pj));
                }
            }
            poly = next;
        }
        poly.reverse();
        poly
    }

    pub fn det(&self) -> WittElem {
        let cp = self.charpoly();
        let c0 = self.ring.elem(cp[0].clone());
        if self.rows % 2 == 1 {
            -&c0
        } else {
            c0
        }
    }

    /// Residue matrix mod p, encoded for table-driven field arithmetic.
    pub fn residue_codes(&self, field: &FieldCtx) -> Vec<u32> {
        let p = self.ring.p();
        self.data
            .iter()
            .map(|c| {
                let r: Vec<u64> = c.iter().map(|x| x % p).collect();
                field.encode(&r)
            })
            .collect()
    }
}

/// Result of a Smith normal form computation: `left * A * right` is
/// diagonal with entries p^{exponents[i]} (exponent n marks a zero).
#[derive(Clone, Debug)]
pub struct SnfResult {
    pub exponents: Vec<u32>,
    pub left: Matrix,
    pub right: Matrix,
}

pub fn smith_normal_form(a: &Matrix) -> SnfResult {
    let ring = a.ring.clone();
    let n = ring.n();
    let (rows, cols) = (a.rows, a.cols);
    let mut m = a.clone();
    let mut left = Matrix::identity(&ring, rows);
    let mut right = Matrix::identity(&ring, cols);
    let mut exps = Vec::new();
    for k in 0..rows.min(cols) {
        let mut best: Option<(u32, usize, usize)> = None;
        for i in k..rows {
            for j in k..cols {
                if let Some(v) = ring.val(m.entry(i, j)) {
                    if best.map_or(true, |(bv, _, _)| v < bv) {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let Some((v, pi, pj)) = best else {
            exps.extend(std::iter::repeat(n).take(rows.min(cols) - k));
            break;
        };
        swap_rows(&mut m, k, pi);
        swap_rows(&mut left, k, pi);
        swap_cols(&mut m, k, pj);
        swap_cols(&mut right, k, pj);
        let unit = ring.div_p_pow(m.entry(k, k), v);
        let uinv = ring.unit_inv(&unit).expect("pivot unit part");
        scale_row(&mut m, k, &uinv);
        scale_row(&mut left, k, &uinv);
        for i in k + 1..rows {
            if ring.is_zero(m.entry(i, k)) {
                continue;
            }
            let f = ring.div_p_pow(m.entry(i, k), v);
            row_axpy(&mut m, i, k, &f);
            row_axpy(&mut left, i, k, &f);
        }
        for j in k + 1..cols {
            if ring.is_zero(m.entry(k, j)) {
                continue;
            }
            let f = ring.div_p_pow(m.entry(k, j), v);
            col_axpy(&mut m, j, k, &f);
            col_axpy(&mut right, j, k, &f);
        }
        exps.push(v);
    }
    SnfResult {
        exponents: exps,
        left,
        right,
    }
}

fn swap_rows(m: &mut Matrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..m.cols {
        m.data.swap(a * m.cols + j, b * m.cols + j);
    }
}

fn swap_cols(m: &mut Matrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    for i in 0..m.rows {
        m.data.swap(i * m.cols + a, i * m.cols + b);
    }
}

fn scale_row(m: &mut Matrix, i: usize, c: &[u64]) {
    for j in 0..m.cols {
        let idx = i * m.cols + j;
        m.data[idx] = m.ring.mul(&m.data[idx], c);
    }
}

/// row_i -= f * row_k
fn row_axpy(m: &mut Matrix, i: usize, k: usize, f: &[u64]) {
    for j in 0..m.cols {
        let t = m.ring.mul(f, &m.data[k * m.cols + j]);
        let idx = i * m.cols + j;
        m.data[idx] = m.ring.sub(&m.data[idx], &t);
    }
}

/// col_j -= f * col_k
fn col_axpy(m: &mut Matrix, j: usize, k: usize, f: &[u64]) {
    for i in 0..m.rows {
        let t = m.ring.mul(f, &m.data[i * m.cols + k]);
        let idx = i * m.cols + j;
        m.data[idx] = m.ring.sub(&m.data[idx], &t);
    }
}

/// A^{-1} = p^{-e} C with e minimal. C is returned over the ring of
/// precision n - e, the precision at which it is determined.
pub fn inverse_with_shift(a: &Matrix) -> Result<(Matrix, u32)> {
    if !a.is_square() {
        return Err(Error::BadShape("inverse of a non-square matrix".into()));
    }
    let ring = a.ring();
    let n = ring.n();
    let snf = smith_normal_form(a);
    if snf.exponents.iter().any(|&e| e >= n) {
        return Err(Error::SingularAtPrecision);
    }
    let e = snf.exponents.iter().copied().max().unwrap_or(0);
    let d: Vec<Vec<u64>> = snf
        .exponents
        .iter()
        .map(|&ei| {
            let mut c = ring.zero_coeffs();
            c[0] = ring.p_pow(e - ei);
            c
        })
        .collect();
    let c = snf.right.mul(&Matrix::diag(ring, &d)).mul(&snf.left);
    Ok((c.reduce(n - e)?, e))
}

/// Unit inverse of an invertible matrix.
pub fn unit_inverse(a: &Matrix) -> Result<Matrix> {
    let (c, e) = inverse_with_shift(a)?;
    if e != 0 {
        return Err(Error::NotAUnit);
    }
    Ok(c)
}

fn vp_factorial(i: u64, p: u64) -> u32 {
    let mut v = 0;
    let mut pk = p;
    while pk <= i {
        v += (i / pk) as u32;
        pk = pk.saturating_mul(p);
    }
    v
}

/// exp(X) = sum X^i / i!, for X in the convergence domain: p >= 3 and
/// X in p End, or p = 2 and X in 4 End, or p = 2, X in 2 End and X nilpotent.
pub fn exp_trunc(x: &Matrix) -> Result<Matrix> {
    if !x.is_square() {
        return Err(Error::BadShape("exp of a non-square matrix".into()));
    }
    let ring = x.ring().clone();
    let (p, n, r) = (ring.p(), ring.n(), x.rows);
    let id = Matrix::identity(&ring, r);
    let Some(l) = x.valuation() else {
        return Ok(id);
    };
    let l = l.min(n);
    let nilpotent_two = p == 2 && l == 1;
    if l == 0 || nilpotent_two && !is_nilpotent_half(x) {
        return Err(Error::OutsideExpDomain);
    }
    // X = p^l Y; the i-th term is p^{il - v_p(i!)} Y^i / (i!/p^{v_p(i!)}).
    let y = x.div_p_pow(l);
    let mut sum = id.clone();
    let mut ypow = id;
    let mut i: u64 = 1;
    loop {
        if nilpotent_two {
            if i as usize >= r {
                break;
            }
        } else if term_floor_exceeds(i, l, p, n) {
            break;
        }
        let vf = vp_factorial(i, p);
        let shift = (i as u32) * l - vf;
        ypow = ypow.mul(&y);
        if shift < n {
            let unit = factorial_unit_part(i, p, ring.modulus());
            let uinv = ring.unit_inv(&ring.int_coeffs(unit as i64))?;
            let term = ypow.mul_p_pow(shift).scale(&uinv);
            sum = sum.add(&term);
        }
        i += 1;
    }
    Ok(sum)
}

/// Whether every later term also vanishes: i*l - v_p(i!) >= n holds from i on.
fn term_floor_exceeds(i: u64, l: u32, p: u64, n: u32) -> bool {
    // v_p(j!) <= (j-1)/(p-1), so j*l - v_p(j!) >= j*l - (j-1)/(p-1), which is
    // increasing in j when l >= 1 and p >= 3, or l >= 2.
    let lower = (i as f64) * (l as f64) - ((i as f64) - 1.0) / ((p as f64) - 1.0);
    lower >= n as f64
}

fn is_nilpotent_half(x: &Matrix) -> bool {
    // Y = X/2 must be nilpotent modulo 2^{n-1}.
    let ring = x.ring();
    if ring.n() <= 1 {
        return true;
    }
    let y = x.div_p_pow(1);
    let mut pw = y.clone();
    for _ in 1..x.rows {
        pw = pw.mul(&y);
    }
    pw.valuation().map_or(true, |v| v >= ring.n() - 1)
}

fn factorial_unit_part(i: u64, p: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    for k in 1..=i {
        let mut k = k;
        while k % p == 0 {
            k /= p;
        }
        acc = mulmod(acc, k % m, m);
    }
    acc
}

/// For g congruent to 1 mod p^l, the matrix z with g = 1 + p^l z.
pub fn unipotent_digit(g: &Matrix, l: u32) -> Result<Matrix> {
    let d = g.sub(&Matrix::identity(g.ring(), g.rows));
    if d.valuation().map_or(false, |v| v < l) {
        return Err(Error::BadParams(format!("not congruent to 1 mod p^{l}")));
    }
    Ok(d.div_p_pow(l.min(g.ring().n())))
}

// ---- canonical solution modules over Z/p^n ----

/// The solution set of A x = b over Z/p^n: `particular + span(kernel)`.
/// `kernel` is in Howell form (pivots in increasing column order, pivot
/// entries normalized to powers of p, entries above pivots reduced).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionModule {
    pub particular: Vec<u64>,
    pub kernel: Vec<Vec<u64>>,
}

impl SolutionModule {
    /// Pivot (column, valuation) of each kernel row.
    pub fn pivots(&self, p: u64) -> Vec<(usize, u32)> {
        self.kernel
            .iter()
            .map(|row| {
                let c = row.iter().position(|&x| x != 0).expect("nonzero row");
                (c, val_u64(row[c], p))
            })
            .collect()
    }
}

/// Howell form of the row span of `rows` over Z/p^n.
pub fn howell_form(rows: Vec<Vec<u64>>, p: u64, n: u32) -> Vec<Vec<u64>> {
    let m = p.pow(n);
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut pool: Vec<Vec<u64>> = rows
        .into_iter()
        .map(|r| r.into_iter().map(|x| x % m).collect::<Vec<_>>())
        .filter(|r| r.iter().any(|&x| x != 0))
        .collect();
    let mut result: Vec<(usize, u32, Vec<u64>)> = Vec::new();
    for col in 0..ncols {
        let mut best: Option<(u32, usize)> = None;
        for (idx, row) in pool.iter().enumerate() {
            if row[col] != 0 {
                let v = val_u64(row[col], p);
                if best.map_or(true, |(bv, _)| v < bv) {
                    best = Some((v, idx));
                }
            }
        }
        let Some((v, idx)) = best else { continue };
        let mut piv = pool.swap_remove(idx);
        let pv = p.pow(v);
        let unit = piv[col] / pv;
        let uinv = inv_unit_mod(unit, p, m);
        for x in piv.iter_mut() {
            *x = mulmod(*x, uinv, m);
        }
        debug_assert_eq!(piv[col], pv);
        for row in pool.iter_mut() {
            if row[col] != 0 {
                let f = row[col] / pv;
                axpy_mod(row, &piv, f, m);
            }
        }
        if v > 0 {
            let s = p.pow(n - v);
            let extra: Vec<u64> = piv.iter().map(|&x| mulmod(x, s, m)).collect();
            if extra.iter().any(|&x| x != 0) {
                pool.push(extra);
            }
        }
        pool.retain(|r| r.iter().any(|&x| x != 0));
        result.push((col, v, piv));
    }
    for i in 0..result.len() {
        let (col, v, piv) = result[i].clone();
        let pv = p.pow(v);
        for (_, _, row) in result.iter_mut().take(i) {
            let f = row[col] / pv;
            if f != 0 {
                axpy_mod(row, &piv, f, m);
            }
        }
    }
    result.into_iter().map(|(_, _, r)| r).collect()
}

/// row -= f * other (mod m)
fn axpy_mod(row: &mut [u64], other: &[u64], f: u64, m: u64) {
    for (x, &y) in row.iter_mut().zip(other) {
        let t = mulmod(f, y, m);
        *x = if *x >= t { *x - t } else { *x + m - t };
    }
}

/// Inverse modulo p^n of an integer prime to p.
pub(crate) fn inv_unit_mod(u: u64, p: u64, m: u64) -> u64 {
    // Newton iteration from the inverse mod p.
    let u = u % m;
    let mut x = {
        let mut r = 1u64;
        let mut b = u % p;
        let mut e = p - 2;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b, p);
            }
            b = mulmod(b, b, p);
            e >>= 1;
        }
        r
    };
    let mut prec = p;
    while prec < m {
        // x <- x (2 - u x)
        let ux = mulmod(u, x, m);
        let two_minus = (2 + m - ux) % m;
        x = mulmod(x, two_minus, m);
        prec = prec.saturating_mul(prec);
    }
    x % m
}

/// Generators of {x : A x = 0} over Z/p^n, in Howell form.
pub fn kernel_mod(a: &[Vec<u64>], ncols: usize, p: u64, n: u32) -> Vec<Vec<u64>> {
    let m = p.pow(n);
    let nrows = a.len();
    let rows: Vec<Vec<u64>> = (0..ncols)
        .map(|j| {
            let mut r = Vec::with_capacity(nrows + ncols);
            r.extend(a.iter().map(|row| row[j] % m));
            r.extend((0..ncols).map(|k| u64::from(k == j)));
            r
        })
        .collect();
    let h = howell_form(rows, p, n);
    let gens: Vec<Vec<u64>> = h
        .into_iter()
        .filter(|r| r[..nrows].iter().all(|&x| x == 0))
        .map(|r| r[nrows..].to_vec())
        .collect();
    if gens.is_empty() {
        return gens;
    }
    howell_form(gens, p, n)
}

/// Canonical description of {x : A x = b} over Z/p^n, or `None` when the
/// system has no solution.
pub fn solve_linear_module(
    a: &[Vec<u64>],
    b: &[u64],
    ncols: usize,
    p: u64,
    n: u32,
) -> Option<SolutionModule> {
    let m = p.pow(n);
    // Unknowns (s, x) with A x - s b = 0; s sits in column 0 so the Howell
    // form exposes whether s = 1 is attainable.
    let aug: Vec<Vec<u64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = Vec::with_capacity(ncols + 1);
            r.push((m - bi % m) % m);
            r.extend(row.iter().map(|&x| x % m));
            r
        })
        .collect();
    let k = kernel_mod(&aug, ncols + 1, p, n);
    let (first, rest): (Vec<_>, Vec<_>) = k.into_iter().partition(|r| r[0] != 0);
    let particular = match first.first() {
        Some(r) if r[0] == 1 => r[1..].to_vec(),
        Some(_) => return None,
        None if b.iter().all(|&x| x % m == 0) => vec![0; ncols],
        None => return None,
    };
    Some(SolutionModule {
        particular,
        kernel: rest.into_iter().map(|r| r[1..].to_vec()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witt::make_witt_ring;

    #[test]
    fn snf_examples() {
        let r = make_witt_ring(2, 1, 3).unwrap();
        assert_eq!(smith_normal_form(&Matrix::identity(&r, 3)).exponents, vec![0, 0, 0]);
        let d = Matrix::from_ints(&r, 2, 2, &[1, 0, 0, 4]);
        assert_eq!(smith_normal_form(&d).exponents, vec![0, 2]);
        let a = Matrix::from_ints(&r, 2, 2, &[2, 1, 0, 2]);
        let s = smith_normal_form(&a);
        assert_eq!(s.exponents, vec![0, 2]);
        let diag = s.left.mul(&a).mul(&s.right);
        assert_eq!(diag, Matrix::from_ints(&r, 2, 2, &[1, 0, 0, 4]));
        let z = Matrix::zeros(&r, 2, 3);
        assert_eq!(smith_normal_form(&z).exponents, vec![3, 3]);
    }

    #[test]
    fn solve_examples() {
        // identity, b = 0
        let s = solve_linear_module(&[vec![1, 0], vec![0, 1]], &[0, 0], 2, 2, 3).unwrap();
        assert_eq!(s.particular, vec![0, 0]);
        assert!(s.kernel.is_empty());
        // p * identity over Z/p^2
        let s = solve_linear_module(&[vec![3, 0], vec![0, 3]], &[0, 0], 2, 3, 2).unwrap();
        assert_eq!(s.kernel, vec![vec![3, 0], vec![0, 3]]);
        // [2] x = 4 over Z/8
        let s = solve_linear_module(&[vec![2]], &[4], 1, 2, 3).unwrap();
        assert_eq!(s.particular, vec![2]);
        assert_eq!(s.kernel, vec![vec![4]]);
        let brute: Vec<u64> = (0..8).filter(|x| (2 * x) % 8 == 4).collect();
        assert_eq!(brute, vec![2, 6]);
        // no solution
        assert!(solve_linear_module(&[vec![2]], &[1], 1, 2, 3).is_none());
    }

    #[test]
    fn inverse_examples() {
        let r = make_witt_ring(3, 1, 3).unwrap();
        let a = Matrix::from_ints(&r, 2, 2, &[1, 0, 0, 3]);
        let (c, e) = inverse_with_shift(&a).unwrap();
        assert_eq!(e, 1);
        assert_eq!(c, Matrix::from_ints(c.ring(), 2, 2, &[3, 0, 0, 1]));
        let u = Matrix::from_ints(&r, 2, 2, &[1, 1, 0, 1]);
        let (c, e) = inverse_with_shift(&u).unwrap();
        assert_eq!(e, 0);
        assert!(c.mul(&u).is_identity());
        let r1 = make_witt_ring(3, 1, 1).unwrap();
        let s = Matrix::from_ints(&r1, 2, 2, &[3, 0, 0, 3]);
        assert_eq!(inverse_with_shift(&s).unwrap_err(), Error::SingularAtPrecision);
    }

    #[test]
    fn exp_examples() {
        let r = make_witt_ring(3, 1, 4).unwrap();
        assert!(exp_trunc(&Matrix::zeros(&r, 2, 2)).unwrap().is_identity());
        let x = Matrix::from_ints(&r, 2, 2, &[0, 3, 0, 0]);
        assert_eq!(
            exp_trunc(&x).unwrap(),
            Matrix::from_ints(&r, 2, 2, &[1, 3, 0, 1])
        );
        // exp(3) mod 81 from exact rationals: sum 3^i / i! reduced mod 81
        let x = Matrix::from_ints(&r, 1, 1, &[3]);
        let got = exp_trunc(&x).unwrap().entry(0, 0)[0];
        assert_eq!(got, rational_exp_oracle(3, 3, 81));
        let bad = Matrix::from_ints(&r, 1, 1, &[1]);
        assert_eq!(exp_trunc(&bad).unwrap_err(), Error::OutsideExpDomain);
    }

    /// sum_{i<40} x^i / i! mod m computed with big rationals.
    fn rational_exp_oracle(x: i64, p: u64, m: u64) -> u64 {
        use num_bigint::BigInt;
        use num_rational::BigRational;
        use num_traits::{One, ToPrimitive, Zero};
        let mut sum = BigRational::zero();
        let mut term = BigRational::one();
        for i in 0..40i64 {
            if i > 0 {
                term = term * BigRational::from_integer(BigInt::from(x))
                    / BigRational::from_integer(BigInt::from(i));
            }
            sum += term.clone();
        }
        let num = sum.numer().clone();
        let den = sum.denom().clone();
        let mb = BigInt::from(m);
        let den_mod = ((den % &mb) + &mb) % &mb;
        assert!(den_mod.to_u64().unwrap() % p != 0);
        let inv = inv_unit_mod(den_mod.to_u64().unwrap(), p, m);
        let num_mod = ((num % &mb) + &mb) % &mb;
        mulmod(num_mod.to_u64().unwrap(), inv, m)
    }

    #[test]
    fn charpoly_and_det() {
        let r = make_witt_ring(5, 1, 3).unwrap();
        let a = Matrix::from_ints(&r, 2, 2, &[1, 2, 3, 4]);
        // x^2 - 5x - 2
        let cp = a.charpoly();
        assert_eq!(cp, vec![r.int_coeffs(-2), r.int_coeffs(-5), r.int_coeffs(1)]);
        assert_eq!(a.det(), r.from_int(-2));
    }
}
