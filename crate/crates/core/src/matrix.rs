//! Dense complex matrices in row-major storage.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Dense complex matrix. Entries are stored row-major and are always finite.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMat {
    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidDimensions(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Real matrix from nested rows. Panics on ragged input; intended for
    /// literals in tests and examples.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn from_diag(values: &[C64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_real_diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// Column vector from a slice.
    pub fn column(values: &[C64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    /// Matrix whose columns are the given vectors (all of length `rows`).
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Self {
        let cols = columns.len();
        Self::from_fn(rows, cols, |i, j| columns[j][i])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[C64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn columns(&self) -> Vec<Vec<C64>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    /// Contiguous column block `[start, end)`.
    pub fn col_block(&self, start: usize, end: usize) -> CMat {
        assert!(start <= end && end <= self.cols);
        CMat::from_fn(self.rows, end - start, |i, j| self[(i, start + j)])
    }

    /// Contiguous row block `[start, end)`.
    pub fn row_block(&self, start: usize, end: usize) -> CMat {
        assert!(start <= end && end <= self.rows);
        CMat {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Sub-matrix selecting the given column indices in order.
    pub fn select_cols(&self, idx: &[usize]) -> CMat {
        CMat::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    pub fn select_rows(&self, idx: &[usize]) -> CMat {
        CMat::from_fn(idx.len(), self.cols, |i, j| self[(idx[i], j)])
    }

    /// Horizontal concatenation `(self | other)`.
    pub fn hstack(&self, other: &CMat) -> Result<CMat> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch {
                op: "hstack",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(CMat::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        }))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> CMat {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> CMat {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> CMat {
        self.map(|z| z * s)
    }

    /// Entrywise product.
    pub fn hadamard(&self, other: &CMat) -> Result<CMat> {
        self.check_same_shape("hadamard", other)?;
        Ok(CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn matmul(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self† · other` without materializing the adjoint.
    pub fn adjoint_mul(&self, other: &CMat) -> Result<CMat> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch {
                op: "adjoint_mul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = CMat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, a) in a_row.iter().enumerate() {
                let a = a.conj();
                if a == ZERO {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · other†`.
    pub fn mul_adjoint(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                op: "mul_adjoint",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(CMat::from_fn(self.rows, other.rows, |i, j| {
            self.row(i).iter().zip(other.row(j)).map(|(a, b)| a * b.conj()).sum()
        }))
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols, "mul_vec length");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self† · x`.
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.rows, "adjoint_mul_vec length");
        let mut out = vec![ZERO; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == ZERO {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        out
    }

    /// `self · diag(d)`: scales column j by `d[j]`.
    pub fn scale_cols(&self, d: &[f64]) -> CMat {
        assert_eq!(d.len(), self.cols);
        CMat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * d[j])
    }

    pub fn scale_cols_complex(&self, d: &[C64]) -> CMat {
        assert_eq!(d.len(), self.cols);
        CMat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * d[j])
    }

    /// `diag(d) · self`: scales row i by `d[i]`.
    pub fn scale_rows(&self, d: &[f64]) -> CMat {
        assert_eq!(d.len(), self.rows);
        CMat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * d[i])
    }

    pub fn scale_rows_complex(&self, d: &[C64]) -> CMat {
        assert_eq!(d.len(), self.rows);
        CMat::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * d[i])
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn norm_fro(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn try_add(&self, other: &CMat) -> Result<CMat> {
        self.check_same_shape("add", other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &CMat) -> Result<CMat> {
        self.check_same_shape("sub", other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &CMat, f: impl Fn(C64, C64) -> C64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn check_same_shape(&self, op: &'static str, other: &CMat) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// Returns `Err(NonFinite)` if any entry is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            Some(k) => Err(Error::NonFinite {
                row: k / self.cols.max(1),
                col: k % self.cols.max(1),
            }),
            None => Ok(()),
        }
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

// Operator forms panic on shape mismatch; use the `try_*` methods at API
// boundaries.
impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        self.try_add(rhs).expect("shape mismatch in add")
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        self.try_sub(rhs).expect("shape mismatch in sub")
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        self.matmul(rhs).expect("shape mismatch in matmul")
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        self.map(|z| -z)
    }
}

/// Ordered list of real diagonal entries (singular values and their tangents).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealDiag(pub Vec<f64>);

impl RealDiag {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn to_matrix(&self) -> CMat {
        CMat::from_real_diag(&self.0)
    }

    /// Stored as a `len x 1` column, the form used for cmx output.
    pub fn to_column(&self) -> CMat {
        CMat::from_fn(self.0.len(), 1, |i, _| C64::new(self.0[i], 0.0))
    }

    pub fn is_positive_non_increasing(&self) -> bool {
        self.0.iter().all(|&s| s > 0.0) && self.0.windows(2).all(|w| w[0] >= w[1])
    }
}

pub fn hadamard(a: &CMat, b: &CMat) -> Result<CMat> {
    a.hadamard(b)
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint()
}

// ---------------------------------------------------------------------------
// vector helpers

#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    // conjugate-linear in the first argument
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Complex Givens pair `(c, s)` with `[[c, s], [-s̄, c]] [a; b] = [ρ; 0]`.
pub(crate) fn givens(a: C64, b: C64) -> (f64, C64) {
    if b == ZERO {
        return (1.0, ZERO);
    }
    if a == ZERO {
        return (0.0, b.conj() / b.norm());
    }
    let an = a.norm();
    let rho = an.hypot(b.norm());
    (an / rho, (a / an) * b.conj() / rho)
}

/// Multiplies a vector by a unit phase so that its largest-modulus entry
/// (lowest index on ties) is real and positive. Returns the aligned vector and
/// the applied phase, or `None` for a zero vector.
pub fn align_phase(v: &[C64]) -> Option<(Vec<C64>, C64)> {
    let mut best = 0;
    let mut best_abs = 0.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if best_abs == 0.0 {
        return None;
    }
    let pivot = v[best];
    let phase = pivot.conj() / best_abs;
    let mut out: Vec<C64> = v.iter().map(|z| z * phase).collect();
    out[best] = C64::new(best_abs, 0.0);
    Some((out, phase))
}

/// Projects `v` onto the orthogonal complement of the columns of `basis`
/// (assumed orthonormal), with one reorthogonalization pass.
pub fn project_out(basis: &CMat, v: &mut [C64]) {
    for _ in 0..2 {
        let c = basis.adjoint_mul_vec(v);
        for (j, cj) in c.iter().enumerate() {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= basis[(i, j)] * cj;
            }
        }
    }
}

/// Orthonormalizes the columns of `a` by Gram-Schmidt with reorthogonalization.
/// The implied triangular factor has a real positive diagonal. Fails with
/// `Singular` if a column is numerically dependent on the previous ones.
pub fn orthonormalize(a: &CMat) -> Result<CMat> {
    let scale = a.norm_fro().max(f64::MIN_POSITIVE);
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(a.cols());
    for j in 0..a.cols() {
        let mut v = a.col(j);
        for _ in 0..2 {
            for u in &q {
                let c = dot(u, &v);
                axpy(-c, u, &mut v);
            }
        }
        let nv = norm(&v);
        if nv <= 1e-13 * scale {
            return Err(Error::Singular);
        }
        v.iter_mut().for_each(|z| *z /= nv);
        q.push(v);
    }
    Ok(CMat::from_columns(a.rows(), &q))
}

/// Orthonormal basis of the orthogonal complement of span(`basis`) in
/// C^rows, where `basis` has orthonormal columns. Built by projecting the
/// canonical unit vectors, largest remainders first.
pub fn orthonormal_complement(basis: &CMat) -> CMat {
    let n = basis.rows();
    let k = basis.cols();
    let target = n.saturating_sub(k);
    let mut q: Vec<Vec<C64>> = (0..k).map(|j| basis.col(j)).collect();
    let mut out: Vec<Vec<C64>> = Vec::with_capacity(target);
    let mut used = vec![false; n];
    while out.len() < target {
        // choose the unit vector with the largest component outside span(q)
        let mut best: Option<(usize, Vec<C64>, f64)> = None;
        for e in 0..n {
            if used[e] {
                continue;
            }
            let mut v = vec![ZERO; n];
            v[e] = ONE;
            for _ in 0..2 {
                for u in &q {
                    let c = dot(u, &v);
                    axpy(-c, u, &mut v);
                }
            }
            let nv = norm(&v);
            if best.as_ref().is_none_or(|b| nv > b.2) {
                best = Some((e, v, nv));
            }
        }
        let (e, mut v, nv) = best.expect("complement exhausted");
        used[e] = true;
        v.iter_mut().for_each(|z| *z /= nv);
        q.push(v.clone());
        out.push(v);
    }
    CMat::from_columns(n, &out)
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &CMat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidDimensions(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pv <= f64::EPSILON * scale * 1e-3 || pv == 0.0 {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == ZERO {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.rows();
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &CMat) -> CMat {
        let cols: Vec<Vec<C64>> = (0..b.cols()).map(|j| self.solve_vec(&b.col(j))).collect();
        CMat::from_columns(b.rows(), &cols)
    }

    /// Smallest pivot modulus relative to the largest; a cheap singularity
    /// indicator.
    pub fn pivot_ratio(&self) -> f64 {
        let d: Vec<f64> = (0..self.lu.rows()).map(|i| self.lu[(i, i)].norm()).collect();
        let max = d.iter().cloned().fold(0.0, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    let lu = Lu::factor(a)?;
    Ok(lu.solve(&CMat::identity(a.rows())))
}

pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    Ok(Lu::factor(a)?.solve(b))
}
