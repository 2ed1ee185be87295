//! Small dense linear algebra on stack-allocated matrices, plus the sparse
//! and tridiagonal kernels used by the spectral module.

use crate::error::{numerical, Result};
use crate::scalar::Real;
use std::ops::{Index, IndexMut};

/// Largest supported matrix order (ambient dimension n + 1 with n <= 6).
pub const MAXD: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SVec<T> {
    pub n: usize,
    pub a: [T; MAXD],
}

impl<T: Real> SVec<T> {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAXD, "dimension {n} exceeds MAXD");
        SVec { n, a: [T::zero(); MAXD] }
    }

    pub fn from_slice(v: &[T]) -> Self {
        let mut out = Self::zeros(v.len());
        out.a[..v.len()].copy_from_slice(v);
        out
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> T) -> Self {
        let mut out = Self::zeros(n);
        for i in 0..n {
            out.a[i] = f(i);
        }
        out
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut out = Self::zeros(n);
        out.a[i] = T::one();
        out
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.a[..self.n]
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            s += self.a[i] * o.a[i];
        }
        s
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalized(&self) -> Self {
        self.scale(T::one() / self.norm())
    }

    pub fn scale(&self, c: T) -> Self {
        Self::from_fn(self.n, |i| self.a[i] * c)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::from_fn(self.n, |i| self.a[i] + o.a[i])
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::from_fn(self.n, |i| self.a[i] - o.a[i])
    }

    /// `self + c * o`
    pub fn axpy(&self, c: T, o: &Self) -> Self {
        Self::from_fn(self.n, |i| self.a[i] + c * o.a[i])
    }

    pub fn max_abs(&self) -> T {
        self.as_slice().iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T> Index<usize> for SVec<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        &self.a[i]
    }
}

impl<T> IndexMut<usize> for SVec<T> {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.a[i]
    }
}

/// Square matrix of order `n <= MAXD`, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SMat<T> {
    pub n: usize,
    pub a: [[T; MAXD]; MAXD],
}

impl<T> Index<(usize, usize)> for SMat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.a[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for SMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.a[i][j]
    }
}

impl<T: Real> SMat<T> {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAXD, "dimension {n} exceeds MAXD");
        SMat { n, a: [[T::zero(); MAXD]; MAXD] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn diag(d: &[T]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { T::zero() })
    }

    pub fn outer(u: &SVec<T>, v: &SVec<T>) -> Self {
        Self::from_fn(u.n, |i, j| u[i] * v[j])
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[SVec<T>]) -> Self {
        let n = cols[0].n;
        assert_eq!(n, cols.len(), "from_columns needs a square set");
        Self::from_fn(n, |i, j| cols[j][i])
    }

    pub fn column(&self, j: usize) -> SVec<T> {
        SVec::from_fn(self.n, |i| self.a[i][j])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.a[j][i])
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i][k];
                if aik == T::zero() {
                    continue;
                }
                for j in 0..n {
                    m.a[i][j] += aik * o.a[k][j];
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &SVec<T>) -> SVec<T> {
        SVec::from_fn(self.n, |i| (0..self.n).map(|j| self.a[i][j] * v[j]).sum())
    }

    /// `A B Aᵀ`.
    pub fn congruence(&self, a: &Self) -> Self {
        a.mul(self).mul(&a.transpose())
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self.a[i][j] + o.a[i][j])
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self.a[i][j] - o.a[i][j])
    }

    pub fn scale(&self, c: T) -> Self {
        Self::from_fn(self.n, |i, j| self.a[i][j] * c)
    }

    pub fn axpy(&self, c: T, o: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self.a[i][j] + c * o.a[i][j])
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.a[i][i]).sum()
    }

    pub fn symmetrized(&self) -> Self {
        let h = T::lit(0.5);
        Self::from_fn(self.n, |i, j| h * (self.a[i][j] + self.a[j][i]))
    }

    /// `Σ_ij A_ij B_ij`
    pub fn frobenius_dot(&self, o: &Self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j] * o.a[i][j];
            }
        }
        s
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    pub fn asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                m = m.max((self.a[i][j] - self.a[j][i]).abs());
            }
        }
        m
    }

    /// Quadratic form `uᵀ A v`.
    pub fn bilinear(&self, u: &SVec<T>, v: &SVec<T>) -> T {
        u.dot(&self.mul_vec(v))
    }

    /// Determinant by partial-pivot elimination.
    pub fn det(&self) -> T {
        let n = self.n;
        let mut m = *self;
        let mut det = T::one();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| m.a[x][c].abs().partial_cmp(&m.a[y][c].abs()).unwrap())
                .unwrap();
            if m.a[p][c] == T::zero() {
                return T::zero();
            }
            if p != c {
                m.a.swap(p, c);
                det = -det;
            }
            det *= m.a[c][c];
            for r in c + 1..n {
                let f = m.a[r][c] / m.a[c][c];
                for k in c..n {
                    let v = m.a[c][k];
                    m.a[r][k] -= f * v;
                }
            }
        }
        det
    }

    /// Inverse by Gauss–Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut m = *self;
        let mut inv = Self::identity(n);
        let scale = self.max_abs();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| m.a[x][c].abs().partial_cmp(&m.a[y][c].abs()).unwrap())
                .unwrap();
            if !(m.a[p][c].abs() > T::epsilon() * scale) {
                return numerical("singular matrix in inverse");
            }
            m.a.swap(p, c);
            inv.a.swap(p, c);
            let d = T::one() / m.a[c][c];
            for k in 0..n {
                m.a[c][k] *= d;
                inv.a[c][k] *= d;
            }
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = m.a[r][c];
                if f == T::zero() {
                    continue;
                }
                for k in 0..n {
                    let (mv, iv) = (m.a[c][k], inv.a[c][k]);
                    m.a[r][k] -= f * mv;
                    inv.a[r][k] -= f * iv;
                }
            }
        }
        Ok(inv)
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.n;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self.a[j][j];
            for k in 0..j {
                d -= l.a[j][k] * l.a[j][k];
            }
            if !(d > T::zero()) {
                return numerical("matrix not positive definite in cholesky");
            }
            let djj = d.sqrt();
            l.a[j][j] = djj;
            for i in j + 1..n {
                let mut s = self.a[i][j];
                for k in 0..j {
                    s -= l.a[i][k] * l.a[j][k];
                }
                l.a[i][j] = s / djj;
            }
        }
        Ok(l)
    }

    /// Inverse of a lower triangular matrix.
    pub fn lower_inverse(&self) -> Self {
        let n = self.n;
        let mut inv = Self::zeros(n);
        for j in 0..n {
            inv.a[j][j] = T::one() / self.a[j][j];
            for i in j + 1..n {
                let mut s = T::zero();
                for k in j..i {
                    s += self.a[i][k] * inv.a[k][j];
                }
                inv.a[i][j] = -s / self.a[i][i];
            }
        }
        inv
    }
}

/// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors as columns.
#[derive(Clone, Copy, Debug)]
pub struct SymEigen<T> {
    pub values: SVec<T>,
    pub vectors: SMat<T>,
}

impl<T: Real> SymEigen<T> {
    /// Cyclic Jacobi rotations; exact to rounding for the small orders used here.
    pub fn new(m: &SMat<T>) -> Self {
        let n = m.n;
        let mut a = m.symmetrized();
        let mut v = SMat::identity(n);
        let scale = a.max_abs().max(T::min_positive_value());
        for _sweep in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..i {
                    off += a.a[i][j] * a.a[i][j];
                }
            }
            if off.sqrt() <= T::epsilon() * T::lit(1e-2) * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.a[p][q];
                    if apq.abs() <= T::min_positive_value() {
                        continue;
                    }
                    let theta = (a.a[q][q] - a.a[p][p]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a.a[k][p], a.a[k][q]);
                        a.a[k][p] = c * akp - s * akq;
                        a.a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a.a[p][k], a.a[q][k]);
                        a.a[p][k] = c * apk - s * aqk;
                        a.a[q][k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v.a[k][p], v.a[k][q]);
                        v.a[k][p] = c * vkp - s * vkq;
                        v.a[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&i, &j| a.a[i][i].partial_cmp(&a.a[j][j]).unwrap_or(std::cmp::Ordering::Equal));
        let values = SVec::from_fn(n, |k| a.a[idx[k]][idx[k]]);
        let vectors = SMat::from_fn(n, |i, k| v.a[i][idx[k]]);
        SymEigen { values, vectors }
    }

    /// `V f(Λ) Vᵀ`
    pub fn apply(&self, f: impl Fn(T) -> T) -> SMat<T> {
        let n = self.values.n;
        SMat::from_fn(n, |i, j| {
            (0..n).map(|k| self.vectors.a[i][k] * f(self.values[k]) * self.vectors.a[j][k]).sum()
        })
    }
}

/// Eigenvalues of the pencil `(A, B)` with `B` positive definite, ascending.
/// Returns the values together with the Cholesky-reduced symmetric matrix
/// `L⁻¹ A L⁻ᵀ` whose spectrum they are.
pub fn pencil_eigen<T: Real>(a: &SMat<T>, b: &SMat<T>) -> Result<(SymEigen<T>, SMat<T>)> {
    let l = b.cholesky()?;
    let li = l.lower_inverse();
    let c = li.mul(&a.symmetrized()).mul(&li.transpose()).symmetrized();
    Ok((SymEigen::new(&c), c))
}

/// Eigenvalues of a symmetric tridiagonal matrix (implicit QL with Wilkinson
/// shifts). `d` is the diagonal, `e` the sub-diagonal of length `d.len() - 1`.
pub fn tridiagonal_eigenvalues<T: Real>(d: &[T], e: &[T]) -> Result<Vec<T>> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<T> = e.iter().copied().chain(std::iter::once(T::zero())).collect();
    e.truncate(n);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return numerical("tridiagonal QL did not converge");
            }
            let mut g = (d[l + 1] - d[l]) / (T::lit(2.0) * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + T::lit(2.0) * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(d)
}

/// All eigenvalues of a dense symmetric matrix, ascending: Householder
/// reduction to tridiagonal form followed by [`tridiagonal_eigenvalues`].
pub fn dense_symmetric_eigenvalues<T: Real>(mut a: Vec<Vec<T>>) -> Result<Vec<T>> {
    let n = a.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    for k in 0..n.saturating_sub(2) {
        let alpha_sq: T = (k + 1..n).map(|i| a[i][k] * a[i][k]).sum();
        if alpha_sq <= T::min_positive_value() {
            continue;
        }
        let x0 = a[k + 1][k];
        let alpha = if x0 >= T::zero() { -alpha_sq.sqrt() } else { alpha_sq.sqrt() };
        // v = x − αe₁, H = I − 2vvᵀ/(vᵀv)
        for i in 0..n {
            v[i] = if i > k { a[i][k] } else { T::zero() };
        }
        v[k + 1] -= alpha;
        let vv: T = (k + 1..n).map(|i| v[i] * v[i]).sum();
        if vv <= T::min_positive_value() {
            continue;
        }
        let beta = T::lit(2.0) / vv;
        for i in k..n {
            p[i] = beta * (k + 1..n).map(|j| a[i][j] * v[j]).sum::<T>();
        }
        let kc = beta / T::lit(2.0) * (k + 1..n).map(|i| p[i] * v[i]).sum::<T>();
        for i in k..n {
            p[i] -= kc * v[i];
        }
        for i in k..n {
            for j in k..n {
                a[i][j] -= v[i] * p[j] + p[i] * v[j];
            }
        }
    }
    let d: Vec<T> = (0..n).map(|i| a[i][i]).collect();
    let e: Vec<T> = (0..n - 1).map(|i| a[i + 1][i]).collect();
    tridiagonal_eigenvalues(&d, &e)
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct Csr<T> {
    pub nrows: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Assembles from per-row `(column, value)` lists, merging duplicates.
    pub fn from_rows(rows: Vec<Vec<(usize, T)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in r {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { nrows, row_ptr, cols, vals }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap_or(T::zero())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.mul_vec(x, &mut y);
        y
    }

    /// Dense copy, for small operators only.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.nrows]; self.nrows];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d[i][j] = v;
            }
        }
        d
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Preconditioned conjugate gradients for `A x = b` with `A` symmetric
/// positive semi-definite on the subspace kept by `project`.
pub fn conjugate_gradient<T: Real>(
    apply: impl Fn(&[T], &mut [T]),
    precond: &[T],
    project: impl Fn(&mut [T]),
    b: &[T],
    x: &mut [T],
    rel_tol: T,
    max_iter: usize,
) -> Result<usize> {
    let n = b.len();
    let mut r = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    project(&mut r);
    let bnorm = dot(b, b).sqrt().max(T::min_positive_value());
    let mut z: Vec<T> = r.iter().zip(precond).map(|(&ri, &pi)| ri * pi).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        if dot(&r, &r).sqrt() <= rel_tol * bnorm {
            return Ok(it);
        }
        apply(&p, &mut ap);
        project(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return numerical("conjugate gradient breakdown (operator not positive on subspace)");
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * precond[i];
        }
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if dot(&r, &r).sqrt() <= rel_tol * bnorm * T::lit(100.0) {
        Ok(max_iter)
    } else {
        numerical("conjugate gradient did not converge")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(n: usize) -> SMat<f64> {
        SMat::from_fn(n, |i, j| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            1.0 / (1.0 + a + b) + if i == j { 2.0 } else { 0.0 }
        })
    }

    #[test]
    fn jacobi_reconstructs() {
        let m = sample(5);
        let e = SymEigen::new(&m);
        let back = e.apply(|x| x);
        assert!(back.sub(&m).max_abs() < 1e-13);
        for k in 1..5 {
            assert!(e.values[k] >= e.values[k - 1]);
        }
    }

    #[test]
    fn cholesky_and_inverse() {
        let m = sample(4);
        let l = m.cholesky().unwrap();
        assert!(l.mul(&l.transpose()).sub(&m).max_abs() < 1e-14);
        let inv = m.inverse().unwrap();
        assert!(inv.mul(&m).sub(&SMat::identity(4)).max_abs() < 1e-13);
        let li = l.lower_inverse();
        assert!(li.mul(&l).sub(&SMat::identity(4)).max_abs() < 1e-14);
        assert!(m.congruence(&li).sub(&SMat::identity(4)).max_abs() < 1e-13);
        assert_relative_eq!(m.det(), l.det() * l.det(), max_relative = 1e-13);
    }

    #[test]
    fn pencil_matches_inverse_product() {
        let a = sample(3);
        let b = SMat::diag(&[1.0, 2.0, 4.0]);
        let (e, _) = pencil_eigen(&a, &b).unwrap();
        // eigenvalues of B⁻¹A via its characteristic polynomial roots
        let bia = b.inverse().unwrap().mul(&a);
        for k in 0..3 {
            let shifted = bia.sub(&SMat::identity(3).scale(e.values[k]));
            assert!(shifted.det().abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_against_closed_form() {
        // second-difference matrix: eigenvalues 2 - 2cos(kπ/(n+1))
        let n = 40;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        let ev = tridiagonal_eigenvalues(&d, &e).unwrap();
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * (((k + 1) as f64) * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert_relative_eq!(*v, exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn cg_solves_laplacian() {
        let n = 50;
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.5)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        let a = Csr::from_rows(rows);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let pre: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
        conjugate_gradient(|v, out| a.mul_vec(v, out), &pre, |_| {}, &b, &mut x, 1e-12, 500).unwrap();
        let ax = a.apply(&x);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_eigenvalues_match_jacobi() {
        let m = sample(6);
        let dense: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| m[(i, j)]).collect()).collect();
        let got = dense_symmetric_eigenvalues(dense).unwrap();
        let want = SymEigen::new(&m).values;
        for k in 0..6 {
            assert!((got[k] - want[k]).abs() < 1e-12, "{got:?}");
        }
        // path graph Laplacian: 2 − 2cos(πk/n)
        let n = 40;
        let lap: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match (i as isize - j as isize).abs() {
                        0 => if i == 0 || i == n - 1 { 1.0 } else { 2.0 },
                        1 => -1.0,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        let ev = dense_symmetric_eigenvalues(lap).unwrap();
        for (k, v) in ev.iter().enumerate() {
            let want = 2.0 - 2.0 * (std::f64::consts::PI * k as f64 / n as f64).cos();
            assert!((v - want).abs() < 1e-12, "{k}: {v} vs {want}");
        }
    }
}
