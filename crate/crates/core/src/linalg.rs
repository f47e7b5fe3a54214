//! Small dense linear algebra kernel.
//!
//! Everything here works on row-major `f64` storage and is sized for the
//! handful-of-dozens dimensions that show up when tracing a homotopy path.
//! Singularity is judged relative to the largest entry of the matrix: a pivot
//! with `|p| <= SINGULAR_RELATIVE * max|A|` is treated as zero.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative pivot threshold used by [`solve`] and [`pinv_apply`].
pub const SINGULAR_RELATIVE: f64 = 1e-13;

/// Default relative step for [`fd_jacobian`].
pub const FD_STEP: f64 = 1e-6;

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries. Fails if the length does not
    /// match or an entry is not finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x` without materialising the transpose.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "tr_mul_vec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · selfᵀ`, the normal matrix of a wide Jacobian.
    pub fn gram_rows(&self) -> Self {
        let n = self.rows;
        let mut g = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Square submatrix on the given (sorted) index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let k = idx.len();
        let mut s = Self::zeros(k, k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                s[(a, b)] = self[(i, j)];
            }
        }
        s
    }

    /// Appends `col` as a new rightmost column.
    pub fn hstack_col(&self, col: &[f64]) -> Self {
        assert_eq!(col.len(), self.rows);
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.push(col[i]);
        }
        Self {
            rows: self.rows,
            cols,
            data,
        }
    }

    /// Appends `row` as a new bottom row.
    pub fn vstack_row(&self, row: &[f64]) -> Self {
        assert_eq!(row.len(), self.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(row);
        Self {
            rows: self.rows + 1,
            cols: self.cols,
            data,
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// LU factorisation with partial pivoting, `P A = L U`.
///
/// The factorisation itself never fails on a singular matrix; it records the
/// smallest pivot so callers can decide whether the factors are usable.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    parity: f64,
    min_pivot: f64,
    scale: f64,
}

impl Lu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NonSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut parity = 1.0;
        let mut min_pivot = f64::INFINITY;

        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                parity = -parity;
            }
            min_pivot = min_pivot.min(pmax);
            let pivot = lu[k * n + k];
            if pivot == 0.0 {
                continue;
            }
            for i in (k + 1)..n {
                let factor = lu[i * n + k] / pivot;
                lu[i * n + k] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= factor * lu[k * n + j];
                    }
                }
            }
        }
        if n == 0 {
            min_pivot = 1.0;
        }
        Ok(Self {
            n,
            lu,
            perm,
            parity,
            min_pivot,
            scale: a.max_abs(),
        })
    }

    pub fn det(&self) -> f64 {
        (0..self.n).fold(self.parity, |d, i| d * self.lu[i * self.n + i])
    }

    /// True when some pivot falls below the relative singularity threshold.
    pub fn is_singular(&self) -> bool {
        self.is_singular_rel(SINGULAR_RELATIVE)
    }

    /// Singularity test against a caller-chosen relative pivot threshold.
    pub fn is_singular_rel(&self, tol: f64) -> bool {
        self.scale == 0.0 || self.min_pivot <= tol * self.scale
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} for a {n}x{n} system",
                b.len()
            )));
        }
        if self.is_singular() {
            return Err(Error::SingularMatrix);
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu[i * n..i * n + i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu[i * n + i + 1..(i + 1) * n], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix);
        }
        Ok(x)
    }
}

/// Determinant by pivoted elimination.
pub fn lu_det(a: &DenseMatrix) -> Result<f64> {
    Ok(Lu::factor(a)?.det())
}

/// Solves `A x = b` for square nonsingular `A`.
pub fn solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    Lu::factor(a)?.solve(b)
}

/// Applies the Moore–Penrose inverse of a full-row-rank `J` (rows ≤ cols)
/// to `r`, giving the minimum-norm solution of `J x = r`.
///
/// Works on a Householder QR factorisation of `Jᵀ`, so the conditioning is
/// that of `J` rather than of `J Jᵀ`.
pub fn pinv_apply(j: &DenseMatrix, r: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = (j.rows(), j.cols());
    if n > m {
        return Err(Error::RankDeficient);
    }
    if r.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "residual of length {} for {n} rows",
            r.len()
        )));
    }
    // column k of Jᵀ is row k of J; keep them as contiguous vectors
    let mut a: Vec<Vec<f64>> = (0..n).map(|k| j.row(k).to_vec()).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut diag = vec![0.0; n];
    for k in 0..n {
        let col = &a[k];
        let alpha = norm2(&col[k..]);
        let mut v = vec![0.0; m];
        v[k..].copy_from_slice(&col[k..]);
        let rkk = if col[k] >= 0.0 { -alpha } else { alpha };
        v[k] -= rkk;
        let vn = dot(&v[k..], &v[k..]);
        if vn > 0.0 {
            for c in a.iter_mut().skip(k + 1) {
                let s = 2.0 * dot(&v[k..], &c[k..]) / vn;
                for i in k..m {
                    c[i] -= s * v[i];
                }
            }
        }
        diag[k] = rkk;
        reflectors.push(v);
    }
    let scale = j.max_abs() * (m as f64).sqrt();
    if scale == 0.0 || diag.iter().any(|d| d.abs() <= SINGULAR_RELATIVE * scale) {
        return Err(Error::RankDeficient);
    }
    // Rᵀ y = r, with R[i][k] = a[k][i] for i < k and R[k][k] = diag[k]
    let mut y = vec![0.0; m];
    for k in 0..n {
        let s: f64 = (0..k).map(|i| a[k][i] * y[i]).sum();
        y[k] = (r[k] - s) / diag[k];
    }
    for (k, v) in reflectors.iter().enumerate().rev() {
        let vn = dot(&v[k..], &v[k..]);
        if vn > 0.0 {
            let s = 2.0 * dot(&v[k..], &y[k..]) / vn;
            for i in k..m {
                y[i] -= s * v[i];
            }
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteEvaluation);
    }
    Ok(y)
}

/// Central-difference Jacobian of `f` at `x`; column `j` uses the step
/// `h * max(1, |x_j|)`.
pub fn fd_jacobian<F>(mut f: F, x: &[f64], h: f64) -> Result<DenseMatrix>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step {h} must be positive")));
    }
    let n = x.len();
    let mut probe = x.to_vec();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut m = None;
    for j in 0..n {
        let step = h * x[j].abs().max(1.0);
        probe[j] = x[j] + step;
        let fp = f(&probe)?;
        probe[j] = x[j] - step;
        let fm = f(&probe)?;
        probe[j] = x[j];
        if fp.len() != fm.len() || m.is_some_and(|m| m != fp.len()) {
            return Err(Error::DimensionMismatch("map output length changed".into()));
        }
        m = Some(fp.len());
        if fp.iter().chain(&fm).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation);
        }
        cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect());
    }
    let rows = match m {
        Some(m) => m,
        None => f(x)?.len(),
    };
    let mut jac = DenseMatrix::zeros(rows, n);
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            jac[(i, j)] = *v;
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn det_examples() {
        assert_eq!(lu_det(&DenseMatrix::identity(3)).unwrap(), 1.0);
        assert_eq!(lu_det(&DenseMatrix::from_diag(&[2.0, 3.0])).unwrap(), 6.0);
        let d = lu_det(&mat(&[&[1.0, 2.0], &[3.0, 4.0]])).unwrap();
        assert!((d + 2.0).abs() < 1e-14, "{d}");
    }

    #[test]
    fn det_permutation_parity() {
        let p = mat(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(lu_det(&p).unwrap(), -1.0);
    }

    #[test]
    fn det_rejects_non_square() {
        let a = DenseMatrix::zeros(2, 3);
        assert_eq!(lu_det(&a), Err(Error::NonSquare { rows: 2, cols: 3 }));
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve(&DenseMatrix::identity(2), &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(
            solve(&DenseMatrix::from_diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap(),
            vec![1.0, 1.0]
        );
        let x = solve(&mat(&[&[2.0, 1.0], &[1.0, 2.0]]), &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn solve_singular() {
        let a = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(solve(&a, &[1.0, 1.0]), Err(Error::SingularMatrix));
        assert_eq!(solve(&DenseMatrix::zeros(2, 2), &[1.0, 1.0]), Err(Error::SingularMatrix));
    }

    #[test]
    fn pinv_examples() {
        assert_eq!(pinv_apply(&DenseMatrix::identity(2), &[5.0, 7.0]).unwrap(), vec![5.0, 7.0]);
        let j = mat(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert_eq!(pinv_apply(&j, &[3.0, -4.0]).unwrap(), vec![3.0, -4.0, 0.0]);
    }

    #[test]
    fn pinv_rank_deficient() {
        let j = mat(&[&[1.0, 1.0, 0.0], &[2.0, 2.0, 0.0]]);
        assert_eq!(pinv_apply(&j, &[1.0, 1.0]), Err(Error::RankDeficient));
        let tall = DenseMatrix::zeros(3, 2);
        assert_eq!(pinv_apply(&tall, &[1.0, 1.0, 1.0]), Err(Error::RankDeficient));
    }

    #[test]
    fn pinv_badly_scaled_rows() {
        // row norms 1e4 and 1e-3: J Jᵀ has condition ~1e14, J itself ~1e7
        let j = mat(&[&[1e4, 2e3, 0.0], &[0.0, 1e-3, 2e-3]]);
        let x = pinv_apply(&j, &[1.0, 1.0]).unwrap();
        let back = j.mul_vec(&x);
        assert!((back[0] - 1.0).abs() < 1e-9 && (back[1] - 1.0).abs() < 1e-9, "{back:?}");
    }

    #[test]
    fn pinv_is_minimum_norm() {
        // x = J⁺ r lies in the row space of J, so it is orthogonal to the null vector.
        let j = mat(&[&[1.0, 2.0, 3.0]]);
        let x = pinv_apply(&j, &[6.0]).unwrap();
        let null = [1.0, 1.0, -1.0];
        assert!(dot(&x, &null).abs() < 1e-14);
        assert!((dot(j.row(0), &x) - 6.0).abs() < 1e-13);
    }

    #[test]
    fn fd_examples() {
        let jac = fd_jacobian(|x| Ok(x.to_vec()), &[0.3, -2.0, 7.0], FD_STEP).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((jac[(i, j)] - e).abs() < 1e-9);
            }
        }
        let jac = fd_jacobian(|x| Ok(vec![x[0] * x[0], x[1]]), &[3.0, 1.0], 1e-6).unwrap();
        let expect = [[6.0, 0.0], [0.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((jac[(i, j)] - expect[i][j]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn fd_affine_is_exact() {
        let m = mat(&[&[1.0, -2.0, 0.5], &[0.0, 3.0, 4.0]]);
        let q = [1.0, -1.0];
        let jac = fd_jacobian(
            |x| Ok(m.mul_vec(x).iter().zip(&q).map(|(a, b)| a + b).collect()),
            &[0.2, 0.4, -0.1],
            FD_STEP,
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((jac[(i, j)] - m[(i, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fd_non_finite() {
        let r = fd_jacobian(|x| Ok(vec![1.0 / (x[0] - 1.0)]), &[1.0], 1e-6);
        assert!(r.is_ok());
        let r = fd_jacobian(|_| Ok(vec![f64::NAN]), &[1.0], 1e-6);
        assert_eq!(r, Err(Error::NonFiniteEvaluation));
    }

    #[test]
    fn constructor_checks() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert_eq!(
            DenseMatrix::new(1, 1, vec![f64::INFINITY]),
            Err(Error::NonFiniteEvaluation)
        );
    }

    fn well_conditioned(n: usize) -> impl Strategy<Value = DenseMatrix> {
        proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
            let mut m = DenseMatrix::new(n, n, v).unwrap();
            for i in 0..n {
                m[(i, i)] += n as f64 + 1.0;
            }
            m
        })
    }

    proptest! {
        #[test]
        fn det_is_multiplicative(a in well_conditioned(4), b in well_conditioned(4)) {
            let lhs = lu_det(&a.matmul(&b)).unwrap();
            let rhs = lu_det(&a).unwrap() * lu_det(&b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs());
        }

        #[test]
        fn solve_residual(a in well_conditioned(5), b in proptest::collection::vec(-10.0f64..10.0, 5)) {
            let x = solve(&a, &b).unwrap();
            let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
            prop_assert!(norm2(&r) <= 1e-10 * (1.0 + norm2(&b)));
        }

        #[test]
        fn pinv_right_inverse(
            v in proptest::collection::vec(-1.0f64..1.0, 20),
            r in proptest::collection::vec(-5.0f64..5.0, 4),
        ) {
            let mut j = DenseMatrix::new(4, 5, v).unwrap();
            for i in 0..4 {
                j[(i, i)] += 3.0;
            }
            let x = pinv_apply(&j, &r).unwrap();
            let back = j.mul_vec(&x);
            let err: Vec<f64> = back.iter().zip(&r).map(|(a, b)| a - b).collect();
            prop_assert!(norm2(&err) <= 1e-9 * (1.0 + norm2(&r)));
        }
    }
}
