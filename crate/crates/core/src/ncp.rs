//! Nonlinear complementarity problems: find `z >= 0` with `f(z) >= 0` and
//! `zᵀ f(z) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, fd_jacobian, lu_det, DenseMatrix, FD_STEP};

/// Default tolerance for [`ComplementarityCertificate::is_solution`].
pub const DEFAULT_CERT_TOL: f64 = 1e-6;

/// Largest dimension accepted by [`principal_minor_diagnostic`].
pub const MAX_MINOR_DIM: usize = 12;

/// An NCP instance. Implementations must be pure: the same `z` always gives
/// the same values.
pub trait NcpProblem {
    fn dim(&self) -> usize;

    fn eval(&self, z: &[f64]) -> Result<Vec<f64>>;

    /// Jacobian `J_f(z)`, with `J_f[i][j] = ∂f_i/∂z_j`.
    fn jacobian(&self, z: &[f64]) -> Result<DenseMatrix>;

    /// Analytic `∂/∂z (J_f(z)ᵀ u)` at fixed `u`, if the problem can supply it.
    ///
    /// Returning `None` makes the homotopy fall back to central differences
    /// of `z ↦ J_f(z)ᵀ u`.
    fn jacobian_transpose_derivative(&self, _z: &[f64], _u: &[f64]) -> Option<Result<DenseMatrix>> {
        None
    }
}

impl<P: NcpProblem + ?Sized> NcpProblem for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        (**self).eval(z)
    }
    fn jacobian(&self, z: &[f64]) -> Result<DenseMatrix> {
        (**self).jacobian(z)
    }
    fn jacobian_transpose_derivative(&self, z: &[f64], u: &[f64]) -> Option<Result<DenseMatrix>> {
        (**self).jacobian_transpose_derivative(z, u)
    }
}

impl<P: NcpProblem + ?Sized> NcpProblem for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        (**self).eval(z)
    }
    fn jacobian(&self, z: &[f64]) -> Result<DenseMatrix> {
        (**self).jacobian(z)
    }
    fn jacobian_transpose_derivative(&self, z: &[f64], u: &[f64]) -> Option<Result<DenseMatrix>> {
        (**self).jacobian_transpose_derivative(z, u)
    }
}

type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type JacFn = dyn Fn(&[f64]) -> DenseMatrix + Send + Sync;

/// Problem assembled from closures. Without an explicit Jacobian, `J_f` is
/// taken by central differences.
pub struct FnProblem {
    n: usize,
    f: Box<MapFn>,
    jf: Option<Box<JacFn>>,
}

impl FnProblem {
    pub fn new(n: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { n, f: Box::new(f), jf: None }
    }

    pub fn with_jacobian(mut self, jf: impl Fn(&[f64]) -> DenseMatrix + Send + Sync + 'static) -> Self {
        self.jf = Some(Box::new(jf));
        self
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jf.is_some()
    }
}

impl NcpProblem for FnProblem {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len(z, self.n)?;
        let v = (self.f)(z);
        check_len(&v, self.n)?;
        finite(v)
    }

    fn jacobian(&self, z: &[f64]) -> Result<DenseMatrix> {
        check_len(z, self.n)?;
        match &self.jf {
            Some(jf) => {
                let j = jf(z);
                if j.rows() != self.n || j.cols() != self.n {
                    return Err(Error::DimensionMismatch("jacobian shape".into()));
                }
                if !j.all_finite() {
                    return Err(Error::NonFiniteEvaluation);
                }
                Ok(j)
            }
            None => fd_jacobian(|x| self.eval(x), z, FD_STEP),
        }
    }
}

pub(crate) fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!("expected length {n}, got {}", v.len())));
    }
    Ok(())
}

pub(crate) fn finite(v: Vec<f64>) -> Result<Vec<f64>> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation)
    }
}

/// Scalar summary of how well `z` satisfies the complementarity conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityCertificate {
    /// Smallest entry of `z`.
    pub z_min: f64,
    /// Smallest entry of `f(z)`.
    pub f_min: f64,
    /// `zᵀ f(z)`.
    pub dot: f64,
    /// `‖min(z, f(z))‖∞`.
    pub natural_residual: f64,
    pub n: usize,
}

impl ComplementarityCertificate {
    pub fn is_solution(&self, tol: f64) -> bool {
        self.z_min >= -tol
            && self.f_min >= -tol
            && self.dot.abs() <= tol * self.n as f64
            && self.natural_residual <= tol
    }
}

/// Certificate for `z` computed from a fresh evaluation of `f(z)`.
pub fn residual<P: NcpProblem + ?Sized>(p: &P, z: &[f64]) -> Result<ComplementarityCertificate> {
    let fz = p.eval(z)?;
    Ok(certificate_from_values(z, &fz))
}

/// Certificate from already computed `z` and `f(z)`.
pub fn certificate_from_values(z: &[f64], fz: &[f64]) -> ComplementarityCertificate {
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    ComplementarityCertificate {
        z_min: min(z),
        f_min: min(fz),
        dot: dot(z, fz),
        natural_residual: z
            .iter()
            .zip(fz)
            .fold(0.0, |m, (a, b)| m.max(a.min(*b).abs())),
        n: z.len(),
    }
}

/// Split of the terminal slack variables into `Δz = z − w₂` and
/// `Δy = y − w₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionDiagnostic {
    pub delta_z: Vec<f64>,
    pub delta_y: Vec<f64>,
    /// `w₁ᵢ + w₂ᵢ` per index.
    pub slack_sum: Vec<f64>,
}

impl DecompositionDiagnostic {
    pub fn new(z: &[f64], y: &[f64], w1: &[f64], w2: &[f64]) -> Self {
        Self {
            delta_z: z.iter().zip(w2).map(|(a, b)| a - b).collect(),
            delta_y: y.iter().zip(w1).map(|(a, b)| a - b).collect(),
            slack_sum: w1.iter().zip(w2).map(|(a, b)| a + b).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexCondition {
    pub index: usize,
    /// `|Δzᵢ Δyᵢ| <= tol`.
    pub product_zero: bool,
    /// `w₁ᵢ + w₂ᵢ > tol`.
    pub positive_slack: bool,
}

impl IndexCondition {
    pub fn holds(&self) -> bool {
        self.product_zero || self.positive_slack
    }
}

/// Per-index test of "`Δzᵢ Δyᵢ = 0` or `w₁ᵢ + w₂ᵢ > 0`", the condition under
/// which the `z` block of a terminal point solves the NCP.
pub fn check_index_conditions(d: &DecompositionDiagnostic, tol: f64) -> Result<Vec<IndexCondition>> {
    let n = d.delta_z.len();
    if d.delta_y.len() != n || d.slack_sum.len() != n {
        return Err(Error::DimensionMismatch("decomposition vectors differ in length".into()));
    }
    Ok((0..n)
        .map(|i| IndexCondition {
            index: i,
            product_zero: (d.delta_z[i] * d.delta_y[i]).abs() <= tol,
            positive_slack: d.slack_sum[i] > tol,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalMinorReport {
    pub minors_checked: usize,
    pub min_minor: f64,
    pub min_abs_minor: f64,
    pub all_nonsingular: bool,
    /// Every principal minor is `>= -tol` (P₀ at this point).
    pub p0: bool,
}

/// Enumerates all `2ⁿ − 1` principal minors of `a`.
pub fn principal_minor_diagnostic(a: &DenseMatrix, tol: f64) -> Result<PrincipalMinorReport> {
    if !a.is_square() {
        return Err(Error::NonSquare { rows: a.rows(), cols: a.cols() });
    }
    let n = a.rows();
    if n > MAX_MINOR_DIM {
        return Err(Error::DimensionTooLarge { dim: n, limit: MAX_MINOR_DIM });
    }
    let mut min_minor = f64::INFINITY;
    let mut min_abs = f64::INFINITY;
    let mut idx = Vec::with_capacity(n);
    for mask in 1u32..(1u32 << n) {
        idx.clear();
        idx.extend((0..n).filter(|i| mask & (1 << i) != 0));
        let d = lu_det(&a.principal_submatrix(&idx))?;
        min_minor = min_minor.min(d);
        min_abs = min_abs.min(d.abs());
    }
    let checked = (1usize << n) - 1;
    if n == 0 {
        min_minor = 1.0;
        min_abs = 1.0;
    }
    Ok(PrincipalMinorReport {
        minors_checked: checked,
        min_minor,
        min_abs_minor: min_abs,
        all_nonsingular: min_abs > tol,
        p0: min_minor >= -tol,
    })
}
