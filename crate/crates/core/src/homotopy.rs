//! The augmented homotopy for an NCP and everything needed to evaluate and
//! differentiate it.
//!
//! A point is `x = (z, y, w₁, w₂, v₁, v₂)` with `z, y, w₁, w₂ ∈ ℝⁿ` and
//! scalars `v₁, v₂`, stored flat in that order (length `4n + 2`). With
//! `A = m − Σ(z + w₁)ᵢ`, `B = m − Σ(y + w₂)ᵢ` and a start point `x⁰`, the map
//! is
//!
//! ```text
//! H(x, λ) = [ (1−λ)(y − w₁ + v₁e + J_f(z)ᵀ(z − w₂ + v₂e)) + λ(z − z⁰) ]
//!           [ W₁z − λW₁⁰z⁰                                          ]
//!           [ W₂y − λW₂⁰y⁰                                          ]
//!           [ y − (1−λ)f(z) − λy⁰                                   ]
//!           [ (A − v₂)v₁ − λ(A⁰ − v₂⁰)v₁⁰                           ]
//!           [ (B − v₁)v₂ − λ(B⁰ − v₁⁰)v₂⁰                           ]
//! ```
//!
//! `H(x⁰, 1) = 0`, and at `λ = 0` the map no longer depends on `x⁰`; that
//! start-free system is [`eval_h0`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, fd_jacobian, lu_det, DenseMatrix, Lu, FD_STEP};
use crate::ncp::{check_len, finite, NcpProblem};
use crate::tracer::PathMap;

/// Additive tolerance used for closed-region membership along the path.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Default start value for `v₁⁰ = v₂⁰` in loose mode.
pub const DEFAULT_V0: f64 = 1e-3;

/// A point `(z, y, w₁, w₂, v₁, v₂)` stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotopyPoint {
    n: usize,
    data: Vec<f64>,
}

impl HomotopyPoint {
    pub fn new(z: &[f64], y: &[f64], w1: &[f64], w2: &[f64], v1: f64, v2: f64) -> Result<Self> {
        let n = z.len();
        for v in [y, w1, w2] {
            check_len(v, n)?;
        }
        let mut data = Vec::with_capacity(4 * n + 2);
        for v in [z, y, w1, w2] {
            data.extend_from_slice(v);
        }
        data.push(v1);
        data.push(v2);
        Self::from_flat(n, data)
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self> {
        check_len(&data, 4 * n + 2)?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEvaluation);
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn z(&self) -> &[f64] {
        &self.data[..self.n]
    }

    pub fn y(&self) -> &[f64] {
        &self.data[self.n..2 * self.n]
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[2 * self.n..3 * self.n]
    }

    pub fn w2(&self) -> &[f64] {
        &self.data[3 * self.n..4 * self.n]
    }

    pub fn v1(&self) -> f64 {
        self.data[4 * self.n]
    }

    pub fn v2(&self) -> f64 {
        self.data[4 * self.n + 1]
    }

    /// Same point with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

/// Borrowed view of a flat point.
#[derive(Clone, Copy)]
struct Parts<'a> {
    z: &'a [f64],
    y: &'a [f64],
    w1: &'a [f64],
    w2: &'a [f64],
    v1: f64,
    v2: f64,
}

impl<'a> Parts<'a> {
    fn split(x: &'a [f64], n: usize) -> Result<Self> {
        check_len(x, 4 * n + 2)?;
        Ok(Self {
            z: &x[..n],
            y: &x[n..2 * n],
            w1: &x[2 * n..3 * n],
            w2: &x[3 * n..4 * n],
            v1: x[4 * n],
            v2: x[4 * n + 1],
        })
    }

    /// `(A, B) = (m − Σ(z + w₁), m − Σ(y + w₂))`.
    fn ab(&self, m: f64) -> (f64, f64) {
        let a = m - self.z.iter().chain(self.w1).sum::<f64>();
        let b = m - self.y.iter().chain(self.w2).sum::<f64>();
        (a, b)
    }
}

/// The bounding parameters `m` (large) and `l` (small) of the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionParams {
    pub m: f64,
    pub l: f64,
}

impl RegionParams {
    pub fn new(m: f64, l: f64) -> Result<Self> {
        let rp = Self { m, l };
        rp.validate()?;
        Ok(rp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.m.is_finite() && self.l <= self.m / 100.0) {
            return Err(Error::InvalidParameter(format!(
                "region needs 0 < l <= m/100, got m = {}, l = {}",
                self.m, self.l
            )));
        }
        Ok(())
    }
}

impl Default for RegionParams {
    fn default() -> Self {
        Self { m: 1e4, l: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSlack {
    /// `A − v₂`.
    pub slack_a: f64,
    /// `B − v₁`.
    pub slack_b: f64,
    pub min_coordinate: f64,
}

impl RegionSlack {
    /// Membership in the open region: every coordinate positive and both
    /// slacks above `l`.
    pub fn is_member(&self, rp: &RegionParams) -> bool {
        self.min_coordinate > 0.0 && self.slack_a > rp.l && self.slack_b > rp.l
    }

    /// Closed-region membership with an additive tolerance.
    pub fn is_member_closed(&self, rp: &RegionParams, tol: f64) -> bool {
        self.min_coordinate >= -tol && self.slack_a >= rp.l - tol && self.slack_b >= rp.l - tol
    }
}

pub fn region_slack(x: &HomotopyPoint, rp: &RegionParams) -> RegionSlack {
    region_slack_flat(x.as_slice(), x.n(), rp)
}

pub(crate) fn region_slack_flat(x: &[f64], n: usize, rp: &RegionParams) -> RegionSlack {
    let p = Parts::split(x, n).expect("flat point length");
    let (a, b) = p.ab(rp.m);
    RegionSlack {
        slack_a: a - p.v2,
        slack_b: b - p.v1,
        min_coordinate: x.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// `v₂⁰` is chosen so that `A⁰B⁰ − B⁰v₂⁰ − A⁰v₁⁰ = 0`.
    Strict,
    /// `v₁⁰ = v₂⁰` taken from the caller.
    #[default]
    Loose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartCondition {
    /// Start lies in the open region.
    Region,
    /// `A⁰B⁰ − B⁰v₂⁰ − A⁰v₁⁰ = 0`.
    Equality,
    /// `l(B⁰v₂⁰ − A⁰v₁⁰) + lB⁰(l − A⁰) + A⁰v₁⁰(A⁰ − v₂⁰) ≠ 0`.
    SlackABoundary,
    /// `l(A⁰v₁⁰ − B⁰v₂⁰) + lA⁰(l − B⁰) + B⁰v₂⁰(B⁰ − v₁⁰) ≠ 0`.
    SlackBBoundary,
    /// `l(B⁰ − l) ≠ (A⁰ − v₂⁰)v₁⁰`.
    CornerA,
    /// `l(A⁰ − l) ≠ (B⁰ − v₁⁰)v₂⁰`.
    CornerB,
}

impl StartCondition {
    pub fn is_inequality(self) -> bool {
        !matches!(self, Self::Region | Self::Equality)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionFlag {
    pub condition: StartCondition,
    pub passed: bool,
    /// Left-hand side minus right-hand side (region: smallest margin).
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialPoint {
    pub point: HomotopyPoint,
    pub mode: InitMode,
    pub validation: Vec<ConditionFlag>,
}

impl InitialPoint {
    /// Validates `point` and wraps it; errors follow [`make_initial_point`].
    pub fn from_point(point: HomotopyPoint, rp: &RegionParams, mode: InitMode) -> Result<Self> {
        let validation = validate_start(&point, rp);
        let region = validation[0];
        if !region.passed {
            return Err(Error::RegionViolation(format!(
                "smallest region margin is {:e}",
                region.value
            )));
        }
        if mode == InitMode::Loose {
            let failed: Vec<String> = validation
                .iter()
                .filter(|f| f.condition.is_inequality() && !f.passed)
                .map(|f| format!("{:?}", f.condition))
                .collect();
            if !failed.is_empty() {
                return Err(Error::ConditionViolation(failed));
            }
        }
        Ok(Self { point, mode, validation })
    }

    pub fn flag(&self, c: StartCondition) -> Option<&ConditionFlag> {
        self.validation.iter().find(|f| f.condition == c)
    }
}

/// All-ones vectors with `v₁⁰ = v₂⁰ = 0.001`, loose mode.
pub fn default_start(n: usize, rp: &RegionParams) -> Result<InitialPoint> {
    let ones = vec![1.0; n];
    make_initial_point(&ones, &ones, &ones, &ones, DEFAULT_V0, rp, InitMode::Loose)
}

/// Builds a start point. Strict mode solves the equality condition for
/// `v₂⁰`; loose mode uses `v₂⁰ = v₁⁰`.
pub fn make_initial_point(
    z0: &[f64],
    y0: &[f64],
    w10: &[f64],
    w20: &[f64],
    v10: f64,
    rp: &RegionParams,
    mode: InitMode,
) -> Result<InitialPoint> {
    rp.validate()?;
    let v20 = match mode {
        InitMode::Loose => v10,
        InitMode::Strict => {
            let a0 = rp.m - z0.iter().chain(w10).sum::<f64>();
            let b0 = rp.m - y0.iter().chain(w20).sum::<f64>();
            a0 * (b0 - v10) / b0
        }
    };
    let point = HomotopyPoint::new(z0, y0, w10, w20, v10, v20)?;
    InitialPoint::from_point(point, rp, mode)
}

/// Evaluates every start condition without failing.
pub fn validate_start(x0: &HomotopyPoint, rp: &RegionParams) -> Vec<ConditionFlag> {
    let s = region_slack(x0, rp);
    let p = Parts::split(x0.as_slice(), x0.n()).expect("valid point");
    let (a, b) = p.ab(rp.m);
    let (v1, v2, l) = (p.v1, p.v2, rp.l);
    let margin = s.min_coordinate.min(s.slack_a - l).min(s.slack_b - l);

    let scale = 1.0 + a.abs().max(b.abs()).powi(2);
    let nonzero = |v: f64| v.abs() > 1e-12 * scale;
    let mut flags = vec![ConditionFlag {
        condition: StartCondition::Region,
        passed: s.is_member(rp),
        value: margin,
    }];
    let eq = a * b - b * v2 - a * v1;
    flags.push(ConditionFlag {
        condition: StartCondition::Equality,
        passed: !nonzero(eq),
        value: eq,
    });
    let ineqs = [
        (
            StartCondition::SlackABoundary,
            l * (b * v2 - a * v1) + l * b * (l - a) + a * v1 * (a - v2),
        ),
        (
            StartCondition::SlackBBoundary,
            l * (a * v1 - b * v2) + l * a * (l - b) + b * v2 * (b - v1),
        ),
        (StartCondition::CornerA, l * (b - l) - (a - v2) * v1),
        (StartCondition::CornerB, l * (a - l) - (b - v1) * v2),
    ];
    flags.extend(ineqs.into_iter().map(|(condition, value)| ConditionFlag {
        condition,
        passed: nonzero(value),
        value,
    }));
    flags
}

/// `λ^{4n+2}((A⁰ − v₂⁰)(B⁰ − v₁⁰) − v₁⁰v₂⁰) Πᵢ zᵢ⁰yᵢ⁰`, the determinant of
/// `∂H/∂x⁰`.
pub fn det_dh_dx0_closed_form(x0: &HomotopyPoint, lambda: f64, rp: &RegionParams) -> f64 {
    let p = Parts::split(x0.as_slice(), x0.n()).expect("valid point");
    let (a, b) = p.ab(rp.m);
    let middle = (a - p.v2) * (b - p.v1) - p.v1 * p.v2;
    let prod: f64 = p.z.iter().zip(p.y).map(|(z, y)| z * y).product();
    lambda.powi(4 * x0.n() as i32 + 2) * middle * prod
}

/// `H₀(x)`: the `λ = 0` system.
pub fn eval_h0<P: NcpProblem + ?Sized>(p: &P, rp: &RegionParams, x: &HomotopyPoint) -> Result<Vec<f64>> {
    let n = p.dim();
    let s = Parts::split(x.as_slice(), n)?;
    let jf = p.jacobian(s.z)?;
    let fz = p.eval(s.z)?;
    let (a, b) = s.ab(rp.m);
    let u: Vec<f64> = (0..n).map(|i| s.z[i] - s.w2[i] + s.v2).collect();
    let jtu = jf.tr_mul_vec(&u);
    let mut out = Vec::with_capacity(4 * n + 2);
    out.extend((0..n).map(|i| s.y[i] - s.w1[i] + s.v1 + jtu[i]));
    out.extend((0..n).map(|i| s.w1[i] * s.z[i]));
    out.extend((0..n).map(|i| s.w2[i] * s.y[i]));
    out.extend((0..n).map(|i| s.y[i] - fz[i]));
    out.push((a - s.v2) * s.v1);
    out.push((b - s.v1) * s.v2);
    finite(out)
}

/// Merit `μ(x) = ‖H₀(x)‖²`.
pub fn merit<P: NcpProblem + ?Sized>(p: &P, rp: &RegionParams, x: &HomotopyPoint) -> Result<f64> {
    let h = eval_h0(p, rp, x)?;
    Ok(dot(&h, &h))
}

/// `∇μ(x) = 2 J_{H₀}(x)ᵀ H₀(x)`.
pub fn merit_gradient<P: NcpProblem + ?Sized>(p: &P, rp: &RegionParams, x: &HomotopyPoint) -> Result<Vec<f64>> {
    let h = eval_h0(p, rp, x)?;
    let j = jac_x_impl(p, rp, x.as_slice(), 0.0)?;
    Ok(j.tr_mul_vec(&h).into_iter().map(|g| 2.0 * g).collect())
}

/// `∂/∂z (J_f(z)ᵀ u)` at fixed `u`; central differences when the problem has
/// no analytic form.
pub fn jacobian_transpose_derivative<P: NcpProblem + ?Sized>(p: &P, z: &[f64], u: &[f64]) -> Result<DenseMatrix> {
    match p.jacobian_transpose_derivative(z, u) {
        Some(r) => r,
        None => fd_jacobian(|zz| Ok(p.jacobian(zz)?.tr_mul_vec(u)), z, FD_STEP),
    }
}

/// `∂H/∂x`. It does not depend on the start point.
fn jac_x_impl<P: NcpProblem + ?Sized>(p: &P, rp: &RegionParams, x: &[f64], lambda: f64) -> Result<DenseMatrix> {
    let n = p.dim();
    let s = Parts::split(x, n)?;
    let (a_val, b_val) = s.ab(rp.m);
    let jf = p.jacobian(s.z)?;
    let u: Vec<f64> = (0..n).map(|i| s.z[i] - s.w2[i] + s.v2).collect();
    let om = 1.0 - lambda;
    let dim = 4 * n + 2;
    let (zc, yc, w1c, w2c, v1c, v2c) = (0, n, 2 * n, 3 * n, 4 * n, 4 * n + 1);
    let mut d = DenseMatrix::zeros(dim, dim);

    // block (i)
    if om != 0.0 {
        let curv = jacobian_transpose_derivative(p, s.z, &u)?;
        let jte = jf.tr_mul_vec(&vec![1.0; n]);
        for i in 0..n {
            for j in 0..n {
                d[(i, zc + j)] = om * (curv[(i, j)] + jf[(j, i)]);
                d[(i, w2c + j)] = -om * jf[(j, i)];
            }
            d[(i, yc + i)] = om;
            d[(i, w1c + i)] = -om;
            d[(i, v1c)] = om;
            d[(i, v2c)] = om * jte[i];
        }
    }
    for i in 0..n {
        d[(i, zc + i)] += lambda;
    }
    for i in 0..n {
        // block (ii): W₁z
        d[(n + i, zc + i)] = s.w1[i];
        d[(n + i, w1c + i)] = s.z[i];
        // block (iii): W₂y
        d[(2 * n + i, yc + i)] = s.w2[i];
        d[(2 * n + i, w2c + i)] = s.y[i];
        // block (iv): y − (1−λ)f(z)
        d[(3 * n + i, yc + i)] = 1.0;
        for j in 0..n {
            d[(3 * n + i, zc + j)] = -om * jf[(i, j)];
        }
    }
    let (r5, r6) = (4 * n, 4 * n + 1);
    for i in 0..n {
        d[(r5, zc + i)] = -s.v1;
        d[(r5, w1c + i)] = -s.v1;
        d[(r6, yc + i)] = -s.v2;
        d[(r6, w2c + i)] = -s.v2;
    }
    d[(r5, v1c)] = a_val - s.v2;
    d[(r5, v2c)] = -s.v1;
    d[(r6, v1c)] = -s.v2;
    d[(r6, v2c)] = b_val - s.v1;
    if !d.all_finite() {
        return Err(Error::NonFiniteEvaluation);
    }
    Ok(d)
}

/// `H(·, x⁰, ·)` for a fixed problem, region and start point.
pub struct HomotopySystem<'a, P: ?Sized> {
    problem: &'a P,
    start: HomotopyPoint,
    rp: RegionParams,
    a0: f64,
    b0: f64,
}

impl<'a, P: NcpProblem + ?Sized> HomotopySystem<'a, P> {
    pub fn new(problem: &'a P, start: &HomotopyPoint, rp: RegionParams) -> Result<Self> {
        if start.n() != problem.dim() {
            return Err(Error::DimensionMismatch(format!(
                "start point has n = {}, problem has n = {}",
                start.n(),
                problem.dim()
            )));
        }
        let (a0, b0) = Parts::split(start.as_slice(), start.n())?.ab(rp.m);
        Ok(Self {
            problem,
            start: start.clone(),
            rp,
            a0,
            b0,
        })
    }

    pub fn n(&self) -> usize {
        self.problem.dim()
    }

    pub fn problem(&self) -> &'a P {
        self.problem
    }

    pub fn start(&self) -> &HomotopyPoint {
        &self.start
    }

    pub fn region(&self) -> &RegionParams {
        &self.rp
    }

    pub fn eval(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let n = self.n();
        let s = Parts::split(x, n)?;
        let s0 = Parts::split(self.start.as_slice(), n)?;
        let jf = self.problem.jacobian(s.z)?;
        let fz = self.problem.eval(s.z)?;
        let (a, b) = s.ab(self.rp.m);
        let om = 1.0 - lambda;
        let u: Vec<f64> = (0..n).map(|i| s.z[i] - s.w2[i] + s.v2).collect();
        let jtu = jf.tr_mul_vec(&u);
        let mut out = Vec::with_capacity(4 * n + 2);
        out.extend(
            (0..n).map(|i| om * (s.y[i] - s.w1[i] + s.v1 + jtu[i]) + lambda * (s.z[i] - s0.z[i])),
        );
        out.extend((0..n).map(|i| s.w1[i] * s.z[i] - lambda * s0.w1[i] * s0.z[i]));
        out.extend((0..n).map(|i| s.w2[i] * s.y[i] - lambda * s0.w2[i] * s0.y[i]));
        out.extend((0..n).map(|i| s.y[i] - om * fz[i] - lambda * s0.y[i]));
        out.push((a - s.v2) * s.v1 - lambda * (self.a0 - s0.v2) * s0.v1);
        out.push((b - s.v1) * s.v2 - lambda * (self.b0 - s0.v1) * s0.v2);
        finite(out)
    }

    pub fn eval_point(&self, x: &HomotopyPoint, lambda: f64) -> Result<Vec<f64>> {
        self.eval(x.as_slice(), lambda)
    }

    pub fn jac_x(&self, x: &[f64], lambda: f64) -> Result<DenseMatrix> {
        jac_x_impl(self.problem, &self.rp, x, lambda)
    }

    pub fn jac_lambda(&self, x: &[f64], _lambda: f64) -> Result<Vec<f64>> {
        let n = self.n();
        let s = Parts::split(x, n)?;
        let s0 = Parts::split(self.start.as_slice(), n)?;
        let jf = self.problem.jacobian(s.z)?;
        let fz = self.problem.eval(s.z)?;
        let u: Vec<f64> = (0..n).map(|i| s.z[i] - s.w2[i] + s.v2).collect();
        let jtu = jf.tr_mul_vec(&u);
        let mut out = Vec::with_capacity(4 * n + 2);
        out.extend((0..n).map(|i| -(s.y[i] - s.w1[i] + s.v1 + jtu[i]) + (s.z[i] - s0.z[i])));
        out.extend((0..n).map(|i| -s0.w1[i] * s0.z[i]));
        out.extend((0..n).map(|i| -s0.w2[i] * s0.y[i]));
        out.extend((0..n).map(|i| fz[i] - s0.y[i]));
        out.push(-(self.a0 - s0.v2) * s0.v1);
        out.push(-(self.b0 - s0.v1) * s0.v2);
        finite(out)
    }

    /// `[∂H/∂x  ∂H/∂λ]`, of shape `(4n+2) × (4n+3)`.
    pub fn jac_full(&self, x: &[f64], lambda: f64) -> Result<DenseMatrix> {
        Ok(self.jac_x(x, lambda)?.hstack_col(&self.jac_lambda(x, lambda)?))
    }

    /// `∂H/∂x⁰` assembled analytically; it depends only on `x⁰` and `λ`.
    pub fn jac_start(&self, lambda: f64) -> DenseMatrix {
        let n = self.n();
        let s0 = Parts::split(self.start.as_slice(), n).expect("validated start");
        let dim = 4 * n + 2;
        let (zc, yc, w1c, w2c, v1c, v2c) = (0, n, 2 * n, 3 * n, 4 * n, 4 * n + 1);
        let mut d = DenseMatrix::zeros(dim, dim);
        for i in 0..n {
            d[(i, zc + i)] = -lambda;
            d[(n + i, zc + i)] = -lambda * s0.w1[i];
            d[(n + i, w1c + i)] = -lambda * s0.z[i];
            d[(2 * n + i, yc + i)] = -lambda * s0.w2[i];
            d[(2 * n + i, w2c + i)] = -lambda * s0.y[i];
            d[(3 * n + i, yc + i)] = -lambda;
            d[(4 * n, zc + i)] = lambda * s0.v1;
            d[(4 * n, w1c + i)] = lambda * s0.v1;
            d[(4 * n + 1, yc + i)] = lambda * s0.v2;
            d[(4 * n + 1, w2c + i)] = lambda * s0.v2;
        }
        d[(4 * n, v1c)] = -lambda * (self.a0 - s0.v2);
        d[(4 * n, v2c)] = lambda * s0.v1;
        d[(4 * n + 1, v1c)] = lambda * s0.v2;
        d[(4 * n + 1, v2c)] = -lambda * (self.b0 - s0.v1);
        d
    }

    /// `H` as a function of the start point at fixed `(x, λ)`; used to check
    /// [`Self::jac_start`] by finite differences.
    pub fn eval_with_start(&self, x: &[f64], start: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let n = self.n();
        let shifted = HomotopyPoint::from_flat(n, start.to_vec())?;
        HomotopySystem::new(self.problem, &shifted, self.rp)?.eval(x, lambda)
    }
}

impl<P: NcpProblem + ?Sized> PathMap for HomotopySystem<'_, P> {
    fn state_dim(&self) -> usize {
        4 * self.n() + 2
    }

    fn eval(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        HomotopySystem::eval(self, x, lambda)
    }

    fn jac_x(&self, x: &[f64], lambda: f64) -> Result<DenseMatrix> {
        HomotopySystem::jac_x(self, x, lambda)
    }

    fn jac_lambda(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        HomotopySystem::jac_lambda(self, x, lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentSign {
    /// Determinant of `[∂H/∂(x,λ); τ⁽⁰⁾ᵀ]` at `(x⁰, 1)`.
    pub determinant: f64,
    /// λ-component of the unit tangent used (negative by construction).
    pub tangent_lambda: f64,
}

impl TangentSign {
    pub fn is_negative(&self) -> bool {
        self.determinant < 0.0
    }
}

/// Bordered-determinant orientation check at the start of the path.
pub fn tangent_sign_check<P: NcpProblem + ?Sized>(
    x0: &InitialPoint,
    p: &P,
    rp: &RegionParams,
) -> Result<TangentSign> {
    let sys = HomotopySystem::new(p, &x0.point, *rp)?;
    let x = x0.point.as_slice();
    let jx = sys.jac_x(x, 1.0)?;
    let jl = sys.jac_lambda(x, 1.0)?;
    let lu = Lu::factor(&jx)?;
    // tangent (w, −1) with ∂H/∂x w − ∂H/∂λ = 0
    let mut tangent = lu.solve(&jl)?;
    tangent.push(-1.0);
    let norm = dot(&tangent, &tangent).sqrt();
    tangent.iter_mut().for_each(|t| *t /= norm);
    let bordered = jx.hstack_col(&jl).vstack_row(&tangent);
    Ok(TangentSign {
        determinant: lu_det(&bordered)?,
        tangent_lambda: *tangent.last().expect("non-empty"),
    })
}
