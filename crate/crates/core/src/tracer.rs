//! Predictor–corrector tracing of the homotopy path from `λ = 1` to `λ = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homotopy::{
    merit, merit_gradient, region_slack_flat, HomotopyPoint, HomotopySystem, InitialPoint, RegionParams,
    BOUNDARY_TOL,
};
use crate::linalg::{dot, norm2, pinv_apply, DenseMatrix, Lu};
use crate::ncp::{
    certificate_from_values, check_index_conditions, residual, ComplementarityCertificate,
    DecompositionDiagnostic, IndexCondition, NcpProblem,
};

/// A smooth map `ℝᵈ × ℝ → ℝᵈ` with its partial derivatives.
pub trait PathMap {
    fn state_dim(&self) -> usize;

    fn eval(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>>;

    fn jac_x(&self, x: &[f64], lambda: f64) -> Result<DenseMatrix>;

    fn jac_lambda(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>>;

    /// `[∂/∂x  ∂/∂λ]`.
    fn jac_joint(&self, x: &[f64], lambda: f64) -> Result<DenseMatrix> {
        Ok(self.jac_x(x, lambda)?.hstack_col(&self.jac_lambda(x, lambda)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub eta1: f64,
    pub eta2: f64,
    pub c0: usize,
    pub m0: usize,
    pub kappa1: f64,
    pub kappa2: f64,
    pub eps1: f64,
    pub eps2: f64,
    /// Relative pivot threshold below which `∂H/∂x` counts as singular.
    pub det_threshold: f64,
    pub max_outer_iters: usize,
    pub max_shifts: usize,
    pub corrector_residual_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta1: 1e-12,
            eta2: 1e-8,
            c0: 50,
            m0: 25,
            kappa1: std::f64::consts::SQRT_2,
            kappa2: 9000.0,
            eps1: 1e-9,
            eps2: 1e-6,
            det_threshold: 1e-13,
            max_outer_iters: 5000,
            max_shifts: 20,
            corrector_residual_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(0.0 < self.eps1 && self.eps1 < self.eps2 && self.eps2 < 1.0) {
            return bad("need 0 < eps1 < eps2 < 1");
        }
        if !(self.kappa1 > 1.0 && self.kappa2 >= 1.0) {
            return bad("need kappa1 > 1 and kappa2 >= 1");
        }
        if self.c0 == 0 || self.m0 == 0 || self.max_outer_iters == 0 || self.max_shifts == 0 {
            return bad("counts must be positive");
        }
        if !(self.eta1 > 0.0 && self.eta2 > 0.0 && self.det_threshold > 0.0 && self.corrector_residual_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }

    /// Smallest λ a corrector may produce.
    pub fn lambda_floor(&self) -> f64 {
        self.eps1 / 10.0
    }

    fn clamp_lambda(&self, lambda: f64) -> f64 {
        lambda.clamp(self.lambda_floor(), 1.0 - f64::EPSILON)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    AcceptableSolution,
    ProbableSolution,
    NonConvergence,
    SingularJacobian,
    IterationLimit,
    ShiftLimit,
}

impl SolveStatus {
    pub fn is_solution(self) -> bool {
        matches!(self, Self::AcceptableSolution | Self::ProbableSolution)
    }
}

/// One accepted outer iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub shift_count: usize,
    pub lambda: f64,
    pub k: i32,
    pub tau: f64,
    pub merit: f64,
    pub homotopy_residual: f64,
    pub slack_a: f64,
    pub slack_b: f64,
    pub min_coordinate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub final_point: HomotopyPoint,
    pub final_lambda: f64,
    pub certificate: ComplementarityCertificate,
    pub iters: usize,
    pub shifts: usize,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    /// Unit vector `(x_n, t_n)` of length `d + 1`.
    pub direction: Vec<f64>,
    /// `|t_d| / ‖(w_d, t_d)‖`.
    pub tau: f64,
    pub det: f64,
}

/// Unit predictor direction at `(x, λ)`. The λ-component heads for `λ = 1`
/// when the sign of `det ∂H/∂x` is opposite to `d0_sign`, and for `λ = 0`
/// otherwise.
pub fn predictor_direction<M: PathMap + ?Sized>(
    map: &M,
    x: &[f64],
    lambda: f64,
    d0_sign: f64,
    det_threshold: f64,
) -> Result<Predictor> {
    let lu = Lu::factor(&map.jac_x(x, lambda)?)?;
    let det = lu.det();
    if lu.is_singular_rel(det_threshold) || det == 0.0 {
        return Err(Error::SingularMatrix);
    }
    let td = if det.signum() == -d0_sign.signum() { 1.0 - lambda } else { -lambda };
    let mut direction: Vec<f64> = lu.solve(&map.jac_lambda(x, lambda)?)?.into_iter().map(|v| -td * v).collect();
    direction.push(td);
    let nrm = norm2(&direction);
    if !(nrm > 0.0 && nrm.is_finite()) {
        return Err(Error::SingularMatrix);
    }
    direction.iter_mut().for_each(|v| *v /= nrm);
    Ok(Predictor {
        direction,
        tau: td.abs() / nrm,
        det,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepChoice {
    pub k: i32,
    /// Growth stopped because `κ₁^{k+1}` would exceed `κ₂`.
    pub cap_hit: bool,
}

/// Grows the step exponent from `k = 0` while the trial point
/// `(x, λ) + κ₁^{k+1}(x_n, t_n)` stays feasible with `0 < λ < 1` and, when
/// `gamma < 0`, keeps lowering the merit.
pub fn choose_step<R, Mu>(
    x: &[f64],
    lambda: f64,
    direction: &[f64],
    gamma: f64,
    cfg: &SolverConfig,
    mut in_region: R,
    mut merit: Mu,
) -> StepChoice
where
    R: FnMut(&[f64]) -> bool,
    Mu: FnMut(&[f64]) -> Result<f64>,
{
    let d = x.len();
    let (xn, tn) = (&direction[..d], direction[d]);
    let point = |s: f64| -> Vec<f64> { x.iter().zip(xn).map(|(a, b)| a + s * b).collect() };
    let mut k = 0i32;
    loop {
        let s_next = cfg.kappa1.powi(k + 1);
        let trial = point(s_next);
        let t_next = lambda + s_next * tn;
        let mut ok = t_next > 0.0 && t_next < 1.0 && in_region(&trial);
        if ok && gamma < 0.0 {
            ok = match (merit(&trial), merit(&point(cfg.kappa1.powi(k)))) {
                (Ok(a), Ok(b)) => a < b,
                _ => false,
            };
        }
        if !ok {
            return StepChoice { k, cap_hit: false };
        }
        k += 1;
        if cfg.kappa1.powi(k) > cfg.kappa2 {
            return StepChoice { k: k - 1, cap_hit: true };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corrected {
    /// `(x, λ)` of length `d + 1`.
    pub point: Vec<f64>,
    /// `‖H‖` at `point`.
    pub residual: f64,
    pub sweeps: usize,
}

/// Composite corrector in `(x, λ)` jointly, using the Moore–Penrose inverse
/// of the `d × (d+1)` Jacobian. Each sweep is four stages; sweeps repeat up
/// to `m0` times and stop once `‖H‖` is below the corrector tolerance.
pub fn corrector<M: PathMap + ?Sized>(map: &M, predicted: &[f64], cfg: &SolverConfig) -> Result<Corrected> {
    let d = map.state_dim();
    if predicted.len() != d + 1 {
        return Err(Error::DimensionMismatch(format!(
            "augmented point of length {} for state dimension {d}",
            predicted.len()
        )));
    }
    let h = |u: &[f64]| map.eval(&u[..d], u[d]);
    let j = |u: &[f64]| map.jac_joint(&u[..d], u[d]);
    let clamp = |mut u: Vec<f64>| {
        u[d] = cfg.clamp_lambda(u[d]);
        u
    };
    let step = |u: &[f64], s: f64, delta: Vec<f64>| -> Vec<f64> {
        clamp(u.iter().zip(delta).map(|(a, b)| a - s * b).collect())
    };

    let mut u = predicted.to_vec();
    let mut r = norm2(&h(&u)?);
    let mut sweeps = 0;
    while sweeps < cfg.m0 && r > cfg.corrector_residual_tol {
        u = clamp(u);
        let hu = h(&u)?;
        r = norm2(&hu);
        if r <= cfg.corrector_residual_tol {
            break;
        }
        sweeps += 1;
        let ju = j(&u)?;
        let xb = step(&u, 1.0, pinv_apply(&ju, &hu)?);
        let jb = j(&xb)?;
        let xt = step(&u, 2.0, pinv_apply(&ju.add(&jb), &hu)?);
        let hb = h(&xb)?;
        let xcc = step(&xb, 2.0, pinv_apply(&jb.add(&j(&xt)?), &hb)?);
        let hcc = h(&xcc)?;
        u = step(&xcc, 1.0, pinv_apply(&j(&xcc)?, &hcc)?);
        r = norm2(&h(&u)?);
    }
    if !r.is_finite() {
        return Err(Error::NonFiniteEvaluation);
    }
    Ok(Corrected { point: u, residual: r, sweeps })
}

/// The same composite corrector at fixed `λ`, with square solves in `x`.
pub fn fixed_lambda_corrector<M: PathMap + ?Sized>(
    map: &M,
    x: &[f64],
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<Corrected> {
    let h = |v: &[f64]| map.eval(v, lambda);
    let jx = |v: &[f64]| map.jac_x(v, lambda);
    let solve = |a: &DenseMatrix, b: &[f64]| Lu::factor(a)?.solve(b);
    let step = |v: &[f64], s: f64, delta: Vec<f64>| -> Vec<f64> { v.iter().zip(delta).map(|(a, b)| a - s * b).collect() };

    let mut v = x.to_vec();
    let mut r = norm2(&h(&v)?);
    let mut sweeps = 0;
    while sweeps < cfg.m0 && r > cfg.corrector_residual_tol {
        sweeps += 1;
        let hv = h(&v)?;
        let jv = jx(&v)?;
        let xb = step(&v, 1.0, solve(&jv, &hv)?);
        let jb = jx(&xb)?;
        let xt = step(&v, 2.0, solve(&jv.add(&jb), &hv)?);
        let xcc = step(&xb, 2.0, solve(&jb.add(&jx(&xt)?), &h(&xb)?)?);
        v = step(&xcc, 1.0, solve(&jx(&xcc)?, &h(&xcc)?)?);
        r = norm2(&h(&v)?);
    }
    if !r.is_finite() {
        return Err(Error::NonFiniteEvaluation);
    }
    v.push(lambda);
    Ok(Corrected { point: v, residual: r, sweeps })
}

fn in_closed_region(x: &[f64], n: usize, rp: &RegionParams) -> bool {
    region_slack_flat(x, n, rp).is_member_closed(rp, BOUNDARY_TOL)
}

fn in_open_region(x: &[f64], n: usize, rp: &RegionParams) -> bool {
    region_slack_flat(x, n, rp).is_member(rp)
}

enum Outer {
    Stop(SolveStatus),
    Shift,
}

struct Tracer<'a, P: ?Sized> {
    problem: &'a P,
    cfg: SolverConfig,
    rp: RegionParams,
    n: usize,
    x: Vec<f64>,
    lambda: f64,
    iters: usize,
    shifts: usize,
    c1: usize,
    c2: usize,
    trace: Vec<TraceRecord>,
}

impl<P: NcpProblem + ?Sized> Tracer<'_, P> {
    /// Status for a stop at the current point: anything stopping close
    /// enough to `λ = 0` is reported as a probable solution.
    fn stop(&self, otherwise: SolveStatus) -> Outer {
        if self.lambda <= self.cfg.eps1 {
            Outer::Stop(SolveStatus::AcceptableSolution)
        } else if self.lambda <= self.cfg.eps2 {
            Outer::Stop(SolveStatus::ProbableSolution)
        } else {
            Outer::Stop(otherwise)
        }
    }

    /// Traces from `(start, 1)` until a stop or a restart is requested.
    fn run_leg(&mut self, start: &HomotopyPoint) -> Outer {
        let sys = match HomotopySystem::new(self.problem, start, self.rp) {
            Ok(s) => s,
            Err(_) => return self.stop(SolveStatus::NonConvergence),
        };
        self.x = start.as_slice().to_vec();
        self.lambda = 1.0;
        let d0 = match sys.jac_x(&self.x, 1.0).and_then(|j| Lu::factor(&j)) {
            Ok(lu) if !lu.is_singular_rel(self.cfg.det_threshold) && lu.det() != 0.0 => lu.det().signum(),
            _ => return self.stop(SolveStatus::SingularJacobian),
        };
        let dim = self.x.len();
        loop {
            if self.iters >= self.cfg.max_outer_iters {
                return self.stop(SolveStatus::IterationLimit);
            }
            let pred = match predictor_direction(&sys, &self.x, self.lambda, d0, self.cfg.det_threshold) {
                Ok(p) => p,
                Err(_) => return self.stop(SolveStatus::SingularJacobian),
            };
            if pred.tau <= self.cfg.eta1 {
                self.c1 += 1;
                if self.c1 >= self.cfg.c0 {
                    return self.stop(SolveStatus::NonConvergence);
                }
            } else {
                self.c1 = 0;
            }
            let (xn, tn) = (&pred.direction[..dim], pred.direction[dim]);
            let gamma = self.point_merit_gradient().map(|g| dot(&g, xn)).unwrap_or(0.0);
            let (problem, rp, n) = (self.problem, self.rp, self.n);
            let choice = choose_step(
                &self.x,
                self.lambda,
                &pred.direction,
                gamma,
                &self.cfg,
                |v| in_open_region(v, n, &rp),
                |v| merit(problem, &rp, &HomotopyPoint::from_flat(n, v.to_vec())?),
            );
            if choice.cap_hit {
                self.c2 += 1;
                if self.c2 >= self.cfg.c0 {
                    return self.stop(SolveStatus::NonConvergence);
                }
            } else {
                self.c2 = 0;
            }

            let mut k = choice.k;
            let mut landed = false;
            let (xc, lc, r) = loop {
                let s = self.cfg.kappa1.powi(k);
                if self.lambda + s * tn <= 0.0 {
                    // overshoot of λ = 0: try once to land on the floor
                    if !landed {
                        landed = true;
                        let floor = self.cfg.lambda_floor();
                        let s_land = (self.lambda - floor) / tn.abs();
                        let guess: Vec<f64> = self.x.iter().zip(xn).map(|(a, b)| a + s_land * b).collect();
                        if let Ok(c) = fixed_lambda_corrector(&sys, &guess, floor, &self.cfg) {
                            if c.residual <= 1.0 && in_closed_region(&c.point[..dim], n, &rp) {
                                break (c.point[..dim].to_vec(), floor, c.residual);
                            }
                        }
                    }
                    k -= 1;
                    continue;
                }
                let mut predicted: Vec<f64> = self.x.iter().zip(xn).map(|(a, b)| a + s * b).collect();
                predicted.push(self.lambda + s * tn);
                let outcome = corrector(&sys, &predicted, &self.cfg);
                let moved = match &outcome {
                    Ok(c) => {
                        let (cx, cl) = (&c.point[..dim], c.point[dim]);
                        if c.residual <= 1.0 && cl > 0.0 && cl < 1.0 && in_closed_region(cx, n, &rp) {
                            break (cx.to_vec(), cl, c.residual);
                        }
                        let diff: Vec<f64> = self.x.iter().zip(cx).map(|(a, b)| a - b).collect();
                        norm2(&diff)
                    }
                    Err(_) => f64::INFINITY,
                };
                k -= 1;
                let a = self.cfg.kappa1.powi(k).min(moved);
                if a <= self.cfg.eta2 {
                    return self.shift_or_stop(outcome.ok().map(|c| c.point[..dim].to_vec()));
                }
            };

            self.x = xc;
            self.lambda = lc;
            self.iters += 1;
            let slack = region_slack_flat(&self.x, n, &rp);
            self.trace.push(TraceRecord {
                iter: self.iters,
                shift_count: self.shifts,
                lambda: lc,
                k,
                tau: pred.tau,
                merit: self.point_merit().unwrap_or(f64::NAN),
                homotopy_residual: r,
                slack_a: slack.slack_a,
                slack_b: slack.slack_b,
                min_coordinate: slack.min_coordinate,
            });
            if lc <= self.cfg.eps1 {
                return Outer::Stop(SolveStatus::AcceptableSolution);
            }
        }
    }

    /// Step-size collapse: either a probable solution or a restart from a
    /// fresh start point.
    fn shift_or_stop(&mut self, candidate: Option<Vec<f64>>) -> Outer {
        if self.lambda <= self.cfg.eps2 {
            return self.stop(SolveStatus::NonConvergence);
        }
        self.shifts += 1;
        if self.shifts > self.cfg.max_shifts {
            self.shifts = self.cfg.max_shifts;
            return self.stop(SolveStatus::ShiftLimit);
        }
        if let Some(c) = candidate.filter(|c| in_open_region(c, self.n, &self.rp)) {
            self.x = c;
        } else if !in_open_region(&self.x, self.n, &self.rp) {
            return self.stop(SolveStatus::NonConvergence);
        }
        Outer::Shift
    }

    fn current(&self) -> HomotopyPoint {
        HomotopyPoint::from_flat(self.n, self.x.clone()).expect("iterates stay finite")
    }

    fn point_merit(&self) -> Result<f64> {
        merit(self.problem, &self.rp, &self.current())
    }

    fn point_merit_gradient(&self) -> Result<Vec<f64>> {
        merit_gradient(self.problem, &self.rp, &self.current())
    }
}

/// Follows the homotopy path from `x0` and classifies where it ends.
///
/// Errors are raised only for invalid inputs; every way the tracing itself
/// can stop is reported through [`SolveReport::status`].
pub fn trace_path<P: NcpProblem + ?Sized>(
    p: &P,
    x0: &InitialPoint,
    cfg: &SolverConfig,
    rp: &RegionParams,
) -> Result<SolveReport> {
    cfg.validate()?;
    rp.validate()?;
    let n = p.dim();
    if x0.point.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "start point has n = {}, problem has n = {n}",
            x0.point.n()
        )));
    }
    let mut t = Tracer {
        problem: p,
        cfg: *cfg,
        rp: *rp,
        n,
        x: x0.point.as_slice().to_vec(),
        lambda: 1.0,
        iters: 0,
        shifts: 0,
        c1: 0,
        c2: 0,
        trace: Vec::new(),
    };
    let mut start = x0.point.clone();
    let status = loop {
        match t.run_leg(&start) {
            Outer::Stop(s) => break s,
            Outer::Shift => start = t.current(),
        }
    };
    let final_point = t.current();
    let z = final_point.z();
    let certificate = residual(p, z).unwrap_or_else(|_| certificate_from_values(z, &vec![f64::NAN; n]));
    Ok(SolveReport {
        status,
        final_lambda: t.lambda,
        final_point,
        certificate,
        iters: t.iters,
        shifts: t.shifts,
        trace: t.trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub z: Vec<f64>,
    pub certificate: ComplementarityCertificate,
    pub decomposition: DecompositionDiagnostic,
    pub conditions: Vec<IndexCondition>,
}

/// Pulls the NCP solution and its diagnostics out of a converged report.
pub fn extract_solution<P: NcpProblem + ?Sized>(report: &SolveReport, p: &P) -> Result<Extraction> {
    if !report.status.is_solution() {
        return Err(Error::NotConverged(report.status));
    }
    let x = &report.final_point;
    let z = x.z().to_vec();
    let certificate = residual(p, &z)?;
    let decomposition = DecompositionDiagnostic::new(x.z(), x.y(), x.w1(), x.w2());
    let conditions = check_index_conditions(&decomposition, 1e-6)?;
    Ok(Extraction {
        z,
        certificate,
        decomposition,
        conditions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homotopy::default_start;
    use crate::linalg::norm_inf;
    use crate::ncp::FnProblem;

    /// `H(x, λ) = A x − b − λ c`, a map whose zero set is a line.
    struct Affine {
        a: DenseMatrix,
        b: Vec<f64>,
        c: Vec<f64>,
    }

    impl PathMap for Affine {
        fn state_dim(&self) -> usize {
            self.b.len()
        }
        fn eval(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
            let ax = self.a.mul_vec(x);
            Ok((0..self.b.len()).map(|i| ax[i] - self.b[i] - lambda * self.c[i]).collect())
        }
        fn jac_x(&self, _x: &[f64], _lambda: f64) -> Result<DenseMatrix> {
            Ok(self.a.clone())
        }
        fn jac_lambda(&self, _x: &[f64], _lambda: f64) -> Result<Vec<f64>> {
            Ok(self.c.iter().map(|v| -v).collect())
        }
    }

    fn affine() -> Affine {
        Affine {
            a: DenseMatrix::from_rows(&[[2.0, 1.0], [0.5, 3.0]]).unwrap(),
            b: vec![1.0, -2.0],
            c: vec![0.3, 1.0],
        }
    }

    fn lcp1() -> FnProblem {
        FnProblem::new(1, |z| vec![z[0] - 1.0]).with_jacobian(|_| DenseMatrix::identity(1))
    }

    fn lcp2() -> FnProblem {
        FnProblem::new(2, |z| vec![2.0 * z[0] + z[1] - 1.0, z[0] + 2.0 * z[1] - 1.0])
            .with_jacobian(|_| DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap())
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = SolverConfig::default();
        assert_eq!(c.c0, 50);
        assert!((c.kappa1 - 2f64.sqrt()).abs() < 1e-15);
        assert!(c.validate().is_ok());
        let bad = SolverConfig { eps1: 1e-5, eps2: 1e-6, ..c };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { kappa1: 1.0, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_json_partial_and_unknown() {
        let c: SolverConfig = serde_json::from_str(r#"{"eps1": 1e-10}"#).unwrap();
        assert_eq!(c.eps1, 1e-10);
        assert_eq!(c.m0, 25);
        assert!(serde_json::from_str::<SolverConfig>(r#"{"epsilon": 1}"#).is_err());
    }

    #[test]
    fn predictor_at_start_heads_down() {
        let rp = RegionParams::default();
        let s = default_start(1, &rp).unwrap();
        let p = lcp1();
        let sys = HomotopySystem::new(&p, &s.point, rp).unwrap();
        let x = s.point.as_slice();
        let jx = sys.jac_x(x, 1.0).unwrap();
        let d0 = Lu::factor(&jx).unwrap().det().signum();
        let pred = predictor_direction(&sys, x, 1.0, d0, 1e-13).unwrap();
        assert!((norm2(&pred.direction) - 1.0).abs() < 1e-14);
        assert!(pred.direction[4 + 2] < 0.0);

        // oracle: (−(∂H/∂x)⁻¹ ∂H/∂λ, −1) normalised
        let mut w = crate::linalg::solve(&jx, &sys.jac_lambda(x, 1.0).unwrap()).unwrap();
        w.push(-1.0);
        let nrm = norm2(&w);
        for (a, b) in pred.direction.iter().zip(&w) {
            assert!((a - b / nrm).abs() < 1e-12);
        }
        assert!((pred.tau - 1.0 / nrm).abs() < 1e-15);
    }

    #[test]
    fn predictor_reverses_with_opposite_sign() {
        let m = affine();
        let x = [0.2, 0.1];
        let d = Lu::factor(&m.a).unwrap().det().signum();
        let down = predictor_direction(&m, &x, 0.4, d, 1e-13).unwrap();
        let up = predictor_direction(&m, &x, 0.4, -d, 1e-13).unwrap();
        assert!(down.direction[2] < 0.0);
        assert!(up.direction[2] > 0.0);
    }

    #[test]
    fn predictor_singular() {
        let m = Affine {
            a: DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap(),
            b: vec![0.0; 2],
            c: vec![1.0; 2],
        };
        assert_eq!(predictor_direction(&m, &[0.0, 0.0], 0.5, 1.0, 1e-13), Err(Error::SingularMatrix));
    }

    #[test]
    fn choose_step_blocked_direction() {
        let cfg = SolverConfig::default();
        let choice = choose_step(&[1.0], 0.5, &[-1.0, 0.0], 1.0, &cfg, |v| v[0] > 0.0, |_| Ok(0.0));
        assert_eq!(choice, StepChoice { k: 0, cap_hit: false });
    }

    #[test]
    fn choose_step_cap() {
        let cfg = SolverConfig::default();
        let choice = choose_step(&[0.0], 0.5, &[1.0, 0.0], 1.0, &cfg, |_| true, |_| Ok(0.0));
        assert!(choice.cap_hit);
        assert_eq!(choice.k, 26);
        assert!(cfg.kappa1.powi(choice.k) <= cfg.kappa2);
        assert!(cfg.kappa1.powi(choice.k + 1) > cfg.kappa2);
    }

    #[test]
    fn choose_step_lambda_bound() {
        // feasible ray with t_n = −0.01 from λ = 0.9: κ^{k+1} < 90 gives k + 1 ≤ 12
        let cfg = SolverConfig::default();
        let choice = choose_step(&[0.0], 0.9, &[1.0, -0.01], 1.0, &cfg, |_| true, |_| Ok(0.0));
        assert_eq!(choice, StepChoice { k: 12, cap_hit: false });
    }

    #[test]
    fn choose_step_merit_guard() {
        // with γ < 0 growth continues only while μ keeps falling; μ(x) = (x − 3)²
        let cfg = SolverConfig::default();
        let mu = |v: &[f64]| Ok((v[0] - 3.0).powi(2));
        let choice = choose_step(&[0.0], 0.5, &[1.0, 0.0], -6.0, &cfg, |_| true, mu);
        // κ^3 ≈ 2.83 still improves on κ^2 = 2; κ^4 = 4 is worse than κ^3
        assert_eq!(choice.k, 3);
    }

    #[test]
    fn corrector_fixed_point() {
        let m = affine();
        let x = crate::linalg::solve(&m.a, &[1.0 + 0.15, -2.0 + 0.5]).unwrap();
        let mut u = x.clone();
        u.push(0.5);
        let c = corrector(&m, &u, &SolverConfig::default()).unwrap();
        assert!(c.residual <= 1e-14);
        assert_eq!(c.sweeps, 0);
        assert_eq!(c.point, u);
    }

    #[test]
    fn corrector_affine_single_sweep() {
        let m = affine();
        let c = corrector(&m, &[3.0, -1.0, 0.6], &SolverConfig::default()).unwrap();
        assert!(c.residual <= 1e-10);
        assert_eq!(c.sweeps, 1);
    }

    #[test]
    fn fixed_lambda_corrector_affine() {
        let m = affine();
        let c = fixed_lambda_corrector(&m, &[3.0, -1.0], 0.25, &SolverConfig::default()).unwrap();
        assert!(c.residual <= 1e-10);
        assert_eq!(c.point[2], 0.25);
    }

    #[test]
    fn corrector_sweeps_do_not_increase_residual_on_lcp() {
        let rp = RegionParams::default();
        let s = default_start(2, &rp).unwrap();
        let p = lcp2();
        let sys = HomotopySystem::new(&p, &s.point, rp).unwrap();
        let mut u = s.point.as_slice().to_vec();
        u.iter_mut().for_each(|v| *v *= 1.01);
        u.push(0.9);
        let before = norm2(&sys.eval(&u[..10], 0.9).unwrap());
        let cfg = SolverConfig { m0: 1, ..SolverConfig::default() };
        let one = corrector(&sys, &u, &cfg).unwrap();
        assert!(one.residual <= before);
        let full = corrector(&sys, &u, &SolverConfig::default()).unwrap();
        assert!(full.residual <= one.residual.max(1e-10));
    }

    fn check_invariants(report: &SolveReport, cfg: &SolverConfig, rp: &RegionParams) {
        for r in &report.trace {
            assert!(r.lambda > 0.0 && r.lambda < 1.0);
            assert!(r.homotopy_residual <= 1.0);
            assert!(cfg.kappa1.powi(r.k) <= cfg.kappa2);
            assert!(r.min_coordinate >= -BOUNDARY_TOL);
            assert!(r.slack_a >= rp.l - BOUNDARY_TOL && r.slack_b >= rp.l - BOUNDARY_TOL);
        }
        for w in report.trace.windows(2) {
            assert!(w[1].iter == w[0].iter + 1);
            assert!(w[1].shift_count >= w[0].shift_count);
        }
    }

    #[test]
    fn one_dimensional_lcp() {
        let rp = RegionParams::default();
        let cfg = SolverConfig::default();
        let s = default_start(1, &rp).unwrap();
        let rep = trace_path(&lcp1(), &s, &cfg, &rp).unwrap();
        assert_eq!(rep.status, SolveStatus::AcceptableSolution);
        assert!(rep.final_lambda <= 1e-9);
        assert!((rep.final_point.z()[0] - 1.0).abs() <= 1e-6);
        check_invariants(&rep, &cfg, &rp);

        let ex = extract_solution(&rep, &lcp1()).unwrap();
        assert!((ex.z[0] - 1.0).abs() <= 1e-6);
        assert!(ex.certificate.is_solution(1e-6));
    }

    #[test]
    fn two_dimensional_lcp() {
        let rp = RegionParams::default();
        let cfg = SolverConfig::default();
        let s = default_start(2, &rp).unwrap();
        let rep = trace_path(&lcp2(), &s, &cfg, &rp).unwrap();
        assert_eq!(rep.status, SolveStatus::AcceptableSolution);
        let z = rep.final_point.z();
        assert!(norm_inf(&[z[0] - 1.0 / 3.0, z[1] - 1.0 / 3.0]) <= 1e-6);
        assert!(rep.certificate.natural_residual <= 1e-6);
        check_invariants(&rep, &cfg, &rp);
    }

    #[test]
    fn iteration_limit() {
        let rp = RegionParams::default();
        let cfg = SolverConfig { max_outer_iters: 1, ..SolverConfig::default() };
        let s = default_start(2, &rp).unwrap();
        let rep = trace_path(&lcp2(), &s, &cfg, &rp).unwrap();
        if rep.status != SolveStatus::AcceptableSolution {
            assert_eq!(rep.status, SolveStatus::IterationLimit);
            assert!(rep.iters <= 1);
            assert_eq!(
                extract_solution(&rep, &lcp2()),
                Err(Error::NotConverged(SolveStatus::IterationLimit))
            );
        }
    }

    #[test]
    fn strict_start_is_singular() {
        let rp = RegionParams::new(1000.0, 1.0).unwrap();
        let s = crate::homotopy::make_initial_point(
            &[1.0],
            &[1.0],
            &[1.0],
            &[1.0],
            499.0,
            &rp,
            crate::homotopy::InitMode::Strict,
        )
        .unwrap();
        let rep = trace_path(&lcp1(), &s, &SolverConfig::default(), &rp).unwrap();
        assert_eq!(rep.status, SolveStatus::SingularJacobian);
        assert_eq!(rep.iters, 0);
    }

    #[test]
    fn deterministic_traces() {
        let rp = RegionParams::default();
        let cfg = SolverConfig::default();
        let s = default_start(2, &rp).unwrap();
        let a = trace_path(&lcp2(), &s, &cfg, &rp).unwrap();
        let b = trace_path(&lcp2(), &s, &cfg, &rp).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.final_point, b.final_point);
    }
}
