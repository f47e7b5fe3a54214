//! Batch front end for the homotopy solver: file loading, the `solve`,
//! `check` and `bench` commands, and the trace/solution writers.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use ncp_core::linalg::{fd_jacobian, lu_det, FD_STEP};
use ncp_core::{
    det_dh_dx0_closed_form, region_slack, tangent_sign_check, trace_path, validate_start, ComplementarityCertificate,
    HomotopyPoint, HomotopySystem, InitMode, InitialPoint, LcpData, NcpProblem, OligopolyParams, ProblemSpec,
    RegionParams, SolveReport, SolveStatus, SolverConfig, StartCondition, TraceRecord,
};

/// Exit code for malformed input.
pub const EXIT_MALFORMED: i32 = 3;

/// Header of the trace CSV.
pub const TRACE_HEADER: &str = "iter,shift,lambda,k,tau,merit,residual,slackA,slackB";

/// Maximum absolute error tolerated by the finite-difference Jacobian check.
pub const FD_CHECK_TOL: f64 = 1e-4;

pub fn exit_code(status: SolveStatus) -> i32 {
    match status {
        SolveStatus::AcceptableSolution => 0,
        SolveStatus::ProbableSolution => 2,
        _ => 1,
    }
}

/// Start-point description; omitted vectors default to all ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub mode: InitMode,
    pub z0: Option<Vec<f64>>,
    pub y0: Option<Vec<f64>>,
    pub w10: Option<Vec<f64>>,
    pub w20: Option<Vec<f64>>,
    pub v10: Option<f64>,
    /// Only honoured in loose mode; strict mode derives it.
    pub v20: Option<f64>,
}

impl InitialSpec {
    /// The raw start point, without any validation beyond shape.
    pub fn point(&self, n: usize, rp: &RegionParams) -> Result<HomotopyPoint> {
        let ones = vec![1.0; n];
        let pick = |v: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
            let v = v.clone().unwrap_or_else(|| ones.clone());
            if v.len() != n {
                bail!("initial.{name} has length {}, problem has n = {n}", v.len());
            }
            Ok(v)
        };
        let (z0, y0, w10, w20) = (pick(&self.z0, "z0")?, pick(&self.y0, "y0")?, pick(&self.w10, "w10")?, pick(&self.w20, "w20")?);
        let v10 = self.v10.unwrap_or(ncp_core::homotopy::DEFAULT_V0);
        let v20 = match self.mode {
            InitMode::Loose => self.v20.unwrap_or(v10),
            InitMode::Strict => {
                let a0 = rp.m - z0.iter().chain(&w10).sum::<f64>();
                let b0 = rp.m - y0.iter().chain(&w20).sum::<f64>();
                a0 * (b0 - v10) / b0
            }
        };
        Ok(HomotopyPoint::new(&z0, &y0, &w10, &w20, v10, v20)?)
    }

    pub fn build(&self, n: usize, rp: &RegionParams) -> Result<InitialPoint> {
        Ok(InitialPoint::from_point(self.point(n, rp)?, rp, self.mode)?)
    }
}

/// Everything a run needs besides the problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub solver: SolverConfig,
    pub region: RegionParams,
    pub initial: InitialSpec,
}

impl Settings {
    /// Parses a config document: solver fields at the top level, plus
    /// optional `"region": {"m", "l"}` and `"initial": {...}` objects.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut root: serde_json::Map<String, Value> =
            serde_json::from_str(text).context("config is not a JSON object")?;
        let region = match root.remove("region") {
            Some(v) => serde_json::from_value(v).context("bad \"region\" entry")?,
            None => RegionParams::default(),
        };
        let initial = match root.remove("initial") {
            Some(v) => serde_json::from_value(v).context("bad \"initial\" entry")?,
            None => InitialSpec::default(),
        };
        let solver: SolverConfig = serde_json::from_value(Value::Object(root)).context("bad solver settings")?;
        solver.validate()?;
        region.validate()?;
        Ok(Self { solver, region, initial })
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                Self::from_json(&text).with_context(|| format!("in config {}", p.display()))
            }
        }
    }
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem_path: PathBuf,
    pub problem: ProblemSpec,
    pub settings: Settings,
    pub trace_path: Option<PathBuf>,
    pub out_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(problem: &Path, config: Option<&Path>, trace: Option<&Path>, out: Option<&Path>) -> Result<Self> {
        Ok(Self {
            problem_path: problem.to_path_buf(),
            problem: load_problem(problem)?,
            settings: Settings::load(config)?,
            trace_path: trace.map(Path::to_path_buf),
            out_path: out.map(Path::to_path_buf),
        })
    }
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read problem {}", path.display()))?;
    let spec: ProblemSpec =
        serde_json::from_str(&text).with_context(|| format!("malformed problem file {}", path.display()))?;
    spec.build().with_context(|| format!("invalid problem in {}", path.display()))?;
    Ok(spec)
}

/// Contents of the solution JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub status: SolveStatus,
    pub z: Vec<f64>,
    pub f_of_z: Vec<f64>,
    pub certificate: ComplementarityCertificate,
    pub lambda_final: f64,
    pub iters: usize,
    pub shifts: usize,
}

impl SolutionFile {
    pub fn from_report<P: NcpProblem + ?Sized>(report: &SolveReport, p: &P) -> Self {
        let z = report.final_point.z().to_vec();
        let f_of_z = p.eval(&z).unwrap_or_else(|_| vec![f64::NAN; z.len()]);
        Self {
            status: report.status,
            z,
            f_of_z,
            certificate: report.certificate,
            lambda_final: report.final_lambda,
            iters: report.iters,
            shifts: report.shifts,
        }
    }
}

/// Round-trip exact float text.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv<W: Write>(w: &mut W, trace: &[TraceRecord]) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            r.shift_count,
            num(r.lambda),
            r.k,
            num(r.tau),
            num(r.merit),
            num(r.homotopy_residual),
            num(r.slack_a),
            num(r.slack_b)
        )?;
    }
    Ok(())
}

fn write_trace_file(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, trace)?;
    fs::write(path, buf).with_context(|| format!("cannot write trace {}", path.display()))
}

/// Solves one configured problem.
pub fn solve(run: &RunConfig) -> Result<(SolveReport, SolutionFile)> {
    let p = run.problem.build()?;
    let s = &run.settings;
    let x0 = s.initial.build(p.dim(), &s.region).context("invalid initial point")?;
    let report = trace_path(p.as_ref(), &x0, &s.solver, &s.region)?;
    let solution = SolutionFile::from_report(&report, p.as_ref());
    Ok((report, solution))
}

/// `solve` command. Output files are written whatever the status.
pub fn cmd_solve<W: Write>(run: &RunConfig, out: &mut W) -> i32 {
    let (report, solution) = match solve(run) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_MALFORMED;
        }
    };
    let written = (|| -> Result<()> {
        if let Some(t) = &run.trace_path {
            write_trace_file(t, &report.trace)?;
        }
        let json = serde_json::to_string_pretty(&solution)?;
        match &run.out_path {
            Some(o) => {
                fs::write(o, json + "\n").with_context(|| format!("cannot write solution {}", o.display()))?;
                writeln!(
                    out,
                    "{:?} after {} iterations ({} shifts), lambda = {:e}, natural residual = {:e}",
                    solution.status,
                    solution.iters,
                    solution.shifts,
                    solution.lambda_final,
                    solution.certificate.natural_residual
                )?;
            }
            None => writeln!(out, "{json}")?,
        }
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return 1;
    }
    exit_code(solution.status)
}

/// Results of the start-point diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub region_ok: bool,
    pub degenerate: bool,
    pub det_identity_ok: bool,
    pub tangent_negative: Option<bool>,
    pub fd_max_error: Option<f64>,
    pub text: String,
}

impl CheckReport {
    pub fn exit_code(&self) -> i32 {
        let fd_ok = self.fd_max_error.is_none_or(|e| e <= FD_CHECK_TOL);
        if self.region_ok && self.det_identity_ok && fd_ok {
            0
        } else {
            1
        }
    }
}

/// Largest absolute difference between the analytic `[∂H/∂x ∂H/∂λ]` and
/// central differences at `(x, λ)`.
pub fn jacobian_fd_error<P: NcpProblem + ?Sized>(sys: &HomotopySystem<'_, P>, x: &[f64], lambda: f64) -> Result<f64> {
    let d = x.len();
    let mut u = x.to_vec();
    u.push(lambda);
    let fd = fd_jacobian(|v| sys.eval(&v[..d], v[d]), &u, FD_STEP)?;
    let an = sys.jac_full(x, lambda)?;
    Ok(fd.as_slice().iter().zip(an.as_slice()).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

pub fn check(problem: &ProblemSpec, settings: &Settings) -> Result<CheckReport> {
    let p = problem.build()?;
    let rp = settings.region;
    let x0 = settings.initial.point(p.dim(), &rp)?;
    let mut text = String::new();
    writeln!(text, "n = {}, mode = {:?}, m = {}, l = {}", p.dim(), settings.initial.mode, rp.m, rp.l)?;

    let flags = validate_start(&x0, &rp);
    for f in &flags {
        let role = if f.condition.is_inequality() { "!=" } else { "  " };
        writeln!(
            text,
            "  {role} {:<16} {}  ({:.6e})",
            format!("{:?}", f.condition),
            if f.passed { "pass" } else { "FAIL" },
            f.value
        )?;
    }
    let region_ok = flags.iter().any(|f| f.condition == StartCondition::Region && f.passed);

    let sys = HomotopySystem::new(p.as_ref(), &x0, rp)?;
    let slack = region_slack(&x0, &rp);
    let prod: f64 = x0.z().iter().zip(x0.y()).map(|(a, b)| (a * b).abs()).product();
    let closed = det_dh_dx0_closed_form(&x0, 1.0, &rp);
    let scale = (slack.slack_a * slack.slack_b).abs().max((x0.v1() * x0.v2()).abs()) * prod;
    let numeric = lu_det(&sys.jac_start(1.0))?;
    let degenerate = closed.abs() <= 1e-10 * scale;
    let det_identity_ok = (numeric - closed).abs() <= 1e-8 * scale.max(closed.abs());
    writeln!(text, "det dH/dx0 at lambda = 1: closed form {closed:.6e}, numeric {numeric:.6e}: {}",
        if det_identity_ok { "pass" } else { "FAIL" })?;
    if degenerate {
        writeln!(text, "warning: degenerate start, det dH/dx0 = 0; the path is not guaranteed to exist")?;
    }

    let tangent_negative = if region_ok {
        let ip = InitialPoint { point: x0.clone(), mode: settings.initial.mode, validation: flags.clone() };
        match tangent_sign_check(&ip, p.as_ref(), &rp) {
            Ok(t) => {
                writeln!(text, "tangent sign: bordered det {:.6e}: {}", t.determinant,
                    if t.is_negative() { "negative (pass)" } else { "non-negative (FAIL)" })?;
                Some(t.is_negative())
            }
            Err(e) => {
                writeln!(text, "tangent sign: not available ({e})")?;
                None
            }
        }
    } else {
        None
    };

    let fd_max_error = match jacobian_fd_error(&sys, x0.as_slice(), 0.5) {
        Ok(e) => {
            writeln!(text, "jacobian vs finite differences at lambda = 0.5: max error {e:.3e}: {}",
                if e <= FD_CHECK_TOL { "pass" } else { "FAIL" })?;
            Some(e)
        }
        Err(e) => {
            writeln!(text, "jacobian vs finite differences: not available ({e})")?;
            None
        }
    };
    Ok(CheckReport { region_ok, degenerate, det_identity_ok, tangent_negative, fd_max_error, text })
}

/// `check` command.
pub fn cmd_check<W: Write>(problem: &Path, config: Option<&Path>, out: &mut W) -> i32 {
    let report = load_problem(problem).and_then(|p| Ok((p, Settings::load(config)?))).and_then(|(p, s)| check(&p, &s));
    match report {
        Ok(r) => {
            if write!(out, "{}", r.text).is_err() {
                return 1;
            }
            r.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_MALFORMED
        }
    }
}

/// The built-in instances run by `bench`.
pub fn bench_instances() -> Vec<(&'static str, ProblemSpec)> {
    let lcp = |m: Vec<Vec<f64>>, q: Vec<f64>| ProblemSpec::Lcp(LcpData { m, q });
    vec![
        ("lcp-1d", lcp(vec![vec![1.0]], vec![-1.0])),
        ("lcp-identity-2d", lcp(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![-1.0, -1.0])),
        ("lcp-2d", lcp(vec![vec![2.0, 1.0], vec![1.0, 2.0]], vec![-1.0, -1.0])),
        ("oligopoly-5", ProblemSpec::Oligopoly(OligopolyParams::five_firm())),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub name: &'static str,
    pub report: Option<SolveReport>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl BenchRow {
    pub fn status(&self) -> Option<SolveStatus> {
        self.report.as_ref().map(|r| r.status)
    }
}

/// Runs every built-in instance on its own thread. The initial-point entry
/// of `settings` is ignored; each instance starts from the all-ones point.
pub fn run_bench(settings: &Settings) -> Vec<BenchRow> {
    let instances = bench_instances();
    std::thread::scope(|scope| {
        let handles: Vec<_> = instances
            .iter()
            .map(|(name, spec)| {
                scope.spawn(move || {
                    let t = Instant::now();
                    let res = (|| -> Result<SolveReport> {
                        let p = spec.build()?;
                        let x0 = InitialSpec::default().build(p.dim(), &settings.region)?;
                        Ok(trace_path(p.as_ref(), &x0, &settings.solver, &settings.region)?)
                    })();
                    let seconds = t.elapsed().as_secs_f64();
                    match res {
                        Ok(r) => BenchRow { name, report: Some(r), error: None, seconds },
                        Err(e) => BenchRow { name, report: None, error: Some(format!("{e:#}")), seconds },
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench thread panicked")).collect()
    })
}

/// `bench` command.
pub fn cmd_bench<W: Write>(config: Option<&Path>, trace_dir: Option<&Path>, out: &mut W) -> i32 {
    let settings = match Settings::load(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_MALFORMED;
        }
    };
    if let Some(dir) = trace_dir {
        if let Err(e) = fs::create_dir_all(dir) {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return EXIT_MALFORMED;
        }
    }
    let rows = run_bench(&settings);
    let mut all_ok = true;
    let _ = writeln!(out, "{:<16} {:<20} {:>6} {:>7} {:>12} {:>12} {:>9}", "instance", "status", "iters", "shifts", "lambda", "residual", "seconds");
    for row in &rows {
        match &row.report {
            Some(r) => {
                all_ok &= r.status == SolveStatus::AcceptableSolution;
                let _ = writeln!(
                    out,
                    "{:<16} {:<20} {:>6} {:>7} {:>12.3e} {:>12.3e} {:>9.3}",
                    row.name,
                    format!("{:?}", r.status),
                    r.iters,
                    r.shifts,
                    r.final_lambda,
                    r.certificate.natural_residual,
                    row.seconds
                );
                if let Some(dir) = trace_dir {
                    if let Err(e) = write_trace_file(&dir.join(format!("{}.csv", row.name)), &r.trace) {
                        eprintln!("error: {e:#}");
                        all_ok = false;
                    }
                }
            }
            None => {
                all_ok = false;
                let _ = writeln!(out, "{:<16} error: {}", row.name, row.error.as_deref().unwrap_or("unknown"));
            }
        }
    }
    if all_ok {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_parse_flat_document() {
        let s = Settings::from_json(
            r#"{"max_outer_iters": 7, "region": {"m": 2000, "l": 2}, "initial": {"mode": "strict", "v10": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(s.solver.max_outer_iters, 7);
        assert_eq!(s.solver.m0, 25);
        assert_eq!(s.region, RegionParams { m: 2000.0, l: 2.0 });
        assert_eq!(s.initial.mode, InitMode::Strict);
        assert_eq!(s.initial.v10, Some(0.5));
    }

    #[test]
    fn settings_reject_bad_documents() {
        assert!(Settings::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(Settings::from_json(r#"{"eps1": 1e-3, "eps2": 1e-4}"#).is_err());
        assert!(Settings::from_json(r#"{"region": {"m": 10, "l": 1}}"#).is_err());
        assert!(Settings::from_json(r#"{"initial": {"z": [1]}}"#).is_err());
        assert!(Settings::from_json("[1, 2]").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(SolveStatus::AcceptableSolution), 0);
        assert_eq!(exit_code(SolveStatus::ProbableSolution), 2);
        for s in [
            SolveStatus::NonConvergence,
            SolveStatus::SingularJacobian,
            SolveStatus::IterationLimit,
            SolveStatus::ShiftLimit,
        ] {
            assert_eq!(exit_code(s), 1);
        }
    }

    #[test]
    fn trace_csv_format() {
        let r = TraceRecord {
            iter: 1,
            shift_count: 0,
            lambda: 0.1,
            k: -2,
            tau: 0.5,
            merit: 3.0,
            homotopy_residual: 1e-12,
            slack_a: 10.0,
            slack_b: 11.0,
            min_coordinate: 0.01,
        };
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 9);
        assert_eq!(row[3], "-2");
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.1);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn initial_spec_lengths() {
        let spec = InitialSpec { z0: Some(vec![1.0; 3]), ..Default::default() };
        assert!(spec.point(2, &RegionParams::default()).is_err());
        let p = InitialSpec::default().point(2, &RegionParams::default()).unwrap();
        assert_eq!(p.v2(), 0.001);
    }

    #[test]
    fn check_strict_start_is_degenerate() {
        let settings = Settings {
            region: RegionParams::new(1000.0, 1.0).unwrap(),
            initial: InitialSpec { mode: InitMode::Strict, v10: Some(499.0), ..Default::default() },
            ..Default::default()
        };
        let spec = ProblemSpec::Lcp(LcpData { m: vec![vec![1.0]], q: vec![-1.0] });
        let r = check(&spec, &settings).unwrap();
        assert!(r.region_ok);
        assert!(r.degenerate);
        assert!(r.det_identity_ok);
        assert!(r.text.contains("degenerate"));
    }

    #[test]
    fn check_loose_oligopoly_start() {
        let spec = ProblemSpec::Oligopoly(OligopolyParams::five_firm());
        let r = check(&spec, &Settings::default()).unwrap();
        assert!(r.region_ok && r.det_identity_ok && !r.degenerate);
        assert_eq!(r.tangent_negative, Some(true));
        assert!(r.fd_max_error.unwrap() <= FD_CHECK_TOL);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn check_outside_region() {
        let settings = Settings {
            initial: InitialSpec { z0: Some(vec![0.0, 1.0]), ..Default::default() },
            ..Default::default()
        };
        let spec = ProblemSpec::Lcp(LcpData { m: vec![vec![2.0, 1.0], vec![1.0, 2.0]], q: vec![-1.0, -1.0] });
        let r = check(&spec, &settings).unwrap();
        assert!(!r.region_ok);
        assert_eq!(r.exit_code(), 1);
    }
}
