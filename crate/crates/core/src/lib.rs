//! Homotopy path following for nonlinear complementarity problems.

pub mod error;
pub mod homotopy;
pub mod linalg;
pub mod ncp;
pub mod problems;
pub mod tracer;

pub use error::{Error, Result};
pub use homotopy::{
    default_start, det_dh_dx0_closed_form, eval_h0, make_initial_point, merit, merit_gradient, region_slack,
    tangent_sign_check, validate_start, ConditionFlag, HomotopyPoint, HomotopySystem, InitMode, InitialPoint,
    RegionParams, RegionSlack, StartCondition, TangentSign,
};
pub use linalg::DenseMatrix;
pub use ncp::{
    certificate_from_values, check_index_conditions, principal_minor_diagnostic, residual,
    ComplementarityCertificate, DecompositionDiagnostic, FnProblem, IndexCondition, NcpProblem,
    PrincipalMinorReport,
};
pub use problems::{lcp_bruteforce, Lcp, LcpData, Oligopoly, OligopolyParams, ProblemSpec, LITERATURE_OLIGOPOLY_Z};
pub use tracer::{
    choose_step, corrector, extract_solution, predictor_direction, trace_path, Extraction, PathMap, SolveReport,
    SolveStatus, SolverConfig, TraceRecord,
};
