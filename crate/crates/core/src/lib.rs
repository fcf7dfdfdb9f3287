//! Simulation and numerical analysis of scaled attachment random recursive
//! trees: node `i` attaches to `floor(i * X_i)` for i.i.d. `X_i` on `[0, 1)`.
//!
//! The crate computes the first-order depth constants of such trees from the
//! attachment distribution — `1/μ` for the typical depth, `α_max` for the
//! height, `α_min` for the min depth over the upper half of the labels — via
//! cumulant generating functions and their Legendre duals, and verifies the
//! limit laws by exact seeded simulation, including the random k-dag greedy
//! walks that reduce to `max:k` / `min:k` attachment trees.

pub mod constants;
pub mod dag;
pub mod distributions;
pub mod montecarlo;
pub mod rate;
pub mod report;
pub mod stats;
pub mod stream;
pub mod tree;

pub use constants::{depth_coefficients, solve_alpha_max, solve_alpha_min, table1, DepthConstants, Table1Row};
pub use dag::{build_kdag, reduction_check, GreedyMode, KDag};
pub use distributions::{AttachmentLaw, LawError, LawKind, MomentSummary, TabulatedDensity};
pub use montecarlo::{
    clt_diagnostics, run_plan, CltDiagnostics, ConvergenceRow, ExperimentPlan, McError,
    PathEventConfig, PlanReport, RotationConfig, Statistic,
};
pub use rate::{lambda_star_k_root, max_order_rate, min_order_rate, DualEval, RateEvaluator};
pub use report::{render_svg, write_csv, write_json, RenderSpec, ReportError};
pub use stream::RandomStream;
pub use tree::{
    build_depths, path_event_probability, renewal_bounds, rotation_inequality_check, summarize,
    trace_path, PathEvent, PathEventEstimate, PathTrace, RenewalBounds, RotationCheck, SimOutcome,
    TreeDepths, TreeError,
};
