//! Parallel experiment harness: convergence tables over an `n` grid with
//! reproducible per-trial streams.
//!
//! Trials are distributed over a rayon pool; each trial derives its stream
//! from `(seed, n, trial)` and results are collected in trial order, so the
//! output is identical for any worker count. Depth-only statistics use the
//! lazy path tracer (`O(log n)` per trial); height and min-depth statistics
//! build the full depth array.

use rayon::prelude::*;

use crate::distributions::AttachmentLaw;
use crate::stats::{
    ks_distance_to_normal, quantile_sorted, sample_moments, wilson_interval, Z_95,
};
use crate::stream::RandomStream;
use crate::tree::{
    build_depths, path_event_probability, renewal_bounds, rotation_inequality_check, summarize,
    trace_path, PathEvent, PathEventEstimate, RotationCheck, MAX_NODES,
};

#[derive(Debug, thiserror::Error)]
pub enum McError {
    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),
    #[error("σ² = 0 or μ = ∞: the CLT standardization is undefined for this law")]
    DegenerateSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    DLast,
    Height,
    MinDepth,
    Renewal,
    Clt,
    PathEvent,
    Rotation,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::DLast => "d_last",
            Statistic::Height => "height",
            Statistic::MinDepth => "min_depth",
            Statistic::Renewal => "renewal",
            Statistic::Clt => "clt",
            Statistic::PathEvent => "path_event",
            Statistic::Rotation => "rotation",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "d_last" => Some(Statistic::DLast),
            "height" => Some(Statistic::Height),
            "min_depth" => Some(Statistic::MinDepth),
            "renewal" => Some(Statistic::Renewal),
            "clt" => Some(Statistic::Clt),
            "path_event" => Some(Statistic::PathEvent),
            "rotation" => Some(Statistic::Rotation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PathEventConfig {
    pub event: PathEvent,
    pub steps: u64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct RotationConfig {
    pub steps: u64,
    pub beta: f64,
}

/// One experiment: a law, a strictly increasing `n` grid, a trial budget and
/// the set of statistics to record per `n`.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub law: AttachmentLaw,
    pub n_grid: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    pub statistics: Vec<Statistic>,
    pub path_event: Option<PathEventConfig>,
    pub rotation: Option<RotationConfig>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), McError> {
        if self.trials == 0 {
            return Err(McError::InvalidPlan("trials must be >= 1".into()));
        }
        if self.n_grid.is_empty() {
            return Err(McError::InvalidPlan("empty n grid".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(McError::InvalidPlan(
                "n grid must be strictly increasing".into(),
            ));
        }
        if self.n_grid.iter().any(|&n| n < 3) {
            return Err(McError::InvalidPlan("node counts must be >= 3".into()));
        }
        if self.statistics.is_empty() {
            return Err(McError::InvalidPlan("no statistics requested".into()));
        }
        if self.statistics.contains(&Statistic::PathEvent) && self.path_event.is_none() {
            return Err(McError::InvalidPlan(
                "path_event requested without its (event, t, beta) config".into(),
            ));
        }
        if self.statistics.contains(&Statistic::Rotation) && self.rotation.is_none() {
            return Err(McError::InvalidPlan(
                "rotation requested without its (t, beta) config".into(),
            ));
        }
        if self.statistics.contains(&Statistic::Clt) {
            let ms = self.law.neg_log_moments();
            if !(ms.mu.is_finite() && ms.sigma2 > 0.0 && ms.sigma2.is_finite()) {
                return Err(McError::DegenerateSigma);
            }
        }
        Ok(())
    }

    fn wants(&self, s: Statistic) -> bool {
        self.statistics.contains(&s)
    }
}

/// Location/scale/quantile summary of one scalar statistic at one `n`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StatSummary {
    pub name: &'static str,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    /// `mean / log n`.
    pub ratio_to_log_n: f64,
    /// Half width of the 95% t interval on the mean.
    pub ci_half_width: f64,
}

impl StatSummary {
    fn from_values(name: &'static str, values: &[f64], log_n: f64) -> Self {
        let m = sample_moments(values);
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite statistic"));
        let n = values.len() as f64;
        let df = (values.len().max(2) - 1) as f64;
        // Cornish–Fisher t quantile; indistinguishable from Student t at the
        // trial counts used here.
        let t = Z_95 + (Z_95.powi(3) + Z_95) / (4.0 * df);
        StatSummary {
            name,
            mean: m.mean,
            variance: m.variance,
            min: sorted[0],
            q25: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q75: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
            ratio_to_log_n: m.mean / log_n,
            ci_half_width: t * (m.variance / n).sqrt(),
        }
    }
}

/// Renewal sandwich summary: `d_exact <= d_hat` is a pathwise identity and
/// its fraction must be exactly one; `d_bar <= d_exact` holds only with high
/// probability and is reported with its interval.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RenewalSummary {
    pub d_exact: StatSummary,
    pub d_hat: StatSummary,
    pub d_bar: StatSummary,
    pub frac_exact_le_hat: f64,
    pub frac_bar_le_exact: f64,
    pub frac_bar_le_exact_ci: (f64, f64),
}

/// Thresholds used by the normal-approximation acceptance checks; carried in
/// the output so downstream readers can audit what was tested.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CltThresholds {
    pub mean_abs: f64,
    pub variance_tol: f64,
    pub skewness_abs: f64,
    pub excess_kurtosis_abs: f64,
    pub ks: f64,
}

impl Default for CltThresholds {
    fn default() -> Self {
        CltThresholds {
            mean_abs: 0.05,
            variance_tol: 0.1,
            skewness_abs: 0.15,
            excess_kurtosis_abs: 0.3,
            ks: 0.03,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CltDiagnostics {
    pub n: u64,
    pub trials: u64,
    pub mu: f64,
    pub sigma: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub ks_distance: f64,
    pub thresholds: CltThresholds,
}

/// Standardizes depth samples via `(D - log n/μ) / (σ √(log n/μ³))` and
/// summarizes the four moments plus the KS distance to Φ.
pub fn clt_diagnostics(
    depth_samples: &[f64],
    mu: f64,
    sigma: f64,
    n: u64,
) -> Result<CltDiagnostics, McError> {
    if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
        return Err(McError::DegenerateSigma);
    }
    let log_n = (n as f64).ln();
    let center = log_n / mu;
    let scale = sigma * (log_n / mu.powi(3)).sqrt();
    let z: Vec<f64> = depth_samples.iter().map(|d| (d - center) / scale).collect();
    let m = sample_moments(&z);
    Ok(CltDiagnostics {
        n,
        trials: depth_samples.len() as u64,
        mu,
        sigma,
        mean: m.mean,
        variance: m.variance,
        skewness: m.skewness,
        excess_kurtosis: m.excess_kurtosis,
        ks_distance: ks_distance_to_normal(&z),
        thresholds: CltThresholds::default(),
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub trials: u64,
    pub log_n: f64,
    pub stats: Vec<StatSummary>,
    pub renewal: Option<RenewalSummary>,
    pub clt: Option<CltDiagnostics>,
    pub path_event: Option<PathEventEstimate>,
    pub rotation: Option<RotationCheck>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SkippedScale {
    pub n: u64,
    pub reason: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PlanReport {
    pub law: String,
    pub seed: u64,
    pub trials: u64,
    pub rows: Vec<ConvergenceRow>,
    pub skipped: Vec<SkippedScale>,
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialOut {
    d_last: f64,
    height: f64,
    min_depth: f64,
    d_exact: f64,
    d_hat: f64,
    d_bar: f64,
}

/// Runs the plan, one row per `n`. Deterministic for a fixed seed regardless
/// of the rayon worker count. Scales that exceed the array capacity are
/// reported in `skipped` and do not abort the remaining rows.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanReport, McError> {
    plan.validate()?;
    let needs_build = plan.wants(Statistic::Height) || plan.wants(Statistic::MinDepth);
    let needs_trace = plan.wants(Statistic::DLast) || plan.wants(Statistic::Clt);
    let needs_renewal = plan.wants(Statistic::Renewal);
    let ms = plan.law.neg_log_moments();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &n in &plan.n_grid {
        if n > MAX_NODES {
            skipped.push(SkippedScale {
                n,
                reason: format!("node count exceeds array capacity {MAX_NODES}"),
            });
            continue;
        }
        let outs: Vec<TrialOut> = (0..plan.trials)
            .into_par_iter()
            .map(|trial| {
                let stream = RandomStream::keyed(&[plan.seed, n, trial]);
                let mut out = TrialOut::default();
                if needs_build {
                    let tree = build_depths(&plan.law, &stream, n, false)
                        .expect("capacity checked above");
                    let s = summarize(&tree);
                    out.d_last = s.d_last as f64;
                    out.height = s.height as f64;
                    out.min_depth = s.min_depth as f64;
                } else if needs_trace {
                    out.d_last = trace_path(&plan.law, &stream, n).depth() as f64;
                }
                if needs_renewal {
                    let rb = renewal_bounds(&plan.law, &stream, n);
                    out.d_exact = rb.d_exact as f64;
                    out.d_hat = rb.d_hat as f64;
                    out.d_bar = rb.d_bar as f64;
                }
                out
            })
            .collect();

        let log_n = (n as f64).ln();
        let collect = |f: fn(&TrialOut) -> f64| -> Vec<f64> { outs.iter().map(f).collect() };
        let mut stats = Vec::new();
        for &s in &plan.statistics {
            match s {
                Statistic::DLast => stats.push(StatSummary::from_values(
                    "d_last",
                    &collect(|o| o.d_last),
                    log_n,
                )),
                Statistic::Height => stats.push(StatSummary::from_values(
                    "height",
                    &collect(|o| o.height),
                    log_n,
                )),
                Statistic::MinDepth => stats.push(StatSummary::from_values(
                    "min_depth",
                    &collect(|o| o.min_depth),
                    log_n,
                )),
                _ => {}
            }
        }
        let renewal = needs_renewal.then(|| {
            let le_hat = outs.iter().filter(|o| o.d_exact <= o.d_hat).count() as u64;
            let bar_le = outs.iter().filter(|o| o.d_bar <= o.d_exact).count() as u64;
            RenewalSummary {
                d_exact: StatSummary::from_values("d_exact", &collect(|o| o.d_exact), log_n),
                d_hat: StatSummary::from_values("d_hat", &collect(|o| o.d_hat), log_n),
                d_bar: StatSummary::from_values("d_bar", &collect(|o| o.d_bar), log_n),
                frac_exact_le_hat: le_hat as f64 / plan.trials as f64,
                frac_bar_le_exact: bar_le as f64 / plan.trials as f64,
                frac_bar_le_exact_ci: wilson_interval(bar_le, plan.trials, Z_95),
            }
        });
        let clt = if plan.wants(Statistic::Clt) {
            Some(clt_diagnostics(
                &collect(|o| o.d_last),
                ms.mu,
                ms.sigma(),
                n,
            )?)
        } else {
            None
        };
        let path_event = plan.path_event.filter(|_| plan.wants(Statistic::PathEvent)).map(|cfg| {
            path_event_probability(
                &plan.law,
                cfg.event,
                n,
                cfg.steps,
                cfg.beta,
                plan.trials,
                derived_seed(&[plan.seed, n, 0xA]),
            )
        });
        let rotation = plan.rotation.filter(|_| plan.wants(Statistic::Rotation)).map(|cfg| {
            rotation_inequality_check(
                &plan.law,
                cfg.steps,
                cfg.beta,
                plan.trials,
                derived_seed(&[plan.seed, n, 0xB]),
            )
        });
        rows.push(ConvergenceRow {
            n,
            trials: plan.trials,
            log_n,
            stats,
            renewal,
            clt,
            path_event,
            rotation,
        });
    }
    Ok(PlanReport {
        law: plan.law.to_string(),
        seed: plan.seed,
        trials: plan.trials,
        rows,
        skipped,
    })
}

fn derived_seed(parts: &[u64]) -> u64 {
    RandomStream::keyed(parts).bits_at(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(spec: &str, n_grid: Vec<u64>, trials: u64, stats: Vec<Statistic>) -> ExperimentPlan {
        ExperimentPlan {
            law: AttachmentLaw::parse(spec).unwrap(),
            n_grid,
            trials,
            seed: 1729,
            statistics: stats,
            path_event: None,
            rotation: None,
        }
    }

    #[test]
    fn plan_validation_catches_bad_grids() {
        let p = plan("uniform", vec![100, 100], 10, vec![Statistic::DLast]);
        assert!(matches!(p.validate(), Err(McError::InvalidPlan(_))));
        let p = plan("uniform", vec![100], 0, vec![Statistic::DLast]);
        assert!(p.validate().is_err());
        let p = plan("const:0.5", vec![100], 10, vec![Statistic::Clt]);
        assert!(matches!(p.validate(), Err(McError::DegenerateSigma)));
    }

    #[test]
    fn constant_law_has_zero_depth_variance() {
        let p = plan("const:0.5", vec![1000], 50, vec![Statistic::DLast]);
        let report = run_plan(&p).unwrap();
        assert_eq!(report.rows[0].stats[0].variance, 0.0);
    }

    #[test]
    fn ordering_holds_within_every_row() {
        let p = plan(
            "uniform",
            vec![500, 5000],
            100,
            vec![Statistic::DLast, Statistic::Height, Statistic::MinDepth],
        );
        let report = run_plan(&p).unwrap();
        for row in &report.rows {
            let by_name = |n: &str| row.stats.iter().find(|s| s.name == n).unwrap();
            assert!(by_name("min_depth").mean <= by_name("d_last").mean);
            assert!(by_name("d_last").mean <= by_name("height").mean);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let p = plan(
            "max:2",
            vec![2000],
            200,
            vec![Statistic::DLast, Statistic::Height, Statistic::Renewal],
        );
        let run_with = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_plan(&p).unwrap())
        };
        let a = serde_json::to_string(&run_with(1)).unwrap();
        let b = serde_json::to_string(&run_with(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn typical_depth_ratio_near_one_over_mu() {
        let p = plan("uniform", vec![100_000], 400, vec![Statistic::DLast]);
        let report = run_plan(&p).unwrap();
        let ratio = report.rows[0].stats[0].ratio_to_log_n;
        assert!((ratio - 1.0).abs() < 0.08, "ratio = {ratio}");
    }

    #[test]
    fn clt_on_synthetic_normal_input_is_calibrated() {
        // feed exact normal quantiles through the standardization inverse
        let n = 4096u64;
        let trials = 4000usize;
        let mu = 1.0;
        let sigma = 1.0;
        let log_n = (n as f64).ln();
        let center = log_n / mu;
        let scale = sigma * (log_n / mu.powi(3)).sqrt();
        let samples: Vec<f64> = (0..trials)
            .map(|i| {
                let p = (i as f64 + 0.5) / trials as f64;
                let (mut lo, mut hi) = (-9.0, 9.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if crate::stats::standard_normal_cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                center + scale * 0.5 * (lo + hi)
            })
            .collect();
        let d = clt_diagnostics(&samples, mu, sigma, n).unwrap();
        let ks_bound = 1.36 / (trials as f64).sqrt();
        assert!(d.ks_distance < ks_bound, "ks = {}", d.ks_distance);
        assert!(d.mean.abs() < 0.01 && (d.variance - 1.0).abs() < 0.01);
    }

    #[test]
    fn renewal_summary_has_exact_upper_sandwich() {
        let p = plan("uniform", vec![10_000], 500, vec![Statistic::Renewal]);
        let report = run_plan(&p).unwrap();
        let r = report.rows[0].renewal.as_ref().unwrap();
        assert_eq!(r.frac_exact_le_hat, 1.0);
        assert!(r.frac_bar_le_exact > 0.9);
    }

    #[test]
    fn oversized_scales_are_skipped_not_fatal() {
        let mut p = plan("uniform", vec![1000], 5, vec![Statistic::Height]);
        p.n_grid = vec![1000, MAX_NODES + 1];
        let report = run_plan(&p).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].n, MAX_NODES + 1);
    }
}
