//! Depth constants: `1/μ`, `α_max`, `α_min` and the CLT scale.
//!
//! `α_max = inf{c > 1/μ : Ψ(c) > 1}` and
//! `α_min = sup({0} ∪ {c < 1/μ : Ψ(c) > 1})`. `Ψ` is strictly increasing
//! above `1/μ` and decreasing below it, so both reduce to bracketed
//! bisection on `Ψ(c) - 1`. Point masses bypass the solvers: for
//! `X ≡ θ` all three constants collapse to `-1/log θ`.

use crate::distributions::{AttachmentLaw, MomentSummary};
use crate::rate::RateEvaluator;

/// Upper limit of the α_max bracket doubling; reaching it means the
/// evaluator is broken, since the set `{c : Ψ(c) > 1}` is never empty.
const ALPHA_MAX_CEILING: f64 = 1e6;
/// Bisection tolerance in `c`.
const C_TOLERANCE: f64 = 1e-9;
/// α_min probes below this resolution are reported as zero.
const ALPHA_MIN_FLOOR: f64 = 1e-8;
const ALPHA_MIN_PROBES: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum ConstantsError {
    #[error("Ψ(c) ≤ 1 up to c = {ceiling}; rate evaluator inconsistent for this law")]
    BracketFailure { ceiling: f64 },
}

/// Bracket endpoints and iteration counts of one bisection run.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct SolveDiagnostics {
    pub bracket: (f64, f64),
    pub iterations: u32,
    /// α_min only: grid probes evaluated before a certificate was found
    /// (all of them when the answer is zero).
    pub probes: u32,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DepthConstants {
    pub law: String,
    /// First-order coefficient of the typical depth (`0` when `μ = ∞`).
    pub one_over_mu: f64,
    pub alpha_max: f64,
    pub alpha_min: f64,
    /// `σ/√μ³`, present only when `0 < σ² < ∞` and `μ < ∞`.
    pub clt_scale: Option<f64>,
    pub alpha_max_diag: SolveDiagnostics,
    pub alpha_min_diag: SolveDiagnostics,
}

/// `(1/μ, σ/√μ³)` from the raw moments.
pub fn depth_coefficients(ms: &MomentSummary) -> (f64, Option<f64>) {
    let one_over_mu = if ms.mu.is_infinite() { 0.0 } else { 1.0 / ms.mu };
    let clt_scale = (ms.mu.is_finite() && ms.sigma2 > 0.0 && ms.sigma2.is_finite())
        .then(|| ms.sigma2.sqrt() / ms.mu.powf(1.5));
    (one_over_mu, clt_scale)
}

/// Smallest `c > 1/μ` with `Ψ(c) = 1`, by doubling then bisection.
pub fn solve_alpha_max(ev: &RateEvaluator) -> Result<(f64, SolveDiagnostics), ConstantsError> {
    let ms = ev.moments();
    let start = if ms.mu.is_finite() { (1.0 / ms.mu).max(1e-9) } else { 1e-9 };
    if ev.psi(start) > 1.0 {
        // Degenerate (essentially all mass at zero): the infimum is at the
        // bottom of the admissible range.
        return Ok((
            start,
            SolveDiagnostics {
                bracket: (start, start),
                iterations: 0,
                probes: 0,
            },
        ));
    }
    let mut lo = start;
    let mut hi = start * 2.0;
    while ev.psi(hi) <= 1.0 {
        lo = hi;
        hi *= 2.0;
        if hi > ALPHA_MAX_CEILING {
            return Err(ConstantsError::BracketFailure {
                ceiling: ALPHA_MAX_CEILING,
            });
        }
    }
    let bracket = (lo, hi);
    let mut iterations = 0;
    while hi - lo > C_TOLERANCE && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if ev.psi(mid) > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok((
        0.5 * (lo + hi),
        SolveDiagnostics {
            bracket,
            iterations,
            probes: 0,
        },
    ))
}

/// Largest `c < 1/μ` with `Ψ(c) > 1`, or `0` when no probe on the geometric
/// grid `(1e-8, 1/μ)` certifies such a point. Zero is an ordinary answer:
/// it is exact whenever `Λ(λ) = ∞` for all `λ < 0`, and otherwise encodes
/// "below the 1e-8 resolution cutoff".
pub fn solve_alpha_min(ev: &RateEvaluator) -> (f64, SolveDiagnostics) {
    let ms = ev.moments();
    if ms.mu.is_infinite() || ev.law().lambda_floor() >= 0.0 {
        return (0.0, SolveDiagnostics::default());
    }
    let top = 1.0 / ms.mu;
    if top <= ALPHA_MIN_FLOOR {
        return (0.0, SolveDiagnostics::default());
    }
    let ratio = top / ALPHA_MIN_FLOOR;
    let mut certificate = None;
    let mut probes = 0;
    for i in 0..ALPHA_MIN_PROBES {
        let c = ALPHA_MIN_FLOOR * ratio.powf(i as f64 / (ALPHA_MIN_PROBES - 1) as f64);
        let c = c.min(top * (1.0 - 1e-12));
        probes += 1;
        if ev.psi(c) > 1.0 {
            certificate = Some(c);
            break;
        }
    }
    let Some(mut lo) = certificate else {
        return (
            0.0,
            SolveDiagnostics {
                bracket: (0.0, top),
                iterations: 0,
                probes,
            },
        );
    };
    // Ψ decreases on (0, 1/μ) and Ψ(1/μ) = 0, so the crossing is in
    // [certificate, 1/μ].
    let mut hi = top;
    let bracket = (lo, hi);
    let mut iterations = 0;
    while hi - lo > C_TOLERANCE && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if ev.psi(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    (
        0.5 * (lo + hi),
        SolveDiagnostics {
            bracket,
            iterations,
            probes,
        },
    )
}

impl DepthConstants {
    pub fn compute(law: &AttachmentLaw) -> Result<Self, ConstantsError> {
        if law.is_point_mass() {
            // Constant θ: parent chasing is deterministic halving by θ, so all
            // three constants equal -1/log θ. A full atom at zero degenerates
            // everything to 0.
            let v = match law.density(0.0) {
                _ if law.atom_mass() >= 1.0 => 0.0,
                _ => {
                    let mu = law.neg_log_moments().mu;
                    1.0 / mu
                }
            };
            return Ok(DepthConstants {
                law: law.to_string(),
                one_over_mu: v,
                alpha_max: v,
                alpha_min: v,
                clt_scale: None,
                alpha_max_diag: SolveDiagnostics::default(),
                alpha_min_diag: SolveDiagnostics::default(),
            });
        }
        let ev = RateEvaluator::new(law.clone());
        let (one_over_mu, clt_scale) = depth_coefficients(&ev.moments());
        let (alpha_max, alpha_max_diag) = solve_alpha_max(&ev)?;
        let (alpha_min, alpha_min_diag) = solve_alpha_min(&ev);
        Ok(DepthConstants {
            law: law.to_string(),
            one_over_mu,
            alpha_max,
            alpha_min,
            clt_scale,
            alpha_max_diag,
            alpha_min_diag,
        })
    }
}

/// One row of the greedy-distance constants table.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Table1Row {
    pub k: u32,
    /// Constants of the newest-parent walk (attachment `max:k`).
    pub rho_plus_min: f64,
    pub rho_plus: f64,
    pub rho_plus_max: f64,
    /// Constants of the oldest-parent walk (attachment `min:k`).
    pub rho_minus_min: f64,
    pub rho_minus: f64,
    pub rho_minus_max: f64,
}

/// Min-depth / typical / height constants for the greedy k-dag walks,
/// `k = 1..=5`.
pub fn table1() -> Result<Vec<Table1Row>, ConstantsError> {
    (1..=5)
        .map(|k| {
            let plus = DepthConstants::compute(&AttachmentLaw::max_order(k).unwrap())?;
            let minus = DepthConstants::compute(&AttachmentLaw::min_order(k).unwrap())?;
            Ok(Table1Row {
                k,
                rho_plus_min: plus.alpha_min,
                rho_plus: plus.one_over_mu,
                rho_plus_max: plus.alpha_max,
                rho_minus_min: minus.alpha_min,
                rho_minus: minus.one_over_mu,
                rho_minus_max: minus.alpha_max,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn constants(spec: &str) -> DepthConstants {
        DepthConstants::compute(&AttachmentLaw::parse(spec).unwrap()).unwrap()
    }

    #[test]
    fn uniform_height_constant_is_e() {
        let c = constants("uniform");
        assert!((c.alpha_max - E).abs() < 1e-6, "alpha_max = {}", c.alpha_max);
        assert_eq!(c.alpha_min, 0.0);
        assert_eq!(c.one_over_mu, 1.0);
    }

    #[test]
    fn constant_law_collapses_all_three() {
        let c = constants("const:0.5");
        let want = 1.0 / 2.0f64.ln();
        for v in [c.one_over_mu, c.alpha_max, c.alpha_min] {
            assert!((v - want).abs() < 1e-12);
        }
        assert!(c.clt_scale.is_none()); // σ² = 0
    }

    #[test]
    fn zero_atom_mixture_equals_its_base() {
        let mixed = constants("atom:0+pow:1");
        let plain = constants("uniform");
        assert!((mixed.alpha_max - plain.alpha_max).abs() < 1e-8);
        assert!((mixed.one_over_mu - plain.one_over_mu).abs() < 1e-12);
    }

    #[test]
    fn atom_mixture_scales_the_uniform_height_constant() {
        // with mass p at zero, Ψ(c) = Ψ_unif(c) - c log(1-p) for c >= 1,
        // so the crossing moves to (1-p)e
        let c = constants("atom:0.25+uniform");
        assert!((c.alpha_max - 0.75 * E).abs() < 1e-6, "{}", c.alpha_max);
        assert_eq!(c.alpha_min, 0.0);
        assert_eq!(c.one_over_mu, 0.0);
        assert!(c.clt_scale.is_none());
    }

    #[test]
    fn depth_coefficients_closed_forms() {
        for k in 1..=6u32 {
            let ms = AttachmentLaw::max_order(k).unwrap().neg_log_moments();
            let (one_over_mu, clt) = depth_coefficients(&ms);
            assert_eq!(one_over_mu, k as f64);
            assert!((clt.unwrap() - (k as f64).sqrt()).abs() < 1e-12);
        }
        let ms = AttachmentLaw::min_order(2).unwrap().neg_log_moments();
        let (one_over_mu, _) = depth_coefficients(&ms);
        assert!((one_over_mu - 1.0 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn min_order_alpha_min_is_zero() {
        for k in 1..=5 {
            let c = constants(&format!("min:{k}"));
            assert_eq!(c.alpha_min, 0.0, "k = {k}");
        }
    }

    #[test]
    fn max_order_table_spot_values() {
        let c2 = constants("max:2");
        assert!((c2.alpha_min - 0.3734).abs() < 5e-4, "{}", c2.alpha_min);
        assert!((c2.alpha_max - 4.3111).abs() < 5e-4, "{}", c2.alpha_max);
        let c4 = constants("max:4");
        assert!((c4.alpha_max - 7.1451).abs() < 5e-4, "{}", c4.alpha_max);
    }

    #[test]
    fn alpha_ordering_invariants() {
        for spec in ["uniform", "max:2", "max:5", "min:2", "pow:0.5", "pow:3"] {
            let c = constants(spec);
            assert!(
                c.alpha_min <= c.one_over_mu && c.one_over_mu <= c.alpha_max,
                "{spec}: {c:?}"
            );
            assert!(c.alpha_max > c.one_over_mu, "{spec} strict right");
        }
    }

    #[test]
    fn psi_is_one_at_the_solved_constants() {
        for spec in ["uniform", "max:3", "min:2", "pow:2"] {
            let law = AttachmentLaw::parse(spec).unwrap();
            let ev = RateEvaluator::new(law.clone());
            let c = DepthConstants::compute(&law).unwrap();
            assert!((ev.psi(c.alpha_max) - 1.0).abs() < 1e-6, "{spec}");
            if c.alpha_min > 0.0 {
                assert!((ev.psi(c.alpha_min) - 1.0).abs() < 1e-6, "{spec}");
            }
        }
    }
}
