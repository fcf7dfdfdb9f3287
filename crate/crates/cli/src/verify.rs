//! The `verify` subcommand: lemma-level Monte Carlo checks with one
//! ok/FAIL line each.
//!
//! Checks: the renewal sandwich (`d_exact <= d_hat` pathwise and
//! `d_bar <= d_exact` with frequency >= 0.99), the cyclic-shift prefix
//! inequality, the large-label path-event sandwich, and the k-dag greedy
//! reduction replay.

use std::io::Write;

use rayon::prelude::*;
use sarrt_core::{
    path_event_probability, reduction_check, renewal_bounds, rotation_inequality_check,
    AttachmentLaw, PathEvent, RandomStream, RateEvaluator,
};

struct CheckLog<'a> {
    out: &'a mut dyn Write,
    all_ok: bool,
}

impl CheckLog<'_> {
    fn report(&mut self, ok: bool, name: &str, detail: &str) -> anyhow::Result<()> {
        self.all_ok &= ok;
        writeln!(
            self.out,
            "{} {name}: {detail}",
            if ok { "ok  " } else { "FAIL" }
        )?;
        Ok(())
    }
}

pub fn run_verification(
    seed: u64,
    scale: u64,
    trials_override: Option<u64>,
    mut out: Box<dyn Write>,
) -> anyhow::Result<bool> {
    let budget = |full: u64, floor: u64| trials_override.unwrap_or((full / scale).max(floor));
    let mut log = CheckLog {
        out: &mut *out,
        all_ok: true,
    };
    let uniform = AttachmentLaw::uniform();

    // Renewal sandwich at n = 1e6.
    {
        let n = 1_000_000u64;
        let trials = budget(10_000, 200);
        let bounds: Vec<_> = (0..trials)
            .into_par_iter()
            .map(|t| renewal_bounds(&uniform, &RandomStream::keyed(&[seed, n, t]), n))
            .collect();
        let violations = bounds.iter().filter(|b| b.d_exact > b.d_hat).count();
        let bar_ok = bounds.iter().filter(|b| b.d_bar <= b.d_exact).count();
        let frac = bar_ok as f64 / trials as f64;
        log.report(
            violations == 0 && frac >= 0.99,
            "renewal-sandwich",
            &format!(
                "n {n}, {trials} trials: d_exact<=d_hat violations {violations}, \
                 P(d_bar<=d_exact) = {frac:.4} (need >= 0.99)"
            ),
        )?;
    }

    // Cyclic-shift prefix inequality, t = 10.
    {
        let trials = budget(1_000_000, 10_000);
        let beta = (-0.5f64).exp();
        let r = rotation_inequality_check(&uniform, 10, beta, trials, seed);
        log.report(
            r.pass,
            "rotation-inequality",
            &format!(
                "t 10, beta e^-1/2, {trials} trials: lhs {:.6} rhs/t {:.6} margin {:.2e} (se {:.2e})",
                r.lhs,
                r.rhs / 10.0,
                r.margin,
                r.margin_se
            ),
        )?;
    }

    // Path-event sandwich: c = 2 in (1/mu, alpha_max), beta = e^{-1/c},
    // t = 12, n >= t beta^{-t}; bounds beta^t/t and beta^{(Psi(c)-0.1)t}.
    {
        let trials = budget(40_000, 2_000);
        let c = 2.0f64;
        let beta = (-1.0 / c).exp();
        let steps = 12u64;
        let n = 5_000u64;
        debug_assert!(n as f64 >= steps as f64 * beta.powi(-(steps as i32)));
        let psi = RateEvaluator::new(uniform.clone()).psi(c);
        let lo = beta.powi(steps as i32) / steps as f64;
        let hi = beta.powf((psi - 0.1) * steps as f64);
        let est = path_event_probability(
            &uniform,
            PathEvent::LargeLabels,
            n,
            steps,
            beta,
            trials,
            seed,
        );
        log.report(
            est.p_hat >= lo && est.p_hat <= hi,
            "path-event-sandwich",
            &format!(
                "n {n}, t {steps}, {trials} trials: estimate {:.5} within [{lo:.5}, {hi:.5}]",
                est.p_hat
            ),
        )?;
    }

    // Greedy k-dag reduction replay.
    {
        let seeds = budget(100, 3);
        let n = 10_000u64;
        let mut total = 0u64;
        for k in [1u32, 2, 3, 5] {
            total += reduction_check(n, k, seed, seeds)?;
        }
        log.report(
            total == 0,
            "kdag-reduction",
            &format!("n {n}, k in {{1,2,3,5}}, {seeds} seeds each: {total} mismatches"),
        )?;
    }

    let all_ok = log.all_ok;
    writeln!(
        out,
        "{}",
        if all_ok {
            "verification passed"
        } else {
            "verification FAILED"
        }
    )?;
    out.flush()?;
    Ok(all_ok)
}
