//! Numerical Legendre dual `Λ*(z) = sup_λ {λz - Λ(λ)}` and `Ψ(c) = c·Λ*(-1/c)`.
//!
//! `Λ` is convex, so the objective `λ ↦ λz - Λ(λ)` is concave and the
//! supremum is found by geometric bracket expansion followed by golden-section
//! search — no derivatives needed. The search side follows the sign of
//! `z + μ`: for `z ≥ -μ` the supremum lives on `λ ≥ 0`, otherwise on the
//! negative part of the finite domain of `Λ`. Laws with an atom at zero use
//! the `λ ≥ 0` region with the boundary value `-log(1 - p)` at `λ = 0`.
//!
//! `+∞` is an ordinary value here: `Λ*(z) = +∞` for `z ≥ 0`, for `z` outside
//! the reachable range of `log X`, and for point masses off their support.

use crate::distributions::{AttachmentLaw, MomentSummary};

#[derive(Debug, thiserror::Error)]
pub enum RateError {
    #[error("no sign change for the stationarity equation in ({lo}, {hi})")]
    NoRootInBracket { lo: f64, hi: f64 },
}

/// Default golden-section tolerance on λ.
pub const SUP_TOLERANCE: f64 = 1e-10;
/// Default bracket-expansion limit on |λ|.
pub const LAMBDA_CAP: f64 = 1e8;

/// Outcome of one dual evaluation, with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DualEval {
    pub value: f64,
    /// Maximizing λ when an interior/boundary maximum was located.
    pub argmax: Option<f64>,
    /// The bracket expansion hit `lambda_cap` while still improving slowly;
    /// `value` is a lower estimate of the true supremum.
    pub capped: bool,
    /// The objective kept growing steeply at the cap: reported as `+∞`.
    pub unbounded: bool,
}

impl DualEval {
    fn infinite() -> Self {
        DualEval {
            value: f64::INFINITY,
            argmax: None,
            capped: false,
            unbounded: true,
        }
    }
}

/// Evaluator for `Λ`, `Λ*` and `Ψ` attached to one law.
///
/// Pure and stateless after construction; shareable across threads.
#[derive(Debug, Clone)]
pub struct RateEvaluator {
    law: AttachmentLaw,
    moments: MomentSummary,
    lambda_floor: f64,
    pub sup_tolerance: f64,
    pub lambda_cap: f64,
}

impl RateEvaluator {
    pub fn new(law: AttachmentLaw) -> Self {
        let moments = law.neg_log_moments();
        let lambda_floor = law.lambda_floor();
        RateEvaluator {
            law,
            moments,
            lambda_floor,
            sup_tolerance: SUP_TOLERANCE,
            lambda_cap: LAMBDA_CAP,
        }
    }

    pub fn law(&self) -> &AttachmentLaw {
        &self.law
    }

    pub fn moments(&self) -> MomentSummary {
        self.moments
    }

    /// `Λ(λ)` of the underlying law.
    pub fn cumulant(&self, lambda: f64) -> f64 {
        self.law.cumulant(lambda)
    }

    /// `Λ*(z)`, scalar form. See [`Self::legendre_dual_detailed`].
    pub fn legendre_dual(&self, z: f64) -> f64 {
        self.legendre_dual_detailed(z).value
    }

    /// `Λ*(z)` with diagnostics.
    ///
    /// Intended for `z < 0` (callers pass `z = -1/c`); `z ≥ 0` is answered
    /// with `+∞`, which is the correct value for laws supported in `[0, 1)`.
    pub fn legendre_dual_detailed(&self, z: f64) -> DualEval {
        if z >= 0.0 {
            return DualEval::infinite();
        }
        let objective = |lambda: f64| {
            let c = self.law.cumulant(lambda);
            if c == f64::NEG_INFINITY {
                // E[X^λ] = 0 (single mass at zero): the supremum is +∞.
                f64::INFINITY
            } else {
                lambda * z - c
            }
        };
        let mu = self.moments.mu;
        if mu.is_infinite() || z >= -mu {
            self.maximize_expanding(&objective, 1.0)
        } else if self.lambda_floor.is_infinite() {
            self.maximize_expanding(&objective, -1.0)
        } else {
            // Finite left domain endpoint a: the search covers (a, 0] and
            // probes the one-sided limit at the endpoint itself.
            let edge = self.lambda_floor + self.lambda_floor.abs().max(1.0) * 1e-14;
            let (x, v) = golden_max(&objective, edge, 0.0, self.sup_tolerance);
            DualEval {
                value: v.max(0.0),
                argmax: Some(x),
                capped: false,
                unbounded: false,
            }
        }
    }

    /// Bracket the concave objective by geometric expansion from `direction`
    /// (±1), then golden-section inside the bracket.
    fn maximize_expanding(&self, objective: &dyn Fn(f64) -> f64, direction: f64) -> DualEval {
        let mut prev_x = 0.0;
        let mut prev_v = objective(0.0);
        if prev_v == f64::INFINITY {
            return DualEval::infinite();
        }
        let mut x = direction;
        let mut best = (prev_x, prev_v);
        let mut increments = [f64::INFINITY; 3];
        loop {
            let v = objective(x);
            if v == f64::INFINITY {
                return DualEval::infinite();
            }
            if v > best.1 {
                best = (x, v);
            }
            increments.rotate_left(1);
            increments[2] = v - prev_v;
            if v < prev_v {
                // bracket found: the maximum lies in [prev_x/2 .. x] (resp.
                // mirrored); golden-section over the whole probed span.
                let (lo, hi) = if direction > 0.0 { (0.0, x) } else { (x, 0.0) };
                let (xm, vm) = golden_max(objective, lo, hi, self.sup_tolerance);
                let (xb, vb) = if vm >= best.1 { (xm, vm) } else { best };
                return DualEval {
                    value: vb.max(0.0),
                    argmax: Some(xb),
                    capped: false,
                    unbounded: false,
                };
            }
            if x.abs() >= self.lambda_cap {
                let steep = increments.iter().all(|&d| d > self.sup_tolerance);
                return if steep {
                    DualEval::infinite()
                } else {
                    DualEval {
                        value: best.1.max(0.0),
                        argmax: Some(best.0),
                        capped: true,
                        unbounded: false,
                    }
                };
            }
            prev_x = x;
            prev_v = v;
            let _ = prev_x;
            x *= 2.0;
        }
    }

    /// `Ψ(c) = c · Λ*(-1/c)` for `c > 0`.
    pub fn psi(&self, c: f64) -> f64 {
        assert!(c > 0.0, "psi requires c > 0, got {c}");
        let dual = self.legendre_dual(-1.0 / c);
        if dual.is_infinite() {
            f64::INFINITY
        } else {
            c * dual
        }
    }

    /// `Λ*_truncated(z) - Λ*(z)` for a pair produced by
    /// [`AttachmentLaw::truncate_bounded`]. Nonnegative up to solver
    /// tolerance; shrinks as the density cap grows.
    pub fn rate_gap(&self, truncated: &RateEvaluator, z: f64) -> f64 {
        truncated.legendre_dual(z) - self.legendre_dual(z)
    }
}

/// Golden-section maximization of a concave function on `[a, b]`.
/// Returns the best probed point (endpoints included).
fn golden_max(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f(a) >= f(b) { (a, f(a)) } else { (b, f(b)) };
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Solves `z + Σ_{i=1..k} 1/(λ + i) = 0` for `λ > -1` by bisection.
///
/// This is the stationarity condition of `λ ↦ λz + Σ log(1 + λ/i)`, so the
/// root is the maximizer behind the closed-form rate function of the min of
/// `k` uniforms. The left side is strictly decreasing on `(-1, ∞)`, from
/// `+∞` down to `z < 0`, so the root exists and is unique.
pub fn lambda_star_k_root(k: u32, z: f64) -> Result<f64, RateError> {
    assert!(z < 0.0, "lambda_star_k_root requires z < 0, got {z}");
    let g = |lam: f64| z + (1..=k).map(|i| 1.0 / (lam + i as f64)).sum::<f64>();
    let mut lo = -0.5;
    while g(lo) <= 0.0 {
        lo = -1.0 + 0.5 * (lo + 1.0);
        if lo + 1.0 < 1e-300 {
            return Err(RateError::NoRootInBracket { lo: -1.0, hi: lo });
        }
    }
    let mut hi = 1.0;
    while g(hi) >= 0.0 {
        hi *= 2.0;
        if hi > LAMBDA_CAP {
            return Err(RateError::NoRootInBracket { lo, hi });
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form rate function for the max of `k` uniforms:
/// `Λ*(z) = -1 - kz - log(-kz)` for `z < 0`.
pub fn max_order_rate(k: u32, z: f64) -> f64 {
    assert!(z < 0.0);
    let kf = k as f64;
    -1.0 - kf * z - (-kf * z).ln()
}

/// Closed-form rate function for the min of `k` uniforms, assembled from
/// [`lambda_star_k_root`]: `Λ*(z) = λ* z + Σ log(1 + λ*/i)`.
pub fn min_order_rate(k: u32, z: f64) -> f64 {
    let lam = lambda_star_k_root(k, z).expect("root exists for z < 0");
    lam * z + (1..=k).map(|i| (1.0 + lam / i as f64).ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::AttachmentLaw;

    fn ev(spec: &str) -> RateEvaluator {
        RateEvaluator::new(AttachmentLaw::parse(spec).unwrap())
    }

    #[test]
    fn dual_vanishes_at_minus_mu() {
        for spec in ["uniform", "max:3", "min:4", "pow:2", "pow:0.5"] {
            let e = ev(spec);
            let mu = e.moments().mu;
            let v = e.legendre_dual(-mu);
            assert!(v.abs() <= 1e-8, "{spec}: dual(-mu) = {v}");
        }
    }

    #[test]
    fn dual_matches_max_order_closed_form_at_spot_values() {
        let e = ev("max:2");
        // z = -1/(2k) with k = 2: Λ* = -1/2 + log 2
        let want = -0.5 + 2.0f64.ln();
        assert!((e.legendre_dual(-0.25) - want).abs() < 1e-9);
        for z in [-2.0, -0.7, -0.5, -0.2, -0.09] {
            let diff = (e.legendre_dual(z) - max_order_rate(2, z)).abs();
            assert!(diff < 1e-9, "z = {z}: diff = {diff}");
        }
    }

    #[test]
    fn dual_is_infinite_for_nonnegative_z() {
        let e = ev("uniform");
        assert!(e.legendre_dual(0.0).is_infinite());
        assert!(e.legendre_dual(0.5).is_infinite());
    }

    #[test]
    fn point_mass_dual_is_zero_on_support_infinite_off_it() {
        let e = ev("const:0.5");
        let on = e.legendre_dual(0.5f64.ln());
        assert!(on.abs() < 1e-9, "on-support value {on}");
        let d = e.legendre_dual_detailed(-0.2);
        assert!(d.value.is_infinite() && d.unbounded);
        assert!(e.legendre_dual(-2.0).is_infinite());
    }

    #[test]
    fn atom_mixture_dual_shifts_the_base_dual() {
        let base = ev("uniform");
        for p in [0.1, 0.25, 0.5] {
            let mix = RateEvaluator::new(
                AttachmentLaw::atom_mixture(p, AttachmentLaw::uniform()).unwrap(),
            );
            let shift = -(1.0 - p).ln();
            for z in [-1.0, -0.8, -0.5, -0.2] {
                // z >= -mu_base = -1: dual = base dual + shift
                let diff = (mix.legendre_dual(z) - base.legendre_dual(z) - shift).abs();
                assert!(diff < 1e-8, "p {p} z {z}: diff {diff}");
            }
            // below the base mean the supremum sits at λ = 0
            let low = mix.legendre_dual(-3.0);
            assert!((low - shift).abs() < 1e-9, "low-z value {low}");
        }
    }

    #[test]
    fn psi_closed_form_values() {
        let e = ev("uniform");
        assert!((e.psi(std::f64::consts::E) - 1.0).abs() < 1e-9);
        assert!(e.psi(1.0).abs() < 1e-8); // c = 1/mu
        let e2 = ev("max:2");
        assert!((e2.psi(4.3111) - 1.0).abs() < 5e-4);
    }

    #[test]
    fn lambda_star_root_small_cases() {
        assert!(lambda_star_k_root(1, -1.0).unwrap().abs() < 1e-11);
        assert!((lambda_star_k_root(1, -2.0).unwrap() + 0.5).abs() < 1e-11);
    }

    #[test]
    fn min_order_closed_form_hits_table_value() {
        // Ψ(c) assembled from the root equation at the k = 2 crossing point
        let c = 1.6738;
        let psi = c * min_order_rate(2, -1.0 / c);
        assert!((psi - 1.0).abs() < 5e-4, "psi = {psi}");
    }

    #[test]
    fn rate_gap_examples() {
        // zero-atom truncation: identical laws, gap 0
        let u = ev("uniform");
        let ut = RateEvaluator::new(u.law().truncate_bounded(2.0).unwrap());
        assert!(u.rate_gap(&ut, -1.0).abs() < 1e-10);

        // pow:2 with cap 50 at z = -mu: gap in [0, -log(1 - sqrt(p e^{Λ*(z)}))]
        let p2 = ev("pow:2");
        let z = -2.0;
        let t = RateEvaluator::new(p2.law().truncate_bounded(50.0).unwrap());
        let p = t.law().atom_mass();
        let gap = p2.rate_gap(&t, z);
        let bound = -(1.0 - (p * p2.legendre_dual(z).exp()).sqrt()).ln();
        assert!(gap >= -1e-10, "gap = {gap}");
        assert!(gap <= bound + 1e-8, "gap = {gap}, bound = {bound}");

        // gap is nonincreasing in the cap
        let gaps: Vec<f64> = [5.0, 50.0, 500.0]
            .iter()
            .map(|&b| p2.rate_gap(&RateEvaluator::new(p2.law().truncate_bounded(b).unwrap()), z))
            .collect();
        assert!(gaps[0] >= gaps[1] && gaps[1] >= gaps[2], "{gaps:?}");
    }

    #[test]
    fn evaluations_are_bitwise_reproducible() {
        let e = ev("min:3");
        for z in [-3.0, -1.7, -0.9, -0.33] {
            assert_eq!(e.legendre_dual(z).to_bits(), e.legendre_dual(z).to_bits());
        }
    }
}
