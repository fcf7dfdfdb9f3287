//! Attachment laws on `[0, 1)` with samplers and log-moment closed forms.
//!
//! An attachment law is the distribution of the multiplier `X` in the parent
//! rule `parent(i) = floor(i * X_i)`. Everything downstream — the cumulant
//! `Λ(λ) = log E[X^λ]`, its Legendre dual, and the depth constants — is
//! driven by the law objects defined here.
//!
//! Supported laws and their spec strings:
//!
//! | spec              | law                                   |
//! |-------------------|---------------------------------------|
//! | `uniform`         | uniform on `[0, 1)`                   |
//! | `max:k`           | max of `k` independent uniforms       |
//! | `min:k`           | min of `k` independent uniforms       |
//! | `pow:beta`        | `U^beta`                              |
//! | `const:theta`     | point mass at `theta ∈ (0, 1)`        |
//! | `atom:p+<base>`   | mass `p` at `0`, rest from `<base>`   |
//! | `table:<path.csv>`| piecewise-linear density from a table |

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::stream::RandomStream;

/// Errors from law construction, parsing and truncation.
#[derive(Debug, thiserror::Error)]
pub enum LawError {
    #[error("unrecognized law spec token `{token}`: {reason}")]
    Parse { token: String, reason: String },
    #[error("invalid law parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid truncation: P{{f(X) > {cap}}} = 1, no mass left")]
    InvalidTruncation { cap: f64 },
    #[error("law `{0}` has no explicit density to truncate")]
    NoDensity(String),
    #[error("failed to read density table `{path}`: {source}")]
    TableIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad density table `{path}` line {line}: {reason}")]
    TableFormat {
        path: String,
        line: usize,
        reason: String,
    },
}

/// `μ = E[-log X]` and `σ² = Var(-log X)`, both possibly `+∞`.
///
/// An atom at `0` forces `μ = σ² = +∞`. For min-of-`k` laws the harmonic
/// sums `h_k = Σ 1/i` and `h_k⁽²⁾ = Σ 1/i²` are cached alongside.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MomentSummary {
    pub mu: f64,
    pub sigma2: f64,
    pub harmonic: Option<(f64, f64)>,
}

impl MomentSummary {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

pub fn harmonic(k: u32) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

pub fn harmonic2(k: u32) -> f64 {
    (1..=k).map(|i| 1.0 / (i as f64 * i as f64)).sum()
}

// ---------------------------------------------------------------------------
// Piecewise-linear densities
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, serde::Serialize)]
struct Segment {
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
}

impl Segment {
    /// Density as `c + d·x` on `[a, b]`.
    fn linear_coeffs(&self) -> (f64, f64) {
        let d = (self.fb - self.fa) / (self.b - self.a);
        (self.fa - d * self.a, d)
    }

    fn mass(&self) -> f64 {
        0.5 * (self.fa + self.fb) * (self.b - self.a)
    }
}

/// A piecewise-linear density on a sub-interval of `[0, 1)`.
///
/// Built from `(x, density)` breakpoints, trapezoid-normalized to total mass
/// one. Restrictions (from density-cap truncation) may carve the support into
/// disjoint segments with total mass below one; such restricted objects are
/// only used for moment integrals, never sampled directly.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TabulatedDensity {
    segs: Vec<Segment>,
    /// Cumulative mass before each segment.
    cum: Vec<f64>,
    total: f64,
    label: String,
}

/// `∫_a^b x^κ dx`, with the `κ = -1` log form. Assumes the domain checks
/// (`a > 0` when `κ ≤ -1`) were done by the caller.
fn power_primitive(kappa: f64, a: f64, b: f64) -> f64 {
    if (kappa + 1.0).abs() < 1e-12 {
        (b / a).ln()
    } else {
        (b.powf(kappa + 1.0) - a.powf(kappa + 1.0)) / (kappa + 1.0)
    }
}

// Antiderivatives used by the log-moment integrals; all vanish at 0.
fn i_neg_log(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x - x * x.ln()
    }
}
fn i_x_neg_log(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        0.25 * x * x - 0.5 * x * x * x.ln()
    }
}
fn i_log_sq(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        let l = x.ln();
        x * (l * l - 2.0 * l + 2.0)
    }
}
fn i_x_log_sq(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        let l = x.ln();
        0.5 * x * x * l * l - 0.5 * x * x * l + 0.25 * x * x
    }
}

impl TabulatedDensity {
    /// Build from `(x, density)` breakpoints; normalizes the trapezoid mass
    /// to one.
    pub fn from_points(points: &[(f64, f64)], label: impl Into<String>) -> Result<Self, LawError> {
        let label = label.into();
        if points.len() < 2 {
            return Err(LawError::InvalidParameter(format!(
                "density table `{label}` needs at least 2 points"
            )));
        }
        for (i, &(x, f)) in points.iter().enumerate() {
            if !x.is_finite() || !f.is_finite() || f < 0.0 {
                return Err(LawError::InvalidParameter(format!(
                    "density table `{label}` point {i}: values must be finite with density >= 0"
                )));
            }
            if !(0.0..1.0).contains(&x) {
                return Err(LawError::InvalidParameter(format!(
                    "density table `{label}` point {i}: x = {x} outside [0, 1)"
                )));
            }
            if i > 0 && x <= points[i - 1].0 {
                return Err(LawError::InvalidParameter(format!(
                    "density table `{label}` point {i}: breakpoints must be strictly increasing"
                )));
            }
        }
        let raw: f64 = points
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        if !(raw > 0.0) {
            return Err(LawError::InvalidParameter(format!(
                "density table `{label}` has zero total mass"
            )));
        }
        let segs: Vec<Segment> = points
            .windows(2)
            .map(|w| Segment {
                a: w[0].0,
                b: w[1].0,
                fa: w[0].1 / raw,
                fb: w[1].1 / raw,
            })
            .collect();
        Ok(Self::from_segments(segs, label))
    }

    fn from_segments(segs: Vec<Segment>, label: String) -> Self {
        let mut cum = Vec::with_capacity(segs.len());
        let mut acc = 0.0;
        for s in &segs {
            cum.push(acc);
            acc += s.mass();
        }
        TabulatedDensity {
            segs,
            cum,
            total: acc,
            label,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn support_min(&self) -> f64 {
        self.segs.first().map_or(0.0, |s| s.a)
    }

    pub fn support_max(&self) -> f64 {
        self.segs.last().map_or(0.0, |s| s.b)
    }

    pub fn density(&self, x: f64) -> f64 {
        // Last segment with a <= x; segments are disjoint and sorted.
        let idx = self.segs.partition_point(|s| s.a <= x);
        if idx == 0 {
            return 0.0;
        }
        let s = &self.segs[idx - 1];
        if x > s.b {
            0.0
        } else {
            s.fa + (s.fb - s.fa) * (x - s.a) / (s.b - s.a)
        }
    }

    /// Inverse CDF for `u ∈ [0, 1)`; only meaningful for contiguous
    /// (unrestricted) densities.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u * self.total;
        let idx = self.cum.partition_point(|&c| c <= target).saturating_sub(1);
        let s = &self.segs[idx];
        let r = (target - self.cum[idx]).max(0.0);
        let slope = (s.fb - s.fa) / (s.b - s.a);
        let span = if r == 0.0 {
            0.0
        } else if slope.abs() < 1e-300 {
            r / s.fa
        } else {
            let disc = (s.fa * s.fa + 2.0 * slope * r).max(0.0);
            // stable quadratic root: 2r / (fa + sqrt(disc))
            let denom = s.fa + disc.sqrt();
            if denom > 0.0 {
                2.0 * r / denom
            } else {
                (2.0 * r / slope.abs()).sqrt()
            }
        };
        (s.a + span).min(s.b)
    }

    /// `∫ x^λ f(x) dx` over the represented segments.
    pub fn power_moment(&self, lambda: f64) -> f64 {
        self.segs
            .iter()
            .map(|s| {
                let (c, d) = s.linear_coeffs();
                let mut v = 0.0;
                if c != 0.0 {
                    v += c * power_primitive(lambda, s.a, s.b);
                }
                if d != 0.0 {
                    v += d * power_primitive(lambda + 1.0, s.a, s.b);
                }
                v
            })
            .sum()
    }

    /// `∫ (-log x) f(x) dx`.
    pub fn neg_log_moment(&self) -> f64 {
        self.segs
            .iter()
            .map(|s| {
                let (c, d) = s.linear_coeffs();
                c * (i_neg_log(s.b) - i_neg_log(s.a)) + d * (i_x_neg_log(s.b) - i_x_neg_log(s.a))
            })
            .sum()
    }

    /// `∫ (log x)² f(x) dx`.
    pub fn log_sq_moment(&self) -> f64 {
        self.segs
            .iter()
            .map(|s| {
                let (c, d) = s.linear_coeffs();
                c * (i_log_sq(s.b) - i_log_sq(s.a)) + d * (i_x_log_sq(s.b) - i_x_log_sq(s.a))
            })
            .sum()
    }

    /// Left edge of the finite domain of `λ ↦ ∫ x^λ f dx` (open).
    fn lambda_floor(&self) -> f64 {
        if self.support_min() > 0.0 {
            f64::NEG_INFINITY
        } else if self.segs[0].fa > 0.0 {
            -1.0
        } else {
            -2.0
        }
    }

    /// Split segments at the `f = cap` crossings and keep `{f <= cap}`.
    /// Returns `(removed mass, kept density)`.
    fn restrict_below(&self, cap: f64) -> (f64, TabulatedDensity) {
        let mut kept = Vec::new();
        for s in &self.segs {
            let (lo_f, hi_f) = (s.fa.min(s.fb), s.fa.max(s.fb));
            if hi_f <= cap {
                kept.push(*s);
            } else if lo_f > cap {
                // drop whole segment
            } else {
                let x_cross = s.a + (cap - s.fa) / (s.fb - s.fa) * (s.b - s.a);
                if s.fa <= cap {
                    kept.push(Segment {
                        a: s.a,
                        b: x_cross,
                        fa: s.fa,
                        fb: cap,
                    });
                } else {
                    kept.push(Segment {
                        a: x_cross,
                        b: s.b,
                        fa: cap,
                        fb: s.fb,
                    });
                }
            }
        }
        let restricted =
            TabulatedDensity::from_segments(kept, format!("{}|f<={}", self.label, cap));
        (self.total - restricted.total, restricted)
    }
}

// ---------------------------------------------------------------------------
// Attachment laws
// ---------------------------------------------------------------------------

/// How the mass kept by a density-cap truncation is described.
#[derive(Debug, Clone)]
pub enum KeptRegion {
    /// `{f <= cap}` is a single interval of the source support.
    Interval { lo: f64, hi: f64 },
    /// Piecewise-linear remainder (tabulated sources).
    Segments(Arc<TabulatedDensity>),
}

#[derive(Debug, Clone)]
pub enum LawKind {
    Uniform,
    MaxOrder { k: u32 },
    MinOrder { k: u32 },
    Power { beta: f64 },
    Constant { theta: f64 },
    AtomMixture { atom_mass: f64, base: Box<AttachmentLaw> },
    Tabulated { density: Arc<TabulatedDensity> },
    /// Result of [`AttachmentLaw::truncate_bounded`]: distributed as an atom
    /// mixture with mass `atom_mass` at zero and base `source | f <= cap`,
    /// but *sampled* by drawing from the source and zeroing the draw whenever
    /// the source density exceeds the cap. With a shared stream this makes the
    /// truncated draw pointwise `<=` the source draw.
    Truncated {
        source: Box<AttachmentLaw>,
        cap: f64,
        atom_mass: f64,
        kept: KeptRegion,
    },
}

/// An attachment distribution on `[0, 1)`.
///
/// Immutable after construction and cheap to clone; safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct AttachmentLaw {
    kind: LawKind,
}

impl AttachmentLaw {
    pub fn uniform() -> Self {
        AttachmentLaw {
            kind: LawKind::Uniform,
        }
    }

    /// Law of `max(U_1, ..., U_k)`.
    pub fn max_order(k: u32) -> Result<Self, LawError> {
        if k == 0 {
            return Err(LawError::InvalidParameter("max:k requires k >= 1".into()));
        }
        Ok(AttachmentLaw {
            kind: LawKind::MaxOrder { k },
        })
    }

    /// Law of `min(U_1, ..., U_k)`.
    pub fn min_order(k: u32) -> Result<Self, LawError> {
        if k == 0 {
            return Err(LawError::InvalidParameter("min:k requires k >= 1".into()));
        }
        Ok(AttachmentLaw {
            kind: LawKind::MinOrder { k },
        })
    }

    /// Law of `U^beta`.
    pub fn power(beta: f64) -> Result<Self, LawError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(LawError::InvalidParameter(format!(
                "pow:beta requires beta > 0, got {beta}"
            )));
        }
        Ok(AttachmentLaw {
            kind: LawKind::Power { beta },
        })
    }

    /// Point mass at `theta ∈ (0, 1)`.
    pub fn constant(theta: f64) -> Result<Self, LawError> {
        if !(theta.is_finite() && theta > 0.0 && theta < 1.0) {
            return Err(LawError::InvalidParameter(format!(
                "const:theta requires theta in (0, 1), got {theta}"
            )));
        }
        Ok(AttachmentLaw {
            kind: LawKind::Constant { theta },
        })
    }

    /// Mass `p` at `0`, rest drawn from `base`. One atom level only: the base
    /// may not itself carry an atom.
    pub fn atom_mixture(p: f64, base: AttachmentLaw) -> Result<Self, LawError> {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(LawError::InvalidParameter(format!(
                "atom:p requires p in [0, 1], got {p}"
            )));
        }
        if base.atom_mass() > 0.0 || matches!(base.kind, LawKind::AtomMixture { .. }) {
            return Err(LawError::InvalidParameter(
                "atom mixtures cannot be nested".into(),
            ));
        }
        Ok(AttachmentLaw {
            kind: LawKind::AtomMixture {
                atom_mass: p,
                base: Box::new(base),
            },
        })
    }

    pub fn tabulated(density: TabulatedDensity) -> Self {
        AttachmentLaw {
            kind: LawKind::Tabulated {
                density: Arc::new(density),
            },
        }
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    /// Parse the law mini-language (see module docs). Relative table paths
    /// resolve against the current directory.
    pub fn parse(spec: &str) -> Result<Self, LawError> {
        let spec = spec.trim();
        if spec == "uniform" {
            return Ok(Self::uniform());
        }
        if let Some(v) = spec.strip_prefix("max:") {
            return Self::max_order(parse_int(v, spec)?);
        }
        if let Some(v) = spec.strip_prefix("min:") {
            return Self::min_order(parse_int(v, spec)?);
        }
        if let Some(v) = spec.strip_prefix("pow:") {
            return Self::power(parse_real(v, spec)?);
        }
        if let Some(v) = spec.strip_prefix("const:") {
            return Self::constant(parse_real(v, spec)?);
        }
        if let Some(v) = spec.strip_prefix("atom:") {
            let (p_str, base_str) = v.split_once('+').ok_or_else(|| LawError::Parse {
                token: spec.to_string(),
                reason: "expected `atom:p+<base>`".into(),
            })?;
            let p = parse_real(p_str, spec)?;
            let base = Self::parse(base_str)?;
            return Self::atom_mixture(p, base);
        }
        if let Some(path) = spec.strip_prefix("table:") {
            return Self::tabulated(load_density_table(Path::new(path))?).validate();
        }
        Err(LawError::Parse {
            token: spec.to_string(),
            reason: "expected one of uniform | max:k | min:k | pow:beta | const:theta | \
                     atom:p+<base> | table:<path.csv>"
                .into(),
        })
    }

    fn validate(self) -> Result<Self, LawError> {
        Ok(self)
    }

    /// Number of underlying uniforms one draw consumes. Multi-uniform laws
    /// consume their uniforms in index order, which is what the k-dag
    /// coupling relies on.
    pub fn draw_width(&self) -> u64 {
        match &self.kind {
            LawKind::Uniform
            | LawKind::Power { .. }
            | LawKind::Constant { .. }
            | LawKind::Tabulated { .. } => 1,
            LawKind::MaxOrder { k } | LawKind::MinOrder { k } => *k as u64,
            LawKind::AtomMixture { base, .. } => 1 + base.draw_width(),
            LawKind::Truncated { source, .. } => source.draw_width(),
        }
    }

    /// One draw addressed at `base_index` (pure; does not move any cursor).
    pub fn sample_at(&self, stream: &RandomStream, base_index: u64) -> f64 {
        match &self.kind {
            LawKind::Uniform => stream.uniform_at(base_index),
            LawKind::MaxOrder { k } => {
                let mut m = 0.0f64;
                for j in 0..*k as u64 {
                    m = m.max(stream.uniform_at(base_index + j));
                }
                m
            }
            LawKind::MinOrder { k } => {
                let mut m = 1.0f64;
                for j in 0..*k as u64 {
                    m = m.min(stream.uniform_at(base_index + j));
                }
                m
            }
            LawKind::Power { beta } => {
                let u = stream.uniform_at(base_index);
                if *beta == 1.0 {
                    u
                } else {
                    u.powf(*beta)
                }
            }
            LawKind::Constant { theta } => *theta,
            LawKind::AtomMixture { atom_mass, base } => {
                if stream.uniform_at(base_index) < *atom_mass {
                    0.0
                } else {
                    base.sample_at(stream, base_index + 1)
                }
            }
            LawKind::Tabulated { density } => density.quantile(stream.uniform_at(base_index)),
            LawKind::Truncated { source, cap, .. } => {
                let x = source.sample_at(stream, base_index);
                match source.density(x) {
                    Some(f) if f > *cap => 0.0,
                    _ => x,
                }
            }
        }
    }

    /// One draw at the stream cursor; advances the cursor by `draw_width`.
    pub fn sample(&self, stream: &mut RandomStream) -> f64 {
        let x = self.sample_at(stream, stream.cursor());
        stream.skip(self.draw_width());
        x
    }

    /// Density at `x`, when the law has one (`None` for point masses and
    /// atom-carrying laws).
    pub fn density(&self, x: f64) -> Option<f64> {
        if !(0.0..1.0).contains(&x) {
            return self.density_kind_supported().then_some(0.0);
        }
        match &self.kind {
            LawKind::Uniform => Some(1.0),
            LawKind::MaxOrder { k } => Some(*k as f64 * x.powi(*k as i32 - 1)),
            LawKind::MinOrder { k } => Some(*k as f64 * (1.0 - x).powi(*k as i32 - 1)),
            LawKind::Power { beta } => Some(x.powf(1.0 / beta - 1.0) / beta),
            LawKind::Tabulated { density } => Some(density.density(x)),
            _ => None,
        }
    }

    fn density_kind_supported(&self) -> bool {
        matches!(
            self.kind,
            LawKind::Uniform
                | LawKind::MaxOrder { .. }
                | LawKind::MinOrder { .. }
                | LawKind::Power { .. }
                | LawKind::Tabulated { .. }
        )
    }

    /// Mass at zero (`0` for all atom-free laws).
    pub fn atom_mass(&self) -> f64 {
        match &self.kind {
            LawKind::AtomMixture { atom_mass, .. } | LawKind::Truncated { atom_mass, .. } => {
                *atom_mass
            }
            _ => 0.0,
        }
    }

    pub fn is_point_mass(&self) -> bool {
        match &self.kind {
            LawKind::Constant { .. } => true,
            LawKind::AtomMixture { atom_mass, .. } => *atom_mass >= 1.0,
            _ => false,
        }
    }

    /// `μ = E[-log X]`, `σ² = Var(-log X)` by closed form (exact piecewise
    /// integration for tabulated laws).
    pub fn neg_log_moments(&self) -> MomentSummary {
        match &self.kind {
            LawKind::Uniform => MomentSummary {
                mu: 1.0,
                sigma2: 1.0,
                harmonic: None,
            },
            LawKind::MaxOrder { k } => {
                let kf = *k as f64;
                MomentSummary {
                    mu: 1.0 / kf,
                    sigma2: 1.0 / (kf * kf),
                    harmonic: None,
                }
            }
            LawKind::MinOrder { k } => MomentSummary {
                mu: harmonic(*k),
                sigma2: harmonic2(*k),
                harmonic: Some((harmonic(*k), harmonic2(*k))),
            },
            LawKind::Power { beta } => MomentSummary {
                mu: *beta,
                sigma2: beta * beta,
                harmonic: None,
            },
            LawKind::Constant { theta } => MomentSummary {
                mu: -theta.ln(),
                sigma2: 0.0,
                harmonic: None,
            },
            LawKind::AtomMixture { atom_mass, base } => {
                if *atom_mass > 0.0 {
                    MomentSummary {
                        mu: f64::INFINITY,
                        sigma2: f64::INFINITY,
                        harmonic: None,
                    }
                } else {
                    base.neg_log_moments()
                }
            }
            LawKind::Tabulated { density } => {
                let m1 = density.neg_log_moment() / density.total_mass();
                let m2 = density.log_sq_moment() / density.total_mass();
                MomentSummary {
                    mu: m1,
                    sigma2: (m2 - m1 * m1).max(0.0),
                    harmonic: None,
                }
            }
            LawKind::Truncated {
                atom_mass, source, ..
            } => {
                if *atom_mass > 0.0 {
                    MomentSummary {
                        mu: f64::INFINITY,
                        sigma2: f64::INFINITY,
                        harmonic: None,
                    }
                } else {
                    source.neg_log_moments()
                }
            }
        }
    }

    /// Cumulant generating function of `log X`: `Λ(λ) = log E[X^λ]`.
    ///
    /// Returns `+∞` off the finite domain instead of trapping. For laws with
    /// an atom at zero the value at `λ = 0` is `log(1 - p)` — the extension
    /// that keeps `λ ↦ λz - Λ(λ)` continuous at the boundary of the dual's
    /// search region.
    pub fn cumulant(&self, lambda: f64) -> f64 {
        match &self.kind {
            LawKind::Uniform => {
                if lambda > -1.0 {
                    -(1.0 + lambda).ln()
                } else {
                    f64::INFINITY
                }
            }
            LawKind::MaxOrder { k } => {
                let kf = *k as f64;
                if lambda > -kf {
                    -(1.0 + lambda / kf).ln()
                } else {
                    f64::INFINITY
                }
            }
            LawKind::MinOrder { k } => {
                if lambda > -1.0 {
                    -(1..=*k).map(|i| (1.0 + lambda / i as f64).ln()).sum::<f64>()
                } else {
                    f64::INFINITY
                }
            }
            LawKind::Power { beta } => {
                if lambda > -1.0 / beta {
                    -(1.0 + beta * lambda).ln()
                } else {
                    f64::INFINITY
                }
            }
            LawKind::Constant { theta } => lambda * theta.ln(),
            LawKind::AtomMixture { atom_mass, base } => {
                let p = *atom_mass;
                if p == 0.0 {
                    base.cumulant(lambda)
                } else if p >= 1.0 {
                    // X ≡ 0: E[X^λ] is 0 for λ > 0 and the λ = 0 extension
                    // below gives log(0) = -∞ mass bookkeeping.
                    if lambda > 0.0 {
                        f64::NEG_INFINITY
                    } else if lambda == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    }
                } else if lambda > 0.0 {
                    (1.0 - p).ln() + base.cumulant(lambda)
                } else if lambda == 0.0 {
                    (1.0 - p).ln()
                } else {
                    f64::INFINITY
                }
            }
            LawKind::Tabulated { density } => {
                if lambda > density.lambda_floor() {
                    (density.power_moment(lambda) / density.total_mass()).ln()
                } else {
                    f64::INFINITY
                }
            }
            LawKind::Truncated {
                source,
                atom_mass,
                kept,
                ..
            } => {
                if lambda > 0.0 {
                    restricted_power_moment(source, kept, lambda).ln()
                } else if lambda == 0.0 {
                    (1.0 - atom_mass).ln()
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Open left endpoint of `{λ : Λ(λ) < ∞}` (the right side is always
    /// unbounded since `X < 1`).
    pub fn lambda_floor(&self) -> f64 {
        match &self.kind {
            LawKind::Uniform | LawKind::MinOrder { .. } => -1.0,
            LawKind::MaxOrder { k } => -(*k as f64),
            LawKind::Power { beta } => -1.0 / beta,
            LawKind::Constant { .. } => f64::NEG_INFINITY,
            LawKind::AtomMixture { atom_mass, base } => {
                if *atom_mass > 0.0 {
                    0.0
                } else {
                    base.lambda_floor()
                }
            }
            LawKind::Tabulated { density } => density.lambda_floor(),
            LawKind::Truncated { .. } => 0.0,
        }
    }

    /// Zero out the draws where the density exceeds `cap` (an atom appears at
    /// zero in exchange for a bounded density elsewhere).
    ///
    /// The result is distributed as an atom mixture with mass
    /// `p = P{f(X) > cap}` at zero and base `X | f(X) <= cap`; when driven by
    /// a shared stream its draws are pointwise dominated by the source draws.
    pub fn truncate_bounded(&self, cap: f64) -> Result<AttachmentLaw, LawError> {
        if cap.is_nan() || cap <= 0.0 {
            return Err(LawError::InvalidParameter(format!(
                "density cap must be positive, got {cap}"
            )));
        }
        if cap.is_infinite() {
            return Ok(self.clone());
        }
        let (atom_mass, kept) = match &self.kind {
            LawKind::Constant { .. } | LawKind::AtomMixture { .. } | LawKind::Truncated { .. } => {
                return Err(LawError::NoDensity(self.to_string()));
            }
            LawKind::Uniform => {
                if cap >= 1.0 {
                    return Ok(self.clone());
                }
                return Err(LawError::InvalidTruncation { cap });
            }
            LawKind::MaxOrder { k } | LawKind::MinOrder { k } if *k == 1 => {
                if cap >= 1.0 {
                    return Ok(self.clone());
                }
                return Err(LawError::InvalidTruncation { cap });
            }
            LawKind::MaxOrder { k } => {
                // density k x^{k-1} increases; {f > cap} is the upper tail
                let kf = *k as f64;
                let x_b = (cap / kf).powf(1.0 / (kf - 1.0)).min(1.0);
                (1.0 - x_b.powi(*k as i32), KeptRegion::Interval { lo: 0.0, hi: x_b })
            }
            LawKind::MinOrder { k } => {
                // density k (1-x)^{k-1} decreases; {f > cap} is the lower tail
                let kf = *k as f64;
                let x_b = (1.0 - (cap / kf).powf(1.0 / (kf - 1.0))).max(0.0);
                (
                    1.0 - (1.0 - x_b).powi(*k as i32),
                    KeptRegion::Interval { lo: x_b, hi: 1.0 },
                )
            }
            LawKind::Power { beta } => {
                if *beta == 1.0 {
                    if cap >= 1.0 {
                        return Ok(self.clone());
                    }
                    return Err(LawError::InvalidTruncation { cap });
                }
                let x_b = (beta * cap).powf(beta / (1.0 - beta)).clamp(0.0, 1.0);
                if *beta > 1.0 {
                    // unbounded at 0; {f > cap} = [0, x_b)
                    (x_b.powf(1.0 / beta), KeptRegion::Interval { lo: x_b, hi: 1.0 })
                } else {
                    // increasing, bounded by 1/beta; {f > cap} = (x_b, 1)
                    (
                        1.0 - x_b.powf(1.0 / beta),
                        KeptRegion::Interval { lo: 0.0, hi: x_b },
                    )
                }
            }
            LawKind::Tabulated { density } => {
                let (removed, kept) = density.restrict_below(cap);
                (removed, KeptRegion::Segments(Arc::new(kept)))
            }
        };
        if atom_mass <= 0.0 {
            return Ok(self.clone());
        }
        if atom_mass >= 1.0 - 1e-12 {
            return Err(LawError::InvalidTruncation { cap });
        }
        Ok(AttachmentLaw {
            kind: LawKind::Truncated {
                source: Box::new(self.clone()),
                cap,
                atom_mass,
                kept,
            },
        })
    }
}

/// `E[X^λ ; f(X) <= cap]` for a truncated law, by closed-form incomplete
/// moments of the source restricted to the kept region.
fn restricted_power_moment(source: &AttachmentLaw, kept: &KeptRegion, lambda: f64) -> f64 {
    match kept {
        KeptRegion::Segments(density) => density.power_moment(lambda),
        KeptRegion::Interval { lo, hi } => match source.kind() {
            LawKind::Uniform => power_primitive(lambda, *lo, *hi),
            LawKind::MaxOrder { k } => {
                let kf = *k as f64;
                kf * power_primitive(lambda + kf - 1.0, *lo, *hi)
            }
            LawKind::MinOrder { k } => {
                // expand k (1-x)^{k-1} binomially; exact for the small k used here
                let kf = *k as f64;
                let mut acc = 0.0;
                let mut binom = 1.0; // C(k-1, j)
                for j in 0..*k {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binom * power_primitive(lambda + j as f64, *lo, *hi);
                    binom *= (kf - 1.0 - j as f64) / (j as f64 + 1.0);
                }
                kf * acc
            }
            LawKind::Power { beta } => power_primitive(lambda + 1.0 / beta - 1.0, *lo, *hi) / beta,
            _ => unreachable!("truncation only wraps explicit-density laws"),
        },
    }
}

impl fmt::Display for AttachmentLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LawKind::Uniform => write!(f, "uniform"),
            LawKind::MaxOrder { k } => write!(f, "max:{k}"),
            LawKind::MinOrder { k } => write!(f, "min:{k}"),
            LawKind::Power { beta } => write!(f, "pow:{beta}"),
            LawKind::Constant { theta } => write!(f, "const:{theta}"),
            LawKind::AtomMixture { atom_mass, base } => write!(f, "atom:{atom_mass}+{base}"),
            LawKind::Tabulated { density } => write!(f, "table:{}", density.label),
            LawKind::Truncated { source, cap, .. } => write!(f, "trunc[f<={cap}]:{source}"),
        }
    }
}

fn parse_int(v: &str, spec: &str) -> Result<u32, LawError> {
    v.trim().parse::<u32>().map_err(|_| LawError::Parse {
        token: spec.to_string(),
        reason: format!("`{v}` is not a positive integer"),
    })
}

fn parse_real(v: &str, spec: &str) -> Result<f64, LawError> {
    v.trim().parse::<f64>().map_err(|_| LawError::Parse {
        token: spec.to_string(),
        reason: format!("`{v}` is not a real number"),
    })
}

/// Read a two-column `x,density` CSV (header expected on the first line).
pub fn load_density_table(path: &Path) -> Result<TabulatedDensity, LawError> {
    let text = std::fs::read_to_string(path).map_err(|source| LawError::TableIo {
        path: path.display().to_string(),
        source,
    })?;
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let (a, b) = (cols.next().unwrap_or(""), cols.next().unwrap_or(""));
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(x), Ok(d)) => points.push((x, d)),
            _ if idx == 0 => continue, // header row
            _ => {
                return Err(LawError::TableFormat {
                    path: path.display().to_string(),
                    line: idx + 1,
                    reason: format!("expected `x,density`, got `{line}`"),
                })
            }
        }
    }
    TabulatedDensity::from_points(&points, path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream() -> RandomStream {
        RandomStream::new(0xA11CE, 0)
    }

    #[test]
    fn constant_law_always_returns_theta() {
        let law = AttachmentLaw::constant(0.5).unwrap();
        let mut s = stream();
        for _ in 0..8 {
            assert_eq!(law.sample(&mut s), 0.5);
        }
    }

    #[test]
    fn max_order_one_is_the_underlying_uniform() {
        let law = AttachmentLaw::max_order(1).unwrap();
        let s = stream();
        for i in 0..32 {
            assert_eq!(law.sample_at(&s, i), s.uniform_at(i));
        }
    }

    #[test]
    fn max_order_two_empirical_mean_matches_two_thirds() {
        // E max(U1, U2) = 2/3 by direct integration; sd = sqrt(1/18)
        let law = AttachmentLaw::max_order(2).unwrap();
        let s = stream();
        let n = 1_000_000u64;
        let mean = (0..n).map(|i| law.sample_at(&s, 2 * i)).sum::<f64>() / n as f64;
        let se = (1.0f64 / 18.0).sqrt() / (n as f64).sqrt();
        assert!((mean - 2.0 / 3.0).abs() < 3.0 * se, "mean = {mean}");
    }

    #[test]
    fn min_order_moments_are_harmonic_sums() {
        let ms = AttachmentLaw::min_order(2).unwrap().neg_log_moments();
        assert_eq!(ms.mu, 1.5);
        assert_eq!(ms.sigma2, 1.25);
        assert_eq!(ms.harmonic, Some((1.5, 1.25)));
    }

    #[test]
    fn constant_moments_are_deterministic() {
        let ms = AttachmentLaw::constant(0.25).unwrap().neg_log_moments();
        assert!((ms.mu - 4.0f64.ln()).abs() < 1e-15);
        assert_eq!(ms.sigma2, 0.0);
    }

    #[test]
    fn atom_mass_forces_infinite_moments() {
        let law = AttachmentLaw::atom_mixture(0.1, AttachmentLaw::uniform()).unwrap();
        let ms = law.neg_log_moments();
        assert!(ms.mu.is_infinite() && ms.sigma2.is_infinite());
    }

    #[test]
    fn tabulated_uniform_grid_recovers_unit_mean() {
        // oracle: ∫ -log x dx = 1 over [0, 1); grid reaches 1 - 1e-12
        let m = 4096;
        let pts: Vec<(f64, f64)> = (0..m)
            .map(|i| (i as f64 / (m - 1) as f64 * (1.0 - 1e-12), 1.0))
            .collect();
        let law = AttachmentLaw::tabulated(TabulatedDensity::from_points(&pts, "unif").unwrap());
        let ms = law.neg_log_moments();
        assert!((ms.mu - 1.0).abs() < 1e-6, "mu = {}", ms.mu);
        assert!((ms.sigma2 - 1.0).abs() < 1e-5, "sigma2 = {}", ms.sigma2);
    }

    #[test]
    fn cumulant_closed_forms() {
        assert_eq!(AttachmentLaw::uniform().cumulant(0.0), 0.0);
        // max of 3 uniforms at λ = 3: -log 2
        let law = AttachmentLaw::max_order(3).unwrap();
        assert!((law.cumulant(3.0) + 2.0f64.ln()).abs() < 1e-15);
        // off-domain values are +∞, not errors
        assert!(AttachmentLaw::uniform().cumulant(-1.0).is_infinite());
        assert!(law.cumulant(-3.5).is_infinite());
    }

    #[test]
    fn atom_mixture_cumulant_shifts_by_log_one_minus_p() {
        // (1-p) ∫ x dx = 0.75 * 0.5 = 0.375
        let law = AttachmentLaw::atom_mixture(0.25, AttachmentLaw::uniform()).unwrap();
        assert!((law.cumulant(1.0) - 0.375f64.ln()).abs() < 1e-15);
        assert!((law.cumulant(0.0) - 0.75f64.ln()).abs() < 1e-15);
        assert!(law.cumulant(-0.5).is_infinite());
    }

    #[test]
    fn tabulated_cumulant_matches_uniform_closed_form() {
        let m = 4096;
        let pts: Vec<(f64, f64)> = (0..m)
            .map(|i| (i as f64 / (m - 1) as f64 * (1.0 - 1e-12), 1.0))
            .collect();
        let law = AttachmentLaw::tabulated(TabulatedDensity::from_points(&pts, "unif").unwrap());
        for lambda in [-0.5, 0.0, 0.5, 1.0, 3.0] {
            let want = -(1.0 + lambda as f64).ln();
            assert!(
                (law.cumulant(lambda) - want).abs() < 1e-9,
                "lambda {lambda}: {} vs {want}",
                law.cumulant(lambda)
            );
        }
    }

    #[test]
    fn tabulated_sampling_matches_density_mean() {
        // triangular density f(x) = 2x on [0, 1): mean 2/3
        let pts = vec![(0.0, 0.0), (1.0 - 1e-9, 2.0)];
        let law = AttachmentLaw::tabulated(TabulatedDensity::from_points(&pts, "tri").unwrap());
        let s = stream();
        let n = 500_000u64;
        let mean = (0..n).map(|i| law.sample_at(&s, i)).sum::<f64>() / n as f64;
        assert!((mean - 2.0 / 3.0).abs() < 4.0 * (1.0f64 / 18.0).sqrt() / (n as f64).sqrt());
    }

    #[test]
    fn truncation_with_loose_cap_is_identity() {
        let law = AttachmentLaw::uniform();
        let t = law.truncate_bounded(2.0).unwrap();
        assert_eq!(t.atom_mass(), 0.0);
        assert!(matches!(t.kind(), LawKind::Uniform));
        let t = law.truncate_bounded(f64::INFINITY).unwrap();
        assert_eq!(t.atom_mass(), 0.0);
    }

    #[test]
    fn truncation_that_removes_everything_errors() {
        assert!(matches!(
            AttachmentLaw::uniform().truncate_bounded(0.5),
            Err(LawError::InvalidTruncation { .. })
        ));
    }

    #[test]
    fn power_truncation_atom_mass_closed_form_and_monte_carlo() {
        // pow:2 density x^{-1/2}/2 > 5 iff x < 1e-2, so p = P{X < 1e-2} = 0.1
        let law = AttachmentLaw::power(2.0).unwrap();
        let t = law.truncate_bounded(5.0).unwrap();
        assert!((t.atom_mass() - 0.1).abs() < 1e-12, "p = {}", t.atom_mass());

        let s = stream();
        let n = 1_000_000u64;
        let hits = (0..n)
            .filter(|&i| {
                let x = law.sample_at(&s, i);
                law.density(x).unwrap() > 5.0
            })
            .count() as f64;
        let p_hat = hits / n as f64;
        let se = (0.1f64 * 0.9 / n as f64).sqrt();
        assert!((p_hat - 0.1).abs() < 3.0 * se, "p_hat = {p_hat}");
    }

    #[test]
    fn truncated_draws_are_dominated_by_source_draws() {
        for spec in ["pow:2", "pow:0.5", "max:3", "min:3"] {
            let law = AttachmentLaw::parse(spec).unwrap();
            let cap = 1.3;
            let t = match law.truncate_bounded(cap) {
                Ok(t) => t,
                Err(_) => continue,
            };
            assert_eq!(t.draw_width(), law.draw_width());
            let s = stream();
            for i in 0..20_000u64 {
                let base = i * law.draw_width();
                let x = law.sample_at(&s, base);
                let xd = t.sample_at(&s, base);
                assert!(xd <= x, "{spec}: {xd} > {x}");
            }
        }
    }

    #[test]
    fn truncated_atom_mass_is_consistent_with_its_sampler() {
        let law = AttachmentLaw::power(2.0).unwrap();
        let t = law.truncate_bounded(5.0).unwrap();
        let s = stream();
        let n = 1_000_000u64;
        let zeros = (0..n).filter(|&i| t.sample_at(&s, i) == 0.0).count() as f64 / n as f64;
        let se = (0.1f64 * 0.9 / n as f64).sqrt();
        assert!((zeros - t.atom_mass()).abs() < 3.0 * se);
    }

    #[test]
    fn tabulated_truncation_keeps_piecewise_linear_form() {
        // triangle peaking at the middle; cap slices the peak off
        let pts = vec![(0.0, 0.0), (0.45, 4.0), (0.9, 0.0)];
        let law = AttachmentLaw::tabulated(TabulatedDensity::from_points(&pts, "peak").unwrap());
        let t = law.truncate_bounded(1.0).unwrap();
        assert!(t.atom_mass() > 0.3, "p = {}", t.atom_mass());
        // E[X^0; kept] = 1 - p
        let kept0 = t.cumulant(1e-12).exp();
        assert!((kept0 - (1.0 - t.atom_mass())).abs() < 1e-6);
    }

    #[test]
    fn parse_round_trips_and_rejects_garbage() {
        for spec in ["uniform", "max:4", "min:2", "pow:2.5", "const:0.5", "atom:0.25+uniform"] {
            let law = AttachmentLaw::parse(spec).unwrap();
            assert_eq!(law.to_string(), spec);
        }
        for bad in ["", "gauss", "max:", "max:0", "pow:-1", "const:1.5", "atom:0.5"] {
            let err = AttachmentLaw::parse(bad).unwrap_err();
            let msg = err.to_string();
            assert!(!msg.is_empty());
        }
        // nested atoms are rejected
        assert!(AttachmentLaw::parse("atom:0.2+atom:0.1+uniform").is_err());
    }

    #[test]
    fn samples_stay_in_unit_interval() {
        let specs = ["uniform", "max:5", "min:5", "pow:0.3", "pow:4", "const:0.9", "atom:0.5+pow:2"];
        let s = stream();
        for spec in specs {
            let law = AttachmentLaw::parse(spec).unwrap();
            let w = law.draw_width();
            for i in 0..10_000u64 {
                let x = law.sample_at(&s, i * w);
                assert!((0.0..1.0).contains(&x), "{spec} gave {x}");
            }
        }
    }

    #[test]
    fn sampler_mean_of_neg_log_matches_mu() {
        // empirical mean of -log(sample) within 4σ/1e3 of μ for every law
        let specs = ["uniform", "max:2", "max:5", "min:3", "pow:0.5", "pow:3", "const:0.37"];
        let s = stream();
        let n = 1_000_000u64;
        for spec in specs {
            let law = AttachmentLaw::parse(spec).unwrap();
            let ms = law.neg_log_moments();
            let w = law.draw_width();
            let mean = (0..n).map(|i| -law.sample_at(&s, i * w).ln()).sum::<f64>() / n as f64;
            let tol = 4.0 * ms.sigma() / 1e3;
            assert!(
                (mean - ms.mu).abs() <= tol.max(1e-9),
                "{spec}: mean {mean} vs mu {}",
                ms.mu
            );
        }
    }
}
