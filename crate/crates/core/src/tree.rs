//! Exact tree simulation: depth arrays, lazy root paths, renewal bounds and
//! the path-event / rotation Monte Carlo checks.
//!
//! The model: node `i` attaches to `floor(i * X_i)` for i.i.d. `X_i` on
//! `[0, 1)`. Draws are addressed by node label (`draw index = label * width`),
//! so a full forward build, a lazy path trace and the renewal sums all consume
//! *identical* randomness — that coupling is what makes the sandwich checks
//! exact rather than distributional.

use crate::distributions::AttachmentLaw;
use crate::stats::{wilson_interval, Z_95};
use crate::stream::RandomStream;

/// Depth arrays are stored as 32-bit integers with one slot per label.
pub const MAX_NODES: u64 = i32::MAX as u64 - 1;

#[derive(Debug, thiserror::Error)]
pub enum TreeError {
    #[error("node count {n} exceeds the array capacity {max}")]
    CapacityExceeded { n: u64, max: u64 },
}

/// Per-label depths of one simulated tree; parents are retained only when
/// the tree is going to be rendered or re-traced.
#[derive(Debug, Clone)]
pub struct TreeDepths {
    n: u64,
    depths: Vec<u32>,
    parents: Option<Vec<u32>>,
}

impl TreeDepths {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn depth(&self, label: u64) -> u32 {
        self.depths[label as usize]
    }

    pub fn depths(&self) -> &[u32] {
        &self.depths
    }

    pub fn parent(&self, label: u64) -> Option<u64> {
        self.parents.as_ref().map(|p| p[label as usize] as u64)
    }

    pub fn parents(&self) -> Option<&[u32]> {
        self.parents.as_deref()
    }
}

/// `floor(label * x)` clamped to a legal parent (`< label`).
///
/// `x < 1` already guarantees the product stays below `label` in exact
/// arithmetic; the clamp covers the one case a rounded product could tie it.
#[inline]
pub fn parent_of(label: u64, x: f64) -> u64 {
    let p = (label as f64 * x) as u64;
    if p >= label {
        label - 1
    } else {
        p
    }
}

/// Single forward pass `i = 1..=n`: `depths[i] = depths[floor(i X_i)] + 1`.
pub fn build_depths(
    law: &AttachmentLaw,
    stream: &RandomStream,
    n: u64,
    keep_parents: bool,
) -> Result<TreeDepths, TreeError> {
    if n > MAX_NODES {
        return Err(TreeError::CapacityExceeded { n, max: MAX_NODES });
    }
    let w = law.draw_width();
    let mut depths = vec![0u32; (n + 1) as usize];
    let mut parents = keep_parents.then(|| vec![0u32; (n + 1) as usize]);
    for i in 1..=n {
        let x = law.sample_at(stream, i * w);
        let p = parent_of(i, x);
        depths[i as usize] = depths[p as usize] + 1;
        if let Some(par) = parents.as_mut() {
            par[i as usize] = p as u32;
        }
    }
    Ok(TreeDepths { n, depths, parents })
}

/// Depth of the last node, height, and min depth over the window
/// `ceil(n/2)..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct SimOutcome {
    pub n: u64,
    pub trial: u64,
    pub d_last: u32,
    pub height: u32,
    pub min_depth: u32,
}

/// One scan over the depth array. The last label sits inside the min-depth
/// window, so `min_depth <= d_last <= height` always.
pub fn summarize(t: &TreeDepths) -> SimOutcome {
    let n = t.n;
    let window_lo = n.div_ceil(2);
    let mut height = 0u32;
    let mut min_depth = u32::MAX;
    for (label, &d) in t.depths.iter().enumerate().skip(1) {
        height = height.max(d);
        if label as u64 >= window_lo {
            min_depth = min_depth.min(d);
        }
    }
    SimOutcome {
        n,
        trial: 0,
        d_last: t.depths[n as usize],
        height,
        min_depth,
    }
}

/// Label sequence from a start node down to the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathTrace {
    /// `labels[0]` is the start, the last entry is `0`; strictly decreasing.
    pub labels: Vec<u64>,
}

impl PathTrace {
    pub fn start(&self) -> u64 {
        self.labels[0]
    }

    /// Edge count, i.e. the depth of the start node.
    pub fn depth(&self) -> u64 {
        self.labels.len() as u64 - 1
    }
}

/// Lazily trace one root path, sampling only at visited labels. Because
/// draws are addressed by label, re-evaluation is memoization: the trace
/// sees exactly the draws a full build would.
pub fn trace_path(law: &AttachmentLaw, stream: &RandomStream, start: u64) -> PathTrace {
    let w = law.draw_width();
    let mut labels = Vec::with_capacity(24);
    labels.push(start);
    let mut cur = start;
    while cur > 0 {
        let x = law.sample_at(stream, cur * w);
        cur = parent_of(cur, x);
        labels.push(cur);
    }
    PathTrace { labels }
}

/// Re-read a path from a built tree (requires retained parents).
pub fn trace_path_from(t: &TreeDepths, start: u64) -> Option<PathTrace> {
    t.parents.as_ref().map(|parents| {
        let mut labels = vec![start];
        let mut cur = start;
        while cur > 0 {
            cur = parents[cur as usize] as u64;
            labels.push(cur);
        }
        PathTrace { labels }
    })
}

/// Exact depth together with its renewal sandwich.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RenewalBounds {
    /// First step index at which the root is reached.
    pub d_exact: u64,
    /// First `j` with `Σ -log X > log n` along the same draws; dominates
    /// `d_exact` pathwise because flooring only shrinks labels.
    pub d_hat: u64,
    /// First `j` with `Σ -log X > log n - 2 log log n`. Only a high
    /// probability lower bound, so it is reported, never asserted.
    pub d_bar: u64,
    pub log_n: f64,
    pub bar_threshold: f64,
}

/// Walks one root path accumulating `-log X` along the visited labels.
/// After absorption at the root the sum keeps growing by the label-0 draw,
/// which pins down `d_hat`/`d_bar` when they exceed the exact depth.
pub fn renewal_bounds(law: &AttachmentLaw, stream: &RandomStream, n: u64) -> RenewalBounds {
    assert!(n >= 3, "renewal thresholds need n >= 3, got {n}");
    let log_n = (n as f64).ln();
    let bar_threshold = log_n - 2.0 * log_n.ln();
    let w = law.draw_width();

    let mut cur = n;
    let mut sum = 0.0f64;
    let mut j = 0u64;
    let mut d_hat = None;
    let mut d_bar = None;
    while cur > 0 {
        let x = law.sample_at(stream, cur * w);
        sum += -x.ln();
        j += 1;
        if d_bar.is_none() && sum > bar_threshold {
            d_bar = Some(j);
        }
        if d_hat.is_none() && sum > log_n {
            d_hat = Some(j);
        }
        cur = parent_of(cur, x);
    }
    let d_exact = j;
    if d_hat.is_none() || d_bar.is_none() {
        // stuck at the root: every further step re-reads the label-0 draw
        let step = -law.sample_at(stream, 0).ln();
        let cross = |target: f64| -> u64 {
            if step.is_infinite() {
                1
            } else {
                ((target - sum) / step).floor() as u64 + 1
            }
        };
        if d_bar.is_none() {
            d_bar = Some(j + cross(bar_threshold));
        }
        if d_hat.is_none() {
            d_hat = Some(j + cross(log_n));
        }
    }
    RenewalBounds {
        d_exact,
        d_hat: d_hat.unwrap(),
        d_bar: d_bar.unwrap(),
        log_n,
        bar_threshold,
    }
}

/// Which one-sided label corridor a path must stay in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum PathEvent {
    /// Start in `{2n+1..3n}` on a `3n+1`-node tree; require
    /// `L(x, j) >= n β^j` for `j = 1..t`.
    LargeLabels,
    /// Start in `{n+1..2n}` on a `2n+1`-node tree; require
    /// `L(x, j) <= 2n β^j`.
    SmallLabels,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PathEventEstimate {
    pub event: PathEvent,
    pub n: u64,
    pub steps: u64,
    pub beta: f64,
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    /// 95% Wilson interval.
    pub ci: (f64, f64),
    /// Start-label window, recorded because the two events use different
    /// conventions (`{2n+1..3n}` of `3n` vs `{n+1..2n}` of `2n`).
    pub start_window: (u64, u64),
    pub node_count: u64,
}

/// Monte Carlo frequency of a label-corridor event. Only the start node's
/// path is traced, so a trial costs `O(t)` regardless of tree size.
pub fn path_event_probability(
    law: &AttachmentLaw,
    event: PathEvent,
    n: u64,
    steps: u64,
    beta: f64,
    trials: u64,
    seed: u64,
) -> PathEventEstimate {
    assert!((0.0..1.0).contains(&beta), "beta must be in (0, 1)");
    let (node_count, win_lo, win_hi, scale) = match event {
        PathEvent::LargeLabels => (3 * n, 2 * n + 1, 3 * n, n as f64),
        PathEvent::SmallLabels => (2 * n, n + 1, 2 * n, 2.0 * n as f64),
    };
    let w = law.draw_width();
    let mut hits = 0u64;
    for trial in 0..trials {
        let stream = RandomStream::keyed(&[seed, trial]);
        let u = stream.substream(1).uniform_at(0);
        let start = win_lo + (u * (win_hi - win_lo + 1) as f64) as u64;
        let start = start.min(win_hi);

        let mut cur = start;
        let mut threshold = scale;
        let mut ok = true;
        for _ in 1..=steps {
            threshold *= beta;
            if cur > 0 {
                let x = law.sample_at(&stream, cur * w);
                cur = parent_of(cur, x);
            }
            let within = match event {
                PathEvent::LargeLabels => cur as f64 >= threshold,
                PathEvent::SmallLabels => cur as f64 <= threshold,
            };
            if !within {
                ok = false;
                break;
            }
        }
        if ok {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / trials as f64;
    PathEventEstimate {
        event,
        n,
        steps,
        beta,
        trials,
        hits,
        p_hat,
        ci: wilson_interval(hits, trials, Z_95),
        start_window: (win_lo, win_hi),
        node_count,
    }
}

/// Both sides of the cyclic-shift inequality
/// `P{X₁ ≥ β, X₁X₂ ≥ β², ..} ≥ P{X₁⋯X_t ≥ β^t} / t`, estimated on i.i.d.
/// draws (no tree involved). The pass margin uses the paired per-trial
/// differences, since the prefix event is contained in the product event.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RotationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub trials: u64,
    /// `mean(lhs_i - rhs_i / t)`; the inequality says this is ≥ 0.
    pub margin: f64,
    pub margin_se: f64,
    pub pass: bool,
}

pub fn rotation_inequality_check(
    law: &AttachmentLaw,
    t: u64,
    beta: f64,
    trials: u64,
    seed: u64,
) -> RotationCheck {
    assert!(t >= 1);
    let thresholds: Vec<f64> = (1..=t as i32).map(|j| beta.powi(j)).collect();
    let mut lhs = 0u64;
    let mut rhs = 0u64;
    let mut sum_d = 0.0f64;
    let mut sum_d2 = 0.0f64;
    for trial in 0..trials {
        let mut stream = RandomStream::keyed(&[seed, trial]);
        let mut prod = 1.0f64;
        let mut prefix_ok = true;
        for thr in &thresholds {
            prod *= law.sample(&mut stream);
            if prefix_ok && prod < *thr {
                prefix_ok = false;
            }
        }
        let full = prod >= thresholds[t as usize - 1];
        lhs += prefix_ok as u64;
        rhs += full as u64;
        let d = prefix_ok as i32 as f64 - full as i32 as f64 / t as f64;
        sum_d += d;
        sum_d2 += d * d;
    }
    let nt = trials as f64;
    let margin = sum_d / nt;
    let var = ((sum_d2 - nt * margin * margin) / (nt - 1.0)).max(0.0);
    let margin_se = (var / nt).sqrt();
    RotationCheck {
        lhs: lhs as f64 / nt,
        rhs: rhs as f64 / nt,
        trials,
        margin,
        margin_se,
        pass: margin >= -3.0 * margin_se,
    }
}
