//! Random k-dags and the greedy min/max-label walk distances.
//!
//! Node `i` picks `k` parents `floor(i * U_{i,1}), ..., floor(i * U_{i,k})`
//! with replacement. The uniforms are addressed by `(node, slot)` exactly
//! like the `max:k` / `min:k` samplers, which turns the identity
//! `min_j floor(i U_j) = floor(i min_j U_j)` into a pathwise one: greedy
//! walks and the corresponding order-statistic trees take the same steps
//! draw for draw.

use crate::distributions::AttachmentLaw;
use crate::stream::RandomStream;
use crate::tree::{build_depths, parent_of, TreeError, MAX_NODES};

/// Above this many stored parent labels the builder keeps the dag lazy and
/// walks re-derive parents from the stream.
const MATERIALIZE_LIMIT: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum GreedyMode {
    /// Follow the smallest parent label (the oldest node).
    MinLabel,
    /// Follow the largest parent label (the newest node).
    MaxLabel,
}

/// A random k-dag bound to its generating stream.
#[derive(Debug, Clone)]
pub struct KDag {
    n: u64,
    k: u32,
    stream: RandomStream,
    /// Flat `n * k` parent labels, slot-major per node; absent above the
    /// memory limit.
    parents: Option<Vec<u32>>,
}

pub fn build_kdag(stream: &RandomStream, n: u64, k: u32) -> Result<KDag, TreeError> {
    assert!(n >= 1 && k >= 1);
    if n > MAX_NODES {
        return Err(TreeError::CapacityExceeded { n, max: MAX_NODES });
    }
    let parents = (n * k as u64 <= MATERIALIZE_LIMIT).then(|| {
        let mut flat = vec![0u32; (n as usize + 1) * k as usize];
        for i in 1..=n {
            for j in 0..k as u64 {
                let u = stream.uniform_at(i * k as u64 + j);
                flat[(i * k as u64 + j) as usize] = parent_of(i, u) as u32;
            }
        }
        flat
    });
    Ok(KDag {
        n,
        k,
        stream: *stream,
        parents,
    })
}

impl KDag {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Parent label in the given slot (draw order preserved; duplicates
    /// allowed since parents are picked with replacement).
    pub fn parent(&self, node: u64, slot: u32) -> u64 {
        debug_assert!(node >= 1 && node <= self.n && slot < self.k);
        match &self.parents {
            Some(flat) => flat[(node * self.k as u64 + slot as u64) as usize] as u64,
            None => {
                let u = self.stream.uniform_at(node * self.k as u64 + slot as u64);
                parent_of(node, u)
            }
        }
    }

    pub fn parent_list(&self, node: u64) -> Vec<u64> {
        (0..self.k).map(|j| self.parent(node, j)).collect()
    }

    /// Steps of the greedy walk from `node` to the root.
    pub fn greedy_distance(&self, node: u64, mode: GreedyMode) -> u64 {
        debug_assert!(node <= self.n);
        let mut cur = node;
        let mut steps = 0u64;
        while cur > 0 {
            let mut next = self.parent(cur, 0);
            for j in 1..self.k {
                let p = self.parent(cur, j);
                next = match mode {
                    GreedyMode::MinLabel => next.min(p),
                    GreedyMode::MaxLabel => next.max(p),
                };
            }
            cur = next;
            steps += 1;
        }
        steps
    }
}

/// Replays the dag greedy walks against order-statistic trees built from the
/// same underlying uniforms and counts disagreements. The min walk must equal
/// the `min:k` depth and the max walk the `max:k` depth for every node; the
/// contract is zero mismatches, returned as data so the test layer can
/// assert it.
pub fn reduction_check(n: u64, k: u32, seed: u64, trials: u64) -> Result<u64, TreeError> {
    let min_law = AttachmentLaw::min_order(k).expect("k >= 1");
    let max_law = AttachmentLaw::max_order(k).expect("k >= 1");
    let mut mismatches = 0u64;
    for trial in 0..trials {
        let stream = RandomStream::new(seed, trial);
        let dag = build_kdag(&stream, n, k)?;
        let min_tree = build_depths(&min_law, &stream, n, false)?;
        let max_tree = build_depths(&max_law, &stream, n, false)?;
        for i in 1..=n {
            if dag.greedy_distance(i, GreedyMode::MinLabel) != min_tree.depth(i) as u64 {
                mismatches += 1;
            }
            if dag.greedy_distance(i, GreedyMode::MaxLabel) != max_tree.depth(i) as u64 {
                mismatches += 1;
            }
        }
    }
    Ok(mismatches)
}
