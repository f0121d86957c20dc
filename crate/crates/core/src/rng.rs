//! Seeded, splittable randomness and uniform index sampling.
//!
//! Every random decision in a run draws from its own ChaCha8 stream, keyed by
//! the run seed and a stream id that encodes what the draw is for (outer
//! batch of round `t`, inner batch `(t, k)`, output selection, ...). Changing
//! `K` or the checkpoint cadence therefore never shifts the draws of
//! unrelated steps.

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const TAG_SHIFT: u32 = 60;
const OUTER_SHIFT: u32 = 28;
const INNER_MASK: u64 = (1 << OUTER_SHIFT) - 1;
const OUTER_MASK: u64 = (1 << (TAG_SHIFT - OUTER_SHIFT)) - 1;

/// What a stream is used for. Encoded into the high bits of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Synthetic data generation.
    Data,
    /// Outer (anchor) batch of round `t`; also the per-iteration batch of SMD.
    OuterBatch { t: u64 },
    /// Inner mini-batch of step `k` in round `t`.
    InnerBatch { t: u64, k: u64 },
    /// Draw of the returned iterate index `t*`.
    OutputSelect,
    /// Probe trajectories used to estimate constants.
    Probe,
    /// Free-form streams for tests and property checks.
    Aux(u64),
}

impl Purpose {
    pub fn stream_id(self) -> u64 {
        let (tag, hi, lo) = match self {
            Purpose::Data => (1, 0, 0),
            Purpose::OuterBatch { t } => (2, t, 0),
            Purpose::InnerBatch { t, k } => (3, t, k),
            Purpose::OutputSelect => (4, 0, 0),
            Purpose::Probe => (5, 0, 0),
            Purpose::Aux(x) => return (6 << TAG_SHIFT) | (x & ((1 << TAG_SHIFT) - 1)),
        };
        (tag << TAG_SHIFT) | ((hi & OUTER_MASK) << OUTER_SHIFT) | (lo & INNER_MASK)
    }
}

/// A deterministic random stream identified by `(seed, stream_id)`.
///
/// Identical pairs give identical draw sequences on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn for_purpose(seed: u64, purpose: Purpose) -> Self {
        Self::new(seed, purpose.stream_id())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `[0, upper)`.
    pub fn below(&mut self, upper: usize) -> usize {
        self.inner.random_range(0..upper)
    }

    pub fn normal(&mut self) -> f64 {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut self.inner)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// A sorted set of distinct indices in `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexBatch {
    indices: Vec<usize>,
    population: usize,
}

impl IndexBatch {
    /// Builds a batch from arbitrary indices; they are sorted and must be
    /// distinct and below `population`.
    pub fn new(mut indices: Vec<usize>, population: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("batch indices must be distinct"));
        }
        if indices.last().is_some_and(|&i| i >= population) {
            return Err(Error::invalid(format!(
                "batch index out of range for population {population}"
            )));
        }
        Ok(Self {
            indices,
            population,
        })
    }

    pub fn full(population: usize) -> Self {
        Self {
            indices: (0..population).collect(),
            population,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.population
    }
}

/// Draws a uniformly random size-`k` subset of `[0, n)`.
pub fn sample_without_replacement(rng: &mut RngStream, n: usize, k: usize) -> Result<IndexBatch> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "sample size must satisfy 1 <= k <= n (k={k}, n={n})"
        )));
    }
    if k == n {
        return Ok(IndexBatch::full(n));
    }
    let mut indices = index::sample(rng, n, k).into_vec();
    indices.sort_unstable();
    Ok(IndexBatch {
        indices,
        population: n,
    })
}

/// Enumerates every size-`k` subset of `[0, n)` in lexicographic order.
pub fn all_subsets(n: usize, k: usize) -> Vec<IndexBatch> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(IndexBatch {
            indices: cur.clone(),
            population: n,
        });
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}
