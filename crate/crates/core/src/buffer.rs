//! Hindsight replay buffer partitioned into return buckets.
//!
//! Each bucket covers a half-open slice `[lo, hi)` of the known return range
//! (the top bucket is closed at `r_max`) and is a bounded FIFO. How often a
//! bucket is drawn is set by the [`Strategy`], not by how many policies it
//! holds.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{rollout, EpisodeResult, Environment};
use crate::error::{Error, Result};
use crate::nncore::{FlatParams, NetSpec};
use crate::policy::{random_policy, ActionBounds, Policy, RunningNorm};
use crate::seed::{self, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Nonempty bucket with probability proportional to `1 + rank`, then uniform inside.
    BucketsWeighted,
    /// Uniform over nonempty buckets, then uniform inside.
    BucketsUniform,
    /// Entries with probability proportional to `1 + normalized return`.
    FlatWeighted,
    /// Uniform over all entries.
    FlatUniform,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::BucketsWeighted,
        Strategy::BucketsUniform,
        Strategy::FlatWeighted,
        Strategy::FlatUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::BucketsWeighted => "buckets_weighted",
            Strategy::BucketsUniform => "buckets_uniform",
            Strategy::FlatWeighted => "flat_weighted",
            Strategy::FlatUniform => "flat_uniform",
        }
    }
}

impl core::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(alloc::format!("unknown buffer strategy '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BufferGeometry {
    pub n_buckets: usize,
    pub capacity_per_bucket: usize,
    pub strategy: Strategy,
    /// Optional per-bucket weights replacing `1 + rank` under `buckets_weighted`.
    pub bucket_weights: Option<Vec<f64>>,
}

impl Default for BufferGeometry {
    fn default() -> Self {
        Self {
            n_buckets: 10,
            capacity_per_bucket: 50,
            strategy: Strategy::BucketsWeighted,
            bucket_weights: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BufferEntry {
    /// The return the policy actually achieved; used as its command.
    pub observed_return: f64,
    pub theta: FlatParams,
    pub birth_iteration: u64,
}

/// One training pair: the stored return as command and its policy.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub command: f64,
    pub theta: &'a FlatParams,
}

#[derive(Clone, Debug)]
pub struct BucketedBuffer {
    range: (f64, f64),
    geometry: BufferGeometry,
    buckets: Vec<VecDeque<BufferEntry>>,
}

impl BucketedBuffer {
    pub fn new(range: (f64, f64), geometry: BufferGeometry) -> Result<Self> {
        if !(range.0.is_finite() && range.1.is_finite() && range.1 > range.0) {
            return Err(Error::Config(alloc::format!("bad buffer range {range:?}")));
        }
        if geometry.n_buckets == 0 || geometry.capacity_per_bucket == 0 {
            return Err(Error::Config("bucket count and capacity must be positive".into()));
        }
        if let Some(w) = &geometry.bucket_weights {
            if w.len() != geometry.n_buckets || w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::Config("bucket_weights needs one positive weight per bucket".into()));
            }
        }
        let buckets = (0..geometry.n_buckets).map(|_| VecDeque::new()).collect();
        Ok(Self { range, geometry, buckets })
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn geometry(&self) -> &BufferGeometry {
        &self.geometry
    }

    pub fn strategy(&self) -> Strategy {
        self.geometry.strategy
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.iter().all(VecDeque::is_empty)
    }

    pub fn bucket_sizes(&self) -> Vec<usize> {
        self.buckets.iter().map(VecDeque::len).collect()
    }

    pub fn bucket(&self, index: usize) -> impl Iterator<Item = &BufferEntry> {
        self.buckets[index].iter()
    }

    /// All entries, bucket by bucket, oldest first within a bucket.
    pub fn entries(&self) -> impl Iterator<Item = &BufferEntry> {
        self.buckets.iter().flatten()
    }

    pub fn max_return(&self) -> Option<f64> {
        self.entries().map(|e| e.observed_return).reduce(f64::max)
    }

    /// `floor((r - r_min) / width)`, with `r_max` in the last bucket. Returns
    /// outside the range are clamped.
    pub fn bucket_index(&self, value: f64) -> usize {
        let (lo, hi) = self.range;
        let r = if value < lo || value > hi {
            log::warn!("return {value} outside buffer range [{lo}, {hi}], clamping");
            value.clamp(lo, hi)
        } else {
            value
        };
        let n = self.geometry.n_buckets;
        let width = (hi - lo) / n as f64;
        let idx = libm::floor((r - lo) / width);
        if idx.is_nan() || idx < 0.0 {
            0
        } else {
            (idx as usize).min(n - 1)
        }
    }

    /// Appends to the entry's bucket, evicting that bucket's oldest entry if full.
    pub fn insert(&mut self, entry: BufferEntry) {
        let idx = self.bucket_index(entry.observed_return);
        let cap = self.geometry.capacity_per_bucket;
        let bucket = &mut self.buckets[idx];
        if bucket.len() == cap {
            bucket.pop_front();
        }
        bucket.push_back(entry);
    }

    /// Probability of drawing from each bucket on a single draw.
    pub fn bucket_probabilities(&self) -> Vec<f64> {
        let n = self.geometry.n_buckets;
        let mut p = alloc::vec![0.0; n];
        let total = self.len() as f64;
        if total == 0.0 {
            return p;
        }
        match self.geometry.strategy {
            Strategy::BucketsWeighted | Strategy::BucketsUniform => {
                let (idx, w) = self.bucket_weights();
                let sum: f64 = w.iter().sum();
                for (i, w) in idx.into_iter().zip(w) {
                    p[i] = w / sum;
                }
            }
            Strategy::FlatUniform => {
                for (i, b) in self.buckets.iter().enumerate() {
                    p[i] = b.len() as f64 / total;
                }
            }
            Strategy::FlatWeighted => {
                let sum: f64 = self.entries().map(|e| self.flat_weight(e)).sum();
                for (i, b) in self.buckets.iter().enumerate() {
                    p[i] = b.iter().map(|e| self.flat_weight(e)).sum::<f64>() / sum;
                }
            }
        }
        p
    }

    /// Nonempty bucket indices with their selection weights.
    fn bucket_weights(&self) -> (Vec<usize>, Vec<f64>) {
        let idx: Vec<usize> = (0..self.buckets.len()).filter(|&i| !self.buckets[i].is_empty()).collect();
        let weights = match (self.geometry.strategy, &self.geometry.bucket_weights) {
            (Strategy::BucketsUniform, _) => alloc::vec![1.0; idx.len()],
            (_, Some(w)) => idx.iter().map(|&i| w[i]).collect(),
            (_, None) => (0..idx.len()).map(|rank| 1.0 + rank as f64).collect(),
        };
        (idx, weights)
    }

    fn flat_weight(&self, e: &BufferEntry) -> f64 {
        let (lo, hi) = self.range;
        1.0 + ((e.observed_return - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    /// Draws `batch_size` training pairs with replacement. The command of each
    /// pair is the stored observed return.
    pub fn sample(&self, batch_size: usize, seed_value: u64) -> Result<Vec<Sample<'_>>> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let mut rng = seed::rng(seed_value);
        let pairs: Vec<&BufferEntry> = match self.geometry.strategy {
            Strategy::BucketsWeighted | Strategy::BucketsUniform => {
                let (idx, w) = self.bucket_weights();
                let pick = WeightedIndex::new(&w).map_err(|e| Error::Config(alloc::format!("{e}")))?;
                (0..batch_size)
                    .map(|_| {
                        let bucket = &self.buckets[idx[pick.sample(&mut rng)]];
                        &bucket[rng.random_range(0..bucket.len())]
                    })
                    .collect()
            }
            Strategy::FlatUniform => {
                let all: Vec<&BufferEntry> = self.entries().collect();
                (0..batch_size).map(|_| all[rng.random_range(0..all.len())]).collect()
            }
            Strategy::FlatWeighted => {
                let all: Vec<&BufferEntry> = self.entries().collect();
                let pick = WeightedIndex::new(all.iter().map(|e| self.flat_weight(e)))
                    .map_err(|e| Error::Config(alloc::format!("{e}")))?;
                (0..batch_size).map(|_| all[pick.sample(&mut rng)]).collect()
            }
        };
        Ok(pairs
            .into_iter()
            .map(|e| Sample {
                command: e.observed_return,
                theta: &e.theta,
            })
            .collect())
    }

    /// Interval commands are drawn from. With `B` the best stored return and
    /// returns measured from `r_min`: `[0.8 B, min(1.1 B, 1.1 r_max)]`.
    pub fn command_window(&self) -> Result<(f64, f64)> {
        let best = self.max_return().ok_or(Error::EmptyBuffer)?;
        let (lo, hi) = self.range;
        let b = (best - lo).max(0.0);
        let upper = (1.1 * b).min(1.1 * (hi - lo));
        Ok((lo + 0.8 * b, lo + upper))
    }

    /// `k` commands for the next rollout stage. The first one is always the
    /// top of the window; the rest are uniform inside it.
    pub fn select_commands(&self, k: usize, seed_value: u64) -> Result<Vec<f64>> {
        let (lo, hi) = self.command_window()?;
        let mut rng = seed::rng(seed_value);
        Ok((0..k)
            .map(|i| {
                if i == 0 || hi <= lo {
                    hi
                } else {
                    rng.random_range(lo..=hi)
                }
            })
            .collect())
    }

    /// Rolls out `n` freshly initialized policies once each, in order, and
    /// stores them with their returns. Each rollout updates `norm` online, so
    /// later policies see the statistics gathered by earlier ones.
    pub fn init_random(
        &mut self,
        n: usize,
        policy_spec: &NetSpec,
        env: &mut dyn Environment,
        norm: &mut RunningNorm,
        seed_value: u64,
    ) -> Result<Vec<EpisodeResult>> {
        let bounds = env.contract().action_bounds();
        let jobs = random_init_jobs(n, policy_spec, &bounds, seed_value)?;
        let mut results = Vec::with_capacity(n);
        for (policy, rollout_seed) in jobs {
            let result = rollout(env, &policy, norm, rollout_seed)?;
            self.insert(BufferEntry {
                observed_return: result.episode_return,
                theta: policy.params,
                birth_iteration: 0,
            });
            results.push(result);
        }
        Ok(results)
    }
}

/// The random policies and rollout seeds used to seed a buffer.
pub fn random_init_jobs(n: usize, policy_spec: &NetSpec, bounds: &ActionBounds, seed_value: u64) -> Result<Vec<(Policy, u64)>> {
    (0..n as u64)
        .map(|i| {
            let policy = random_policy(policy_spec, bounds.clone(), seed::derive(seed_value, &[tag::INIT_POLICY, i]))?;
            Ok((policy, seed::derive(seed_value, &[tag::INIT_ROLLOUT, i])))
        })
        .collect()
}
