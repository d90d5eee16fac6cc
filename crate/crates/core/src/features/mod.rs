//! Trace features.
//!
//! Each chunk of a trace is summarized by a 10-dimensional foundation
//! vector `[CFI, FPI, II, MI, Condition, Shift, Truncation, DO, DLR, RA]`.
//! The trace-level vector is the mean of the chunk vectors followed by the
//! mean of all consecutive-chunk bigrams, 30 values in total.

mod dataflow;
mod weight;

pub use dataflow::{
    dead_location_rates, overwrite_feature, repeated_addition_count, DataDependencyGraph,
    DeadLocationRates,
};
pub use weight::resilience_weight;

use crate::ir::GroupTag;
use crate::par::{map_slice, Schedule};
use crate::trace::{Chunk, Trace};

pub const FOUNDATION_DIMS: usize = 10;
pub const BIGRAM_DIMS: usize = 2 * FOUNDATION_DIMS;
pub const FEATURE_DIMS: usize = FOUNDATION_DIMS + BIGRAM_DIMS;

pub const DIM_DO: usize = 7;
pub const DIM_DLR: usize = 8;
pub const DIM_RA: usize = 9;

/// Default number of consecutive self additions that make a repeated
/// addition.
pub const DEFAULT_N_SELF: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub n_self: usize,
    pub schedule: Schedule,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            n_self: DEFAULT_N_SELF,
            schedule: Schedule::default(),
        }
    }
}

/// Names of the 30 feature dimensions, in order.
pub fn feature_names() -> Vec<String> {
    let base = [
        "cfi",
        "fpi",
        "ii",
        "mi",
        "condition",
        "shift",
        "truncation",
        "do",
        "dlr",
        "ra",
    ];
    let mut names: Vec<String> = base.iter().map(|s| s.to_string()).collect();
    for half in ["a", "b"] {
        names.extend(base.iter().map(|s| format!("bi_{half}_{s}")));
    }
    names
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoundationVector(pub [f64; FOUNDATION_DIMS]);

impl FoundationVector {
    pub fn group(&self, tag: GroupTag) -> f64 {
        self.0[tag.index()]
    }

    pub fn data_overwriting(&self) -> f64 {
        self.0[DIM_DO]
    }

    pub fn dead_location_rate(&self) -> f64 {
        self.0[DIM_DLR]
    }

    pub fn repeated_addition(&self) -> f64 {
        self.0[DIM_RA]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderedFeatureVector(pub [f64; FEATURE_DIMS]);

impl OrderedFeatureVector {
    pub fn foundation(&self) -> &[f64] {
        &self.0[..FOUNDATION_DIMS]
    }

    pub fn bigram(&self) -> &[f64] {
        &self.0[FOUNDATION_DIMS..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Weighted per-tag instance counts of a chunk, normalized by the chunk's
/// instance count, in [`GroupTag::ALL`] order.
pub fn group_features(chunk: &Chunk) -> [f64; 7] {
    let mut sums = [0.0; 7];
    if chunk.is_empty() {
        return sums;
    }
    for rec in &chunk.records {
        sums[rec.opcode.group().index()] += resilience_weight(rec);
    }
    let n = chunk.len() as f64;
    sums.map(|s| s / n)
}

/// Foundation vector of one chunk; `dlr` is the chunk's dead-location rate.
pub fn foundation_vector(chunk: &Chunk, dlr: f64, n_self: usize) -> FoundationVector {
    let mut v = [0.0; FOUNDATION_DIMS];
    v[..7].copy_from_slice(&group_features(chunk));
    v[DIM_DO] = overwrite_feature(chunk);
    v[DIM_DLR] = dlr;
    v[DIM_RA] = if chunk.is_empty() {
        0.0
    } else {
        repeated_addition_count(chunk, n_self) as f64 / chunk.len() as f64
    };
    FoundationVector(v)
}

/// Foundation vectors of every chunk of a trace.
pub fn chunk_vectors(trace: &Trace, config: &FeatureConfig) -> Vec<FoundationVector> {
    let dlr = dead_location_rates(trace);
    let indexed: Vec<(&Chunk, f64)> = trace.chunks.iter().zip(dlr.per_chunk).collect();
    map_slice(&indexed, config.schedule, |(c, d)| {
        foundation_vector(c, *d, config.n_self)
    })
}

/// Mean of the concatenated vectors of every pair of consecutive chunks. A
/// single chunk is paired with itself.
pub fn bigram_vectors(chunks: &[FoundationVector]) -> [f64; BIGRAM_DIMS] {
    assert!(
        !chunks.is_empty(),
        "bigram features need at least one chunk"
    );
    let mut acc = [0.0; BIGRAM_DIMS];
    if chunks.len() == 1 {
        acc[..FOUNDATION_DIMS].copy_from_slice(&chunks[0].0);
        acc[FOUNDATION_DIMS..].copy_from_slice(&chunks[0].0);
        return acc;
    }
    for pair in chunks.windows(2) {
        for d in 0..FOUNDATION_DIMS {
            acc[d] += pair[0].0[d];
            acc[FOUNDATION_DIMS + d] += pair[1].0[d];
        }
    }
    let m = (chunks.len() - 1) as f64;
    acc.map(|x| x / m)
}

/// Elementwise mean of the chunk vectors.
pub fn mean_foundation(chunks: &[FoundationVector]) -> [f64; FOUNDATION_DIMS] {
    assert!(!chunks.is_empty(), "need at least one chunk");
    let mut acc = [0.0; FOUNDATION_DIMS];
    for c in chunks {
        for (a, x) in acc.iter_mut().zip(c.0) {
            *a += x;
        }
    }
    acc.map(|x| x / chunks.len() as f64)
}

/// The 30-dimensional trace feature vector.
pub fn assemble_feature_vector(trace: &Trace) -> OrderedFeatureVector {
    assemble_feature_vector_with(trace, &FeatureConfig::default())
}

pub fn assemble_feature_vector_with(trace: &Trace, config: &FeatureConfig) -> OrderedFeatureVector {
    let chunks = chunk_vectors(trace, config);
    let mut v = [0.0; FEATURE_DIMS];
    v[..FOUNDATION_DIMS].copy_from_slice(&mean_foundation(&chunks));
    v[FOUNDATION_DIMS..].copy_from_slice(&bigram_vectors(&chunks));
    OrderedFeatureVector(v)
}
