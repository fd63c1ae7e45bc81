//! Per-stage wall-clock accounting for query and pipeline runs.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    DomainGen,
    SparseConstruct,
    Spmm,
    Materialize,
    Predict,
    Prefuse,
    Filter,
    Aggregate,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::DomainGen,
        Stage::SparseConstruct,
        Stage::Spmm,
        Stage::Materialize,
        Stage::Predict,
        Stage::Prefuse,
        Stage::Filter,
        Stage::Aggregate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::DomainGen => "domain-gen",
            Stage::SparseConstruct => "sparse-construct",
            Stage::Spmm => "spmm",
            Stage::Materialize => "materialize",
            Stage::Predict => "predict",
            Stage::Prefuse => "prefuse",
            Stage::Filter => "filter",
            Stage::Aggregate => "aggregate",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Accumulated time per stage. Stages never nest, so the sum over stages is
/// bounded by the enclosing wall time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimes {
    slots: [Duration; 8],
}

impl StageTimes {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `f`, charging its wall time to `stage`.
    #[inline]
    pub fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.slots[stage.slot()] += start.elapsed();
        out
    }

    pub fn add(&mut self, stage: Stage, d: Duration) {
        self.slots[stage.slot()] += d;
    }

    pub fn get(&self, stage: Stage) -> Duration {
        self.slots[stage.slot()]
    }

    pub fn total(&self) -> Duration {
        self.slots.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Stage, Duration)> + '_ {
        Stage::ALL.iter().map(move |&s| (s, self.get(s)))
    }
}
