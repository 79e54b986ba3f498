//! Scenario-level dataset splitting.
//!
//! Splits always operate on whole scenarios, never individual time steps;
//! consecutive samples are too correlated for step-level sampling to give
//! honest validation numbers.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.7, val: 0.1, test: 0.2 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::RatioSum { sum });
        }
        if self.train < 0.0 || self.val < 0.0 || self.test < 0.0 {
            return Err(Error::Config("split ratios must be non-negative".into()));
        }
        Ok(())
    }
}

/// Partitions scenarios into train/val/test at whole-scenario granularity.
///
/// Deterministic for a fixed seed. Sizes use largest-remainder rounding so
/// they always sum to the scenario count (10 scenarios at 0.7/0.1/0.2 give
/// exactly 7/1/2).
pub fn scenario_split(
    scenarios: Vec<Scenario>,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(Vec<Scenario>, Vec<Scenario>, Vec<Scenario>)> {
    ratios.validate()?;
    let n = scenarios.len();
    if n < 10 {
        return Err(Error::Config(format!(
            "need at least 10 scenarios to split, got {n}"
        )));
    }

    let counts = largest_remainder_counts(n, [ratios.train, ratios.val, ratios.test]);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut buckets: Vec<Vec<Scenario>> =
        counts.iter().map(|&c| Vec::with_capacity(c)).collect();
    let mut slots: Vec<Option<Scenario>> = scenarios.into_iter().map(Some).collect();
    let mut cursor = 0usize;
    for (b, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let idx = order[cursor];
            cursor += 1;
            buckets[b].push(slots[idx].take().expect("each scenario assigned once"));
        }
    }
    let mut it = buckets.into_iter();
    Ok((it.next().unwrap(), it.next().unwrap(), it.next().unwrap()))
}

fn largest_remainder_counts(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut rema: Vec<(usize, f64)> = exact
        .iter()
        .enumerate()
        .map(|(i, e)| (i, e - e.floor()))
        .collect();
    rema.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..(n - assigned) {
        counts[rema[k % 3].0] += 1;
    }
    [counts[0], counts[1], counts[2]]
}
