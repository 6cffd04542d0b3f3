//! Experiment orchestration: configuration, sweeps, refinement studies,
//! lemma batches and the persisted reports behind the CLI.

pub mod boundary;
pub mod config;
pub mod lemma;
pub mod longtime;
pub mod mms;
pub mod report;
pub mod roundtrip;
pub mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};

pub use config::{ExperimentConfig, ExperimentKind};

pub const MMS_SPACE_ORDER: f64 = 1.8;
pub const MMS_TIME_ORDER: f64 = 0.9;
pub const ENTROPY_SHRINK: f64 = 3.0;
pub const LONGTIME_FRACTION: f64 = 0.05;
pub const SWEEP_MIN_ORDER: f64 = 0.20;
pub const BOUND_SLACK: f64 = 2.0;
pub const MATCHED_FLUX_MAX: f64 = 1e-3;
pub const MISMATCH_FLUX_MIN: f64 = 0.1;
pub const PLATEAU_FRACTION: f64 = 0.5;
pub const BOUNDARY_ORDER: f64 = 1.8;
pub const ROUNDTRIP_RATIO: f64 = 1.7;

/// One pass/fail line of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CriterionOutcome {
    pub fn new(id: u32, name: &str, pass: bool, detail: String) -> Self {
        CriterionOutcome {
            id,
            name: name.into(),
            pass,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {}: {} ({})",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub fn all_pass(criteria: &[CriterionOutcome]) -> bool {
    criteria.iter().all(|c| c.pass)
}

/// Maps `f` over `tasks` on `jobs` worker threads; results keep task order.
pub fn run_jobs<T, R, F>(jobs: usize, tasks: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    use rayon::prelude::*;
    if jobs <= 1 {
        return tasks.iter().map(&f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| KsError::Config(format!("thread pool: {e}")))?;
    pool.install(|| tasks.par_iter().map(&f).collect())
}

/// Least-squares slope of `ln y` against `ln x`, or `None` with fewer than
/// three usable points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 3 || xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn is_strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}
