//! Hint-forced execution of every plan a query admits.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{filter_outliers, mean};
use crate::error::{Error, Result};
use crate::executor::{open_execution, CostModel};
use crate::plans::{enumerate_candidates, forceable_plans, OptimizerVariant, PlanId};
use crate::query::Query;
use crate::scenario::Workbench;

/// Multiplicative disturbance applied to simulated times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Each sample is scaled by a uniform factor in `[1 - jitter, 1 + jitter]`.
    pub jitter: f64,
    /// Probability that a sample is an outlier.
    pub outlier_prob: f64,
    /// Outliers are additionally scaled by this factor.
    pub outlier_factor: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            jitter: 0.05,
            outlier_prob: 0.1,
            outlier_factor: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum TimingMode {
    /// Deterministic simulated time.
    Sim,
    /// Simulated time with injected noise, seeded per cell and plan.
    Noisy(NoiseModel),
    /// Host wall-clock nanoseconds. Not reproducible.
    WallClock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub samples: Vec<f64>,
    /// Samples surviving the 1.5 IQR filter.
    pub kept: Vec<f64>,
    pub mean: f64,
}

impl Measurement {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        let kept = filter_outliers(&samples);
        let mean = mean(&kept).ok_or(Error::AllSamplesFiltered(samples.len()))?;
        Ok(Measurement { samples, kept, mean })
    }
}

/// splitmix64 finalizer, used to derive independent per-cell seeds.
pub(crate) fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs each forceable plan `reps` times and summarizes the filtered samples.
///
/// The executor is deterministic, so in the simulated modes every repetition
/// of a plan sees the same base time; one run supplies all of them.
pub fn measure_all_plans(
    bench: &Workbench,
    query: &Query,
    reps: usize,
    cost: CostModel,
    timing: TimingMode,
    noise_seed: u64,
) -> Result<BTreeMap<PlanId, Measurement>> {
    if reps == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    let mut out = BTreeMap::new();
    for plan_id in forceable_plans(query, &bench.catalog) {
        let hinted = query.clone().with_hint(plan_id);
        let open = || -> Result<_> {
            let mut plans = enumerate_candidates(&hinted, &bench.catalog, OptimizerVariant::Vanilla, true)?;
            open_execution(plans.remove(0), &bench.collection, &bench.catalog, cost)
        };

        let samples = match timing {
            TimingMode::Sim => vec![open()?.run_to_completion().sim_time; reps],
            TimingMode::Noisy(noise) => {
                let base = open()?.run_to_completion().sim_time;
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(noise_seed ^ mix_seed(plan_id as u64)));
                (0..reps)
                    .map(|_| {
                        let mut t = base * (1.0 + noise.jitter * rng.random_range(-1.0..=1.0));
                        if rng.random_bool(noise.outlier_prob.clamp(0.0, 1.0)) {
                            t *= noise.outlier_factor;
                        }
                        t
                    })
                    .collect()
            }
            TimingMode::WallClock => (0..reps)
                .map(|_| {
                    let mut exec = open()?;
                    let start = Instant::now();
                    exec.run_to_completion();
                    Ok(start.elapsed().as_nanos() as f64)
                })
                .collect::<Result<_>>()?,
        };
        out.insert(plan_id, Measurement::from_samples(samples)?);
    }
    Ok(out)
}
