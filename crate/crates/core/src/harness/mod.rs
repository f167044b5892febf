//! Selectivity-grid experiments.
//!
//! A sweep draws random two-field range queries, maps each query's exact
//! selectivities onto a `D x D` grid and records the optimizer's choice for
//! the first query landing in every cell. Every cell is then measured under
//! each forceable plan to find the truly fastest one, and the grid is reduced
//! to accuracy (fraction of cells where the choice was fastest) and impact
//! (mean percentage slowdown of the choice against the fastest plan).

pub mod measure;
pub mod stats;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use measure::{measure_all_plans, Measurement, NoiseModel, TimingMode};

use crate::error::{Error, Result};
use crate::executor::CostModel;
use crate::optimizer::{CacheMode, Optimizer, PlanCache, RaceKnobs};
use crate::plans::{forceable_plans, OptimizerVariant, PlanId};
use crate::query::{Field, Query, RangePredicate};
use crate::scenario::{Scenario, Workbench};
use measure::mix_seed;

pub const DEFAULT_DIM: usize = 50;
pub const DEFAULT_REPS: usize = 10;
/// Consecutive rejected draws after which remaining cells are constructed directly.
pub const REJECTION_CAP: u64 = 1_000_000;

/// Width uniform in `[1, size]`, low uniform over the positions that fit.
pub fn rand_range_predicate<R: Rng + ?Sized>(field: Field, domain: (i64, i64), rng: &mut R) -> RangePredicate {
    let (min, max) = domain;
    let size = max - min + 1;
    let width = rng.random_range(1..=size);
    let low = rng.random_range(min..=max - width + 1);
    RangePredicate {
        field,
        low,
        high: low + width,
    }
}

pub fn map_selectivity_to_cell(e: f64, dim: usize) -> usize {
    ((e * dim as f64).floor().max(0.0) as usize).min(dim - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub i: usize,
    pub j: usize,
    pub e_a: f64,
    pub e_b: f64,
    pub query: Query,
    pub chosen: PlanId,
    pub measurements: BTreeMap<PlanId, Measurement>,
    pub optimal: Option<PlanId>,
    pub ratio: Option<f64>,
}

impl GridCell {
    pub fn mean_time(&self, plan: PlanId) -> Option<f64> {
        self.measurements.get(&plan).map(|m| m.mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DatasetSource {
    Generated {
        n: usize,
        distribution: crate::collection::Distribution,
        seed: u64,
    },
    File {
        path: String,
        n: usize,
    },
}

/// Everything that determines an experiment's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario: Scenario,
    pub variant: OptimizerVariant,
    pub dataset: DatasetSource,
    pub dim: usize,
    pub seed: u64,
    pub reps: usize,
    pub cost: CostModel,
    pub knobs: RaceKnobs,
    pub cache_mode: CacheMode,
    pub cache_primed: Option<PlanId>,
    pub timing: TimingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub dim: usize,
    /// Row-major by `j` (B bucket), then `i` (A bucket).
    pub cells: Vec<Option<GridCell>>,
    pub provenance: Provenance,
}

impl ExperimentGrid {
    fn empty(provenance: Provenance) -> Self {
        let dim = provenance.dim;
        ExperimentGrid {
            dim,
            cells: vec![None; dim * dim],
            provenance,
        }
    }

    pub fn cell(&self, i: usize, j: usize) -> Option<&GridCell> {
        self.cells[j * self.dim + i].as_ref()
    }

    pub fn visited(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.visited() == self.cells.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GridCell> {
        self.cells.iter().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    pub accuracy: f64,
    pub impact_pct: f64,
}

/// Knobs of a single experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub variant: OptimizerVariant,
    pub dim: usize,
    pub seed: u64,
    pub reps: usize,
    pub cost: CostModel,
    pub knobs: RaceKnobs,
    pub timing: TimingMode,
    /// Plan pre-seeded into the cache; enables a cache experiment.
    pub cache_primed: Option<PlanId>,
    pub cache_mode: CacheMode,
    /// Measurement threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            variant: OptimizerVariant::Vanilla,
            dim: DEFAULT_DIM,
            seed: 0,
            reps: DEFAULT_REPS,
            cost: CostModel::default(),
            knobs: RaceKnobs::default(),
            timing: TimingMode::Sim,
            cache_primed: None,
            cache_mode: CacheMode::Off,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn provenance(&self, scenario: Scenario, dataset: DatasetSource) -> Provenance {
        Provenance {
            scenario,
            variant: self.variant,
            dataset,
            dim: self.dim,
            seed: self.seed,
            reps: self.reps,
            cost: self.cost,
            knobs: self.knobs,
            cache_mode: self.cache_mode,
            cache_primed: self.cache_primed,
            timing: self.timing,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("grid dimension must be at least 1".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        self.cost.validate()?;
        self.knobs.validate()
    }
}

/// Smallest predicate on `field`, starting at the field minimum, whose
/// selectivity falls in bucket `bucket`.
fn construct_predicate(bench: &Workbench, field: Field, bucket: usize, dim: usize) -> RangePredicate {
    let sorted = bench.sorted_values(field);
    let n = sorted.len();
    let mut target = (bucket * n).div_ceil(dim).clamp(1, n);
    // Float rounding in the cell mapping can push an exact boundary down a bucket.
    while target < n && map_selectivity_to_cell(target as f64 / n as f64, dim) < bucket {
        target += 1;
    }
    let low = sorted[0];
    let high = if target < n { sorted[target] } else { sorted[n - 1] + 1 };
    RangePredicate {
        field,
        low,
        high: high.max(low + 1),
    }
}

/// Fills the grid with optimizer choices.
pub fn sweep(bench: &Workbench, config: &ExperimentConfig, dataset: DatasetSource) -> Result<ExperimentGrid> {
    config.validate()?;
    let dim = config.dim;
    let mut grid = ExperimentGrid::empty(config.provenance(bench.scenario, dataset));
    let optimizer = Optimizer::new(&bench.collection, &bench.catalog, config.variant)
        .with_knobs(config.knobs)
        .with_cost(config.cost);

    let mut cache = PlanCache::default();
    let template = bench.scenario.make_query(
        RangePredicate::new(Field::A, 0, 0)?,
        RangePredicate::new(Field::B, 0, 0)?,
    )?;
    if let Some(primed) = config.cache_primed {
        if !forceable_plans(&template, &bench.catalog).contains(&primed) {
            return Err(Error::PlanNotAvailable(primed.to_string()));
        }
        cache.insert(template.shape(), primed, config.knobs.max_results);
    }

    let mut record = |grid: &mut ExperimentGrid, i: usize, j: usize, query: Query, e_a: f64, e_b: f64| -> Result<()> {
        let decision = optimizer.optimize(&query, Some(&mut cache), config.cache_mode)?;
        grid.cells[j * dim + i] = Some(GridCell {
            i,
            j,
            e_a,
            e_b,
            query,
            chosen: decision.chosen,
            measurements: BTreeMap::new(),
            optimal: None,
            ratio: None,
        });
        Ok(())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (dom_a, dom_b) = (bench.domain(Field::A), bench.domain(Field::B));
    let mut visited = 0;
    let mut rejected = 0u64;
    while visited < dim * dim && rejected < REJECTION_CAP {
        let a = rand_range_predicate(Field::A, dom_a, &mut rng);
        let b = rand_range_predicate(Field::B, dom_b, &mut rng);
        let (e_a, e_b) = (bench.selectivity(&a), bench.selectivity(&b));
        let (i, j) = (map_selectivity_to_cell(e_a, dim), map_selectivity_to_cell(e_b, dim));
        if grid.cells[j * dim + i].is_some() {
            rejected += 1;
            continue;
        }
        rejected = 0;
        record(&mut grid, i, j, bench.scenario.make_query(a, b)?, e_a, e_b)?;
        visited += 1;
    }

    if visited < dim * dim {
        for j in 0..dim {
            for i in 0..dim {
                if grid.cells[j * dim + i].is_some() {
                    continue;
                }
                let a = construct_predicate(bench, Field::A, i, dim);
                let b = construct_predicate(bench, Field::B, j, dim);
                let (e_a, e_b) = (bench.selectivity(&a), bench.selectivity(&b));
                record(&mut grid, i, j, bench.scenario.make_query(a, b)?, e_a, e_b)?;
            }
        }
    }
    Ok(grid)
}

/// Measures every forceable plan in every visited cell.
pub fn measure_grid(bench: &Workbench, grid: &mut ExperimentGrid, config: &ExperimentConfig) -> Result<()> {
    let dim = grid.dim;
    let seed = config.seed;
    let work = |cells: &mut [Option<GridCell>]| -> Result<()> {
        cells.par_iter_mut().flatten().try_for_each(|cell| {
            let cell_seed = mix_seed(seed ^ mix_seed((cell.j * dim + cell.i) as u64));
            cell.measurements =
                measure_all_plans(bench, &cell.query, config.reps, config.cost, config.timing, cell_seed)?;
            Ok(())
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| work(&mut grid.cells))
}

/// Fastest plan by mean time; ties go to `chosen`, then to canonical order.
fn optimal_plan(cell: &GridCell) -> Option<(PlanId, f64)> {
    let best = cell.measurements.values().map(|m| m.mean).min_by(f64::total_cmp)?;
    if cell.mean_time(cell.chosen) == Some(best) {
        return Some((cell.chosen, best));
    }
    // BTreeMap iterates in canonical plan order.
    cell.measurements
        .iter()
        .find(|(_, m)| m.mean == best)
        .map(|(id, _)| (*id, best))
}

/// Derives each cell's optimal plan and ratio, and the grid's summary metrics.
/// Cells without measurements are left untouched and excluded.
pub fn finalize(grid: &mut ExperimentGrid) -> Result<SummaryMetrics> {
    let mut scored = 0usize;
    let mut correct = 0usize;
    let mut slowdown = 0.0;
    for cell in grid.cells.iter_mut().flatten() {
        let Some((optimal, best)) = optimal_plan(cell) else {
            continue;
        };
        let chosen_time = cell
            .mean_time(cell.chosen)
            .ok_or_else(|| Error::PlanNotAvailable(cell.chosen.to_string()))?;
        let ratio = chosen_time / best;
        cell.optimal = Some(optimal);
        cell.ratio = Some(ratio);
        scored += 1;
        if optimal == cell.chosen {
            correct += 1;
        }
        slowdown += (ratio - 1.0) * 100.0;
    }
    if scored == 0 {
        return Ok(SummaryMetrics {
            accuracy: 0.0,
            impact_pct: 0.0,
        });
    }
    Ok(SummaryMetrics {
        accuracy: correct as f64 / scored as f64,
        impact_pct: slowdown / scored as f64,
    })
}

/// Sweep, measure and finalize.
pub fn run_experiment(
    bench: &Workbench,
    config: &ExperimentConfig,
    dataset: DatasetSource,
) -> Result<(ExperimentGrid, SummaryMetrics)> {
    let mut grid = sweep(bench, config, dataset)?;
    measure_grid(bench, &mut grid, config)?;
    let metrics = finalize(&mut grid)?;
    Ok((grid, metrics))
}

/// Runs the experiment with `primed` cached for the query shape up front and
/// replanning disabled, so every cell reuses it.
pub fn cache_experiment(
    bench: &Workbench,
    primed: PlanId,
    config: &ExperimentConfig,
    dataset: DatasetSource,
) -> Result<(ExperimentGrid, SummaryMetrics)> {
    let config = ExperimentConfig {
        cache_primed: Some(primed),
        cache_mode: CacheMode::OnNoReplan,
        ..config.clone()
    };
    run_experiment(bench, &config, dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collection::{generate_dataset, Distribution};

    fn bench(n: usize, scenario: Scenario) -> Workbench {
        Workbench::new(
            generate_dataset(n, Distribution::UniformDistinct, 21).unwrap(),
            scenario,
        )
        .unwrap()
    }

    fn source(n: usize) -> DatasetSource {
        DatasetSource::Generated {
            n,
            distribution: Distribution::UniformDistinct,
            seed: 21,
        }
    }

    #[test]
    fn cell_mapping() {
        assert_eq!(map_selectivity_to_cell(0.999, 50), 49);
        assert_eq!(map_selectivity_to_cell(1.0, 50), 49);
        assert_eq!(map_selectivity_to_cell(0.0, 50), 0);
        assert_eq!(map_selectivity_to_cell(0.5, 50), 25);
        assert_eq!(map_selectivity_to_cell(0.0199, 50), 0);
        assert_eq!(map_selectivity_to_cell(0.02, 50), 1);
    }

    #[test]
    fn random_predicates_stay_in_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut full = false;
        for _ in 0..20_000 {
            let p = rand_range_predicate(Field::A, (0, 99), &mut rng);
            assert!(p.low >= 0 && p.high <= 100 && p.high > p.low);
            full |= p.low == 0 && p.high == 100;
        }
        assert!(full, "full-width predicate never drawn");

        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5)
                .map(|_| rand_range_predicate(Field::B, (0, 99_999), &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn sweep_visits_every_cell_once() {
        let b = bench(5_000, Scenario::BothIndexed);
        let config = ExperimentConfig {
            dim: 10,
            seed: 5,
            ..Default::default()
        };
        let grid = sweep(&b, &config, source(5_000)).unwrap();
        assert!(grid.is_complete());
        for j in 0..10 {
            for i in 0..10 {
                let c = grid.cell(i, j).unwrap();
                assert_eq!((c.i, c.j), (i, j));
                assert_eq!(map_selectivity_to_cell(c.e_a, 10), i);
                assert_eq!(map_selectivity_to_cell(c.e_b, 10), j);
            }
        }
        assert_eq!(grid, sweep(&b, &config, source(5_000)).unwrap());
    }

    #[test]
    fn constructed_predicates_hit_their_bucket() {
        let b = bench(10_000, Scenario::BothIndexed);
        for dim in [1, 7, 50] {
            for bucket in 0..dim {
                let p = construct_predicate(&b, Field::A, bucket, dim);
                assert_eq!(map_selectivity_to_cell(b.selectivity(&p), dim), bucket, "dim {dim}");
            }
        }
    }

    fn cell_with(chosen: PlanId, times: &[(PlanId, f64)]) -> GridCell {
        GridCell {
            i: 0,
            j: 0,
            e_a: 0.0,
            e_b: 0.0,
            query: Query::range(0, 1, 0, 1).unwrap(),
            chosen,
            measurements: times
                .iter()
                .map(|&(p, t)| (p, Measurement::from_samples(vec![t]).unwrap()))
                .collect(),
            optimal: None,
            ratio: None,
        }
    }

    fn grid_of(cells: Vec<GridCell>) -> ExperimentGrid {
        let dim = (cells.len() as f64).sqrt() as usize;
        let config = ExperimentConfig {
            dim,
            ..Default::default()
        };
        ExperimentGrid {
            dim,
            cells: cells.into_iter().map(Some).collect(),
            provenance: config.provenance(Scenario::BothIndexed, source(1)),
        }
    }

    #[test]
    fn finalize_metrics() {
        let ok = |p| {
            cell_with(
                p,
                &[(PlanId::CollScan, 10.0), (PlanId::IxScanA, 5.0), (PlanId::IxScanB, 7.0)],
            )
        };
        let mut grid = grid_of(vec![
            ok(PlanId::IxScanA),
            ok(PlanId::IxScanA),
            ok(PlanId::IxScanA),
            ok(PlanId::CollScan),
        ]);
        let m = finalize(&mut grid).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.impact_pct, 25.0);
        assert_eq!(grid.cells[3].as_ref().unwrap().ratio, Some(2.0));
        // Idempotent.
        let again = grid.clone();
        assert_eq!(finalize(&mut grid).unwrap(), m);
        assert_eq!(grid, again);
    }

    #[test]
    fn perfect_optimizer() {
        let mut grid = grid_of(vec![
            cell_with(
                PlanId::IxScanB,
                &[(PlanId::CollScan, 10.0), (PlanId::IxScanB, 1.0)]
            );
            4
        ]);
        let m = finalize(&mut grid).unwrap();
        assert_eq!((m.accuracy, m.impact_pct), (1.0, 0.0));
    }

    #[test]
    fn ties_favour_chosen_then_canonical_order() {
        let c = cell_with(
            PlanId::IxScanB,
            &[(PlanId::CollScan, 5.0), (PlanId::IxScanA, 5.0), (PlanId::IxScanB, 5.0)],
        );
        assert_eq!(optimal_plan(&c), Some((PlanId::IxScanB, 5.0)));
        let c = cell_with(
            PlanId::IxScanB,
            &[(PlanId::CollScan, 5.0), (PlanId::IxScanA, 5.0), (PlanId::IxScanB, 6.0)],
        );
        assert_eq!(optimal_plan(&c), Some((PlanId::CollScan, 5.0)));
    }

    #[test]
    fn primed_plan_must_be_executable() {
        let b = bench(2_000, Scenario::SingleIndex);
        let config = ExperimentConfig {
            dim: 4,
            ..Default::default()
        };
        let err = cache_experiment(&b, PlanId::IxScanA, &config, source(2_000)).unwrap_err();
        assert!(matches!(err, Error::PlanNotAvailable(_)));
        let err = cache_experiment(
            &bench(2_000, Scenario::BothIndexed),
            PlanId::IxScanAB,
            &config,
            source(2_000),
        )
        .unwrap_err();
        assert!(matches!(err, Error::PlanNotAvailable(_)));
    }

    #[test]
    fn cache_experiment_is_monochrome() {
        let b = bench(5_000, Scenario::SingleIndex);
        let config = ExperimentConfig {
            dim: 8,
            seed: 2,
            ..Default::default()
        };
        let (grid, _) = cache_experiment(&b, PlanId::CollScan, &config, source(5_000)).unwrap();
        assert!(grid.iter().all(|c| c.chosen == PlanId::CollScan));
        assert_eq!(grid.provenance.cache_mode, CacheMode::OnNoReplan);
    }

    #[test]
    fn small_pipeline_is_deterministic_and_consistent() {
        let b = bench(5_000, Scenario::BothIndexed);
        let config = ExperimentConfig {
            dim: 10,
            seed: 9,
            jobs: 2,
            ..Default::default()
        };
        let (g1, m1) = run_experiment(&b, &config, source(5_000)).unwrap();
        let (g2, m2) = run_experiment(
            &b,
            &ExperimentConfig {
                jobs: 1,
                ..config.clone()
            },
            source(5_000),
        )
        .unwrap();
        assert_eq!(g1, g2);
        assert_eq!(m1, m2);
        for c in g1.iter() {
            assert!(c.ratio.unwrap() >= 1.0);
            assert_eq!(c.ratio == Some(1.0), c.optimal == Some(c.chosen));
        }
    }
}
