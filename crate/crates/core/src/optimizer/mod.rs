//! First-past-the-post plan selection.
//!
//! Candidate plans are raced round-robin, one work unit each per round, until
//! one of them produces `max_results` results, one reaches EOF, or the round
//! budget `max(evaluation_works, coll_fraction * N)` is spent. A round that
//! ends the race is always completed, so every plan finishes with the same
//! number of works. Plans are then scored from their trial statistics and the
//! highest total wins; ties go to the earliest candidate.

pub mod cache;

use serde::{Deserialize, Serialize};

pub use cache::{maybe_replan, CacheMode, PlanCache, PlanCacheEntry, ReplanDecision};

use crate::collection::Collection;
use crate::error::{Error, Result};
use crate::executor::{open_execution, CostModel, PlanExecution, RunOutcome, WorkState};
use crate::index::IndexCatalog;
use crate::plans::{enumerate_candidates, OptimizerVariant, PlanId};
use crate::query::Query;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaceKnobs {
    pub evaluation_works: u64,
    pub coll_fraction: f64,
    pub max_results: u64,
}

impl Default for RaceKnobs {
    fn default() -> Self {
        RaceKnobs {
            evaluation_works: 10_000,
            coll_fraction: 0.3,
            max_results: 101,
        }
    }
}

impl RaceKnobs {
    pub fn validate(&self) -> Result<()> {
        if self.evaluation_works == 0
            || self.max_results == 0
            || !(self.coll_fraction.is_finite() && self.coll_fraction > 0.0)
        {
            return Err(Error::Config(format!("race knobs must be positive, got {self:?}")));
        }
        Ok(())
    }

    /// Round budget for a collection of `n_records` documents.
    pub fn max_works(&self, n_records: usize) -> u64 {
        let fraction = (self.coll_fraction * n_records as f64).floor() as u64;
        self.evaluation_works.max(fraction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialStats {
    pub plan: PlanId,
    pub works: u64,
    pub results: u64,
    pub reached_eof: bool,
    pub has_fetch: bool,
    pub has_blocking_sort: bool,
    pub has_ixisect: bool,
}

impl TrialStats {
    fn of(exec: &PlanExecution<'_>) -> Self {
        let plan = exec.plan();
        TrialStats {
            plan: plan.id,
            works: exec.works(),
            results: exec.results(),
            reached_eof: exec.is_eof(),
            has_fetch: plan.has_fetch(),
            has_blocking_sort: plan.has_blocking_sort(),
            has_ixisect: plan.has_ixisect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaceOutcome {
    pub stats: Vec<TrialStats>,
    pub rounds: u64,
}

/// Races fresh executions in place; cursors keep their progress afterwards.
pub fn race(candidates: &mut [PlanExecution<'_>], n_records: usize, knobs: &RaceKnobs) -> Result<RaceOutcome> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let max_works = knobs.max_works(n_records);
    let mut working = true;
    let mut rounds = 0;
    while working && rounds < max_works {
        for exec in candidates.iter_mut() {
            match exec.work() {
                WorkState::Advanced if exec.results() >= knobs.max_results => working = false,
                WorkState::Eof => working = false,
                _ => {}
            }
        }
        rounds += 1;
    }
    Ok(RaceOutcome {
        stats: candidates.iter().map(TrialStats::of).collect(),
        rounds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub base: f64,
    pub productivity: f64,
    pub tie_break_unit: f64,
    pub no_fetch_bonus: f64,
    pub no_sort_bonus: f64,
    pub no_ixisect_bonus: f64,
    pub eof_bonus: f64,
    pub total: f64,
}

impl Score {
    pub fn tie_breakers(&self) -> f64 {
        self.no_fetch_bonus + self.no_sort_bonus + self.no_ixisect_bonus
    }
}

pub fn score_plan(stats: &TrialStats, variant: OptimizerVariant) -> Result<Score> {
    if stats.works == 0 {
        return Err(Error::ZeroWorks);
    }
    let works = stats.works as f64;
    let mut productivity = stats.results as f64 / works;
    if variant == OptimizerVariant::Mod && stats.has_fetch {
        productivity /= 2.0;
    }
    let tie_break_unit = (1.0 / (10.0 * works)).min(1e-4);
    let bonus = |flag: bool| if flag { 0.0 } else { tie_break_unit };
    let mut score = Score {
        base: 1.0,
        productivity,
        tie_break_unit,
        no_fetch_bonus: bonus(stats.has_fetch),
        no_sort_bonus: bonus(stats.has_blocking_sort),
        no_ixisect_bonus: bonus(stats.has_ixisect),
        eof_bonus: if stats.reached_eof { 1.0 } else { 0.0 },
        total: 0.0,
    };
    score.total = score.base + score.productivity + score.tie_breakers() + score.eof_bonus;
    Ok(score)
}

/// Position of the highest total; the earliest wins ties.
pub fn pick_best(scores: &[Score]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s.total > scores[b].total) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanTrial {
    pub stats: TrialStats,
    pub score: Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionSource {
    Raced,
    Cached,
    /// A cached plan was evicted and the shape raced again.
    Replanned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub chosen: PlanId,
    /// Per-candidate race statistics; empty when served from the cache.
    pub trials: Vec<PlanTrial>,
    pub rounds: u64,
    pub source: DecisionSource,
}

/// Everything a plan decision depends on apart from the query.
#[derive(Debug, Clone, Copy)]
pub struct Optimizer<'a> {
    pub collection: &'a Collection,
    pub catalog: &'a IndexCatalog,
    pub variant: OptimizerVariant,
    pub knobs: RaceKnobs,
    pub cost: CostModel,
    pub collscan_allowed: bool,
}

impl<'a> Optimizer<'a> {
    pub fn new(collection: &'a Collection, catalog: &'a IndexCatalog, variant: OptimizerVariant) -> Self {
        Optimizer {
            collection,
            catalog,
            variant,
            knobs: RaceKnobs::default(),
            cost: CostModel::default(),
            collscan_allowed: true,
        }
    }

    pub fn with_knobs(mut self, knobs: RaceKnobs) -> Self {
        self.knobs = knobs;
        self
    }

    pub fn with_cost(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }

    fn open_plan(&self, query: &Query, plan: PlanId) -> Result<PlanExecution<'a>> {
        let hinted = query.clone().with_hint(plan);
        let mut plans = enumerate_candidates(&hinted, self.catalog, self.variant, self.collscan_allowed)?;
        open_execution(plans.remove(0), self.collection, self.catalog, self.cost)
    }

    /// Enumerate, race, score and pick. Returns the decision and the raced
    /// executions so the winner can continue from its race position.
    fn race_query(&self, query: &Query) -> Result<(Decision, Vec<PlanExecution<'a>>)> {
        self.knobs.validate()?;
        let plans = enumerate_candidates(query, self.catalog, self.variant, self.collscan_allowed)?;
        let mut execs = plans
            .into_iter()
            .map(|p| open_execution(p, self.collection, self.catalog, self.cost))
            .collect::<Result<Vec<_>>>()?;
        let outcome = race(&mut execs, self.collection.len(), &self.knobs)?;
        let trials = outcome
            .stats
            .iter()
            .map(|s| {
                Ok(PlanTrial {
                    stats: *s,
                    score: score_plan(s, self.variant)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scores: Vec<Score> = trials.iter().map(|t| t.score).collect();
        let best = pick_best(&scores).ok_or(Error::NoCandidates)?;
        let decision = Decision {
            chosen: trials[best].stats.plan,
            trials,
            rounds: outcome.rounds,
            source: DecisionSource::Raced,
        };
        Ok((decision, execs))
    }

    /// Chooses a plan for `query`, consulting and updating `cache` per `mode`.
    /// Hinted queries bypass the cache.
    pub fn optimize(&self, query: &Query, cache: Option<&mut PlanCache>, mode: CacheMode) -> Result<Decision> {
        self.optimize_inner(query, cache, mode).map(|(d, _)| d)
    }

    /// Optimizes, then runs the winner to completion from where the race left it.
    pub fn execute(
        &self,
        query: &Query,
        cache: Option<&mut PlanCache>,
        mode: CacheMode,
    ) -> Result<(Decision, RunOutcome)> {
        let (decision, execs) = self.optimize_inner(query, cache, mode)?;
        let mut winner = match execs.into_iter().find(|e| e.plan().id == decision.chosen) {
            Some(exec) => exec,
            None => self.open_plan(query, decision.chosen)?,
        };
        let outcome = winner.run_to_completion();
        Ok((decision, outcome))
    }

    fn optimize_inner(
        &self,
        query: &Query,
        cache: Option<&mut PlanCache>,
        mode: CacheMode,
    ) -> Result<(Decision, Vec<PlanExecution<'a>>)> {
        let cache = match (cache, mode) {
            (Some(c), CacheMode::On | CacheMode::OnNoReplan) if query.hint.is_none() => c,
            _ => return self.race_query(query),
        };

        let shape = query.shape();
        let mut source = DecisionSource::Raced;
        if let Some(entry) = cache.get(&shape).cloned() {
            let observed = match mode {
                CacheMode::On => self.trial_cached(query, &entry)?,
                _ => 0,
            };
            match maybe_replan(&entry, observed, mode) {
                ReplanDecision::Keep => {
                    let decision = Decision {
                        chosen: entry.plan_id,
                        trials: Vec::new(),
                        rounds: 0,
                        source: DecisionSource::Cached,
                    };
                    return Ok((decision, Vec::new()));
                }
                ReplanDecision::Evict => {
                    cache.evict(&shape);
                    source = DecisionSource::Replanned;
                }
            }
        }

        let (mut decision, execs) = self.race_query(query)?;
        decision.source = source;
        let winner_works = decision
            .trials
            .iter()
            .find(|t| t.stats.plan == decision.chosen)
            .map_or(0, |t| t.stats.works);
        cache.insert(shape, decision.chosen, winner_works);
        Ok((decision, execs))
    }

    /// Works the cached plan needs to produce a full batch of results, capped
    /// just past the eviction threshold.
    fn trial_cached(&self, query: &Query, entry: &PlanCacheEntry) -> Result<u64> {
        let mut exec = self.open_plan(query, entry.plan_id)?;
        let budget = (entry.replan_factor * entry.trial_works as f64).floor() as u64 + 1;
        while exec.works() < budget && exec.results() < self.knobs.max_results {
            if exec.work() == WorkState::Eof {
                break;
            }
        }
        Ok(exec.works())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collection::{generate_dataset, Distribution};
    use crate::plans::CandidatePlan;

    fn stats(works: u64, results: u64, has_fetch: bool, eof: bool) -> TrialStats {
        TrialStats {
            plan: PlanId::CollScan,
            works,
            results,
            reached_eof: eof,
            has_fetch,
            has_blocking_sort: false,
            has_ixisect: false,
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn max_works_formula() {
        let k = RaceKnobs::default();
        assert_eq!(k.max_works(100_000), 30_000);
        assert_eq!(k.max_works(1_000), 10_000);
        assert_eq!(k.max_works(1_000_000), 300_000);
    }

    #[test]
    fn score_examples() {
        let s = score_plan(&stats(101, 101, false, false), OptimizerVariant::Vanilla).unwrap();
        assert!(close(s.total, 2.0003), "{}", s.total);
        let s = score_plan(&stats(101, 101, true, false), OptimizerVariant::Vanilla).unwrap();
        assert!(close(s.total, 2.0002), "{}", s.total);
        let s = score_plan(&stats(101, 101, true, false), OptimizerVariant::Mod).unwrap();
        assert!(close(s.total, 1.5002), "{}", s.total);
        assert!(close(s.productivity, 0.5));
        let s = score_plan(&stats(30_000, 0, false, false), OptimizerVariant::Vanilla).unwrap();
        assert!(close(s.total, 1.00001), "{}", s.total);
        let s = score_plan(&stats(4, 2, false, true), OptimizerVariant::Mod).unwrap();
        assert!(close(s.total, 1.0 + 0.5 + 3e-4 + 1.0), "{}", s.total);
    }

    #[test]
    fn zero_works_is_an_error() {
        assert!(matches!(
            score_plan(&stats(0, 0, false, false), OptimizerVariant::Vanilla),
            Err(Error::ZeroWorks)
        ));
    }

    fn with_total(total: f64) -> Score {
        Score {
            base: 1.0,
            productivity: 0.0,
            tie_break_unit: 0.0,
            no_fetch_bonus: 0.0,
            no_sort_bonus: 0.0,
            no_ixisect_bonus: 0.0,
            eof_bonus: 0.0,
            total,
        }
    }

    #[test]
    fn pick_best_rules() {
        assert_eq!(
            pick_best(&[with_total(2.0002), with_total(1.9), with_total(1.7)]),
            Some(0)
        );
        assert_eq!(pick_best(&[with_total(1.5), with_total(1.9), with_total(1.9)]), Some(1));
        assert_eq!(pick_best(&[with_total(1.0)]), Some(0));
        assert_eq!(pick_best(&[]), None);
    }

    #[test]
    fn race_rejects_empty_candidates() {
        assert!(matches!(
            race(&mut [], 10, &RaceKnobs::default()),
            Err(Error::NoCandidates)
        ));
    }

    #[test]
    fn single_collscan_runs_to_eof() {
        let c = generate_dataset(50, Distribution::UniformDistinct, 2).unwrap();
        let cat = IndexCatalog::new();
        let q = Query::range(0, 50, 0, 50).unwrap();
        let exec = open_execution(CandidatePlan::collscan(&q), &c, &cat, CostModel::default()).unwrap();
        let mut execs = vec![exec];
        let out = race(&mut execs, c.len(), &RaceKnobs::default()).unwrap();
        assert_eq!(out.rounds, 51);
        assert_eq!(out.stats[0].results, 50);
        assert!(out.stats[0].reached_eof);
    }

    #[test]
    fn race_stops_after_round_reaching_max_results() {
        let c = generate_dataset(1_000, Distribution::UniformDistinct, 2).unwrap();
        let cat = IndexCatalog::new();
        let everything = Query::range(0, 1_000, 0, 1_000).unwrap();
        let half = Query::range(0, 1_000, 0, 500).unwrap();
        let mut execs = vec![
            open_execution(CandidatePlan::collscan(&half), &c, &cat, CostModel::default()).unwrap(),
            open_execution(CandidatePlan::collscan(&everything), &c, &cat, CostModel::default()).unwrap(),
        ];
        let out = race(&mut execs, c.len(), &RaceKnobs::default()).unwrap();
        // The second plan matches every document: 101 results in round 101.
        assert_eq!(out.rounds, 101);
        assert_eq!(out.stats[1].results, 101);
        assert_eq!(out.stats[0].works, 101);
        assert!(out.stats[0].results < 101);
    }

    fn both_indexed(n: usize) -> (Collection, IndexCatalog) {
        let c = generate_dataset(n, Distribution::UniformDistinct, 9).unwrap();
        let mut cat = IndexCatalog::new();
        cat.create(&c, &["A"]).unwrap();
        cat.create(&c, &["B"]).unwrap();
        (c, cat)
    }

    #[test]
    fn lower_selectivity_index_wins() {
        let (c, cat) = both_indexed(100_000);
        let opt = Optimizer::new(&c, &cat, OptimizerVariant::Vanilla);
        let q = Query::range(0, 10_000, 20_000, 70_000).unwrap();
        let d = opt.optimize(&q, None, CacheMode::Off).unwrap();
        assert_eq!(d.chosen, PlanId::IxScanA);
        assert_eq!(d.source, DecisionSource::Raced);
        assert!(d.trials[0].score.productivity > d.trials[1].score.productivity);
    }

    #[test]
    fn cached_plan_reused_without_race() {
        let (c, cat) = both_indexed(10_000);
        let opt = Optimizer::new(&c, &cat, OptimizerVariant::Vanilla);
        let mut cache = PlanCache::default();
        let first = Query::range(0, 100, 0, 5_000).unwrap();
        let d = opt.optimize(&first, Some(&mut cache), CacheMode::OnNoReplan).unwrap();
        assert_eq!(d.chosen, PlanId::IxScanA);
        assert_eq!(cache.len(), 1);

        // Selectivities reversed: a fresh race would pick IXSCAN_B.
        let second = Query::range(0, 5_000, 0, 100).unwrap();
        let d = opt.optimize(&second, Some(&mut cache), CacheMode::OnNoReplan).unwrap();
        assert_eq!((d.chosen, d.source), (PlanId::IxScanA, DecisionSource::Cached));
        assert!(d.trials.is_empty());
        let fresh = opt.optimize(&second, None, CacheMode::Off).unwrap();
        assert_eq!(fresh.chosen, PlanId::IxScanB);
    }

    #[test]
    fn primed_collscan_sticks_without_replan() {
        let (c, cat) = both_indexed(10_000);
        let opt = Optimizer::new(&c, &cat, OptimizerVariant::Vanilla);
        let mut cache = PlanCache::default();
        let q = Query::range(0, 10, 0, 10).unwrap();
        cache.insert(q.shape(), PlanId::CollScan, 101);
        for (la, lb) in [(0, 0), (500, 9_000), (3, 77)] {
            let q = Query::range(la, la + 20, lb, lb + 20).unwrap();
            let d = opt.optimize(&q, Some(&mut cache), CacheMode::OnNoReplan).unwrap();
            assert_eq!(d.chosen, PlanId::CollScan);
        }
    }

    #[test]
    fn replanning_evicts_inefficient_plan() {
        let (c, cat) = both_indexed(10_000);
        let opt = Optimizer::new(&c, &cat, OptimizerVariant::Vanilla);
        let mut cache = PlanCache::default();
        let q = Query::range(0, 10, 0, 10).unwrap();
        // A collection scan that needed only 5 works in its race now has to
        // scan far more than 50 documents for this very selective query.
        cache.insert(q.shape(), PlanId::CollScan, 5);
        let d = opt.optimize(&q, Some(&mut cache), CacheMode::On).unwrap();
        assert_eq!(d.source, DecisionSource::Replanned);
        assert_ne!(d.chosen, PlanId::CollScan);
        assert_eq!(cache.get(&q.shape()).unwrap().plan_id, d.chosen);
    }

    #[test]
    fn execute_continues_the_winner() {
        let (c, cat) = both_indexed(10_000);
        let opt = Optimizer::new(&c, &cat, OptimizerVariant::Mod);
        let q = Query::range(0, 3_000, 0, 9_000).unwrap();
        let (d, out) = opt.execute(&q, None, CacheMode::Off).unwrap();
        let mut got = out.record_ids;
        got.sort_unstable();
        let want: Vec<u64> = c
            .documents()
            .iter()
            .filter(|d| q.matches(d.values[0], d.values[1]))
            .map(|d| d.record_id)
            .collect();
        assert_eq!(got, want);
        assert!(d.rounds > 0);
    }
}
