//! Unit-of-work plan execution.
//!
//! Each top-level [`PlanExecution::work`] call is one logical work unit as the
//! optimizer counts it. Independently, every stage charges simulated time to
//! the execution under a [`CostModel`]: a collection scan pays `c_seq` per
//! document, an index scan pays `c_idx` per entry and a fetch pays `c_fetch`
//! per document. An index entry plus its fetch is still a single work unit,
//! so work counts and simulated time diverge by plan type.
//!
//! The call that discovers exhaustion returns `Eof`, counts as a work unit and
//! charges no time. Residual filters are free.

use serde::{Deserialize, Serialize};

use crate::collection::{Collection, Document, RecordId};
use crate::error::{Error, Result};
use crate::index::{IndexCatalog, IndexEntry};
use crate::plans::{CandidatePlan, FilterSource, Stage};
use crate::query::RangePredicate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkState {
    Advanced,
    NeedTime,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Per document examined by a collection scan.
    pub c_seq: f64,
    /// Per index entry examined.
    pub c_idx: f64,
    /// Per document fetched by record id.
    pub c_fetch: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            c_seq: 1.0,
            c_idx: 1.0,
            c_fetch: 4.0,
        }
    }
}

impl CostModel {
    pub fn new(c_seq: f64, c_idx: f64, c_fetch: f64) -> Result<Self> {
        let cost = CostModel { c_seq, c_idx, c_fetch };
        cost.validate()?;
        Ok(cost)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.c_seq) && ok(self.c_idx) && ok(self.c_fetch) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "cost constants must be positive and finite, got {self:?}"
            )))
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CostModel {
            c_seq: self.c_seq * factor,
            c_idx: self.c_idx * factor,
            c_fetch: self.c_fetch * factor,
        }
    }
}

/// What a stage hands to its parent on `Advanced`.
#[derive(Debug, Clone, Copy)]
struct Member<'a> {
    rid: RecordId,
    doc: Option<&'a Document>,
    key: Option<&'a [i64]>,
}

enum StageExec<'a> {
    CollScan {
        docs: &'a [Document],
        pos: usize,
        filter: Vec<(usize, RangePredicate)>,
    },
    IxScan {
        entries: &'a [IndexEntry],
        pos: usize,
        high: i64,
    },
    Fetch {
        docs: &'a [Document],
        child: Box<StageExec<'a>>,
    },
    Filter {
        predicate: RangePredicate,
        source: ResolvedSource,
        child: Box<StageExec<'a>>,
    },
    ProjectCovered {
        child: Box<StageExec<'a>>,
    },
}

#[derive(Clone, Copy)]
enum ResolvedSource {
    Column(usize),
    Key(usize),
}

impl<'a> StageExec<'a> {
    fn open(stage: &Stage, collection: &'a Collection, catalog: &'a IndexCatalog) -> Result<Self> {
        Ok(match stage {
            Stage::CollScan { filter } => StageExec::CollScan {
                docs: collection.documents(),
                pos: 0,
                filter: filter
                    .iter()
                    .map(|p| Ok((collection.column(p.field.as_str())?, *p)))
                    .collect::<Result<_>>()?,
            },
            Stage::IxScan { index, bounds } => {
                let index = catalog.get(index).ok_or_else(|| Error::MissingIndex(index.clone()))?;
                if index.leading_field() != bounds.field.as_str() {
                    return Err(Error::Config(format!(
                        "bounds on {} do not match leading field of {}",
                        bounds.field,
                        index.name()
                    )));
                }
                StageExec::IxScan {
                    entries: index.entries(),
                    pos: index.seek(bounds.low),
                    high: bounds.high,
                }
            }
            Stage::Fetch { child } => StageExec::Fetch {
                docs: collection.documents(),
                child: Box::new(Self::open(child, collection, catalog)?),
            },
            Stage::Filter {
                predicate,
                source,
                child,
            } => StageExec::Filter {
                predicate: *predicate,
                source: match source {
                    FilterSource::Document => ResolvedSource::Column(collection.column(predicate.field.as_str())?),
                    FilterSource::IndexKey(pos) => ResolvedSource::Key(*pos),
                },
                child: Box::new(Self::open(child, collection, catalog)?),
            },
            Stage::ProjectCovered { child } => StageExec::ProjectCovered {
                child: Box::new(Self::open(child, collection, catalog)?),
            },
        })
    }

    fn work(&mut self, cost: &CostModel, sim_time: &mut f64) -> (WorkState, Option<Member<'a>>) {
        match self {
            StageExec::CollScan { docs, pos, filter } => {
                let Some(doc) = docs.get(*pos) else {
                    return (WorkState::Eof, None);
                };
                *pos += 1;
                *sim_time += cost.c_seq;
                if filter.iter().all(|(col, p)| p.matches(doc.values[*col])) {
                    let member = Member {
                        rid: doc.record_id,
                        doc: Some(doc),
                        key: None,
                    };
                    (WorkState::Advanced, Some(member))
                } else {
                    (WorkState::NeedTime, None)
                }
            }
            StageExec::IxScan { entries, pos, high } => match entries.get(*pos) {
                Some(entry) if entry.key[0] < *high => {
                    *pos += 1;
                    *sim_time += cost.c_idx;
                    let member = Member {
                        rid: entry.rid,
                        doc: None,
                        key: Some(&entry.key),
                    };
                    (WorkState::Advanced, Some(member))
                }
                _ => (WorkState::Eof, None),
            },
            StageExec::Fetch { docs, child } => match child.work(cost, sim_time) {
                (WorkState::Advanced, Some(mut member)) => {
                    *sim_time += cost.c_fetch;
                    member.doc = Some(&docs[member.rid as usize]);
                    (WorkState::Advanced, Some(member))
                }
                other => other,
            },
            StageExec::Filter {
                predicate,
                source,
                child,
            } => match child.work(cost, sim_time) {
                (WorkState::Advanced, Some(member)) => {
                    let value = match *source {
                        ResolvedSource::Column(col) => member.doc.map(|d| d.values[col]),
                        ResolvedSource::Key(pos) => member.key.and_then(|k| k.get(pos).copied()),
                    };
                    match value {
                        Some(v) if predicate.matches(v) => (WorkState::Advanced, Some(member)),
                        _ => (WorkState::NeedTime, None),
                    }
                }
                other => other,
            },
            StageExec::ProjectCovered { child } => child.work(cost, sim_time),
        }
    }
}

/// A plan being executed: stage cursors plus work, result and time counters.
pub struct PlanExecution<'a> {
    plan: CandidatePlan,
    root: StageExec<'a>,
    cost: CostModel,
    works: u64,
    results: u64,
    sim_time: f64,
    eof: bool,
    emitted: Vec<RecordId>,
}

impl std::fmt::Debug for PlanExecution<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PlanExecution")
            .field("plan", &self.plan.id)
            .field("works", &self.works)
            .field("results", &self.results)
            .field("sim_time", &self.sim_time)
            .field("eof", &self.eof)
            .finish()
    }
}

pub fn open_execution<'a>(
    plan: CandidatePlan,
    collection: &'a Collection,
    catalog: &'a IndexCatalog,
    cost: CostModel,
) -> Result<PlanExecution<'a>> {
    cost.validate()?;
    let root = StageExec::open(&plan.root, collection, catalog)?;
    Ok(PlanExecution {
        plan,
        root,
        cost,
        works: 0,
        results: 0,
        sim_time: 0.0,
        eof: false,
        emitted: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Record ids in emission order.
    pub record_ids: Vec<RecordId>,
    pub sim_time: f64,
    pub works: u64,
}

impl<'a> PlanExecution<'a> {
    pub fn plan(&self) -> &CandidatePlan {
        &self.plan
    }

    pub fn works(&self) -> u64 {
        self.works
    }

    pub fn results(&self) -> u64 {
        self.results
    }

    pub fn sim_time(&self) -> f64 {
        self.sim_time
    }

    pub fn is_eof(&self) -> bool {
        self.eof
    }

    pub fn emitted(&self) -> &[RecordId] {
        &self.emitted
    }

    pub fn work(&mut self) -> WorkState {
        if self.eof {
            return WorkState::Eof;
        }
        self.works += 1;
        let (state, member) = self.root.work(&self.cost, &mut self.sim_time);
        match state {
            WorkState::Advanced => {
                self.results += 1;
                if let Some(m) = member {
                    self.emitted.push(m.rid);
                }
            }
            WorkState::Eof => self.eof = true,
            WorkState::NeedTime => {}
        }
        state
    }

    pub fn run_to_completion(&mut self) -> RunOutcome {
        while self.work() != WorkState::Eof {}
        RunOutcome {
            record_ids: self.emitted.clone(),
            sim_time: self.sim_time,
            works: self.works,
        }
    }
}
