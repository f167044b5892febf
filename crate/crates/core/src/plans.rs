//! Candidate plan enumeration.
//!
//! Plans are small stage trees. One plan is produced per usable index (no
//! bounds variations, no index intersection). Whether a collection scan joins
//! the candidate list follows the gating rule of the stock optimizer: only
//! when it is allowed at all and either explicitly hinted or the only option.
//! The `WithCollscan` and `Mod` variants always add it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexCatalog;
use crate::query::{Field, Query, RangePredicate};

/// Stable plan identifiers used for hints, reports and diagram legends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PlanId {
    CollScan,
    IxScanA,
    IxScanB,
    /// Covered scan of the compound index `A_1_B_1`.
    IxScanAB,
}

impl PlanId {
    /// Canonical order; also the column order of result files.
    pub const ALL: [PlanId; 4] = [PlanId::CollScan, PlanId::IxScanA, PlanId::IxScanB, PlanId::IxScanAB];

    pub fn as_str(self) -> &'static str {
        match self {
            PlanId::CollScan => "COLLSCAN",
            PlanId::IxScanA => "IXSCAN_A",
            PlanId::IxScanB => "IXSCAN_B",
            PlanId::IxScanAB => "IXSCAN_AB",
        }
    }

    pub fn index_scan(field: Field) -> PlanId {
        match field {
            Field::A => PlanId::IxScanA,
            Field::B => PlanId::IxScanB,
        }
    }

    fn valid_forms() -> String {
        PlanId::ALL.map(PlanId::as_str).join(", ")
    }
}

impl fmt::Display for PlanId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for PlanId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_plan_hint(s)
    }
}

impl Serialize for PlanId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for PlanId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_plan_hint(&s).map_err(serde::de::Error::custom)
    }
}

pub fn parse_plan_hint(text: &str) -> Result<PlanId> {
    PlanId::ALL
        .into_iter()
        .find(|p| p.as_str() == text)
        .ok_or_else(|| Error::UnknownPlan {
            name: text.to_string(),
            valid: PlanId::valid_forms(),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerVariant {
    /// Stock behaviour.
    Vanilla,
    /// Always races a collection scan.
    WithCollscan,
    /// `WithCollscan` plus halved productivity for plans that fetch.
    Mod,
}

impl OptimizerVariant {
    pub const ALL: [OptimizerVariant; 3] = [
        OptimizerVariant::Vanilla,
        OptimizerVariant::WithCollscan,
        OptimizerVariant::Mod,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerVariant::Vanilla => "vanilla",
            OptimizerVariant::WithCollscan => "with-collscan",
            OptimizerVariant::Mod => "mod",
        }
    }

    pub fn always_races_collscan(self) -> bool {
        !matches!(self, OptimizerVariant::Vanilla)
    }
}

impl fmt::Display for OptimizerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown optimizer variant `{s}`")))
    }
}

/// Where a residual filter reads its value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterSource {
    /// The fetched document.
    Document,
    /// Position within the index key of the working member.
    IndexKey(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stage {
    /// Sequential scan with the full query predicate applied inline.
    CollScan {
        filter: Vec<RangePredicate>,
    },
    /// Scan of `index` over `bounds` on its leading field.
    IxScan {
        index: String,
        bounds: RangePredicate,
    },
    Fetch {
        child: Box<Stage>,
    },
    Filter {
        predicate: RangePredicate,
        source: FilterSource,
        child: Box<Stage>,
    },
    ProjectCovered {
        child: Box<Stage>,
    },
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::CollScan { .. } => "COLLSCAN",
            Stage::IxScan { .. } => "IXSCAN",
            Stage::Fetch { .. } => "FETCH",
            Stage::Filter { .. } => "FILTER",
            Stage::ProjectCovered { .. } => "PROJECT_COVERED",
        }
    }

    pub fn child(&self) -> Option<&Stage> {
        match self {
            Stage::CollScan { .. } | Stage::IxScan { .. } => None,
            Stage::Fetch { child } | Stage::Filter { child, .. } | Stage::ProjectCovered { child } => Some(child),
        }
    }

    /// This stage followed by its descendants, root first.
    pub fn walk(&self) -> impl Iterator<Item = &Stage> {
        std::iter::successors(Some(self), |s| s.child())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePlan {
    pub id: PlanId,
    pub root: Stage,
}

impl CandidatePlan {
    pub fn collscan(query: &Query) -> Self {
        CandidatePlan {
            id: PlanId::CollScan,
            root: Stage::CollScan {
                filter: query.predicates().to_vec(),
            },
        }
    }

    /// `IXSCAN(field) -> FETCH -> FILTER(other field)`.
    pub fn index_scan(query: &Query, index: &str, field: Field) -> Self {
        let scan = Stage::IxScan {
            index: index.to_string(),
            bounds: *query.predicate(field),
        };
        CandidatePlan {
            id: PlanId::index_scan(field),
            root: Stage::Filter {
                predicate: *query.predicate(field.other()),
                source: FilterSource::Document,
                child: Box::new(Stage::Fetch { child: Box::new(scan) }),
            },
        }
    }

    /// `IXSCAN(A,B) -> FILTER(B on key) -> PROJECT_COVERED`.
    pub fn covered_scan(query: &Query, index: &str) -> Self {
        let scan = Stage::IxScan {
            index: index.to_string(),
            bounds: *query.predicate(Field::A),
        };
        CandidatePlan {
            id: PlanId::IxScanAB,
            root: Stage::ProjectCovered {
                child: Box::new(Stage::Filter {
                    predicate: *query.predicate(Field::B),
                    source: FilterSource::IndexKey(1),
                    child: Box::new(scan),
                }),
            },
        }
    }

    pub fn has_fetch(&self) -> bool {
        self.root.walk().any(|s| matches!(s, Stage::Fetch { .. }))
    }

    /// Always false: sorts are not modelled.
    pub fn has_blocking_sort(&self) -> bool {
        false
    }

    /// Always false: index intersection is not modelled.
    pub fn has_ixisect(&self) -> bool {
        false
    }

    /// Indexes referenced by the plan's scans.
    pub fn indexes(&self) -> impl Iterator<Item = &str> {
        self.root.walk().filter_map(|s| match s {
            Stage::IxScan { index, .. } => Some(index.as_str()),
            _ => None,
        })
    }

    /// Compact stage listing, leaf first: `IXSCAN -> FETCH -> FILTER`.
    pub fn describe(&self) -> String {
        let mut names: Vec<_> = self.root.walk().map(Stage::name).collect();
        names.reverse();
        names.join(" -> ")
    }
}

/// Index-based plans producible for `query`, in catalog order.
fn index_plans(query: &Query, catalog: &IndexCatalog) -> Vec<CandidatePlan> {
    let covered = |index_fields: &[String]| match &query.projection {
        Some(p) => p.suppress_id && p.fields.iter().all(|f| index_fields.iter().any(|k| k == f.as_str())),
        None => false,
    };
    let mut plans = Vec::new();
    for index in catalog.iter() {
        let keys: Vec<&str> = index.key_fields().iter().map(String::as_str).collect();
        match keys.as_slice() {
            [single] => {
                if let Ok(field) = single.parse::<Field>() {
                    plans.push(CandidatePlan::index_scan(query, index.name(), field));
                }
            }
            ["A", "B"] if covered(index.key_fields()) => {
                plans.push(CandidatePlan::covered_scan(query, index.name()));
            }
            // Other key shapes produce no plan in this engine.
            _ => {}
        }
    }
    plans
}

pub fn enumerate_candidates(
    query: &Query,
    catalog: &IndexCatalog,
    variant: OptimizerVariant,
    collscan_allowed: bool,
) -> Result<Vec<CandidatePlan>> {
    let mut plans = index_plans(query, catalog);

    if let Some(hint) = query.hint {
        if hint == PlanId::CollScan {
            return if collscan_allowed {
                Ok(vec![CandidatePlan::collscan(query)])
            } else {
                Err(Error::PlanNotAvailable(hint.to_string()))
            };
        }
        return match plans.iter().position(|p| p.id == hint) {
            Some(pos) => Ok(vec![plans.swap_remove(pos)]),
            None => Err(Error::PlanNotAvailable(hint.to_string())),
        };
    }

    let collscan_required = plans.is_empty();
    if collscan_allowed && (variant.always_races_collscan() || collscan_required) {
        plans.push(CandidatePlan::collscan(query));
    }
    Ok(plans)
}

/// Every plan that can be forced by hint for `query`: index plans in catalog
/// order, then the collection scan.
pub fn forceable_plans(query: &Query, catalog: &IndexCatalog) -> Vec<PlanId> {
    let mut ids: Vec<_> = index_plans(query, catalog).iter().map(|p| p.id).collect();
    ids.push(PlanId::CollScan);
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collection::{generate_dataset, Distribution};
    use crate::query::Projection;

    fn catalog(indexes: &[&[&str]]) -> IndexCatalog {
        let c = generate_dataset(50, Distribution::UniformDistinct, 1).unwrap();
        let mut cat = IndexCatalog::new();
        for keys in indexes {
            cat.create(&c, keys).unwrap();
        }
        cat
    }

    fn ids(plans: &[CandidatePlan]) -> Vec<PlanId> {
        plans.iter().map(|p| p.id).collect()
    }

    fn q() -> Query {
        Query::range(0, 10, 0, 20).unwrap()
    }

    #[test]
    fn vanilla_omits_collscan_when_an_index_matches() {
        let cat = catalog(&[&["A"], &["B"]]);
        let plans = enumerate_candidates(&q(), &cat, OptimizerVariant::Vanilla, true).unwrap();
        assert_eq!(ids(&plans), vec![PlanId::IxScanA, PlanId::IxScanB]);
    }

    #[test]
    fn modified_variants_always_race_collscan() {
        let cat = catalog(&[&["A"], &["B"]]);
        for v in [OptimizerVariant::WithCollscan, OptimizerVariant::Mod] {
            let plans = enumerate_candidates(&q(), &cat, v, true).unwrap();
            assert_eq!(ids(&plans), vec![PlanId::IxScanA, PlanId::IxScanB, PlanId::CollScan]);
        }
    }

    #[test]
    fn collscan_required_without_indexes() {
        let cat = catalog(&[]);
        let plans = enumerate_candidates(&q(), &cat, OptimizerVariant::Vanilla, true).unwrap();
        assert_eq!(ids(&plans), vec![PlanId::CollScan]);
        let none = enumerate_candidates(&q(), &cat, OptimizerVariant::Vanilla, false).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn covering_plan_needs_projection() {
        let cat = catalog(&[&["A"], &["B"], &["A", "B"]]);
        let projected = q().with_projection(Projection::both_fields_without_id());
        let plans = enumerate_candidates(&projected, &cat, OptimizerVariant::Vanilla, true).unwrap();
        assert_eq!(ids(&plans), vec![PlanId::IxScanA, PlanId::IxScanB, PlanId::IxScanAB]);

        let plain = enumerate_candidates(&q(), &cat, OptimizerVariant::Vanilla, true).unwrap();
        assert_eq!(ids(&plain), vec![PlanId::IxScanA, PlanId::IxScanB]);

        let with_id = q().with_projection(Projection {
            fields: vec![Field::A, Field::B],
            suppress_id: false,
        });
        let plans = enumerate_candidates(&with_id, &cat, OptimizerVariant::Vanilla, true).unwrap();
        assert!(!ids(&plans).contains(&PlanId::IxScanAB));
    }

    #[test]
    fn stage_tree_shapes() {
        let cat = catalog(&[&["A"], &["B"], &["A", "B"]]);
        let query = q().with_projection(Projection::both_fields_without_id());
        let plans = enumerate_candidates(&query, &cat, OptimizerVariant::Mod, true).unwrap();
        let described: Vec<_> = plans.iter().map(|p| (p.id, p.describe(), p.has_fetch())).collect();
        assert_eq!(
            described,
            vec![
                (PlanId::IxScanA, "IXSCAN -> FETCH -> FILTER".to_string(), true),
                (PlanId::IxScanB, "IXSCAN -> FETCH -> FILTER".to_string(), true),
                (
                    PlanId::IxScanAB,
                    "IXSCAN -> FILTER -> PROJECT_COVERED".to_string(),
                    false
                ),
                (PlanId::CollScan, "COLLSCAN".to_string(), false),
            ]
        );
        assert_eq!(plans[2].indexes().collect::<Vec<_>>(), vec!["A_1_B_1"]);
    }

    #[test]
    fn hint_selects_exactly_one_plan() {
        let cat = catalog(&[&["A"], &["B"]]);
        for hint in [PlanId::IxScanA, PlanId::IxScanB, PlanId::CollScan] {
            let plans = enumerate_candidates(&q().with_hint(hint), &cat, OptimizerVariant::Vanilla, true).unwrap();
            assert_eq!(ids(&plans), vec![hint]);
        }
        let err =
            enumerate_candidates(&q().with_hint(PlanId::CollScan), &cat, OptimizerVariant::Vanilla, false).unwrap_err();
        assert!(matches!(err, Error::PlanNotAvailable(_)));
    }

    #[test]
    fn hint_for_missing_index_fails() {
        let cat = catalog(&[&["A"]]);
        let err =
            enumerate_candidates(&q().with_hint(PlanId::IxScanB), &cat, OptimizerVariant::Vanilla, true).unwrap_err();
        assert!(matches!(err, Error::PlanNotAvailable(ref p) if p == "IXSCAN_B"));
    }

    #[test]
    fn forceable_plans_include_collscan() {
        let cat = catalog(&[&["B"]]);
        assert_eq!(forceable_plans(&q(), &cat), vec![PlanId::IxScanB, PlanId::CollScan]);
    }

    #[test]
    fn parse_hints() {
        assert_eq!(parse_plan_hint("COLLSCAN").unwrap(), PlanId::CollScan);
        assert_eq!(parse_plan_hint("IXSCAN_A").unwrap(), PlanId::IxScanA);
        assert_eq!(parse_plan_hint("IXSCAN_AB").unwrap(), PlanId::IxScanAB);
        let err = parse_plan_hint("IXSCAN_Q").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("IXSCAN_Q") && msg.contains("COLLSCAN, IXSCAN_A, IXSCAN_B, IXSCAN_AB"),
            "{msg}"
        );
        for id in PlanId::ALL {
            assert_eq!(id.to_string().parse::<PlanId>().unwrap(), id);
        }
    }
}
