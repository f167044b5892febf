//! Physical designs used by the experiments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::collection::Collection;
use crate::error::{Error, Result};
use crate::index::IndexCatalog;
use crate::query::{Field, Projection, Query, RangePredicate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// `A_1` and `B_1`.
    BothIndexed,
    /// `B_1` only.
    SingleIndex,
    /// `A_1`, `B_1` and `A_1_B_1`, with every query projected onto `{A, B}`.
    Covering,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::BothIndexed, Scenario::SingleIndex, Scenario::Covering];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::BothIndexed => "both-indexed",
            Scenario::SingleIndex => "single-index",
            Scenario::Covering => "covering",
        }
    }

    pub fn index_keys(self) -> &'static [&'static [&'static str]] {
        match self {
            Scenario::BothIndexed => &[&["A"], &["B"]],
            Scenario::SingleIndex => &[&["B"]],
            Scenario::Covering => &[&["A"], &["B"], &["A", "B"]],
        }
    }

    pub fn projection(self) -> Option<Projection> {
        match self {
            Scenario::Covering => Some(Projection::both_fields_without_id()),
            _ => None,
        }
    }

    pub fn build_catalog(self, collection: &Collection) -> Result<IndexCatalog> {
        let mut catalog = IndexCatalog::new();
        for keys in self.index_keys() {
            catalog.create(collection, keys)?;
        }
        Ok(catalog)
    }

    /// Applies the scenario's query template to a pair of predicates.
    pub fn make_query(self, a: RangePredicate, b: RangePredicate) -> Result<Query> {
        let query = Query::new(vec![a, b])?;
        Ok(match self.projection() {
            Some(p) => query.with_projection(p),
            None => query,
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// A collection with a scenario's indexes and sorted copies of each queried
/// column for exact selectivity lookups.
#[derive(Debug, Clone)]
pub struct Workbench {
    pub scenario: Scenario,
    pub collection: Collection,
    pub catalog: IndexCatalog,
    sorted: [Vec<i64>; 2],
}

impl Workbench {
    pub fn new(collection: Collection, scenario: Scenario) -> Result<Self> {
        if collection.is_empty() {
            return Err(Error::EmptyCollection);
        }
        let catalog = scenario.build_catalog(&collection)?;
        let sorted_column = |field: Field| -> Result<Vec<i64>> {
            let col = collection.column(field.as_str())?;
            let mut v: Vec<i64> = collection.documents().iter().map(|d| d.values[col]).collect();
            v.sort_unstable();
            Ok(v)
        };
        let sorted = [sorted_column(Field::A)?, sorted_column(Field::B)?];
        Ok(Workbench {
            scenario,
            collection,
            catalog,
            sorted,
        })
    }

    pub fn n(&self) -> usize {
        self.collection.len()
    }

    pub fn sorted_values(&self, field: Field) -> &[i64] {
        match field {
            Field::A => &self.sorted[0],
            Field::B => &self.sorted[1],
        }
    }

    pub fn domain(&self, field: Field) -> (i64, i64) {
        let v = self.sorted_values(field);
        (v[0], v[v.len() - 1])
    }

    pub fn count(&self, pred: &RangePredicate) -> usize {
        if pred.high <= pred.low {
            return 0;
        }
        let v = self.sorted_values(pred.field);
        v.partition_point(|&x| x < pred.high) - v.partition_point(|&x| x < pred.low)
    }

    /// Exact fraction of documents matching `pred`.
    pub fn selectivity(&self, pred: &RangePredicate) -> f64 {
        self.count(pred) as f64 / self.n() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collection::{generate_dataset, selectivity, Distribution};

    #[test]
    fn catalogs_per_scenario() {
        let c = generate_dataset(100, Distribution::UniformDistinct, 1).unwrap();
        let names = |s: Scenario| -> Vec<String> {
            s.build_catalog(&c)
                .unwrap()
                .iter()
                .map(|i| i.name().to_string())
                .collect()
        };
        assert_eq!(names(Scenario::BothIndexed), vec!["A_1", "B_1"]);
        assert_eq!(names(Scenario::SingleIndex), vec!["B_1"]);
        assert_eq!(names(Scenario::Covering), vec!["A_1", "B_1", "A_1_B_1"]);
    }

    #[test]
    fn workbench_selectivity_matches_scan() {
        for dist in Distribution::ALL {
            let c = generate_dataset(2_000, dist, 4).unwrap();
            let bench = Workbench::new(c.clone(), Scenario::SingleIndex).unwrap();
            for (lo, hi) in [(0, 0), (0, 500), (10, 1_999), (-4, 5_000), (1_000, 1_001)] {
                for f in Field::ALL {
                    let p = RangePredicate::new(f, lo, hi).unwrap();
                    assert_eq!(bench.selectivity(&p), selectivity(&c, &p).unwrap());
                }
            }
        }
    }

    #[test]
    fn covering_queries_carry_projection() {
        let a = RangePredicate::new(Field::A, 0, 1).unwrap();
        let b = RangePredicate::new(Field::B, 0, 1).unwrap();
        assert!(Scenario::Covering.make_query(a, b).unwrap().projection.is_some());
        assert!(Scenario::BothIndexed.make_query(a, b).unwrap().projection.is_none());
        assert_eq!("single-index".parse::<Scenario>().unwrap(), Scenario::SingleIndex);
        assert!("triple".parse::<Scenario>().is_err());
    }
}
