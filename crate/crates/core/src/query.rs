//! Conjunctive two-field range queries and their constant-free shapes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plans::PlanId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Field {
    A,
    B,
}

impl Field {
    pub const ALL: [Field; 2] = [Field::A, Field::B];

    pub fn as_str(self) -> &'static str {
        match self {
            Field::A => "A",
            Field::B => "B",
        }
    }

    pub fn other(self) -> Field {
        match self {
            Field::A => Field::B,
            Field::B => Field::A,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(Field::A),
            "B" => Ok(Field::B),
            _ => Err(Error::UnknownField(s.to_string())),
        }
    }
}

/// `low <= field < high`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RangePredicate {
    pub field: Field,
    pub low: i64,
    pub high: i64,
}

impl RangePredicate {
    pub fn new(field: Field, low: i64, high: i64) -> Result<Self> {
        if low > high {
            return Err(Error::InvalidRange {
                field: field.to_string(),
                low,
                high,
            });
        }
        Ok(RangePredicate { field, low, high })
    }

    #[inline]
    pub fn matches(&self, value: i64) -> bool {
        self.low <= value && value < self.high
    }
}

impl fmt::Display for RangePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <= {} < {}", self.low, self.field, self.high)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Projection {
    pub fields: Vec<Field>,
    pub suppress_id: bool,
}

impl Projection {
    /// `{A: 1, B: 1, _id: 0}`.
    pub fn both_fields_without_id() -> Self {
        Projection {
            fields: Field::ALL.to_vec(),
            suppress_id: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    predicates: [RangePredicate; 2],
    pub projection: Option<Projection>,
    pub hint: Option<PlanId>,
}

impl Query {
    /// Builds a query from one predicate on `A` and one on `B`, in any order.
    pub fn new(predicates: Vec<RangePredicate>) -> Result<Self> {
        let describe = || {
            predicates
                .iter()
                .map(|p| p.field.as_str())
                .collect::<Vec<_>>()
                .join(",")
        };
        let [first, second] =
            <[RangePredicate; 2]>::try_from(predicates.clone()).map_err(|_| Error::InvalidQueryFields(describe()))?;
        if first.field == second.field {
            return Err(Error::InvalidQueryFields(describe()));
        }
        let predicates = if first.field == Field::A {
            [first, second]
        } else {
            [second, first]
        };
        Ok(Query {
            predicates,
            projection: None,
            hint: None,
        })
    }

    pub fn range(low_a: i64, high_a: i64, low_b: i64, high_b: i64) -> Result<Self> {
        Query::new(vec![
            RangePredicate::new(Field::A, low_a, high_a)?,
            RangePredicate::new(Field::B, low_b, high_b)?,
        ])
    }

    pub fn with_projection(mut self, projection: Projection) -> Self {
        self.projection = Some(projection);
        self
    }

    pub fn with_hint(mut self, hint: PlanId) -> Self {
        self.hint = Some(hint);
        self
    }

    pub fn predicates(&self) -> &[RangePredicate; 2] {
        &self.predicates
    }

    pub fn predicate(&self, field: Field) -> &RangePredicate {
        match field {
            Field::A => &self.predicates[0],
            Field::B => &self.predicates[1],
        }
    }

    /// Brute-force evaluation on a pair of field values.
    pub fn matches(&self, a: i64, b: i64) -> bool {
        self.predicates[0].matches(a) && self.predicates[1].matches(b)
    }

    pub fn shape(&self) -> QueryShape {
        QueryShape::of(self)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} AND {}", self.predicates[0], self.predicates[1])?;
        if let Some(p) = &self.projection {
            let fields: Vec<_> = p.fields.iter().map(|f| f.as_str()).collect();
            write!(f, " PROJECT {{{}}}", fields.join(","))?;
        }
        if let Some(h) = &self.hint {
            write!(f, " HINT {h}")?;
        }
        Ok(())
    }
}

/// Plan-cache key: fields, operators and projection with constants removed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QueryShape(String);

impl QueryShape {
    fn of(query: &Query) -> Self {
        let mut preds: Vec<_> = query.predicates.iter().map(|p| p.field.as_str()).collect();
        preds.sort_unstable();
        let filter = preds
            .iter()
            .map(|f| format!("{f}:{{$gte,$lt}}"))
            .collect::<Vec<_>>()
            .join(",");
        let projection = match &query.projection {
            None => String::new(),
            Some(p) => {
                let mut fields: Vec<_> = p.fields.iter().map(|f| format!("{f}:1")).collect();
                fields.sort_unstable();
                if p.suppress_id {
                    fields.push("_id:0".into());
                }
                fields.join(",")
            }
        };
        QueryShape(format!("filter{{{filter}}} projection{{{projection}}} sort{{}}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QueryShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicate_bounds() {
        let p = RangePredicate::new(Field::A, 3, 7).unwrap();
        assert!(!p.matches(2));
        assert!(p.matches(3));
        assert!(p.matches(6));
        assert!(!p.matches(7));
        assert!(RangePredicate::new(Field::A, 4, 4).is_ok());
        assert!(matches!(
            RangePredicate::new(Field::B, 5, 4),
            Err(Error::InvalidRange { .. })
        ));
    }

    #[test]
    fn query_requires_one_predicate_per_field() {
        let a = RangePredicate::new(Field::A, 0, 1).unwrap();
        let b = RangePredicate::new(Field::B, 0, 1).unwrap();
        assert!(Query::new(vec![a, a]).is_err());
        assert!(Query::new(vec![a]).is_err());
        assert!(Query::new(vec![a, b, b]).is_err());
        let q = Query::new(vec![b, a]).unwrap();
        assert_eq!(q.predicate(Field::A), &a);
        assert_eq!(q.predicate(Field::B), &b);
    }

    #[test]
    fn shape_ignores_constants_and_order() {
        let q1 = Query::range(0, 10, 5, 50).unwrap();
        let q2 = Query::range(7, 7, -3, 99_999).unwrap();
        assert_eq!(q1.shape(), q2.shape());
        let b = RangePredicate::new(Field::B, 1, 2).unwrap();
        let a = RangePredicate::new(Field::A, 1, 2).unwrap();
        assert_eq!(Query::new(vec![b, a]).unwrap().shape(), q1.shape());
    }

    #[test]
    fn shape_distinguishes_projection_but_not_hint() {
        let q = Query::range(0, 10, 5, 50).unwrap();
        let projected = q.clone().with_projection(Projection::both_fields_without_id());
        assert_ne!(q.shape(), projected.shape());
        assert_eq!(q.clone().with_hint(PlanId::CollScan).shape(), q.shape());
        assert_eq!(
            projected.shape().as_str(),
            "filter{A:{$gte,$lt},B:{$gte,$lt}} projection{A:1,B:1,_id:0} sort{}"
        );
    }
}
