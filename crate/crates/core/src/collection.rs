//! Stored documents, synthetic dataset generation and the dataset file format.
//!
//! Documents carry a dense `record_id` (their position in the collection) and
//! one signed integer per declared field. Iteration order is record-id order,
//! which is also the order a collection scan visits documents in.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Zipf};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::query::RangePredicate;

/// Exponent used by the zipfian generator.
pub const ZIPF_EXPONENT: f64 = 1.0;

pub type RecordId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub record_id: RecordId,
    /// Values aligned with the owning collection's field list.
    pub values: SmallVec<[i64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collection {
    name: String,
    field_list: Vec<String>,
    documents: Vec<Document>,
}

impl Collection {
    /// Builds a collection from rows of values aligned with `field_list`.
    /// Record ids are assigned densely in row order.
    pub fn from_rows<I>(name: impl Into<String>, field_list: Vec<String>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<i64>>,
    {
        let width = field_list.len();
        let mut documents = Vec::new();
        for (rid, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::Config(format!(
                    "row {rid} has {} values, expected {width}",
                    row.len()
                )));
            }
            documents.push(Document {
                record_id: rid as RecordId,
                values: SmallVec::from_vec(row),
            });
        }
        Ok(Collection {
            name: name.into(),
            field_list,
            documents,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn field_list(&self) -> &[String] {
        &self.field_list
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Position of `field` in the field list.
    pub fn column(&self, field: &str) -> Result<usize> {
        self.field_list
            .iter()
            .position(|f| f == field)
            .ok_or_else(|| Error::UnknownField(field.to_string()))
    }

    pub fn get(&self, rid: RecordId) -> Option<&Document> {
        self.documents.get(rid as usize)
    }

    /// Smallest and largest value stored in `field`.
    pub fn domain(&self, field: &str) -> Result<(i64, i64)> {
        let col = self.column(field)?;
        let mut values = self.documents.iter().map(|d| d.values[col]);
        let first = values.next().ok_or(Error::EmptyCollection)?;
        Ok(values.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    /// Number of documents matching `pred`, by sequential scan.
    pub fn count_matching(&self, pred: &RangePredicate) -> Result<usize> {
        let col = self.column(pred.field.as_str())?;
        Ok(self.documents.iter().filter(|d| pred.matches(d.values[col])).count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distribution {
    /// Each field is an independent random permutation of `0..n`.
    UniformDistinct,
    /// Each value drawn independently and uniformly from `0..n`.
    UniformWithRepeats,
    /// Each value drawn from a Zipf law over `0..n` (0 most frequent).
    Zipfian,
}

impl Distribution {
    pub const ALL: [Distribution; 3] = [
        Distribution::UniformDistinct,
        Distribution::UniformWithRepeats,
        Distribution::Zipfian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Distribution::UniformDistinct => "uniform-distinct",
            Distribution::UniformWithRepeats => "uniform-with-repeats",
            Distribution::Zipfian => "zipfian",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Distribution::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown distribution `{s}`")))
    }
}

/// Field names of every generated dataset.
pub const DEFAULT_FIELDS: [&str; 2] = ["A", "B"];

/// Generates a two-field collection of `n` documents. Fields are generated
/// independently of each other; the result is a pure function of the inputs.
pub fn generate_dataset(n: usize, distribution: Distribution, seed: u64) -> Result<Collection> {
    if n == 0 {
        return Err(Error::EmptyCollection);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns: Vec<Vec<i64>> = DEFAULT_FIELDS
        .iter()
        .map(|_| generate_column(n, distribution, &mut rng))
        .collect::<Result<_>>()?;

    let rows = (0..n).map(|i| columns.iter().map(|c| c[i]).collect());
    Collection::from_rows("coll", DEFAULT_FIELDS.iter().map(|f| f.to_string()).collect(), rows)
}

fn generate_column(n: usize, distribution: Distribution, rng: &mut ChaCha8Rng) -> Result<Vec<i64>> {
    Ok(match distribution {
        Distribution::UniformDistinct => {
            let mut values: Vec<i64> = (0..n as i64).collect();
            values.shuffle(rng);
            values
        }
        Distribution::UniformWithRepeats => (0..n).map(|_| rng.random_range(0..n as i64)).collect(),
        Distribution::Zipfian => {
            let zipf =
                Zipf::new(n as f64, ZIPF_EXPONENT).map_err(|e| Error::Config(format!("zipf distribution: {e}")))?;
            (0..n).map(|_| zipf.sample(rng) as i64 - 1).collect()
        }
    })
}

/// Fraction of documents matching `pred`.
pub fn selectivity(collection: &Collection, pred: &RangePredicate) -> Result<f64> {
    if collection.is_empty() {
        return Ok(0.0);
    }
    Ok(collection.count_matching(pred)? as f64 / collection.len() as f64)
}

/// Writes the dataset as `record_id,<fields…>` CSV with LF line endings.
pub fn save_dataset(collection: &Collection, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        write!(out, "record_id")?;
        for f in &collection.field_list {
            write!(out, ",{f}")?;
        }
        out.write_all(b"\n")?;
        for doc in &collection.documents {
            write!(out, "{}", doc.record_id)?;
            for v in &doc.values {
                write!(out, ",{v}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Collection> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(parse_err(1, "missing header".into())),
    };
    let mut columns = header.trim_end_matches('\r').split(',');
    if columns.next() != Some("record_id") {
        return Err(parse_err(1, "header must start with `record_id`".into()));
    }
    let field_list: Vec<String> = columns.map(str::to_string).collect();
    if field_list.is_empty() || field_list.iter().any(|f| f.is_empty()) {
        return Err(parse_err(1, "header must declare at least one named field".into()));
    }

    let mut documents = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let rid_text = parts.next().unwrap_or_default();
        let rid: RecordId = rid_text
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid record_id `{rid_text}`")))?;
        if rid != documents.len() as RecordId {
            return Err(parse_err(
                lineno,
                format!("expected record_id {}, found {rid}", documents.len()),
            ));
        }
        let mut values = SmallVec::with_capacity(field_list.len());
        for field in &field_list {
            let text = parts
                .next()
                .ok_or_else(|| parse_err(lineno, format!("missing value for field {field}")))?;
            let v: i64 = text
                .parse()
                .map_err(|_| parse_err(lineno, format!("field {field}: `{text}` is not an integer")))?;
            values.push(v);
        }
        if parts.next().is_some() {
            return Err(parse_err(lineno, "too many values".into()));
        }
        documents.push(Document { record_id: rid, values });
    }

    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("coll").to_string();
    Ok(Collection {
        name,
        field_list,
        documents,
    })
}
