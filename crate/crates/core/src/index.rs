//! Sorted secondary indexes over a collection.

use smallvec::SmallVec;

use crate::collection::{Collection, RecordId};
use crate::error::{Error, Result};

pub type IndexKey = SmallVec<[i64; 2]>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IndexEntry {
    pub key: IndexKey,
    pub rid: RecordId,
}

/// Entries are sorted by key tuple, then record id; one entry per document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Index {
    name: String,
    key_fields: Vec<String>,
    entries: Vec<IndexEntry>,
}

impl Index {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn key_fields(&self) -> &[String] {
        &self.key_fields
    }

    pub fn leading_field(&self) -> &str {
        &self.key_fields[0]
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Position of the first entry whose leading key is `>= low`.
    pub fn seek(&self, low: i64) -> usize {
        self.entries.partition_point(|e| e.key[0] < low)
    }

    /// Number of entries with `low <= leading key < high`.
    pub fn count_in_range(&self, low: i64, high: i64) -> usize {
        if high <= low {
            return 0;
        }
        self.seek(high) - self.seek(low)
    }
}

/// Index name in the `<f1>_1[_<f2>_1…]` convention.
pub fn index_name<S: AsRef<str>>(key_fields: &[S]) -> String {
    key_fields
        .iter()
        .map(|f| format!("{}_1", f.as_ref()))
        .collect::<Vec<_>>()
        .join("_")
}

pub fn build_index<S: AsRef<str>>(collection: &Collection, key_fields: &[S]) -> Result<Index> {
    if key_fields.is_empty() {
        return Err(Error::Config("index needs at least one key field".into()));
    }
    let columns: Vec<usize> = key_fields
        .iter()
        .map(|f| collection.column(f.as_ref()))
        .collect::<Result<_>>()?;

    let mut entries: Vec<IndexEntry> = collection
        .documents()
        .iter()
        .map(|d| IndexEntry {
            key: columns.iter().map(|&c| d.values[c]).collect(),
            rid: d.record_id,
        })
        .collect();
    entries.sort_unstable();

    Ok(Index {
        name: index_name(key_fields),
        key_fields: key_fields.iter().map(|f| f.as_ref().to_string()).collect(),
        entries,
    })
}

/// Indexes in creation order.
#[derive(Debug, Clone, Default)]
pub struct IndexCatalog {
    indexes: Vec<Index>,
}

impl IndexCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, index: Index) -> Result<()> {
        if self.get(index.name()).is_some() {
            return Err(Error::DuplicateIndex(index.name().to_string()));
        }
        self.indexes.push(index);
        Ok(())
    }

    /// Builds and registers an index over `key_fields`.
    pub fn create<S: AsRef<str>>(&mut self, collection: &Collection, key_fields: &[S]) -> Result<()> {
        self.add(build_index(collection, key_fields)?)
    }

    pub fn get(&self, name: &str) -> Option<&Index> {
        self.indexes.iter().find(|i| i.name() == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Index> {
        self.indexes.iter()
    }

    pub fn len(&self) -> usize {
        self.indexes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indexes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collection::{generate_dataset, Distribution};

    fn coll(rows: &[[i64; 2]]) -> Collection {
        Collection::from_rows("t", vec!["A".into(), "B".into()], rows.iter().map(|r| r.to_vec())).unwrap()
    }

    #[test]
    fn single_field_index_sorted() {
        let c = coll(&[[5, 0], [1, 0], [3, 0]]);
        let idx = build_index(&c, &["A"]).unwrap();
        assert_eq!(idx.name(), "A_1");
        let got: Vec<_> = idx.entries().iter().map(|e| (e.key[0], e.rid)).collect();
        assert_eq!(got, vec![(1, 1), (3, 2), (5, 0)]);
    }

    #[test]
    fn compound_index_lexicographic() {
        let c = coll(&[[1, 9], [1, 2]]);
        let idx = build_index(&c, &["A", "B"]).unwrap();
        assert_eq!(idx.name(), "A_1_B_1");
        let keys: Vec<_> = idx.entries().iter().map(|e| e.key.to_vec()).collect();
        assert_eq!(keys, vec![vec![1, 2], vec![1, 9]]);
        assert_eq!(idx.entries()[0].rid, 1);
    }

    #[test]
    fn duplicate_keys_ordered_by_record_id() {
        let c = coll(&[[2, 0], [1, 0], [2, 0], [1, 0]]);
        let idx = build_index(&c, &["A"]).unwrap();
        let rids: Vec<_> = idx.entries().iter().map(|e| e.rid).collect();
        assert_eq!(rids, vec![1, 3, 0, 2]);
    }

    #[test]
    fn unknown_field_is_named() {
        let c = coll(&[[1, 2]]);
        let err = build_index(&c, &["C"]).unwrap_err();
        assert!(err.to_string().contains("`C`"), "{err}");
    }

    #[test]
    fn permutation_endpoints_and_counts() {
        let c = generate_dataset(100_000, Distribution::UniformDistinct, 7).unwrap();
        let idx = build_index(&c, &["B"]).unwrap();
        assert_eq!(idx.len(), c.len());
        assert_eq!(idx.entries()[0].key[0], 0);
        assert_eq!(idx.entries().last().unwrap().key[0], 99_999);
        assert_eq!(idx.count_in_range(0, 20_000), 20_000);
        assert_eq!(idx.count_in_range(10, 10), 0);
        assert_eq!(idx.count_in_range(-5, 1_000_000), 100_000);
    }

    #[test]
    fn catalog_rejects_duplicates_and_keeps_order() {
        let c = coll(&[[1, 2]]);
        let mut cat = IndexCatalog::new();
        cat.create(&c, &["B"]).unwrap();
        cat.create(&c, &["A"]).unwrap();
        assert!(matches!(cat.create(&c, &["B"]), Err(Error::DuplicateIndex(_))));
        let names: Vec<_> = cat.iter().map(|i| i.name()).collect();
        assert_eq!(names, vec!["B_1", "A_1"]);
    }
}
