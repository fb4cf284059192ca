//! Categorical datasets and the memoized family contingency tables that act
//! as sufficient statistics for every score in the crate.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Observed categorical data: `n` rows over `q` variables, each cell coded as
/// an index into that variable's sorted level alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dataset {
    names: Vec<String>,
    levels: Vec<Vec<String>>,
    n: usize,
    q: usize,
    /// Row-major `n x q` level indices.
    cells: Vec<u32>,
}

/// CSV ingestion options.
#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: true,
        }
    }
}

impl Dataset {
    /// Builds a dataset from pre-coded cells. `levels[j]` is the full level
    /// alphabet of variable `j` (at least two levels each); every cell must
    /// index into it. `rows` may be empty.
    pub fn new(names: Vec<String>, levels: Vec<Vec<String>>, rows: &[Vec<u32>]) -> Result<Self> {
        let q = levels.len();
        if q == 0 {
            return Err(Error::input("dataset needs at least one variable"));
        }
        if names.len() != q {
            return Err(Error::input("names and levels length mismatch"));
        }
        for (j, lv) in levels.iter().enumerate() {
            if lv.len() < 2 {
                return Err(Error::input(format!(
                    "variable '{}' (column {}) has fewer than two levels",
                    names[j],
                    j + 1
                )));
            }
        }
        let mut cells = Vec::with_capacity(rows.len() * q);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != q {
                return Err(Error::input(format!("row {} has wrong width", i + 1)));
            }
            for (j, &x) in row.iter().enumerate() {
                if (x as usize) >= levels[j].len() {
                    return Err(Error::input(format!(
                        "cell ({}, {}) out of range for its level set",
                        i + 1,
                        j + 1
                    )));
                }
                cells.push(x);
            }
        }
        Ok(Dataset {
            names,
            levels,
            n: rows.len(),
            q,
            cells,
        })
    }

    /// An `n = 0` dataset over the given binary-or-larger level alphabets.
    pub fn empty(names: Vec<String>, levels: Vec<Vec<String>>) -> Result<Self> {
        Dataset::new(names, levels, &[])
    }

    /// Convenience: `q` binary variables named `X1..Xq` with levels "0"/"1",
    /// rows given as 0/1 codes.
    pub fn binary(q: usize, rows: &[Vec<u32>]) -> Result<Self> {
        let names = (1..=q).map(|j| format!("X{j}")).collect();
        let levels = vec![vec!["0".to_string(), "1".to_string()]; q];
        Dataset::new(names, levels, rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn levels(&self, j: usize) -> &[String] {
        &self.levels[j]
    }

    /// Number of levels of variable `j`.
    pub fn card(&self, j: usize) -> usize {
        self.levels[j].len()
    }

    pub fn cards(&self) -> Vec<usize> {
        (0..self.q).map(|j| self.card(j)).collect()
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> u32 {
        self.cells[i * self.q + j]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn level_index(&self, j: usize, label: &str) -> Option<usize> {
        self.levels[j].iter().position(|l| l == label)
    }

    /// Reads a delimited text table. Levels per column are the distinct
    /// observed labels sorted lexicographically, so the coding is
    /// deterministic regardless of row order.
    pub fn ingest_csv(path: impl AsRef<Path>, options: CsvOptions) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| {
            Error::input(format!("cannot open {}: {e}", path.as_ref().display()))
        })?;
        Dataset::ingest_reader(file, options)
    }

    pub fn ingest_reader(reader: impl Read, options: CsvOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(options.delimiter)
            .has_headers(options.has_header)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut names: Vec<String> = Vec::new();
        if options.has_header {
            let headers = rdr.headers()?.clone();
            names = headers.iter().map(|h| h.to_string()).collect();
        }

        let mut raw: Vec<Vec<String>> = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::input(format!("row {}: {e}", i + 1)))?;
            let row: Vec<String> = record.iter().map(|s| s.to_string()).collect();
            for (j, value) in row.iter().enumerate() {
                if value.is_empty() {
                    return Err(Error::input(format!(
                        "missing cell at row {}, column {}",
                        i + 1,
                        j + 1
                    )));
                }
            }
            raw.push(row);
        }
        if raw.is_empty() {
            return Err(Error::input("no data rows"));
        }
        let q = raw[0].len();
        if names.is_empty() {
            names = (1..=q).map(|j| format!("X{j}")).collect();
        }

        let mut level_sets: Vec<BTreeSet<String>> = vec![BTreeSet::new(); q];
        for row in &raw {
            for (j, value) in row.iter().enumerate() {
                level_sets[j].insert(value.clone());
            }
        }
        for (j, set) in level_sets.iter().enumerate() {
            if set.len() < 2 {
                return Err(Error::input(format!(
                    "column {} ('{}') is constant; remove it before analysis",
                    j + 1,
                    names[j]
                )));
            }
        }
        let levels: Vec<Vec<String>> = level_sets
            .iter()
            .map(|s| s.iter().cloned().collect())
            .collect();
        let index: Vec<HashMap<&str, u32>> = levels
            .iter()
            .map(|lv| {
                lv.iter()
                    .enumerate()
                    .map(|(i, l)| (l.as_str(), i as u32))
                    .collect()
            })
            .collect();

        let mut cells = Vec::with_capacity(raw.len() * q);
        for row in &raw {
            for (j, value) in row.iter().enumerate() {
                cells.push(index[j][value.as_str()]);
            }
        }
        Ok(Dataset {
            names,
            levels,
            n: raw.len(),
            q,
            cells,
        })
    }

    /// Writes the dataset back out as CSV with a header row.
    pub fn to_csv_string(&self, delimiter: u8) -> String {
        let sep = delimiter as char;
        let mut out = String::new();
        out.push_str(&self.names.join(&sep.to_string()));
        out.push('\n');
        for i in 0..self.n {
            let row: Vec<&str> = (0..self.q)
                .map(|j| self.levels[j][self.cell(i, j) as usize].as_str())
                .collect();
            out.push_str(&row.join(&sep.to_string()));
            out.push('\n');
        }
        out
    }
}

/// Contingency table of a node given an ordered parent set: for each observed
/// parent configuration, the count vector over the node's levels. Unobserved
/// configurations are simply absent (all-zero).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyCounts {
    pub node: usize,
    /// Sorted ascending; configuration indices are mixed-radix over this
    /// order with the first parent as the least significant digit.
    pub parents: Vec<usize>,
    pub node_card: usize,
    pub parent_cards: Vec<usize>,
    pub table: BTreeMap<u64, Vec<u64>>,
    /// Dataset size (equals the grand total of all counts).
    pub n: usize,
}

impl FamilyCounts {
    /// Product of parent cardinalities, i.e. the full configuration space.
    pub fn config_space(&self) -> Result<u64> {
        let mut acc: u64 = 1;
        for &c in &self.parent_cards {
            acc = acc
                .checked_mul(c as u64)
                .ok_or_else(|| Error::input("parent configuration space overflows u64"))?;
        }
        Ok(acc)
    }

    /// Marginal count of a parent configuration.
    pub fn config_total(&self, k: u64) -> u64 {
        self.table.get(&k).map_or(0, |v| v.iter().sum())
    }

    /// Decodes a configuration index into per-parent level indices.
    pub fn decode_config(&self, mut k: u64) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.parent_cards.len());
        for &c in &self.parent_cards {
            out.push((k % c as u64) as usize);
            k /= c as u64;
        }
        out
    }
}

/// Mixed-radix configuration index over `parents` (sorted), reading levels
/// through `level_of`.
pub fn config_index(
    parents: &[usize],
    parent_cards: &[usize],
    mut level_of: impl FnMut(usize) -> usize,
) -> u64 {
    let mut idx: u64 = 0;
    let mut stride: u64 = 1;
    for (&p, &c) in parents.iter().zip(parent_cards) {
        idx += level_of(p) as u64 * stride;
        stride *= c as u64;
    }
    idx
}

/// Counts `n^{fa(j)}_{(m, k)}` for node `j` with the given parent set. The
/// parent list is sorted internally; configurations never observed are left
/// out of the table.
pub fn family_counts(ds: &Dataset, j: usize, pa: &[usize]) -> Result<FamilyCounts> {
    if j >= ds.q() {
        return Err(Error::input(format!("node {j} out of range")));
    }
    let mut parents = pa.to_vec();
    parents.sort_unstable();
    parents.dedup();
    if parents.len() != pa.len() {
        return Err(Error::logic("duplicate parent indices"));
    }
    if parents.binary_search(&j).is_ok() {
        return Err(Error::logic(format!("node {j} cannot be its own parent")));
    }
    for &p in &parents {
        if p >= ds.q() {
            return Err(Error::input(format!("parent {p} out of range")));
        }
    }
    let parent_cards: Vec<usize> = parents.iter().map(|&p| ds.card(p)).collect();
    // Reject configuration spaces that cannot be indexed.
    {
        let mut acc: u64 = 1;
        for &c in &parent_cards {
            acc = acc
                .checked_mul(c as u64)
                .ok_or_else(|| Error::input("parent configuration space overflows u64"))?;
        }
    }
    let node_card = ds.card(j);
    let mut table: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for i in 0..ds.n() {
        let k = config_index(&parents, &parent_cards, |p| ds.cell(i, p) as usize);
        let m = ds.cell(i, j) as usize;
        table.entry(k).or_insert_with(|| vec![0; node_card])[m] += 1;
    }
    Ok(FamilyCounts {
        node: j,
        parents,
        node_card,
        parent_cards,
        table,
        n: ds.n(),
    })
}

/// LRU-capped cache of family contingency tables. Parent sets recur heavily
/// during MCMC, so hits dominate; eviction scans are rare. One cache is owned
/// per chain, so no synchronization is needed.
#[derive(Debug)]
pub struct CountsCache {
    cap: usize,
    tick: u64,
    map: HashMap<(usize, Vec<usize>), (Arc<FamilyCounts>, u64)>,
}

pub const DEFAULT_CACHE_CAP: usize = 4096;

impl CountsCache {
    pub fn new(cap: usize) -> Self {
        CountsCache {
            cap: cap.max(1),
            tick: 0,
            map: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Fetches (or computes and stores) counts for `(j, sorted parents)`.
    pub fn get(&mut self, ds: &Dataset, j: usize, pa: &[usize]) -> Result<Arc<FamilyCounts>> {
        let mut key_pa = pa.to_vec();
        key_pa.sort_unstable();
        let key = (j, key_pa);
        self.tick += 1;
        if let Some((counts, used)) = self.map.get_mut(&key) {
            *used = self.tick;
            return Ok(Arc::clone(counts));
        }
        let counts = Arc::new(family_counts(ds, j, &key.1)?);
        if self.map.len() >= self.cap {
            // Evict the least recently used entry; ticks are unique so the
            // choice is deterministic.
            if let Some(victim) = self
                .map
                .iter()
                .min_by_key(|(_, (_, used))| *used)
                .map(|(k, _)| k.clone())
            {
                self.map.remove(&victim);
            }
        }
        self.map.insert(key, (Arc::clone(&counts), self.tick));
        Ok(counts)
    }
}
