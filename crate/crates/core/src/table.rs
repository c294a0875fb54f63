//! Dimension value table: ranked top-k values per dimension for the whole
//! scope and for each of its clusters, with links between columns that share
//! a value.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{Cluster, NodeRange};
use crate::ingest::{derive_directories, tokenize_keywords, CommitRecord};
use crate::scope::Scope;
use crate::stem::StemSequence;

/// Number of values per dimension shown in each column unless overridden.
pub const DEFAULT_TOP_K: usize = 5;

/// Column id of the scope-wide column.
pub const SCOPE_COLUMN_ID: &str = "scope";

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("{0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Author,
    Keyword,
    File,
    Directory,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Author,
        Dimension::Keyword,
        Dimension::File,
        Dimension::Directory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Author => "author",
            Dimension::Keyword => "keyword",
            Dimension::File => "file",
            Dimension::Directory => "directory",
        }
    }

    /// FILE and DIRECTORY values carry changed-line totals.
    pub fn has_loc(self) -> bool {
        matches!(self, Dimension::File | Dimension::Directory)
    }

    /// Parses a comma-separated list, returning dimensions in canonical order.
    pub fn parse_list(s: &str) -> Result<Vec<Dimension>, TableError> {
        let mut dims = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(Dimension::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        dims.sort();
        dims.dedup();
        Ok(dims)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| TableError::InvalidArgument(format!("unknown dimension {s:?}")))
    }
}

/// Distinct values a commit carries in `dim`.
pub fn commit_values(commit: &CommitRecord, dim: Dimension) -> Vec<String> {
    match dim {
        Dimension::Author => vec![commit.author.clone()],
        Dimension::Keyword => tokenize_keywords(&commit.message),
        Dimension::File => commit.files().into_iter().map(str::to_string).collect(),
        Dimension::Directory => commit.directories(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValueStats {
    /// Number of distinct commits carrying the value.
    pub count: usize,
    pub loc: Option<u64>,
}

/// Complete value statistics for `dim` over `commits`.
pub fn full_frequency(commits: &[&CommitRecord], dim: Dimension) -> BTreeMap<String, ValueStats> {
    let mut out: BTreeMap<String, ValueStats> = BTreeMap::new();
    for commit in commits {
        match dim {
            Dimension::Author | Dimension::Keyword => {
                for value in commit_values(commit, dim) {
                    out.entry(value).or_default().count += 1;
                }
            }
            Dimension::File | Dimension::Directory => {
                let mut per_commit: BTreeMap<String, u64> = BTreeMap::new();
                for change in &commit.changes {
                    if dim == Dimension::File {
                        *per_commit.entry(change.path.clone()).or_default() += change.loc();
                    } else {
                        for dir in derive_directories(&change.path) {
                            *per_commit.entry(dir).or_default() += change.loc();
                        }
                    }
                }
                for (value, loc) in per_commit {
                    let stats = out.entry(value).or_default();
                    stats.count += 1;
                    *stats.loc.get_or_insert(0) += loc;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub value: String,
    pub count: usize,
    pub loc: Option<u64>,
    /// 1-based; also the brightness step the UI renders.
    pub rank: usize,
}

/// Ranks by count desc, loc desc (absent = 0), value asc and keeps the top `k`.
pub fn top_k(freq: &BTreeMap<String, ValueStats>, k: usize) -> Vec<FrequencyEntry> {
    let mut all: Vec<(&String, &ValueStats)> = freq.iter().collect();
    all.sort_by(|(va, a), (vb, b)| {
        b.count
            .cmp(&a.count)
            .then_with(|| b.loc.unwrap_or(0).cmp(&a.loc.unwrap_or(0)))
            .then_with(|| va.cmp(vb))
    });
    all.into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (value, stats))| FrequencyEntry {
            value: value.clone(),
            count: stats.count,
            loc: stats.loc,
            rank: i + 1,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionRow {
    pub dimension: Dimension,
    pub entries: Vec<FrequencyEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub id: String,
    pub node_range: NodeRange,
    pub commit_count: usize,
    pub rows: Vec<DimensionRow>,
}

impl Column {
    pub fn row(&self, dim: Dimension) -> Option<&DimensionRow> {
        self.rows.iter().find(|r| r.dimension == dim)
    }
}

/// The same value appearing in the top-k of two columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankLink {
    pub dimension: Dimension,
    pub value: String,
    pub from_column: String,
    pub to_column: String,
    pub from_rank: usize,
    pub to_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionValueTable {
    pub scope_id: String,
    pub k: usize,
    pub dimensions: Vec<Dimension>,
    pub scope_column: Column,
    pub cluster_columns: Vec<Column>,
    pub rank_links: Vec<RankLink>,
}

/// Builds the table for `scope`. `dims` restricts (and orders canonically)
/// the dimension rows; `None` renders all four.
pub fn build_table(
    stem: &StemSequence,
    scope: &Scope,
    k: usize,
    dims: Option<&[Dimension]>,
) -> Result<DimensionValueTable, TableError> {
    if k == 0 {
        return Err(TableError::InvalidArgument("k must be at least 1".into()));
    }
    let dimensions: Vec<Dimension> = match dims {
        Some(list) => Dimension::ALL.into_iter().filter(|d| list.contains(d)).collect(),
        None => Dimension::ALL.to_vec(),
    };
    let column = |id: &str, range: NodeRange| {
        let commits = stem.commits_in(range.first, range.last);
        let rows = dimensions
            .iter()
            .map(|&dim| {
                let entries = top_k(&full_frequency(&commits, dim), k);
                debug_assert!(k != DEFAULT_TOP_K || entries.iter().all(|e| (1..=5).contains(&e.rank)));
                DimensionRow {
                    dimension: dim,
                    entries,
                }
            })
            .collect();
        Column {
            id: id.to_string(),
            node_range: range,
            commit_count: commits.len(),
            rows,
        }
    };

    let scope_column = column(SCOPE_COLUMN_ID, scope.node_range);
    let cluster_columns: Vec<Column> = scope.clusters.iter().map(|c| column(&c.id, c.node_range)).collect();

    let mut rank_links = Vec::new();
    for cluster in &cluster_columns {
        link_columns(&scope_column, cluster, &mut rank_links);
    }
    for pair in cluster_columns.windows(2) {
        link_columns(&pair[0], &pair[1], &mut rank_links);
    }

    Ok(DimensionValueTable {
        scope_id: scope.id.clone(),
        k,
        dimensions,
        scope_column,
        cluster_columns,
        rank_links,
    })
}

fn link_columns(from: &Column, to: &Column, out: &mut Vec<RankLink>) {
    for row in &from.rows {
        let Some(other) = to.row(row.dimension) else { continue };
        for entry in &row.entries {
            if let Some(hit) = other.entries.iter().find(|e| e.value == entry.value) {
                out.push(RankLink {
                    dimension: row.dimension,
                    value: entry.value.clone(),
                    from_column: from.id.clone(),
                    to_column: to.id.clone(),
                    from_rank: entry.rank,
                    to_rank: hit.rank,
                });
            }
        }
    }
}

impl DimensionValueTable {
    pub fn columns(&self) -> impl Iterator<Item = &Column> {
        std::iter::once(&self.scope_column).chain(self.cluster_columns.iter())
    }

    /// Flat CSV: `column_id,dimension,rank,value,count,loc`, LF line endings,
    /// quoting only where RFC 4180 requires it.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Vec::new());
        writer
            .write_record(["column_id", "dimension", "rank", "value", "count", "loc"])
            .expect("in-memory csv write");
        for column in self.columns() {
            for row in &column.rows {
                for e in &row.entries {
                    let loc = e.loc.map(|l| l.to_string()).unwrap_or_default();
                    writer
                        .write_record([
                            column.id.as_str(),
                            row.dimension.as_str(),
                            &e.rank.to_string(),
                            &e.value,
                            &e.count.to_string(),
                            &loc,
                        ])
                        .expect("in-memory csv write");
                }
            }
        }
        let bytes = writer.into_inner().expect("in-memory csv flush");
        String::from_utf8(bytes).expect("csv of utf-8 fields")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitDetail {
    pub hash: String,
    pub stem_index: usize,
    /// True for the node's first-parent commit, false for squashed ones.
    pub lead: bool,
    pub author: String,
    pub timestamp: i64,
    pub message: String,
    pub keywords: Vec<String>,
    pub files: Vec<String>,
    pub directories: Vec<String>,
}

/// Member commits of a cluster: stem order, each node's lead before its
/// squashed commits.
pub fn commit_details(stem: &StemSequence, cluster: &Cluster) -> Vec<CommitDetail> {
    let range = cluster.node_range;
    range
        .indices()
        .flat_map(|i| {
            let node = stem.node(i);
            node.members().map(move |h| (i, h == node.lead, stem.repo().commit(h)))
        })
        .map(|(index, lead, c)| CommitDetail {
            hash: c.hash.clone(),
            stem_index: index,
            lead,
            author: c.author.clone(),
            timestamp: c.timestamp,
            message: c.message.clone(),
            keywords: c.keywords(),
            files: c.files().into_iter().map(str::to_string).collect(),
            directories: c.directories(),
        })
        .collect()
}
