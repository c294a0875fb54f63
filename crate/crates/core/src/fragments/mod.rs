//! Information fragments: containment inspection over clusters, stem-wide
//! history, and the pin board.

mod pins;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::CommitRecord;
use crate::scope::Scope;
use crate::stem::StemSequence;
use crate::table::{commit_values, Dimension};

pub use pins::{
    load_board, repo_dir_name, save_board, stage_board, Pin, PinBoard, PinStore, StagedBoard, PINS_FILE, PINS_FORMAT,
    PINS_VERSION,
};

#[derive(Debug, Error)]
pub enum FragmentError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error("failed to persist {path}: {cause}")]
    PersistenceFailure { path: String, cause: String },
}

impl FragmentError {
    pub fn code(&self) -> &'static str {
        match self {
            FragmentError::InvalidArgument(_) => "InvalidArgument",
            FragmentError::PersistenceFailure { .. } => "PersistenceFailure",
        }
    }
}

/// A `(dimension, value)` clue. Keyword values are stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawFragment")]
pub struct Fragment {
    pub dimension: Dimension,
    pub value: String,
}

#[derive(Deserialize)]
struct RawFragment {
    dimension: Dimension,
    value: String,
}

impl TryFrom<RawFragment> for Fragment {
    type Error = FragmentError;

    fn try_from(raw: RawFragment) -> Result<Self, Self::Error> {
        Fragment::new(raw.dimension, raw.value)
    }
}

impl Fragment {
    pub fn new(dimension: Dimension, value: impl Into<String>) -> Result<Self, FragmentError> {
        let value = value.into();
        if value.is_empty() {
            return Err(FragmentError::InvalidArgument("fragment value is empty".into()));
        }
        let value = if dimension == Dimension::Keyword {
            value.to_lowercase()
        } else {
            value
        };
        Ok(Fragment { dimension, value })
    }

    pub fn matches(&self, commit: &CommitRecord) -> bool {
        commit_values(commit, self.dimension).contains(&self.value)
    }
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.dimension, self.value)
    }
}

/// Parses `dimension=value`.
impl FromStr for Fragment {
    type Err = FragmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (dim, value) = s
            .split_once('=')
            .ok_or_else(|| FragmentError::InvalidArgument(format!("expected dimension=value, got {s:?}")))?;
        let dim = dim
            .parse::<Dimension>()
            .map_err(|e| FragmentError::InvalidArgument(e.to_string()))?;
        Fragment::new(dim, value)
    }
}

/// True when any commit carries the fragment. Every value counts, not only
/// those that make a column's top-k.
pub fn contains(commits: &[&CommitRecord], fragment: &Fragment) -> bool {
    commits.iter().any(|c| fragment.matches(c))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InspectionMatrix {
    pub scope_id: String,
    pub fragments: Vec<Fragment>,
    pub clusters: Vec<String>,
    /// `contains[f][c]`: fragment `f` occurs in cluster `c`.
    pub contains: Vec<Vec<bool>>,
    pub matched_sum: Vec<usize>,
}

pub fn inspect(stem: &StemSequence, scope: &Scope, fragments: &[Fragment]) -> Result<InspectionMatrix, FragmentError> {
    if fragments.is_empty() {
        return Err(FragmentError::InvalidArgument(
            "inspect needs at least one fragment".into(),
        ));
    }
    let cluster_commits: Vec<Vec<&CommitRecord>> = scope
        .clusters
        .iter()
        .map(|c| stem.commits_in(c.node_range.first, c.node_range.last))
        .collect();
    let grid: Vec<Vec<bool>> = fragments
        .iter()
        .map(|f| cluster_commits.iter().map(|commits| contains(commits, f)).collect())
        .collect();
    let matched_sum = (0..scope.clusters.len())
        .map(|c| grid.iter().filter(|row| row[c]).count())
        .collect();
    Ok(InspectionMatrix {
        scope_id: scope.id.clone(),
        fragments: fragments.to_vec(),
        clusters: scope.clusters.iter().map(|c| c.id.clone()).collect(),
        contains: grid,
        matched_sum,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub hash: String,
    pub timestamp: i64,
    /// Squashed commits report their node's index.
    pub stem_index: usize,
    pub in_scope: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentHistory {
    pub fragment: Fragment,
    pub scope_id: Option<String>,
    pub occurrences: Vec<Occurrence>,
}

/// Every stem commit carrying the fragment, flagged against `scope` if given.
pub fn history(stem: &StemSequence, fragment: &Fragment, scope: Option<&Scope>) -> FragmentHistory {
    let occurrences = stem
        .indexed_commits()
        .filter(|(_, c)| fragment.matches(c))
        .map(|(index, c)| Occurrence {
            hash: c.hash.clone(),
            timestamp: c.timestamp,
            stem_index: index,
            in_scope: scope.is_some_and(|s| s.node_range.contains(index)),
        })
        .collect();
    FragmentHistory {
        fragment: fragment.clone(),
        scope_id: scope.map(|s| s.id.clone()),
        occurrences,
    }
}
