//! Exploration scopes: a contiguous stem interval plus its active cluster cut.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clustering::{
    build_dendrogram_in, cluster_by_release_in, cut, granularity_to_k, Cluster, ClusteringError, Dendrogram, NodeRange,
    SimilarityWeights,
};
use crate::stem::StemSequence;

#[derive(Debug, Error, PartialEq)]
pub enum ScopeError {
    #[error("no stem node passes the scope filter")]
    EmptyScope,
    #[error("unknown release {0:?}")]
    UnknownRelease(String),
    #[error("invalid scope filter: {0}")]
    InvalidFilter(String),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
}

/// Scope selection. At most one of the index, release or date ranges picks
/// the interval; authors and keywords only mark matching nodes inside it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScopeFilter {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub date_from: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub date_to: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub release_from: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub release_to: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub authors: Option<BTreeSet<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keywords: Option<BTreeSet<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index_from: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index_to: Option<usize>,
}

enum Source<'a> {
    Everything,
    Index(Option<usize>, Option<usize>),
    Release(Option<&'a str>, Option<&'a str>),
    Date(Option<i64>, Option<i64>),
}

impl ScopeFilter {
    fn source(&self) -> Result<Source<'_>, ScopeError> {
        let by_index = self.index_from.is_some() || self.index_to.is_some();
        let by_release = self.release_from.is_some() || self.release_to.is_some();
        let by_date = self.date_from.is_some() || self.date_to.is_some();
        match (by_index, by_release, by_date) {
            (false, false, false) => Ok(Source::Everything),
            (true, false, false) => Ok(Source::Index(self.index_from, self.index_to)),
            (false, true, false) => Ok(Source::Release(
                self.release_from.as_deref(),
                self.release_to.as_deref(),
            )),
            (false, false, true) => Ok(Source::Date(self.date_from, self.date_to)),
            _ => Err(ScopeError::InvalidFilter(
                "combine at most one of index, release and date ranges".into(),
            )),
        }
    }

    /// Keyword refinements compare against lowercase tokens.
    fn canonical(&self) -> ScopeFilter {
        let mut out = self.clone();
        out.authors = out.authors.filter(|a| !a.is_empty());
        out.keywords = out
            .keywords
            .filter(|k| !k.is_empty())
            .map(|k| k.iter().map(|w| w.to_lowercase()).collect());
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMode {
    /// Dendrogram cut driven by the granularity slider.
    #[default]
    Similarity,
    /// Boundaries after every release node; granularity is ignored.
    Release,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScopeOptions {
    pub mode: ClusterMode,
    pub weights: SimilarityWeights,
}

#[derive(Debug, Clone, Serialize)]
pub struct Scope {
    pub id: String,
    pub filter: ScopeFilter,
    pub node_range: NodeRange,
    pub granularity: f64,
    pub mode: ClusterMode,
    pub clusters: Vec<Cluster>,
    pub matched_nodes: Vec<usize>,
    #[serde(skip)]
    dendrogram: Option<Arc<Dendrogram>>,
}

impl Scope {
    pub fn dendrogram(&self) -> Option<&Dendrogram> {
        self.dendrogram.as_deref()
    }

    pub fn cluster(&self, id: &str) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.id == id)
    }

    pub fn commit_count(&self) -> usize {
        self.clusters.iter().map(|c| c.commit_count).sum()
    }
}

pub fn resolve_scope(stem: &StemSequence, filter: &ScopeFilter, g: f64) -> Result<Scope, ScopeError> {
    resolve_scope_with(stem, filter, g, &ScopeOptions::default())
}

pub fn resolve_scope_with(
    stem: &StemSequence,
    filter: &ScopeFilter,
    g: f64,
    options: &ScopeOptions,
) -> Result<Scope, ScopeError> {
    options.weights.validate()?;
    if stem.is_empty() {
        return Err(ScopeError::EmptyScope);
    }
    let filter = filter.canonical();
    let node_range = contiguous_range(stem, &filter)?;
    let matched_nodes = node_range
        .indices()
        .filter(|&i| refinements_match(stem, &filter, i))
        .collect();

    let (clusters, dendrogram) = match options.mode {
        ClusterMode::Similarity => {
            let k = granularity_to_k(g, node_range.len())?;
            let d = Arc::new(build_dendrogram_in(stem, node_range, &options.weights));
            (cut(&d, k)?, Some(d))
        }
        ClusterMode::Release => {
            granularity_to_k(g, node_range.len())?;
            (cluster_by_release_in(stem, node_range), None)
        }
    };
    let id = scope_id(stem, &filter, node_range, options);
    Ok(Scope {
        id,
        filter,
        node_range,
        granularity: g,
        mode: options.mode,
        clusters,
        matched_nodes,
        dendrogram,
    })
}

/// Re-cuts an existing scope at a new granularity, reusing its dendrogram.
pub fn rescope(scope: &Scope, g: f64) -> Result<Scope, ScopeError> {
    let k = granularity_to_k(g, scope.node_range.len())?;
    let mut out = scope.clone();
    out.granularity = g;
    if let Some(d) = &scope.dendrogram {
        out.clusters = cut(d, k)?;
    }
    Ok(out)
}

fn contiguous_range(stem: &StemSequence, filter: &ScopeFilter) -> Result<NodeRange, ScopeError> {
    let last = stem.len() - 1;
    match filter.source()? {
        Source::Everything => Ok(NodeRange::new(0, last)),
        Source::Index(from, to) => {
            let from = from.unwrap_or(0);
            let to = to.unwrap_or(last).min(last);
            if from > to {
                return Err(ScopeError::EmptyScope);
            }
            Ok(NodeRange::new(from, to))
        }
        Source::Release(from, to) => {
            let first = match from {
                Some(tag) => release_interval(stem, tag)?.first,
                None => 0,
            };
            let end = match to {
                Some(tag) => release_interval(stem, tag)?.last,
                None => last,
            };
            if first > end {
                return Err(ScopeError::EmptyScope);
            }
            Ok(NodeRange::new(first, end))
        }
        Source::Date(from, to) => {
            let from = from.unwrap_or(i64::MIN);
            let to = to.unwrap_or(i64::MAX);
            let mut passing = (0..stem.len()).filter(|&i| (from..=to).contains(&stem.lead(i).timestamp));
            let first = passing.next().ok_or(ScopeError::EmptyScope)?;
            let end = passing.next_back().unwrap_or(first);
            Ok(NodeRange::new(first, end))
        }
    }
}

/// The interval a release tag names: just after the previous release node, up
/// to and including the node that carries the tag.
pub fn release_interval(stem: &StemSequence, tag: &str) -> Result<NodeRange, ScopeError> {
    let node = stem
        .nodes()
        .iter()
        .find(|n| n.members().any(|h| stem.repo().commit(h).tags.iter().any(|t| t == tag)))
        .ok_or_else(|| ScopeError::UnknownRelease(tag.to_string()))?;
    let first = stem.nodes()[..node.index]
        .iter()
        .rposition(|n| n.release.is_some())
        .map_or(0, |i| i + 1);
    Ok(NodeRange::new(first, node.index))
}

fn refinements_match(stem: &StemSequence, filter: &ScopeFilter, index: usize) -> bool {
    let node = stem.node(index);
    let commits = || node.members().map(|h| stem.repo().commit(h));
    let author_ok = filter
        .authors
        .as_ref()
        .is_none_or(|authors| commits().any(|c| authors.contains(&c.author)));
    let keyword_ok = filter
        .keywords
        .as_ref()
        .is_none_or(|wanted| commits().any(|c| c.keywords().iter().any(|k| wanted.contains(k))));
    author_ok && keyword_ok
}

fn scope_id(stem: &StemSequence, filter: &ScopeFilter, range: NodeRange, options: &ScopeOptions) -> String {
    let material = serde_json::json!({
        "repo": stem.repo().name(),
        "head": stem.repo().default_head(),
        "filter": filter,
        "node_range": range,
        "mode": options.mode,
        "weights": options.weights,
    });
    let digest = Sha256::digest(material.to_string().as_bytes());
    format!("s{}", &hex::encode(digest)[..16])
}
