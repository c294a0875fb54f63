//! Order-constrained agglomerative clustering of stem nodes.
//!
//! Only runs that are adjacent on the stem are ever merged, so every level of
//! the dendrogram partitions the stem interval into contiguous runs. A run's
//! features are the set unions of its members; pair scores are recomputed
//! after each merge and are therefore not monotone.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stem::StemSequence;

#[derive(Debug, Error, PartialEq)]
pub enum ClusteringError {
    #[error("invalid similarity weights: {0}")]
    InvalidWeights(String),
    #[error("{0}")]
    InvalidArgument(String),
}

/// Inclusive interval of stem indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRange {
    pub first: usize,
    pub last: usize,
}

impl NodeRange {
    pub fn new(first: usize, last: usize) -> Self {
        debug_assert!(first <= last);
        NodeRange { first, last }
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        (self.first..=self.last).contains(&index)
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureSets {
    pub files: BTreeSet<String>,
    pub authors: BTreeSet<String>,
    pub keywords: BTreeSet<String>,
}

impl FeatureSets {
    fn absorb(&mut self, other: FeatureSets) {
        self.files.extend(other.files);
        self.authors.extend(other.authors);
        self.keywords.extend(other.keywords);
    }
}

/// Union of touched files, authors and keywords over every member commit of
/// the node range.
pub fn node_features(stem: &StemSequence, range: NodeRange) -> FeatureSets {
    let mut out = FeatureSets::default();
    for commit in stem.commits_in(range.first, range.last) {
        out.files.extend(commit.changes.iter().map(|c| c.path.clone()));
        out.authors.insert(commit.author.clone());
        out.keywords.extend(commit.keywords());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub file: f64,
    pub author: f64,
    pub keyword: f64,
}

impl SimilarityWeights {
    pub fn new(file: f64, author: f64, keyword: f64) -> Result<Self, ClusteringError> {
        let w = SimilarityWeights { file, author, keyword };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ClusteringError> {
        let parts = [self.file, self.author, self.keyword];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ClusteringError::InvalidWeights(format!(
                "{self:?} has a negative or non-finite weight"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ClusteringError::InvalidWeights(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights {
            file: 0.5,
            author: 0.25,
            keyword: 0.25,
        }
    }
}

/// Jaccard index; two empty sets are identical (1.0).
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

pub fn similarity(a: &FeatureSets, b: &FeatureSets, w: &SimilarityWeights) -> f64 {
    w.file * jaccard(&a.files, &b.files)
        + w.author * jaccard(&a.authors, &b.authors)
        + w.keyword * jaccard(&a.keywords, &b.keywords)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Merge {
    pub left: NodeRange,
    pub right: NodeRange,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram {
    range: NodeRange,
    leaf_commits: Vec<usize>,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn range(&self) -> NodeRange {
        self.range
    }

    /// Stem indices of the leaves, in stem order.
    pub fn leaves(&self) -> std::ops::RangeInclusive<usize> {
        self.range.indices()
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: String,
    pub node_range: NodeRange,
    pub commit_count: usize,
}

impl Cluster {
    fn new(node_range: NodeRange, commit_count: usize) -> Self {
        Cluster {
            id: format!("c{}-{}", node_range.first, node_range.last),
            node_range,
            commit_count,
        }
    }
}

#[derive(Debug)]
struct Candidate {
    score: f64,
    left: usize,
    right: usize,
    left_version: u32,
    right_version: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Max-heap: highest score first, then the smaller left position.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.left_version.cmp(&self.left_version))
            .then_with(|| other.right_version.cmp(&self.right_version))
    }
}

/// Dendrogram over the whole stem.
pub fn build_dendrogram(stem: &StemSequence, w: &SimilarityWeights) -> Dendrogram {
    build_dendrogram_in(stem, NodeRange::new(0, stem.len() - 1), w)
}

/// Dendrogram over the stem nodes in `range` only.
pub fn build_dendrogram_in(stem: &StemSequence, range: NodeRange, w: &SimilarityWeights) -> Dendrogram {
    let n = range.len();
    let leaf_commits: Vec<usize> = range.indices().map(|i| stem.node(i).total_commits()).collect();

    // Runs are identified by the position of their first leaf.
    let mut features: Vec<FeatureSets> = range
        .indices()
        .map(|i| node_features(stem, NodeRange::new(i, i)))
        .collect();
    let mut end: Vec<usize> = (0..n).collect();
    let mut next: Vec<Option<usize>> = (0..n).map(|i| (i + 1 < n).then_some(i + 1)).collect();
    let mut prev: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
    let mut version = vec![0u32; n];
    let mut alive = vec![true; n];

    let candidate = |features: &[FeatureSets], version: &[u32], left: usize, right: usize| Candidate {
        score: similarity(&features[left], &features[right], w),
        left,
        right,
        left_version: version[left],
        right_version: version[right],
    };

    let mut heap: BinaryHeap<Candidate> = (0..n.saturating_sub(1))
        .map(|i| candidate(&features, &version, i, i + 1))
        .collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    while let Some(best) = heap.pop() {
        let (l, r) = (best.left, best.right);
        if !alive[l] || !alive[r] || version[l] != best.left_version || version[r] != best.right_version {
            continue;
        }
        merges.push(Merge {
            left: NodeRange::new(range.first + l, range.first + end[l]),
            right: NodeRange::new(range.first + r, range.first + end[r]),
            score: best.score,
        });
        let absorbed = std::mem::take(&mut features[r]);
        features[l].absorb(absorbed);
        alive[r] = false;
        end[l] = end[r];
        next[l] = next[r];
        if let Some(nx) = next[l] {
            prev[nx] = Some(l);
        }
        version[l] += 1;
        if let Some(p) = prev[l] {
            heap.push(candidate(&features, &version, p, l));
        }
        if let Some(nx) = next[l] {
            heap.push(candidate(&features, &version, l, nx));
        }
    }
    debug_assert_eq!(merges.len(), n - 1);
    Dendrogram {
        range,
        leaf_commits,
        merges,
    }
}

/// Replays merges until exactly `min(k, n)` runs remain; clusters in stem order.
pub fn cut(d: &Dendrogram, k: usize) -> Result<Vec<Cluster>, ClusteringError> {
    if k == 0 {
        return Err(ClusteringError::InvalidArgument(
            "cluster count must be at least 1".into(),
        ));
    }
    let n = d.range.len();
    let replay = n - k.min(n);
    let mut starts = vec![true; n];
    for merge in &d.merges[..replay] {
        starts[merge.right.first - d.range.first] = false;
    }
    let mut clusters = Vec::with_capacity(k.min(n));
    let mut run_start = 0;
    for pos in 1..=n {
        if starts.get(pos).copied().unwrap_or(true) {
            let commits = d.leaf_commits[run_start..pos].iter().sum();
            clusters.push(Cluster::new(
                NodeRange::new(d.range.first + run_start, d.range.first + pos - 1),
                commits,
            ));
            run_start = pos;
        }
    }
    Ok(clusters)
}

/// Splits the whole stem after every node that carries a release.
pub fn cluster_by_release(stem: &StemSequence) -> Vec<Cluster> {
    cluster_by_release_in(stem, NodeRange::new(0, stem.len() - 1))
}

/// Release clustering restricted to `range`.
pub fn cluster_by_release_in(stem: &StemSequence, range: NodeRange) -> Vec<Cluster> {
    let mut clusters = Vec::new();
    let mut start = range.first;
    let mut commits = 0;
    for i in range.indices() {
        let node = stem.node(i);
        commits += node.total_commits();
        if node.release.is_some() || i == range.last {
            clusters.push(Cluster::new(NodeRange::new(start, i), commits));
            start = i + 1;
            commits = 0;
        }
    }
    clusters
}

/// Maps a slider value in [0, 1] to a cluster count: `max(1, round(n^g))`.
pub fn granularity_to_k(g: f64, n: usize) -> Result<usize, ClusteringError> {
    if !(0.0..=1.0).contains(&g) {
        return Err(ClusteringError::InvalidArgument(format!(
            "granularity {g} outside [0, 1]"
        )));
    }
    if n == 0 {
        return Err(ClusteringError::InvalidArgument("cannot cluster an empty range".into()));
    }
    let k = (n as f64).powf(g).round() as usize;
    Ok(k.clamp(1, n))
}
