//! The stem: the first-parent line of the default branch, where each merge
//! absorbs the side-branch commits it brought in.

use std::collections::HashSet;
use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{CommitRecord, RepoSnapshot};

#[derive(Debug, Error)]
pub enum StemError {
    #[error("first-parent chain revisits commit {0}")]
    CycleDetected(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StemNode {
    pub index: usize,
    /// Commit on the first-parent chain.
    pub lead: String,
    /// Side-branch commits first integrated by this node, (timestamp, hash) ascending.
    pub squashed: Vec<String>,
    pub release: Option<String>,
}

impl StemNode {
    pub fn total_commits(&self) -> usize {
        1 + self.squashed.len()
    }

    /// Lead first, then squashed commits in their stored order.
    pub fn members(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.lead.as_str()).chain(self.squashed.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone)]
pub struct StemSequence {
    repo: Arc<RepoSnapshot>,
    nodes: Vec<StemNode>,
    excluded: usize,
}

impl StemSequence {
    pub fn repo(&self) -> &RepoSnapshot {
        &self.repo
    }

    pub fn nodes(&self) -> &[StemNode] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &StemNode {
        &self.nodes[index]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Commits in the snapshot that are not reachable from the default head.
    pub fn excluded_commits(&self) -> usize {
        self.excluded
    }

    pub fn total_commits(&self) -> usize {
        self.nodes.iter().map(StemNode::total_commits).sum()
    }

    pub fn lead(&self, index: usize) -> &CommitRecord {
        self.repo.commit(&self.nodes[index].lead)
    }

    /// Member commits of the inclusive node range, lead first within each node.
    pub fn commits_in(&self, first: usize, last: usize) -> Vec<&CommitRecord> {
        self.nodes[first..=last]
            .iter()
            .flat_map(|n| n.members())
            .map(|h| self.repo.commit(h))
            .collect()
    }

    /// `(index, commit)` pairs for every member, stem order then member order.
    pub fn indexed_commits(&self) -> impl Iterator<Item = (usize, &CommitRecord)> {
        self.nodes
            .iter()
            .flat_map(move |n| n.members().map(move |h| (n.index, self.repo.commit(h))))
    }

    /// Writes the stem as NDJSON: a header then one `stem-node` record per node.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> io::Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            format: &'static str,
            version: u32,
            repo: &'a str,
            head: &'a str,
        }
        #[derive(Serialize)]
        struct Record<'a> {
            #[serde(rename = "type")]
            kind: &'static str,
            #[serde(flatten)]
            node: &'a StemNode,
        }
        let header = Header {
            format: "fragex-stem",
            version: 1,
            repo: self.repo.name(),
            head: self.repo.default_head(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for node in &self.nodes {
            serde_json::to_writer(
                &mut out,
                &Record {
                    kind: "stem-node",
                    node,
                },
            )?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

/// Builds the stem for `repo`'s default head, with releases annotated.
pub fn build_stem(repo: Arc<RepoSnapshot>) -> Result<StemSequence, StemError> {
    let mut chain: Vec<String> = Vec::new();
    let mut on_chain: HashSet<&str> = HashSet::new();
    let mut cursor = Some(repo.default_head());
    while let Some(hash) = cursor {
        if !on_chain.insert(hash) {
            return Err(StemError::CycleDetected(hash.to_string()));
        }
        chain.push(hash.to_string());
        cursor = repo.commit(hash).parents.first().map(String::as_str);
    }
    chain.reverse();

    // Everything claimed by nodes 0..i is exactly the ancestry of lead i-1, so
    // a walk that stops at claimed commits yields the squash set of node i.
    let mut claimed: HashSet<&str> = HashSet::with_capacity(repo.len());
    let mut nodes = Vec::with_capacity(chain.len());
    for (index, lead_hash) in chain.iter().enumerate() {
        let lead = repo.commit(lead_hash);
        claimed.insert(&lead.hash);
        let mut squashed: Vec<&CommitRecord> = Vec::new();
        let mut stack: Vec<&str> = lead.parents.iter().skip(1).map(String::as_str).collect();
        while let Some(hash) = stack.pop() {
            if !claimed.insert(hash) {
                continue;
            }
            let commit = repo.commit(hash);
            squashed.push(commit);
            stack.extend(commit.parents.iter().map(String::as_str));
        }
        squashed.sort_by(|a, b| (a.timestamp, &a.hash).cmp(&(b.timestamp, &b.hash)));
        nodes.push(StemNode {
            index,
            lead: lead_hash.clone(),
            squashed: squashed.into_iter().map(|c| c.hash.clone()).collect(),
            release: None,
        });
    }
    let excluded = repo.len() - claimed.len();
    let stem = StemSequence {
        repo: repo.clone(),
        nodes,
        excluded,
    };
    Ok(annotate_releases(stem))
}

/// Sets each node's release to the lexicographically greatest tag carried by
/// any of its members.
pub fn annotate_releases(mut stem: StemSequence) -> StemSequence {
    let repo = stem.repo.clone();
    for node in &mut stem.nodes {
        node.release = node.members().flat_map(|h| repo.commit(h).tags.iter()).max().cloned();
    }
    stem
}
