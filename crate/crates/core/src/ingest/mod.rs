//! Commit ingestion: canonical dump parsing, live extraction over the `git`
//! executable, and the derived dimension values (keywords, directories) that
//! the rest of the engine consumes.

mod dump;
mod live;
mod tokenize;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dump::{parse_dump, parse_dump_str, write_dump, DUMP_FORMAT, DUMP_VERSION};
pub use live::{extract_live, git_executable, GIT_ENV};
pub use tokenize::{tokenize_keywords, STOPWORDS};

/// Marker used for the repository root in the directory dimension.
pub const ROOT_DIRECTORY: &str = "/";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("commit references unknown parent {0}")]
    DanglingParent(String),
    #[error("declared head is not present in the snapshot")]
    MissingHead,
    #[error("commit graph contains a cycle through {0}")]
    CycleDetected(String),
    #[error("not a git repository: {0}")]
    NotARepository(String),
    #[error("git invocation failed ({status}): {diagnostics}")]
    GitInvocationFailed { status: String, diagnostics: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl IngestError {
    /// Machine-readable error name, shared by the CLI and the HTTP service.
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::MalformedRecord { .. } => "MalformedRecord",
            IngestError::DanglingParent(_) => "DanglingParent",
            IngestError::MissingHead => "MissingHead",
            IngestError::CycleDetected(_) => "CycleDetected",
            IngestError::NotARepository(_) => "NotARepository",
            IngestError::GitInvocationFailed { .. } => "GitInvocationFailed",
            IngestError::Io(_) => "Io",
        }
    }
}

/// One file touched by a commit, with its line statistics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    #[serde(rename = "add")]
    pub additions: u64,
    #[serde(rename = "del")]
    pub deletions: u64,
}

impl FileChange {
    pub fn loc(&self) -> u64 {
        self.additions + self.deletions
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitRecord {
    pub hash: String,
    /// First entry is the first parent.
    pub parents: Vec<String>,
    pub author: String,
    /// Author timestamp, UTC seconds.
    pub timestamp: i64,
    pub message: String,
    pub changes: Vec<FileChange>,
    pub tags: Vec<String>,
}

impl CommitRecord {
    pub fn keywords(&self) -> Vec<String> {
        tokenize_keywords(&self.message)
    }

    /// Distinct touched paths in first-appearance order.
    pub fn files(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::with_capacity(self.changes.len());
        for change in &self.changes {
            if !out.contains(&change.path.as_str()) {
                out.push(&change.path);
            }
        }
        out
    }

    /// Distinct ancestor directories of all touched paths, first-appearance order.
    pub fn directories(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for change in &self.changes {
            for dir in derive_directories(&change.path) {
                if !out.contains(&dir) {
                    out.push(dir);
                }
            }
        }
        out
    }

    pub fn is_merge(&self) -> bool {
        self.parents.len() > 1
    }

    fn validate(&self) -> Result<(), String> {
        if !is_commit_hash(&self.hash) {
            return Err(format!("invalid hash {:?}", self.hash));
        }
        for parent in &self.parents {
            if !is_commit_hash(parent) {
                return Err(format!("invalid parent hash {parent:?}"));
            }
        }
        if self.author.is_empty() {
            return Err("author is empty".into());
        }
        if self.timestamp < 0 {
            return Err(format!("negative timestamp {}", self.timestamp));
        }
        for change in &self.changes {
            validate_path(&change.path)?;
        }
        Ok(())
    }
}

/// 40 lowercase hex characters.
pub fn is_commit_hash(s: &str) -> bool {
    s.len() == 40 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

fn validate_path(path: &str) -> Result<(), String> {
    if path.is_empty() {
        return Err("empty file path".into());
    }
    if path.starts_with('/') {
        return Err(format!("absolute file path {path:?}"));
    }
    if path.split('/').any(|seg| seg.is_empty() || seg == "." || seg == "..") {
        return Err(format!("invalid path segment in {path:?}"));
    }
    Ok(())
}

/// Every proper ancestor directory of `path`, deepest first, then the root
/// marker `/`.
pub fn derive_directories(path: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = path;
    while let Some(idx) = rest.rfind('/') {
        rest = &rest[..idx];
        out.push(rest.to_string());
    }
    out.push(ROOT_DIRECTORY.to_string());
    out
}

/// An immutable, validated set of commits plus the default branch tip.
#[derive(Clone, PartialEq, Eq)]
pub struct RepoSnapshot {
    name: String,
    default_head: String,
    commits: BTreeMap<String, CommitRecord>,
}

impl fmt::Debug for RepoSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RepoSnapshot")
            .field("name", &self.name)
            .field("default_head", &self.default_head)
            .field("commits", &self.commits.len())
            .finish()
    }
}

impl RepoSnapshot {
    /// Builds a snapshot from commit records, checking every record and graph
    /// invariant. `line_of` maps a record index to its source line for error
    /// reporting (identity + 1 when records did not come from a file).
    pub(crate) fn from_records(
        name: String,
        default_head: String,
        records: Vec<CommitRecord>,
        line_of: impl Fn(usize) -> usize,
    ) -> Result<Self, IngestError> {
        let mut commits = BTreeMap::new();
        for (idx, record) in records.into_iter().enumerate() {
            record.validate().map_err(|reason| IngestError::MalformedRecord {
                line: line_of(idx),
                reason,
            })?;
            if commits.contains_key(&record.hash) {
                return Err(IngestError::MalformedRecord {
                    line: line_of(idx),
                    reason: format!("duplicate commit {}", record.hash),
                });
            }
            commits.insert(record.hash.clone(), record);
        }
        for record in commits.values() {
            if let Some(missing) = record.parents.iter().find(|p| !commits.contains_key(*p)) {
                return Err(IngestError::DanglingParent(missing.clone()));
            }
        }
        if !commits.contains_key(&default_head) {
            return Err(IngestError::MissingHead);
        }
        check_acyclic(&commits)?;
        Ok(RepoSnapshot {
            name,
            default_head,
            commits,
        })
    }

    /// Builds a snapshot from in-memory records.
    pub fn new(
        name: impl Into<String>,
        default_head: impl Into<String>,
        records: Vec<CommitRecord>,
    ) -> Result<Self, IngestError> {
        Self::from_records(name.into(), default_head.into(), records, |i| i + 1)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn default_head(&self) -> &str {
        &self.default_head
    }

    pub fn get(&self, hash: &str) -> Option<&CommitRecord> {
        self.commits.get(hash)
    }

    /// Looks up a commit known to be in the snapshot.
    pub(crate) fn commit(&self, hash: &str) -> &CommitRecord {
        &self.commits[hash]
    }

    pub fn len(&self) -> usize {
        self.commits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commits.is_empty()
    }

    /// Commits in hash order.
    pub fn commits(&self) -> impl Iterator<Item = &CommitRecord> {
        self.commits.values()
    }

    /// Parents before children; ties broken by (timestamp, hash).
    pub fn topological_order(&self) -> Vec<&CommitRecord> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
        let mut pending: HashMap<&str, usize> = HashMap::new();
        for c in self.commits.values() {
            let mut distinct: Vec<&str> = c.parents.iter().map(String::as_str).collect();
            distinct.sort_unstable();
            distinct.dedup();
            pending.insert(&c.hash, distinct.len());
            for p in distinct {
                children.entry(p).or_default().push(&c.hash);
            }
        }
        let mut ready: BinaryHeap<Reverse<(i64, &str)>> = pending
            .iter()
            .filter(|(_, &n)| n == 0)
            .map(|(h, _)| Reverse((self.commits[*h].timestamp, *h)))
            .collect();
        let mut out = Vec::with_capacity(self.commits.len());
        while let Some(Reverse((_, hash))) = ready.pop() {
            out.push(&self.commits[hash]);
            for child in children.get(hash).into_iter().flatten() {
                let n = pending.get_mut(child).unwrap();
                *n -= 1;
                if *n == 0 {
                    ready.push(Reverse((self.commits[*child].timestamp, child)));
                }
            }
        }
        out
    }
}

fn check_acyclic(commits: &BTreeMap<String, CommitRecord>) -> Result<(), IngestError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: HashMap<&str, Mark> = HashMap::with_capacity(commits.len());
    for start in commits.keys() {
        if marks.contains_key(start.as_str()) {
            continue;
        }
        // Iterative DFS; frame = (hash, next parent index).
        let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
        marks.insert(start, Mark::Active);
        while let Some(frame) = stack.last_mut() {
            let (hash, next) = *frame;
            let parents = &commits[hash].parents;
            if next < parents.len() {
                frame.1 += 1;
                let parent = parents[next].as_str();
                match marks.get(parent) {
                    Some(Mark::Active) => return Err(IngestError::CycleDetected(parent.to_string())),
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(parent, Mark::Active);
                        stack.push((parent, 0));
                    }
                }
            } else {
                marks.insert(hash, Mark::Done);
                stack.pop();
            }
        }
    }
    Ok(())
}
