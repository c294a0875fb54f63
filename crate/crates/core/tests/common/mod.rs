#![allow(dead_code)]

pub mod http;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use fragex::ingest::{parse_dump_str, CommitRecord, FileChange, RepoSnapshot};
use fragex::stem::{build_stem, StemSequence};
use fragex::table::ValueStats;
use serde_json::Value;

/// Fixtures with recorded ground truth from the oracle script.
pub const ORACLE_FIXTURES: [&str; 9] = [
    "tiny3",
    "blocks5",
    "release8",
    "fixture30",
    "synth_linear",
    "synth_branches",
    "synth_crisscross",
    "synth_octopus",
    "synth_large",
];

pub const SYNTHETIC: [&str; 5] = [
    "synth_linear",
    "synth_branches",
    "synth_crisscross",
    "synth_octopus",
    "synth_large",
];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn dump_path(name: &str) -> PathBuf {
    fixture_path(&format!("{name}.ndjson"))
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn snapshot(name: &str) -> RepoSnapshot {
    parse_dump_str(&read_fixture(&format!("{name}.ndjson"))).unwrap()
}

pub fn stem(name: &str) -> StemSequence {
    build_stem(Arc::new(snapshot(name))).unwrap()
}

pub fn truth(name: &str) -> Value {
    serde_json::from_str(&read_fixture(&format!("{name}.truth.json"))).unwrap()
}

/// Oracle frequency map (`{value: [count, loc|null]}`) in engine form.
pub fn truth_freq(v: &Value) -> BTreeMap<String, ValueStats> {
    v.as_object()
        .unwrap()
        .iter()
        .map(|(value, pair)| {
            let count = pair[0].as_u64().unwrap() as usize;
            let loc = pair[1].as_u64();
            (value.clone(), ValueStats { count, loc })
        })
        .collect()
}

pub fn hash(n: u64) -> String {
    format!("{n:040x}")
}

pub fn commit(n: u64, parents: &[u64], author: &str, message: &str, files: &[&str]) -> CommitRecord {
    CommitRecord {
        hash: hash(n),
        parents: parents.iter().map(|&p| hash(p)).collect(),
        author: author.into(),
        timestamp: 1_000 + n as i64,
        message: message.into(),
        changes: files
            .iter()
            .map(|p| FileChange {
                path: (*p).into(),
                additions: 1,
                deletions: 1,
            })
            .collect(),
        tags: vec![],
    }
}

const AUTHORS: [&str; 4] = ["kim", "lee", "pat", "rob"];
const WORDS: [&str; 10] = [
    "parser", "fix", "cache", "the", "network", "URL", "42", "docs", "merge", "of",
];
const PATHS: [&str; 8] = ["a/x", "a/y", "b/z", "b/c/d.rs", "README", "a/b/c/e", "docs/x", "z"];

#[derive(Debug, Clone)]
pub struct RawCommit {
    first: usize,
    extras: Vec<usize>,
    root: bool,
    author: usize,
    words: Vec<usize>,
    files: Vec<(usize, u8, u8)>,
    skew: i64,
    tag: bool,
}

fn raw_commit() -> impl proptest::strategy::Strategy<Value = RawCommit> {
    use proptest::prelude::*;
    (
        any::<usize>(),
        proptest::collection::vec(any::<usize>(), 0..3),
        proptest::bool::weighted(0.08),
        0..AUTHORS.len(),
        proptest::collection::vec(0..WORDS.len(), 0..5),
        proptest::collection::vec((0..PATHS.len(), any::<u8>(), any::<u8>()), 0..4),
        -50i64..50,
        proptest::bool::weighted(0.1),
    )
        .prop_map(|(first, extras, root, author, words, files, skew, tag)| RawCommit {
            first,
            extras,
            root,
            author,
            words,
            files,
            skew,
            tag,
        })
}

/// Random commit DAGs of 1..=max commits whose head is the last commit.
/// Extra roots and side branches leave some commits unreachable.
pub fn arb_snapshot(max: usize) -> impl proptest::strategy::Strategy<Value = RepoSnapshot> {
    use proptest::prelude::*;
    proptest::collection::vec(raw_commit(), 1..=max).prop_map(build_snapshot)
}

pub fn build_snapshot(raw: Vec<RawCommit>) -> RepoSnapshot {
    let mut records = Vec::with_capacity(raw.len());
    let mut tags = 0;
    for (i, r) in raw.iter().enumerate() {
        let mut parents = Vec::new();
        if i > 0 && !r.root {
            // Bias the first parent towards the previous commit so chains are long.
            let first = if r.first % 3 == 0 { r.first % i } else { i - 1 };
            parents.push(first as u64);
            for e in &r.extras {
                let p = (e % i) as u64;
                if !parents.contains(&p) {
                    parents.push(p);
                }
            }
        }
        let message: Vec<&str> = r.words.iter().map(|&w| WORDS[w]).collect();
        let mut c = commit(i as u64, &parents, AUTHORS[r.author], &message.join(" "), &[]);
        c.timestamp = 10_000 + 100 * i as i64 + r.skew;
        c.changes = r
            .files
            .iter()
            .map(|&(p, a, d)| FileChange {
                path: PATHS[p].into(),
                additions: a as u64,
                deletions: d as u64,
            })
            .collect();
        if r.tag {
            tags += 1;
            c.tags.push(format!("v{tags}"));
        }
        records.push(c);
    }
    let head = records.last().unwrap().hash.clone();
    RepoSnapshot::new("random", head, records).unwrap()
}
