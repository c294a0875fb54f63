//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Expected values come from the oracle script output under
//! tests/fixtures, never from the engine itself.

mod common;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use common::http::{run_session, schema_errors, Client};
use fragex::clustering::{build_dendrogram, cut, similarity, Cluster, FeatureSets, NodeRange, SimilarityWeights};
use fragex::fragments::{
    inspect, load_board, repo_dir_name, save_board, stage_board, Fragment, PinBoard, PinStore, PINS_FILE,
};
use fragex::ingest::parse_dump_str;
use fragex::scope::{resolve_scope, ScopeFilter};
use fragex::stem::{build_stem, StemSequence};
use fragex::table::{build_table, full_frequency, top_k, Dimension};
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($msg)+)),
        }
    };
}

fn load_stem(name: &str) -> StemSequence {
    let text = common::read_fixture(&format!("{name}.ndjson"));
    build_stem(std::sync::Arc::new(parse_dump_str(&text).unwrap())).unwrap()
}

fn frequency_oracle() -> Outcome {
    let start = Instant::now();
    let mut compared = 0;
    for name in common::ORACLE_FIXTURES {
        let stem = load_stem(name);
        let truth = common::truth(name);
        let commits = stem.commits_in(0, stem.len() - 1);
        for dim in Dimension::ALL {
            let freq = full_frequency(&commits, dim);
            let want = common::truth_freq(&truth["frequency"][dim.as_str()]);
            ensure!(freq == want, "{name}/{dim}: full_frequency differs from recount");
            let top: Value = top_k(&freq, 5)
                .iter()
                .map(|e| serde_json::json!([e.value, e.count, e.loc, e.rank]))
                .collect();
            ensure!(
                top == truth["top5"][dim.as_str()],
                "{name}/{dim}: top_k(5) differs from recount"
            );
            compared += freq.len();
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}, limit 5s");
    Ok(format!(
        "{} fixtures ({} synthetic), {compared} values x 4 dims exact, {} ms",
        common::ORACLE_FIXTURES.len(),
        common::SYNTHETIC.len(),
        elapsed.as_millis()
    ))
}

fn reachable(stem: &StemSequence) -> HashSet<String> {
    let repo = stem.repo();
    let mut seen = HashSet::new();
    let mut todo = vec![repo.default_head().to_string()];
    while let Some(h) = todo.pop() {
        if seen.insert(h.clone()) {
            todo.extend(repo.get(&h).unwrap().parents.iter().cloned());
        }
    }
    seen
}

fn stem_partition() -> Outcome {
    let mut total = 0;
    for name in common::ORACLE_FIXTURES {
        let stem = load_stem(name);
        let truth = common::truth(name);
        let reach = reachable(&stem);
        let sum: usize = stem.nodes().iter().map(|n| n.total_commits()).sum();
        ensure!(
            sum == reach.len(),
            "{name}: node sum {sum} != reachable {}",
            reach.len()
        );
        ensure!(
            sum as u64 == truth["reachable_count"].as_u64().unwrap(),
            "{name}: node sum {sum} != oracle reachable count"
        );
        let mut owner: HashMap<&str, usize> = HashMap::new();
        for node in stem.nodes() {
            for m in node.members() {
                ensure!(owner.insert(m, node.index).is_none(), "{name}: {m} in two nodes");
            }
        }
        ensure!(
            owner.keys().all(|h| reach.contains(*h)),
            "{name}: unreachable commit on the stem"
        );
        total += sum;
    }
    let octopus = load_stem("synth_octopus")
        .repo()
        .commits()
        .map(|c| c.parents.len())
        .max()
        .unwrap();
    ensure!(octopus >= 3, "octopus fixture has no octopus merge");
    let cc = load_stem("synth_crisscross");
    let leads: HashSet<&str> = cc.nodes().iter().map(|n| n.lead.as_str()).collect();
    let crossing = cc
        .repo()
        .commits()
        .any(|c| !leads.contains(c.hash.as_str()) && c.parents.iter().skip(1).any(|p| leads.contains(p.as_str())));
    ensure!(crossing, "criss-cross fixture has no crossing merge");
    Ok(format!(
        "{} fixtures incl. criss-cross and octopus, {total} commits partitioned",
        common::ORACLE_FIXTURES.len()
    ))
}

fn nested(coarse: &[Cluster], fine: &[Cluster]) -> bool {
    coarse.iter().all(|c| {
        let parts: Vec<NodeRange> = fine
            .iter()
            .map(|f| f.node_range)
            .filter(|r| r.first >= c.node_range.first && r.last <= c.node_range.last)
            .collect();
        !parts.is_empty()
            && parts[0].first == c.node_range.first
            && parts[parts.len() - 1].last == c.node_range.last
            && parts.windows(2).all(|p| p[0].last + 1 == p[1].first)
    })
}

fn clustering_nesting() -> Outcome {
    let w = SimilarityWeights::default();
    let (mut fixtures, mut pairs) = (0, 0);
    for name in common::ORACLE_FIXTURES {
        let stem = load_stem(name);
        let n = stem.len();
        if n > 20 {
            continue;
        }
        fixtures += 1;
        let d = build_dendrogram(&stem, &w);
        let cuts: Vec<Vec<Cluster>> = (1..=n).map(|k| cut(&d, k).unwrap()).collect();
        ensure!(
            cuts[0].len() == 1 && cuts[0][0].node_range == NodeRange::new(0, n - 1),
            "{name}: cut(1) is not the whole range"
        );
        ensure!(
            cuts[n - 1]
                .iter()
                .enumerate()
                .all(|(i, c)| c.node_range == NodeRange::new(i, i)),
            "{name}: cut(n) is not all singletons"
        );
        for k1 in 1..=n {
            for k2 in k1 + 1..=n {
                ensure!(
                    nested(&cuts[k1 - 1], &cuts[k2 - 1]),
                    "{name}: cut({k1}) not a union of cut({k2})"
                );
                pairs += 1;
            }
        }
    }
    ensure!(fixtures >= 4, "only {fixtures} fixtures with n <= 20");
    Ok(format!("{fixtures} fixtures with n <= 20, {pairs} (k1, k2) pairs"))
}

fn sets(files: &[&str], authors: &[&str], keywords: &[&str]) -> FeatureSets {
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<BTreeSet<String>>();
    FeatureSets {
        files: s(files),
        authors: s(authors),
        keywords: s(keywords),
    }
}

fn similarity_values() -> Outcome {
    let w = SimilarityWeights::default();
    let oracle: Value = serde_json::from_str(&common::read_fixture("similarity_examples.json")).unwrap();
    let a = sets(&["f1", "f2"], &["kim"], &["fix"]);
    let identical = similarity(&a, &a.clone(), &w);
    let disjoint = similarity(
        &sets(&["f1"], &["kim"], &["fix"]),
        &sets(&["f2"], &["lee"], &["parser"]),
        &w,
    );
    let half = similarity(&a, &sets(&["f2", "f3"], &["kim"], &["parser"]), &w);
    let empty = similarity(&FeatureSets::default(), &FeatureSets::default(), &w);
    ensure!(identical == 1.0, "identical sets gave {identical}");
    ensure!(empty == 1.0, "empty sets gave {empty}");
    ensure!(disjoint == 0.0, "disjoint sets gave {disjoint}");
    ensure!((half - 5.0 / 12.0).abs() <= 1e-9, "half overlap gave {half}, want 5/12");
    let scripted = oracle["half_overlap"].as_f64().unwrap();
    ensure!(
        (half - scripted).abs() <= 1e-9,
        "half overlap {half} != oracle {scripted}"
    );
    Ok(format!(
        "1.0, 0.0, {half:.12} (|diff from 5/12| = {:.1e})",
        (half - 5.0 / 12.0).abs()
    ))
}

fn inspection_recall() -> Outcome {
    let (mut cells, mut beyond_top) = (0, 0);
    for name in common::ORACLE_FIXTURES {
        let stem = load_stem(name);
        let truth = common::truth(name);
        let scope = resolve_scope(&stem, &ScopeFilter::default(), 0.5).unwrap();
        let table = build_table(&stem, &scope, 5, None).unwrap();
        let per_cluster = truth["cluster_frequency"].as_array().unwrap();
        ensure!(
            per_cluster.len() == scope.clusters.len(),
            "{name}: cluster count differs from oracle"
        );
        for dim in Dimension::ALL {
            let fragments: Vec<Fragment> = truth["frequency"][dim.as_str()]
                .as_object()
                .unwrap()
                .keys()
                .map(|v| Fragment::new(dim, v.clone()).unwrap())
                .collect();
            let m = inspect(&stem, &scope, &fragments).unwrap();
            for (f, row) in fragments.iter().zip(&m.contains) {
                for (c, &hit) in row.iter().enumerate() {
                    let want = per_cluster[c][dim.as_str()].get(&f.value).is_some();
                    ensure!(
                        hit == want,
                        "{name}: contains({f}, cluster {c}) = {hit}, scan says {want}"
                    );
                    let in_top = table.cluster_columns[c]
                        .row(dim)
                        .unwrap()
                        .entries
                        .iter()
                        .any(|e| e.value == f.value);
                    if hit && !in_top {
                        beyond_top += 1;
                    }
                    cells += 1;
                }
            }
            for c in 0..m.clusters.len() {
                let col = m.contains.iter().filter(|r| r[c]).count();
                ensure!(
                    m.matched_sum[c] == col,
                    "{name}: matched_sum[{c}] {} != column sum {col}",
                    m.matched_sum[c]
                );
            }
        }
    }
    ensure!(beyond_top > 0, "no matching fragment outside a top-5 was exercised");
    Ok(format!(
        "{cells} (value, cluster) cells, {beyond_top} matches outside the top-5"
    ))
}

fn fragex_bin(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fragex"))
        .args(args)
        .env_remove("FRAGEX_DATA")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("fragex {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn determinism() -> Outcome {
    let path = common::dump_path("fixture30").display().to_string();
    let runs: [Vec<&str>; 4] = [
        vec!["table", &path, "--format", "json"],
        vec!["table", &path, "--format", "csv", "--granularity", "0.7"],
        vec![
            "inspect",
            &path,
            "--fragment",
            "author=kim",
            "--fragment",
            "file=Cargo.toml",
        ],
        vec![
            "inspect",
            &path,
            "--fragment",
            "keyword=parser",
            "--format",
            "json",
            "--by-release",
        ],
    ];
    for args in &runs {
        let a = fragex_bin(args)?;
        let b = fragex_bin(args)?;
        ensure!(!a.is_empty() && a == b, "two runs of {args:?} differ");
    }
    let mut goldens = 0;
    for name in common::ORACLE_FIXTURES {
        let dump = common::dump_path(name).display().to_string();
        let csv = fragex_bin(&["table", &dump, "--granularity", "0.5", "--format", "csv"])?;
        let golden = common::read_fixture(&format!("{name}.g05.csv"));
        ensure!(csv == golden.as_bytes(), "{name}: CSV differs from golden file");
        goldens += 1;
    }
    Ok(format!(
        "{} commands byte-identical twice, {goldens} golden CSVs match",
        runs.len()
    ))
}

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join(repo_dir_name("fixture30")).join(PINS_FILE);
    let mut board = PinBoard::new("fixture30");
    board.pin(Fragment::new(Dimension::Author, "Dana Smith").unwrap(), 1);
    board.pin(Fragment::new(Dimension::Keyword, "Café").unwrap(), 2);
    board.pin(
        Fragment::new(Dimension::File, "docs/notes, drafts/a \"quoted\" name.txt").unwrap(),
        3,
    );
    board.pin(Fragment::new(Dimension::Directory, "/").unwrap(), 4);
    save_board(&path, &board).map_err(|e| e.to_string())?;
    let loaded = load_board(&path, "fixture30").map_err(|e| e.to_string())?;
    ensure!(loaded == board, "round trip changed the board");

    let before = std::fs::read(&path).map_err(|e| e.to_string())?;
    let mut next = board.clone();
    next.unpin(&Fragment::new(Dimension::Directory, "/").unwrap());
    next.pin(Fragment::new(Dimension::Author, "kim").unwrap(), 5);
    let leftover = stage_board(&path, &next).map_err(|e| e.to_string())?.abandon();
    ensure!(leftover.exists(), "staged file vanished");
    ensure!(
        std::fs::read(&path).map_err(|e| e.to_string())? == before,
        "board file changed before rename"
    );
    let after_crash = load_board(&path, "fixture30").map_err(|e| e.to_string())?;
    ensure!(after_crash == board, "previous board not intact after crash");

    let store = PinStore::open(dir.path(), "fixture30").map_err(|e| e.to_string())?;
    ensure!(store.board() == board, "store did not load the intact board");
    save_board(&path, &next).map_err(|e| e.to_string())?;
    ensure!(
        load_board(&path, "fixture30").map_err(|e| e.to_string())? == next,
        "save after crash failed"
    );
    Ok(format!(
        "{} pins round-tripped; abandoned write left previous board intact",
        board.pins.len()
    ))
}

fn api_session() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let client = Client::new(dir.path());
    let dump_text = common::read_fixture("fixture30.ndjson");
    let start = Instant::now();
    let session = runtime.block_on(run_session(&client, &dump_text));
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(2), "session took {elapsed:?}, limit 2s");
    for (step, schema, status, body) in &session.bodies {
        ensure!(status.is_success(), "{step}: HTTP {status}: {body}");
        let errors = schema_errors(schema, body);
        ensure!(errors.is_empty(), "{step}: {errors:?}");
    }

    let path = common::dump_path("fixture30").display().to_string();
    let json = |args: &[&str]| -> Result<Value, String> {
        serde_json::from_slice(&fragex_bin(args)?).map_err(|e| e.to_string())
    };
    let cli_table = json(&["table", &path, "--granularity", "0.5", "--format", "json"])?;
    ensure!(
        session.body("table") == &cli_table,
        "API table differs from `fragex table`"
    );
    let cli_clusters: Vec<(Value, Value)> = cli_table["cluster_columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["id"].clone(), c["commit_count"].clone()))
        .collect();
    let api_clusters: Vec<(Value, Value)> = session.body("scope")["clusters"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["id"].clone(), c["commit_count"].clone()))
        .collect();
    ensure!(api_clusters == cli_clusters, "API clusters differ from CLI columns");
    ensure!(
        session.body("ingest")["commit_count"] == cli_table["scope_column"]["commit_count"],
        "API commit count differs from CLI scope column"
    );

    let top = session.body("inspect")["fragments"][0]["value"]
        .as_str()
        .unwrap()
        .to_string();
    let fragment = format!("author={top}");
    let cli_inspect = json(&["inspect", &path, "--fragment", &fragment, "--format", "json"])?;
    ensure!(
        session.body("inspect") == &cli_inspect,
        "API inspection differs from `fragex inspect`"
    );

    let cli_history = json(&["history", &path, "--fragment", &fragment, "--format", "json"])?;
    let strip = |h: &Value| -> Vec<(Value, Value, Value)> {
        h["occurrences"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| (o["hash"].clone(), o["timestamp"].clone(), o["stem_index"].clone()))
            .collect()
    };
    ensure!(
        strip(session.body("history")) == strip(&cli_history),
        "API history differs from `fragex history`"
    );

    let truth = common::truth("fixture30");
    let want: Vec<u64> = truth["cluster_frequency"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| u64::from(c["author"].get(&top).is_some()))
        .collect();
    let got: Vec<u64> = session.body("inspect")["matched_sum"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(Value::as_u64)
        .collect();
    ensure!(got == want, "matched sums {got:?} differ from oracle {want:?}");
    Ok(format!(
        "{} requests schema-valid in {} ms; table, inspect, history equal CLI",
        session.bodies.len(),
        elapsed.as_millis()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("frequency oracle equivalence", frequency_oracle),
        ("stem partition", stem_partition),
        ("clustering nesting", clustering_nesting),
        ("similarity unit values", similarity_values),
        ("inspection recall", inspection_recall),
        ("determinism and golden CSV", determinism),
        ("pin board persistence", persistence),
        ("end-to-end API session", api_session),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
