//! Live extraction through the `git` command-line tool.
//!
//! History is enumerated from `HEAD` plus every branch and tag so that orphan
//! history is visible to the stem builder's exclusion report. Merge commits
//! carry no file changes of their own (no combined diff); renames are not
//! followed.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use super::{CommitRecord, FileChange, IngestError, RepoSnapshot};

/// Environment variable naming the git executable to use.
pub const GIT_ENV: &str = "FRAGEX_GIT";

const RECORD_START: char = '\u{1e}';
const FIELD_SEP: char = '\u{1f}';
const HEADER_END: char = '\u{1d}';

pub fn git_executable() -> PathBuf {
    std::env::var_os(GIT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("git"))
}

pub fn extract_live(repo_path: &Path) -> Result<RepoSnapshot, IngestError> {
    let git = git_executable();
    if !repo_path.is_dir() {
        return Err(IngestError::NotARepository(repo_path.display().to_string()));
    }
    let probe = run(&git, repo_path, &["rev-parse", "--git-dir"])?;
    if !probe.status.success() {
        return Err(IngestError::NotARepository(repo_path.display().to_string()));
    }

    let head = run(&git, repo_path, &["rev-parse", "--verify", "--quiet", "HEAD^{commit}"])?;
    if !head.status.success() {
        // Freshly initialised repository: nothing to explore.
        return Err(IngestError::MissingHead);
    }
    let head = String::from_utf8_lossy(&head.stdout).trim().to_string();

    let log = run(
        &git,
        repo_path,
        &[
            "-c",
            "core.quotePath=false",
            "-c",
            "i18n.logOutputEncoding=UTF-8",
            "log",
            "--no-color",
            "--no-renames",
            "--no-ext-diff",
            "--no-textconv",
            "--diff-merges=off",
            "--numstat",
            "--format=%x1e%H%x1f%P%x1f%an%x1f%at%x1f%B%x1d",
            "HEAD",
            "--branches",
            "--tags",
            "--",
        ],
    )?;
    let log = checked(log)?;
    let mut records = parse_log(&String::from_utf8_lossy(&log.stdout))?;

    let tags = resolve_tags(&git, repo_path)?;
    let mut by_hash: HashMap<&str, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        by_hash.insert(r.hash.as_str(), i);
    }
    let mut tag_slots: Vec<(usize, String)> = Vec::new();
    for (name, target) in tags {
        if let Some(&i) = by_hash.get(target.as_str()) {
            tag_slots.push((i, name));
        }
    }
    for (i, name) in tag_slots {
        records[i].tags.push(name);
    }
    for r in &mut records {
        r.tags.sort();
    }

    RepoSnapshot::new(repo_name(repo_path), head, records)
}

fn repo_name(path: &Path) -> String {
    let canonical = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
    let base = canonical
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "repo".to_string());
    base.strip_suffix(".git")
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .unwrap_or(base)
}

fn run(git: &Path, repo: &Path, args: &[&str]) -> Result<Output, IngestError> {
    let mut cmd = Command::new(git);
    cmd.arg("-C").arg(repo);
    cmd.args(args.iter().map(OsString::from));
    cmd.env("GIT_TERMINAL_PROMPT", "0")
        .env_remove("GIT_DIR")
        .env_remove("GIT_WORK_TREE");
    cmd.output().map_err(|e| IngestError::GitInvocationFailed {
        status: "spawn".into(),
        diagnostics: format!("{}: {e}", git.display()),
    })
}

fn checked(output: Output) -> Result<Output, IngestError> {
    if output.status.success() {
        Ok(output)
    } else {
        Err(IngestError::GitInvocationFailed {
            status: output.status.to_string(),
            diagnostics: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        })
    }
}

/// Tag name to the commit it ultimately points at (annotated tags peeled).
fn resolve_tags(git: &Path, repo: &Path) -> Result<BTreeMap<String, String>, IngestError> {
    let out = run(git, repo, &["show-ref", "--tags", "-d"])?;
    // show-ref exits 1 when there are no tags at all.
    if !out.status.success() && !out.stdout.is_empty() {
        return Err(checked(out).unwrap_err());
    }
    let mut direct = BTreeMap::new();
    let mut peeled = BTreeMap::new();
    for line in String::from_utf8_lossy(&out.stdout).lines() {
        let Some((hash, refname)) = line.split_once(' ') else {
            continue;
        };
        let Some(name) = refname.strip_prefix("refs/tags/") else {
            continue;
        };
        match name.strip_suffix("^{}") {
            Some(base) => peeled.insert(base.to_string(), hash.to_string()),
            None => direct.insert(name.to_string(), hash.to_string()),
        };
    }
    direct.extend(peeled);
    Ok(direct)
}

fn parse_log(text: &str) -> Result<Vec<CommitRecord>, IngestError> {
    let mut out = Vec::new();
    for chunk in text.split(RECORD_START).skip(1) {
        let (header, stats) = chunk
            .split_once(HEADER_END)
            .ok_or_else(|| bad_log("missing header end"))?;
        let fields: Vec<&str> = header.splitn(5, FIELD_SEP).collect();
        let [hash, parents, author, time, body] = fields[..] else {
            return Err(bad_log("short header"));
        };
        let timestamp = time.trim().parse::<i64>().map_err(|_| bad_log("bad timestamp"))?;
        let mut changes = Vec::new();
        for line in stats.lines().filter(|l| !l.is_empty()) {
            changes.push(parse_numstat(line)?);
        }
        out.push(CommitRecord {
            hash: hash.to_string(),
            parents: parents.split_whitespace().map(str::to_string).collect(),
            author: author.to_string(),
            timestamp,
            message: body.trim_end_matches('\n').to_string(),
            changes,
            tags: Vec::new(),
        });
    }
    Ok(out)
}

fn parse_numstat(line: &str) -> Result<FileChange, IngestError> {
    let mut parts = line.splitn(3, '\t');
    let (Some(add), Some(del), Some(path)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(bad_log("bad numstat line"));
    };
    // Binary files report "-" for both counts.
    let count = |s: &str| -> Result<u64, IngestError> {
        if s == "-" {
            Ok(0)
        } else {
            s.parse().map_err(|_| bad_log("bad numstat count"))
        }
    };
    Ok(FileChange {
        path: unquote(path),
        additions: count(add)?,
        deletions: count(del)?,
    })
}

/// Undoes git's C-style path quoting.
fn unquote(path: &str) -> String {
    let Some(inner) = path.strip_prefix('"').and_then(|p| p.strip_suffix('"')) else {
        return path.to_string();
    };
    let mut bytes = Vec::with_capacity(inner.len());
    let mut iter = inner.bytes().peekable();
    while let Some(b) = iter.next() {
        if b != b'\\' {
            bytes.push(b);
            continue;
        }
        match iter.next() {
            Some(b'n') => bytes.push(b'\n'),
            Some(b't') => bytes.push(b'\t'),
            Some(b'r') => bytes.push(b'\r'),
            Some(b'a') => bytes.push(0x07),
            Some(b'b') => bytes.push(0x08),
            Some(b'f') => bytes.push(0x0c),
            Some(b'v') => bytes.push(0x0b),
            Some(d @ b'0'..=b'7') => {
                let mut value = u32::from(d - b'0');
                for _ in 0..2 {
                    match iter.peek() {
                        Some(&o @ b'0'..=b'7') => {
                            value = value * 8 + u32::from(o - b'0');
                            iter.next();
                        }
                        _ => break,
                    }
                }
                bytes.push(value as u8);
            }
            Some(other) => bytes.push(other),
            None => bytes.push(b'\\'),
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

fn bad_log(reason: &str) -> IngestError {
    IngestError::GitInvocationFailed {
        status: "parse".into(),
        diagnostics: reason.into(),
    }
}
