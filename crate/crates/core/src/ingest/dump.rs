use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{CommitRecord, FileChange, IngestError, RepoSnapshot};

pub const DUMP_FORMAT: &str = "fragex-dump";
pub const DUMP_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    head: String,
    name: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    hash: String,
    parents: Vec<String>,
    author: String,
    timestamp: i64,
    message: String,
    tags: Vec<String>,
    changes: Vec<FileChange>,
}

impl From<Record> for CommitRecord {
    fn from(r: Record) -> Self {
        CommitRecord {
            hash: r.hash,
            parents: r.parents,
            author: r.author,
            timestamp: r.timestamp,
            message: r.message,
            changes: r.changes,
            tags: r.tags,
        }
    }
}

/// Parses a canonical NDJSON dump. Blank lines are ignored; record order does
/// not matter.
pub fn parse_dump<R: BufRead>(reader: R) -> Result<RepoSnapshot, IngestError> {
    let mut header: Option<Header> = None;
    let mut records = Vec::new();
    let mut lines_of = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| malformed(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match header {
            None => {
                let h: Header = serde_json::from_str(&line).map_err(|e| malformed(line_no, format!("header: {e}")))?;
                if h.format != DUMP_FORMAT {
                    return Err(malformed(line_no, format!("unknown format {:?}", h.format)));
                }
                if h.version != DUMP_VERSION {
                    return Err(malformed(line_no, format!("unsupported version {}", h.version)));
                }
                header = Some(h);
            }
            Some(_) => {
                let r: Record = serde_json::from_str(&line).map_err(|e| malformed(line_no, e.to_string()))?;
                records.push(CommitRecord::from(r));
                lines_of.push(line_no);
            }
        }
    }

    let header = header.ok_or_else(|| malformed(1, "missing header record".into()))?;
    RepoSnapshot::from_records(header.name, header.head, records, |i| lines_of[i])
}

pub fn parse_dump_str(text: &str) -> Result<RepoSnapshot, IngestError> {
    parse_dump(text.as_bytes())
}

/// Writes the canonical dump: header, then commits parents-first.
pub fn write_dump<W: Write>(snapshot: &RepoSnapshot, mut out: W) -> io::Result<()> {
    let header = Header {
        format: DUMP_FORMAT.into(),
        version: DUMP_VERSION,
        head: snapshot.default_head().into(),
        name: snapshot.name().into(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for c in snapshot.topological_order() {
        let record = Record {
            hash: c.hash.clone(),
            parents: c.parents.clone(),
            author: c.author.clone(),
            timestamp: c.timestamp,
            message: c.message.clone(),
            tags: c.tags.clone(),
            changes: c.changes.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn malformed(line: usize, reason: String) -> IngestError {
    IngestError::MalformedRecord { line, reason }
}
