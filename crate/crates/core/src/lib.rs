//! Exploration engine for information fragments in git history.
//!
//! Commits are ingested into an immutable [`ingest::RepoSnapshot`], arranged
//! along the first-parent [`stem`], grouped into contiguous clusters, and
//! summarised per cluster in a dimension value [`table`]. [`fragments`]
//! answers which clusters contain a given author, keyword, file or directory
//! and keeps a per-repository pin board. [`api`] serves all of it over HTTP.

pub mod api;
pub mod cli;
pub mod clustering;
mod error;
pub mod fragments;
pub mod ingest;
pub mod scope;
pub mod stem;
pub mod table;

use std::path::Path;
use std::sync::Arc;

pub use error::{Error, Result};

/// Loads a canonical dump file, or extracts a live repository when `source`
/// is a directory, and builds its stem.
pub fn open(source: &Path) -> Result<stem::StemSequence> {
    let snapshot = load_snapshot(source)?;
    Ok(stem::build_stem(Arc::new(snapshot))?)
}

pub fn load_snapshot(source: &Path) -> Result<ingest::RepoSnapshot> {
    if source.is_dir() {
        return Ok(ingest::extract_live(source)?);
    }
    let file = std::fs::File::open(source).map_err(ingest::IngestError::Io)?;
    Ok(ingest::parse_dump(std::io::BufReader::new(file))?)
}
