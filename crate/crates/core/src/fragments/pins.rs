//! Pin board persistence. One NDJSON file per repository, replaced atomically
//! by writing a temporary sibling and renaming it over the old file.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use super::{Fragment, FragmentError};
use crate::table::Dimension;

pub const PINS_FORMAT: &str = "fragex-pins";
pub const PINS_VERSION: u32 = 1;
pub const PINS_FILE: &str = "pins.ndjson";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pin {
    #[serde(flatten)]
    pub fragment: Fragment,
    pub pinned_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinBoard {
    pub repo: String,
    pub version: u32,
    pub pins: Vec<Pin>,
}

impl PinBoard {
    pub fn new(repo: impl Into<String>) -> Self {
        PinBoard {
            repo: repo.into(),
            version: PINS_VERSION,
            pins: Vec::new(),
        }
    }

    pub fn is_pinned(&self, fragment: &Fragment) -> bool {
        self.pins.iter().any(|p| p.fragment == *fragment)
    }

    /// Returns false when the fragment was already pinned.
    pub fn pin(&mut self, fragment: Fragment, pinned_at: i64) -> bool {
        if self.is_pinned(&fragment) {
            return false;
        }
        self.pins.push(Pin { fragment, pinned_at });
        true
    }

    /// Returns false when the fragment was not pinned.
    pub fn unpin(&mut self, fragment: &Fragment) -> bool {
        let before = self.pins.len();
        self.pins.retain(|p| p.fragment != *fragment);
        before != self.pins.len()
    }

    /// Pinned fragments in pin order.
    pub fn list(&self) -> Vec<Fragment> {
        self.pins.iter().map(|p| p.fragment.clone()).collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    repo: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    dimension: Dimension,
    value: String,
    pinned_at: i64,
}

/// Directory-safe form of a repository name.
pub fn repo_dir_name(repo: &str) -> String {
    let cleaned: String = repo
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    match cleaned.trim_matches('.') {
        "" => "_".to_string(),
        _ => cleaned,
    }
}

fn failure(path: &Path, cause: impl ToString) -> FragmentError {
    FragmentError::PersistenceFailure {
        path: path.display().to_string(),
        cause: cause.to_string(),
    }
}

/// Reads a board; a missing file is an empty board for `repo`.
pub fn load_board(path: &Path, repo: &str) -> Result<PinBoard, FragmentError> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(PinBoard::new(repo)),
        Err(e) => return Err(failure(path, e)),
    };
    let mut lines = BufReader::new(file).lines();
    let header: Header = match lines.next() {
        Some(line) => serde_json::from_str(&line.map_err(|e| failure(path, e))?)
            .map_err(|e| failure(path, format!("line 1: {e}")))?,
        None => return Err(failure(path, "empty pin file")),
    };
    if header.format != PINS_FORMAT || header.version != PINS_VERSION {
        return Err(failure(
            path,
            format!("unsupported pin file {} v{}", header.format, header.version),
        ));
    }
    let mut board = PinBoard::new(header.repo);
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| failure(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Line = serde_json::from_str(&line).map_err(|e| failure(path, format!("line {}: {e}", idx + 2)))?;
        let fragment = Fragment::new(rec.dimension, rec.value).map_err(|e| failure(path, e))?;
        if !board.pin(fragment, rec.pinned_at) {
            return Err(failure(path, format!("line {}: duplicate pin", idx + 2)));
        }
    }
    Ok(board)
}

/// A fully written but not yet published board file.
pub struct StagedBoard {
    temp: NamedTempFile,
    target: PathBuf,
}

impl StagedBoard {
    /// Publishes the staged file over the target path.
    pub fn commit(self) -> Result<(), FragmentError> {
        let target = self.target;
        self.temp.persist(&target).map_err(|e| failure(&target, e.error))?;
        if let Some(dir) = target.parent() {
            // Make the rename itself durable where the platform allows it.
            if let Ok(d) = fs::File::open(dir) {
                let _ = d.sync_all();
            }
        }
        Ok(())
    }

    /// Leaves the temporary file behind without publishing it, as a process
    /// killed between write and rename would.
    pub fn abandon(self) -> PathBuf {
        let (_, path) = self.temp.keep().expect("keep staged pin file");
        path
    }
}

/// Writes `board` to a temporary file beside `path` and syncs it.
pub fn stage_board(path: &Path, board: &PinBoard) -> Result<StagedBoard, FragmentError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| failure(path, e))?;
    let mut temp = tempfile::Builder::new()
        .prefix(".pins-")
        .suffix(".tmp")
        .tempfile_in(dir)
        .map_err(|e| failure(path, e))?;
    let mut write = || -> std::io::Result<()> {
        let out = temp.as_file_mut();
        let header = Header {
            format: PINS_FORMAT.into(),
            version: board.version,
            repo: board.repo.clone(),
        };
        serde_json::to_writer(&mut *out, &header)?;
        out.write_all(b"\n")?;
        for pin in &board.pins {
            let line = Line {
                dimension: pin.fragment.dimension,
                value: pin.fragment.value.clone(),
                pinned_at: pin.pinned_at,
            };
            serde_json::to_writer(&mut *out, &line)?;
            out.write_all(b"\n")?;
        }
        out.sync_all()
    };
    write().map_err(|e| failure(path, e))?;
    Ok(StagedBoard {
        temp,
        target: path.to_path_buf(),
    })
}

pub fn save_board(path: &Path, board: &PinBoard) -> Result<(), FragmentError> {
    stage_board(path, board)?.commit()
}

/// A repository's pin board bound to its file. Mutations are serialised and
/// persisted before they become visible.
#[derive(Debug)]
pub struct PinStore {
    path: PathBuf,
    board: Mutex<PinBoard>,
}

impl PinStore {
    /// Opens `<data_dir>/<repo>/pins.ndjson`, loading any existing board.
    pub fn open(data_dir: &Path, repo: &str) -> Result<Self, FragmentError> {
        let path = data_dir.join(repo_dir_name(repo)).join(PINS_FILE);
        let board = load_board(&path, repo)?;
        Ok(PinStore {
            path,
            board: Mutex::new(board),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn board(&self) -> PinBoard {
        self.board.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn list(&self) -> Vec<Fragment> {
        self.board().list()
    }

    pub fn pin(&self, fragment: Fragment) -> Result<PinBoard, FragmentError> {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs() as i64);
        self.pin_at(fragment, now)
    }

    pub fn pin_at(&self, fragment: Fragment, pinned_at: i64) -> Result<PinBoard, FragmentError> {
        self.mutate(|b| b.pin(fragment, pinned_at))
    }

    pub fn unpin(&self, fragment: &Fragment) -> Result<PinBoard, FragmentError> {
        self.mutate(|b| b.unpin(fragment))
    }

    fn mutate(&self, op: impl FnOnce(&mut PinBoard) -> bool) -> Result<PinBoard, FragmentError> {
        let mut guard = self.board.lock().unwrap_or_else(|e| e.into_inner());
        let mut next = guard.clone();
        if op(&mut next) {
            save_board(&self.path, &next)?;
            *guard = next;
        }
        Ok(guard.clone())
    }
}
