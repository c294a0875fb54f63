use thiserror::Error;

use crate::clustering::ClusteringError;
use crate::fragments::FragmentError;
use crate::ingest::IngestError;
use crate::scope::ScopeError;
use crate::stem::StemError;
use crate::table::TableError;

/// Any failure surfaced by the engine, with a stable machine-readable code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Stem(#[from] StemError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Scope(#[from] ScopeError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Fragment(#[from] FragmentError),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Ingest(e) => e.code(),
            Error::Stem(StemError::CycleDetected(_)) => "CycleDetected",
            Error::Clustering(_) | Error::Table(_) => "InvalidArgument",
            Error::Scope(ScopeError::EmptyScope) => "EmptyScope",
            Error::Scope(ScopeError::UnknownRelease(_)) => "UnknownRelease",
            Error::Scope(ScopeError::InvalidFilter(_) | ScopeError::Clustering(_)) => "InvalidArgument",
            Error::Fragment(e) => e.code(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
