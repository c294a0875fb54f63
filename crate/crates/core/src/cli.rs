//! `fragex` command-line interface.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors. Data goes
//! to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use crate::api::{self, AppState, ServeConfig};
use crate::fragments::{self, Fragment};
use crate::scope::{resolve_scope_with, ClusterMode, Scope, ScopeFilter, ScopeOptions};
use crate::stem::StemSequence;
use crate::table::{build_table, Dimension, DEFAULT_TOP_K};
use crate::{ingest, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

const DEFAULT_DATA_DIR: &str = ".fragex";

#[derive(Debug, Parser)]
#[command(name = "fragex", version, about = "Explore information fragments across git history")]
pub struct Cli {
    /// Directory holding per-repository pin boards.
    #[arg(long, global = true, env = api::DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct ScopeArgs {
    /// Slider value in [0, 1] mapped to the number of clusters.
    #[arg(long, default_value_t = 0.5)]
    pub granularity: f64,

    /// Scope filter `key=value`; keys: index-from, index-to, release-from,
    /// release-to, date-from, date-to (UTC seconds), author, keyword.
    #[arg(long = "filter", visible_alias = "scope", value_name = "KEY=VALUE")]
    pub filter: Vec<String>,

    /// Cluster at release boundaries instead of by similarity.
    #[arg(long)]
    pub by_release: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a live repository into a canonical dump.
    Ingest {
        repo: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Print the dimension value table of a scope.
    Table {
        /// Canonical dump file or git repository directory.
        source: PathBuf,
        #[command(flatten)]
        scope: ScopeArgs,
        /// Comma-separated dimensions to render (author,keyword,file,directory).
        #[arg(long)]
        dims: Option<String>,
        #[arg(short, long, default_value_t = DEFAULT_TOP_K)]
        k: usize,
        #[arg(long, value_enum, default_value_t = TableFormat::Json)]
        format: TableFormat,
    },
    /// Print which clusters contain the given fragments.
    Inspect {
        source: PathBuf,
        #[arg(long = "fragment", value_name = "DIM=VALUE", required = true)]
        fragments: Vec<String>,
        #[command(flatten)]
        scope: ScopeArgs,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Print every stem commit carrying a fragment.
    History {
        source: PathBuf,
        #[arg(long, value_name = "DIM=VALUE")]
        fragment: String,
        /// Scope filter used only to flag in-scope occurrences.
        #[arg(long = "filter", visible_alias = "scope", value_name = "KEY=VALUE")]
        filter: Vec<String>,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
    },
    /// Serve the HTTP API until interrupted.
    Serve {
        source: PathBuf,
        #[arg(long, env = api::PORT_ENV, default_value_t = api::DEFAULT_PORT)]
        port: u16,
        /// Origin allowed to call the API from a browser.
        #[arg(long)]
        ui_origin: Option<String>,
    },
}

enum Failure {
    Usage(String),
    Data(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Runs the CLI with explicit streams and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error[{}]: {e}", e.code());
            EXIT_DATA
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(err, "error[Io]: {e}");
            EXIT_DATA
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest { repo, output } => {
            let snapshot = ingest::extract_live(&repo).map_err(Error::from)?;
            let file = std::fs::File::create(&output)?;
            ingest::write_dump(&snapshot, std::io::BufWriter::new(file))?;
            writeln!(err, "wrote {} commits to {}", snapshot.len(), output.display())?;
        }
        Command::Table {
            source,
            scope,
            dims,
            k,
            format,
        } => {
            let dims = dims
                .as_deref()
                .map(Dimension::parse_list)
                .transpose()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let stem = crate::open(&source)?;
            let scope = materialize(&stem, &scope)?;
            let table = build_table(&stem, &scope, k, dims.as_deref()).map_err(|e| Failure::Usage(e.to_string()))?;
            match format {
                TableFormat::Json => write_json(out, &table)?,
                TableFormat::Csv => out.write_all(table.to_csv().as_bytes())?,
            }
        }
        Command::Inspect {
            source,
            fragments,
            scope,
            format,
        } => {
            let fragments = parse_fragments(&fragments)?;
            let stem = crate::open(&source)?;
            let scope = materialize(&stem, &scope)?;
            let matrix = fragments::inspect(&stem, &scope, &fragments).map_err(Error::from)?;
            match format {
                ReportFormat::Json => write_json(out, &matrix)?,
                ReportFormat::Text => {
                    write!(out, "fragment")?;
                    for c in &matrix.clusters {
                        write!(out, "\t{c}")?;
                    }
                    writeln!(out)?;
                    for (f, row) in matrix.fragments.iter().zip(&matrix.contains) {
                        write!(out, "{f}")?;
                        for hit in row {
                            write!(out, "\t{}", u8::from(*hit))?;
                        }
                        writeln!(out)?;
                    }
                    write!(out, "matched_sum")?;
                    for s in &matrix.matched_sum {
                        write!(out, "\t{s}")?;
                    }
                    writeln!(out)?;
                }
            }
        }
        Command::History {
            source,
            fragment,
            filter,
            format,
        } => {
            let fragment = parse_fragments(std::slice::from_ref(&fragment))?.remove(0);
            let filter = if filter.is_empty() {
                None
            } else {
                Some(parse_filter(&filter)?)
            };
            let stem = crate::open(&source)?;
            let scope = match filter {
                Some(f) => Some(resolve_scope_with(&stem, &f, 0.0, &ScopeOptions::default()).map_err(Error::from)?),
                None => None,
            };
            let history = fragments::history(&stem, &fragment, scope.as_ref());
            match format {
                ReportFormat::Json => write_json(out, &history)?,
                ReportFormat::Text => {
                    writeln!(out, "stem_index\thash\ttimestamp\tin_scope")?;
                    for o in &history.occurrences {
                        writeln!(
                            out,
                            "{}\t{}\t{}\t{}",
                            o.stem_index,
                            o.hash,
                            o.timestamp,
                            u8::from(o.in_scope)
                        )?;
                    }
                }
            }
        }
        Command::Serve {
            source,
            port,
            ui_origin,
        } => {
            let snapshot = crate::load_snapshot(&source)?;
            let data_dir = cli.data_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
            let state = Arc::new(AppState::new(data_dir));
            let repo_id = state.register(snapshot).map_err(|e| Failure::Usage(e.message))?;
            writeln!(err, "loaded {} as {repo_id}", source.display())?;
            let config = ServeConfig {
                addr: SocketAddr::from((Ipv4Addr::LOCALHOST, port)),
                ui_origin,
            };
            let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            runtime.block_on(api::serve(state, config))?;
        }
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(out: &mut dyn Write, value: &T) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    out.write_all(b"\n")
}

fn materialize(stem: &StemSequence, args: &ScopeArgs) -> Result<Scope, Failure> {
    let filter = parse_filter(&args.filter)?;
    let options = ScopeOptions {
        mode: if args.by_release {
            ClusterMode::Release
        } else {
            ClusterMode::Similarity
        },
        ..Default::default()
    };
    Ok(resolve_scope_with(stem, &filter, args.granularity, &options).map_err(Error::from)?)
}

fn parse_fragments(raw: &[String]) -> Result<Vec<Fragment>, Failure> {
    raw.iter()
        .map(|s| s.parse::<Fragment>().map_err(|e| Failure::Usage(e.to_string())))
        .collect()
}

/// Parses `key=value` filter arguments into a [`ScopeFilter`].
pub fn parse_filter(raw: &[String]) -> Result<ScopeFilter, String> {
    let mut filter = ScopeFilter::default();
    for item in raw {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| format!("filter {item:?} is not key=value"))?;
        let int = |v: &str| {
            v.parse::<i64>()
                .map_err(|_| format!("filter {key} expects an integer, got {v:?}"))
        };
        let index = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| format!("filter {key} expects an index, got {v:?}"))
        };
        match key {
            "date-from" => filter.date_from = Some(int(value)?),
            "date-to" => filter.date_to = Some(int(value)?),
            "release-from" => filter.release_from = Some(value.to_string()),
            "release-to" => filter.release_to = Some(value.to_string()),
            "index-from" => filter.index_from = Some(index(value)?),
            "index-to" => filter.index_to = Some(index(value)?),
            "author" => {
                filter
                    .authors
                    .get_or_insert_with(Default::default)
                    .insert(value.to_string());
            }
            "keyword" => {
                filter
                    .keywords
                    .get_or_insert_with(Default::default)
                    .insert(value.to_string());
            }
            other => return Err(format!("unknown filter key {other:?}")),
        }
    }
    Ok(filter)
}

impl From<String> for Failure {
    fn from(msg: String) -> Self {
        Failure::Usage(msg)
    }
}
