//! HTTP/JSON service over the exploration engine.
//!
//! Analysis endpoints are pure reads over immutable stems. The only mutable
//! state is the repository registry, an LRU cache of materialised scopes
//! (keyed by their content-hash ids) and the on-disk pin boards.

mod error;
pub mod schema;

use std::collections::{BTreeMap, HashSet};
use std::net::SocketAddr;
use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{FromRequest, FromRequestParts, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lru::LruCache;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tower_http::cors::CorsLayer;

use crate::clustering::{Cluster, NodeRange, SimilarityWeights};
use crate::fragments::{self, Fragment, PinStore};
use crate::ingest::{self, RepoSnapshot};
use crate::scope::{self, ClusterMode, Scope, ScopeFilter, ScopeOptions};
use crate::stem::{build_stem, StemSequence};
use crate::table::{self, Dimension, DEFAULT_TOP_K};

pub use error::{status_for, ApiError};

pub const DEFAULT_PORT: u16 = 7845;
pub const PORT_ENV: &str = "FRAGEX_PORT";
pub const DATA_DIR_ENV: &str = "FRAGEX_DATA";
const DEFAULT_SCOPE_CAPACITY: usize = 256;

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
struct ApiJson<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
struct ApiQuery<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
struct ApiPath<T>(T);

struct RepoEntry {
    id: String,
    stem: Arc<StemSequence>,
    pins: Mutex<Option<Arc<PinStore>>>,
}

struct ScopeEntry {
    repo_id: String,
    scope: RwLock<Scope>,
}

pub struct AppState {
    data_dir: PathBuf,
    repos: RwLock<BTreeMap<String, Arc<RepoEntry>>>,
    ingesting: Mutex<HashSet<String>>,
    scopes: Mutex<LruCache<String, Arc<ScopeEntry>>>,
}

/// Content-derived repository id: a digest of the canonical dump.
pub fn repo_id(snapshot: &RepoSnapshot) -> String {
    let mut bytes = Vec::new();
    ingest::write_dump(snapshot, &mut bytes).expect("in-memory dump");
    format!("r{}", &hex::encode(Sha256::digest(&bytes))[..16])
}

impl AppState {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self::with_scope_capacity(data_dir, DEFAULT_SCOPE_CAPACITY)
    }

    pub fn with_scope_capacity(data_dir: impl Into<PathBuf>, capacity: usize) -> Self {
        let capacity = NonZeroUsize::new(capacity).unwrap_or(NonZeroUsize::MIN);
        AppState {
            data_dir: data_dir.into(),
            repos: RwLock::new(BTreeMap::new()),
            ingesting: Mutex::new(HashSet::new()),
            scopes: Mutex::new(LruCache::new(capacity)),
        }
    }

    /// Registers an ingested snapshot; `AlreadyLoaded` if its id is present.
    pub fn register(&self, snapshot: RepoSnapshot) -> Result<String, ApiError> {
        let id = repo_id(&snapshot);
        let stem = build_stem(Arc::new(snapshot)).map_err(crate::Error::from)?;
        let mut repos = self.repos.write().unwrap_or_else(|e| e.into_inner());
        if repos.contains_key(&id) {
            return Err(ApiError::conflict(
                "AlreadyLoaded",
                format!("repository already loaded as {id}"),
            ));
        }
        repos.insert(
            id.clone(),
            Arc::new(RepoEntry {
                id: id.clone(),
                stem: Arc::new(stem),
                pins: Mutex::new(None),
            }),
        );
        Ok(id)
    }

    fn repo(&self, id: &str) -> Result<Arc<RepoEntry>, ApiError> {
        self.repos
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("repository", id))
    }

    fn scope(&self, id: &str) -> Result<(Arc<ScopeEntry>, Arc<RepoEntry>), ApiError> {
        let entry = self
            .scopes
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("scope", id))?;
        let repo = self.repo(&entry.repo_id)?;
        Ok((entry, repo))
    }

    fn pins(&self, repo: &RepoEntry) -> Result<Arc<PinStore>, ApiError> {
        let mut slot = repo.pins.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(store) = slot.as_ref() {
            return Ok(store.clone());
        }
        let store = Arc::new(PinStore::open(&self.data_dir, repo.stem.repo().name())?);
        *slot = Some(store.clone());
        Ok(store)
    }
}

/// Releases an ingestion slot when the request finishes.
struct IngestSlot<'a> {
    state: &'a AppState,
    key: String,
}

impl Drop for IngestSlot<'_> {
    fn drop(&mut self) {
        self.state
            .ingesting
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .remove(&self.key);
    }
}

pub fn router(state: Arc<AppState>, ui_origin: Option<HeaderValue>) -> Router {
    let router = Router::new()
        .route("/repos", post(create_repo).get(list_repos))
        .route("/repos/{id}/stem", get(stem_summary))
        .route("/repos/{id}/scopes", post(create_scope))
        .route("/repos/{id}/fragments/history", get(fragment_history))
        .route("/repos/{id}/pins", get(get_pins).post(add_pin).delete(remove_pin))
        .route("/scopes/{id}", get(get_scope))
        .route("/scopes/{id}/granularity", post(set_granularity))
        .route("/scopes/{id}/table", get(get_table))
        .route("/scopes/{id}/clusters/{cid}/commits", get(cluster_commits))
        .route("/scopes/{id}/inspect", post(inspect))
        .route("/schema/", get(schema_index))
        .route("/schema/{name}", get(schema_document))
        .with_state(state);
    match ui_origin {
        Some(origin) => router.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST, Method::DELETE])
                .allow_headers([axum::http::header::CONTENT_TYPE]),
        ),
        None => router,
    }
}

pub struct ServeConfig {
    pub addr: SocketAddr,
    pub ui_origin: Option<String>,
}

/// Serves until interrupted with Ctrl-C.
pub async fn serve(state: Arc<AppState>, config: ServeConfig) -> std::io::Result<()> {
    let origin = match config.ui_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(v)) => Some(v),
        Some(Err(e)) => return Err(std::io::Error::new(std::io::ErrorKind::InvalidInput, e)),
        None => None,
    };
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, origin))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRepo {
    path: Option<PathBuf>,
    dump: Option<String>,
}

#[derive(Serialize)]
struct RepoCreated {
    repo_id: String,
    name: String,
    node_count: usize,
    commit_count: usize,
}

async fn create_repo(
    State(state): State<Arc<AppState>>,
    ApiJson(body): ApiJson<CreateRepo>,
) -> Result<Response, ApiError> {
    let key = match (&body.path, &body.dump) {
        (Some(p), None) => format!("path:{}", p.canonicalize().unwrap_or_else(|_| p.clone()).display()),
        (None, Some(d)) => format!("dump:{}", hex::encode(Sha256::digest(d.as_bytes()))),
        _ => return Err(ApiError::invalid("provide exactly one of \"path\" or \"dump\"")),
    };
    if !state
        .ingesting
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .insert(key.clone())
    {
        return Err(ApiError::conflict(
            "IngestInProgress",
            "this repository is already being ingested",
        ));
    }
    let _slot = IngestSlot { state: &state, key };

    let snapshot = tokio::task::spawn_blocking(move || match (body.path, body.dump) {
        (Some(path), _) => ingest::extract_live(&path),
        (_, Some(dump)) => ingest::parse_dump_str(&dump),
        _ => unreachable!(),
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;

    let id = state.register(snapshot)?;
    let repo = state.repo(&id)?;
    let body = RepoCreated {
        repo_id: id,
        name: repo.stem.repo().name().to_string(),
        node_count: repo.stem.len(),
        commit_count: repo.stem.total_commits(),
    };
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn list_repos(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let repos = state.repos.read().unwrap_or_else(|e| e.into_inner());
    let list: Vec<_> = repos
        .values()
        .map(|r| serde_json::json!({ "repo_id": r.id, "name": r.stem.repo().name() }))
        .collect();
    Json(serde_json::json!({ "repos": list }))
}

#[derive(Serialize)]
struct ReleaseMark {
    tag: String,
    index: usize,
}

#[derive(Serialize)]
struct DateRange {
    from: i64,
    to: i64,
}

#[derive(Serialize)]
struct StemSummary {
    repo_id: String,
    name: String,
    head: String,
    node_count: usize,
    commit_count: usize,
    excluded_commits: usize,
    releases: Vec<ReleaseMark>,
    date_range: DateRange,
}

async fn stem_summary(
    State(state): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
) -> Result<Json<StemSummary>, ApiError> {
    let repo = state.repo(&id)?;
    let stem = &repo.stem;
    let times: Vec<i64> = (0..stem.len()).map(|i| stem.lead(i).timestamp).collect();
    Ok(Json(StemSummary {
        repo_id: repo.id.clone(),
        name: stem.repo().name().to_string(),
        head: stem.repo().default_head().to_string(),
        node_count: stem.len(),
        commit_count: stem.total_commits(),
        excluded_commits: stem.excluded_commits(),
        releases: stem
            .nodes()
            .iter()
            .filter_map(|n| n.release.clone().map(|tag| ReleaseMark { tag, index: n.index }))
            .collect(),
        date_range: DateRange {
            from: times.iter().copied().min().unwrap_or(0),
            to: times.iter().copied().max().unwrap_or(0),
        },
    }))
}

#[derive(Serialize)]
struct ScopePayload<'a> {
    scope_id: &'a str,
    repo_id: &'a str,
    node_range: NodeRange,
    granularity: f64,
    mode: ClusterMode,
    commit_count: usize,
    matched_nodes: &'a [usize],
    clusters: &'a [Cluster],
}

fn scope_payload(repo_id: &str, scope: &Scope) -> serde_json::Value {
    serde_json::to_value(ScopePayload {
        scope_id: &scope.id,
        repo_id,
        node_range: scope.node_range,
        granularity: scope.granularity,
        mode: scope.mode,
        commit_count: scope.commit_count(),
        matched_nodes: &scope.matched_nodes,
        clusters: &scope.clusters,
    })
    .expect("scope payload serialises")
}

fn default_granularity() -> f64 {
    0.5
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateScope {
    #[serde(default)]
    filter: ScopeFilter,
    #[serde(default = "default_granularity")]
    granularity: f64,
    #[serde(default)]
    mode: ClusterMode,
    #[serde(default)]
    weights: Option<SimilarityWeights>,
}

async fn create_scope(
    State(state): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiJson(body): ApiJson<CreateScope>,
) -> Result<Response, ApiError> {
    let repo = state.repo(&id)?;
    let options = ScopeOptions {
        mode: body.mode,
        weights: body.weights.unwrap_or_default(),
    };
    let stem = repo.stem.clone();
    let resolved =
        tokio::task::spawn_blocking(move || scope::resolve_scope_with(&stem, &body.filter, body.granularity, &options))
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
            .map_err(crate::Error::from)?;

    let mut cache = state.scopes.lock().unwrap_or_else(|e| e.into_inner());
    let entry = match cache.get(&resolved.id) {
        Some(existing) => {
            let mut current = existing.scope.write().unwrap_or_else(|e| e.into_inner());
            *current = scope::rescope(&current, resolved.granularity).map_err(crate::Error::from)?;
            existing.clone()
        }
        None => {
            let entry = Arc::new(ScopeEntry {
                repo_id: repo.id.clone(),
                scope: RwLock::new(resolved),
            });
            let key = entry.scope.read().unwrap_or_else(|e| e.into_inner()).id.clone();
            cache.put(key, entry.clone());
            entry
        }
    };
    drop(cache);
    let scope = entry.scope.read().unwrap_or_else(|e| e.into_inner());
    Ok((StatusCode::CREATED, Json(scope_payload(&repo.id, &scope))).into_response())
}

async fn get_scope(
    State(state): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (entry, repo) = state.scope(&id)?;
    let scope = entry.scope.read().unwrap_or_else(|e| e.into_inner());
    Ok(Json(scope_payload(&repo.id, &scope)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Granularity {
    g: f64,
}

async fn set_granularity(
    State(state): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiJson(body): ApiJson<Granularity>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (entry, repo) = state.scope(&id)?;
    let mut scope = entry.scope.write().unwrap_or_else(|e| e.into_inner());
    *scope = scope::rescope(&scope, body.g).map_err(crate::Error::from)?;
    Ok(Json(scope_payload(&repo.id, &scope)))
}

#[derive(Deserialize)]
struct TableQuery {
    k: Option<usize>,
    dims: Option<String>,
}

async fn get_table(
    State(state): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiQuery(q): ApiQuery<TableQuery>,
) -> Result<Json<table::DimensionValueTable>, ApiError> {
    let (entry, repo) = state.scope(&id)?;
    let dims = match q.dims.as_deref() {
        Some(list) => Some(Dimension::parse_list(list).map_err(crate::Error::from)?),
        None => None,
    };
    let scope = entry.scope.read().unwrap_or_else(|e| e.into_inner()).clone();
    let table = table::build_table(&repo.stem, &scope, q.k.unwrap_or(DEFAULT_TOP_K), dims.as_deref())
        .map_err(crate::Error::from)?;
    Ok(Json(table))
}

#[derive(Serialize)]
struct ClusterCommits {
    scope_id: String,
    cluster: Cluster,
    commits: Vec<table::CommitDetail>,
}

async fn cluster_commits(
    State(state): State<Arc<AppState>>,
    ApiPath((id, cid)): ApiPath<(String, String)>,
) -> Result<Json<ClusterCommits>, ApiError> {
    let (entry, repo) = state.scope(&id)?;
    let scope = entry.scope.read().unwrap_or_else(|e| e.into_inner());
    let cluster = scope
        .cluster(&cid)
        .ok_or_else(|| ApiError::not_found("cluster", &cid))?
        .clone();
    let commits = table::commit_details(&repo.stem, &cluster);
    Ok(Json(ClusterCommits {
        scope_id: scope.id.clone(),
        cluster,
        commits,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InspectBody {
    fragments: Vec<Fragment>,
}

async fn inspect(
    State(state): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiJson(body): ApiJson<InspectBody>,
) -> Result<Json<fragments::InspectionMatrix>, ApiError> {
    let (entry, repo) = state.scope(&id)?;
    let scope = entry.scope.read().unwrap_or_else(|e| e.into_inner()).clone();
    Ok(Json(fragments::inspect(&repo.stem, &scope, &body.fragments)?))
}

#[derive(Deserialize)]
struct HistoryQuery {
    dimension: String,
    value: String,
    scope_id: Option<String>,
}

async fn fragment_history(
    State(state): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiQuery(q): ApiQuery<HistoryQuery>,
) -> Result<Json<fragments::FragmentHistory>, ApiError> {
    let repo = state.repo(&id)?;
    let dim = q.dimension.parse::<Dimension>().map_err(crate::Error::from)?;
    let fragment = Fragment::new(dim, q.value)?;
    let scope = match q.scope_id.as_deref().filter(|s| !s.is_empty()) {
        Some(sid) => {
            let (entry, owner) = state.scope(sid)?;
            if owner.id != repo.id {
                return Err(ApiError::invalid(format!("scope {sid} belongs to another repository")));
            }
            let scope = entry.scope.read().unwrap_or_else(|e| e.into_inner()).clone();
            Some(scope)
        }
        None => None,
    };
    Ok(Json(fragments::history(&repo.stem, &fragment, scope.as_ref())))
}

async fn get_pins(
    State(state): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
) -> Result<Json<fragments::PinBoard>, ApiError> {
    let repo = state.repo(&id)?;
    Ok(Json(state.pins(&repo)?.board()))
}

async fn add_pin(
    State(state): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiJson(fragment): ApiJson<Fragment>,
) -> Result<Json<fragments::PinBoard>, ApiError> {
    let repo = state.repo(&id)?;
    Ok(Json(state.pins(&repo)?.pin(fragment)?))
}

async fn remove_pin(
    State(state): State<Arc<AppState>>,
    ApiPath(id): ApiPath<String>,
    ApiQuery(fragment): ApiQuery<Fragment>,
) -> Result<Json<fragments::PinBoard>, ApiError> {
    let repo = state.repo(&id)?;
    Ok(Json(state.pins(&repo)?.unpin(&fragment)?))
}

async fn schema_index() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "schemas": schema::NAMES }))
}

async fn schema_document(ApiPath(name): ApiPath<String>) -> Result<Response, ApiError> {
    let name = name.strip_suffix(".json").unwrap_or(&name);
    let doc = schema::get(name).ok_or_else(|| ApiError::not_found("schema", name))?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/schema+json")], doc).into_response())
}
