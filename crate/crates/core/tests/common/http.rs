use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use fragex::api::{router, AppState};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

pub struct Client {
    router: Router,
}

impl Client {
    pub fn new(data_dir: &std::path::Path) -> Self {
        Client {
            router: router(Arc::new(AppState::new(data_dir)), None),
        }
    }

    pub fn with_router(router: Router) -> Self {
        Client { router }
    }

    pub async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(serde_json::to_vec(&v).unwrap())
            }
            None => Body::empty(),
        };
        let resp = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap()
        };
        (status, value)
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }
}

/// Schema violations of `instance` against a served schema; empty when valid.
pub fn schema_errors(name: &str, instance: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(fragex::api::schema::get(name).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator
        .iter_errors(instance)
        .map(|e| format!("{name}: {e} at {}", e.instance_path()))
        .collect()
}

pub fn assert_schema(name: &str, instance: &Value) {
    let errors = schema_errors(name, instance);
    assert!(errors.is_empty(), "{errors:?}\n{instance:#}");
}

/// Every response body of one scripted session, keyed by step.
pub struct Session {
    pub bodies: Vec<(&'static str, &'static str, StatusCode, Value)>,
    pub repo_id: String,
    pub scope_id: String,
}

impl Session {
    pub fn body(&self, step: &str) -> &Value {
        &self
            .bodies
            .iter()
            .find(|b| b.0 == step)
            .unwrap_or_else(|| panic!("no step {step}"))
            .3
    }
}

pub fn encode(value: &str) -> String {
    value
        .bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

/// ingest -> stem -> scope -> table -> commits -> inspect -> history -> pins -> recut.
pub async fn run_session(client: &Client, dump: &str) -> Session {
    let mut bodies = Vec::new();
    let mut step = |name: &'static str, schema: &'static str, (status, body): (StatusCode, Value)| {
        bodies.push((name, schema, status, body.clone()));
        body
    };
    let created = step(
        "ingest",
        "repo_created",
        client.post("/repos", serde_json::json!({ "dump": dump })).await,
    );
    let repo_id = created["repo_id"].as_str().unwrap().to_string();
    step(
        "stem",
        "stem_summary",
        client.get(&format!("/repos/{repo_id}/stem")).await,
    );
    let scope = step(
        "scope",
        "scope",
        client
            .post(
                &format!("/repos/{repo_id}/scopes"),
                serde_json::json!({ "granularity": 0.5 }),
            )
            .await,
    );
    let scope_id = scope["scope_id"].as_str().unwrap().to_string();
    let table = step(
        "table",
        "table",
        client.get(&format!("/scopes/{scope_id}/table?k=5")).await,
    );
    let first_cluster = scope["clusters"][0]["id"].as_str().unwrap().to_string();
    step(
        "commits",
        "cluster_commits",
        client
            .get(&format!("/scopes/{scope_id}/clusters/{first_cluster}/commits"))
            .await,
    );
    let top_author = table["scope_column"]["rows"][0]["entries"][0]["value"]
        .as_str()
        .unwrap()
        .to_string();
    let fragment = serde_json::json!({ "dimension": "author", "value": top_author });
    step(
        "inspect",
        "inspection",
        client
            .post(
                &format!("/scopes/{scope_id}/inspect"),
                serde_json::json!({ "fragments": [fragment] }),
            )
            .await,
    );
    step(
        "history",
        "history",
        client
            .get(&format!(
                "/repos/{repo_id}/fragments/history?dimension=author&value={}&scope_id={scope_id}",
                encode(&top_author)
            ))
            .await,
    );
    step(
        "pin",
        "pin_board",
        client.post(&format!("/repos/{repo_id}/pins"), fragment.clone()).await,
    );
    step("pins", "pin_board", client.get(&format!("/repos/{repo_id}/pins")).await);
    step(
        "unpin",
        "pin_board",
        client
            .call(
                Method::DELETE,
                &format!("/repos/{repo_id}/pins?dimension=author&value={}", encode(&top_author)),
                None,
            )
            .await,
    );
    step(
        "recut",
        "scope",
        client
            .post(
                &format!("/scopes/{scope_id}/granularity"),
                serde_json::json!({ "g": 1.0 }),
            )
            .await,
    );
    Session {
        bodies,
        repo_id,
        scope_id,
    }
}
