//! HTTP front end for a loaded [`KnowledgeStore`]: `POST /kg/search`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::search::{KgQuery, KgSearchOptions, ScoredTriple, WhitespaceTokens};
use super::store::KnowledgeStore;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub rendered: String,
    pub score: u32,
}

impl From<ScoredTriple> for TripleRecord {
    fn from(st: ScoredTriple) -> Self {
        Self {
            head: st.triple.head.0,
            relation: st.triple.relation.0,
            tail: st.triple.tail.0,
            rendered: st.rendered,
            score: st.score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgSearchResponse {
    pub triples: Vec<TripleRecord>,
}

#[derive(Clone)]
struct ServiceState {
    store: Arc<KnowledgeStore>,
    options: KgSearchOptions,
}

pub fn router(store: Arc<KnowledgeStore>, options: KgSearchOptions) -> Router {
    Router::new()
        .route("/kg/search", post(search))
        .route("/health", get(|| async { "ok" }))
        .with_state(ServiceState { store, options })
}

async fn search(
    State(state): State<ServiceState>,
    Json(query): Json<KgQuery>,
) -> Json<KgSearchResponse> {
    let triples = state
        .store
        .kg_search_with(&query, &state.options, &WhitespaceTokens)
        .into_iter()
        .map(TripleRecord::from)
        .collect();
    Json(KgSearchResponse { triples })
}

/// Binds `addr` and serves until the task is dropped or the listener fails.
pub async fn serve(
    store: Arc<KnowledgeStore>,
    options: KgSearchOptions,
    addr: SocketAddr,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "knowledge graph service listening");
    axum::serve(listener, router(store, options)).await
}

/// Client for a remote `POST /kg/search` endpoint.
pub struct RemoteKgClient {
    url: String,
    http: reqwest::Client,
}

impl RemoteKgClient {
    /// `base_url` is the service root, e.g. `http://127.0.0.1:8081`.
    pub fn new(base_url: &str, timeout: std::time::Duration) -> Result<Self, reqwest::Error> {
        Ok(Self {
            url: format!("{}/kg/search", base_url.trim_end_matches('/')),
            http: reqwest::Client::builder().timeout(timeout).build()?,
        })
    }

    pub async fn search(&self, query: &KgQuery) -> Result<Vec<ScoredTriple>, String> {
        let response = self
            .http
            .post(&self.url)
            .json(query)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        if !response.status().is_success() {
            return Err(format!("HTTP {}", response.status().as_u16()));
        }
        let body: KgSearchResponse = response.json().await.map_err(|e| e.to_string())?;
        Ok(body
            .triples
            .into_iter()
            .map(|r| ScoredTriple {
                triple: super::Triple::new(&r.head, &r.relation, &r.tail),
                rendered: r.rendered,
                score: r.score,
            })
            .collect())
    }
}
