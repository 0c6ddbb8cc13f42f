use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use super::{
    sort_hits, DocHit, DocProvider, Document, ProviderConfig, ProviderKind, RetrievalCause,
    RetrievalError,
};

pub const WEB_SEARCH_API_KEY_ENV: &str = "WEB_SEARCH_API_KEY";
pub const DEFAULT_WEB_ENDPOINT: &str = "https://api.tavily.com/search";

/// Shared HTTP plumbing: bounded in-flight requests and per-request timeout.
struct HttpPool {
    http: reqwest::Client,
    permits: Arc<Semaphore>,
    kind: ProviderKind,
}

impl HttpPool {
    fn new(config: &ProviderConfig) -> Result<Self, RetrievalError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| RetrievalError {
                kind: config.kind,
                cause: RetrievalCause::Transport(e.to_string()),
            })?;
        Ok(Self {
            http,
            permits: Arc::new(Semaphore::new(config.max_concurrent.max(1))),
            kind: config.kind,
        })
    }

    fn error(&self, cause: RetrievalCause) -> RetrievalError {
        RetrievalError {
            kind: self.kind,
            cause,
        }
    }

    async fn post<B: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        url: &str,
        body: &B,
        bearer: Option<&str>,
    ) -> Result<R, RetrievalError> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|e| self.error(RetrievalCause::Transport(e.to_string())))?;
        let mut call = self.http.post(url).json(body);
        if let Some(key) = bearer {
            call = call.bearer_auth(key);
        }
        let response = call.send().await.map_err(|e| {
            self.error(if e.is_timeout() {
                RetrievalCause::Timeout
            } else {
                RetrievalCause::Transport(e.to_string())
            })
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(self.error(RetrievalCause::Status(status.as_u16())));
        }
        response
            .json()
            .await
            .map_err(|e| self.error(RetrievalCause::Decode(e.to_string())))
    }
}

/// Client for a dense retrieval service answering
/// `POST {"query", "top_k"}` with `{"hits": [{"id", "title", "text", "score"}]}`.
pub struct RemoteDenseClient {
    endpoint: String,
    pool: HttpPool,
}

#[derive(Serialize)]
struct DenseRequest<'a> {
    query: &'a str,
    top_k: usize,
}

#[derive(Deserialize)]
struct DenseResponse {
    #[serde(default)]
    hits: Vec<DenseHit>,
}

#[derive(Deserialize)]
struct DenseHit {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    score: f64,
}

impl RemoteDenseClient {
    pub fn new(config: &ProviderConfig) -> Result<Self, RetrievalError> {
        let endpoint = config.endpoint.clone().ok_or(RetrievalError {
            kind: ProviderKind::RemoteDense,
            cause: RetrievalCause::Config("endpoint".into()),
        })?;
        let config = ProviderConfig {
            kind: ProviderKind::RemoteDense,
            ..config.clone()
        };
        Ok(Self {
            endpoint,
            pool: HttpPool::new(&config)?,
        })
    }
}

#[async_trait]
impl DocProvider for RemoteDenseClient {
    fn kind(&self) -> ProviderKind {
        ProviderKind::RemoteDense
    }

    async fn search(&self, query: &str, k: usize) -> Result<Vec<DocHit>, RetrievalError> {
        let resp: DenseResponse = self
            .pool
            .post(&self.endpoint, &DenseRequest { query, top_k: k }, None)
            .await?;
        let mut hits: Vec<DocHit> = resp
            .hits
            .into_iter()
            .map(|h| DocHit {
                document: Document {
                    doc_id: h.id,
                    title: h.title,
                    text: h.text,
                },
                score: h.score,
            })
            .collect();
        sort_hits(&mut hits);
        hits.truncate(k);
        Ok(hits)
    }
}

/// Tavily-style web search. Results map to documents with the URL as id.
pub struct WebSearchClient {
    endpoint: String,
    api_key: Option<String>,
    pool: HttpPool,
}

#[derive(Serialize)]
struct WebRequest<'a> {
    query: &'a str,
    max_results: usize,
}

#[derive(Deserialize)]
struct WebResponse {
    #[serde(default)]
    results: Vec<WebResult>,
}

#[derive(Deserialize)]
struct WebResult {
    #[serde(default)]
    title: String,
    url: String,
    #[serde(default)]
    content: String,
    #[serde(default)]
    score: Option<f64>,
}

impl WebSearchClient {
    pub fn new(config: &ProviderConfig) -> Result<Self, RetrievalError> {
        let api_key = config
            .api_key
            .clone()
            .or_else(|| std::env::var(WEB_SEARCH_API_KEY_ENV).ok())
            .filter(|k| !k.is_empty());
        let config = ProviderConfig {
            kind: ProviderKind::Web,
            ..config.clone()
        };
        Ok(Self {
            endpoint: config
                .endpoint
                .clone()
                .unwrap_or_else(|| DEFAULT_WEB_ENDPOINT.to_owned()),
            api_key,
            pool: HttpPool::new(&config)?,
        })
    }
}

#[async_trait]
impl DocProvider for WebSearchClient {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Web
    }

    async fn search(&self, query: &str, k: usize) -> Result<Vec<DocHit>, RetrievalError> {
        let Some(key) = self.api_key.as_deref() else {
            return Err(self.pool.error(RetrievalCause::Config(format!(
                "{WEB_SEARCH_API_KEY_ENV} is not set"
            ))));
        };
        let resp: WebResponse = self
            .pool
            .post(
                &self.endpoint,
                &WebRequest {
                    query,
                    max_results: k,
                },
                Some(key),
            )
            .await?;
        let total = resp.results.len();
        let mut hits: Vec<DocHit> = resp
            .results
            .into_iter()
            .enumerate()
            .map(|(rank, r)| DocHit {
                score: r.score.unwrap_or((total - rank) as f64),
                document: Document {
                    title: if r.title.is_empty() { r.url.clone() } else { r.title },
                    doc_id: r.url,
                    text: r.content,
                },
            })
            .collect();
        // Stable sort keeps provider order among equal scores.
        hits.sort_by(|a, b| b.score.total_cmp(&a.score));
        hits.truncate(k);
        Ok(hits)
    }
}
