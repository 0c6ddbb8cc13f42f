//! Document search tool: a local BM25 index, a remote dense-retriever client
//! and a web-search client behind [`DocProvider`].

mod filter;
mod lexical;
mod remote;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{filter_docs, FilterOutcome};
pub use lexical::{IndexError, LexicalIndex, BM25_B, BM25_K1};
pub use remote::{RemoteDenseClient, WebSearchClient, DEFAULT_WEB_ENDPOINT, WEB_SEARCH_API_KEY_ENV};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "id")]
    pub doc_id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocHit {
    pub document: Document,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    LocalLexical,
    RemoteDense,
    Web,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LocalLexical => "local-lexical",
            Self::RemoteDense => "remote-dense",
            Self::Web => "web",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
}

fn default_top_k() -> usize {
    5
}

fn default_timeout_secs() -> f64 {
    30.0
}

fn default_max_concurrent() -> usize {
    8
}

impl ProviderConfig {
    pub fn new(kind: ProviderKind) -> Self {
        Self {
            kind,
            endpoint: None,
            api_key: None,
            top_k: default_top_k(),
            timeout_secs: default_timeout_secs(),
            max_concurrent: default_max_concurrent(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.top_k < 1 {
            return Err("top_k must be at least 1".into());
        }
        if self.max_concurrent < 1 {
            return Err("max_concurrent must be at least 1".into());
        }
        if self.kind == ProviderKind::RemoteDense && self.endpoint.is_none() {
            return Err("remote-dense provider needs an endpoint".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrievalCause {
    #[error("timed out")]
    Timeout,
    #[error("HTTP {0}")]
    Status(u16),
    #[error("{0}")]
    Transport(String),
    #[error("bad response: {0}")]
    Decode(String),
    #[error("missing configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} retrieval failed: {cause}")]
pub struct RetrievalError {
    pub kind: ProviderKind,
    pub cause: RetrievalCause,
}

#[async_trait]
pub trait DocProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    /// At most `k` hits in non-increasing score order.
    async fn search(&self, query: &str, k: usize) -> Result<Vec<DocHit>, RetrievalError>;
}

/// Runs `provider` and enforces the at-most-`k` contract.
pub async fn doc_search(
    provider: &dyn DocProvider,
    query: &str,
    k: usize,
) -> Result<Vec<DocHit>, RetrievalError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut hits = provider.search(query, k).await?;
    hits.truncate(k);
    Ok(hits)
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Reads a JSONL corpus of `{"id", "title", "text"}` objects.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let io = |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Sorts by descending score, then ascending doc id.
pub(crate) fn sort_hits(hits: &mut [DocHit]) {
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.document.doc_id.cmp(&b.document.doc_id))
    });
}
