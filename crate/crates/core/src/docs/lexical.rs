use std::collections::{BTreeSet, HashMap, HashSet};

use async_trait::async_trait;
use thiserror::Error;

use super::{sort_hits, DocHit, DocProvider, Document, ProviderKind, RetrievalError};
use crate::kg::surface_tokens;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("document `{0}` has an empty title")]
    EmptyTitle(String),
}

/// In-memory BM25 index over normalized title and body tokens.
///
/// `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`, which stays positive, so a
/// document scores above zero iff it contains a query term.
#[derive(Debug, Clone, Default)]
pub struct LexicalIndex {
    docs: Vec<Document>,
    doc_len: Vec<u32>,
    avg_len: f64,
    postings: HashMap<String, Vec<(u32, u32)>>,
}

impl LexicalIndex {
    pub fn build<I>(documents: I) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = Document>,
    {
        let mut seen = HashSet::new();
        let mut docs = Vec::new();
        let mut doc_len = Vec::new();
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        for doc in documents {
            if !seen.insert(doc.doc_id.clone()) {
                return Err(IndexError::DuplicateId(doc.doc_id));
            }
            if doc.title.trim().is_empty() {
                return Err(IndexError::EmptyTitle(doc.doc_id));
            }
            let ix = docs.len() as u32;
            let tokens = surface_tokens(&format!("{} {}", doc.title, doc.text));
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &tokens {
                *tf.entry(t.clone()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((ix, count));
            }
            doc_len.push(tokens.len() as u32);
            docs.push(doc);
        }
        let avg_len = if docs.is_empty() {
            0.0
        } else {
            doc_len.iter().map(|&l| l as f64).sum::<f64>() / docs.len() as f64
        };
        Ok(Self {
            docs,
            doc_len,
            avg_len,
            postings,
        })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    /// Top `k` documents; distinct query terms each contribute once, summed in
    /// sorted term order so scores are bit-identical across runs.
    pub fn query(&self, query: &str, k: usize) -> Vec<DocHit> {
        let n = self.docs.len() as f64;
        let terms: BTreeSet<String> = surface_tokens(query).into_iter().collect();
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let df = list.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for &(doc, tf) in list {
                let tf = tf as f64;
                let len_norm = 1.0 - BM25_B + BM25_B * self.doc_len[doc as usize] as f64 / self.avg_len;
                *scores.entry(doc).or_default() += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * len_norm);
            }
        }
        let mut hits: Vec<DocHit> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(doc, score)| DocHit {
                document: self.docs[doc as usize].clone(),
                score,
            })
            .collect();
        sort_hits(&mut hits);
        hits.truncate(k);
        hits
    }
}

#[async_trait]
impl DocProvider for LexicalIndex {
    fn kind(&self) -> ProviderKind {
        ProviderKind::LocalLexical
    }

    async fn search(&self, query: &str, k: usize) -> Result<Vec<DocHit>, RetrievalError> {
        Ok(self.query(query, k))
    }
}
