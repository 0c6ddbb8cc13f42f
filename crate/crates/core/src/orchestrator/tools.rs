use std::collections::HashSet;
use std::sync::Arc;

use async_trait::async_trait;

use crate::docs::{doc_search, filter_docs, DocHit, DocProvider, FilterOutcome, RetrievalError};
use crate::kg::{KgQuery, KgSearchOptions, KnowledgeStore, RemoteKgClient, ScoredTriple, WhitespaceTokens};
use crate::llm::{parse_selection, GenerationRequest, LanguageModel};
use crate::protocol::{SearchRequest, SegmentKind};
use crate::rewards::RetrievalStep;

use super::AgentConfig;

pub const NO_RESULTS: &str = "No results found.";

/// Knowledge-graph search backend: in-process store or remote service.
#[async_trait]
pub trait KgTool: Send + Sync {
    async fn search(&self, query: &KgQuery, options: &KgSearchOptions) -> Result<Vec<ScoredTriple>, String>;
}

#[async_trait]
impl KgTool for KnowledgeStore {
    async fn search(&self, query: &KgQuery, options: &KgSearchOptions) -> Result<Vec<ScoredTriple>, String> {
        Ok(self.kg_search_with(query, options, &WhitespaceTokens))
    }
}

#[async_trait]
impl KgTool for RemoteKgClient {
    async fn search(&self, query: &KgQuery, _options: &KgSearchOptions) -> Result<Vec<ScoredTriple>, String> {
        RemoteKgClient::search(self, query).await
    }
}

/// Retrieval tools shared read-only by every rollout.
#[derive(Clone)]
pub struct SearchEnv {
    pub docs: Arc<dyn DocProvider>,
    pub kg: Option<Arc<dyn KgTool>>,
    /// Model used by the document and KG filters; `None` selects the
    /// deterministic fallbacks.
    pub filter_llm: Option<Arc<dyn LanguageModel>>,
}

impl SearchEnv {
    pub fn new(docs: Arc<dyn DocProvider>) -> Self {
        Self {
            docs,
            kg: None,
            filter_llm: None,
        }
    }

    pub fn with_kg(mut self, kg: Arc<dyn KgTool>) -> Self {
        self.kg = Some(kg);
        self
    }

    pub fn with_filter_llm(mut self, llm: Arc<dyn LanguageModel>) -> Self {
        self.filter_llm = Some(llm);
        self
    }
}

/// What one search step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Body placed between `<result>` and `</result>`.
    pub text: String,
    pub step: RetrievalStep,
    pub doc_error: Option<RetrievalError>,
    pub kg_error: Option<String>,
    pub warnings: Vec<String>,
}

const KG_FILTER_SYSTEM: &str = "You select knowledge-graph triples that help answer a question. \
Reply with the numbers of the most relevant triples as a JSON list such as [2, 5].";

/// Keeps at most `limit` candidates: the LLM's selection in candidate order, or
/// the top `limit` by score without a model or when the model fails.
pub async fn kg_filter(
    candidates: Vec<ScoredTriple>,
    request: &SearchRequest,
    question: &str,
    llm: Option<&dyn LanguageModel>,
    limit: usize,
) -> FilterOutcome<ScoredTriple> {
    let limit = limit.max(1);
    let top = |mut c: Vec<ScoredTriple>| {
        c.truncate(limit);
        c
    };
    let Some(llm) = llm.filter(|_| !candidates.is_empty()) else {
        return FilterOutcome {
            kept: top(candidates),
            warning: None,
        };
    };

    let mut prompt = format!(
        "Queried entity: {}\nQueried relation: {}\nCurrent subquery: {}\nOriginal question: {}\n\n\
         Select up to {limit} of these entity-relation triples:\n",
        serde_json::to_string(&request.entity).unwrap_or_default(),
        serde_json::to_string(&request.relation).unwrap_or_default(),
        request.query,
        question,
    );
    for (i, c) in candidates.iter().enumerate() {
        prompt.push_str(&format!("[{}] {}\n", i + 1, c.rendered));
    }
    let warning = match llm.generate(&GenerationRequest::prompt(KG_FILTER_SYSTEM, prompt)).await {
        Ok(g) => match parse_selection(&g.text, candidates.len()) {
            Some(picked) => {
                let picked: HashSet<usize> = picked.into_iter().take(limit).collect();
                let kept = candidates
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| picked.contains(i))
                    .map(|(_, c)| c)
                    .collect();
                return FilterOutcome {
                    kept,
                    warning: None,
                };
            }
            None => format!("kg filter reply not understood: {:?}", g.text),
        },
        Err(e) => format!("kg filter model failed: {e}"),
    };
    tracing::warn!("{warning}; keeping top {limit} by score");
    FilterOutcome {
        kept: top(candidates),
        warning: Some(warning),
    }
}

/// Runs both tools for one request and renders the result block body:
/// a `Documents:` section, then a `Knowledge graph:` section, each omitted
/// when empty and replaced by one diagnostic line when its tool fails.
pub async fn execute_search(
    request: &SearchRequest,
    question: &str,
    env: &SearchEnv,
    config: &AgentConfig,
) -> SearchOutcome {
    let filter_llm = env.filter_llm.as_deref();
    let mut warnings = Vec::new();

    let docs_fut = async {
        let hits = doc_search(env.docs.as_ref(), &request.query, config.doc_top_k).await?;
        Ok::<_, RetrievalError>(if config.filter_docs {
            filter_docs(hits, &request.query, question, filter_llm).await
        } else {
            FilterOutcome::ok(hits)
        })
    };
    let kg_fut = async {
        let Some(kg) = env.kg.as_ref().filter(|_| !request.entity.is_empty()) else {
            return Ok(FilterOutcome::ok(Vec::new()));
        };
        let query = KgQuery::new(request.entity.clone(), request.relation.clone());
        let ranked = kg.search(&query, &config.kg).await?;
        Ok::<_, String>(if config.filter_kg {
            kg_filter(ranked, request, question, filter_llm, config.kg_filter_limit).await
        } else {
            FilterOutcome::ok(ranked)
        })
    };
    let (docs, kg) = futures::join!(docs_fut, kg_fut);

    let mut sections = Vec::new();
    let mut step = RetrievalStep::default();
    let doc_error = match docs {
        Ok(out) => {
            warnings.extend(out.warning);
            if !out.kept.is_empty() {
                sections.push(render_docs(&out.kept));
            }
            step.titles = out.kept.iter().map(|h| h.document.title.clone()).collect();
            step.scores = Some(out.kept.iter().map(|h| h.score).collect());
            None
        }
        Err(e) => {
            sections.push(format!("[document search unavailable: {e}]"));
            Some(e)
        }
    };
    let kg_error = match kg {
        Ok(out) => {
            warnings.extend(out.warning);
            if !out.kept.is_empty() {
                let lines: Vec<&str> = out.kept.iter().map(|t| t.rendered.as_str()).collect();
                sections.push(format!("Knowledge graph:\n{}", lines.join("\n")));
            }
            None
        }
        Err(e) => {
            sections.push(format!("[knowledge graph search unavailable: {e}]"));
            Some(e)
        }
    };

    let text = if sections.is_empty() {
        NO_RESULTS.to_owned()
    } else {
        neutralize_delimiters(&sections.join("\n\n"))
    };
    SearchOutcome {
        text,
        step,
        doc_error,
        kg_error,
        warnings,
    }
}

fn render_docs(hits: &[DocHit]) -> String {
    let mut out = String::from("Documents:");
    for (i, h) in hits.iter().enumerate() {
        out.push_str(&format!("\n[{}] {}\n{}", i + 1, h.document.title, h.document.text.trim()));
    }
    out
}

/// Escapes protocol delimiters in retrieved text so it cannot open or close segments.
pub(crate) fn neutralize_delimiters(text: &str) -> String {
    let mut out = text.to_owned();
    for kind in SegmentKind::ALL {
        for tag in [kind.open_tag(), kind.close_tag()] {
            if out.contains(tag) {
                out = out.replace(tag, &format!("&lt;{}", &tag[1..]));
            }
        }
    }
    out
}
