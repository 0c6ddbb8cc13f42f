use std::collections::HashSet;

use super::DocHit;
use crate::kg::surface_tokens;
use crate::llm::{parse_selection, GenerationRequest, LanguageModel};

/// Items kept by a filter, with the reason when it fell back to the
/// deterministic rule after an LLM failure.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome<T> {
    pub kept: Vec<T>,
    pub warning: Option<String>,
}

impl<T> FilterOutcome<T> {
    pub(crate) fn ok(kept: Vec<T>) -> Self {
        Self {
            kept,
            warning: None,
        }
    }
}

const DOC_FILTER_SYSTEM: &str = "You select retrieved documents that help answer a question. \
Reply with the numbers of the relevant documents as a JSON list such as [1, 3], or [] if none are relevant.";

const SNIPPET_CHARS: usize = 600;

/// Keeps the hits an LLM judges relevant (input order preserved); without a
/// model, or when it fails, keeps hits sharing a normalized token with `subquery`.
pub async fn filter_docs(
    hits: Vec<DocHit>,
    subquery: &str,
    question: &str,
    llm: Option<&dyn LanguageModel>,
) -> FilterOutcome<DocHit> {
    if hits.is_empty() {
        return FilterOutcome::ok(hits);
    }
    let Some(llm) = llm else {
        return FilterOutcome::ok(overlap_filter(hits, subquery));
    };

    let mut prompt = format!("Question: {question}\nSubquery: {subquery}\n\nDocuments:\n");
    for (i, h) in hits.iter().enumerate() {
        let snippet: String = h.document.text.chars().take(SNIPPET_CHARS).collect();
        prompt.push_str(&format!("[{}] {}\n{}\n", i + 1, h.document.title, snippet));
    }
    let reply = llm
        .generate(&GenerationRequest::prompt(DOC_FILTER_SYSTEM, prompt))
        .await;
    let warning = match reply {
        Ok(g) => match parse_selection(&g.text, hits.len()) {
            Some(picked) => {
                let picked: HashSet<usize> = picked.into_iter().collect();
                let kept = hits
                    .into_iter()
                    .enumerate()
                    .filter(|(i, _)| picked.contains(i))
                    .map(|(_, h)| h)
                    .collect();
                return FilterOutcome::ok(kept);
            }
            None => format!("doc filter reply not understood: {:?}", g.text),
        },
        Err(e) => format!("doc filter model failed: {e}"),
    };
    tracing::warn!("{warning}; using token-overlap fallback");
    FilterOutcome {
        kept: overlap_filter(hits, subquery),
        warning: Some(warning),
    }
}

fn overlap_filter(hits: Vec<DocHit>, subquery: &str) -> Vec<DocHit> {
    let query: HashSet<String> = surface_tokens(subquery).into_iter().collect();
    hits.into_iter()
        .filter(|h| {
            surface_tokens(&h.document.title)
                .into_iter()
                .chain(surface_tokens(&h.document.text))
                .any(|t| query.contains(&t))
        })
        .collect()
}
