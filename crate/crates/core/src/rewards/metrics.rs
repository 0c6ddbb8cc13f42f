//! Word-level QA metrics over normalized answers.

use std::collections::HashMap;

/// Lower-cases, deletes punctuation, drops the articles `a`, `an`, `the` and
/// splits on whitespace.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(str::to_owned)
        .collect()
}

/// Token-multiset F1. Both sides empty scores 1; exactly one empty scores 0.
pub fn f1_score(pred: &str, gold: &str) -> f64 {
    f1_tokens(&normalize_answer(pred), &normalize_answer(gold))
}

pub(crate) fn f1_tokens(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in gold {
        *counts.entry(g).or_default() += 1;
    }
    let mut common = 0usize;
    for p in pred {
        if let Some(c) = counts.get_mut(p.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Cover exact match: 1 iff the normalized gold tokens occur contiguously in
/// the normalized prediction.
pub fn cem(pred: &str, gold: &str) -> f64 {
    cem_tokens(&normalize_answer(pred), &normalize_answer(gold))
}

pub(crate) fn cem_tokens(pred: &[String], gold: &[String]) -> f64 {
    let covered = if gold.is_empty() {
        true
    } else {
        pred.windows(gold.len()).any(|w| w == gold)
    };
    if covered {
        1.0
    } else {
        0.0
    }
}

/// Exact match of normalized token sequences.
pub fn em(pred: &str, gold: &str) -> f64 {
    if normalize_answer(pred) == normalize_answer(gold) {
        1.0
    } else {
        0.0
    }
}

/// Best F1, CEM and EM of a prediction across acceptable gold answers.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricScores {
    pub f1: f64,
    pub cem: f64,
    pub em: f64,
}

pub fn best_metrics(pred: &str, golds: &[String]) -> MetricScores {
    golds.iter().fold(MetricScores::default(), |acc, g| MetricScores {
        f1: acc.f1.max(f1_score(pred, g)),
        cem: acc.cem.max(cem(pred, g)),
        em: acc.em.max(em(pred, g)),
    })
}
