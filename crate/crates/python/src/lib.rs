//! Python bindings: knowledge-graph search, BM25 retrieval, the rollout
//! protocol, QA metrics and the reward stack.

use std::collections::HashMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kgrag_core::docs::{Document, LexicalIndex};
use kgrag_core::kg::{self, AliasTable, KgQuery, KgSearchOptions, LoadOptions, MissingIdPolicy, Triple, WhitespaceTokens};
use kgrag_core::protocol::{self, SegmentKind, Trajectory};
use kgrag_core::rewards::{self, GoldRecord, RetrievalLog, RetrievalStep};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse(text: &str) -> PyResult<Trajectory> {
    protocol::parse_trajectory(text).map_err(value_err)
}

fn policy(retain_missing: bool) -> LoadOptions {
    LoadOptions {
        missing_ids: if retain_missing {
            MissingIdPolicy::Retain
        } else {
            MissingIdPolicy::Reject
        },
    }
}

fn alias_table(map: HashMap<String, Vec<String>>) -> AliasTable {
    let mut ids: Vec<_> = map.into_iter().collect();
    ids.sort();
    let mut table = AliasTable::default();
    for (id, aliases) in ids {
        table.insert(id, aliases);
    }
    table
}

/// (head, relation, tail, rendered, score)
type TripleRow = (String, String, String, String, u32);

#[pyclass(name = "KnowledgeStore", frozen)]
struct PyKnowledgeStore {
    inner: kg::KnowledgeStore,
}

#[pymethods]
impl PyKnowledgeStore {
    /// Loads tab-separated triple and alias files.
    #[staticmethod]
    #[pyo3(signature = (triples, entity_aliases, relation_aliases, retain_missing = false))]
    fn load(triples: Vec<String>, entity_aliases: &str, relation_aliases: &str, retain_missing: bool) -> PyResult<Self> {
        let inner = kg::KnowledgeStore::load(&triples, entity_aliases, relation_aliases, policy(retain_missing))
            .map_err(|e| match e {
                kg::KgError::Io { .. } => PyIOError::new_err(e.to_string()),
                other => value_err(other),
            })?;
        Ok(Self { inner })
    }

    /// Builds a store from `{id: [aliases]}` maps and `(head, relation, tail)` tuples.
    #[staticmethod]
    #[pyo3(signature = (entities, relations, triples, retain_missing = false))]
    fn from_triples(
        entities: HashMap<String, Vec<String>>,
        relations: HashMap<String, Vec<String>>,
        triples: Vec<(String, String, String)>,
        retain_missing: bool,
    ) -> PyResult<Self> {
        let triples = triples.iter().map(|(h, r, t)| Triple::new(h, r, t));
        let inner = kg::KnowledgeStore::from_parts(alias_table(entities), alias_table(relations), triples, policy(retain_missing))
            .map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn triple_count(&self) -> usize {
        self.inner.triple_count()
    }

    #[getter]
    fn entity_count(&self) -> usize {
        self.inner.entity_count()
    }

    fn __len__(&self) -> usize {
        self.inner.triple_count()
    }

    /// Entity ids matching a surface form, best tier first.
    fn match_entities(&self, name: &str) -> Vec<String> {
        self.inner.match_entities(name).into_iter().map(|e| e.0).collect()
    }

    #[pyo3(signature = (entities, relations = Vec::new(), max_triples = 100, max_tokens = 1024))]
    fn search(&self, entities: Vec<String>, relations: Vec<String>, max_triples: usize, max_tokens: usize) -> Vec<TripleRow> {
        let options = KgSearchOptions {
            max_triples,
            max_tokens,
            ..KgSearchOptions::default()
        };
        self.inner
            .kg_search_with(&KgQuery::new(entities, relations), &options, &WhitespaceTokens)
            .into_iter()
            .map(|s| (s.triple.head.0, s.triple.relation.0, s.triple.tail.0, s.rendered, s.score))
            .collect()
    }
}

#[pyclass(name = "LexicalIndex", frozen)]
struct PyLexicalIndex {
    inner: LexicalIndex,
}

#[pymethods]
impl PyLexicalIndex {
    /// `documents` is a list of `(id, title, text)`.
    #[new]
    fn new(documents: Vec<(String, String, String)>) -> PyResult<Self> {
        let docs = documents.into_iter().map(|(doc_id, title, text)| Document { doc_id, title, text });
        Ok(Self {
            inner: LexicalIndex::build(docs).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Top `k` hits as `(id, title, score)`.
    #[pyo3(signature = (query, k = 5))]
    fn query(&self, query: &str, k: usize) -> Vec<(String, String, f64)> {
        self.inner
            .query(query, k)
            .into_iter()
            .map(|h| (h.document.doc_id, h.document.title, h.score))
            .collect()
    }
}

#[pyclass(name = "RewardConfig", eq, get_all, set_all, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyRewardConfig {
    n: u32,
    alpha: f64,
    gamma: f64,
    beta: f64,
}

impl From<&PyRewardConfig> for rewards::RewardConfig {
    fn from(c: &PyRewardConfig) -> Self {
        Self {
            n: c.n,
            alpha: c.alpha,
            gamma: c.gamma,
            beta: c.beta,
        }
    }
}

#[pymethods]
impl PyRewardConfig {
    #[new]
    #[pyo3(signature = (n = 3, alpha = 0.5, gamma = 0.9, beta = -0.2))]
    fn new(n: u32, alpha: f64, gamma: f64, beta: f64) -> PyResult<Self> {
        let c = Self { n, alpha, gamma, beta };
        rewards::RewardConfig::from(&c).validate().map_err(value_err)?;
        Ok(c)
    }

    fn __repr__(&self) -> String {
        format!("RewardConfig(n={}, alpha={}, gamma={}, beta={})", self.n, self.alpha, self.gamma, self.beta)
    }
}

/// `(kind, text, start, end)` per segment; the span covers the delimiters.
#[pyfunction]
fn parse_trajectory(text: &str) -> PyResult<Vec<(String, String, usize, usize)>> {
    Ok(parse(text)?
        .segments
        .into_iter()
        .map(|s| (s.kind.name().to_owned(), s.text, s.span.start, s.span.end))
        .collect())
}

#[pyfunction]
fn serialize_segments(segments: Vec<(String, String)>) -> PyResult<String> {
    let mut out = String::new();
    for (kind, text) in segments {
        let kind = SegmentKind::ALL
            .into_iter()
            .find(|k| k.name() == kind)
            .ok_or_else(|| value_err(format!("unknown segment kind {kind:?}")))?;
        out.push_str(kind.open_tag());
        out.push_str(&text);
        out.push_str(kind.close_tag());
    }
    Ok(out)
}

#[pyfunction]
fn validate_format(text: &str) -> PyResult<bool> {
    Ok(protocol::validate_format(&parse(text)?))
}

#[pyfunction]
fn format_issues(text: &str) -> PyResult<Vec<String>> {
    Ok(protocol::format_report(&parse(text)?).issues)
}

/// Per-byte flags, `False` inside `<result>` spans.
#[pyfunction]
fn loss_mask(text: &str) -> PyResult<Vec<bool>> {
    Ok(protocol::compute_loss_mask(&parse(text)?, None).flags().to_vec())
}

#[pyfunction]
fn masked_spans(text: &str) -> PyResult<Vec<(usize, usize)>> {
    Ok(protocol::compute_loss_mask(&parse(text)?, None)
        .zero_runs()
        .into_iter()
        .map(|r| (r.start, r.end))
        .collect())
}

#[pyfunction]
fn extract_boxed_answer(text: &str) -> Option<String> {
    protocol::extract_boxed_answer(text).ok()
}

#[pyfunction]
fn final_answer(text: &str) -> PyResult<Option<String>> {
    Ok(protocol::final_answer(&parse(text)?))
}

#[pyfunction]
fn parse_search_request<'py>(py: Python<'py>, payload: &str) -> PyResult<Bound<'py, PyDict>> {
    let parsed = protocol::parse_search_request(payload).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("query", parsed.request.query)?;
    d.set_item("entity", parsed.request.entity)?;
    d.set_item("relation", parsed.request.relation)?;
    Ok(d)
}

#[pyfunction]
fn normalize_answer(text: &str) -> Vec<String> {
    rewards::normalize_answer(text)
}

#[pyfunction]
fn f1_score(pred: &str, gold: &str) -> f64 {
    rewards::f1_score(pred, gold)
}

#[pyfunction]
fn cem(pred: &str, gold: &str) -> f64 {
    rewards::cem(pred, gold)
}

#[pyfunction]
fn em(pred: &str, gold: &str) -> f64 {
    rewards::em(pred, gold)
}

/// Best `(f1, cem, em)` over the gold answers.
#[pyfunction]
fn best_metrics(pred: &str, golds: Vec<String>) -> (f64, f64, f64) {
    let m = rewards::best_metrics(pred, &golds);
    (m.f1, m.cem, m.em)
}

#[pyfunction]
#[pyo3(signature = (pred, golds, n = 3))]
fn answer_reward(pred: &str, golds: Vec<String>, n: u32) -> f64 {
    rewards::answer_reward(pred, &golds, n)
}

#[pyfunction]
fn accuracy_reward(format_ok: bool, r_ans: f64) -> f64 {
    rewards::accuracy_reward(format_ok, r_ans)
}

#[pyfunction]
#[pyo3(signature = (t, i, gamma = 0.9, beta = -0.2))]
fn penalty_reward(t: usize, i: u32, gamma: f64, beta: f64) -> f64 {
    rewards::penalty_reward(t, i, gamma, beta)
}

#[pyfunction]
#[pyo3(signature = (r_recall, r_penalty, alpha = 0.5))]
fn gain_reward(r_recall: f64, r_penalty: f64, alpha: f64) -> f64 {
    rewards::gain_reward(r_recall, r_penalty, alpha)
}

/// Scores a serialized trajectory. `retrieved` holds the titles returned by
/// each search step.
#[pyfunction]
#[pyo3(signature = (text, answers, hops, supporting_titles = Vec::new(), retrieved = Vec::new(), config = None))]
fn score_trajectory<'py>(
    py: Python<'py>,
    text: &str,
    answers: Vec<String>,
    hops: u32,
    supporting_titles: Vec<String>,
    retrieved: Vec<Vec<String>>,
    config: Option<PyRef<'py, PyRewardConfig>>,
) -> PyResult<Bound<'py, PyDict>> {
    let traj = parse(text)?;
    let gold = GoldRecord {
        id: String::new(),
        question: String::new(),
        answers,
        supporting_titles,
        hops,
    };
    gold.validate().map_err(value_err)?;
    let config = config.map(|c| rewards::RewardConfig::from(&*c)).unwrap_or_default();
    config.validate().map_err(value_err)?;
    let log = RetrievalLog {
        steps: retrieved.into_iter().map(RetrievalStep::titles).collect(),
    };
    let b = rewards::score_trajectory(&traj, &gold, &log, &config);
    let d = PyDict::new(py);
    d.set_item("format_ok", b.format_ok)?;
    d.set_item("r_ans", b.r_ans)?;
    d.set_item("r_acc", b.r_acc)?;
    d.set_item("r_recall", b.r_recall)?;
    d.set_item("r_penalty", b.r_penalty)?;
    d.set_item("r_gain", b.r_gain)?;
    d.set_item("r_overall", b.r_overall)?;
    d.set_item("t", b.t)?;
    d.set_item("per_step_recall", b.per_step_recall)?;
    d.set_item("format_issues", b.format_issues)?;
    Ok(d)
}

#[pymodule]
fn kgrag(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKnowledgeStore>()?;
    m.add_class::<PyLexicalIndex>()?;
    m.add_class::<PyRewardConfig>()?;
    m.add("SYSTEM_PROMPT", kgrag_core::orchestrator::SYSTEM_PROMPT)?;
    m.add_function(wrap_pyfunction!(parse_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(serialize_segments, m)?)?;
    m.add_function(wrap_pyfunction!(validate_format, m)?)?;
    m.add_function(wrap_pyfunction!(format_issues, m)?)?;
    m.add_function(wrap_pyfunction!(loss_mask, m)?)?;
    m.add_function(wrap_pyfunction!(masked_spans, m)?)?;
    m.add_function(wrap_pyfunction!(extract_boxed_answer, m)?)?;
    m.add_function(wrap_pyfunction!(final_answer, m)?)?;
    m.add_function(wrap_pyfunction!(parse_search_request, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_answer, m)?)?;
    m.add_function(wrap_pyfunction!(f1_score, m)?)?;
    m.add_function(wrap_pyfunction!(cem, m)?)?;
    m.add_function(wrap_pyfunction!(em, m)?)?;
    m.add_function(wrap_pyfunction!(best_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(answer_reward, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy_reward, m)?)?;
    m.add_function(wrap_pyfunction!(penalty_reward, m)?)?;
    m.add_function(wrap_pyfunction!(gain_reward, m)?)?;
    m.add_function(wrap_pyfunction!(score_trajectory, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alias_tables_are_sorted_by_id() {
        let mut m = HashMap::new();
        m.insert("Q2".to_string(), vec!["b".to_string()]);
        m.insert("Q1".to_string(), vec!["a".to_string(), "".to_string()]);
        let t = alias_table(m);
        assert_eq!(t.len(), 2);
        let ids: Vec<_> = t.iter().map(|(id, _)| id.to_string()).collect();
        assert_eq!(ids, ["Q1", "Q2"]);
    }

    #[test]
    fn config_conversion() {
        let c = PyRewardConfig {
            n: 2,
            alpha: 0.25,
            gamma: 0.5,
            beta: -0.1,
        };
        let r = rewards::RewardConfig::from(&c);
        assert_eq!((r.n, r.alpha, r.gamma, r.beta), (2, 0.25, 0.5, -0.1));
    }
}
