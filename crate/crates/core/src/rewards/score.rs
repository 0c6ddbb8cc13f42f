use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::metrics::{cem_tokens, f1_tokens, normalize_answer};
use crate::kg::normalize_surface;
use crate::protocol::{final_answer, format_report, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Length multiple selecting F1 over CEM in the answer reward.
    pub n: u32,
    /// Scale of the gain reward.
    pub alpha: f64,
    /// Penalty decay factor, in (0, 1].
    pub gamma: f64,
    /// Lower bound of the penalty reward.
    pub beta: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            n: 3,
            alpha: 0.5,
            gamma: 0.9,
            beta: -0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid reward config: {0}")]
pub struct RewardConfigError(String);

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardConfigError> {
        if self.n < 1 {
            return Err(RewardConfigError("n must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(RewardConfigError("gamma must lie in (0, 1]".into()));
        }
        if !(self.beta <= 0.0 && self.alpha >= 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(RewardConfigError("need beta <= 0 <= alpha".into()));
        }
        Ok(())
    }
}

/// One QA instance of a gold dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    #[serde(default)]
    pub supporting_titles: Vec<String>,
    /// Annotated number of hops or sub-questions.
    pub hops: u32,
}

impl GoldRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.answers.is_empty() {
            return Err("\"answers\" must not be empty".into());
        }
        if self.hops < 1 {
            return Err("\"hops\" must be at least 1".into());
        }
        Ok(())
    }
}

/// Documents retrieved by one search step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalStep {
    pub titles: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

impl RetrievalStep {
    pub fn titles<I, S>(titles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            titles: titles.into_iter().map(Into::into).collect(),
            scores: None,
        }
    }
}

/// One entry per Search segment of a trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RetrievalLog {
    pub steps: Vec<RetrievalStep>,
}

impl RetrievalLog {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Decides whether a retrieved document counts as a gold supporting document.
pub trait RelevanceMatcher: Send + Sync {
    fn matches(&self, retrieved_title: &str, gold_title: &str) -> bool;
}

/// Normalized title equality.
#[derive(Debug, Clone, Copy, Default)]
pub struct TitleMatch;

impl RelevanceMatcher for TitleMatch {
    fn matches(&self, retrieved_title: &str, gold_title: &str) -> bool {
        normalize_surface(retrieved_title) == normalize_surface(gold_title)
    }
}

pub const DEFAULT_EMBEDDING_THRESHOLD: f64 = 0.8;

/// Similarity-based matching with a caller-supplied similarity function.
pub struct EmbeddingMatcher<F> {
    similarity: F,
    pub threshold: f64,
}

impl<F> EmbeddingMatcher<F>
where
    F: Fn(&str, &str) -> f64 + Send + Sync,
{
    pub fn new(similarity: F) -> Self {
        Self {
            similarity,
            threshold: DEFAULT_EMBEDDING_THRESHOLD,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }
}

impl<F> RelevanceMatcher for EmbeddingMatcher<F>
where
    F: Fn(&str, &str) -> f64 + Send + Sync,
{
    fn matches(&self, retrieved_title: &str, gold_title: &str) -> bool {
        (self.similarity)(retrieved_title, gold_title) >= self.threshold
    }
}

/// All reward terms of one scored trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format_ok: bool,
    pub r_ans: f64,
    pub r_acc: f64,
    pub r_recall: f64,
    pub r_penalty: f64,
    pub r_gain: f64,
    pub r_overall: f64,
    pub t: usize,
    /// Recall of each search step considered on its own.
    #[serde(default)]
    pub per_step_recall: Vec<f64>,
    #[serde(default)]
    pub format_issues: Vec<String>,
}

/// Per gold answer, F1 when the prediction has at least `n` times the gold's
/// word count and CEM otherwise; the best value over golds.
pub fn answer_reward(pred: &str, golds: &[String], n: u32) -> f64 {
    let pred_tokens = normalize_answer(pred);
    golds
        .iter()
        .map(|g| {
            let gold_tokens = normalize_answer(g);
            if pred_tokens.len() >= n as usize * gold_tokens.len() {
                f1_tokens(&pred_tokens, &gold_tokens)
            } else {
                cem_tokens(&pred_tokens, &gold_tokens)
            }
        })
        .fold(0.0, f64::max)
}

/// Zero for a malformed trajectory, otherwise at least 0.1.
pub fn accuracy_reward(format_ok: bool, r_ans: f64) -> f64 {
    if format_ok {
        r_ans.max(0.1)
    } else {
        0.0
    }
}

/// Share of gold supporting titles matched by any retrieved title of any step.
///
/// Gold titles are deduplicated after normalization. An empty gold set is
/// vacuously fully recalled.
pub fn recall_reward(log: &RetrievalLog, gold: &GoldRecord, matcher: &dyn RelevanceMatcher) -> f64 {
    let retrieved: Vec<&str> = log
        .steps
        .iter()
        .flat_map(|s| s.titles.iter().map(String::as_str))
        .collect();
    recall_of(&retrieved, gold, matcher)
}

fn distinct_gold(gold: &GoldRecord) -> Vec<&str> {
    let mut seen = HashSet::new();
    gold.supporting_titles
        .iter()
        .filter(|t| seen.insert(normalize_surface(t)))
        .map(String::as_str)
        .collect()
}

fn recall_of(retrieved: &[&str], gold: &GoldRecord, matcher: &dyn RelevanceMatcher) -> f64 {
    let golds = distinct_gold(gold);
    if golds.is_empty() {
        tracing::warn!(id = %gold.id, "no supporting titles; recall treated as 1.0");
        return 1.0;
    }
    let tp = golds
        .iter()
        .filter(|g| retrieved.iter().any(|r| matcher.matches(r, g)))
        .count();
    let fn_ = golds.len() - tp;
    tp as f64 / (tp + fn_) as f64
}

/// `max(beta, 1 - gamma^(t - i))`.
pub fn penalty_reward(t: usize, i: u32, gamma: f64, beta: f64) -> f64 {
    let exponent = t as i64 - i as i64;
    let exponent = exponent.clamp(i32::MIN as i64, i32::MAX as i64) as i32;
    beta.max(1.0 - gamma.powi(exponent))
}

pub fn gain_reward(r_recall: f64, r_penalty: f64, alpha: f64) -> f64 {
    alpha * (r_recall - r_penalty)
}

/// The outcome term is the accuracy reward.
pub fn overall_reward(r_acc: f64, r_gain: f64) -> f64 {
    r_acc + r_gain
}

pub fn score_trajectory(
    traj: &Trajectory,
    gold: &GoldRecord,
    log: &RetrievalLog,
    config: &RewardConfig,
) -> RewardBreakdown {
    score_trajectory_with(traj, gold, log, config, &TitleMatch)
}

pub fn score_trajectory_with(
    traj: &Trajectory,
    gold: &GoldRecord,
    log: &RetrievalLog,
    config: &RewardConfig,
    matcher: &dyn RelevanceMatcher,
) -> RewardBreakdown {
    let report = format_report(traj);
    let format_ok = report.is_valid();
    let r_ans = final_answer(traj)
        .map(|a| answer_reward(&a, &gold.answers, config.n))
        .unwrap_or(0.0);
    let r_acc = accuracy_reward(format_ok, r_ans);
    let r_recall = recall_reward(log, gold, matcher);
    let t = traj.retrieval_count();
    let r_penalty = penalty_reward(t, gold.hops, config.gamma, config.beta);
    let r_gain = gain_reward(r_recall, r_penalty, config.alpha);
    let per_step_recall = log
        .steps
        .iter()
        .map(|s| {
            let titles: Vec<&str> = s.titles.iter().map(String::as_str).collect();
            recall_of(&titles, gold, matcher)
        })
        .collect();
    RewardBreakdown {
        format_ok,
        r_ans,
        r_acc,
        r_recall,
        r_penalty,
        r_gain,
        r_overall: overall_reward(r_acc, r_gain),
        t,
        per_step_recall,
        format_issues: report.issues,
    }
}
