//! The think / search / result loop driven against a language model.

mod tools;

use std::sync::Arc;
use std::time::{Duration, Instant};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::KgSearchOptions;
use crate::llm::{ChatMessage, GenerationRequest, LanguageModel};
use crate::protocol::{parse_search_request, parse_trajectory, SegmentKind, Trajectory};
use crate::rewards::{RetrievalLog, RetrievalStep};

pub use tools::{execute_search, kg_filter, KgTool, SearchEnv, SearchOutcome, NO_RESULTS};

/// Versioned system prompt sent at the start of every rollout.
pub const SYSTEM_PROMPT: &str = include_str!("../../resources/system_prompt_v1.txt");
pub const SYSTEM_PROMPT_VERSION: &str = "v1";

/// User turn appended once the search budget is spent.
pub const FORCED_ANSWER_PROMPT: &str = "You have used all available searches. Do not search again. \
Using the information gathered so far, write your final reasoning in <think> </think> and give the final \
answer now in <answer> </answer>, with the exact answer enclosed in \\boxed{}.";

pub const SEARCH_STOP: &str = "</search>";
pub const ANSWER_STOP: &str = "</answer>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub max_search_calls: usize,
    /// Generation-unit budget for the whole rollout; injected results do not count.
    pub max_response_units: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub doc_top_k: usize,
    pub kg_filter_limit: usize,
    pub stop_sequences: Vec<String>,
    pub seed: Option<u64>,
    pub kg: KgSearchOptions,
    pub filter_docs: bool,
    pub filter_kg: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_search_calls: 8,
            max_response_units: 8192,
            temperature: 1.0,
            top_p: 0.95,
            doc_top_k: 5,
            kg_filter_limit: 5,
            stop_sequences: vec![SEARCH_STOP.into(), ANSWER_STOP.into()],
            seed: None,
            kg: KgSearchOptions::default(),
            filter_docs: false,
            filter_kg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid agent config: {0}")]
pub struct AgentConfigError(String);

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentConfigError> {
        let fail = |m: &str| Err(AgentConfigError(m.into()));
        if self.max_search_calls < 1 {
            return fail("max_search_calls must be at least 1");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return fail("top_p must lie in (0, 1]");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return fail("temperature must be a non-negative number");
        }
        if self.max_response_units == 0 || self.doc_top_k == 0 || self.kg_filter_limit == 0 {
            return fail("max_response_units, doc_top_k and kg_filter_limit must be positive");
        }
        for stop in [SEARCH_STOP, ANSWER_STOP] {
            if !self.stop_sequences.iter().any(|s| s == stop) {
                return fail(&format!("stop_sequences must contain {stop}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Answered,
    BudgetExhausted,
    ProtocolError,
    LlmError,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Answered => "answered",
            Self::BudgetExhausted => "budget_exhausted",
            Self::ProtocolError => "protocol_error",
            Self::LlmError => "llm_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    /// Position within a group; 0 for a single rollout.
    pub index: usize,
    pub trajectory: Trajectory,
    /// Serialized trajectory the model saw, byte for byte.
    pub text: String,
    pub retrieval_log: RetrievalLog,
    pub termination: Termination,
    pub units: usize,
    pub wall_time: Duration,
    pub diagnostics: Vec<String>,
}

struct Rollout<'a> {
    question: &'a str,
    config: &'a AgentConfig,
    seed: Option<u64>,
    text: String,
    log: RetrievalLog,
    units: usize,
    diagnostics: Vec<String>,
}

enum Step {
    Continue,
    Done(Termination),
}

impl<'a> Rollout<'a> {
    fn request(&self, forced: bool) -> GenerationRequest {
        let mut messages = vec![ChatMessage::system(SYSTEM_PROMPT), ChatMessage::user(self.question)];
        if !self.text.is_empty() {
            messages.push(ChatMessage::assistant(self.text.clone()));
        }
        if forced {
            messages.push(ChatMessage::user(FORCED_ANSWER_PROMPT));
        }
        GenerationRequest {
            messages,
            stop: self.config.stop_sequences.clone(),
            temperature: self.config.temperature,
            top_p: self.config.top_p,
            max_tokens: self.config.max_response_units.saturating_sub(self.units),
            seed: self.seed,
        }
    }

    fn note(&mut self, msg: String) {
        tracing::debug!("{msg}");
        self.diagnostics.push(msg);
    }

    fn inject_result(&mut self, body: &str) {
        self.text.push('\n');
        self.text.push_str(SegmentKind::Result.open_tag());
        self.text.push('\n');
        self.text.push_str(body);
        self.text.push('\n');
        self.text.push_str(SegmentKind::Result.close_tag());
        self.text.push('\n');
    }

    /// Applies one generated chunk. The chunk is kept only if the extended
    /// text still parses and contains no model-written result span.
    async fn apply(
        &mut self,
        chunk: &str,
        stop: Option<&str>,
        forced: bool,
        malformed: &mut u32,
        env: &SearchEnv,
    ) -> Step {
        let mut candidate = self.text.clone();
        candidate.push_str(chunk);
        if let Some(stop) = stop {
            candidate.push_str(stop);
        }
        let traj = match parse_trajectory(&candidate) {
            Ok(t) => t,
            Err(e) => {
                self.note(format!("discarded chunk that breaks the protocol: {e}"));
                return Step::Done(self.exhausted_or(Termination::ProtocolError, stop));
            }
        };
        let before = self.log.len();
        if traj.count(SegmentKind::Result) != before {
            self.note("discarded chunk containing a model-written result span".into());
            return Step::Done(Termination::ProtocolError);
        }
        let last = traj.segments.last().map(|s| s.kind);

        match last {
            Some(SegmentKind::Answer) => {
                self.text = candidate;
                Step::Done(Termination::Answered)
            }
            Some(SegmentKind::Search) if stop == Some(SEARCH_STOP) && traj.retrieval_count() > before => {
                if forced {
                    self.note("model searched on the forced-answer turn; chunk discarded".into());
                    return Step::Done(Termination::BudgetExhausted);
                }
                self.text = candidate;
                let payload = traj.segments.last().map(|s| s.text.clone()).unwrap_or_default();
                match parse_search_request(&payload) {
                    Ok(parsed) => {
                        for w in parsed.warnings {
                            self.note(w);
                        }
                        let out = execute_search(&parsed.request, self.question, env, self.config).await;
                        for w in &out.warnings {
                            self.note(w.clone());
                        }
                        if let Some(e) = &out.doc_error {
                            self.note(format!("document search failed: {e}"));
                        }
                        if let Some(e) = &out.kg_error {
                            self.note(format!("knowledge graph search failed: {e}"));
                        }
                        self.inject_result(&out.text);
                        self.log.steps.push(out.step);
                        Step::Continue
                    }
                    Err(e) => {
                        *malformed += 1;
                        self.note(format!("malformed search payload: {e}"));
                        self.inject_result(&format!(
                            "[invalid search request: {e}. Use JSON like {{\"query\": \"...\", \"entity\": [\"...\"], \"relation\": [\"...\"]}}]"
                        ));
                        self.log.steps.push(RetrievalStep::default());
                        if *malformed >= 2 {
                            Step::Done(Termination::ProtocolError)
                        } else {
                            Step::Continue
                        }
                    }
                }
            }
            _ => {
                // No stop fired, or the stop closed nothing new: keep the text
                // (it parses) and end the rollout.
                self.text = candidate;
                self.note(format!("generation ended without a final answer (stop: {stop:?})"));
                Step::Done(self.exhausted_or(Termination::ProtocolError, stop))
            }
        }
    }

    fn exhausted_or(&self, other: Termination, stop: Option<&str>) -> Termination {
        if stop.is_none() && self.units >= self.config.max_response_units {
            Termination::BudgetExhausted
        } else {
            other
        }
    }
}

/// Runs one rollout for `question`. Never fails: every problem is reported
/// through `termination` and `diagnostics`, and the returned trajectory
/// always parses.
pub async fn run_rollout(
    question: &str,
    llm: &dyn LanguageModel,
    env: &SearchEnv,
    config: &AgentConfig,
) -> RolloutResult {
    run_indexed(0, question, llm, env, config).await
}

async fn run_indexed(
    index: usize,
    question: &str,
    llm: &dyn LanguageModel,
    env: &SearchEnv,
    config: &AgentConfig,
) -> RolloutResult {
    let started = Instant::now();
    let mut r = Rollout {
        question,
        config,
        seed: config.seed.map(|s| s.wrapping_add(index as u64)),
        text: String::new(),
        log: RetrievalLog::default(),
        units: 0,
        diagnostics: Vec::new(),
    };
    let mut malformed = 0u32;

    let termination = loop {
        let forced = r.log.len() >= config.max_search_calls;
        if r.units >= config.max_response_units {
            r.note("generation budget exhausted".into());
            break Termination::BudgetExhausted;
        }
        let generation = match llm.generate(&r.request(forced)).await {
            Ok(g) => g,
            Err(e) => {
                r.note(format!("language model failed: {e}"));
                break Termination::LlmError;
            }
        };
        r.units += generation.units;
        let stop = generation.stop.as_deref();
        if let Step::Done(t) = r.apply(&generation.text, stop, forced, &mut malformed, env).await {
            break t;
        }
    };

    let trajectory = parse_trajectory(&r.text).expect("rollout text is kept parseable");
    debug_assert_eq!(trajectory.retrieval_count(), r.log.len());
    RolloutResult {
        index,
        trajectory,
        text: r.text,
        retrieval_log: r.log,
        termination,
        units: r.units,
        wall_time: started.elapsed(),
        diagnostics: r.diagnostics,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("group size must be at least 1")]
    EmptyGroup,
}

/// Runs `g` independent rollouts, at most `parallelism` in flight. Rollout `k`
/// uses the model built by `llm_for(k)` and seed `config.seed + k`. Results
/// come back in completion order, each tagged with its index.
pub async fn run_group<F>(
    question: &str,
    g: usize,
    llm_for: F,
    env: &SearchEnv,
    config: &AgentConfig,
    parallelism: usize,
) -> Result<Vec<RolloutResult>, GroupError>
where
    F: Fn(usize) -> Arc<dyn LanguageModel>,
{
    if g == 0 {
        return Err(GroupError::EmptyGroup);
    }
    let runs = (0..g).map(|k| {
        let llm = llm_for(k);
        async move { run_indexed(k, question, llm.as_ref(), env, config).await }
    });
    Ok(stream::iter(runs)
        .buffer_unordered(parallelism.max(1))
        .collect()
        .await)
}
