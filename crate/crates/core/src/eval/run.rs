use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use super::report::{EvalReport, ReportError, ReportRow, RunInfo};
use super::{load_dataset, EvalError, RunManifest};
use crate::orchestrator::{run_rollout, SYSTEM_PROMPT_VERSION};
use crate::protocol::{compute_loss_mask, final_answer, Trajectory, TrajectoryRecord};
use crate::rewards::{best_metrics, score_trajectory, GoldRecord, MetricScores, RetrievalLog, RewardBreakdown, RewardConfig};

pub const OUTPUT_FILES: [&str; 4] = ["report.json", "trajectories.jsonl", "scores.jsonl", "run_meta.json"];

/// Masked byte ranges of the serialized trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSummary {
    pub len: usize,
    pub masked: Vec<[usize; 2]>,
}

/// One line of `scores.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub answer: Option<String>,
    pub metrics: MetricScores,
    pub rewards: RewardBreakdown,
    pub mask: MaskSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub report: EvalReport,
    pub trajectories: Vec<TrajectoryRecord>,
    pub scores: Vec<ScoreRecord>,
}

/// Scores one trajectory against its gold record. Shared by live and offline
/// scoring so both produce the same rows.
pub fn score_row(
    gold: &GoldRecord,
    traj: &Trajectory,
    log: &RetrievalLog,
    termination: &str,
    config: &RewardConfig,
) -> (ReportRow, ScoreRecord) {
    let rewards = score_trajectory(traj, gold, log, config);
    let answer = final_answer(traj);
    let metrics = answer
        .as_deref()
        .map(|a| best_metrics(a, &gold.answers))
        .unwrap_or_default();
    let mask = compute_loss_mask(traj, None);
    let row = ReportRow {
        id: gold.id.clone(),
        answer: answer.clone(),
        f1: metrics.f1,
        cem: metrics.cem,
        em: metrics.em,
        r_overall: rewards.r_overall,
        t: rewards.t,
        termination: termination.to_owned(),
    };
    let score = ScoreRecord {
        id: gold.id.clone(),
        answer,
        metrics,
        rewards,
        mask: MaskSummary {
            len: mask.len(),
            masked: mask.zero_runs().into_iter().map(|r| [r.start, r.end]).collect(),
        },
    };
    (row, score)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Runs every dataset question through the agent, scores it and writes the
/// output files into the manifest's output directory.
pub async fn evaluate(manifest: &RunManifest) -> Result<EvalRun, EvalError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let dataset = load_dataset(&manifest.dataset)?;
    let env = manifest.build_env()?;
    let models = manifest.policy_models()?;
    let agent = manifest.agent_config();

    let jobs = dataset.records.iter().enumerate().map(|(i, gold)| {
        let llm = models.for_question(&gold.id);
        let (env, agent) = (&env, &agent);
        async move {
            let rollout = run_rollout(&gold.question, llm.as_ref(), env, agent).await;
            (i, gold, rollout)
        }
    });
    let mut done: Vec<_> = stream::iter(jobs)
        .buffer_unordered(manifest.parallelism.max(1))
        .collect()
        .await;
    done.sort_by_key(|(i, _, _)| *i);

    let mut rows = Vec::new();
    let mut scores = Vec::new();
    let mut trajectories = Vec::new();
    let mut timings = Vec::new();
    for (_, gold, rollout) in done {
        let termination = rollout.termination.as_str();
        let (row, score) = score_row(gold, &rollout.trajectory, &rollout.retrieval_log, termination, &manifest.reward);
        let mut rec = TrajectoryRecord::from_trajectory(&gold.id, &gold.question, &rollout.trajectory);
        rec.retrieval = Some(rollout.retrieval_log.clone());
        rec.termination = Some(termination.to_owned());
        rows.push(row);
        scores.push(score);
        trajectories.push(rec);
        timings.push(serde_json::json!({
            "id": gold.id,
            "wall_time_secs": rollout.wall_time.as_secs_f64(),
            "units": rollout.units,
            "diagnostics": rollout.diagnostics,
        }));
    }

    let errors = dataset
        .errors
        .iter()
        .map(|e| ReportError {
            id: None,
            line: Some(e.line),
            message: e.message.clone(),
        })
        .collect();
    let meta = RunInfo {
        mode: "evaluate".into(),
        provider: Some(manifest.provider.kind),
        llm: Some(models.kind().into()),
        kg: Some(
            match (&manifest.kg, &manifest.kg_endpoint) {
                (Some(_), _) => "local",
                (None, Some(_)) => "remote",
                (None, None) => "none",
            }
            .into(),
        ),
        agent: Some(agent.clone()),
        reward: manifest.reward,
        seed: Some(manifest.seed),
        system_prompt: Some(SYSTEM_PROMPT_VERSION.into()),
    };
    let run = EvalRun {
        report: EvalReport::new(dataset_name(&manifest.dataset), rows, errors, Some(meta)),
        trajectories,
        scores,
    };
    let run_meta = serde_json::json!({
        "started_unix_secs": unix_secs(started),
        "finished_unix_secs": unix_secs(SystemTime::now()),
        "wall_time_secs": clock.elapsed().as_secs_f64(),
        "rollouts": timings,
    });
    write_outputs(&manifest.output_dir, &run, Some(&run_meta))?;
    Ok(run)
}

fn unix_secs(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Writes the report, dumps and optional run metadata into `dir`.
pub fn write_outputs(dir: &Path, run: &EvalRun, run_meta: Option<&serde_json::Value>) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
    let write = |name: &str, body: &str| {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| EvalError::io(&path, e))
    };
    write("report.json", &run.report.to_json())?;
    if !run.trajectories.is_empty() {
        write("trajectories.jsonl", &jsonl(&run.trajectories))?;
    }
    write("scores.jsonl", &jsonl(&run.scores))?;
    if let Some(meta) = run_meta {
        let mut body = serde_json::to_string_pretty(meta).expect("json value");
        body.push('\n');
        write("run_meta.json", &body)?;
    }
    Ok(())
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.write_all(b"\n").expect("in-memory write");
    }
    String::from_utf8(out).expect("json is utf-8")
}

/// Scores a trajectory dump against gold data without any model calls.
/// Records with unknown ids or unreadable lines become error entries.
pub fn score_offline(trajectories: &Path, gold: &Path, config: &RewardConfig) -> Result<EvalRun, EvalError> {
    config.validate().map_err(|e| EvalError::Manifest(e.to_string()))?;
    let io = |e| EvalError::io(trajectories, e);
    let reader = BufReader::new(File::open(trajectories).map_err(io)?);
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if !line.trim().is_empty() {
            lines.push((i + 1, line));
        }
    }
    if lines.is_empty() {
        return Err(EvalError::NoWork(trajectories.to_owned()));
    }

    let dataset = load_dataset(gold)?;
    let by_id: HashMap<&str, &GoldRecord> = dataset.records.iter().map(|g| (g.id.as_str(), g)).collect();
    let mut rows = Vec::new();
    let mut scores = Vec::new();
    let mut errors = Vec::new();
    for (line_no, line) in lines {
        let rec: TrajectoryRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                errors.push(ReportError {
                    id: None,
                    line: Some(line_no),
                    message: format!("unreadable trajectory record: {e}"),
                });
                continue;
            }
        };
        let Some(gold) = by_id.get(rec.id.as_str()) else {
            errors.push(ReportError {
                id: Some(rec.id.clone()),
                line: Some(line_no),
                message: "id not present in gold data".into(),
            });
            continue;
        };
        let traj = match rec.trajectory() {
            Ok(t) => t,
            Err(e) => {
                errors.push(ReportError {
                    id: Some(rec.id.clone()),
                    line: Some(line_no),
                    message: format!("trajectory does not parse: {e}"),
                });
                continue;
            }
        };
        let log = rec.retrieval.clone().unwrap_or_default();
        if log.len() != traj.retrieval_count() {
            tracing::warn!(
                "{}: retrieval log has {} steps for {} searches",
                rec.id,
                log.len(),
                traj.retrieval_count()
            );
        }
        let termination = rec.termination.as_deref().unwrap_or("unknown");
        let (row, score) = score_row(gold, &traj, &log, termination, config);
        rows.push(row);
        scores.push(score);
    }
    let meta = RunInfo {
        mode: "score".into(),
        provider: None,
        llm: None,
        kg: None,
        agent: None,
        reward: *config,
        seed: None,
        system_prompt: None,
    };
    Ok(EvalRun {
        report: EvalReport::new(dataset_name(gold), rows, errors, Some(meta)),
        trajectories: Vec::new(),
        scores,
    })
}
