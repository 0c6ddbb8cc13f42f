use serde::{Deserialize, Serialize};

use super::parse::parse_trajectory;
use super::segment::{ParseError, SegmentKind, Trajectory};
use super::final_answer;
use crate::rewards::RetrievalLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Think,
    Search,
    Result,
    Answer,
    /// Text outside any delimiter pair.
    Text,
}

impl From<SegmentKind> for RecordKind {
    fn from(kind: SegmentKind) -> Self {
        match kind {
            SegmentKind::Think => Self::Think,
            SegmentKind::Search => Self::Search,
            SegmentKind::Result => Self::Result,
            SegmentKind::Answer => Self::Answer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub kind: RecordKind,
    pub text: String,
}

/// One line of a trajectory dump.
///
/// `retrieval` and `termination` are optional extensions; readers that only
/// know the core fields can ignore them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub id: String,
    pub question: String,
    pub segments: Vec<SegmentRecord>,
    pub t: usize,
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalLog>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<String>,
}

impl TrajectoryRecord {
    pub fn from_trajectory(id: impl Into<String>, question: impl Into<String>, traj: &Trajectory) -> Self {
        let mut items: Vec<(usize, SegmentRecord)> = traj
            .segments
            .iter()
            .map(|s| {
                (
                    s.span.start,
                    SegmentRecord {
                        kind: s.kind.into(),
                        text: s.text.clone(),
                    },
                )
            })
            .chain(traj.stray.iter().map(|s| {
                (
                    s.offset,
                    SegmentRecord {
                        kind: RecordKind::Text,
                        text: s.text.clone(),
                    },
                )
            }))
            .collect();
        items.sort_by_key(|(offset, _)| *offset);
        Self {
            id: id.into(),
            question: question.into(),
            segments: items.into_iter().map(|(_, r)| r).collect(),
            t: traj.retrieval_count(),
            answer: final_answer(traj),
            retrieval: None,
            termination: None,
        }
    }

    /// The serialized rollout text described by `segments`.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            let kind = match seg.kind {
                RecordKind::Think => SegmentKind::Think,
                RecordKind::Search => SegmentKind::Search,
                RecordKind::Result => SegmentKind::Result,
                RecordKind::Answer => SegmentKind::Answer,
                RecordKind::Text => {
                    out.push_str(&seg.text);
                    continue;
                }
            };
            out.push_str(kind.open_tag());
            out.push_str(&seg.text);
            out.push_str(kind.close_tag());
        }
        out
    }

    pub fn trajectory(&self) -> Result<Trajectory, ParseError> {
        parse_trajectory(&self.text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::serialize_trajectory;

    #[test]
    fn record_round_trip() {
        let text = include_str!("../../tests/fixtures/crew_trajectory.txt");
        let traj = parse_trajectory(text).unwrap();
        let rec = TrajectoryRecord::from_trajectory("q1", "question", &traj);
        assert_eq!(rec.t, 3);
        assert_eq!(rec.answer.as_deref(), Some("Skeleton Crew"));
        let line = serde_json::to_string(&rec).unwrap();
        assert!(!line.contains("retrieval"));
        let back: TrajectoryRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(serialize_trajectory(&back.trajectory().unwrap()), text);
    }

    #[test]
    fn core_schema_only() {
        let line = r#"{"id":"a","question":"q","segments":[{"kind":"think","text":"x"},{"kind":"answer","text":"\\boxed{y}"}],"t":0,"answer":"y"}"#;
        let rec: TrajectoryRecord = serde_json::from_str(line).unwrap();
        assert!(rec.retrieval.is_none());
        assert_eq!(rec.trajectory().unwrap().segments.len(), 2);
    }
}
