//! Token-delimited rollout format: `<think>`, `<search>`, `<result>` and
//! `<answer>` segments, search payloads, boxed answers and loss masks.

mod boxed;
mod mask;
mod parse;
mod persist;
mod request;
mod segment;
mod validate;

pub use boxed::{extract_boxed_answer, NoBoxedAnswer};
pub use mask::{compute_loss_mask, LossMask, UnitBoundaries};
pub use parse::{parse_trajectory, serialize_trajectory};
pub use persist::{RecordKind, SegmentRecord, TrajectoryRecord};
pub use request::{parse_search_request, ParsedRequest, RequestError, SearchRequest};
pub use segment::{ParseError, ParseErrorKind, Segment, SegmentKind, StrayText, Trajectory};
pub use validate::{format_report, validate_format, FormatReport};

/// Text scored as the final answer: the last boxed group, or the whole Answer
/// segment (trimmed) when it has none. `None` without an Answer segment.
pub fn final_answer(traj: &Trajectory) -> Option<String> {
    let ans = traj.answer()?;
    Some(extract_boxed_answer(&ans.text).unwrap_or_else(|_| ans.text.trim().to_owned()))
}
