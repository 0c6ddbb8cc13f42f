use std::ops::Range;

use super::parse::serialize_trajectory;
use super::segment::{SegmentKind, Trajectory};

/// Per-unit training flags over a serialized trajectory: `true` contributes to
/// the loss, `false` marks environment-injected `<result>` spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LossMask {
    flags: Vec<bool>,
}

impl LossMask {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        Self { flags }
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// Maximal runs of masked units.
    pub fn zero_runs(&self) -> Vec<Range<usize>> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &keep) in self.flags.iter().enumerate() {
            match (keep, start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    runs.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push(s..self.flags.len());
        }
        runs
    }
}

/// Unit boundaries as byte ranges over the serialized text.
pub type UnitBoundaries<'a> = &'a dyn Fn(&str) -> Vec<Range<usize>>;

/// Builds the loss mask over bytes, or over the units returned by
/// `unit_boundaries`; a unit is masked iff it overlaps a masked byte.
pub fn compute_loss_mask(traj: &Trajectory, unit_boundaries: Option<UnitBoundaries<'_>>) -> LossMask {
    let text = serialize_trajectory(traj);
    let result_spans: Vec<Range<usize>> = traj
        .segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Result)
        .map(|s| s.span.clone())
        .collect();

    let mut bytes = vec![true; text.len()];
    for span in &result_spans {
        bytes[span.clone()].fill(false);
    }

    match unit_boundaries {
        None => LossMask::from_flags(bytes),
        Some(units) => {
            let flags = units(&text)
                .into_iter()
                .map(|u| {
                    let u = u.start.min(bytes.len())..u.end.min(bytes.len());
                    bytes[u].iter().all(|&keep| keep)
                })
                .collect();
            LossMask::from_flags(flags)
        }
    }
}
