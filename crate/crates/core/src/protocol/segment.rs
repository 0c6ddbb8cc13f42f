use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Think,
    Search,
    Result,
    Answer,
}

impl SegmentKind {
    pub const ALL: [SegmentKind; 4] = [Self::Think, Self::Search, Self::Result, Self::Answer];

    pub fn name(self) -> &'static str {
        match self {
            Self::Think => "think",
            Self::Search => "search",
            Self::Result => "result",
            Self::Answer => "answer",
        }
    }

    pub fn open_tag(self) -> &'static str {
        match self {
            Self::Think => "<think>",
            Self::Search => "<search>",
            Self::Result => "<result>",
            Self::Answer => "<answer>",
        }
    }

    pub fn close_tag(self) -> &'static str {
        match self {
            Self::Think => "</think>",
            Self::Search => "</search>",
            Self::Result => "</result>",
            Self::Answer => "</answer>",
        }
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One delimited element of a trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Text between the delimiters, verbatim.
    pub text: String,
    /// Byte range of the whole element, delimiters included.
    pub span: Range<usize>,
}

impl Segment {
    /// Byte range of the text between the delimiters.
    pub fn content_span(&self) -> Range<usize> {
        let start = self.span.start + self.kind.open_tag().len();
        start..start + self.text.len()
    }
}

/// Text found outside any delimiter pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrayText {
    pub offset: usize,
    pub text: String,
}

impl StrayText {
    pub fn is_whitespace(&self) -> bool {
        self.text.chars().all(char::is_whitespace)
    }
}

/// A parsed rollout. Segments are ordered, non-overlapping, and an Answer, if
/// present, is the final segment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    pub stray: Vec<StrayText>,
}

impl Trajectory {
    /// Builds a trajectory from segment kinds and contents, laid out back to
    /// back with no text between them.
    pub fn from_parts<I, S>(parts: I) -> Self
    where
        I: IntoIterator<Item = (SegmentKind, S)>,
        S: Into<String>,
    {
        let mut offset = 0;
        let segments = parts
            .into_iter()
            .map(|(kind, text)| {
                let text = text.into();
                let len = kind.open_tag().len() + text.len() + kind.close_tag().len();
                let seg = Segment {
                    kind,
                    text,
                    span: offset..offset + len,
                };
                offset += len;
                seg
            })
            .collect();
        Self {
            segments,
            stray: Vec::new(),
        }
    }

    /// Number of Search segments.
    pub fn retrieval_count(&self) -> usize {
        self.count(SegmentKind::Search)
    }

    pub fn count(&self, kind: SegmentKind) -> usize {
        self.segments.iter().filter(|s| s.kind == kind).count()
    }

    pub fn answer(&self) -> Option<&Segment> {
        self.segments
            .last()
            .filter(|s| s.kind == SegmentKind::Answer)
    }

    pub fn searches(&self) -> impl Iterator<Item = &Segment> {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Search)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.stray.is_empty()
    }

    /// Stray text containing anything other than whitespace.
    pub fn significant_stray(&self) -> impl Iterator<Item = &StrayText> {
        self.stray.iter().filter(|s| !s.is_whitespace())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("<{0}> is never closed")]
    Unclosed(SegmentKind),
    #[error("</{0}> without a matching opening tag")]
    UnexpectedClose(SegmentKind),
    #[error("<{0}> opened inside another <{0}>")]
    Nested(SegmentKind),
    #[error("<{found}> delimiter inside an open <{open}>")]
    Interleaved {
        open: SegmentKind,
        found: SegmentKind,
    },
    #[error("<{0}> segment after the answer")]
    AfterAnswer(SegmentKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trajectory parse error at byte {offset}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}
