use super::segment::{ParseError, ParseErrorKind, Segment, SegmentKind, StrayText, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Open(SegmentKind),
    Close(SegmentKind),
}

impl Tag {
    fn len(self) -> usize {
        match self {
            Tag::Open(k) => k.open_tag().len(),
            Tag::Close(k) => k.close_tag().len(),
        }
    }
}

/// Finds the next recognized delimiter at or after `from`.
fn next_tag(text: &str, from: usize) -> Option<(usize, Tag)> {
    let bytes = text.as_bytes();
    let mut pos = from;
    while let Some(rel) = text[pos..].find('<') {
        let at = pos + rel;
        let rest = &text[at..];
        for kind in SegmentKind::ALL {
            if rest.starts_with(kind.open_tag()) {
                return Some((at, Tag::Open(kind)));
            }
            if rest.starts_with(kind.close_tag()) {
                return Some((at, Tag::Close(kind)));
            }
        }
        pos = at + 1;
        if pos >= bytes.len() {
            break;
        }
    }
    None
}

/// Splits a serialized rollout into delimited segments. Delimiters are matched
/// literally and case-sensitively; text outside any pair is kept as stray text.
pub fn parse_trajectory(text: &str) -> Result<Trajectory, ParseError> {
    let mut segments: Vec<Segment> = Vec::new();
    let mut stray = Vec::new();
    let mut cursor = 0;

    while let Some((at, tag)) = next_tag(text, cursor) {
        let kind = match tag {
            Tag::Open(kind) => kind,
            Tag::Close(kind) => {
                return Err(ParseError {
                    offset: at,
                    kind: ParseErrorKind::UnexpectedClose(kind),
                })
            }
        };
        if let Some(last) = segments.last() {
            if last.kind == SegmentKind::Answer {
                return Err(ParseError {
                    offset: at,
                    kind: ParseErrorKind::AfterAnswer(kind),
                });
            }
        }
        if at > cursor {
            stray.push(StrayText {
                offset: cursor,
                text: text[cursor..at].to_owned(),
            });
        }

        let content_start = at + tag.len();
        let (close_at, close) = match next_tag(text, content_start) {
            None => {
                return Err(ParseError {
                    offset: at,
                    kind: ParseErrorKind::Unclosed(kind),
                })
            }
            Some(found) => found,
        };
        match close {
            Tag::Close(k) if k == kind => {}
            Tag::Open(k) if k == kind => {
                return Err(ParseError {
                    offset: close_at,
                    kind: ParseErrorKind::Nested(kind),
                })
            }
            Tag::Open(found) | Tag::Close(found) => {
                return Err(ParseError {
                    offset: close_at,
                    kind: ParseErrorKind::Interleaved { open: kind, found },
                })
            }
        }
        let end = close_at + close.len();
        segments.push(Segment {
            kind,
            text: text[content_start..close_at].to_owned(),
            span: at..end,
        });
        cursor = end;
    }

    if cursor < text.len() {
        stray.push(StrayText {
            offset: cursor,
            text: text[cursor..].to_owned(),
        });
    }
    Ok(Trajectory { segments, stray })
}

/// Writes segments and stray text back out in offset order.
///
/// For trajectories produced by [`parse_trajectory`] this reproduces the input
/// byte for byte.
pub fn serialize_trajectory(traj: &Trajectory) -> String {
    let mut out = String::new();
    let mut stray = traj.stray.iter().peekable();
    for seg in &traj.segments {
        while let Some(s) = stray.next_if(|s| s.offset < seg.span.start) {
            out.push_str(&s.text);
        }
        out.push_str(seg.kind.open_tag());
        out.push_str(&seg.text);
        out.push_str(seg.kind.close_tag());
    }
    for s in stray {
        out.push_str(&s.text);
    }
    out
}
