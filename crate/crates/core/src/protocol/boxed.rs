use thiserror::Error;

const BOXED: &str = "\\boxed{";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no balanced \\boxed{{...}} group in answer")]
pub struct NoBoxedAnswer;

/// Contents of the last top-level, brace-balanced `\boxed{...}` group, trimmed.
pub fn extract_boxed_answer(answer_text: &str) -> Result<String, NoBoxedAnswer> {
    let mut last = None;
    let mut pos = 0;
    while let Some(rel) = answer_text[pos..].find(BOXED) {
        let open = pos + rel + BOXED.len();
        match matching_brace(&answer_text[open..]) {
            Some(len) => {
                last = Some(&answer_text[open..open + len]);
                pos = open + len + 1;
            }
            None => pos = open,
        }
    }
    last.map(|s| s.trim().to_owned()).ok_or(NoBoxedAnswer)
}

/// Length of the content before the brace closing an already-open group.
fn matching_brace(text: &str) -> Option<usize> {
    let mut depth = 1usize;
    for (i, b) in text.bytes().enumerate() {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}
