use super::boxed::extract_boxed_answer;
use super::request::parse_search_request;
use super::segment::{SegmentKind, Trajectory};

/// Outcome of the strict format check; `issues` is empty iff the format is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FormatReport {
    pub issues: Vec<String>,
}

impl FormatReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// True iff the trajectory follows `(Think Search Result)* Think Answer`, every
/// search payload parses, the answer has a `\boxed{}` group and no
/// non-whitespace text sits outside delimiters.
pub fn validate_format(traj: &Trajectory) -> bool {
    format_report(traj).is_valid()
}

pub fn format_report(traj: &Trajectory) -> FormatReport {
    use SegmentKind::*;
    let mut issues = Vec::new();

    let kinds: Vec<SegmentKind> = traj.segments.iter().map(|s| s.kind).collect();
    let grammar_ok = match kinds.as_slice() {
        [steps @ .., Think, Answer] => steps
            .chunks(3)
            .all(|c| c == [Think, Search, Result]),
        _ => false,
    };
    if !grammar_ok {
        let shape: Vec<&str> = kinds.iter().map(|k| k.name()).collect();
        issues.push(format!(
            "segment sequence [{}] does not match (think search result)* think answer",
            shape.join(" ")
        ));
    }

    for (n, seg) in traj.searches().enumerate() {
        if let Err(e) = parse_search_request(&seg.text) {
            issues.push(format!("search #{}: {e}", n + 1));
        }
    }

    match traj.segments.iter().find(|s| s.kind == Answer) {
        Some(ans) => {
            if let Err(e) = extract_boxed_answer(&ans.text) {
                issues.push(e.to_string());
            }
        }
        None => issues.push("no answer segment".into()),
    }

    for s in traj.significant_stray() {
        issues.push(format!("stray text at byte {}", s.offset));
    }

    FormatReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::parse_trajectory;

    const CREW: &str = include_str!("../../tests/fixtures/crew_trajectory.txt");

    #[test]
    fn crew_is_valid() {
        let t = parse_trajectory(CREW).unwrap();
        assert!(validate_format(&t), "{:?}", format_report(&t));
    }

    #[test]
    fn ending_in_search_is_invalid() {
        let t = parse_trajectory("<think>a</think><search>{\"query\":\"q\"}</search>").unwrap();
        assert!(!validate_format(&t));
    }

    #[test]
    fn bad_payload_is_invalid() {
        let t = parse_trajectory(
            "<think>a</think><search>not json</search><result>r</result><think>b</think><answer>\\boxed{x}</answer>",
        )
        .unwrap();
        let report = format_report(&t);
        assert_eq!(report.issues.len(), 1);
        assert!(report.issues[0].contains("search #1"));
    }

    #[test]
    fn missing_box_and_stray_text() {
        let t = parse_trajectory("<think>a</think> hm <answer>x</answer>").unwrap();
        assert_eq!(format_report(&t).issues.len(), 2);
    }

    #[test]
    fn search_without_intervening_think_is_invalid() {
        let t = parse_trajectory(
            "<think>a</think><search>{\"query\":\"q\"}</search><result>r</result><search>{\"query\":\"q\"}</search><result>r</result><think>b</think><answer>\\boxed{x}</answer>",
        )
        .unwrap();
        assert!(!validate_format(&t));
    }

    #[test]
    fn whitespace_between_segments_is_allowed() {
        let t = parse_trajectory("<think>a</think>\n <answer>\\boxed{x}</answer>\n").unwrap();
        assert!(validate_format(&t));
    }
}
