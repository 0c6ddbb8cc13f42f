/// Parses a model's pick of numbered candidates (1-based in the prompt) into
/// ascending 0-based indices.
///
/// Looks for the first `[...]` list; without one, every integer in the reply
/// counts. Out-of-range numbers are ignored. `None` if nothing parseable is
/// found; an explicit empty list `[]` is a valid empty selection.
pub fn parse_selection(reply: &str, candidates: usize) -> Option<Vec<usize>> {
    let (body, bracketed) = match (reply.find('['), reply.find(']')) {
        (Some(open), Some(close)) if close > open => (&reply[open + 1..close], true),
        _ => (reply, false),
    };
    let numbers: Vec<usize> = body
        .split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .filter_map(|s| s.parse().ok())
        .collect();
    if numbers.is_empty() && !(bracketed && body.trim().is_empty()) {
        return None;
    }
    let mut picked: Vec<usize> = numbers
        .into_iter()
        .filter(|n| (1..=candidates).contains(n))
        .map(|n| n - 1)
        .collect();
    picked.sort_unstable();
    picked.dedup();
    Some(picked)
}
