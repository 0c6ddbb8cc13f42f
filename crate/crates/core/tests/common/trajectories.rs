//! Random grammar-valid rollouts: `(think search result)* think answer` with
//! optional whitespace between segments and payloads that never contain a
//! complete delimiter.

use rand::Rng;

pub const KINDS: [&str; 4] = ["think", "search", "result", "answer"];

const PIECES: &[&str] = &[
    "alpha", "beta", " ", "\n", "<", ">", "</", "<thin", "search>", "resul", "{\"query\": \"q\"}", "é", "日本", "\\boxed{x}",
    "<re", "sult>", "</answe", "tag", "12", "|",
];

fn payload<R: Rng>(rng: &mut R) -> String {
    loop {
        let n = rng.random_range(0..8);
        let s: String = (0..n).map(|_| PIECES[rng.random_range(0..PIECES.len())]).collect();
        let has_tag = KINDS
            .iter()
            .any(|k| s.contains(&format!("<{k}>")) || s.contains(&format!("</{k}>")));
        if !has_tag {
            return s;
        }
    }
}

fn gap<R: Rng>(rng: &mut R) -> &'static str {
    ["", "", "\n", " ", "\n\n", "\t "][rng.random_range(0..6)]
}

/// Serialized text plus the expected (kind, payload, byte span) of each segment.
pub struct Generated {
    pub text: String,
    pub segments: Vec<(&'static str, String, std::ops::Range<usize>)>,
}

pub fn generate<R: Rng>(rng: &mut R, max_rounds: usize) -> Generated {
    let rounds = rng.random_range(0..=max_rounds);
    let mut kinds = Vec::new();
    for _ in 0..rounds {
        kinds.extend(["think", "search", "result"]);
    }
    kinds.extend(["think", "answer"]);
    let mut text = String::new();
    let mut segments = Vec::new();
    for kind in kinds {
        text.push_str(gap(rng));
        let body = payload(rng);
        let start = text.len();
        text.push_str(&format!("<{kind}>{body}</{kind}>"));
        segments.push((kind, body, start..text.len()));
    }
    text.push_str(gap(rng));
    Generated { text, segments }
}
