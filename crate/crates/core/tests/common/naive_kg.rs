//! Full-scan reference for knowledge-graph search: no indexes, every entity
//! and triple is visited per query.

use std::collections::BTreeSet;

pub struct NaiveKg {
    /// (id, aliases), any order.
    pub entities: Vec<(String, Vec<String>)>,
    pub relations: Vec<(String, Vec<String>)>,
    pub triples: Vec<(String, String, String)>,
}

pub const MATCH_LIMIT: usize = 16;

fn tokens(s: &str) -> Vec<String> {
    let mapped: String = s
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    mapped.split_whitespace().map(str::to_owned).collect()
}

fn contains_run(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.len() >= needle.len() && (0..=hay.len() - needle.len()).any(|i| hay[i..i + needle.len()] == *needle)
}

impl NaiveKg {
    fn canonical<'a>(table: &'a [(String, Vec<String>)], id: &'a str) -> &'a str {
        table
            .iter()
            .find(|(i, _)| i == id)
            .and_then(|(_, a)| a.iter().find(|s| !s.is_empty()))
            .map(String::as_str)
            .unwrap_or(id)
    }

    pub fn render(&self, t: &(String, String, String)) -> String {
        format!(
            "{} | {} | {}",
            Self::canonical(&self.entities, &t.0),
            Self::canonical(&self.relations, &t.1),
            Self::canonical(&self.entities, &t.2)
        )
    }

    pub fn match_entities(&self, name: &str) -> Vec<String> {
        let q = tokens(name);
        if q.is_empty() {
            return Vec::new();
        }
        let mut ids: Vec<&(String, Vec<String>)> = self.entities.iter().collect();
        ids.sort_by(|a, b| a.0.cmp(&b.0));
        let alias_toks = |aliases: &Vec<String>| -> Vec<Vec<String>> {
            aliases.iter().map(|a| tokens(a)).filter(|t| !t.is_empty()).collect()
        };

        let tier1: Vec<String> = ids
            .iter()
            .filter(|(_, a)| alias_toks(a).contains(&q))
            .map(|(id, _)| id.clone())
            .collect();
        if !tier1.is_empty() {
            return tier1.into_iter().take(MATCH_LIMIT).collect();
        }
        let tier2: Vec<String> = ids
            .iter()
            .filter(|(_, a)| {
                alias_toks(a).iter().any(|t| {
                    (t.len() < q.len() && contains_run(&q, t)) || (t.len() > q.len() && contains_run(t, &q))
                })
            })
            .map(|(id, _)| id.clone())
            .collect();
        if !tier2.is_empty() {
            return tier2.into_iter().take(MATCH_LIMIT).collect();
        }
        let qset: BTreeSet<&String> = q.iter().collect();
        let mut tier3: Vec<(usize, String)> = ids
            .iter()
            .map(|(id, a)| {
                let all: BTreeSet<String> = alias_toks(a).into_iter().flatten().collect();
                (qset.iter().filter(|t| all.contains(**t)).count(), id.clone())
            })
            .filter(|(n, _)| *n > 0)
            .collect();
        tier3.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        tier3.into_iter().take(MATCH_LIMIT).map(|(_, id)| id).collect()
    }

    /// `(rendered, score, triple)` in result order.
    pub fn search(
        &self,
        entities: &[String],
        relations: &[String],
        max_triples: usize,
        max_tokens: usize,
    ) -> Vec<(String, u32, (String, String, String))> {
        let matched: BTreeSet<String> = entities.iter().flat_map(|e| self.match_entities(e)).collect();
        if matched.is_empty() {
            return Vec::new();
        }
        let query: BTreeSet<String> = entities.iter().chain(relations).flat_map(|s| tokens(s)).collect();
        let mut uniq: Vec<(String, String, String)> = self
            .triples
            .iter()
            .filter(|t| matched.contains(&t.0) || matched.contains(&t.2))
            .cloned()
            .collect();
        uniq.sort();
        uniq.dedup();
        let mut scored: Vec<(String, u32, (String, String, String))> = uniq
            .into_iter()
            .map(|t| {
                let r = self.render(&t);
                let rt: BTreeSet<String> = tokens(&r).into_iter().collect();
                let score = rt.intersection(&query).count() as u32;
                (r, score, t)
            })
            .collect();
        scored.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.2.cmp(&b.2)));
        scored.truncate(max_triples);
        let mut out = Vec::new();
        let mut used = 0;
        for s in scored {
            let cost = s.0.split_whitespace().count();
            if used + cost > max_tokens {
                break;
            }
            used += cost;
            out.push(s);
        }
        out
    }
}
