use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::normalize::surface_tokens;
use super::store::{EntityId, KnowledgeStore, Triple};

pub const DEFAULT_MATCH_LIMIT: usize = 16;
pub const DEFAULT_MAX_TRIPLES: usize = 100;
pub const DEFAULT_MAX_TOKENS: usize = 1024;

/// Entity and relation surface strings taken from a search request.
///
/// A query with no entity strings matches nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgQuery {
    #[serde(rename = "entity", default)]
    pub entities: Vec<String>,
    #[serde(rename = "relation", default)]
    pub relations: Vec<String>,
}

impl KgQuery {
    pub fn new<E, R>(entities: E, relations: R) -> Self
    where
        E: IntoIterator,
        E::Item: Into<String>,
        R: IntoIterator,
        R::Item: Into<String>,
    {
        Self {
            entities: entities.into_iter().map(Into::into).collect(),
            relations: relations.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredTriple {
    pub triple: Triple,
    /// `head | relation | tail` with canonical surface forms.
    pub rendered: String,
    /// Number of distinct normalized tokens shared with the query.
    pub score: u32,
}

/// Counts the budget units of a rendered triple.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokens;

impl TokenCounter for WhitespaceTokens {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

impl<F> TokenCounter for F
where
    F: Fn(&str) -> usize + Send + Sync,
{
    fn count(&self, text: &str) -> usize {
        self(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KgSearchOptions {
    pub match_limit: usize,
    pub max_triples: usize,
    pub max_tokens: usize,
}

impl Default for KgSearchOptions {
    fn default() -> Self {
        Self {
            match_limit: DEFAULT_MATCH_LIMIT,
            max_triples: DEFAULT_MAX_TRIPLES,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

impl KnowledgeStore {
    /// Resolves a surface name to entity ids with [`DEFAULT_MATCH_LIMIT`].
    pub fn match_entities(&self, name: &str) -> Vec<EntityId> {
        self.match_entities_limited(name, DEFAULT_MATCH_LIMIT)
    }

    /// Tiered fuzzy matching over normalized aliases:
    ///
    /// 1. an alias equal to the name;
    /// 2. an alias containing the name, or contained in it, as a contiguous token run;
    /// 3. aliases sharing at least one token, by shared-token count descending.
    ///
    /// A tier is consulted only when all earlier tiers are empty. Ties go to the
    /// smaller id and the result holds at most `limit` ids.
    pub fn match_entities_limited(&self, name: &str, limit: usize) -> Vec<EntityId> {
        self.match_indices(name, limit)
            .into_iter()
            .map(|i| self.entity_ids[i as usize].clone())
            .collect()
    }

    pub(super) fn match_indices(&self, name: &str, limit: usize) -> Vec<u32> {
        let tokens = surface_tokens(name);
        if tokens.is_empty() || limit == 0 {
            return Vec::new();
        }

        let joined = tokens.join(" ");
        if let Some(ids) = self.exact.get(&joined) {
            return ids.iter().copied().take(limit).collect();
        }

        let tier2 = self.containment_matches(&tokens);
        if !tier2.is_empty() {
            return tier2.into_iter().take(limit).collect();
        }

        let distinct: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
        let mut shared: HashMap<u32, u32> = HashMap::new();
        for tok in distinct {
            if let Some(ids) = self.postings.get(tok) {
                for id in ids {
                    *shared.entry(*id).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(u32, u32)> = shared.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.into_iter().take(limit).map(|(id, _)| id).collect()
    }

    fn containment_matches(&self, tokens: &[String]) -> Vec<u32> {
        let mut found = BTreeSet::new();

        // Aliases contained in the name: every proper contiguous run of the name
        // is looked up as a whole normalized alias.
        let n = tokens.len();
        for start in 0..n {
            for end in (start + 1)..=n {
                if end - start == n {
                    continue;
                }
                if let Some(ids) = self.exact.get(&tokens[start..end].join(" ")) {
                    found.extend(ids.iter().copied());
                }
            }
        }

        // Aliases containing the name: candidates hold every name token.
        let mut lists: Vec<&Vec<u32>> = Vec::with_capacity(n);
        for tok in tokens {
            match self.postings.get(tok) {
                Some(ids) => lists.push(ids),
                None => return found.into_iter().collect(),
            }
        }
        lists.sort_by_key(|l| l.len());
        let (first, rest) = lists.split_first().expect("non-empty token list");
        let rest_sets: Vec<HashSet<u32>> = rest
            .iter()
            .map(|l| l.iter().copied().collect())
            .collect();
        for &id in first.iter() {
            if found.contains(&id) || !rest_sets.iter().all(|s| s.contains(&id)) {
                continue;
            }
            let contains = self.alias_tokens[id as usize]
                .iter()
                .any(|alias| alias.len() > n && alias.windows(n).any(|w| w == tokens));
            if contains {
                found.insert(id);
            }
        }
        found.into_iter().collect()
    }

    /// All triples with a head or tail in `entities`, in id order, deduplicated.
    pub fn subgraph(&self, entities: &[EntityId]) -> Vec<Triple> {
        let indices: Vec<u32> = entities
            .iter()
            .filter_map(|e| self.entity_index(e))
            .collect();
        self.subgraph_indices(&indices)
            .into_iter()
            .map(|t| self.materialize(self.triples[t as usize]))
            .collect()
    }

    pub(super) fn subgraph_indices(&self, entities: &[u32]) -> Vec<u32> {
        let mut out: Vec<u32> = entities
            .iter()
            .flat_map(|e| self.incident[*e as usize].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Scores candidates by distinct normalized tokens shared between the query
    /// strings and the rendered triple, highest first, ties in id order.
    ///
    /// Candidates not present in the store are skipped.
    pub fn rank_triples(&self, query: &KgQuery, candidates: &[Triple]) -> Vec<ScoredTriple> {
        let indices: Vec<u32> = candidates
            .iter()
            .filter_map(|t| self.triple_index(t))
            .collect();
        self.rank_indices(query, indices)
    }

    fn rank_indices(&self, query: &KgQuery, mut indices: Vec<u32>) -> Vec<ScoredTriple> {
        indices.sort_unstable();
        indices.dedup();
        let query_tokens = query_token_set(query);
        let mut scored: Vec<(u32, u32, String)> = indices
            .into_iter()
            .map(|ix| {
                let rendered = self.render_index(self.triples[ix as usize]);
                let score = shared_token_count(&query_tokens, &rendered);
                (ix, score, rendered)
            })
            .collect();
        // Triple index order is (head, relation, tail) id order.
        scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        scored
            .into_iter()
            .map(|(ix, score, rendered)| ScoredTriple {
                triple: self.materialize(self.triples[ix as usize]),
                rendered,
                score,
            })
            .collect()
    }

    /// Match, expand to single-hop subgraphs, rank and truncate with default
    /// limits and whitespace token counting.
    pub fn kg_search(&self, query: &KgQuery) -> Vec<ScoredTriple> {
        self.kg_search_with(query, &KgSearchOptions::default(), &WhitespaceTokens)
    }

    /// Keeps the first `max_triples` ranked triples, then the longest prefix whose
    /// cumulative token count stays within `max_tokens`.
    pub fn kg_search_with(
        &self,
        query: &KgQuery,
        options: &KgSearchOptions,
        counter: &dyn TokenCounter,
    ) -> Vec<ScoredTriple> {
        let mut matched: Vec<u32> = query
            .entities
            .iter()
            .flat_map(|name| self.match_indices(name, options.match_limit))
            .collect();
        matched.sort_unstable();
        matched.dedup();
        if matched.is_empty() {
            return Vec::new();
        }
        let candidates = self.subgraph_indices(&matched);
        let mut ranked = self.rank_indices(query, candidates);
        ranked.truncate(options.max_triples);
        truncate_to_budget(&mut ranked, options.max_tokens, counter);
        ranked
    }
}

pub(crate) fn truncate_to_budget(
    ranked: &mut Vec<ScoredTriple>,
    max_tokens: usize,
    counter: &dyn TokenCounter,
) {
    let mut used = 0usize;
    let mut keep = 0usize;
    for st in ranked.iter() {
        let cost = counter.count(&st.rendered);
        if used + cost > max_tokens {
            break;
        }
        used += cost;
        keep += 1;
    }
    ranked.truncate(keep);
}

fn query_token_set(query: &KgQuery) -> HashSet<String> {
    query
        .entities
        .iter()
        .chain(&query.relations)
        .flat_map(|s| surface_tokens(s))
        .collect()
}

fn shared_token_count(query_tokens: &HashSet<String>, rendered: &str) -> u32 {
    let triple_tokens: HashSet<String> = surface_tokens(rendered).into_iter().collect();
    triple_tokens.intersection(query_tokens).count() as u32
}
