//! Independent oracles and fixture builders shared by the integration tests.
#![allow(dead_code)]

pub mod naive_kg;
pub mod reward_oracle;
pub mod trajectories;

use std::path::PathBuf;
use std::sync::Arc;

use kgrag_core::docs::{load_corpus, LexicalIndex};
use kgrag_core::kg::{KnowledgeStore, LoadOptions};
use kgrag_core::orchestrator::SearchEnv;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn crew_store() -> KnowledgeStore {
    KnowledgeStore::load(
        &[fixture("crew_triples.tsv")],
        fixture("crew_entities.tsv"),
        fixture("crew_relations.tsv"),
        LoadOptions::default(),
    )
    .unwrap()
}

pub fn crew_env() -> SearchEnv {
    let docs = LexicalIndex::build(load_corpus(&fixture("crew_corpus.jsonl")).unwrap()).unwrap();
    SearchEnv::new(Arc::new(docs)).with_kg(Arc::new(crew_store()))
}

pub fn crew_script() -> Vec<String> {
    serde_json::from_str(&std::fs::read_to_string(fixture("crew_script.json")).unwrap()).unwrap()
}

use kgrag_core::kg::{AliasTable, Triple};
use naive_kg::NaiveKg;
use rand::Rng;

pub const VOCAB: &[&str] = &[
    "river", "stone", "north", "king", "film", "poem", "red", "city", "john", "smith", "war", "love", "blue", "house",
    "star", "night", "new", "old", "song", "book", "(2009", "film)", "saint", "lake", "Ève", "O'Brien", "x-men", "42",
];

fn phrase<R: Rng>(rng: &mut R, max_words: usize) -> String {
    let n = rng.random_range(1..=max_words);
    (0..n).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect::<Vec<_>>().join(" ")
}

/// A random store plus its full-scan twin. A few hub entities take a large
/// share of the edges so the triple and token caps come into play.
pub fn random_kg<R: Rng>(rng: &mut R, max_entities: usize, max_triples: usize) -> (NaiveKg, kgrag_core::kg::KnowledgeStore) {
    let n_ent = rng.random_range(2..=max_entities);
    let n_rel = rng.random_range(1..=12);
    let n_tri = rng.random_range(0..=max_triples);
    let alias_list = |rng: &mut R, words: usize| -> Vec<String> {
        (0..rng.random_range(1..=3)).map(|_| phrase(rng, words)).collect()
    };
    let entities: Vec<(String, Vec<String>)> = (0..n_ent).map(|i| (format!("Q{i}"), alias_list(rng, 5))).collect();
    let relations: Vec<(String, Vec<String>)> = (0..n_rel).map(|i| (format!("P{i}"), alias_list(rng, 3))).collect();
    let hubs = n_ent.min(4);
    let pick = |rng: &mut R| {
        if rng.random_bool(0.35) {
            rng.random_range(0..hubs)
        } else {
            rng.random_range(0..n_ent)
        }
    };
    let mut triples: Vec<(String, String, String)> = Vec::with_capacity(n_tri);
    for _ in 0..n_tri {
        let t = (format!("Q{}", pick(rng)), format!("P{}", rng.random_range(0..n_rel)), format!("Q{}", pick(rng)));
        if !triples.is_empty() && rng.random_bool(0.05) {
            triples.push(triples[rng.random_range(0..triples.len())].clone());
        } else {
            triples.push(t);
        }
    }
    let table = |rows: &[(String, Vec<String>)]| {
        let mut t = AliasTable::default();
        for (id, a) in rows {
            t.insert(id.clone(), a.clone());
        }
        t
    };
    let store = kgrag_core::kg::KnowledgeStore::from_parts(
        table(&entities),
        table(&relations),
        triples.iter().map(|(h, r, t)| Triple::new(h, r, t)),
        kgrag_core::kg::LoadOptions::default(),
    )
    .unwrap();
    (
        NaiveKg {
            entities,
            relations,
            triples,
        },
        store,
    )
}

/// Query names: exact aliases, alias fragments and random word salad.
pub fn random_query<R: Rng>(rng: &mut R, kg: &NaiveKg) -> (Vec<String>, Vec<String>) {
    let n = rng.random_range(0..=3);
    let entities = (0..n)
        .map(|_| {
            let (_, aliases) = &kg.entities[rng.random_range(0..kg.entities.len())];
            let alias = &aliases[rng.random_range(0..aliases.len())];
            match rng.random_range(0..4) {
                0 => alias.clone(),
                1 => alias.to_uppercase(),
                2 => {
                    let words: Vec<&str> = alias.split(' ').collect();
                    let a = rng.random_range(0..words.len());
                    let b = rng.random_range(a..words.len());
                    words[a..=b].join(" ")
                }
                _ => phrase(rng, 3),
            }
        })
        .collect();
    let relations = (0..rng.random_range(0..=2)).map(|_| phrase(rng, 2)).collect();
    (entities, relations)
}
