use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::normalize::{normalize_surface, surface_tokens};

/// Wikidata-style entity identifier, e.g. `Q123`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

/// Wikidata-style relation identifier, e.g. `P57`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub String);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<&str> for RelationId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: &str, relation: &str, tail: &str) -> Self {
        Self {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }
}

/// Identifier to surface forms. The first surface form is the canonical one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    entries: BTreeMap<String, Vec<String>>,
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends aliases for `id`, keeping insertion order and skipping empty strings.
    pub fn insert<I, S>(&mut self, id: impl Into<String>, aliases: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let list = self.entries.entry(id.into()).or_default();
        for alias in aliases {
            let alias = alias.into();
            if !alias.is_empty() {
                list.push(alias);
            }
        }
    }

    pub fn get(&self, id: &str) -> Option<&[String]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// What to do with a triple whose ids are missing from the alias files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingIdPolicy {
    #[default]
    Reject,
    /// Keep the triple and use the raw id as its only surface form.
    Retain,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub missing_ids: MissingIdPolicy,
}

#[derive(Debug, Error)]
pub enum KgError {
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {reason}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{}:{line}: {kind} id `{id}` has no alias entry", path.display())]
    UnknownId {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("{kind} id `{id}` has no alias entry")]
    UnknownIdInMemory { kind: &'static str, id: String },
    #[error("{kind} id `{id}` has no surface form")]
    NoSurfaceForm { kind: &'static str, id: String },
}

/// Immutable, deduplicated triple store with alias tables and a normalized
/// token index over entity surface forms.
///
/// Entities, relations and triples are interned as integer indices assigned
/// in ascending id order, so index order coincides with lexicographic id order.
#[derive(Debug, Clone)]
pub struct KnowledgeStore {
    pub(super) entity_ids: Vec<EntityId>,
    pub(super) entity_aliases: Vec<Vec<String>>,
    pub(super) relation_ids: Vec<RelationId>,
    pub(super) relation_aliases: Vec<Vec<String>>,
    /// Sorted, deduplicated `[head, relation, tail]` index triples.
    pub(super) triples: Vec<[u32; 3]>,
    /// Entity index to ascending indices of incident triples (either direction).
    pub(super) incident: Vec<Vec<u32>>,
    /// Normalized alias string to ascending entity indices.
    pub(super) exact: HashMap<String, Vec<u32>>,
    /// Normalized token to ascending entity indices.
    pub(super) postings: HashMap<String, Vec<u32>>,
    /// Per entity, normalized token lists of each alias.
    pub(super) alias_tokens: Vec<Vec<Vec<String>>>,
    entity_lookup: HashMap<String, u32>,
}

struct RawTriple {
    ids: [String; 3],
    path: PathBuf,
    line: usize,
}

impl KnowledgeStore {
    /// Loads tab-separated triple files and alias files (Wikidata5M layout).
    pub fn load<P: AsRef<Path>>(
        triple_files: &[P],
        entity_alias_file: impl AsRef<Path>,
        relation_alias_file: impl AsRef<Path>,
        options: LoadOptions,
    ) -> Result<Self, KgError> {
        let entities = read_alias_file(entity_alias_file.as_ref())?;
        let relations = read_alias_file(relation_alias_file.as_ref())?;
        let mut raw = Vec::new();
        for path in triple_files {
            read_triple_file(path.as_ref(), &mut raw)?;
        }
        Self::assemble(entities, relations, raw, options)
    }

    /// Builds a store from in-memory tables; same semantics as [`KnowledgeStore::load`].
    pub fn from_parts<I>(
        entity_aliases: AliasTable,
        relation_aliases: AliasTable,
        triples: I,
        options: LoadOptions,
    ) -> Result<Self, KgError>
    where
        I: IntoIterator<Item = Triple>,
    {
        let raw = triples
            .into_iter()
            .map(|t| RawTriple {
                ids: [t.head.0, t.relation.0, t.tail.0],
                path: PathBuf::new(),
                line: 0,
            })
            .collect();
        Self::assemble(entity_aliases, relation_aliases, raw, options)
    }

    fn assemble(
        mut entities: AliasTable,
        mut relations: AliasTable,
        raw: Vec<RawTriple>,
        options: LoadOptions,
    ) -> Result<Self, KgError> {
        for (kind, table) in [("entity", &entities), ("relation", &relations)] {
            if let Some((id, _)) = table.iter().find(|(_, a)| a.is_empty()) {
                return Err(KgError::NoSurfaceForm {
                    kind,
                    id: id.to_owned(),
                });
            }
        }

        for t in &raw {
            for (pos, id) in t.ids.iter().enumerate() {
                let (kind, table) = if pos == 1 {
                    ("relation", &mut relations)
                } else {
                    ("entity", &mut entities)
                };
                if table.get(id).is_some() {
                    continue;
                }
                match options.missing_ids {
                    MissingIdPolicy::Retain => table.insert(id.clone(), [id.clone()]),
                    MissingIdPolicy::Reject if t.line == 0 => {
                        return Err(KgError::UnknownIdInMemory {
                            kind,
                            id: id.clone(),
                        })
                    }
                    MissingIdPolicy::Reject => {
                        return Err(KgError::UnknownId {
                            path: t.path.clone(),
                            line: t.line,
                            kind,
                            id: id.clone(),
                        })
                    }
                }
            }
        }

        let mut entity_ids = Vec::with_capacity(entities.len());
        let mut entity_aliases = Vec::with_capacity(entities.len());
        let mut entity_lookup = HashMap::with_capacity(entities.len());
        for (i, (id, aliases)) in entities.entries.into_iter().enumerate() {
            entity_lookup.insert(id.clone(), i as u32);
            entity_ids.push(EntityId(id));
            entity_aliases.push(aliases);
        }
        let mut relation_ids = Vec::with_capacity(relations.len());
        let mut relation_aliases = Vec::with_capacity(relations.len());
        let mut relation_lookup = HashMap::with_capacity(relations.len());
        for (i, (id, aliases)) in relations.entries.into_iter().enumerate() {
            relation_lookup.insert(id.clone(), i as u32);
            relation_ids.push(RelationId(id));
            relation_aliases.push(aliases);
        }

        let mut triples: Vec<[u32; 3]> = raw
            .iter()
            .map(|t| {
                [
                    entity_lookup[&t.ids[0]],
                    relation_lookup[&t.ids[1]],
                    entity_lookup[&t.ids[2]],
                ]
            })
            .collect();
        triples.sort_unstable();
        triples.dedup();

        let mut incident = vec![Vec::new(); entity_ids.len()];
        for (i, [h, _, t]) in triples.iter().enumerate() {
            incident[*h as usize].push(i as u32);
            if t != h {
                incident[*t as usize].push(i as u32);
            }
        }
        for list in &mut incident {
            list.sort_unstable();
        }

        let mut exact: HashMap<String, Vec<u32>> = HashMap::new();
        let mut postings: HashMap<String, Vec<u32>> = HashMap::new();
        let mut alias_tokens = Vec::with_capacity(entity_ids.len());
        for (i, aliases) in entity_aliases.iter().enumerate() {
            let i = i as u32;
            let mut per_alias = Vec::with_capacity(aliases.len());
            for alias in aliases {
                let norm = normalize_surface(alias);
                if norm.is_empty() {
                    per_alias.push(Vec::new());
                    continue;
                }
                push_unique(exact.entry(norm).or_default(), i);
                let tokens = surface_tokens(alias);
                for tok in &tokens {
                    push_unique(postings.entry(tok.clone()).or_default(), i);
                }
                per_alias.push(tokens);
            }
            alias_tokens.push(per_alias);
        }

        Ok(Self {
            entity_ids,
            entity_aliases,
            relation_ids,
            relation_aliases,
            triples,
            incident,
            exact,
            postings,
            alias_tokens,
            entity_lookup,
        })
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    pub fn entity_count(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_ids.len()
    }

    /// All triples in (head, relation, tail) id order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.triples.iter().map(|ix| self.materialize(*ix))
    }

    pub fn entity_aliases(&self, id: &EntityId) -> Option<&[String]> {
        self.entity_index(id)
            .map(|i| self.entity_aliases[i as usize].as_slice())
    }

    pub fn relation_aliases(&self, id: &RelationId) -> Option<&[String]> {
        self.relation_ids
            .binary_search(id)
            .ok()
            .map(|i| self.relation_aliases[i].as_slice())
    }

    pub fn entity_alias_table(&self) -> AliasTable {
        let mut table = AliasTable::new();
        for (id, aliases) in self.entity_ids.iter().zip(&self.entity_aliases) {
            table.insert(id.0.clone(), aliases.iter().cloned());
        }
        table
    }

    pub fn relation_alias_table(&self) -> AliasTable {
        let mut table = AliasTable::new();
        for (id, aliases) in self.relation_ids.iter().zip(&self.relation_aliases) {
            table.insert(id.0.clone(), aliases.iter().cloned());
        }
        table
    }

    /// `head | relation | tail` using canonical surface forms.
    pub fn render(&self, triple: &Triple) -> Option<String> {
        let h = self.entity_aliases(&triple.head)?.first()?;
        let r = self.relation_aliases(&triple.relation)?.first()?;
        let t = self.entity_aliases(&triple.tail)?.first()?;
        Some(format!("{h} | {r} | {t}"))
    }

    pub(super) fn render_index(&self, [h, r, t]: [u32; 3]) -> String {
        format!(
            "{} | {} | {}",
            self.entity_aliases[h as usize][0],
            self.relation_aliases[r as usize][0],
            self.entity_aliases[t as usize][0]
        )
    }

    pub(super) fn entity_index(&self, id: &EntityId) -> Option<u32> {
        self.entity_lookup.get(&id.0).copied()
    }

    pub(super) fn triple_index(&self, triple: &Triple) -> Option<u32> {
        let h = self.entity_index(&triple.head)?;
        let r = self.relation_ids.binary_search(&triple.relation).ok()? as u32;
        let t = self.entity_index(&triple.tail)?;
        self.triples.binary_search(&[h, r, t]).ok().map(|i| i as u32)
    }

    pub(super) fn materialize(&self, [h, r, t]: [u32; 3]) -> Triple {
        Triple {
            head: self.entity_ids[h as usize].clone(),
            relation: self.relation_ids[r as usize].clone(),
            tail: self.entity_ids[t as usize].clone(),
        }
    }
}

fn push_unique(list: &mut Vec<u32>, value: u32) {
    // Entities are visited in ascending order, so the last element is the only possible duplicate.
    if list.last() != Some(&value) {
        list.push(value);
    }
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>, KgError> {
    let file = File::open(path).map_err(|source| KgError::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l)))
}

fn read_line(path: &Path, line: std::io::Result<String>) -> Result<String, KgError> {
    let mut line = line.map_err(|source| KgError::Io {
        path: path.to_owned(),
        source,
    })?;
    if line.ends_with('\r') {
        line.pop();
    }
    Ok(line)
}

fn read_alias_file(path: &Path) -> Result<AliasTable, KgError> {
    let mut table = AliasTable::new();
    for (no, line) in open_lines(path)? {
        let line = read_line(path, line)?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default();
        let aliases: Vec<&str> = fields.filter(|a| !a.is_empty()).collect();
        if id.is_empty() || aliases.is_empty() {
            return Err(KgError::Malformed {
                path: path.to_owned(),
                line: no,
                reason: "expected `id<TAB>alias[<TAB>alias...]`".into(),
            });
        }
        table.insert(id, aliases);
    }
    Ok(table)
}

fn read_triple_file(path: &Path, out: &mut Vec<RawTriple>) -> Result<(), KgError> {
    for (no, line) in open_lines(path)? {
        let line = read_line(path, line)?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(KgError::Malformed {
                path: path.to_owned(),
                line: no,
                reason: format!(
                    "expected 3 non-empty tab-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        out.push(RawTriple {
            ids: [fields[0].into(), fields[1].into(), fields[2].into()],
            path: path.to_owned(),
            line: no,
        });
    }
    Ok(())
}
