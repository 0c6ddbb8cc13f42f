//! Knowledge-graph engine: Wikidata5M-style loading, fuzzy entity matching and
//! ranked single-hop subgraph retrieval.

mod normalize;
mod search;
pub mod service;
mod store;

pub use normalize::{normalize_surface, surface_tokens};
pub use service::RemoteKgClient;
pub use search::{
    KgQuery, KgSearchOptions, ScoredTriple, TokenCounter, WhitespaceTokens, DEFAULT_MATCH_LIMIT,
    DEFAULT_MAX_TOKENS, DEFAULT_MAX_TRIPLES,
};
pub use store::{
    AliasTable, EntityId, KgError, KnowledgeStore, LoadOptions, MissingIdPolicy, RelationId,
    Triple,
};
