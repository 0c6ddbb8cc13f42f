//! Runtime for agentic multi-hop search: rollout protocol parsing, dual
//! document / knowledge-graph retrieval, result filtering, multi-reward scoring
//! and an evaluation harness.

pub mod kg;
pub mod protocol;
pub mod rewards;
pub mod docs;
pub mod llm;
pub mod orchestrator;
pub mod eval;
