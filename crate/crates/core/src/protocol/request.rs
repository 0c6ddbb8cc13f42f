use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// JSON payload of a `<search>` block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub query: String,
    #[serde(default)]
    pub entity: Vec<String>,
    #[serde(default)]
    pub relation: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RequestError {
    #[error("search payload is not valid JSON: {0}")]
    InvalidJson(String),
    #[error("search payload must be a JSON object")]
    NotAnObject,
    #[error("search payload has no non-empty \"query\" string")]
    MissingQuery,
    #[error("\"{0}\" must be a list of strings")]
    BadList(&'static str),
}

/// A parsed request plus warnings about ignored keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRequest {
    pub request: SearchRequest,
    pub warnings: Vec<String>,
}

pub fn parse_search_request(payload: &str) -> Result<ParsedRequest, RequestError> {
    let value: Value =
        serde_json::from_str(payload.trim()).map_err(|e| RequestError::InvalidJson(e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(RequestError::NotAnObject);
    };

    let query = match map.get("query") {
        Some(Value::String(q)) if !q.trim().is_empty() => q.clone(),
        _ => return Err(RequestError::MissingQuery),
    };
    let entity = string_list(map.get("entity"), "entity")?;
    let relation = string_list(map.get("relation"), "relation")?;

    let warnings = map
        .keys()
        .filter(|k| !matches!(k.as_str(), "query" | "entity" | "relation"))
        .map(|k| format!("ignored unknown key \"{k}\" in search payload"))
        .collect::<Vec<_>>();
    for w in &warnings {
        tracing::warn!("{w}");
    }

    Ok(ParsedRequest {
        request: SearchRequest {
            query,
            entity,
            relation,
        },
        warnings,
    })
}

/// Accepts a list of strings, a bare string (as a one-element list), or null.
fn string_list(value: Option<&Value>, key: &'static str) -> Result<Vec<String>, RequestError> {
    match value {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::String(s)) => Ok(vec![s.clone()]),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                _ => Err(RequestError::BadList(key)),
            })
            .collect(),
        Some(_) => Err(RequestError::BadList(key)),
    }
}
