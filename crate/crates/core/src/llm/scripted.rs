use std::collections::VecDeque;
use std::sync::Mutex;

use async_trait::async_trait;

use super::{find_stop, whitespace_units, Generation, GenerationRequest, LanguageModel, LlmError};

/// Deterministic model that replays a fixed list of generation chunks.
///
/// Each call returns the next chunk, cut at the first stop sequence of the
/// request; text after the stop is discarded. Requests are recorded.
#[derive(Debug, Default)]
pub struct ScriptedLlm {
    chunks: Mutex<VecDeque<String>>,
    requests: Mutex<Vec<GenerationRequest>>,
}

impl ScriptedLlm {
    pub fn new<I, S>(chunks: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            chunks: Mutex::new(chunks.into_iter().map(Into::into).collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<GenerationRequest> {
        self.requests.lock().unwrap().clone()
    }

    pub fn remaining(&self) -> usize {
        self.chunks.lock().unwrap().len()
    }
}

#[async_trait]
impl LanguageModel for ScriptedLlm {
    async fn generate(&self, request: &GenerationRequest) -> Result<Generation, LlmError> {
        self.requests.lock().unwrap().push(request.clone());
        let chunk = self
            .chunks
            .lock()
            .unwrap()
            .pop_front()
            .ok_or(LlmError::ScriptExhausted)?;
        let (text, stop) = match find_stop(&chunk, &request.stop) {
            Some((at, stop)) => (chunk[..at].to_owned(), Some(stop.to_owned())),
            None => (chunk, None),
        };
        Ok(Generation {
            units: whitespace_units(&text),
            text,
            stop,
        })
    }
}
