use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::docs::{load_corpus, DocProvider, LexicalIndex, ProviderConfig, ProviderKind, RemoteDenseClient, WebSearchClient};
use crate::kg::{KnowledgeStore, LoadOptions, MissingIdPolicy, RemoteKgClient};
use crate::llm::{ChatClient, ChatClientConfig, LanguageModel, ScriptedLlm};
use crate::orchestrator::{AgentConfig, KgTool, SearchEnv};
use crate::rewards::RewardConfig;

/// Local KG dump files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgFiles {
    pub triples: Vec<PathBuf>,
    pub entity_aliases: PathBuf,
    pub relation_aliases: PathBuf,
    #[serde(default)]
    pub missing_ids: MissingIdPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LlmSpec {
    Http(ChatClientConfig),
    /// Replays per-question chunks from a JSONL file of `{"id", "chunks"}`.
    Scripted { scripts: PathBuf },
}

/// One evaluation run, read from a single JSON document. Relative paths are
/// resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: PathBuf,
    /// JSONL corpus for the local lexical provider.
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub kg: Option<KgFiles>,
    /// Base URL of a running `kg serve`; used when `kg` is absent.
    #[serde(default)]
    pub kg_endpoint: Option<String>,
    pub provider: ProviderConfig,
    pub llm: LlmSpec,
    /// Model for the result filters. Defaults to the policy endpoint for HTTP
    /// runs and to the deterministic fallbacks for scripted runs.
    #[serde(default)]
    pub filter_llm: Option<LlmSpec>,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_parallelism() -> usize {
    4
}

impl RunManifest {
    /// Reads, resolves relative paths and validates.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let body = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
        let mut manifest: RunManifest =
            serde_json::from_str(&body).map_err(|e| EvalError::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        manifest.resolve_paths(base);
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset);
        fix(&mut self.output_dir);
        if let Some(c) = self.corpus.as_mut() {
            fix(c);
        }
        if let Some(kg) = self.kg.as_mut() {
            kg.triples.iter_mut().for_each(fix);
            fix(&mut kg.entity_aliases);
            fix(&mut kg.relation_aliases);
        }
        for spec in [Some(&mut self.llm), self.filter_llm.as_mut()].into_iter().flatten() {
            if let LlmSpec::Scripted { scripts } = spec {
                fix(scripts);
            }
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let mut inputs = vec![&self.dataset];
        if let Some(c) = &self.corpus {
            inputs.push(c);
        }
        if let Some(kg) = &self.kg {
            inputs.extend(kg.triples.iter());
            inputs.push(&kg.entity_aliases);
            inputs.push(&kg.relation_aliases);
            if kg.triples.is_empty() {
                return Err(EvalError::Manifest("kg.triples must list at least one file".into()));
            }
        }
        for spec in [Some(&self.llm), self.filter_llm.as_ref()].into_iter().flatten() {
            if let LlmSpec::Scripted { scripts } = spec {
                inputs.push(scripts);
            }
        }
        for p in inputs {
            if !p.is_file() {
                return Err(EvalError::MissingPath(p.clone()));
            }
        }
        if self.provider.kind == ProviderKind::LocalLexical && self.corpus.is_none() {
            return Err(EvalError::Manifest("local-lexical provider needs \"corpus\"".into()));
        }
        self.provider.validate().map_err(EvalError::Manifest)?;
        self.agent.validate().map_err(|e| EvalError::Manifest(e.to_string()))?;
        self.reward.validate().map_err(|e| EvalError::Manifest(e.to_string()))?;
        if self.parallelism == 0 {
            return Err(EvalError::Manifest("parallelism must be at least 1".into()));
        }
        Ok(())
    }

    /// Agent settings with the run seed applied when none is set.
    pub fn agent_config(&self) -> AgentConfig {
        let mut agent = self.agent.clone();
        agent.seed.get_or_insert(self.seed);
        agent
    }

    pub(crate) fn build_env(&self) -> Result<SearchEnv, EvalError> {
        let docs: Arc<dyn DocProvider> = match self.provider.kind {
            ProviderKind::LocalLexical => {
                let path = self.corpus.as_ref().expect("validated");
                let corpus = load_corpus(path).map_err(|e| EvalError::Setup(e.to_string()))?;
                Arc::new(LexicalIndex::build(corpus).map_err(|e| EvalError::Setup(e.to_string()))?)
            }
            ProviderKind::RemoteDense => {
                Arc::new(RemoteDenseClient::new(&self.provider).map_err(|e| EvalError::Setup(e.to_string()))?)
            }
            ProviderKind::Web => {
                Arc::new(WebSearchClient::new(&self.provider).map_err(|e| EvalError::Setup(e.to_string()))?)
            }
        };
        let mut env = SearchEnv::new(docs);
        if let Some(kg) = &self.kg {
            let store = KnowledgeStore::load(
                &kg.triples,
                &kg.entity_aliases,
                &kg.relation_aliases,
                LoadOptions {
                    missing_ids: kg.missing_ids,
                },
            )
            .map_err(|e| EvalError::Setup(e.to_string()))?;
            env = env.with_kg(Arc::new(store) as Arc<dyn KgTool>);
        } else if let Some(url) = &self.kg_endpoint {
            let timeout = Duration::from_secs_f64(self.provider.timeout_secs);
            let client = RemoteKgClient::new(url, timeout).map_err(|e| EvalError::Setup(e.to_string()))?;
            env = env.with_kg(Arc::new(client) as Arc<dyn KgTool>);
        }
        let filter = match (&self.filter_llm, &self.llm) {
            (Some(LlmSpec::Http(cfg)), _) | (None, LlmSpec::Http(cfg)) => Some(http(cfg)?),
            (Some(LlmSpec::Scripted { scripts }), _) => {
                let chunks: Vec<String> = load_scripts(scripts)?.into_iter().flat_map(|(_, c)| c).collect();
                Some(Arc::new(ScriptedLlm::new(chunks)) as Arc<dyn LanguageModel>)
            }
            (None, LlmSpec::Scripted { .. }) => None,
        };
        if let Some(f) = filter {
            env = env.with_filter_llm(f);
        }
        Ok(env)
    }

    pub(crate) fn policy_models(&self) -> Result<PolicyModels, EvalError> {
        Ok(match &self.llm {
            LlmSpec::Http(cfg) => PolicyModels::Shared(http(cfg)?),
            LlmSpec::Scripted { scripts } => PolicyModels::Scripted(load_scripts(scripts)?.into_iter().collect()),
        })
    }
}

fn http(cfg: &ChatClientConfig) -> Result<Arc<dyn LanguageModel>, EvalError> {
    Ok(Arc::new(ChatClient::new(cfg.clone()).map_err(|e| EvalError::Setup(e.to_string()))?))
}

pub(crate) enum PolicyModels {
    Shared(Arc<dyn LanguageModel>),
    Scripted(HashMap<String, Vec<String>>),
}

impl PolicyModels {
    /// The model for one question. A question without a script gets an empty
    /// one, so its rollout ends with an LLM error.
    pub(crate) fn for_question(&self, id: &str) -> Arc<dyn LanguageModel> {
        match self {
            Self::Shared(m) => m.clone(),
            Self::Scripted(map) => Arc::new(ScriptedLlm::new(map.get(id).cloned().unwrap_or_default())),
        }
    }

    pub(crate) fn kind(&self) -> &'static str {
        match self {
            Self::Shared(_) => "http",
            Self::Scripted(_) => "scripted",
        }
    }
}

#[derive(Deserialize)]
struct ScriptLine {
    id: String,
    chunks: Vec<String>,
}

/// Script lines in file order.
pub(crate) fn load_scripts(path: &Path) -> Result<Vec<(String, Vec<String>)>, EvalError> {
    let io = |e| EvalError::io(path, e);
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let s: ScriptLine = serde_json::from_str(&line)
            .map_err(|e| EvalError::Manifest(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push((s.id, s.chunks));
    }
    Ok(out)
}
