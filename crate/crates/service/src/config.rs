//! Service configuration and fixture loading.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use netlingua_core::agent::{read_transcript, replay_backend, AgentConfig, ChatCompletionsBackend, LlmBackend, MockBackend, MockScript};
use netlingua_core::fixtures;
use netlingua_core::memory::{HttpEmbedder, MemoryStore};
use netlingua_core::schema::{self, ResolvedSchema, SchemaModule};
use netlingua_core::state::{self, NetworkState};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable holding the optional bearer token.
pub const TOKEN_ENV: &str = "NETLINGUA_API_TOKEN";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Scripted outputs; the bundled walkthrough script by default.
    #[default]
    Mock,
    /// Model outputs of a recorded transcript, in order.
    Replay,
    /// An OpenAI-style chat completions endpoint.
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EmbeddingConfig {
    /// Deterministic hashing embedder, no network.
    #[default]
    Offline,
    /// Remote embeddings; the key comes from `EMBED_API_KEY`.
    Http { endpoint: String, model: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    /// One sub-directory per device holding `config_db.json`, plus
    /// `topology.json`. The bundled Clos network when unset.
    pub state_dir: Option<PathBuf>,
    /// `.yang` files; the bundled modules when unset.
    pub schema_dir: Option<PathBuf>,
    /// Transcript files; sessions are kept in memory only when unset.
    pub sessions_dir: Option<PathBuf>,
    pub backend: BackendKind,
    pub mock_script: Option<PathBuf>,
    pub replay_transcript: Option<PathBuf>,
    pub live: Option<LiveConfig>,
    pub embedding: EmbeddingConfig,
    pub agent: AgentConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8700,
            state_dir: None,
            schema_dir: None,
            sessions_dir: None,
            backend: BackendKind::Mock,
            mock_script: None,
            replay_transcript: None,
            live: None,
            embedding: EmbeddingConfig::Offline,
            agent: AgentConfig::default(),
        }
    }
}

/// Builds a backend per session; mocks restart their script each time.
pub type BackendSource = Box<dyn Fn() -> Arc<dyn LlmBackend> + Send + Sync>;

pub struct Fixtures {
    pub modules: Vec<SchemaModule>,
    pub schema: ResolvedSchema,
    pub state: NetworkState,
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads the file; paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::from_toml(&read(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.state_dir,
            &mut cfg.schema_dir,
            &mut cfg.sessions_dir,
            &mut cfg.mock_script,
            &mut cfg.replay_transcript,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }

    pub fn schema(&self) -> Result<(Vec<SchemaModule>, ResolvedSchema), ConfigError> {
        let modules = match &self.schema_dir {
            Some(dir) => load_schema_dir(dir)?,
            None => fixtures::schema_modules().map_err(|e| ConfigError::Invalid(e.to_string()))?,
        };
        let schema = schema::resolve(modules.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok((modules, schema))
    }

    pub fn fixtures(&self) -> Result<Fixtures, ConfigError> {
        let (modules, schema) = self.schema()?;
        let state = match &self.state_dir {
            Some(dir) => load_state_dir(&schema, dir)?,
            None => fixtures::clos_state(),
        };
        Ok(Fixtures { modules, schema, state })
    }

    pub fn memory(&self) -> Result<MemoryStore, ConfigError> {
        match &self.embedding {
            EmbeddingConfig::Offline => Ok(MemoryStore::offline()),
            EmbeddingConfig::Http { endpoint, model } => {
                let e = HttpEmbedder::from_env(endpoint.clone(), model.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(MemoryStore::new(Arc::new(e)))
            }
        }
    }

    pub fn backend_source(&self) -> Result<BackendSource, ConfigError> {
        match self.backend {
            BackendKind::Mock => {
                let script = match &self.mock_script {
                    Some(p) => MockScript::from_json(&read(p)?).map_err(|e| ConfigError::Invalid(e.to_string()))?,
                    None => fixtures::walkthrough().script,
                };
                MockBackend::new(script.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(Box::new(move || Arc::new(MockBackend::new(script.clone()).expect("script compiled above"))))
            }
            BackendKind::Replay => {
                let text = match &self.replay_transcript {
                    Some(p) => read(p)?,
                    None => fixtures::WALKTHROUGH_TRANSCRIPT.to_string(),
                };
                let turns = read_transcript(&text).map_err(|e| ConfigError::Invalid(format!("transcript: {e}")))?;
                Ok(Box::new(move || Arc::new(replay_backend(&turns))))
            }
            BackendKind::Live => {
                let live = self
                    .live
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("backend = \"live\" needs a [live] section".into()))?;
                let mut b = ChatCompletionsBackend::from_env(live.endpoint.clone(), live.model.clone())
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if let Some(t) = live.temperature {
                    b = b.with_temperature(t);
                }
                let shared: Arc<dyn LlmBackend> = Arc::new(b);
                Ok(Box::new(move || shared.clone()))
            }
        }
    }
}

/// Every `.yang` file in the directory, in name order.
pub fn load_schema_dir(dir: &Path) -> Result<Vec<SchemaModule>, ConfigError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| ConfigError::Io {
            path: dir.display().to_string(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "yang"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(ConfigError::Invalid(format!("{}: no .yang files", dir.display())));
    }
    paths
        .iter()
        .map(|p| schema::parse_module(&read(p)?).map_err(|e| ConfigError::Invalid(format!("{}: {e}", p.display()))))
        .collect()
}

/// A state directory (per-device `config_db.json` plus `topology.json`) at
/// revision 0.
pub fn load_state_dir(schema: &ResolvedSchema, dir: &Path) -> Result<NetworkState, ConfigError> {
    let mut devices = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| ConfigError::Io {
            path: dir.display().to_string(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("config_db.json").is_file())
        .collect();
    entries.sort();
    for p in entries {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let file = p.join("config_db.json");
        let dev = state::load_device_state(schema, &read(&file)?, &name)
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", file.display())))?;
        devices.push(dev);
    }
    let topo = dir.join("topology.json");
    let topology = if topo.is_file() {
        state::parse_topology(&read(&topo)?).map_err(|e| ConfigError::Invalid(format!("{}: {e}", topo.display())))?
    } else {
        Vec::new()
    };
    NetworkState::new(devices, topology, 0).map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// A state directory or a snapshot file.
pub fn load_state(schema: &ResolvedSchema, path: &Path) -> Result<NetworkState, ConfigError> {
    if path.is_dir() {
        load_state_dir(schema, path)
    } else {
        NetworkState::from_snapshot_json(schema, &read(path)?).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = ServiceConfig::from_toml("").unwrap();
        assert_eq!(cfg, ServiceConfig::default());
        let cfg = ServiceConfig::from_toml(
            "port = 9000\nbackend = \"live\"\n[live]\nendpoint = \"http://localhost:1\"\nmodel = \"m\"\n[embedding]\nkind = \"offline\"\n",
        )
        .unwrap();
        assert_eq!(cfg.port, 9000);
        assert_eq!(cfg.backend, BackendKind::Live);
        assert_eq!(cfg.live.unwrap().model, "m");
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
bind = "0.0.0.0"
port = 8700
state_dir = "network"
schema_dir = "yang"
sessions_dir = "sessions"
backend = "live"

[live]
endpoint = "https://llm.example.internal/v1/chat/completions"
model = "gpt-4"
temperature = 0.0

[embedding]
kind = "http"
endpoint = "https://llm.example.internal/v1/embeddings"
model = "text-embedding-3-small"

[agent]
max_repair_iterations = 5
retrieval_k = 8
retrieval_mode = "nl"
"#;
        let cfg = ServiceConfig::from_toml(text).unwrap();
        assert_eq!(cfg.agent.max_repair_iterations, 5);
        assert!(matches!(cfg.embedding, EmbeddingConfig::Http { .. }));
        assert_eq!(cfg.agent.state_retrieval, AgentConfig::default().state_retrieval);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ServiceConfig::from_toml("prot = 1"), Err(ConfigError::Toml(_))));
    }

    #[test]
    fn live_without_a_section_is_invalid() {
        let cfg = ServiceConfig {
            backend: BackendKind::Live,
            ..Default::default()
        };
        assert!(matches!(cfg.backend_source(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn relative_paths_resolve_against_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("svc.toml");
        fs::write(&p, "sessions_dir = \"sessions\"\n").unwrap();
        let cfg = ServiceConfig::load(&p).unwrap();
        assert_eq!(cfg.sessions_dir.unwrap(), dir.path().join("sessions"));
    }

    #[test]
    fn bundled_state_dir_matches_the_fixture() {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/clos");
        let schema = fixtures::schema();
        let loaded = load_state(&schema, &dir).unwrap();
        assert_eq!(loaded.to_snapshot_json(&schema), fixtures::clos_state().to_snapshot_json(&schema));
        let modules = load_schema_dir(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/yang")).unwrap();
        assert_eq!(modules.len(), fixtures::schema_modules().unwrap().len());
    }

    #[test]
    fn replay_backend_defaults_to_the_recording() {
        let cfg = ServiceConfig {
            backend: BackendKind::Replay,
            ..Default::default()
        };
        let source = cfg.backend_source().unwrap();
        let _ = source();
    }
}
