use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{clos_requests, load_requests, merge_judgments, run, ClosRequest, EvalError, RunReport, Variant, DEFAULT_MAX_REPAIR, DEFAULT_TRIALS};
use crate::agent::{AgentContext, ChatCompletionsBackend, LlmBackend, MockBackend, MockScript};
use crate::nile::{self, NileRecord, DEFAULT_MAX_ITER};
use crate::state::NetworkState;

pub type BackendSource = dyn Fn() -> Arc<dyn LlmBackend> + Sync;

/// Where model outputs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    /// A mock script file; each trial gets a fresh backend over it.
    Mock { script: PathBuf },
    /// An OpenAI-style chat completions endpoint; the key comes from
    /// `LLM_API_KEY`.
    Live {
        endpoint: String,
        model: String,
        #[serde(default)]
        temperature: Option<f64>,
    },
}

impl BackendSpec {
    /// A fresh backend per call; mocks restart their script each time.
    pub fn source(&self, base: &Path) -> Result<Box<BackendSource>, EvalError> {
        match self {
            BackendSpec::Mock { script } => {
                let path = base.join(script);
                let text = read(&path)?;
                let script = MockScript::from_json(&text).map_err(|e| EvalError::Backend(e.to_string()))?;
                // compile guards once so a bad script fails here, not per trial
                MockBackend::new(script.clone()).map_err(|e| EvalError::Backend(e.to_string()))?;
                Ok(Box::new(move || Arc::new(MockBackend::new(script.clone()).expect("script compiled above"))))
            }
            BackendSpec::Live {
                endpoint,
                model,
                temperature,
            } => {
                let mut b = ChatCompletionsBackend::from_env(endpoint.clone(), model.clone())
                    .map_err(|e| EvalError::Backend(e.to_string()))?;
                if let Some(t) = temperature {
                    b = b.with_temperature(*t);
                }
                let shared: Arc<dyn LlmBackend> = Arc::new(b);
                Ok(Box::new(move || shared.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NileSpec {
    /// JSON-lines records; the bundled synthetic sample when absent.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_nile_iter")]
    pub max_iter: u32,
    /// Defaults to the run's backend.
    #[serde(default)]
    pub backend: Option<BackendSpec>,
}

fn default_nile_iter() -> u32 {
    DEFAULT_MAX_ITER
}

fn default_trials() -> u32 {
    DEFAULT_TRIALS
}

fn default_max_repair() -> u32 {
    DEFAULT_MAX_REPAIR
}

fn default_parallelism() -> usize {
    1
}

fn default_variants() -> Vec<Variant> {
    Variant::ALL.to_vec()
}

/// A harness run, usually read from TOML. Relative paths resolve against
/// the spec file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Clos request set; the bundled reconstruction when absent.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default = "default_max_repair")]
    pub max_repair_iterations: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Operator labels merged into the report.
    #[serde(default)]
    pub judgments: Option<PathBuf>,
    pub backend: BackendSpec,
    #[serde(default)]
    pub nile: Option<NileSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn read(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl RunSpec {
    pub fn new(backend: BackendSpec) -> Self {
        Self {
            dataset: None,
            variants: default_variants(),
            trials: DEFAULT_TRIALS,
            max_repair_iterations: DEFAULT_MAX_REPAIR,
            parallelism: 1,
            output_dir: None,
            judgments: None,
            backend,
            nile: None,
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        let spec: RunSpec = toml::from_str(text).map_err(|e| EvalError::Spec(e.to_string()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let mut spec = Self::from_toml(&read(path)?)?;
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), EvalError> {
        if self.max_repair_iterations < 1 {
            return Err(EvalError::Spec("max_repair_iterations must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(EvalError::Spec("no variants selected".into()));
        }
        let mut seen = self.variants.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.variants.len() {
            return Err(EvalError::Spec("a variant is listed twice".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn requests(&self) -> Result<Vec<ClosRequest>, EvalError> {
        match &self.dataset {
            Some(p) => load_requests(&read(&self.resolve(p))?),
            None => Ok(clos_requests()),
        }
    }

    pub fn nile_records(&self) -> Result<Option<Vec<NileRecord>>, EvalError> {
        let Some(n) = &self.nile else { return Ok(None) };
        let text = match &n.dataset {
            Some(p) => read(&self.resolve(p))?,
            None => nile::SAMPLE_JSONL.to_string(),
        };
        nile::load_dataset(&text)
            .map(Some)
            .map_err(|e| EvalError::Dataset {
                line: e.line,
                message: e.message,
            })
    }

    /// Loads everything the spec names, runs it, and merges judgments.
    pub fn execute(&self, state: &NetworkState, ctx: &AgentContext) -> Result<RunReport, EvalError> {
        self.check()?;
        let requests = self.requests()?;
        let source = self.backend.source(&self.base_dir)?;
        let mut report = run(self, &requests, state, ctx, &|_| source());
        if let Some(p) = &self.judgments {
            merge_judgments(&mut report, &read(&self.resolve(p))?)?;
        }
        if let (Some(n), Some(records)) = (&self.nile, self.nile_records()?) {
            let source = n.backend.as_ref().unwrap_or(&self.backend).source(&self.base_dir)?;
            let backend_for = |_: &NileRecord| source();
            report.nile = Some(nile::evaluate_nile(&records, &backend_for, n.max_iter, &nile::default_synonyms()));
        }
        Ok(report)
    }
}
