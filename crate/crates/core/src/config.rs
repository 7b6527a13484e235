//! JSON run configuration and construction of the provider graph.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Endpoint URLs and keys can be overridden per role with
//! `PARRAG_<ROLE>_URL` and `PARRAG_<ROLE>_API_KEY`, where role is one of
//! `GENERATOR`, `JUDGE`, `ATTRIBUTION`, `EMBEDDING`, `PREDICTOR`,
//! `ANNOTATOR`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::complexity::{
    AnnotationAnalyzer, ComplexityProfiler, HeuristicAnalyzer, HopPredictor, LinearHopPredictor,
    LinguisticAnalyzer, PredictorModel, RemoteAnalyzer, RemoteHopPredictor, SenseLexicon,
};
use crate::domain::{HopLabel, VerifierConfig};
use crate::engine::{Ablation, Engine, EngineSettings, Providers};
use crate::error::{Error, Result};
use crate::exemplars::ExemplarStore;
use crate::planner::PlannerConfig;
use crate::providers::{
    ChatProvider, Embedder, HashingEmbedder, HttpConfig, HttpProvider, ProviderEmbedder,
    RecordSink, RecordingProvider, ReplayProvider,
};
use crate::retrieval::{CorpusIndex, RetrievalConfig};
use crate::templates::TemplateSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingSpec {
    Hashing {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Http(HttpConfig),
}

fn default_dim() -> usize {
    256
}

impl Default for EmbeddingSpec {
    fn default() -> Self {
        EmbeddingSpec::Hashing { dim: default_dim() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorSpec {
    /// Built-in linear model over the four linguistic features.
    #[default]
    Baseline,
    Linear {
        model: PathBuf,
    },
    Http(HttpConfig),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnotatorSpec {
    #[default]
    Heuristic,
    Annotations {
        path: PathBuf,
    },
    Http(HttpConfig),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSpecs {
    pub generator: Option<HttpConfig>,
    pub judge: Option<HttpConfig>,
    pub attribution: Option<HttpConfig>,
    pub embedding: EmbeddingSpec,
    pub predictor: PredictorSpec,
    pub annotator: AnnotatorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub verifier: VerifierConfig,
    pub retrieval: RetrievalConfig,
    pub planner: PlannerConfig,
    pub exemplar_similarity: bool,
    /// Feed the question embedding into the hop predictor.
    pub profile_embedding: bool,
    pub providers: ProviderSpecs,
    pub templates_dir: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
    pub workers: usize,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Default for AppConfig {
    fn default() -> Self {
        let engine = EngineSettings::default();
        Self {
            verifier: engine.verifier,
            retrieval: engine.retrieval,
            planner: engine.planner,
            exemplar_similarity: engine.exemplar_similarity,
            profile_embedding: false,
            providers: ProviderSpecs::default(),
            templates_dir: None,
            lexicon: None,
            exemplars: None,
            workers: 4,
            base_dir: PathBuf::from("."),
        }
    }
}

/// Where chat-style calls are answered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderMode {
    Live,
    Replay(PathBuf),
    Record(PathBuf),
}

/// Everything an [`Engine`] needs apart from the corpus index.
pub struct Components {
    pub providers: Providers,
    pub profiler: ComplexityProfiler,
    pub exemplars: Option<Arc<ExemplarStore>>,
    pub templates: Arc<TemplateSet>,
}

impl Components {
    pub fn into_engine(self, settings: EngineSettings, index: Arc<CorpusIndex>) -> Engine {
        Engine {
            settings,
            profiler: self.profiler,
            exemplars: self.exemplars,
            index,
            templates: self.templates,
            providers: self.providers,
        }
    }
}

impl AppConfig {
    pub fn from_json(input: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: AppConfig =
            serde_json::from_str(input).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.verifier.validate()?;
        if cfg.retrieval.top_k == 0 {
            return Err(Error::Config("retrieval.top_k must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn engine_settings(&self, ablation: Ablation) -> EngineSettings {
        EngineSettings {
            verifier: self.verifier,
            retrieval: self.retrieval,
            planner: self.planner,
            ablation,
            exemplar_similarity: self.exemplar_similarity,
        }
    }

    /// Builds the local or HTTP embedder. HTTP embeddings go through the
    /// same mode as chat roles.
    pub fn embedder(&self, mode: &ProviderMode) -> Result<Arc<dyn Embedder>> {
        let mut wiring = Wiring::new(mode)?;
        self.build_embedder(&mut wiring)
    }

    pub fn build(&self, mode: &ProviderMode) -> Result<Components> {
        let mut wiring = Wiring::new(mode)?;
        let specs = &self.providers;
        let generator = wiring.chat("generator", "GENERATOR", specs.generator.as_ref())?;
        let judge = wiring.chat("judge", "JUDGE", specs.judge.as_ref())?;
        let attributor = wiring.chat("attribution", "ATTRIBUTION", specs.attribution.as_ref())?;
        let embedder = self.build_embedder(&mut wiring)?;

        let analyzer: Arc<dyn LinguisticAnalyzer> = match &specs.annotator {
            AnnotatorSpec::Heuristic => Arc::new(HeuristicAnalyzer),
            AnnotatorSpec::Annotations { path } => {
                Arc::new(AnnotationAnalyzer::load(&self.resolve(path))?)
            }
            AnnotatorSpec::Http(http) => Arc::new(RemoteAnalyzer::new(wiring.chat(
                "annotator",
                "ANNOTATOR",
                Some(http),
            )?)),
        };
        let predictor: Arc<dyn HopPredictor> = match &specs.predictor {
            PredictorSpec::Baseline => Arc::new(LinearHopPredictor::baseline()),
            PredictorSpec::Linear { model } => Arc::new(LinearHopPredictor::new(
                PredictorModel::load(&self.resolve(model))?,
            )?),
            PredictorSpec::Http(http) => Arc::new(RemoteHopPredictor::new(wiring.chat(
                "predictor",
                "PREDICTOR",
                Some(http),
            )?)),
        };
        let lexicon = match &self.lexicon {
            Some(p) => SenseLexicon::load(&self.resolve(p))?,
            None => SenseLexicon::new(),
        };
        let profiler = ComplexityProfiler {
            analyzer,
            lexicon: Arc::new(lexicon),
            predictor,
            embedder: self.profile_embedding.then(|| embedder.clone()),
            fallback_hop: HopLabel::new(2)?,
        };

        let exemplars = match &self.exemplars {
            Some(p) => {
                let mut store = ExemplarStore::load(&self.resolve(p))?;
                if self.exemplar_similarity {
                    store.embed_with(embedder.as_ref())?;
                }
                Some(Arc::new(store))
            }
            None => None,
        };
        let templates = match &self.templates_dir {
            Some(dir) => TemplateSet::with_overrides(&self.resolve(dir))?,
            None => TemplateSet::default(),
        };
        Ok(Components {
            providers: Providers {
                generator,
                judge,
                attributor,
                embedder,
            },
            profiler,
            exemplars,
            templates: Arc::new(templates),
        })
    }

    fn build_embedder(&self, wiring: &mut Wiring) -> Result<Arc<dyn Embedder>> {
        Ok(match &self.providers.embedding {
            EmbeddingSpec::Hashing { dim } => Arc::new(HashingEmbedder::new(*dim)),
            EmbeddingSpec::Http(http) => Arc::new(ProviderEmbedder::new(wiring.chat(
                "embedding",
                "EMBEDDING",
                Some(http),
            )?)),
        })
    }
}

/// Applies the environment overrides for one role.
pub fn with_env_overrides(role_env: &str, spec: Option<&HttpConfig>) -> Option<HttpConfig> {
    let url = std::env::var(format!("PARRAG_{role_env}_URL")).ok();
    let key = std::env::var(format!("PARRAG_{role_env}_API_KEY")).ok();
    let mut cfg = match (spec, url) {
        (Some(s), Some(u)) => HttpConfig {
            url: u,
            ..s.clone()
        },
        (Some(s), None) => s.clone(),
        (None, Some(u)) => HttpConfig::new(u),
        (None, None) => return None,
    };
    if key.is_some() {
        cfg.api_key = key;
    }
    Some(cfg)
}

struct Wiring {
    replay: Option<Arc<ReplayProvider>>,
    sink: Option<Arc<RecordSink>>,
}

impl Wiring {
    fn new(mode: &ProviderMode) -> Result<Self> {
        Ok(match mode {
            ProviderMode::Live => Self {
                replay: None,
                sink: None,
            },
            ProviderMode::Replay(path) => Self {
                replay: Some(Arc::new(ReplayProvider::load(path)?)),
                sink: None,
            },
            ProviderMode::Record(path) => Self {
                replay: None,
                sink: Some(RecordSink::create(path)?),
            },
        })
    }

    fn chat(
        &mut self,
        role: &str,
        role_env: &str,
        spec: Option<&HttpConfig>,
    ) -> Result<Arc<dyn ChatProvider>> {
        if let Some(replay) = &self.replay {
            return Ok(replay.clone());
        }
        let http = with_env_overrides(role_env, spec).ok_or_else(|| {
            Error::Config(format!(
                "no endpoint for {role}; set providers.{role} or PARRAG_{role_env}_URL"
            ))
        })?;
        let provider = HttpProvider::new(role, http)?;
        Ok(match &self.sink {
            Some(sink) => Arc::new(RecordingProvider::new(provider, sink.clone())),
            None => Arc::new(provider),
        })
    }
}
