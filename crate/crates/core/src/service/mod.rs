//! Project sessions over the recommendation pipeline: creation, index
//! regeneration with diffs, the metric cart, outcome and risk selection,
//! generation and export. Sessions persist as JSON files; the HTTP API in
//! [`http`] is a thin layer over [`ProjectService`].

mod config;
pub mod http;
mod store;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::corpus::{load_corpus, CorpusError, IndexSet, OutcomeRef, RiskRef};
use crate::llm::{self, FilteredRisk, Llm, StageWarning};
use crate::recommend::{
    build_metric_graph_view, describe_metric, diff_metrics, generate_artifacts, outcomes_for,
    recommend_metrics, risks_for, Engine, ExportArtifact, Generated, MetricDiff, MetricGraphView,
    MetricRecommendation, OutcomeView, ProjectInputs, RecommendError,
};

pub use config::{CartPolicy, ConfigError, ServiceConfig};
pub use store::JsonStore;

/// Number of corpus papers whose indexes are shown to the model as examples.
const INDEX_EXAMPLES: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    Validation(String),
    #[error("project `{0}` not found")]
    NotFound(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("outcome {0} is not among this project's outcomes")]
    UnknownOutcome(OutcomeRef),
    #[error("risk {0} is not among this project's risks")]
    UnknownRisk(RiskRef),
    #[error("the metric cart is empty")]
    EmptyCart,
    #[error(transparent)]
    Pipeline(#[from] RecommendError),
    #[error("storage: {0}")]
    Storage(#[from] std::io::Error),
    #[error("startup: {0}")]
    Startup(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Validation(_) => "validation_error",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::UnknownMetric(_) => "unknown_metric",
            ServiceError::UnknownOutcome(_) => "unknown_outcome",
            ServiceError::UnknownRisk(_) => "unknown_risk",
            ServiceError::EmptyCart => "empty_cart",
            ServiceError::Pipeline(RecommendError::Llm(llm::LlmError::Unavailable(_))) => "llm_unavailable",
            ServiceError::Pipeline(RecommendError::Llm(llm::LlmError::UnparseableOutput { .. })) => {
                "unparseable_llm_output"
            }
            ServiceError::Pipeline(_) => "pipeline_error",
            ServiceError::Storage(_) => "storage_error",
            ServiceError::Startup(_) => "startup_error",
        }
    }

    pub fn stage(&self) -> Option<String> {
        match self {
            ServiceError::Pipeline(e) => Some(e.stage()),
            _ => None,
        }
    }
}

impl From<llm::LlmError> for ServiceError {
    fn from(e: llm::LlmError) -> Self {
        ServiceError::Pipeline(e.into())
    }
}

/// Where a project stands.
pub use crate::recommend::ProjectStatus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSession {
    pub id: String,
    pub inputs: ProjectInputs,
    pub current_indexes: IndexSet,
    /// Values suggested for each category that are not yet selected.
    pub suggestions: IndexSet,
    pub current_recommendation: Option<MetricRecommendation>,
    pub cart: BTreeSet<String>,
    pub selected_outcomes: BTreeSet<OutcomeRef>,
    pub accepted_risks: BTreeSet<RiskRef>,
    pub generated: Option<Generated>,
    pub diff_history: Vec<MetricDiff>,
    /// Warnings raised by the most recent pipeline operation.
    pub warnings: Vec<StageWarning>,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub name: String,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regenerated {
    pub recommendation: MetricRecommendation,
    pub diff: MetricDiff,
    pub revision: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Markdown,
}

/// Session operations. Sessions are mutated under a per-session lock by
/// cloning, applying the change, persisting, and only then committing, so
/// a failed operation leaves the stored session untouched.
pub struct ProjectService {
    engine: Arc<Engine>,
    sessions: JsonStore,
    risk_cache: JsonStore,
    cart_policy: CartPolicy,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl ProjectService {
    pub fn new(engine: Arc<Engine>, session_dir: &std::path::Path, cart_policy: CartPolicy) -> Result<Self, ServiceError> {
        Ok(ProjectService {
            engine,
            sessions: JsonStore::open(session_dir.join("sessions"))?,
            risk_cache: JsonStore::open(session_dir.join("risk-cache"))?,
            cart_policy,
            locks: Mutex::new(HashMap::new()),
        })
    }

    /// Loads the corpus and builds the engine described by `cfg`.
    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        let corpus = load_corpus(&cfg.corpus_paths())
            .map_err(|e: CorpusError| ServiceError::Startup(e.to_string()))?;
        let embedder = cfg
            .embedding
            .build()
            .map_err(|e| ServiceError::Startup(e.to_string()))?;
        let llm = Llm::from_config(&cfg.llm).map_err(|e| ServiceError::Startup(e.to_string()))?;
        let engine = Engine::build(Arc::new(corpus), &cfg.edge_weights, embedder, llm, cfg.risk.clone())?;
        ProjectService::new(Arc::new(engine), &cfg.session_dir, cfg.cart_policy)
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    pub fn get(&self, id: &str) -> Result<ProjectSession, ServiceError> {
        if !is_valid_id(id) {
            return Err(ServiceError::NotFound(id.to_string()));
        }
        self.sessions
            .load(id)?
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn list(&self) -> Result<Vec<SessionSummary>, ServiceError> {
        let mut out = Vec::new();
        for key in self.sessions.keys()? {
            if let Some(s) = self.sessions.load::<ProjectSession>(&key)? {
                out.push(SessionSummary {
                    id: s.id,
                    name: s.inputs.name,
                    revision: s.revision,
                });
            }
        }
        Ok(out)
    }

    /// Applies `f` to a copy of the session and persists it when `f`
    /// reports a change. The revision grows by one per persisted change.
    fn mutate<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut ProjectSession) -> Result<(T, bool), ServiceError>,
    ) -> Result<(T, ProjectSession), ServiceError> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.get(id)?;
        let mut next = current.clone();
        let (value, changed) = f(&mut next)?;
        if !changed {
            return Ok((value, current));
        }
        next.revision = current.revision + 1;
        self.sessions.save(id, &next)?;
        Ok((value, next))
    }

    fn index_examples(&self) -> Vec<IndexSet> {
        let corpus = self.engine.corpus();
        self.engine
            .graph
            .paper_ids()
            .iter()
            .filter_map(|id| corpus.paper(id))
            .take(INDEX_EXAMPLES)
            .map(|p| p.indexes.clone())
            .collect()
    }

    /// Creates a project: generates indexes and suggestions, then the first
    /// recommendation. Persisted before returning.
    pub fn create(&self, inputs: ProjectInputs) -> Result<ProjectSession, ServiceError> {
        if inputs.description.trim().is_empty() {
            return Err(ServiceError::Validation("description must not be empty".into()));
        }
        let llm = &self.engine.llm;
        let mut warnings = Vec::new();
        let (indexes, w) = llm::generate_indexes(llm, &inputs.description, &self.index_examples())?;
        warnings.extend(w);
        let (suggestions, w) = llm::suggest_index_values(llm, &indexes, &inputs.description)?;
        warnings.extend(w);
        let (recommendation, w) = recommend_metrics(&self.engine, &inputs.description, &indexes)?;
        warnings.extend(w);

        let session = ProjectSession {
            id: uuid::Uuid::new_v4().simple().to_string(),
            inputs,
            current_indexes: indexes,
            suggestions,
            current_recommendation: Some(recommendation),
            cart: BTreeSet::new(),
            selected_outcomes: BTreeSet::new(),
            accepted_risks: BTreeSet::new(),
            generated: None,
            diff_history: Vec::new(),
            warnings,
            revision: 1,
        };
        let lock = self.lock_for(&session.id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        self.sessions.save(&session.id, &session)?;
        Ok(session)
    }

    /// Reruns the recommendation with `edited` indexes (or the current ones)
    /// and records the diff against the previous recommendation.
    pub fn regenerate(&self, id: &str, edited: Option<IndexSet>) -> Result<Regenerated, ServiceError> {
        if let Some(bad) = edited.as_ref().map(|i| i.invalid_paradigms()).filter(|b| !b.is_empty()) {
            return Err(ServiceError::Validation(format!(
                "paradigm values must be Dyadic or Polyadic, got {bad:?}"
            )));
        }
        let (out, _) = self.mutate(id, |s| {
            let indexes = edited.unwrap_or_else(|| s.current_indexes.clone());
            let (recommendation, warnings) = recommend_metrics(&self.engine, &s.inputs.description, &indexes)?;
            let old = s
                .current_recommendation
                .as_ref()
                .map(MetricRecommendation::names)
                .unwrap_or_default();
            let diff = diff_metrics(&old, &recommendation.names());
            s.current_indexes = indexes;
            s.current_recommendation = Some(recommendation.clone());
            s.diff_history.push(diff.clone());
            s.warnings = warnings;
            Ok(((recommendation, diff), true))
        })?;
        let session = self.get(id)?;
        Ok(Regenerated {
            recommendation: out.0,
            diff: out.1,
            revision: session.revision,
        })
    }

    fn resolve_metric(&self, session: &ProjectSession, metric: &str) -> Result<String, ServiceError> {
        let canonical = self
            .engine
            .corpus()
            .metrics()
            .canonicalize(metric)
            .ok_or_else(|| ServiceError::UnknownMetric(metric.to_string()))?
            .to_string();
        if self.cart_policy == CartPolicy::Recommendation {
            let recommended = session
                .current_recommendation
                .as_ref()
                .is_some_and(|r| r.metrics.iter().any(|m| m.name == canonical));
            if !recommended && !session.cart.contains(&canonical) {
                return Err(ServiceError::UnknownMetric(metric.to_string()));
            }
        }
        Ok(canonical)
    }

    /// Keeps only selected outcomes that are still offered for the cart.
    fn prune_outcomes(&self, s: &mut ProjectSession) {
        let offered: BTreeSet<OutcomeRef> = outcomes_for(&s.cart, &self.engine.graph)
            .into_iter()
            .map(|o| o.outcome_ref)
            .collect();
        s.selected_outcomes.retain(|r| offered.contains(r));
    }

    pub fn cart_add(&self, id: &str, metric: &str) -> Result<ProjectSession, ServiceError> {
        Ok(self
            .mutate(id, |s| {
                let m = self.resolve_metric(s, metric)?;
                Ok(((), s.cart.insert(m)))
            })?
            .1)
    }

    pub fn cart_remove(&self, id: &str, metric: &str) -> Result<ProjectSession, ServiceError> {
        Ok(self
            .mutate(id, |s| {
                let m = self
                    .engine
                    .corpus()
                    .metrics()
                    .canonicalize(metric)
                    .ok_or_else(|| ServiceError::UnknownMetric(metric.to_string()))?
                    .to_string();
                let removed = s.cart.remove(&m);
                if removed {
                    self.prune_outcomes(s);
                }
                Ok(((), removed))
            })?
            .1)
    }

    /// Prior outcomes for the current cart.
    pub fn outcomes(&self, id: &str) -> Result<Vec<OutcomeView>, ServiceError> {
        let s = self.get(id)?;
        Ok(outcomes_for(&s.cart, &self.engine.graph))
    }

    pub fn select_outcome(&self, id: &str, outcome: &OutcomeRef, selected: bool) -> Result<ProjectSession, ServiceError> {
        Ok(self
            .mutate(id, |s| {
                let offered = outcomes_for(&s.cart, &self.engine.graph)
                    .iter()
                    .any(|o| &o.outcome_ref == outcome);
                if !offered {
                    return Err(ServiceError::UnknownOutcome(outcome.clone()));
                }
                let changed = if selected {
                    s.selected_outcomes.insert(outcome.clone())
                } else {
                    s.selected_outcomes.remove(outcome)
                };
                Ok(((), changed))
            })?
            .1)
    }

    /// Risks for the session's description, computed once per distinct
    /// description and cached on disk.
    pub fn risks(&self, id: &str) -> Result<Vec<FilteredRisk>, ServiceError> {
        let s = self.get(id)?;
        self.risks_for_description(&s.inputs.description)
    }

    fn risks_for_description(&self, description: &str) -> Result<Vec<FilteredRisk>, ServiceError> {
        let key = crate::util::sha256_hex(description.as_bytes());
        if let Some(cached) = self.risk_cache.load::<Vec<FilteredRisk>>(&key)? {
            return Ok(cached);
        }
        let (risks, _) = risks_for(&self.engine, description)?;
        self.risk_cache.save(&key, &risks)?;
        Ok(risks)
    }

    pub fn accept_risk(&self, id: &str, risk: &RiskRef, accepted: bool) -> Result<ProjectSession, ServiceError> {
        let s = self.get(id)?;
        let risks = self.risks_for_description(&s.inputs.description)?;
        if !risks.iter().any(|r| &r.risk_ref == risk) {
            return Err(ServiceError::UnknownRisk(risk.clone()));
        }
        Ok(self
            .mutate(id, |s| {
                let changed = if accepted {
                    s.accepted_risks.insert(risk.clone())
                } else {
                    s.accepted_risks.remove(risk)
                };
                Ok(((), changed))
            })?
            .1)
    }

    pub fn metric_graph_view(&self, id: &str) -> Result<MetricGraphView, ServiceError> {
        let s = self.get(id)?;
        let mut metrics = s
            .current_recommendation
            .as_ref()
            .map(MetricRecommendation::names)
            .unwrap_or_default();
        metrics.extend(s.cart.iter().cloned());
        Ok(build_metric_graph_view(&metrics, &self.engine.graph))
    }

    fn selected_views(&self, s: &ProjectSession) -> Vec<OutcomeView> {
        outcomes_for(&s.cart, &self.engine.graph)
            .into_iter()
            .filter(|o| s.selected_outcomes.contains(&o.outcome_ref))
            .collect()
    }

    fn accepted(&self, s: &ProjectSession) -> Result<Vec<FilteredRisk>, ServiceError> {
        if s.accepted_risks.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self
            .risks_for_description(&s.inputs.description)?
            .into_iter()
            .filter(|r| s.accepted_risks.contains(&r.risk_ref))
            .collect())
    }

    /// Writes the evaluation plan and UX outcome for the cart.
    pub fn generate(&self, id: &str) -> Result<(Generated, ProjectSession), ServiceError> {
        let snapshot = self.get(id)?;
        if snapshot.cart.is_empty() {
            return Err(ServiceError::EmptyCart);
        }
        let risks = self.accepted(&snapshot)?;
        self.mutate(id, |s| {
            if s.cart.is_empty() {
                return Err(ServiceError::EmptyCart);
            }
            let cart: Vec<_> = s.cart.iter().map(|m| describe_metric(&self.engine.graph, m)).collect();
            let outcomes = self.selected_views(s);
            let (generated, warnings) = generate_artifacts(&self.engine, &s.inputs, &cart, &outcomes, &risks)?;
            s.generated = Some(generated.clone());
            s.warnings = warnings;
            Ok((generated, true))
        })
    }

    pub fn artifact(&self, id: &str) -> Result<ExportArtifact, ServiceError> {
        let s = self.get(id)?;
        let metrics = s.cart.iter().map(|m| describe_metric(&self.engine.graph, m)).collect();
        Ok(ExportArtifact::new(
            s.inputs.clone(),
            s.current_indexes.clone(),
            metrics,
            self.selected_views(&s),
            self.accepted(&s)?,
            s.generated.clone(),
            s.diff_history.clone(),
        ))
    }

    pub fn export(&self, id: &str, format: ExportFormat) -> Result<String, ServiceError> {
        let artifact = self.artifact(id)?;
        Ok(match format {
            ExportFormat::Json => artifact.to_json(),
            ExportFormat::Markdown => artifact.to_markdown(),
        })
    }
}

/// Session ids are generated hex strings; anything else cannot name a file.
fn is_valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-')
}
