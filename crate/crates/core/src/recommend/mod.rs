//! The recommendation pipeline: project indexes to community-scoped metric
//! candidates, filtered recommendations with collection methods, prior
//! outcomes, incident risks, and the generated plan and outcome statement.

mod export;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, IndexSet, MetricMethod, OutcomeRef, RiskRef};
use crate::embed::{EmbedError, Embedder, VectorIndex};
use crate::graph::{build_graph, CommunityAssignment, EdgeWeightConfig, GraphError, KnowledgeGraph};
use crate::llm::{
    self, FilteredRisk, Llm, LlmError, PlanMetric, RiskCandidate, StageWarning, UxOutcome,
};

pub use export::{ComponentVersions, ExportArtifact, ProjectInputs, ProjectStatus, EXPORT_SCHEMA};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecommendError {
    #[error("embedding: {0}")]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
}

impl RecommendError {
    /// Pipeline stage the error came from.
    pub fn stage(&self) -> String {
        match self {
            RecommendError::Embed(_) => "retrieval".into(),
            RecommendError::Graph(_) => "graph".into(),
            RecommendError::Llm(LlmError::UnparseableOutput { stage, .. }) => stage.to_string(),
            RecommendError::Llm(_) => "llm".into(),
        }
    }
}

/// Incident distance gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    /// Incidents must lie strictly closer than this Euclidean distance.
    pub threshold: f64,
    pub top_k: usize,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            threshold: 0.5,
            top_k: 3,
        }
    }
}

/// Everything the pipeline reads: corpus, graph with communities, vector
/// indexes, and the model client. Immutable once built.
pub struct Engine {
    pub graph: Arc<KnowledgeGraph>,
    pub communities: CommunityAssignment,
    pub paper_index: VectorIndex,
    pub incident_index: VectorIndex,
    pub embedder: Arc<dyn Embedder>,
    pub llm: Llm,
    pub risk: RiskConfig,
}

impl Engine {
    pub fn build(
        corpus: Arc<Corpus>,
        edge_config: &EdgeWeightConfig,
        embedder: Arc<dyn Embedder>,
        llm: Llm,
        risk: RiskConfig,
    ) -> Result<Engine, RecommendError> {
        let graph = build_graph(corpus.clone(), edge_config, embedder.as_ref())?;
        let communities = graph.detect_communities();
        let paper_index = VectorIndex::build(
            embedder.as_ref(),
            corpus.papers().iter().map(|p| (p.id.as_str(), p.retrieval_text())),
        )?;
        let incident_index = VectorIndex::build(
            embedder.as_ref(),
            corpus
                .incidents()
                .iter()
                .map(|i| (i.id.as_str(), i.system_description.clone())),
        )?;
        Ok(Engine {
            graph: Arc::new(graph),
            communities,
            paper_index,
            incident_index,
            embedder,
            llm,
            risk,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        self.graph.corpus()
    }
}

/// Retrieval query text: the description followed by the canonical index
/// serialization, the same layout as [`crate::corpus::PaperRecord::retrieval_text`].
pub fn query_text(description: &str, indexes: &IndexSet) -> String {
    format!("{description}\n{}", indexes.canonical_text())
}

/// How one prior paper used a metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricUsage {
    pub paper_id: String,
    pub paper_title: String,
    pub metric_method: MetricMethod,
    pub metric_usage: String,
    pub outcome_achieved: String,
    pub citation_reason: String,
    pub metric_challenges: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendedMetric {
    pub name: String,
    pub definition: String,
    pub methods: Vec<MetricMethod>,
    pub usages: Vec<MetricUsage>,
}

impl RecommendedMetric {
    pub fn plan_metric(&self) -> PlanMetric {
        PlanMetric {
            name: self.name.clone(),
            definition: self.definition.clone(),
            methods: self.methods.clone(),
            usages: self.usages.iter().map(|u| u.metric_usage.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricRecommendation {
    pub metrics: Vec<RecommendedMetric>,
    pub source_paper: String,
    pub source_community: usize,
    /// The community's metric union that was offered to the filter.
    pub candidates: BTreeSet<String>,
}

impl MetricRecommendation {
    pub fn names(&self) -> BTreeSet<String> {
        self.metrics.iter().map(|m| m.name.clone()).collect()
    }
}

/// Definition, collection methods and usages of `name` across the whole corpus.
pub fn describe_metric(graph: &KnowledgeGraph, name: &str) -> RecommendedMetric {
    let corpus = graph.corpus();
    let mut usages = Vec::new();
    for id in graph.paper_ids() {
        let Some(paper) = corpus.paper(id) else { continue };
        for o in paper.outcomes.iter().filter(|o| o.metric == name) {
            usages.push(MetricUsage {
                paper_id: paper.id.clone(),
                paper_title: paper.title.clone(),
                metric_method: o.metric_method,
                metric_usage: o.metric_usage.clone(),
                outcome_achieved: o.outcome_achieved.clone(),
                citation_reason: o.citation_reason.clone(),
                metric_challenges: o.metric_challenges.clone(),
            });
        }
    }
    let methods: BTreeSet<MetricMethod> = usages.iter().map(|u| u.metric_method).collect();
    RecommendedMetric {
        name: name.to_string(),
        definition: corpus
            .metrics()
            .get(name)
            .map(|r| r.definition.clone())
            .unwrap_or_default(),
        methods: methods.into_iter().collect(),
        usages,
    }
}

/// Nearest paper, its community's metrics, then the model's filtered pick.
pub fn recommend_metrics(
    engine: &Engine,
    description: &str,
    indexes: &IndexSet,
) -> Result<(MetricRecommendation, Vec<StageWarning>), RecommendError> {
    let query = engine.embedder.embed(&query_text(description, indexes))?;
    let (source_paper, _) = engine
        .paper_index
        .nearest(&query, 1)?
        .into_iter()
        .next()
        .ok_or(EmbedError::EmptyIndex)?;
    let source_community = engine.communities.community_of[&source_paper];
    let candidates = engine
        .graph
        .community_metrics(&engine.communities, source_community)?;
    let (names, warnings) = llm::filter_metrics(
        &engine.llm,
        &candidates,
        description,
        indexes,
        engine.corpus().metrics(),
    )?;
    let metrics = names.iter().map(|n| describe_metric(&engine.graph, n)).collect();
    Ok((
        MetricRecommendation {
            metrics,
            source_paper,
            source_community,
            candidates,
        },
        warnings,
    ))
}

/// Added, retained and removed metrics between two recommendations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricDiff {
    pub added: BTreeSet<String>,
    pub retained: BTreeSet<String>,
    pub removed: BTreeSet<String>,
}

pub fn diff_metrics(old: &BTreeSet<String>, new: &BTreeSet<String>) -> MetricDiff {
    MetricDiff {
        added: new.difference(old).cloned().collect(),
        retained: new.intersection(old).cloned().collect(),
        removed: old.difference(new).cloned().collect(),
    }
}

/// A prior finding from a paper measuring at least one selected metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeView {
    pub outcome_ref: OutcomeRef,
    pub outcome_achieved: String,
    pub paper_id: String,
    pub paper_title: String,
    /// Selected metrics the paper measures.
    pub associated_metrics: Vec<String>,
}

/// Outcomes of every paper measuring a selected metric, one per distinct
/// (paper, text), most cross-cutting first, then by paper id.
pub fn outcomes_for(selected: &BTreeSet<String>, graph: &KnowledgeGraph) -> Vec<OutcomeView> {
    let mut out = Vec::new();
    for id in graph.paper_ids() {
        let Some(paper) = graph.paper(id) else { continue };
        let associated: Vec<String> = paper.metrics.intersection(selected).cloned().collect();
        if associated.is_empty() {
            continue;
        }
        let mut seen = BTreeSet::new();
        for (i, o) in paper.outcomes.iter().enumerate() {
            if !seen.insert(o.outcome_achieved.as_str()) {
                continue;
            }
            out.push(OutcomeView {
                outcome_ref: OutcomeRef {
                    paper_id: paper.id.clone(),
                    outcome_index: i,
                },
                outcome_achieved: o.outcome_achieved.clone(),
                paper_id: paper.id.clone(),
                paper_title: paper.title.clone(),
                associated_metrics: associated.clone(),
            });
        }
    }
    out.sort_by(|a, b| {
        b.associated_metrics
            .len()
            .cmp(&a.associated_metrics.len())
            .then_with(|| a.paper_id.cmp(&b.paper_id))
    });
    out
}

/// Risk candidates from the closest incidents within the distance gate.
pub fn risk_candidates(engine: &Engine, description: &str) -> Result<Vec<RiskCandidate>, RecommendError> {
    if engine.incident_index.is_empty() {
        return Ok(Vec::new());
    }
    let query = engine.embedder.embed(description)?;
    let hits = engine
        .incident_index
        .within_distance(&query, engine.risk.threshold, engine.risk.top_k)?;
    let mut out = Vec::new();
    for (id, _) in hits {
        let Some(incident) = engine.corpus().incident(&id) else { continue };
        for (i, risk) in incident.risks.iter().enumerate() {
            out.push(RiskCandidate {
                risk_ref: RiskRef {
                    incident_id: incident.id.clone(),
                    risk_index: i,
                },
                risk: risk.clone(),
                source_url: incident.source_url.clone(),
            });
        }
    }
    Ok(out)
}

/// Gated incident risks, filtered for relevance by the model.
pub fn risks_for(
    engine: &Engine,
    description: &str,
) -> Result<(Vec<FilteredRisk>, Vec<StageWarning>), RecommendError> {
    let candidates = risk_candidates(engine, description)?;
    Ok(llm::filter_risks(&engine.llm, &candidates, description)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricNode {
    pub metric: String,
    pub usage_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricEdge {
    pub metric_a: String,
    pub metric_b: String,
    pub cooccurrence_count: usize,
}

/// Metric co-occurrence view; counts are over the whole corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricGraphView {
    pub nodes: Vec<MetricNode>,
    pub edges: Vec<MetricEdge>,
}

pub fn build_metric_graph_view(metrics: &BTreeSet<String>, graph: &KnowledgeGraph) -> MetricGraphView {
    let mut usage: BTreeMap<&str, usize> = metrics.iter().map(|m| (m.as_str(), 0)).collect();
    let mut pairs: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for id in graph.paper_ids() {
        let Some(paper) = graph.paper(id) else { continue };
        let present: Vec<&str> = metrics
            .iter()
            .filter(|m| paper.metrics.contains(*m))
            .map(String::as_str)
            .collect();
        for (i, a) in present.iter().enumerate() {
            *usage.get_mut(a).expect("metric present") += 1;
            for b in &present[i + 1..] {
                *pairs.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    MetricGraphView {
        nodes: usage
            .into_iter()
            .map(|(m, n)| MetricNode {
                metric: m.to_string(),
                usage_count: n,
            })
            .collect(),
        edges: pairs
            .into_iter()
            .map(|((a, b), n)| MetricEdge {
                metric_a: a.to_string(),
                metric_b: b.to_string(),
                cooccurrence_count: n,
            })
            .collect(),
    }
}

/// The generated evaluation plan and UX outcome statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generated {
    pub plan: String,
    pub ux_outcome: UxOutcome,
}

/// Writes the plan and outcome statement for the selected metrics,
/// outcomes and risks.
pub fn generate_artifacts(
    engine: &Engine,
    inputs: &ProjectInputs,
    cart: &[RecommendedMetric],
    outcomes: &[OutcomeView],
    risks: &[FilteredRisk],
) -> Result<(Generated, Vec<StageWarning>), RecommendError> {
    let plan_metrics: Vec<PlanMetric> = cart.iter().map(RecommendedMetric::plan_metric).collect();
    let outcome_texts: Vec<String> = outcomes.iter().map(|o| o.outcome_achieved.clone()).collect();
    let (plan, warnings) = llm::generate_plan(
        &engine.llm,
        &inputs.description,
        &inputs.initial_plan,
        &plan_metrics,
        &outcome_texts,
    )?;
    let names: Vec<String> = cart.iter().map(|m| m.name.clone()).collect();
    let outcome_pairs: Vec<(OutcomeRef, String)> = outcomes
        .iter()
        .map(|o| (o.outcome_ref.clone(), o.outcome_achieved.clone()))
        .collect();
    let risk_pairs: Vec<(RiskRef, String)> =
        risks.iter().map(|r| (r.risk_ref.clone(), r.risk.clone())).collect();
    let ux_outcome = llm::generate_ux_outcome(
        &engine.llm,
        &inputs.description,
        &inputs.initial_outcome,
        &names,
        &outcome_pairs,
        &risk_pairs,
    )?;
    Ok((Generated { plan, ux_outcome }, warnings))
}

/// One-shot run: indexes (generated unless given), recommendation, then
/// the whole recommendation as cart with every outcome and risk selected.
pub fn run_pipeline(
    engine: &Engine,
    inputs: &ProjectInputs,
    indexes: Option<IndexSet>,
) -> Result<(ExportArtifact, Vec<StageWarning>), RecommendError> {
    let mut warnings = Vec::new();
    let indexes = match indexes {
        Some(i) => i,
        None => {
            let (i, w) = llm::generate_indexes(&engine.llm, &inputs.description, &[])?;
            warnings.extend(w);
            i
        }
    };
    let (recommendation, w) = recommend_metrics(engine, &inputs.description, &indexes)?;
    warnings.extend(w);
    let cart = recommendation.metrics.clone();
    let outcomes = outcomes_for(&recommendation.names(), &engine.graph);
    let (risks, w) = risks_for(engine, &inputs.description)?;
    warnings.extend(w);
    let (generated, w) = generate_artifacts(engine, inputs, &cart, &outcomes, &risks)?;
    warnings.extend(w);
    let artifact = ExportArtifact::new(
        inputs.clone(),
        indexes,
        cart,
        outcomes,
        risks,
        Some(generated),
        Vec::new(),
    );
    Ok((artifact, warnings))
}
