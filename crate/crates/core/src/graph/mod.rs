//! The knowledge graph over papers, metrics and outcomes, and community
//! detection over its weighted paper-paper edges.

mod louvain;
mod weights;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, IndexCategory, OutcomeRecord, OutcomeRef, PaperRecord};
use crate::embed::{EmbedError, Embedder};

pub use louvain::{louvain, modularity as graph_modularity, relabel, WeightedGraph, LOUVAIN_EPSILON};
pub use weights::{
    compute_edge_weight, shared_metrics, EdgeWeightConfig, IndexSimilarity, IndexSimilarityScorer,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("no similarity score for index category `{0}`")]
    MissingCategorySimilarity(IndexCategory),
    #[error("invalid edge weight configuration: {0}")]
    InvalidConfig(String),
    #[error("partition does not match the graph: {0}")]
    PartitionMismatch(String),
    #[error("unknown community {0}")]
    UnknownCommunity(usize),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeKind {
    SharedMetric,
    Cites,
    CitedBy,
}

/// A weighted paper-paper edge. Shared-metric edges are stored once with
/// `a < b`; citation edges are directed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperEdge {
    pub a: String,
    pub b: String,
    pub kind: EdgeKind,
    pub weight: f64,
}

/// Unweighted edges linking papers to metrics and metrics to outcomes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StructuralEdge {
    HasMetric { paper: String, metric: String },
    HasOutcome { metric: String, outcome: OutcomeRef },
}

/// Partition of the paper nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityAssignment {
    pub community_of: BTreeMap<String, usize>,
    pub modularity: f64,
}

impl CommunityAssignment {
    pub fn community_count(&self) -> usize {
        self.community_of.values().max().map_or(0, |m| m + 1)
    }

    pub fn members(&self, community: usize) -> Vec<&str> {
        self.community_of
            .iter()
            .filter(|(_, &c)| c == community)
            .map(|(p, _)| p.as_str())
            .collect()
    }
}

/// Immutable after build; cheap to share behind an `Arc`.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    corpus: Arc<Corpus>,
    config: EdgeWeightConfig,
    /// Paper ids in ascending order; node `i` of the weighted view is `paper_ids[i]`.
    paper_ids: Vec<String>,
    metric_nodes: BTreeSet<String>,
    outcome_nodes: Vec<OutcomeRef>,
    paper_edges: Vec<PaperEdge>,
    structural_edges: Vec<StructuralEdge>,
}

impl KnowledgeGraph {
    pub fn corpus(&self) -> &Arc<Corpus> {
        &self.corpus
    }

    pub fn config(&self) -> &EdgeWeightConfig {
        &self.config
    }

    pub fn paper_ids(&self) -> &[String] {
        &self.paper_ids
    }

    pub fn paper(&self, id: &str) -> Option<&PaperRecord> {
        self.corpus.paper(id)
    }

    pub fn metric_nodes(&self) -> &BTreeSet<String> {
        &self.metric_nodes
    }

    pub fn outcome_nodes(&self) -> &[OutcomeRef] {
        &self.outcome_nodes
    }

    pub fn outcome(&self, r: &OutcomeRef) -> Option<&OutcomeRecord> {
        self.paper(&r.paper_id)?.outcomes.get(r.outcome_index)
    }

    pub fn paper_edges(&self) -> &[PaperEdge] {
        &self.paper_edges
    }

    pub fn structural_edges(&self) -> &[StructuralEdge] {
        &self.structural_edges
    }

    /// Papers linked to `metric` through HAS_METRIC, in id order.
    pub fn papers_with_metric(&self, metric: &str) -> Vec<&PaperRecord> {
        self.paper_ids
            .iter()
            .filter_map(|id| self.paper(id))
            .filter(|p| p.metrics.contains(metric))
            .collect()
    }

    /// The paper-paper edges folded into one undirected weight per pair.
    pub fn weighted_view(&self) -> WeightedGraph {
        let index: BTreeMap<&str, usize> = self
            .paper_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut g = WeightedGraph::new(self.paper_ids.len());
        for e in &self.paper_edges {
            g.add_edge(index[e.a.as_str()], index[e.b.as_str()], e.weight);
        }
        g
    }

    fn labels(&self, partition: &CommunityAssignment) -> Result<Vec<usize>, GraphError> {
        if partition.community_of.len() != self.paper_ids.len() {
            return Err(GraphError::PartitionMismatch(format!(
                "partition covers {} papers, graph has {}",
                partition.community_of.len(),
                self.paper_ids.len()
            )));
        }
        self.paper_ids
            .iter()
            .map(|id| {
                partition
                    .community_of
                    .get(id)
                    .copied()
                    .ok_or_else(|| GraphError::PartitionMismatch(format!("paper `{id}` is unassigned")))
            })
            .collect()
    }

    /// Weighted Newman-Girvan modularity of `partition`.
    pub fn modularity(&self, partition: &CommunityAssignment) -> Result<f64, GraphError> {
        let labels = self.labels(partition)?;
        Ok(graph_modularity(&self.weighted_view(), &labels))
    }

    pub fn detect_communities(&self) -> CommunityAssignment {
        let (labels, modularity) = louvain(&self.weighted_view());
        CommunityAssignment {
            community_of: self.paper_ids.iter().cloned().zip(labels).collect(),
            modularity,
        }
    }

    /// Union of the metrics of every paper in `community`.
    pub fn community_metrics(
        &self,
        assignment: &CommunityAssignment,
        community: usize,
    ) -> Result<BTreeSet<String>, GraphError> {
        let members = assignment.members(community);
        if members.is_empty() {
            return Err(GraphError::UnknownCommunity(community));
        }
        Ok(members
            .into_iter()
            .filter_map(|id| self.paper(id))
            .flat_map(|p| p.metrics.iter().cloned())
            .collect())
    }

    /// `graph.json`: nodes, edges with weights and, optionally, communities.
    pub fn to_json(&self, communities: Option<&CommunityAssignment>) -> String {
        #[derive(Serialize)]
        struct PaperNode<'a> {
            id: &'a str,
            title: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            community: Option<usize>,
        }
        #[derive(Serialize)]
        struct Export<'a> {
            schema: u32,
            config: &'a EdgeWeightConfig,
            papers: Vec<PaperNode<'a>>,
            metrics: &'a BTreeSet<String>,
            outcomes: &'a [OutcomeRef],
            paper_edges: &'a [PaperEdge],
            structural_edges: &'a [StructuralEdge],
            #[serde(skip_serializing_if = "Option::is_none")]
            modularity: Option<f64>,
        }
        let export = Export {
            schema: crate::corpus::SCHEMA_VERSION,
            config: &self.config,
            papers: self
                .paper_ids
                .iter()
                .filter_map(|id| self.paper(id))
                .map(|p| PaperNode {
                    id: &p.id,
                    title: &p.title,
                    community: communities.and_then(|c| c.community_of.get(&p.id).copied()),
                })
                .collect(),
            metrics: &self.metric_nodes,
            outcomes: &self.outcome_nodes,
            paper_edges: &self.paper_edges,
            structural_edges: &self.structural_edges,
            modularity: communities.map(|c| c.modularity),
        };
        let mut s = serde_json::to_string_pretty(&export).expect("graph serializes");
        s.push('\n');
        s
    }

    /// Paper-level DOT rendering. CITED_BY mirrors CITES and is left out.
    pub fn to_dot(&self, communities: Option<&CommunityAssignment>) -> String {
        let mut s = String::from("digraph knowledge_graph {\n  node [shape=box];\n");
        for id in &self.paper_ids {
            let title = self.paper(id).map_or("", |p| p.title.as_str());
            let group = communities
                .and_then(|c| c.community_of.get(id))
                .map(|c| format!(", group={c}"))
                .unwrap_or_default();
            let _ = writeln!(s, "  {} [label={}{group}];", dot_id(id), dot_id(title));
        }
        for e in &self.paper_edges {
            let style = match e.kind {
                EdgeKind::SharedMetric => "dir=none",
                EdgeKind::Cites => "style=dashed",
                EdgeKind::CitedBy => continue,
            };
            let _ = writeln!(
                s,
                "  {} -> {} [{style}, weight={:.6}];",
                dot_id(&e.a),
                dot_id(&e.b),
                e.weight
            );
        }
        s.push_str("}\n");
        s
    }
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Builds the graph. Paper nodes are ordered by id, so the result depends
/// only on the corpus, `config` and `embedder`.
pub fn build_graph(
    corpus: Arc<Corpus>,
    config: &EdgeWeightConfig,
    embedder: &dyn Embedder,
) -> Result<KnowledgeGraph, GraphError> {
    config.validate()?;
    let mut papers: Vec<&PaperRecord> = corpus.papers().iter().collect();
    papers.sort_by(|a, b| a.id.cmp(&b.id));

    let mut metric_nodes = BTreeSet::new();
    let mut outcome_nodes = Vec::new();
    let mut structural_edges = Vec::new();
    for p in &papers {
        for m in &p.metrics {
            metric_nodes.insert(m.clone());
            structural_edges.push(StructuralEdge::HasMetric {
                paper: p.id.clone(),
                metric: m.clone(),
            });
        }
        for (i, o) in p.outcomes.iter().enumerate() {
            let r = OutcomeRef {
                paper_id: p.id.clone(),
                outcome_index: i,
            };
            structural_edges.push(StructuralEdge::HasOutcome {
                metric: o.metric.clone(),
                outcome: r.clone(),
            });
            outcome_nodes.push(r);
        }
    }

    let mut scorer = IndexSimilarityScorer::new(embedder);
    let mut paper_edges = Vec::new();
    for (i, a) in papers.iter().enumerate() {
        for b in &papers[i + 1..] {
            let shares = !shared_metrics(a, b).is_empty();
            let a_cites_b = a.cites.contains(&b.id);
            let b_cites_a = b.cites.contains(&a.id);
            if !shares && !a_cites_b && !b_cites_a {
                continue;
            }
            let sim = scorer.score(&a.indexes, &b.indexes)?;
            if shares {
                paper_edges.push(PaperEdge {
                    a: a.id.clone(),
                    b: b.id.clone(),
                    kind: EdgeKind::SharedMetric,
                    weight: compute_edge_weight(a, b, EdgeKind::SharedMetric, config, &sim)?,
                });
            }
            for (src, dst, cites) in [(a, b, a_cites_b), (b, a, b_cites_a)] {
                if !cites {
                    continue;
                }
                let weight = compute_edge_weight(src, dst, EdgeKind::Cites, config, &sim)?;
                paper_edges.push(PaperEdge {
                    a: src.id.clone(),
                    b: dst.id.clone(),
                    kind: EdgeKind::Cites,
                    weight,
                });
                paper_edges.push(PaperEdge {
                    a: dst.id.clone(),
                    b: src.id.clone(),
                    kind: EdgeKind::CitedBy,
                    weight,
                });
            }
        }
    }
    paper_edges.sort_by(|x, y| (&x.a, &x.b, x.kind).cmp(&(&y.a, &y.b, y.kind)));

    Ok(KnowledgeGraph {
        paper_ids: papers.iter().map(|p| p.id.clone()).collect(),
        corpus,
        config: config.clone(),
        metric_nodes,
        outcome_nodes,
        paper_edges,
        structural_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{IndexSet, MetricRecord, PaperMetadata};
    use crate::embed::HashedBagOfWords;

    fn paper(id: &str, metrics: &[&str], cites: &[&str]) -> PaperRecord {
        PaperRecord {
            id: id.into(),
            title: format!("Title {id}"),
            narrative: "n".into(),
            indexes: IndexSet::default(),
            metrics: metrics.iter().map(|s| s.to_string()).collect(),
            outcomes: vec![],
            cites: cites.iter().map(|s| s.to_string()).collect(),
            metadata: PaperMetadata::default(),
        }
    }

    fn corpus(papers: Vec<PaperRecord>) -> Arc<Corpus> {
        let names = ["trust", "enjoyment", "engagement"];
        let metrics = names
            .iter()
            .map(|n| MetricRecord {
                name: n.to_string(),
                category: "c".into(),
                definition: "d".into(),
                aliases: vec![],
            })
            .collect();
        Arc::new(Corpus::from_records(papers, metrics, vec![]).unwrap())
    }

    fn build(papers: Vec<PaperRecord>) -> KnowledgeGraph {
        build_graph(corpus(papers), &EdgeWeightConfig::default(), &HashedBagOfWords::default()).unwrap()
    }

    #[test]
    fn disjoint_metrics_no_edges() {
        let g = build(vec![paper("p1", &["trust"], &[]), paper("p2", &["enjoyment"], &[])]);
        assert!(g.paper_edges().is_empty());
    }

    #[test]
    fn shared_metric_edge_and_node() {
        let g = build(vec![
            paper("p1", &["trust", "enjoyment"], &[]),
            paper("p2", &["trust"], &[]),
        ]);
        assert_eq!(g.paper_edges().len(), 1);
        assert_eq!(g.paper_edges()[0].kind, EdgeKind::SharedMetric);
        assert_eq!(g.paper_edges()[0].weight, 1.0);
        assert_eq!(g.metric_nodes().len(), 2);
        assert_eq!(g.papers_with_metric("trust").len(), 2);
    }

    #[test]
    fn citations_are_mirrored_and_dangling_ignored() {
        let g = build(vec![
            paper("p1", &["trust"], &["p2", "elsewhere"]),
            paper("p2", &["enjoyment"], &[]),
        ]);
        let kinds: Vec<_> = g.paper_edges().iter().map(|e| (e.a.as_str(), e.b.as_str(), e.kind)).collect();
        assert_eq!(kinds, vec![("p1", "p2", EdgeKind::Cites), ("p2", "p1", EdgeKind::CitedBy)]);
        assert_eq!(g.paper_edges()[0].weight, g.paper_edges()[1].weight);
    }

    #[test]
    fn partition_mismatch() {
        let g = build(vec![paper("p1", &["trust"], &[]), paper("p2", &["trust"], &[])]);
        let part = CommunityAssignment {
            community_of: [("p1".to_string(), 0)].into(),
            modularity: 0.0,
        };
        assert!(matches!(g.modularity(&part), Err(GraphError::PartitionMismatch(_))));
    }

    #[test]
    fn community_metrics_union() {
        let g = build(vec![
            paper("p1", &["trust", "enjoyment"], &[]),
            paper("p2", &["enjoyment", "engagement"], &[]),
        ]);
        let a = g.detect_communities();
        assert_eq!(a.community_count(), 1);
        let m = g.community_metrics(&a, 0).unwrap();
        assert_eq!(m.len(), 3);
        assert!(matches!(g.community_metrics(&a, 5), Err(GraphError::UnknownCommunity(5))));
    }

    #[test]
    fn exports_are_stable() {
        let mk = || {
            build(vec![
                paper("p1", &["trust"], &["p2"]),
                paper("p2", &["trust"], &[]),
            ])
        };
        let (g1, g2) = (mk(), mk());
        let c = g1.detect_communities();
        assert_eq!(g1.to_json(Some(&c)), g2.to_json(Some(&c)));
        let dot = g1.to_dot(Some(&c));
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("\"p1\" -> \"p2\" [style=dashed"));
    }
}
