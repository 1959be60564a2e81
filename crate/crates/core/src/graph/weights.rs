use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EdgeKind, GraphError};
use crate::corpus::{IndexCategory, IndexSet, PaperRecord};
use crate::embed::{cosine_similarity, Embedder, Embedding};

/// Per-category similarity scores in `[0, 1]`.
pub type IndexSimilarity = BTreeMap<IndexCategory, f64>;

/// Tunable constants of the paper-paper edge weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeWeightConfig {
    /// Factor applied to citation edges; must exceed 1.
    pub citation_multiplier: f64,
    pub category_weights: BTreeMap<IndexCategory, f64>,
    /// Weight contributed by each shared metric.
    pub shared_metric_base: f64,
}

impl Default for EdgeWeightConfig {
    fn default() -> Self {
        EdgeWeightConfig {
            citation_multiplier: 2.0,
            category_weights: IndexCategory::ALL.into_iter().map(|c| (c, 1.0)).collect(),
            shared_metric_base: 1.0,
        }
    }
}

impl EdgeWeightConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        let bad = |msg: String| Err(GraphError::InvalidConfig(msg));
        if !self.citation_multiplier.is_finite() || self.citation_multiplier <= 1.0 {
            return bad(format!(
                "citation_multiplier must be a finite value > 1, got {}",
                self.citation_multiplier
            ));
        }
        if !self.shared_metric_base.is_finite() || self.shared_metric_base <= 0.0 {
            return bad(format!(
                "shared_metric_base must be a finite value > 0, got {}",
                self.shared_metric_base
            ));
        }
        for c in IndexCategory::ALL {
            match self.category_weights.get(&c) {
                None => return bad(format!("category_weights lacks `{c}`")),
                Some(w) if !w.is_finite() || *w < 0.0 => {
                    return bad(format!("category weight for `{c}` must be finite and >= 0, got {w}"))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// Weight of a paper-paper edge of `kind` between `a` and `b`.
pub fn compute_edge_weight(
    a: &PaperRecord,
    b: &PaperRecord,
    kind: EdgeKind,
    cfg: &EdgeWeightConfig,
    index_sim: &IndexSimilarity,
) -> Result<f64, GraphError> {
    let shared = a.metrics.intersection(&b.metrics).count();
    let mut base = cfg.shared_metric_base * shared as f64;
    for c in IndexCategory::ALL {
        let sim = *index_sim
            .get(&c)
            .ok_or(GraphError::MissingCategorySimilarity(c))?;
        base += cfg.category_weights.get(&c).copied().unwrap_or(0.0) * sim;
    }
    Ok(match kind {
        EdgeKind::SharedMetric => base,
        EdgeKind::Cites | EdgeKind::CitedBy => base * cfg.citation_multiplier,
    })
}

/// Embeds index values once each and scores category similarity between
/// index sets.
pub struct IndexSimilarityScorer<'a> {
    embedder: &'a dyn Embedder,
    cache: BTreeMap<String, Embedding>,
}

impl<'a> IndexSimilarityScorer<'a> {
    pub fn new(embedder: &'a dyn Embedder) -> Self {
        IndexSimilarityScorer {
            embedder,
            cache: BTreeMap::new(),
        }
    }

    fn embedding(&mut self, value: &str) -> Result<Embedding, GraphError> {
        if let Some(e) = self.cache.get(value) {
            return Ok(e.clone());
        }
        let e = self.embedder.embed(value)?;
        self.cache.insert(value.to_string(), e.clone());
        Ok(e)
    }

    /// Mean cosine similarity over the cross product of values, per category.
    /// Negative cosines count as 0; an empty side scores 0.
    pub fn score(&mut self, a: &IndexSet, b: &IndexSet) -> Result<IndexSimilarity, GraphError> {
        let mut out = IndexSimilarity::new();
        for c in IndexCategory::ALL {
            let (va, vb) = (a.get(c), b.get(c));
            if va.is_empty() || vb.is_empty() {
                out.insert(c, 0.0);
                continue;
            }
            let mut total = 0.0;
            for x in va {
                let ex = self.embedding(x)?;
                for y in vb {
                    let ey = self.embedding(y)?;
                    total += cosine_similarity(&ex, &ey)?.max(0.0);
                }
            }
            out.insert(c, (total / (va.len() * vb.len()) as f64).clamp(0.0, 1.0));
        }
        Ok(out)
    }
}

/// Metrics measured by both papers.
pub fn shared_metrics<'p>(a: &'p PaperRecord, b: &'p PaperRecord) -> BTreeSet<&'p String> {
    a.metrics.intersection(&b.metrics).collect()
}
