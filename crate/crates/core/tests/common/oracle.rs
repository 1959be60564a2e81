//! Independent reference implementations the library is checked against.

use std::collections::BTreeMap;

use uxeval::corpus::{Corpus, IndexCategory};
use uxeval::embed::Embedder;

/// Every set partition of `n` nodes as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for label in 0..=max + 1 {
            prefix.push(label);
            grow(prefix, max.max(label), n, out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    grow(&mut vec![0], 0, n, &mut out);
    out
}

/// Q = sum over communities of (internal weight / m) - (degree sum / 2m)^2,
/// over undirected edges `(i, j, w)` with `i != j`.
pub fn modularity_ref(n: usize, edges: &[(usize, usize, f64)], labels: &[usize]) -> f64 {
    let m: f64 = edges.iter().map(|e| e.2).sum();
    let mut degree = vec![0.0; n];
    for &(i, j, w) in edges {
        degree[i] += w;
        degree[j] += w;
    }
    let k = labels.iter().max().map_or(0, |x| x + 1);
    let mut internal = vec![0.0; k];
    let mut total = vec![0.0; k];
    for &(i, j, w) in edges {
        if labels[i] == labels[j] {
            internal[labels[i]] += w;
        }
    }
    for i in 0..n {
        total[labels[i]] += degree[i];
    }
    (0..k)
        .map(|c| internal[c] / m - (total[c] / (2.0 * m)).powi(2))
        .sum()
}

fn cosine_ref(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}

/// `(a, b, kind, weight)` edges rebuilt pair by pair with default weights:
/// shared metrics plus summed mean positive cosine per index category,
/// doubled for citations.
pub fn reference_edges(corpus: &Corpus, embedder: &dyn Embedder) -> Vec<(String, String, String, f64)> {
    let embed = |s: &str| embedder.embed(s).unwrap().values().to_vec();
    let papers = corpus.papers();
    let mut out = Vec::new();
    for a in papers {
        for b in papers {
            if a.id == b.id {
                continue;
            }
            let shared = a.metrics.iter().filter(|m| b.metrics.contains(*m)).count();
            let mut base = shared as f64;
            for c in IndexCategory::ALL {
                let (va, vb) = (a.indexes.get(c), b.indexes.get(c));
                if va.is_empty() || vb.is_empty() {
                    continue;
                }
                let mut sum = 0.0;
                for x in va {
                    for y in vb {
                        sum += cosine_ref(&embed(x), &embed(y)).max(0.0);
                    }
                }
                base += sum / (va.len() * vb.len()) as f64;
            }
            if shared > 0 && a.id < b.id {
                out.push((a.id.clone(), b.id.clone(), "SHARED_METRIC".to_string(), base));
            }
            if a.cites.contains(&b.id) {
                out.push((a.id.clone(), b.id.clone(), "CITES".to_string(), 2.0 * base));
                out.push((b.id.clone(), a.id.clone(), "CITED_BY".to_string(), 2.0 * base));
            }
        }
    }
    out.sort_by(|x, y| (&x.0, &x.1, &x.2).cmp(&(&y.0, &y.1, &y.2)));
    out
}

/// Library edges in the same shape as [`reference_edges`].
pub fn library_edges(graph: &uxeval::graph::KnowledgeGraph) -> Vec<(String, String, String, f64)> {
    let mut out: Vec<_> = graph
        .paper_edges()
        .iter()
        .map(|e| {
            let kind = serde_json::to_value(e.kind).unwrap().as_str().unwrap().to_string();
            (e.a.clone(), e.b.clone(), kind, e.weight)
        })
        .collect();
    out.sort_by(|x, y| (&x.0, &x.1, &x.2).cmp(&(&y.0, &y.1, &y.2)));
    out
}

/// Compares two edge lists: identical endpoints and kinds, weights within `tol`.
pub fn edges_match(
    lib: &[(String, String, String, f64)],
    reference: &[(String, String, String, f64)],
    tol: f64,
) -> Result<f64, String> {
    if lib.len() != reference.len() {
        return Err(format!("{} edges, reference has {}", lib.len(), reference.len()));
    }
    let mut worst: f64 = 0.0;
    for (x, y) in lib.iter().zip(reference) {
        if (&x.0, &x.1, &x.2) != (&y.0, &y.1, &y.2) {
            return Err(format!("edge {x:?} where reference has {y:?}"));
        }
        let diff = (x.3 - y.3).abs();
        worst = worst.max(diff);
        if diff > tol {
            return Err(format!("weight of {x:?} differs from reference {}", y.3));
        }
    }
    Ok(worst)
}

/// Checks the edge-kind symmetry invariants on a library edge list.
pub fn symmetry_violations(corpus: &Corpus, edges: &[(String, String, String, f64)]) -> Vec<String> {
    let mut problems = Vec::new();
    let by_key: BTreeMap<(&str, &str, &str), f64> = edges
        .iter()
        .map(|(a, b, k, w)| ((a.as_str(), b.as_str(), k.as_str()), *w))
        .collect();
    for (a, b, kind, w) in edges {
        match kind.as_str() {
            "SHARED_METRIC" => {
                if a >= b {
                    problems.push(format!("SHARED_METRIC {a}-{b} not stored with a < b"));
                }
                let (pa, pb) = (corpus.paper(a).unwrap(), corpus.paper(b).unwrap());
                if pa.metrics.intersection(&pb.metrics).next().is_none() {
                    problems.push(format!("SHARED_METRIC {a}-{b} without a shared metric"));
                }
            }
            "CITES" => match by_key.get(&(b.as_str(), a.as_str(), "CITED_BY")) {
                Some(v) if v == w => {}
                _ => problems.push(format!("CITES {a}->{b} lacks an equal CITED_BY")),
            },
            "CITED_BY" => match by_key.get(&(b.as_str(), a.as_str(), "CITES")) {
                Some(v) if v == w => {}
                _ => problems.push(format!("CITED_BY {a}->{b} lacks an equal CITES")),
            },
            other => problems.push(format!("unknown kind {other}")),
        }
        if !(w.is_finite() && *w >= 0.0) {
            problems.push(format!("{kind} {a}-{b} has weight {w}"));
        }
    }
    for pa in corpus.papers() {
        for pb in corpus.papers() {
            if pa.id < pb.id
                && pa.metrics.intersection(&pb.metrics).next().is_some()
                && !by_key.contains_key(&(pa.id.as_str(), pb.id.as_str(), "SHARED_METRIC"))
            {
                problems.push(format!("missing SHARED_METRIC {}-{}", pa.id, pb.id));
            }
        }
    }
    problems
}
