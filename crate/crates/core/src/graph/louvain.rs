//! Weighted undirected graphs, Newman-Girvan modularity and Louvain.

use std::collections::BTreeMap;

/// Minimum modularity gain for Louvain to keep going.
pub const LOUVAIN_EPSILON: f64 = 1e-7;

/// Symmetric adjacency matrix in sparse rows. A self-loop entry `A[i][i]`
/// is counted once in the degree of `i`, so aggregating a community of
/// internal weight `w` produces `A[c][c] = 2w` and modularity is preserved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedGraph {
    adj: Vec<BTreeMap<usize, f64>>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph {
            adj: vec![BTreeMap::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Adds `w` to the undirected edge `{i, j}`; repeated calls accumulate.
    pub fn add_edge(&mut self, i: usize, j: usize, w: f64) {
        if i == j {
            *self.adj[i].entry(i).or_insert(0.0) += 2.0 * w;
        } else {
            *self.adj[i].entry(j).or_insert(0.0) += w;
            *self.adj[j].entry(i).or_insert(0.0) += w;
        }
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adj[i].get(&j).copied().unwrap_or(0.0)
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adj[i].values().sum()
    }

    /// Sum of all matrix entries (twice the total edge weight).
    pub fn two_m(&self) -> f64 {
        (0..self.len()).map(|i| self.degree(i)).sum()
    }

    fn aggregate(&self, community: &[usize], count: usize) -> WeightedGraph {
        let mut out = WeightedGraph::new(count);
        for (i, row) in self.adj.iter().enumerate() {
            for (&j, &w) in row {
                *out.adj[community[i]].entry(community[j]).or_insert(0.0) += w;
            }
        }
        out
    }
}

/// Modularity of `community` (one label per node). Zero for edgeless graphs.
pub fn modularity(g: &WeightedGraph, community: &[usize]) -> f64 {
    let two_m = g.two_m();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut internal: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, row) in g.adj.iter().enumerate() {
        let ci = community[i];
        *total.entry(ci).or_insert(0.0) += g.degree(i);
        for (&j, &w) in row {
            if community[j] == ci {
                *internal.entry(ci).or_insert(0.0) += w;
            }
        }
    }
    total
        .iter()
        .map(|(c, &tot)| internal.get(c).copied().unwrap_or(0.0) / two_m - (tot / two_m).powi(2))
        .sum()
}

/// Renumbers labels by first appearance so they run 0, 1, 2, ...
pub fn relabel(community: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let out = community
        .iter()
        .map(|c| {
            let next = map.len();
            *map.entry(*c).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// One local-moving phase. Returns whether any node moved.
fn local_moves(g: &WeightedGraph, community: &mut [usize], two_m: f64) -> bool {
    let n = g.len();
    let degree: Vec<f64> = (0..n).map(|i| g.degree(i)).collect();
    let mut tot = vec![0.0; n];
    for i in 0..n {
        tot[community[i]] += degree[i];
    }
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for i in 0..n {
            let own = community[i];
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for (&j, &w) in &g.adj[i] {
                if j != i {
                    *links.entry(community[j]).or_insert(0.0) += w;
                }
            }
            tot[own] -= degree[i];
            let gain = |c: usize, k_in: f64| k_in - tot[c] * degree[i] / two_m;
            let stay = gain(own, links.get(&own).copied().unwrap_or(0.0));
            let mut best = (own, stay);
            // BTreeMap order gives the lowest community id on ties.
            for (&c, &k_in) in &links {
                let g_c = gain(c, k_in);
                if g_c > best.1 + f64::EPSILON * two_m.max(1.0) {
                    best = (c, g_c);
                }
            }
            if best.0 != own && best.1 > stay {
                community[i] = best.0;
                moved = true;
            }
            tot[community[i]] += degree[i];
        }
        if !moved {
            return moved_any;
        }
        moved_any = true;
    }
}

/// Louvain community detection: local moves to convergence, then
/// aggregation, repeated while modularity improves by more than
/// [`LOUVAIN_EPSILON`]. Deterministic: nodes are visited in index order.
///
/// Returns contiguous labels numbered by first appearance in node order,
/// and the final modularity.
pub fn louvain(g: &WeightedGraph) -> (Vec<usize>, f64) {
    let n = g.len();
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    let two_m = g.two_m();
    if two_m == 0.0 {
        return ((0..n).collect(), 0.0);
    }

    let mut membership: Vec<usize> = (0..n).collect();
    let mut level = g.clone();
    let mut q = modularity(g, &membership);
    loop {
        let mut community: Vec<usize> = (0..level.len()).collect();
        if !local_moves(&level, &mut community, two_m) {
            break;
        }
        let (community, count) = relabel(&community);
        let candidate: Vec<usize> = membership.iter().map(|&c| community[c]).collect();
        let q_new = modularity(g, &candidate);
        if q_new - q <= LOUVAIN_EPSILON {
            if q_new > q {
                membership = candidate;
                q = q_new;
            }
            break;
        }
        membership = candidate;
        q = q_new;
        level = level.aggregate(&community, count);
    }

    if q < 0.0 {
        return (vec![0; n], modularity(g, &vec![0; n]));
    }
    let (membership, _) = relabel(&membership);
    (membership, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangles() -> WeightedGraph {
        let mut g = WeightedGraph::new(6);
        for (a, b) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)] {
            g.add_edge(a, b, 1.0);
        }
        g
    }

    #[test]
    fn all_in_one_is_zero() {
        assert!(modularity(&triangles(), &[0; 6]).abs() < 1e-15);
    }

    #[test]
    fn singletons_negative() {
        assert!(modularity(&triangles(), &[0, 1, 2, 3, 4, 5]) < 0.0);
    }

    #[test]
    fn two_triangles() {
        // Q = 2 * (6/14 - (7/14)^2)
        let q = modularity(&triangles(), &[0, 0, 0, 1, 1, 1]);
        assert!((q - 5.0 / 14.0).abs() < 1e-12);
        let (labels, q_l) = louvain(&triangles());
        assert_eq!(labels, vec![0, 0, 0, 1, 1, 1]);
        assert!((q_l - q).abs() < 1e-12);
    }

    #[test]
    fn aggregation_preserves_modularity() {
        let g = triangles();
        let part = [0, 0, 0, 1, 1, 1];
        let agg = g.aggregate(&part, 2);
        assert!((modularity(&agg, &[0, 1]) - modularity(&g, &part)).abs() < 1e-12);
        assert!((agg.two_m() - g.two_m()).abs() < 1e-12);
    }

    #[test]
    fn edgeless_graph() {
        let (labels, q) = louvain(&WeightedGraph::new(3));
        assert_eq!(labels, vec![0, 1, 2]);
        assert_eq!(q, 0.0);
    }

    #[test]
    fn single_node() {
        let (labels, q) = louvain(&WeightedGraph::new(1));
        assert_eq!(labels, vec![0]);
        assert_eq!(q, 0.0);
    }

    #[test]
    fn relabel_contiguous() {
        assert_eq!(relabel(&[7, 3, 7, 9]), (vec![0, 1, 0, 2], 3));
    }
}
