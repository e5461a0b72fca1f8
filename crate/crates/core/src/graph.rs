//! Channel graph: shortest-path metric, deterministic path retrieval, and
//! positions that interpolate along paths.
//!
//! Positions are convex combinations of at most two nodes. Interpolation
//! along a shortest path produces positions on edges; the same type also
//! represents direct two-channel blends (used by the restricted-coupling
//! strategy), which need not sit on an edge.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when matching alternative shortest paths and arc lengths.
const PATH_TOL: f64 = 1e-9;

/// Undirected connected graph with positive edge lengths (default 1).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct ChannelGraph {
    node_count: usize,
    /// Canonical edge list: (u, w) with u < w, sorted.
    edges: Vec<(usize, usize)>,
    lengths: Vec<f64>,
    /// Adjacency: (neighbor, edge length), sorted by neighbor index.
    adjacency: Vec<Vec<(usize, f64)>>,
    /// All-pairs shortest distances, row-major.
    distances: Vec<f64>,
}

/// JSON shape: `{"nodes": M, "edges": [[u,w], ...], "lengths": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphJson {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lengths: Option<Vec<f64>>,
}

impl TryFrom<GraphJson> for ChannelGraph {
    type Error = Error;
    fn try_from(j: GraphJson) -> Result<Self> {
        match j.lengths {
            Some(lengths) => ChannelGraph::with_lengths(j.nodes, &j.edges, &lengths),
            None => ChannelGraph::unit(j.nodes, &j.edges),
        }
    }
}

impl From<ChannelGraph> for GraphJson {
    fn from(g: ChannelGraph) -> Self {
        let uniform = g.lengths.iter().all(|&l| l == 1.0);
        GraphJson {
            nodes: g.node_count,
            edges: g.edges.clone(),
            lengths: if uniform { None } else { Some(g.lengths) },
        }
    }
}

impl PartialEq for ChannelGraph {
    fn eq(&self, other: &Self) -> bool {
        self.node_count == other.node_count
            && self.edges == other.edges
            && self.lengths == other.lengths
    }
}

impl ChannelGraph {
    /// Graph with unit edge lengths.
    pub fn unit(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::with_lengths(node_count, edges, &vec![1.0; edges.len()])
    }

    pub fn with_lengths(
        node_count: usize,
        edges: &[(usize, usize)],
        lengths: &[f64],
    ) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        if edges.len() != lengths.len() {
            return Err(Error::InvalidGraph(format!(
                "{} edges but {} lengths",
                edges.len(),
                lengths.len()
            )));
        }
        let mut canon: Vec<((usize, usize), f64)> = Vec::with_capacity(edges.len());
        for (&(u, w), &len) in edges.iter().zip(lengths) {
            if u >= node_count || w >= node_count {
                return Err(Error::InvalidNode {
                    index: u.max(w),
                    nodes: node_count,
                });
            }
            if u == w {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            if !(len > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {w}) has nonpositive length {len}"
                )));
            }
            canon.push(((u.min(w), u.max(w)), len));
        }
        canon.sort_by_key(|&(e, _)| e);
        if canon.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidGraph("duplicate edge".into()));
        }

        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); node_count];
        for &((u, w), len) in &canon {
            adjacency[u].push((w, len));
            adjacency[w].push((u, len));
        }
        for list in adjacency.iter_mut() {
            list.sort_by_key(|&(n, _)| n);
        }

        let mut graph = Self {
            node_count,
            edges: canon.iter().map(|&(e, _)| e).collect(),
            lengths: canon.iter().map(|&(_, l)| l).collect(),
            adjacency,
            distances: Vec::new(),
        };
        graph.distances = graph.all_pairs_distances()?;
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.edges.iter().copied().zip(self.lengths.iter().copied())
    }

    pub fn has_edge(&self, u: usize, w: usize) -> bool {
        u < self.node_count
            && w < self.node_count
            && u != w
            && self.edges.binary_search(&(u.min(w), u.max(w))).is_ok()
    }

    pub fn edge_length(&self, u: usize, w: usize) -> Option<f64> {
        self.edges
            .binary_search(&(u.min(w), u.max(w)))
            .ok()
            .map(|idx| self.lengths[idx])
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.node_count {
            return Err(Error::InvalidNode {
                index: v,
                nodes: self.node_count,
            });
        }
        Ok(())
    }

    /// Shortest-path distance between nodes (precomputed).
    pub fn distance(&self, u: usize, w: usize) -> Result<f64> {
        self.check_node(u)?;
        self.check_node(w)?;
        Ok(self.distances[u * self.node_count + w])
    }

    fn all_pairs_distances(&self) -> Result<Vec<f64>> {
        let n = self.node_count;
        let mut out = vec![f64::INFINITY; n * n];
        for src in 0..n {
            let dist = self.dijkstra(src);
            if dist.iter().any(|d| !d.is_finite()) {
                return Err(Error::Disconnected);
            }
            out[src * n..(src + 1) * n].copy_from_slice(&dist);
        }
        Ok(out)
    }

    fn dijkstra(&self, src: usize) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Entry(f64, usize);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                // Min-heap on distance; ties broken by node index.
                other
                    .0
                    .partial_cmp(&self.0)
                    .unwrap()
                    .then(other.1.cmp(&self.1))
            }
        }

        let mut dist = vec![f64::INFINITY; self.node_count];
        dist[src] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Entry(0.0, src));
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, len) in &self.adjacency[u] {
                let nd = d + len;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        dist
    }

    /// Shortest path from `u` to `w`: length and node sequence.
    ///
    /// Among equal-length paths the lexicographically smallest node sequence
    /// is returned, so downstream interpolation is reproducible.
    pub fn shortest_path(&self, u: usize, w: usize) -> Result<(f64, Vec<usize>)> {
        self.check_node(u)?;
        self.check_node(w)?;
        let n = self.node_count;
        let total = self.distances[u * n + w];
        let mut nodes = vec![u];
        let mut cur = u;
        let tol = PATH_TOL * (1.0 + total);
        while cur != w {
            let remaining = self.distances[cur * n + w];
            // Smallest-index neighbor that stays on a shortest path.
            let mut next = None;
            for &(v, len) in &self.adjacency[cur] {
                if (len + self.distances[v * n + w] - remaining).abs() <= tol {
                    next = Some(v);
                    break;
                }
            }
            cur = next.ok_or(Error::Disconnected)?;
            nodes.push(cur);
        }
        Ok((total, nodes))
    }

    /// Position at arc length `t * L` along `path`, where `L` is the total
    /// path length. Positions landing exactly on a vertex are normalized to
    /// the pure-node form.
    pub fn path_interpolate(&self, path: &[usize], t: f64) -> Result<GraphPosition> {
        if path.is_empty() {
            return Err(Error::EmptyInput("path"));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!(
                "path parameter {t} outside [0, 1]"
            )));
        }
        for v in path {
            self.check_node(*v)?;
        }
        let mut seg_lengths = Vec::with_capacity(path.len().saturating_sub(1));
        for pair in path.windows(2) {
            let len = self.edge_length(pair[0], pair[1]).ok_or_else(|| {
                Error::InvalidGraph(format!("path step ({}, {}) is not an edge", pair[0], pair[1]))
            })?;
            seg_lengths.push(len);
        }
        if path.len() == 1 || t == 0.0 {
            return Ok(GraphPosition::node(path[0]));
        }
        if t == 1.0 {
            return Ok(GraphPosition::node(*path.last().unwrap()));
        }
        let total: f64 = seg_lengths.iter().sum();
        let target = t * total;
        let mut acc = 0.0;
        for (k, &len) in seg_lengths.iter().enumerate() {
            if target <= acc + len + PATH_TOL * total.max(1.0) {
                let fraction = ((target - acc) / len).clamp(0.0, 1.0);
                return Ok(GraphPosition::blend(path[k], path[k + 1], fraction));
            }
            acc += len;
        }
        Ok(GraphPosition::node(*path.last().unwrap()))
    }

    /// Distance between two positions in the metric realization of the
    /// graph, where a point at fraction `f` on edge `(a, b)` lies `f * len`
    /// from `a`. Positions must be pure nodes or lie on an actual edge.
    pub fn fractional_distance(&self, p: &GraphPosition, q: &GraphPosition) -> Result<f64> {
        let pe = self.position_offsets(p)?;
        let qe = self.position_offsets(q)?;
        // Shortest route through any pair of anchoring nodes.
        let mut best = f64::INFINITY;
        for &(pa, poff) in &pe {
            for &(qa, qoff) in &qe {
                let via = poff + self.distances[pa * self.node_count + qa] + qoff;
                best = best.min(via);
            }
        }
        // Same-edge shortcut: direct travel along the shared edge.
        if let (Some((a1, b1, f1)), Some((a2, b2, f2))) = (p.edge_form(), q.edge_form()) {
            if a1 == a2 && b1 == b2 {
                let len = self.edge_length(a1, b1).unwrap_or(0.0);
                best = best.min((f1 - f2).abs() * len);
            }
        }
        Ok(best)
    }

    /// Anchor nodes with offsets: a pure node anchors to itself at zero; an
    /// edge point anchors to both endpoints.
    fn position_offsets(&self, p: &GraphPosition) -> Result<Vec<(usize, f64)>> {
        self.check_node(p.node_a)?;
        self.check_node(p.node_b)?;
        if let Some(node) = p.as_node() {
            return Ok(vec![(node, 0.0)]);
        }
        let len = self.edge_length(p.node_a, p.node_b).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "position blends non-adjacent channels {} and {}",
                p.node_a, p.node_b
            ))
        })?;
        Ok(vec![
            (p.node_a, p.fraction * len),
            (p.node_b, (1.0 - p.fraction) * len),
        ])
    }
}

/// Convex combination of at most two channels: weight `1 - fraction` on
/// `node_a` and `fraction` on `node_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphPosition {
    pub node_a: usize,
    pub node_b: usize,
    pub fraction: f64,
}

impl GraphPosition {
    /// Pure channel.
    pub fn node(v: usize) -> Self {
        Self {
            node_a: v,
            node_b: v,
            fraction: 0.0,
        }
    }

    /// Two-channel blend; fractions of 0 or 1 collapse to the pure node.
    pub fn blend(a: usize, b: usize, fraction: f64) -> Self {
        if a == b || fraction <= 0.0 {
            Self::node(a)
        } else if fraction >= 1.0 {
            Self::node(b)
        } else {
            Self {
                node_a: a,
                node_b: b,
                fraction,
            }
        }
    }

    /// Blend validated against the graph's edge set.
    pub fn on_edge(graph: &ChannelGraph, a: usize, b: usize, fraction: f64) -> Result<Self> {
        let pos = Self::blend(a, b, fraction);
        if pos.as_node().is_none() && !graph.has_edge(a, b) {
            return Err(Error::InvalidParameter(format!(
                "channels {a} and {b} are not adjacent"
            )));
        }
        Ok(pos)
    }

    pub fn as_node(&self) -> Option<usize> {
        if self.node_a == self.node_b || self.fraction == 0.0 {
            Some(self.node_a)
        } else if self.fraction == 1.0 {
            Some(self.node_b)
        } else {
            None
        }
    }

    /// Canonical edge form `(min, max, fraction from min)` for blends.
    pub fn edge_form(&self) -> Option<(usize, usize, f64)> {
        self.as_node().map_or_else(
            || {
                if self.node_a < self.node_b {
                    Some((self.node_a, self.node_b, self.fraction))
                } else {
                    Some((self.node_b, self.node_a, 1.0 - self.fraction))
                }
            },
            |_| None,
        )
    }

    /// Channels carrying positive weight.
    pub fn support(&self) -> Vec<usize> {
        match self.as_node() {
            Some(v) => vec![v],
            None => vec![self.node_a, self.node_b],
        }
    }

    /// Weight that this position places on `channel`.
    pub fn channel_weight(&self, channel: usize) -> f64 {
        if let Some(v) = self.as_node() {
            return if v == channel { 1.0 } else { 0.0 };
        }
        if channel == self.node_a {
            1.0 - self.fraction
        } else if channel == self.node_b {
            self.fraction
        } else {
            0.0
        }
    }
}

/// Probability vector over `channels` channels induced by a position.
pub fn delta_vector(pos: &GraphPosition, channels: usize) -> Result<Vec<f64>> {
    if pos.node_a >= channels || pos.node_b >= channels {
        return Err(Error::InvalidNode {
            index: pos.node_a.max(pos.node_b),
            nodes: channels,
        });
    }
    let mut v = vec![0.0; channels];
    if let Some(node) = pos.as_node() {
        v[node] = 1.0;
    } else {
        v[pos.node_a] = 1.0 - pos.fraction;
        v[pos.node_b] = pos.fraction;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{random_connected_graph, rng};
    use approx::assert_abs_diff_eq;

    fn chain(n: usize) -> ChannelGraph {
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        ChannelGraph::unit(n, &edges).unwrap()
    }

    #[test]
    fn same_node_has_zero_distance_and_trivial_path() {
        let g = chain(3);
        let (len, path) = g.shortest_path(1, 1).unwrap();
        assert_eq!(len, 0.0);
        assert_eq!(path, vec![1]);
    }

    #[test]
    fn chain_distance_and_path() {
        let g = chain(3);
        let (len, path) = g.shortest_path(0, 2).unwrap();
        assert_abs_diff_eq!(len, 2.0, epsilon = 1e-15);
        assert_eq!(path, vec![0, 1, 2]);
    }

    #[test]
    fn four_cycle_tie_break_is_lexicographic() {
        let g = ChannelGraph::unit(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let (len, path) = g.shortest_path(0, 2).unwrap();
        assert_abs_diff_eq!(len, 2.0, epsilon = 1e-15);
        assert_eq!(path, vec![0, 1, 2], "ties resolve to the smaller sequence");
    }

    #[test]
    fn construction_rejects_bad_graphs() {
        assert!(ChannelGraph::unit(2, &[(0, 0)]).is_err());
        assert!(ChannelGraph::unit(2, &[(0, 1), (1, 0)]).is_err());
        assert!(ChannelGraph::unit(3, &[(0, 1)]).is_err()); // disconnected
        assert!(ChannelGraph::with_lengths(2, &[(0, 1)], &[0.0]).is_err());
    }

    #[test]
    fn metric_axioms_exhaustive_on_random_graphs() {
        let mut r = rng(51);
        for _ in 0..10 {
            let g = random_connected_graph(&mut r, 8, 0.3);
            let n = g.node_count();
            for u in 0..n {
                assert_eq!(g.distance(u, u).unwrap(), 0.0);
                for w in 0..n {
                    let duw = g.distance(u, w).unwrap();
                    assert_eq!(duw, g.distance(w, u).unwrap());
                    if u != w {
                        assert!(duw > 0.0);
                    }
                    for x in 0..n {
                        assert!(duw <= g.distance(u, x).unwrap() + g.distance(x, w).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn interpolate_endpoints_are_pure_nodes() {
        let g = chain(4);
        let path = vec![0, 1, 2, 3];
        assert_eq!(g.path_interpolate(&path, 0.0).unwrap(), GraphPosition::node(0));
        assert_eq!(g.path_interpolate(&path, 1.0).unwrap(), GraphPosition::node(3));
    }

    #[test]
    fn interpolate_midpoint_of_three_edge_path() {
        // Path over four channels; the midpoint splits the middle edge evenly.
        let g = ChannelGraph::unit(4, &[(0, 2), (2, 3), (1, 3)]).unwrap();
        let pos = g.path_interpolate(&[0, 2, 3, 1], 0.5).unwrap();
        assert_eq!((pos.node_a, pos.node_b), (2, 3));
        assert_abs_diff_eq!(pos.fraction, 0.5, epsilon = 1e-12);
        let delta = delta_vector(&pos, 4).unwrap();
        assert_abs_diff_eq!(delta[2], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(delta[3], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn interpolate_quarter_of_two_edge_chain() {
        let g = chain(3);
        let pos = g.path_interpolate(&[0, 1, 2], 0.25).unwrap();
        assert_eq!((pos.node_a, pos.node_b), (0, 1));
        assert_abs_diff_eq!(pos.fraction, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn interpolate_lands_exactly_on_vertex() {
        let g = chain(3);
        let pos = g.path_interpolate(&[0, 1, 2], 0.5).unwrap();
        assert_eq!(pos, GraphPosition::node(1));
    }

    #[test]
    fn delta_vector_cases() {
        let pure = delta_vector(&GraphPosition::node(2), 4).unwrap();
        assert_eq!(pure, vec![0.0, 0.0, 1.0, 0.0]);
        let blend = delta_vector(&GraphPosition::blend(1, 2, 0.25), 3).unwrap();
        assert_abs_diff_eq!(blend[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(blend[1], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(blend[2], 0.25, epsilon = 1e-15);
        assert!(delta_vector(&GraphPosition::node(5), 3).is_err());
    }

    #[test]
    fn delta_vector_is_probability_vector() {
        let mut r = rng(53);
        for _ in 0..50 {
            let g = random_connected_graph(&mut r, 6, 0.4);
            use rand::Rng;
            let ((u, w), _) = {
                let edges: Vec<_> = g.edges().collect();
                edges[r.gen_range(0..edges.len())]
            };
            let pos = GraphPosition::blend(u, w, r.gen_range(0.0..1.0));
            let d = delta_vector(&pos, g.node_count()).unwrap();
            assert!(d.iter().all(|&x| x >= 0.0));
            assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn fractional_distance_same_edge() {
        let g = chain(3);
        let p = GraphPosition::blend(0, 1, 0.25);
        let q = GraphPosition::blend(0, 1, 0.75);
        assert_abs_diff_eq!(g.fractional_distance(&p, &q).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fractional_distance_across_edges() {
        let g = chain(3);
        let p = GraphPosition::blend(0, 1, 0.75);
        let q = GraphPosition::blend(1, 2, 0.25);
        // 0.25 to reach node 1, then 0.25 onward.
        assert_abs_diff_eq!(g.fractional_distance(&p, &q).unwrap(), 0.5, epsilon = 1e-12);
        let pure = GraphPosition::node(2);
        assert_abs_diff_eq!(
            g.fractional_distance(&p, &pure).unwrap(),
            1.25,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fractional_distance_on_same_path_is_arc_difference() {
        let g = chain(4);
        let path = vec![0, 1, 2, 3];
        for &(s, t) in &[(0.1, 0.6), (0.0, 1.0), (0.3, 0.4)] {
            let ps = g.path_interpolate(&path, s).unwrap();
            let pt = g.path_interpolate(&path, t).unwrap();
            let d = g.fractional_distance(&ps, &pt).unwrap();
            assert_abs_diff_eq!(d, (t - s) * 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn fractional_distance_rejects_generalized_blends() {
        let g = chain(3);
        let p = GraphPosition::blend(0, 2, 0.5); // channels 0 and 2 not adjacent
        assert!(g.fractional_distance(&p, &GraphPosition::node(0)).is_err());
    }

    #[test]
    fn graph_json_round_trip() {
        let g = ChannelGraph::with_lengths(3, &[(0, 1), (1, 2)], &[1.0, 2.5]).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: ChannelGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(g, back);
    }
}
