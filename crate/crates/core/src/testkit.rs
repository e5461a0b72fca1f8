//! Seeded random generators for models, graphs and transport instances.
//!
//! Used by the test suites and the demo recipes; all functions are
//! deterministic given the RNG state.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gaussian::Gaussian;
use crate::graph::ChannelGraph;
use crate::linalg::SymmetricMatrix;
use crate::mixture::MixtureModel;
use crate::vector::VectorMixtureModel;

/// Fresh deterministic RNG.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random SPD matrix `R R^T / n + 0.25 * scale * I`, well conditioned.
pub fn random_spd(r: &mut ChaCha8Rng, dim: usize, scale: f64) -> SymmetricMatrix {
    let mut factor = vec![0.0; dim * dim];
    for x in factor.iter_mut() {
        *x = r.gen_range(-1.0..1.0) * scale;
    }
    let mut data = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let mut s = 0.0;
            for k in 0..dim {
                s += factor[i * dim + k] * factor[j * dim + k];
            }
            s /= dim as f64;
            if i == j {
                s += 0.25 * scale * scale;
            }
            data[i * dim + j] = s;
            data[j * dim + i] = s;
        }
    }
    SymmetricMatrix::new(dim, data).expect("constructed symmetric")
}

pub fn random_gaussian(r: &mut ChaCha8Rng, dim: usize) -> Gaussian {
    let mean: Vec<f64> = (0..dim).map(|_| r.gen_range(-5.0..5.0)).collect();
    let cov = random_spd(r, dim, 1.0);
    Gaussian::new(mean, cov).expect("SPD covariance")
}

/// Random positive weights summing to one; entries are small rationals so
/// that transportation instances have exactly representable marginals.
pub fn random_simplex_weights(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<u32> = (0..n).map(|_| r.gen_range(1..10)).collect();
    let total: u32 = raw.iter().sum();
    raw.iter().map(|&x| x as f64 / total as f64).collect()
}

/// Balanced scalar mixture with `k` components in dimension `dim`.
pub fn random_mixture(r: &mut ChaCha8Rng, dim: usize, k: usize) -> MixtureModel {
    let weights = random_simplex_weights(r, k);
    let comps = weights
        .into_iter()
        .map(|w| (w, random_gaussian(r, dim)))
        .collect();
    MixtureModel::new(comps).expect("valid mixture")
}

/// Random connected graph on `nodes` nodes with unit edge lengths.
pub fn random_connected_graph(r: &mut ChaCha8Rng, nodes: usize, extra_edge_prob: f64) -> ChannelGraph {
    let mut edges = Vec::new();
    // Random spanning tree: attach each node to an earlier one.
    for v in 1..nodes {
        let u = r.gen_range(0..v);
        edges.push((u, v));
    }
    for u in 0..nodes {
        for v in (u + 1)..nodes {
            if edges.contains(&(u, v)) {
                continue;
            }
            if r.gen_bool(extra_edge_prob) {
                edges.push((u, v));
            }
        }
    }
    ChannelGraph::unit(nodes, &edges).expect("connected graph")
}

/// Balanced vector mixture on a given graph.
pub fn random_vector_mixture(
    r: &mut ChaCha8Rng,
    graph: &ChannelGraph,
    dim: usize,
    k: usize,
) -> VectorMixtureModel {
    let weights = random_simplex_weights(r, k);
    let comps = weights
        .into_iter()
        .map(|w| {
            let channel = r.gen_range(0..graph.node_count());
            (w, random_gaussian(r, dim), channel)
        })
        .collect();
    VectorMixtureModel::new(graph.clone(), comps).expect("valid vector mixture")
}
