#![allow(dead_code)]

use std::sync::Arc;

use ising_repcode::{Edge, Graph, IsingModel};
use rand::Rng;

/// Erdős–Rényi graph on `n` vertices.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                pairs.push((u, v));
            }
        }
    }
    Graph::new(n, pairs).unwrap()
}

/// Couplings and fields drawn by `draw` on a random graph.
pub fn random_model_with(rng: &mut impl Rng, n: usize, p: f64, mut draw: impl FnMut(&mut dyn rand::RngCore) -> f64) -> IsingModel {
    let g = Arc::new(random_graph(rng, n, p));
    let couplings: Vec<(Edge, f64)> = g.edges().iter().map(|&e| (e, draw(rng))).collect();
    let fields: Vec<(usize, f64)> = (0..n).map(|v| (v, draw(rng))).collect();
    IsingModel::new(g, couplings, fields, 1.0).unwrap()
}

/// J and h uniform in [-1, 1].
pub fn random_model(rng: &mut impl Rng, n: usize, p: f64) -> IsingModel {
    random_model_with(rng, n, p, |r| r.random_range(-1.0..=1.0))
}
