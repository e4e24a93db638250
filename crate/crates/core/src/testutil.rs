//! Brute-force oracles and random fixtures for unit tests.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::ChimeraGraph;
use crate::model::IsingModel;

pub struct Enumerated {
    pub log_z: f64,
    /// P(s_v = +1)
    pub node: Vec<f64>,
    /// E[s_u s_v]
    pub edge: Vec<f64>,
    /// full distribution indexed by bitmask (bit i set = node i is +1)
    pub probs: Vec<f64>,
}

pub fn config_of(mask: usize, len: usize) -> Vec<i8> {
    (0..len).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect()
}

pub fn mask_of(s: &[i8]) -> usize {
    s.iter().enumerate().filter(|(_, &x)| x == 1).map(|(i, _)| 1 << i).sum()
}

pub fn enumerate(model: &IsingModel, beta: f64) -> Enumerated {
    let nv = model.node_count();
    assert!(nv <= 22, "enumeration oracle limited to 22 spins");
    let edges: Vec<(usize, usize)> = model.graph().edge_indices().collect();
    let energies: Vec<f64> = (0..1usize << nv).map(|m| model.energy_of(&config_of(m, nv))).collect();
    let emin = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-beta * (e - emin)).exp()).collect();
    let z: f64 = w.iter().sum();
    let probs: Vec<f64> = w.iter().map(|x| x / z).collect();
    let mut node = vec![0.0; nv];
    let mut edge = vec![0.0; edges.len()];
    for (m, &p) in probs.iter().enumerate() {
        for (i, acc) in node.iter_mut().enumerate() {
            if m >> i & 1 == 1 {
                *acc += p;
            }
        }
        for (e, &(u, v)) in edges.iter().enumerate() {
            let same = (m >> u & 1) == (m >> v & 1);
            edge[e] += if same { p } else { -p };
        }
    }
    Enumerated {
        log_z: -beta * emin + z.ln(),
        node,
        edge,
        probs,
    }
}

/// Random model on a random sub-graph of `C_n` with at most `max_nodes` active nodes.
pub fn random_masked_model<R: Rng>(rng: &mut R, n: usize, max_nodes: usize, scale: f64) -> IsingModel {
    let total = 8 * n * n;
    let keep = rng.random_range(1..=max_nodes.min(total));
    let mut ids: Vec<usize> = (0..total).collect();
    ids.shuffle(rng);
    let masked: BTreeSet<usize> = ids[keep..].iter().copied().collect();
    let g = Arc::new(ChimeraGraph::masked(n, &masked).unwrap());
    random_weights(rng, g, scale)
}

pub fn random_weights<R: Rng>(rng: &mut R, g: Arc<ChimeraGraph>, scale: f64) -> IsingModel {
    let h = (0..g.node_count()).map(|_| rng.random_range(-scale..scale)).collect();
    let j = (0..g.edge_count()).map(|_| rng.random_range(-scale..scale)).collect();
    IsingModel::new(g, h, j).unwrap()
}
