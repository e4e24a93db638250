//! Sufficient statistics `phi(s) = [s_v, s_u s_v]` and their averages.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::ChimeraGraph;
use crate::model::{IsingModel, SampleSet, SpinConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct SufficientStats {
    pub node_part: Vec<f64>,
    pub edge_part: Vec<f64>,
    pub count: usize,
}

impl SufficientStats {
    /// The empty accumulator: zero count, all entries zero.
    pub fn empty(graph: &ChimeraGraph) -> Self {
        SufficientStats {
            node_part: vec![0.0; graph.node_count()],
            edge_part: vec![0.0; graph.edge_count()],
            count: 0,
        }
    }

    /// Wraps exact expectations (count is recorded as 1).
    pub fn from_expectations(node_part: Vec<f64>, edge_part: Vec<f64>) -> Self {
        SufficientStats {
            node_part,
            edge_part,
            count: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.node_part.len() + self.edge_part.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened in parameter order: node part then edge part.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.node_part);
        v.extend_from_slice(&self.edge_part);
        v
    }

    /// `<theta, phi>`; for single-configuration stats this is the energy.
    pub fn dot(&self, model: &IsingModel) -> f64 {
        let a: f64 = self.node_part.iter().zip(model.h()).map(|(s, h)| s * h).sum();
        let b: f64 = self.edge_part.iter().zip(model.j()).map(|(s, j)| s * j).sum();
        a + b
    }
}

// Integer sums: every entry of phi is ±1, so partial sums are exact and the
// result does not depend on how the work is split.
#[derive(Clone)]
struct IntAccum {
    node: Vec<i64>,
    edge: Vec<i64>,
    count: usize,
}

impl IntAccum {
    fn new(nv: usize, ne: usize) -> Self {
        IntAccum {
            node: vec![0; nv],
            edge: vec![0; ne],
            count: 0,
        }
    }

    fn add(&mut self, s: &[i8], edges: &[(usize, usize)]) {
        for (acc, &v) in self.node.iter_mut().zip(s) {
            *acc += v as i64;
        }
        for (acc, &(u, v)) in self.edge.iter_mut().zip(edges) {
            *acc += (s[u] * s[v]) as i64;
        }
        self.count += 1;
    }

    fn merge(mut self, other: IntAccum) -> IntAccum {
        for (a, b) in self.node.iter_mut().zip(&other.node) {
            *a += b;
        }
        for (a, b) in self.edge.iter_mut().zip(&other.edge) {
            *a += b;
        }
        self.count += other.count;
        self
    }

    fn finish(self) -> SufficientStats {
        if self.count == 0 {
            return SufficientStats {
                node_part: vec![0.0; self.node.len()],
                edge_part: vec![0.0; self.edge.len()],
                count: 0,
            };
        }
        let c = self.count as f64;
        SufficientStats {
            node_part: self.node.iter().map(|&x| x as f64 / c).collect(),
            edge_part: self.edge.iter().map(|&x| x as f64 / c).collect(),
            count: self.count,
        }
    }
}

pub fn sufficient_stats(graph: &ChimeraGraph, configs: &[SpinConfig]) -> Result<SufficientStats> {
    let edges: Vec<(usize, usize)> = graph.edge_indices().collect();
    let mut acc = IntAccum::new(graph.node_count(), graph.edge_count());
    for c in configs {
        if c.len() != graph.node_count() {
            return Err(Error::invalid(format!(
                "configuration has {} spins, graph has {} nodes",
                c.len(),
                graph.node_count()
            )));
        }
        acc.add(c.as_slice(), &edges);
    }
    Ok(acc.finish())
}

/// Mean sufficient statistics of a sample set.
pub fn sample_stats(samples: &SampleSet) -> SufficientStats {
    let graph = samples.graph();
    let edges: Vec<(usize, usize)> = graph.edge_indices().collect();
    let (nv, ne) = (graph.node_count(), graph.edge_count());
    samples
        .as_flat()
        .par_chunks(nv * 1024)
        .map(|chunk| {
            let mut acc = IntAccum::new(nv, ne);
            for s in chunk.chunks_exact(nv) {
                acc.add(s, &edges);
            }
            acc
        })
        .reduce(|| IntAccum::new(nv, ne), IntAccum::merge)
        .finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_chimera;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn all_up_config() {
        let g = build_chimera(2).unwrap();
        let st = sufficient_stats(&g, &[SpinConfig::all_up(32)]).unwrap();
        assert!(st.node_part.iter().chain(&st.edge_part).all(|&x| x == 1.0));
        assert_eq!(st.count, 1);
    }

    #[test]
    fn config_and_its_flip() {
        let g = build_chimera(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = SpinConfig::new((0..32).map(|_| if rng.random() { 1 } else { -1 }).collect()).unwrap();
        let st = sufficient_stats(&g, &[s.clone(), s.negated()]).unwrap();
        assert!(st.node_part.iter().all(|&x| x == 0.0));
        let single = sufficient_stats(&g, &[s]).unwrap();
        assert_eq!(st.edge_part, single.edge_part);
    }

    #[test]
    fn empty_accumulator() {
        let g = build_chimera(1).unwrap();
        let st = sufficient_stats(&g, &[]).unwrap();
        assert_eq!(st.count, 0);
        assert!(st.to_vec().iter().all(|&x| x == 0.0));
        assert!(sufficient_stats(&g, &[SpinConfig::all_up(3)]).is_err());
    }

    #[test]
    fn energy_is_inner_product() {
        let g = Arc::new(build_chimera(2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = (0..32).map(|_| rng.random_range(-2.0..2.0)).collect();
        let j = (0..80).map(|_| rng.random_range(-2.0..2.0)).collect();
        let m = IsingModel::new(g.clone(), h, j).unwrap();
        for _ in 0..50 {
            let s = SpinConfig::new((0..32).map(|_| if rng.random() { 1 } else { -1 }).collect()).unwrap();
            let st = sufficient_stats(&g, std::slice::from_ref(&s)).unwrap();
            assert!((st.dot(&m) - m.energy(&s).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_stats_matches_config_stats() {
        let g = Arc::new(build_chimera(1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let configs: Vec<SpinConfig> = (0..3000)
            .map(|_| SpinConfig::new((0..8).map(|_| if rng.random() { 1 } else { -1 }).collect()).unwrap())
            .collect();
        let set = SampleSet::from_configs(g.clone(), &configs).unwrap();
        assert_eq!(sample_stats(&set), sufficient_stats(&g, &configs).unwrap());
    }
}
