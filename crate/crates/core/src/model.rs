//! Ising models over Chimera graphs, spin configurations and sample sets.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::ChimeraGraph;

/// A configuration of `±1` spins in canonical node order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::invalid(format!("spin value {bad} is not ±1")));
        }
        Ok(SpinConfig(spins))
    }

    pub fn all_up(len: usize) -> Self {
        SpinConfig(vec![1; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }

    /// Global spin flip.
    pub fn negated(&self) -> Self {
        SpinConfig(self.0.iter().map(|&s| -s).collect())
    }

    /// Flips the spins at the given node positions.
    pub fn flipped_at(&self, positions: &[usize]) -> Self {
        let mut s = self.0.clone();
        for &i in positions {
            s[i] = -s[i];
        }
        SpinConfig(s)
    }

    /// Boolean view, `x = (1 + s) / 2`.
    pub fn to_bool(&self) -> Vec<u8> {
        spin_to_bool(&self.0)
    }

    pub fn from_bool(bits: &[u8]) -> Result<Self> {
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("boolean value {bad} is not 0/1")));
        }
        Ok(SpinConfig(bool_to_spin(bits)))
    }
}

pub fn spin_to_bool(spins: &[i8]) -> Vec<u8> {
    spins.iter().map(|&s| ((1 + s) / 2) as u8).collect()
}

pub fn bool_to_spin(bits: &[u8]) -> Vec<i8> {
    bits.iter().map(|&b| 2 * b as i8 - 1).collect()
}

/// Ising energy model `E(s) = sum_v h_v s_v + sum_(u,v) J_uv s_u s_v`.
///
/// The parameter vector `theta` is `h` followed by `J`, matching the layout
/// of [`SufficientStats`](crate::stats::SufficientStats).
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    graph: Arc<ChimeraGraph>,
    h: Vec<f64>,
    j: Vec<f64>,
}

impl IsingModel {
    pub fn new(graph: Arc<ChimeraGraph>, h: Vec<f64>, j: Vec<f64>) -> Result<Self> {
        if h.len() != graph.node_count() {
            return Err(Error::invalid(format!(
                "h has {} entries, graph has {} nodes",
                h.len(),
                graph.node_count()
            )));
        }
        if j.len() != graph.edge_count() {
            return Err(Error::invalid(format!(
                "J has {} entries, graph has {} edges",
                j.len(),
                graph.edge_count()
            )));
        }
        if h.iter().chain(j.iter()).any(|w| !w.is_finite()) {
            return Err(Error::invalid("model weights must be finite"));
        }
        Ok(IsingModel { graph, h, j })
    }

    pub fn zeros(graph: Arc<ChimeraGraph>) -> Self {
        let (nv, ne) = (graph.node_count(), graph.edge_count());
        IsingModel {
            graph,
            h: vec![0.0; nv],
            j: vec![0.0; ne],
        }
    }

    pub fn graph(&self) -> &ChimeraGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<ChimeraGraph> {
        &self.graph
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn j(&self) -> &[f64] {
        &self.j
    }

    pub fn node_count(&self) -> usize {
        self.h.len()
    }

    pub fn param_count(&self) -> usize {
        self.h.len() + self.j.len()
    }

    pub fn theta(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.param_count());
        t.extend_from_slice(&self.h);
        t.extend_from_slice(&self.j);
        t
    }

    pub fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.param_count() {
            return Err(Error::invalid(format!(
                "parameter vector has {} entries, model has {}",
                theta.len(),
                self.param_count()
            )));
        }
        let nv = self.h.len();
        IsingModel::new(self.graph.clone(), theta[..nv].to_vec(), theta[nv..].to_vec())
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        IsingModel {
            graph: self.graph.clone(),
            h: self.h.iter().map(|w| w * factor).collect(),
            j: self.j.iter().map(|w| w * factor).collect(),
        }
    }

    pub fn conforms(&self, s: &[i8]) -> bool {
        s.len() == self.h.len()
    }

    pub fn energy(&self, s: &SpinConfig) -> Result<f64> {
        if !self.conforms(s.as_slice()) {
            return Err(Error::invalid(format!(
                "configuration has {} spins, model has {} nodes",
                s.len(),
                self.node_count()
            )));
        }
        Ok(self.energy_of(s.as_slice()))
    }

    /// Energy of a raw spin slice; the caller guarantees the length.
    pub fn energy_of(&self, s: &[i8]) -> f64 {
        let mut e: f64 = self.h.iter().zip(s).map(|(&h, &sv)| h * sv as f64).sum();
        for ((u, v), &w) in self.graph.edge_indices().zip(&self.j) {
            e += w * (s[u] * s[v]) as f64;
        }
        e
    }

    /// Spin-reversal (gauge) transform for the node positions in `flips`.
    ///
    /// `energy(gauged, flip(s)) == energy(self, s)` for every `s`.
    pub fn gauge_transform(&self, flips: &BTreeSet<usize>) -> Result<Self> {
        if let Some(&bad) = flips.iter().find(|&&i| i >= self.node_count()) {
            return Err(Error::invalid(format!("flip position {bad} out of range")));
        }
        let h = self
            .h
            .iter()
            .enumerate()
            .map(|(i, &w)| if flips.contains(&i) { -w } else { w })
            .collect();
        let j = self
            .graph
            .edge_indices()
            .zip(&self.j)
            .map(|((u, v), &w)| {
                if flips.contains(&u) != flips.contains(&v) {
                    -w
                } else {
                    w
                }
            })
            .collect();
        Ok(IsingModel {
            graph: self.graph.clone(),
            h,
            j,
        })
    }

    /// The same model on the transposed graph (rows and columns swapped).
    pub fn transposed(&self) -> Self {
        let g = &self.graph;
        let t = Arc::new(g.transposed());
        let mut h = vec![0.0; t.node_count()];
        for (i, &v) in g.nodes().iter().enumerate() {
            h[t.index_of(g.transpose_id(v)).unwrap()] = self.h[i];
        }
        let mut j = vec![0.0; t.edge_count()];
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            let te = t
                .edge_index(g.transpose_id(u), g.transpose_id(v))
                .expect("transpose preserves edges");
            j[te] = self.j[e];
        }
        IsingModel { graph: t, h, j }
    }
}

/// A collection of spin configurations over one graph, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    graph: Arc<ChimeraGraph>,
    spins: Vec<i8>,
}

impl SampleSet {
    pub fn new(graph: Arc<ChimeraGraph>) -> Self {
        SampleSet {
            graph,
            spins: Vec::new(),
        }
    }

    pub fn from_flat(graph: Arc<ChimeraGraph>, spins: Vec<i8>) -> Result<Self> {
        let width = graph.node_count();
        if width == 0 || spins.len() % width != 0 {
            return Err(Error::invalid(format!(
                "flat sample buffer of {} spins is not a multiple of {width}",
                spins.len()
            )));
        }
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid("sample contains a spin that is not ±1"));
        }
        Ok(SampleSet { graph, spins })
    }

    pub fn from_configs(graph: Arc<ChimeraGraph>, configs: &[SpinConfig]) -> Result<Self> {
        let mut set = SampleSet::new(graph);
        for c in configs {
            set.push(c.as_slice())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, s: &[i8]) -> Result<()> {
        if s.len() != self.graph.node_count() {
            return Err(Error::invalid(format!(
                "configuration has {} spins, graph has {} nodes",
                s.len(),
                self.graph.node_count()
            )));
        }
        self.spins.extend_from_slice(s);
        Ok(())
    }

    pub fn graph(&self) -> &ChimeraGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> &Arc<ChimeraGraph> {
        &self.graph
    }

    pub fn width(&self) -> usize {
        self.graph.node_count()
    }

    pub fn len(&self) -> usize {
        self.spins.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn get(&self, i: usize) -> &[i8] {
        let w = self.width();
        &self.spins[i * w..(i + 1) * w]
    }

    pub fn config(&self, i: usize) -> SpinConfig {
        SpinConfig(self.get(i).to_vec())
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, i8> {
        self.spins.chunks_exact(self.width())
    }

    pub fn as_flat(&self) -> &[i8] {
        &self.spins
    }

    pub fn conforms_to(&self, graph: &ChimeraGraph) -> bool {
        std::ptr::eq(&*self.graph, graph) || *self.graph == *graph
    }

    /// Samples at the given row positions, in order.
    pub fn select(&self, rows: &[usize]) -> SampleSet {
        let mut spins = Vec::with_capacity(rows.len() * self.width());
        for &r in rows {
            spins.extend_from_slice(self.get(r));
        }
        SampleSet {
            graph: self.graph.clone(),
            spins,
        }
    }

    /// Splits into (even rows, odd rows): the interleaved 50/50 train/test split.
    pub fn split_interleaved(&self) -> (SampleSet, SampleSet) {
        let even: Vec<usize> = (0..self.len()).step_by(2).collect();
        let odd: Vec<usize> = (1..self.len()).step_by(2).collect();
        (self.select(&even), self.select(&odd))
    }

    pub fn extend(&mut self, other: &SampleSet) -> Result<()> {
        if !other.conforms_to(&self.graph) {
            return Err(Error::invalid("cannot merge sample sets over different graphs"));
        }
        self.spins.extend_from_slice(&other.spins);
        Ok(())
    }
}
