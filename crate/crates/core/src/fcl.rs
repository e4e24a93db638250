//! Frustrated-cluster-loop problems and their cluster-level mode catalogs.
//!
//! A cluster is one unit cell whose 16 intra-cell couplers share a
//! ferromagnetic weight. Adjacent clusters are joined by a bundle: the same
//! weight on all 4 parallel inter-cell couplers.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_chimera, ChimeraGraph, EdgeKind};
use crate::model::{IsingModel, SpinConfig};
use crate::rng;

/// Inter-cluster coupler bundle between two grid-adjacent cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub a: (usize, usize),
    pub b: (usize, usize),
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FclSpec {
    /// Side of the host Chimera graph.
    pub n: usize,
    /// Cells used as clusters, in cluster order. Other cells are masked out.
    pub clusters: Vec<(usize, usize)>,
    pub j_intra: Vec<f64>,
    pub bundles: Vec<Bundle>,
    /// Cycles (as bundle indices) that must admit no fully satisfying
    /// cluster assignment.
    #[serde(default)]
    pub frustrated_cycles: Vec<Vec<usize>>,
    /// Required number of ground states in the catalog, if any.
    #[serde(default)]
    pub ground_count: Option<usize>,
}

const LOOP: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 1), (1, 0)];
pub const FCL1_INTER: [f64; 4] = [-0.25, -0.25, -0.25, 0.25];
pub const FCL2_INTER: [f64; 4] = [-0.30, -0.25, -0.20, 0.20];
/// Cluster strengths in cluster order (0,0), (0,1), (1,0), (1,1): strong
/// clusters on one diagonal, weak on the other.
pub const FCL3_INTRA: [f64; 4] = [-2.5, -1.5, -1.5, -2.5];

impl FclSpec {
    /// A four-cluster loop on `C_2` with `inter[i]` on the bundle from
    /// `LOOP[i]` to `LOOP[i + 1]`, around (0,0), (0,1), (1,1), (1,0).
    pub fn four_cluster_loop(j_intra: [f64; 4], inter: [f64; 4]) -> Self {
        let bundles = (0..4)
            .map(|i| Bundle {
                a: LOOP[i],
                b: LOOP[(i + 1) % 4],
                value: inter[i],
            })
            .collect();
        FclSpec {
            n: 2,
            clusters: vec![(0, 0), (0, 1), (1, 0), (1, 1)],
            j_intra: j_intra.to_vec(),
            bundles,
            frustrated_cycles: vec![vec![0, 1, 2, 3]],
            ground_count: None,
        }
    }

    pub fn fcl(variant: u8) -> Result<Self> {
        let uniform = [-2.5; 4];
        let mut spec = match variant {
            1 => Self::four_cluster_loop(uniform, FCL1_INTER),
            2 => Self::four_cluster_loop(uniform, FCL2_INTER),
            3 => Self::four_cluster_loop(FCL3_INTRA, FCL1_INTER),
            4 => Self::four_cluster_loop(FCL3_INTRA, FCL2_INTER),
            v => return Err(Error::invalid(format!("unknown FCL variant {v} (expected 1-4)"))),
        };
        spec.ground_count = Some(if variant % 2 == 1 { 8 } else { 4 });
        Ok(spec)
    }

    /// FCL-3 with every intra-cluster weight divided by 3.
    pub fn scaled_fcl3() -> Self {
        let mut spec = Self::fcl(3).expect("variant 3 exists");
        spec.j_intra.iter_mut().for_each(|j| *j /= 3.0);
        spec
    }

    /// An `n x n` grid of clusters with intra weights drawn from `j_intra_set`
    /// and bundle weights from `j_inter_set`. With `frustrate_all`, the sign of
    /// one bundle per plaquette is flipped as needed so that every elementary
    /// 4-cycle is frustrated.
    pub fn random_grid(
        n: usize,
        j_intra_set: &[f64],
        j_inter_set: &[f64],
        frustrate_all: bool,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 || j_intra_set.is_empty() || j_inter_set.is_empty() {
            return Err(Error::invalid("grid needs n >= 1 and nonempty weight sets"));
        }
        let mut rng = rng::stream(seed, rng::label::PROBLEM);
        let clusters: Vec<(usize, usize)> = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).collect();
        let j_intra = clusters
            .iter()
            .map(|_| *j_intra_set.choose(&mut rng).unwrap())
            .collect();
        let mut bundles = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if c + 1 < n {
                    bundles.push(Bundle {
                        a: (r, c),
                        b: (r, c + 1),
                        value: *j_inter_set.choose(&mut rng).unwrap(),
                    });
                }
                if r + 1 < n {
                    bundles.push(Bundle {
                        a: (r, c),
                        b: (r + 1, c),
                        value: *j_inter_set.choose(&mut rng).unwrap(),
                    });
                }
            }
        }
        let mut spec = FclSpec {
            n,
            clusters,
            j_intra,
            bundles,
            frustrated_cycles: Vec::new(),
            ground_count: None,
        };
        if frustrate_all {
            for r in 0..n.saturating_sub(1) {
                for c in 0..n - 1 {
                    let cycle = spec.plaquette(r, c);
                    if !spec.cycle_sign_frustrated(&cycle) {
                        let bottom = cycle[2];
                        spec.bundles[bottom].value = -spec.bundles[bottom].value;
                    }
                    assert!(spec.cycle_sign_frustrated(&cycle));
                    spec.frustrated_cycles.push(cycle);
                }
            }
        }
        Ok(spec)
    }

    fn bundle_between(&self, p: (usize, usize), q: (usize, usize)) -> Option<usize> {
        self.bundles
            .iter()
            .position(|b| (b.a == p && b.b == q) || (b.a == q && b.b == p))
    }

    /// Bundle indices of the plaquette with top-left cell `(r, c)`, ordered
    /// top, right, bottom, left.
    pub fn plaquette(&self, r: usize, c: usize) -> Vec<usize> {
        [
            ((r, c), (r, c + 1)),
            ((r, c + 1), (r + 1, c + 1)),
            ((r + 1, c), (r + 1, c + 1)),
            ((r, c), (r + 1, c)),
        ]
        .iter()
        .map(|&(p, q)| self.bundle_between(p, q).expect("grid bundle present"))
        .collect()
    }

    /// Sign criterion: a cycle is frustrated iff the product of `-sign(J)`
    /// over its bundles is negative.
    pub fn cycle_sign_frustrated(&self, cycle: &[usize]) -> bool {
        let antiferro = cycle.iter().filter(|&&b| self.bundles[b].value > 0.0).count();
        let zero = cycle.iter().any(|&b| self.bundles[b].value == 0.0);
        !zero && antiferro % 2 == 1
    }

    /// Exhaustive criterion: no assignment of the cycle's clusters satisfies
    /// every bundle on it.
    pub fn cycle_frustrated(&self, cycle: &[usize]) -> bool {
        let mut cells: Vec<(usize, usize)> = cycle
            .iter()
            .flat_map(|&b| [self.bundles[b].a, self.bundles[b].b])
            .collect();
        cells.sort_unstable();
        cells.dedup();
        let spin = |mask: usize, cell: (usize, usize)| {
            let i = cells.iter().position(|&c| c == cell).unwrap();
            if mask >> i & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        };
        (0..1usize << cells.len()).all(|mask| {
            cycle.iter().any(|&b| {
                let bd = &self.bundles[b];
                bd.value * spin(mask, bd.a) * spin(mask, bd.b) >= 0.0
            })
        })
    }

    fn validate(&self) -> Result<()> {
        if self.clusters.len() != self.j_intra.len() {
            return Err(Error::InvalidSpec(format!(
                "{} clusters but {} intra weights",
                self.clusters.len(),
                self.j_intra.len()
            )));
        }
        for (&(r, c), &j) in self.clusters.iter().zip(&self.j_intra) {
            if r >= self.n || c >= self.n {
                return Err(Error::InvalidSpec(format!("cluster ({r}, {c}) outside C_{}", self.n)));
            }
            if !(j < 0.0 && j.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "cluster ({r}, {c}) has non-ferromagnetic J_intra = {j}"
                )));
            }
        }
        let set: BTreeSet<_> = self.clusters.iter().collect();
        if set.len() != self.clusters.len() {
            return Err(Error::InvalidSpec("duplicate cluster cell".into()));
        }
        for b in &self.bundles {
            let adjacent =
                (b.a.0 == b.b.0 && b.a.1.abs_diff(b.b.1) == 1) || (b.a.1 == b.b.1 && b.a.0.abs_diff(b.b.0) == 1);
            if !adjacent || !set.contains(&b.a) || !set.contains(&b.b) {
                return Err(Error::InvalidSpec(format!(
                    "bundle {:?}-{:?} does not join adjacent clusters",
                    b.a, b.b
                )));
            }
            if !b.value.is_finite() {
                return Err(Error::InvalidSpec("non-finite bundle weight".into()));
            }
        }
        for (i, cycle) in self.frustrated_cycles.iter().enumerate() {
            if cycle.iter().any(|&b| b >= self.bundles.len()) {
                return Err(Error::InvalidSpec(format!("cycle {i} names a missing bundle")));
            }
            if !self.cycle_frustrated(cycle) {
                return Err(Error::InvalidSpec(format!(
                    "cycle {i} is not frustrated: some cluster assignment satisfies all its bundles"
                )));
            }
        }
        Ok(())
    }

    fn cluster_index(&self, row: usize, col: usize) -> Option<usize> {
        self.clusters.iter().position(|&c| c == (row, col))
    }

    /// Builds the model, then checks the catalog against `ground_count`.
    pub fn build(&self) -> Result<IsingModel> {
        self.validate()?;
        let model = self.build_unchecked()?;
        if let Some(expected) = self.ground_count {
            let catalog = enumerate_cluster_minima(&model, self)?;
            if catalog.ground_count != expected {
                return Err(Error::InvalidSpec(format!(
                    "catalog has {} ground states, expected {expected}",
                    catalog.ground_count
                )));
            }
        }
        Ok(model)
    }

    fn build_unchecked(&self) -> Result<IsingModel> {
        let full = build_chimera(self.n)?;
        let masked: BTreeSet<usize> = full
            .nodes()
            .iter()
            .copied()
            .filter(|&id| {
                let p = full.cell_of(id);
                self.cluster_index(p.row, p.col).is_none()
            })
            .collect();
        let graph = Arc::new(if masked.is_empty() {
            full
        } else {
            ChimeraGraph::masked(self.n, &masked)?
        });
        let j = graph
            .edge_kinds()
            .iter()
            .map(|kind| match *kind {
                EdgeKind::Intra { row, col, .. } => self.j_intra[self.cluster_index(row, col).unwrap()],
                EdgeKind::Vertical { row, col, .. } => self
                    .bundle_between((row, col), (row + 1, col))
                    .map_or(0.0, |b| self.bundles[b].value),
                EdgeKind::Horizontal { row, col, .. } => self
                    .bundle_between((row, col), (row, col + 1))
                    .map_or(0.0, |b| self.bundles[b].value),
            })
            .collect();
        let h = vec![0.0; graph.node_count()];
        IsingModel::new(graph, h, j)
    }
}

pub fn make_fcl(variant: u8) -> Result<IsingModel> {
    FclSpec::fcl(variant)?.build()
}

pub fn make_scaled_fcl3() -> Result<IsingModel> {
    FclSpec::scaled_fcl3().build()
}

pub fn make_random_fcl_grid(
    n: usize,
    j_intra_set: &[f64],
    j_inter_set: &[f64],
    frustrate_all: bool,
    seed: u64,
) -> Result<IsingModel> {
    FclSpec::random_grid(n, j_intra_set, j_inter_set, frustrate_all, seed)?.build()
}

/// Zero fields and independent uniform +-1 couplings on the full `C_n`.
pub fn make_random_pm1(n: usize, seed: u64) -> Result<IsingModel> {
    let graph = Arc::new(build_chimera(n)?);
    let mut rng = rng::stream(seed, rng::label::PROBLEM);
    let j = (0..graph.edge_count())
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    IsingModel::new(graph.clone(), vec![0.0; graph.node_count()], j)
}

#[derive(Clone, Debug)]
pub struct ModeEntry {
    /// Cluster spins in cluster order.
    pub assignment: Vec<i8>,
    pub state: SpinConfig,
    pub energy: f64,
    pub ground: bool,
}

/// The cluster-aligned local minima, indexed by assignment: entry `a` has
/// cluster `c` at +1 iff bit `c` of `a` is set.
#[derive(Clone, Debug)]
pub struct ModeCatalog {
    pub entries: Vec<ModeEntry>,
    pub ground_energy: f64,
    pub ground_count: usize,
    /// Lowest excited energy minus the ground energy (0 if every entry is ground).
    pub gap: f64,
    graph: Arc<ChimeraGraph>,
}

const ENERGY_TOL: f64 = 1e-9;
pub const MAX_CATALOG_CLUSTERS: usize = 20;

impl ModeCatalog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn graph(&self) -> &Arc<ChimeraGraph> {
        &self.graph
    }

    pub fn states(&self) -> Vec<SpinConfig> {
        self.entries.iter().map(|e| e.state.clone()).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.energy).collect()
    }

    /// Distinct excited energy levels, ascending.
    pub fn excited_levels(&self) -> Vec<f64> {
        let mut levels: Vec<f64> = Vec::new();
        let mut excited: Vec<f64> = self.entries.iter().filter(|e| !e.ground).map(|e| e.energy).collect();
        excited.sort_by(f64::total_cmp);
        for e in excited {
            if levels.last().is_none_or(|&l| e - l > ENERGY_TOL) {
                levels.push(e);
            }
        }
        levels
    }

    /// Entry indices sorted by energy (ties by assignment index).
    pub fn by_energy(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by(|&a, &b| {
            self.entries[a]
                .energy
                .total_cmp(&self.entries[b].energy)
                .then(a.cmp(&b))
        });
        idx
    }

    /// Recomputes energies and labels under another model on the same graph.
    pub fn relabel(&self, model: &IsingModel) -> Result<ModeCatalog> {
        let states = self.states();
        let energies: Vec<f64> = states.iter().map(|s| model.energy_of(s.as_slice())).collect();
        Ok(Self::assemble(
            self.entries.iter().map(|e| e.assignment.clone()).collect(),
            states,
            energies,
            self.graph.clone(),
        ))
    }

    pub(crate) fn assemble(
        assignments: Vec<Vec<i8>>,
        states: Vec<SpinConfig>,
        energies: Vec<f64>,
        graph: Arc<ChimeraGraph>,
    ) -> ModeCatalog {
        let ground_energy = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let entries: Vec<ModeEntry> = assignments
            .into_iter()
            .zip(states)
            .zip(&energies)
            .map(|((assignment, state), &energy)| ModeEntry {
                assignment,
                state,
                energy,
                ground: energy - ground_energy <= ENERGY_TOL,
            })
            .collect();
        let ground_count = entries.iter().filter(|e| e.ground).count();
        let gap = entries
            .iter()
            .filter(|e| !e.ground)
            .map(|e| e.energy - ground_energy)
            .fold(f64::INFINITY, f64::min);
        ModeCatalog {
            entries,
            ground_energy,
            ground_count,
            gap: if gap.is_finite() { gap } else { 0.0 },
            graph,
        }
    }
}

/// Energy change from flipping node index `v` in `s`.
pub fn flip_delta(model: &IsingModel, s: &[i8], v: usize) -> f64 {
    let field: f64 = model.h()[v]
        + model
            .graph()
            .neighbors(v)
            .iter()
            .map(|&(u, e)| model.j()[e] * f64::from(s[u]))
            .sum::<f64>();
    -2.0 * f64::from(s[v]) * field
}

pub fn enumerate_cluster_minima(model: &IsingModel, spec: &FclSpec) -> Result<ModeCatalog> {
    let graph = model.graph();
    let k = spec.clusters.len();
    if k > MAX_CATALOG_CLUSTERS {
        return Err(Error::ResourceLimit(format!(
            "{k} clusters: catalog would have 2^{k} entries (limit {MAX_CATALOG_CLUSTERS} clusters)"
        )));
    }
    let node_cluster: Vec<usize> = graph
        .nodes()
        .iter()
        .map(|&id| {
            let p = graph.cell_of(id);
            spec.cluster_index(p.row, p.col)
                .ok_or_else(|| Error::InvalidSpec(format!("node {id} lies outside every cluster")))
        })
        .collect::<Result<_>>()?;
    let mut assignments = Vec::with_capacity(1 << k);
    let mut states = Vec::with_capacity(1 << k);
    let mut energies = Vec::with_capacity(1 << k);
    for a in 0..1usize << k {
        let assignment: Vec<i8> = (0..k).map(|c| if a >> c & 1 == 1 { 1 } else { -1 }).collect();
        let spins: Vec<i8> = node_cluster.iter().map(|&c| assignment[c]).collect();
        if let Some(v) = (0..spins.len()).find(|&v| flip_delta(model, &spins, v) <= 0.0) {
            return Err(Error::SpecDegenerate(format!(
                "cluster assignment {a} is not a local minimum: flipping node {} does not raise the energy",
                graph.nodes()[v]
            )));
        }
        energies.push(model.energy_of(&spins));
        states.push(SpinConfig::new(spins)?);
        assignments.push(assignment);
    }
    Ok(ModeCatalog::assemble(
        assignments,
        states,
        energies,
        model.graph_arc().clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalog(variant: u8) -> ModeCatalog {
        let spec = FclSpec::fcl(variant).unwrap();
        enumerate_cluster_minima(&spec.build().unwrap(), &spec).unwrap()
    }

    #[test]
    fn fcl1_structure() {
        let c = catalog(1);
        assert_eq!(c.len(), 16);
        assert_eq!(c.ground_count, 8);
        assert_eq!(c.gap, 4.0);
        assert_eq!(c.excited_levels().len(), 1);
    }

    #[test]
    fn fcl2_structure() {
        let c = catalog(2);
        assert_eq!(c.ground_count, 4);
        assert!(c.excited_levels().len() >= 3);
    }

    #[test]
    fn fcl3_and_fcl4_build() {
        assert_eq!(catalog(3).ground_count, 8);
        assert_eq!(catalog(4).ground_count, 4);
    }

    #[test]
    fn fcl1_energy_is_minimum_over_aligned_states() {
        let model = make_fcl(1).unwrap();
        let c = catalog(1);
        let min = c.energies().into_iter().fold(f64::INFINITY, f64::min);
        for e in c.entries.iter().filter(|e| e.ground) {
            assert_eq!(model.energy_of(e.state.as_slice()), min);
        }
    }

    #[test]
    fn cluster_flip_barrier() {
        // flipping one side of a cell breaks all 16 of its intra bonds
        let model = make_fcl(1).unwrap();
        let c = catalog(1);
        let s = c.entries[0].state.clone();
        let g = model.graph();
        let left: Vec<usize> = (0..4).map(|i| g.index_of(i).unwrap()).collect();
        let half = s.flipped_at(&left);
        let rise = model.energy_of(half.as_slice()) - model.energy_of(s.as_slice());
        assert!(rise >= 16.0 * 2.5 * 2.0 - 4.0 * 0.5 - 1e-12);
        assert!(c.entries.iter().all(|e| {
            let st = e.state.as_slice();
            (0..32).all(|v| flip_delta(&model, st, v) > 0.0)
        }));
    }

    #[test]
    fn unfrustrated_loop_rejected() {
        let spec = FclSpec::four_cluster_loop([-2.5; 4], [-0.25; 4]);
        assert!(matches!(spec.build(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn spec_default_fcl2_weights_give_two_ground_states() {
        let mut spec = FclSpec::four_cluster_loop([-2.5; 4], [-0.30, -0.25, -0.20, 0.25]);
        spec.ground_count = Some(4);
        let err = spec.build().unwrap_err().to_string();
        assert!(err.contains("2 ground states"), "{err}");
    }

    #[test]
    fn weak_clusters_are_degenerate() {
        let spec = FclSpec::four_cluster_loop([-0.05; 4], FCL1_INTER);
        let model = spec.build().unwrap();
        assert!(matches!(
            enumerate_cluster_minima(&model, &spec),
            Err(Error::SpecDegenerate(_))
        ));
    }

    #[test]
    fn scaled_fcl3() {
        let spec = FclSpec::scaled_fcl3();
        assert!((spec.j_intra[0] - (-2.5 / 3.0)).abs() < 1e-15);
        let model = spec.build().unwrap();
        let scaled = enumerate_cluster_minima(&model, &spec).unwrap();
        let orig = catalog(3);
        for (a, b) in scaled.entries.iter().zip(&orig.entries) {
            assert_eq!(a.assignment, b.assignment);
            assert_eq!(a.state, b.state);
            assert_eq!(a.ground, b.ground);
        }
        assert!((scaled.gap - orig.gap).abs() < 1e-12);
        // every catalog energy shifts by the same intra-bond amount
        let shift = orig.entries[0].energy - scaled.entries[0].energy;
        for (a, b) in scaled.entries.iter().zip(&orig.entries) {
            assert!((b.energy - a.energy - shift).abs() < 1e-12);
        }
    }

    #[test]
    fn catalogs_are_flip_symmetric() {
        for v in 1..=4 {
            let c = catalog(v);
            let full = c.len() - 1;
            for (a, e) in c.entries.iter().enumerate() {
                assert!((e.energy - c.entries[full ^ a].energy).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn c5_grid_shape() {
        let m = make_random_fcl_grid(5, &[-2.5], &[0.25, -0.25], false, 3).unwrap();
        assert_eq!(m.node_count(), 200);
        let spec = FclSpec::random_grid(5, &[-2.5], &[0.25, -0.25], false, 3).unwrap();
        assert_eq!(spec.clusters.len(), 25);
        assert_eq!(spec.bundles.len(), 40);
    }

    #[test]
    fn singleton_sets_are_seed_independent() {
        let a = make_random_fcl_grid(3, &[-2.5], &[-0.25], false, 1).unwrap();
        let b = make_random_fcl_grid(3, &[-2.5], &[-0.25], false, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_pm1_sizes() {
        assert_eq!(make_random_pm1(3, 1).unwrap().node_count(), 72);
        assert_eq!(make_random_pm1(5, 1).unwrap().node_count(), 200);
        assert_eq!(make_random_pm1(4, 9).unwrap(), make_random_pm1(4, 9).unwrap());
        let m = make_random_pm1(3, 1).unwrap();
        assert!(m.h().iter().all(|&h| h == 0.0));
        assert!(m.j().iter().all(|&j| j.abs() == 1.0));
    }

    proptest! {
        #[test]
        fn frustrate_all_frustrates_every_plaquette(seed in any::<u64>(), n in 2usize..=5) {
            let spec = FclSpec::random_grid(n, &[-1.5, -2.5], &[-0.5, -0.25, 0.38], true, seed).unwrap();
            prop_assert_eq!(spec.frustrated_cycles.len(), (n - 1) * (n - 1));
            for cycle in &spec.frustrated_cycles {
                prop_assert!(spec.cycle_frustrated(cycle));
                prop_assert!(spec.cycle_sign_frustrated(cycle));
            }
            let magnitudes = [0.5, 0.25, 0.38];
            prop_assert!(spec.bundles.iter().all(|b| magnitudes.contains(&b.value.abs())));
            prop_assert!(spec.build().is_ok());
        }
    }
}
