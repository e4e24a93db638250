//! Transverse-field Ising distributions for small models.
//!
//! The Hamiltonian is `H = beta * diag(E(s)) + beta * sum_i gamma_i X_i`,
//! where `X_i` flips qubit `i`. The state index uses bit `i` for node
//! index `i` (set = spin +1). Everything is computed densely from a full
//! spectral decomposition, so the qubit count is capped.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{IsingModel, SpinConfig};
use crate::stats::SufficientStats;

pub const DEFAULT_QUBIT_CAP: usize = 12;
pub const DEFAULT_GAMMA: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct TransverseHamiltonian {
    n_qubits: usize,
    beta: f64,
    diag: Vec<f64>,
    gamma: Vec<f64>,
}

impl TransverseHamiltonian {
    /// `energies[s]` is the classical energy of basis state `s`; `gamma[i]`
    /// is the transverse amplitude on qubit `i`.
    pub fn from_energies(energies: &[f64], gamma: &[f64], beta: f64) -> Result<Self> {
        let n = gamma.len();
        if energies.len() != 1 << n {
            return Err(Error::invalid(format!(
                "{} energies for {n} qubits (expected {})",
                energies.len(),
                1usize << n
            )));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid(format!("beta must be positive, got {beta}")));
        }
        if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::invalid("gamma must be finite and nonnegative"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("energies must be finite"));
        }
        Ok(TransverseHamiltonian {
            n_qubits: n,
            beta,
            diag: energies.iter().map(|e| beta * e).collect(),
            gamma: gamma.to_vec(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Diagonal of `H` (energies times beta).
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let dim = self.diag.len();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag));
        for s in 0..dim {
            for (i, &g) in self.gamma.iter().enumerate() {
                if g != 0.0 {
                    m[(s, s ^ (1 << i))] = self.beta * g;
                }
            }
        }
        m
    }
}

pub fn build_hamiltonian(model: &IsingModel, gamma: f64, beta: f64) -> Result<TransverseHamiltonian> {
    let gamma = vec![gamma; model.node_count()];
    build_hamiltonian_with(model, &gamma, beta, DEFAULT_QUBIT_CAP)
}

/// As [`build_hamiltonian`] with a per-qubit transverse field and an explicit cap.
pub fn build_hamiltonian_with(
    model: &IsingModel,
    gamma: &[f64],
    beta: f64,
    cap: usize,
) -> Result<TransverseHamiltonian> {
    let n = model.node_count();
    if n > cap {
        return Err(Error::ResourceLimit(format!(
            "{n} qubits exceeds the dense quantum cap of {cap}"
        )));
    }
    if gamma.len() != n {
        return Err(Error::invalid(format!("{} gamma values for {n} qubits", gamma.len())));
    }
    let energies: Vec<f64> = (0..1usize << n).map(|s| model.energy_of(&basis_spins(s, n))).collect();
    TransverseHamiltonian::from_energies(&energies, gamma, beta)
}

/// Spins of basis state `s` over `n` qubits.
pub fn basis_spins(s: usize, n: usize) -> Vec<i8> {
    (0..n).map(|i| if s >> i & 1 == 1 { 1 } else { -1 }).collect()
}

/// Basis index of a spin configuration.
pub fn basis_index(spins: &[i8]) -> usize {
    spins
        .iter()
        .enumerate()
        .filter(|(_, &x)| x == 1)
        .fold(0, |acc, (i, _)| acc | 1 << i)
}

#[derive(Clone, Debug)]
pub struct DiagonalDistribution {
    pub probs: Vec<f64>,
    pub log_zbar: f64,
}

/// Diagonal of `exp(-H) / tr exp(-H)`.
pub fn quantum_diagonal_distribution(h: &TransverseHamiltonian) -> Result<DiagonalDistribution> {
    let dim = h.diag.len();
    let eig = SymmetricEigen::try_new(h.to_matrix(), 1e-14, 100 * dim.max(10))
        .ok_or_else(|| Error::Numeric(format!("eigensolver did not converge on a {dim}x{dim} Hamiltonian")))?;
    let lambda = &eig.eigenvalues;
    if lambda.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    let lmin = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = lambda.iter().map(|l| (-(l - lmin)).exp()).collect();
    let trace: f64 = w.iter().sum();
    let v = &eig.eigenvectors;
    let probs = (0..dim)
        .map(|s| {
            let d: f64 = (0..dim).map(|k| v[(s, k)] * v[(s, k)] * w[k]).sum();
            d / trace
        })
        .collect();
    Ok(DiagonalDistribution {
        probs,
        log_zbar: -lmin + trace.ln(),
    })
}

/// `E_{P0}[phi]` under the diagonal distribution of `model`.
pub fn quantum_stats(model: &IsingModel, dist: &DiagonalDistribution) -> SufficientStats {
    let n = model.node_count();
    let mut node = vec![0.0; n];
    let mut edge = vec![0.0; model.graph().edge_count()];
    for (s, &p) in dist.probs.iter().enumerate() {
        for (i, acc) in node.iter_mut().enumerate() {
            *acc += if s >> i & 1 == 1 { p } else { -p };
        }
        for (acc, (u, v)) in edge.iter_mut().zip(model.graph().edge_indices()) {
            *acc += if (s >> u & 1) == (s >> v & 1) { p } else { -p };
        }
    }
    SufficientStats::from_expectations(node, edge)
}

/// Gradient of the bound `Lbar(theta) = -beta <theta, E_D phi> - ln Zbar`:
/// `beta * (E_{P0}[phi] - E_D[phi])`.
pub fn quantum_gradient_datum(
    model: &IsingModel,
    gamma: &[f64],
    beta: f64,
    data: &SufficientStats,
) -> Result<Vec<f64>> {
    let h = build_hamiltonian_with(model, gamma, beta, DEFAULT_QUBIT_CAP)?;
    let dist = quantum_diagonal_distribution(&h)?;
    let model_stats = quantum_stats(model, &dist);
    let d = data.to_vec();
    if d.len() != model.param_count() {
        return Err(Error::invalid("data statistics do not match the model"));
    }
    Ok(model_stats
        .to_vec()
        .iter()
        .zip(&d)
        .map(|(m, x)| beta * (m - x))
        .collect())
}

/// The Golden-Thompson lower bound on the quantum log-likelihood.
pub fn golden_thompson_bound(
    model: &IsingModel,
    dist: &DiagonalDistribution,
    beta: f64,
    data: &SufficientStats,
) -> f64 {
    -beta * data.dot(model) - dist.log_zbar
}

/// Mean log-probability of `data` (given as a distribution over basis
/// states) under `dist`.
pub fn quantum_log_likelihood(dist: &DiagonalDistribution, data: &[f64]) -> f64 {
    data.iter()
        .zip(&dist.probs)
        .filter(|(d, _)| **d > 0.0)
        .map(|(d, p)| d * p.ln())
        .sum()
}

/// One effective spin per cluster. `states[a]` is the full configuration for
/// cluster assignment `a` (bit `c` set = cluster `c` is +1).
#[derive(Clone, Debug)]
pub struct ClusterReduction {
    pub states: Vec<SpinConfig>,
    clusters: usize,
}

impl ClusterReduction {
    pub fn new(states: Vec<SpinConfig>) -> Result<Self> {
        if !states.len().is_power_of_two() {
            return Err(Error::invalid(format!(
                "{} cluster states is not a power of two",
                states.len()
            )));
        }
        let clusters = states.len().trailing_zeros() as usize;
        Ok(ClusterReduction { states, clusters })
    }

    pub fn from_catalog(catalog: &crate::fcl::ModeCatalog) -> Result<Self> {
        Self::new(catalog.states())
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters
    }

    /// Effective Hamiltonian over cluster assignments, with classical
    /// energies taken from `model` on the expanded states and `gamma[c]`
    /// flipping cluster `c`.
    pub fn hamiltonian(&self, model: &IsingModel, gamma: &[f64], beta: f64) -> Result<TransverseHamiltonian> {
        if gamma.len() != self.clusters {
            return Err(Error::invalid(format!(
                "{} gamma values for {} clusters",
                gamma.len(),
                self.clusters
            )));
        }
        let energies: Vec<f64> = self.states.iter().map(|s| model.energy_of(s.as_slice())).collect();
        TransverseHamiltonian::from_energies(&energies, gamma, beta)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::sync::Arc;

    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::exact::exact_mode_probabilities;
    use crate::graph::ChimeraGraph;
    use crate::testutil::random_masked_model;

    fn single_qubit(h: f64) -> IsingModel {
        let masked: BTreeSet<usize> = (1..8).collect();
        let g = Arc::new(ChimeraGraph::masked(1, &masked).unwrap());
        IsingModel::new(g, vec![h], vec![]).unwrap()
    }

    fn small_model(rng: &mut ChaCha8Rng, max: usize) -> IsingModel {
        loop {
            let m = random_masked_model(rng, 1, max, 1.0);
            if m.node_count() >= 2 {
                return m;
            }
        }
    }

    #[test]
    fn one_qubit_matrix() {
        let h = build_hamiltonian(&single_qubit(0.7), 0.3, 2.0).unwrap();
        let m = h.to_matrix();
        assert_abs_diff_eq!(m[(1, 1)], 1.4);
        assert_abs_diff_eq!(m[(0, 0)], -1.4);
        assert_abs_diff_eq!(m[(0, 1)], 0.6);
        assert_abs_diff_eq!(m[(1, 0)], 0.6);
    }

    #[test]
    fn off_diagonal_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = small_model(&mut rng, 6);
        let n = model.node_count();
        let m = build_hamiltonian(&model, 0.4, 1.0).unwrap().to_matrix();
        let off = (0..1 << n)
            .flat_map(|r| (0..1 << n).map(move |c| (r, c)))
            .filter(|&(r, c)| r != c && m[(r, c)] != 0.0)
            .count();
        assert_eq!(off, n << n);
        let diag_only = build_hamiltonian(&model, 0.0, 1.0).unwrap().to_matrix();
        assert!((0..1 << n).all(|r| (0..1 << n).all(|c| r == c || diag_only[(r, c)] == 0.0)));
    }

    #[test]
    fn two_by_two_closed_form() {
        // H = [[-1, 1], [1, 1]] in (down, up) order; eigenvalues +-sqrt 2
        let dist = quantum_diagonal_distribution(&build_hamiltonian(&single_qubit(1.0), 1.0, 1.0).unwrap()).unwrap();
        let l = 2f64.sqrt();
        // eigenvector for -sqrt2: (1, 1 - sqrt2) normalized, component on "down"
        let u = [1.0, 1.0 - l];
        let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let (u0, u1) = (u[0] / nu, u[1] / nu);
        let z = 2.0 * l.cosh();
        let p_down = (u0 * u0 * l.exp() + u1 * u1 * (-l).exp()) / z;
        assert_abs_diff_eq!(dist.probs[0], p_down, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.probs[1], 1.0 - p_down, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.log_zbar, z.ln(), epsilon = 1e-12);
    }

    #[test]
    fn zero_field_is_classical_boltzmann() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let model = small_model(&mut rng, 8);
            let beta = rng.random_range(0.3..2.0);
            let dist = quantum_diagonal_distribution(&build_hamiltonian(&model, 0.0, beta).unwrap()).unwrap();
            let n = model.node_count();
            let states: Vec<SpinConfig> = (0..1 << n)
                .map(|s| SpinConfig::new(basis_spins(s, n)).unwrap())
                .collect();
            let exact = exact_mode_probabilities(&model, beta, &states).unwrap();
            let tv: f64 = exact.iter().zip(&dist.probs).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            assert!(tv < 1e-10, "tv = {tv}");
        }
    }

    #[test]
    fn expm_cross_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = small_model(&mut rng, 4);
        let h = build_hamiltonian(&model, 0.6, 1.3).unwrap();
        let dist = quantum_diagonal_distribution(&h).unwrap();
        // Taylor series of exp(-H / 2^k), squared k times
        let k = 10;
        let a = h.to_matrix() * (-1.0 / f64::from(1 << k));
        let dim = a.nrows();
        let mut term = DMatrix::<f64>::identity(dim, dim);
        let mut e = term.clone();
        for i in 1..20 {
            term = &term * &a / i as f64;
            e += &term;
        }
        for _ in 0..k {
            e = &e * &e;
        }
        let trace = e.trace();
        assert_abs_diff_eq!(dist.log_zbar, trace.ln(), epsilon = 1e-9);
        for s in 0..dim {
            assert_abs_diff_eq!(dist.probs[s], e[(s, s)] / trace, epsilon = 1e-9);
        }
    }

    #[test]
    fn finite_difference_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let model = small_model(&mut rng, 6);
            let gamma = vec![rng.random_range(0.1..1.0); model.node_count()];
            let dist =
                quantum_diagonal_distribution(&build_hamiltonian_with(&model, &gamma, 1.0, 12).unwrap()).unwrap();
            let stats = quantum_stats(&model, &dist).to_vec();
            let theta = model.theta();
            let eps = 1e-5;
            for i in 0..theta.len() {
                let lz = |d: f64| {
                    let mut t = theta.clone();
                    t[i] += d;
                    let m = model.with_theta(&t).unwrap();
                    quantum_diagonal_distribution(&build_hamiltonian_with(&m, &gamma, 1.0, 12).unwrap())
                        .unwrap()
                        .log_zbar
                };
                let fd = (lz(eps) - lz(-eps)) / (2.0 * eps);
                assert!((fd + stats[i]).abs() < 1e-6, "component {i}: {fd} vs {}", -stats[i]);
            }
        }
    }

    #[test]
    fn zero_field_gradient_is_classical() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = small_model(&mut rng, 6);
        let data =
            SufficientStats::from_expectations(vec![0.1; model.node_count()], vec![-0.2; model.graph().edge_count()]);
        let g = quantum_gradient_datum(&model, &vec![0.0; model.node_count()], 1.0, &data).unwrap();
        let exact = crate::exact::exact_marginals(&model, 1.0).unwrap().to_stats().to_vec();
        for ((gi, ei), di) in g.iter().zip(&exact).zip(data.to_vec()) {
            assert_abs_diff_eq!(*gi, ei - di, epsilon = 1e-10);
        }
    }

    #[test]
    fn golden_thompson_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let model = small_model(&mut rng, 6);
            let gamma = rng.random_range(0.0..2.0);
            let dist = quantum_diagonal_distribution(&build_hamiltonian(&model, gamma, 1.0).unwrap()).unwrap();
            let data = quantum_stats(&model, &dist);
            let bound = golden_thompson_bound(&model, &dist, 1.0, &data);
            let ll = quantum_log_likelihood(&dist, &dist.probs);
            assert!(bound <= ll + 1e-12, "{bound} > {ll}");
        }
    }

    #[test]
    fn flip_symmetry_and_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = small_model(&mut rng, 7);
        let model = model
            .with_theta(&{
                let mut t = model.theta();
                t[..model.node_count()].iter_mut().for_each(|x| *x = 0.0);
                t
            })
            .unwrap();
        let n = model.node_count();
        let dist = quantum_diagonal_distribution(&build_hamiltonian(&model, 0.8, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(dist.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        let full = (1 << n) - 1;
        for s in 0..1 << n {
            assert_abs_diff_eq!(dist.probs[s], dist.probs[full ^ s], epsilon = 1e-12);
        }
    }

    #[test]
    fn small_field_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = small_model(&mut rng, 6);
        let q = quantum_diagonal_distribution(&build_hamiltonian(&model, 1e-6, 1.0).unwrap()).unwrap();
        let c = quantum_diagonal_distribution(&build_hamiltonian(&model, 0.0, 1.0).unwrap()).unwrap();
        let tv: f64 = q.probs.iter().zip(&c.probs).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        assert!(tv < 1e-4);
    }

    #[test]
    fn asymmetric_clusters_deviate_from_boltzmann() {
        // two effective spins per cluster; strong (-2.5) and weak (-1.5) ferromagnetic pairs
        // joined by a weak frustrating bond
        let energies: Vec<f64> = (0..16usize)
            .map(|s| {
                let sp = basis_spins(s, 4);
                let e = |a: usize, b: usize| f64::from(sp[a] * sp[b]);
                -2.5 * e(0, 1) - 1.5 * e(2, 3) + 0.25 * e(1, 2) - 0.25 * e(0, 3)
            })
            .collect();
        let q =
            quantum_diagonal_distribution(&TransverseHamiltonian::from_energies(&energies, &[0.5; 4], 1.0).unwrap())
                .unwrap();
        let c =
            quantum_diagonal_distribution(&TransverseHamiltonian::from_energies(&energies, &[0.0; 4], 1.0).unwrap())
                .unwrap();
        let kl: f64 = c.probs.iter().zip(&q.probs).map(|(p, r)| p * (p / r).ln()).sum();
        assert!(kl > 1e-3, "kl = {kl}");
    }

    #[test]
    fn quantum_model_learns_classical_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let truth = loop {
            let m = random_masked_model(&mut rng, 1, 4, 0.8);
            if m.node_count() == 4 && m.graph().edge_count() >= 3 {
                break m;
            }
        };
        let data = crate::exact::exact_marginals(&truth, 1.0).unwrap().to_stats();
        let gamma = vec![0.5; 4];
        let mut model = IsingModel::zeros(truth.graph_arc().clone());
        let mut grad = Vec::new();
        for _ in 0..5000 {
            grad = quantum_gradient_datum(&model, &gamma, 1.0, &data).unwrap();
            if grad.iter().all(|g| g.abs() < 1e-7) {
                break;
            }
            let t: Vec<f64> = model.theta().iter().zip(&grad).map(|(t, g)| t + 0.5 * g).collect();
            model = model.with_theta(&t).unwrap();
        }
        assert!(grad.iter().all(|g| g.abs() < 1e-6), "{grad:?}");
    }
}
