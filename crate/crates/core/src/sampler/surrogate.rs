//! Software stand-ins for the annealing hardware.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::exact_sample;
use crate::model::{IsingModel, SampleSet};
use crate::quantum::{
    basis_spins, build_hamiltonian_with, quantum_diagonal_distribution, ClusterReduction, DEFAULT_QUBIT_CAP,
};
use crate::rng::{self, label};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateMode {
    /// Exact Boltzmann samples of the model.
    Ideal,
    /// Random gauges, rescaling by `beta_hw`, Gaussian parameter noise and
    /// clamping to `[-1, 1]`.
    Noisy,
    /// The diagonal of the transverse-field Boltzmann density matrix.
    Quantum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub mode: SurrogateMode,
    pub beta_hw: f64,
    pub sigma_h: f64,
    pub sigma_j: f64,
    pub gauge_count: usize,
    pub gamma: f64,
    /// Per-spin (or per-cluster, under a reduction) transverse fields that
    /// replace the uniform `gamma`.
    pub gamma_overrides: Option<Vec<f64>>,
    pub quantum_cap: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            mode: SurrogateMode::Ideal,
            beta_hw: 2.5,
            sigma_h: 0.03,
            sigma_j: 0.025,
            gauge_count: 10,
            gamma: crate::quantum::DEFAULT_GAMMA,
            gamma_overrides: None,
            quantum_cap: DEFAULT_QUBIT_CAP,
        }
    }
}

impl SurrogateConfig {
    pub fn ideal() -> Self {
        SurrogateConfig::default()
    }

    pub fn noisy() -> Self {
        SurrogateConfig {
            mode: SurrogateMode::Noisy,
            ..Default::default()
        }
    }

    pub fn quantum(gamma: f64) -> Self {
        SurrogateConfig {
            mode: SurrogateMode::Quantum,
            gamma,
            ..Default::default()
        }
    }

    fn gammas(&self, count: usize) -> Result<Vec<f64>> {
        match &self.gamma_overrides {
            Some(g) if g.len() == count => Ok(g.clone()),
            Some(g) => Err(Error::invalid(format!("{} gamma overrides for {count} spins", g.len()))),
            None => Ok(vec![self.gamma; count]),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta_hw.is_finite() && self.beta_hw > 0.0) {
            return Err(Error::invalid("beta_hw must be positive"));
        }
        if !(self.sigma_h >= 0.0 && self.sigma_j >= 0.0) {
            return Err(Error::invalid("noise levels must be nonnegative"));
        }
        if self.gauge_count == 0 {
            return Err(Error::invalid("gauge_count must be positive"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid("gamma must be nonnegative"));
        }
        Ok(())
    }
}

/// Draws `count` configurations from the surrogate selected by `config`.
///
/// Quantum mode works on the full model when it has at most
/// `config.quantum_cap` spins; larger models need a cluster reduction.
pub fn surrogate_sample(
    model: &IsingModel,
    config: &SurrogateConfig,
    count: usize,
    seed: u64,
    reduction: Option<&ClusterReduction>,
) -> Result<SampleSet> {
    config.validate()?;
    match config.mode {
        SurrogateMode::Ideal => exact_sample(model, 1.0, count, seed),
        SurrogateMode::Noisy => noisy(model, config, count, seed),
        SurrogateMode::Quantum => quantum(model, config, count, seed, reduction),
    }
}

fn noisy(model: &IsingModel, config: &SurrogateConfig, count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let nv = model.node_count();
    let g_count = config.gauge_count;
    let noise_h = Normal::new(0.0, config.sigma_h).map_err(|e| Error::invalid(e.to_string()))?;
    let noise_j = Normal::new(0.0, config.sigma_j).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = SampleSet::new(model.graph_arc().clone());
    for g in 0..g_count {
        let n_g = count / g_count + usize::from(g < count % g_count);
        if n_g == 0 {
            continue;
        }
        let mut grng = rng::stream(rng::sub_seed(seed, label::GAUGE), g as u64);
        let flips: BTreeSet<usize> = (0..nv).filter(|_| grng.random::<bool>()).collect();
        let gauged = model.gauge_transform(&flips)?.scaled(1.0 / config.beta_hw);
        let mut nrng = rng::stream(rng::sub_seed(seed, label::NOISE), g as u64);
        let h: Vec<f64> = gauged
            .h()
            .iter()
            .map(|&w| (w + noise_h.sample(&mut nrng)).clamp(-1.0, 1.0))
            .collect();
        let j: Vec<f64> = gauged
            .j()
            .iter()
            .map(|&w| (w + noise_j.sample(&mut nrng)).clamp(-1.0, 1.0))
            .collect();
        let programmed = IsingModel::new(model.graph_arc().clone(), h, j)?;
        let sub = rng::sub_seed(seed, label::iteration(label::SURROGATE, g));
        let raw = exact_sample(&programmed, config.beta_hw, n_g, sub)?;
        let mut flat = raw.as_flat().to_vec();
        for s in flat.chunks_exact_mut(nv) {
            for &i in &flips {
                s[i] = -s[i];
            }
        }
        out.extend(&SampleSet::from_flat(model.graph_arc().clone(), flat)?)?;
    }
    Ok(out)
}

fn quantum(
    model: &IsingModel,
    config: &SurrogateConfig,
    count: usize,
    seed: u64,
    reduction: Option<&ClusterReduction>,
) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let programmed = model.scaled(1.0 / config.beta_hw);
    let nv = model.node_count();
    let (dist, expand): (_, Box<dyn Fn(usize) -> Vec<i8>>) = match reduction {
        Some(red) => {
            let gamma = config.gammas(red.cluster_count())?;
            let h = red.hamiltonian(&programmed, &gamma, config.beta_hw)?;
            (
                quantum_diagonal_distribution(&h)?,
                Box::new(move |a| red.states[a].as_slice().to_vec()),
            )
        }
        None => {
            if nv > config.quantum_cap {
                return Err(Error::ResourceLimit(format!(
                    "quantum surrogate on {nv} spins exceeds the cap of {} and no cluster reduction was given",
                    config.quantum_cap
                )));
            }
            let gamma = config.gammas(nv)?;
            let h = build_hamiltonian_with(&programmed, &gamma, config.beta_hw, config.quantum_cap)?;
            (
                quantum_diagonal_distribution(&h)?,
                Box::new(move |s| basis_spins(s, nv)),
            )
        }
    };
    let index = WeightedIndex::new(&dist.probs).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut r = rng::stream(seed, 0);
    let mut out = Vec::with_capacity(count * nv);
    for _ in 0..count {
        out.extend(expand(index.sample(&mut r)));
    }
    SampleSet::from_flat(model.graph_arc().clone(), out)
}
