//! Blocked Gibbs dynamics, annealed MCMC and hardware surrogates.

mod surrogate;

pub use surrogate::{surrogate_sample, SurrogateConfig, SurrogateMode};

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::ModeLookup;
use crate::fcl::ModeCatalog;
use crate::graph::{ChimeraGraph, Color};
use crate::model::{IsingModel, SampleSet, SpinConfig};
use crate::rng;

const FULL: f64 = 4_294_967_296.0;

/// Precomputed conditionals for the two-color block sweep.
///
/// Every node gets a table over the `2^deg` spin patterns of its neighbors
/// holding `P(s_v = +1 | neighbors)` as a 32-bit threshold. Nodes of one
/// color are conditionally independent, so updating them in sequence is the
/// same as updating them jointly.
#[derive(Clone, Debug)]
pub struct GibbsKernel {
    width: usize,
    order: Vec<u32>,
    nbr_start: Vec<u32>,
    nbrs: Vec<u32>,
    table_start: Vec<u32>,
    thresholds: Vec<u64>,
}

impl GibbsKernel {
    pub fn new(model: &IsingModel, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be finite and >= 0, got {beta}")));
        }
        let g = model.graph();
        let mut order: Vec<usize> = Vec::with_capacity(g.node_count());
        for color in [Color::A, Color::B] {
            order.extend((0..g.node_count()).filter(|&i| g.color_of(g.nodes()[i]) == color));
        }
        let mut kernel = GibbsKernel {
            width: g.node_count(),
            order: order.iter().map(|&v| v as u32).collect(),
            nbr_start: vec![0],
            nbrs: Vec::new(),
            table_start: Vec::new(),
            thresholds: Vec::new(),
        };
        for &v in &order {
            let nb = g.neighbors(v);
            kernel.nbrs.extend(nb.iter().map(|&(u, _)| u as u32));
            kernel.nbr_start.push(kernel.nbrs.len() as u32);
            kernel.table_start.push(kernel.thresholds.len() as u32);
            for pattern in 0..1usize << nb.len() {
                let field = model.h()[v]
                    + nb.iter()
                        .enumerate()
                        .map(|(b, &(_, e))| {
                            let s = if pattern >> b & 1 == 1 { 1.0 } else { -1.0 };
                            model.j()[e] * s
                        })
                        .sum::<f64>();
                let p = 1.0 / (1.0 + (2.0 * beta * field).exp());
                kernel.thresholds.push((p * FULL).round() as u64);
            }
        }
        Ok(kernel)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// One full sweep: color A given B, then B given A.
    #[inline]
    pub fn sweep<R: RngCore>(&self, s: &mut [i8], rng: &mut R) {
        debug_assert_eq!(s.len(), self.width);
        for (i, &v) in self.order.iter().enumerate() {
            let nb = &self.nbrs[self.nbr_start[i] as usize..self.nbr_start[i + 1] as usize];
            let mut pattern = 0usize;
            for (b, &u) in nb.iter().enumerate() {
                pattern |= usize::from(s[u as usize] > 0) << b;
            }
            let thr = self.thresholds[self.table_start[i] as usize + pattern];
            s[v as usize] = if u64::from(rng.next_u32()) < thr { 1 } else { -1 };
        }
    }

    pub fn sweeps<R: RngCore>(&self, s: &mut [i8], rng: &mut R, count: usize) {
        for _ in 0..count {
            self.sweep(s, rng);
        }
    }
}

/// One blocked Gibbs sweep of a single configuration.
pub fn blocked_gibbs_sweep<R: RngCore>(
    model: &IsingModel,
    beta: f64,
    state: &SpinConfig,
    rng: &mut R,
) -> Result<SpinConfig> {
    if !model.conforms(state.as_slice()) {
        return Err(Error::invalid("state does not match the model graph"));
    }
    let mut s = state.as_slice().to_vec();
    GibbsKernel::new(model, beta)?.sweep(&mut s, rng);
    SpinConfig::new(s)
}

/// Independent chains over one graph. Chain `c` draws from stream `c` of the
/// seed supplied to each call, so results do not depend on thread count.
#[derive(Clone, Debug)]
pub struct ChainEnsemble {
    states: SampleSet,
}

impl ChainEnsemble {
    /// `n_chains` uniformly random configurations.
    pub fn random(graph: std::sync::Arc<ChimeraGraph>, n_chains: usize, seed: u64) -> Self {
        let width = graph.node_count();
        let mut spins = vec![0i8; n_chains * width];
        spins
            .par_chunks_mut(width.max(1))
            .enumerate()
            .for_each(|(c, s)| random_fill(s, &mut rng::stream(seed, c as u64)));
        ChainEnsemble {
            states: SampleSet::from_flat(graph, spins).expect("valid spins"),
        }
    }

    pub fn from_samples(states: SampleSet) -> Self {
        ChainEnsemble { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &SampleSet {
        &self.states
    }

    pub fn into_samples(self) -> SampleSet {
        self.states
    }

    pub fn advance(&mut self, kernel: &GibbsKernel, sweeps: usize, seed: u64) -> Result<()> {
        if kernel.width() != self.states.width() {
            return Err(Error::invalid("kernel and chains are on different graphs"));
        }
        if sweeps == 0 || self.states.is_empty() {
            return Ok(());
        }
        let width = kernel.width();
        let mut flat = self.states.as_flat().to_vec();
        flat.par_chunks_mut(width)
            .enumerate()
            .for_each(|(c, s)| kernel.sweeps(s, &mut rng::stream(seed, c as u64), sweeps));
        self.states = SampleSet::from_flat(self.states.graph_arc().clone(), flat)?;
        Ok(())
    }
}

fn random_fill<R: RngCore>(s: &mut [i8], rng: &mut R) {
    for x in s.iter_mut() {
        *x = if rng.next_u32() & 1 == 1 { 1 } else { -1 };
    }
}

/// `k` sweeps at `beta = 1` from each seed configuration.
pub fn seeded_chains(model: &IsingModel, seeds: &SampleSet, k: usize, seed: u64) -> Result<SampleSet> {
    if !seeds.conforms_to(model.graph()) {
        return Err(Error::invalid("seed configurations do not match the model graph"));
    }
    if k == 0 {
        return Ok(seeds.clone());
    }
    let kernel = GibbsKernel::new(model, 1.0)?;
    let mut chains = ChainEnsemble::from_samples(seeds.clone());
    chains.advance(&kernel, k, seed)?;
    Ok(chains.into_samples())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub betas: Vec<f64>,
    pub sweeps_per_beta: usize,
}

impl AnnealSchedule {
    pub fn new(betas: Vec<f64>, sweeps_per_beta: usize) -> Result<Self> {
        if betas.is_empty() || sweeps_per_beta == 0 {
            return Err(Error::invalid(
                "schedule needs at least one beta and one sweep per beta",
            ));
        }
        if betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::invalid("schedule betas must be finite and nonnegative"));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("schedule betas must be nondecreasing"));
        }
        Ok(AnnealSchedule { betas, sweeps_per_beta })
    }

    /// `steps` betas evenly spaced over `[beta_min, beta_max]`.
    pub fn linear(beta_min: f64, beta_max: f64, steps: usize, sweeps_per_beta: usize) -> Result<Self> {
        let betas = match steps {
            0 => Vec::new(),
            1 => vec![beta_max],
            _ => (0..steps)
                .map(|i| beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64)
                .collect(),
        };
        Self::new(betas, sweeps_per_beta)
    }

    /// 1000 betas over `[0.01, 1]` with 10 sweeps each.
    pub fn paper() -> Self {
        Self::linear(0.01, 1.0, 1000, 10).expect("valid schedule")
    }

    pub fn total_sweeps(&self) -> usize {
        self.betas.len() * self.sweeps_per_beta
    }
}

/// Per-beta mode occupation counts recorded during an anneal.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub betas: Vec<f64>,
    /// `counts[step][entry]`.
    pub counts: Vec<Vec<u64>>,
    pub other: Vec<u64>,
    pub n_chains: usize,
}

impl Trajectory {
    pub fn probabilities(&self, step: usize) -> Vec<f64> {
        let n = self.n_chains as f64;
        self.counts[step].iter().map(|&c| c as f64 / n).collect()
    }
}

pub fn annealed_mcmc(model: &IsingModel, schedule: &AnnealSchedule, n_chains: usize, seed: u64) -> Result<SampleSet> {
    Ok(anneal(model, schedule, n_chains, seed, None)?.0)
}

/// As [`annealed_mcmc`], recording catalog occupation after each beta.
pub fn annealed_mcmc_traced(
    model: &IsingModel,
    schedule: &AnnealSchedule,
    n_chains: usize,
    seed: u64,
    catalog: &ModeCatalog,
) -> Result<(SampleSet, Trajectory)> {
    let (samples, traj) = anneal(model, schedule, n_chains, seed, Some(catalog))?;
    Ok((samples, traj.expect("trajectory requested")))
}

fn anneal(
    model: &IsingModel,
    schedule: &AnnealSchedule,
    n_chains: usize,
    seed: u64,
    catalog: Option<&ModeCatalog>,
) -> Result<(SampleSet, Option<Trajectory>)> {
    if n_chains == 0 {
        return Err(Error::invalid("need at least one chain"));
    }
    let width = model.node_count();
    let lookup = catalog.map(ModeLookup::new);
    let mut rngs: Vec<ChaCha8Rng> = (0..n_chains).map(|c| rng::stream(seed, c as u64)).collect();
    let mut spins = vec![0i8; n_chains * width];
    spins
        .par_chunks_mut(width)
        .zip(rngs.par_iter_mut())
        .for_each(|(s, r)| random_fill(s, r));
    let mut traj = lookup.as_ref().map(|_| Trajectory {
        betas: schedule.betas.clone(),
        counts: Vec::with_capacity(schedule.betas.len()),
        other: Vec::with_capacity(schedule.betas.len()),
        n_chains,
    });
    for &beta in &schedule.betas {
        let kernel = GibbsKernel::new(model, beta)?;
        spins
            .par_chunks_mut(width)
            .zip(rngs.par_iter_mut())
            .for_each(|(s, r)| kernel.sweeps(s, r, schedule.sweeps_per_beta));
        if let (Some(l), Some(t)) = (&lookup, traj.as_mut()) {
            let (counts, other) = l.count_flat(&spins, width);
            t.counts.push(counts);
            t.other.push(other);
        }
    }
    let samples = SampleSet::from_flat(model.graph_arc().clone(), spins)?;
    Ok((samples, traj))
}
