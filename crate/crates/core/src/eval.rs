//! KL divergences, mode histograms, likelihoods and Boltzmann fits.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{exact_marginals, log_partition};
use crate::fcl::ModeCatalog;
use crate::model::{IsingModel, SampleSet};
use crate::stats::{sample_stats, SufficientStats};

enum Keys {
    Narrow(HashMap<u64, usize>),
    Wide(HashMap<Vec<u64>, usize>),
}

/// Exact-match lookup of configurations against catalog states.
pub struct ModeLookup {
    keys: Keys,
    entries: usize,
}

fn pack(s: &[i8]) -> Vec<u64> {
    let mut words = vec![0u64; s.len().div_ceil(64)];
    for (i, &x) in s.iter().enumerate() {
        if x > 0 {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

fn pack_narrow(s: &[i8]) -> u64 {
    s.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &x)| acc | (u64::from(x > 0) << i))
}

impl ModeLookup {
    pub fn new(catalog: &ModeCatalog) -> Self {
        let states = catalog.states();
        let width = states.first().map_or(0, |s| s.len());
        let keys = if width <= 64 {
            Keys::Narrow(
                states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (pack_narrow(s.as_slice()), i))
                    .collect(),
            )
        } else {
            Keys::Wide(
                states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (pack(s.as_slice()), i))
                    .collect(),
            )
        };
        ModeLookup {
            keys,
            entries: states.len(),
        }
    }

    pub fn get(&self, s: &[i8]) -> Option<usize> {
        match &self.keys {
            Keys::Narrow(m) => m.get(&pack_narrow(s)).copied(),
            Keys::Wide(m) => m.get(&pack(s)).copied(),
        }
    }

    /// Per-entry counts and the count of unmatched rows in a flat spin buffer.
    pub fn count_flat(&self, spins: &[i8], width: usize) -> (Vec<u64>, u64) {
        let n = self.entries;
        spins
            .par_chunks(width * 4096)
            .map(|chunk| {
                let mut counts = vec![0u64; n];
                let mut other = 0u64;
                for s in chunk.chunks_exact(width) {
                    match self.get(s) {
                        Some(i) => counts[i] += 1,
                        None => other += 1,
                    }
                }
                (counts, other)
            })
            .reduce(
                || (vec![0u64; n], 0),
                |(mut a, oa), (b, ob)| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    (a, oa + ob)
                },
            )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeHistogram {
    pub counts: Vec<u64>,
    pub other_count: u64,
    pub total_count: u64,
}

impl ModeHistogram {
    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.total_count as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn other_mass(&self) -> f64 {
        self.other_count as f64 / self.total_count as f64
    }
}

pub fn mode_histogram(samples: &SampleSet, catalog: &ModeCatalog) -> Result<ModeHistogram> {
    if !samples.conforms_to(catalog.graph()) {
        return Err(Error::invalid("samples and catalog are on different graphs"));
    }
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let (counts, other_count) = ModeLookup::new(catalog).count_flat(samples.as_flat(), samples.width());
    Ok(ModeHistogram {
        counts,
        other_count,
        total_count: samples.len() as u64,
    })
}

/// `KL(exact || empirical)` over the catalog. Both sides are renormalized
/// over the catalog; the empirical side first gets a `1/(2N)` pseudo-count
/// per entry.
pub fn kl_over_modes(exact: &[f64], empirical: &ModeHistogram) -> Result<f64> {
    let q = empirical.probabilities();
    kl_smoothed(exact, &q, 0.5 / empirical.total_count as f64)
}

/// `KL(p || q)` after renormalizing both over their support, with `pseudo`
/// added to every `q` entry first.
pub fn kl_smoothed(p: &[f64], q: &[f64], pseudo: f64) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::invalid("distributions have different lengths"));
    }
    let ps: f64 = p.iter().sum();
    let qs: f64 = q.iter().map(|x| x + pseudo).sum();
    if !(ps > 0.0 && qs > 0.0) {
        return Err(Error::invalid("distribution has no mass"));
    }
    Ok(p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| {
            let a = pi / ps;
            a * (a / ((qi + pseudo) / qs)).ln()
        })
        .sum())
}

/// Mean test log-likelihood `-<theta, phi_test> - ln Z(theta)`.
pub fn test_log_likelihood(model: &IsingModel, test: &SampleSet) -> Result<f64> {
    let stats = sample_stats(test);
    Ok(-stats.dot(model) - log_partition(model, 1.0)?)
}

/// Sample estimate of `KL(B(theta_true) || B(theta_learn))` from test data
/// drawn from the true model.
pub fn ll_ratio(theta_true: &IsingModel, theta_learn: &IsingModel, test: &SampleSet) -> Result<f64> {
    KlEstimator::new(theta_true, test)?.estimate(theta_learn)
}

/// [`ll_ratio`] with the test statistics and true log-partition cached.
#[derive(Clone, Debug)]
pub struct KlEstimator {
    truth: IsingModel,
    test_stats: SufficientStats,
    log_z_true: f64,
}

impl KlEstimator {
    pub fn new(truth: &IsingModel, test: &SampleSet) -> Result<Self> {
        if !test.conforms_to(truth.graph()) {
            return Err(Error::invalid("test set does not match the model graph"));
        }
        Ok(KlEstimator {
            truth: truth.clone(),
            test_stats: sample_stats(test),
            log_z_true: log_partition(truth, 1.0)?,
        })
    }

    pub fn test_stats(&self) -> &SufficientStats {
        &self.test_stats
    }

    pub fn estimate(&self, learn: &IsingModel) -> Result<f64> {
        self.estimate_with_log_z(learn, log_partition(learn, 1.0)?)
    }

    pub fn estimate_with_log_z(&self, learn: &IsingModel, log_z_learn: f64) -> Result<f64> {
        if learn.param_count() != self.truth.param_count() {
            return Err(Error::invalid("models have different parameter counts"));
        }
        Ok(self.test_stats.dot(learn) - self.test_stats.dot(&self.truth) - self.log_z_true + log_z_learn)
    }
}

/// `KL(P_test || B(theta))` with `P_test` the empirical distribution of the
/// test configurations.
pub fn empirical_kl(model: &IsingModel, test: &SampleSet) -> Result<f64> {
    let mut counts: HashMap<Vec<u64>, u64> = HashMap::new();
    for s in test.iter() {
        *counts.entry(pack(s)).or_default() += 1;
    }
    let n = test.len() as f64;
    let neg_entropy: f64 = counts.values().map(|&c| c as f64 / n * (c as f64 / n).ln()).sum();
    Ok(neg_entropy - test_log_likelihood(model, test)?)
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub tol: f64,
    pub cap: f64,
    pub max_iter: usize,
    pub eta: f64,
    /// Fix parameters whose sample moment is exactly +-1 at the cap. Off,
    /// they stop wherever the moment tolerance is first met.
    pub pin_degenerate: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-3,
            cap: 30.0,
            max_iter: 5000,
            eta: 1.0,
            pin_degenerate: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub model: IsingModel,
    pub converged: bool,
    pub iterations: usize,
    /// `max |E_fit[phi] - E_samples[phi]|` at the returned parameters.
    pub moment_error: f64,
    /// True if some parameter sits at the magnitude cap.
    pub capped: bool,
}

/// Maximum-likelihood Boltzmann fit with exact gradients.
pub fn boltzmann_fit(samples: &SampleSet) -> Result<FitResult> {
    boltzmann_fit_with(samples, &FitOptions::default())
}

/// Accelerated gradient ascent with backtracking and restarts on the concave
/// log-likelihood, parameters clamped to `[-cap, cap]`.
pub fn boltzmann_fit_with(samples: &SampleSet, opts: &FitOptions) -> Result<FitResult> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot fit an empty sample set"));
    }
    let data = sample_stats(samples).to_vec();
    let base = IsingModel::zeros(samples.graph_arc().clone());
    let eval = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let m = base.with_theta(theta)?;
        let em = exact_marginals(&m, 1.0)?;
        let ms = em.to_stats().to_vec();
        let ll = -theta.iter().zip(&data).map(|(t, d)| t * d).sum::<f64>() - em.log_z;
        let grad = ms.iter().zip(&data).map(|(m, d)| m - d).collect();
        Ok((ll, grad))
    };
    let inf_norm = |g: &[f64]| g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    // moments at +-1 put the maximum at infinity; those parameters are
    // pinned at the cap and the rest are fitted
    let pinned: Vec<bool> = data.iter().map(|d| opts.pin_degenerate && d.abs() >= 1.0).collect();
    let mut x: Vec<f64> = data
        .iter()
        .zip(&pinned)
        .map(|(d, &p)| if p { -opts.cap * d.signum() } else { 0.0 })
        .collect();
    let eval = |theta: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (l, mut g) = eval(theta)?;
        g.iter_mut()
            .zip(&pinned)
            .filter(|(_, p)| **p)
            .for_each(|(g, _)| *g = 0.0);
        Ok((l, g))
    };
    let (mut lx, mut gx) = eval(&x)?;
    let mut y = x.clone();
    let (mut ly, mut gy) = (lx, gx.clone());
    let mut eta = opts.eta;
    let mut t = 1.0f64;
    let mut iterations = 0;
    let mut best = (x.clone(), inf_norm(&gx));
    while iterations < opts.max_iter && inf_norm(&gx) >= opts.tol {
        iterations += 1;
        let (x_new, l_new, g_new) = loop {
            let cand: Vec<f64> = y
                .iter()
                .zip(&gy)
                .map(|(a, g)| (a + eta * g).clamp(-opts.cap, opts.cap))
                .collect();
            let (lc, gc) = eval(&cand)?;
            let d: Vec<f64> = cand.iter().zip(&y).map(|(a, b)| a - b).collect();
            let lin: f64 = d.iter().zip(&gy).map(|(a, b)| a * b).sum();
            let quad: f64 = d.iter().map(|a| a * a).sum::<f64>() / (2.0 * eta);
            if lc >= ly + lin - quad - 1e-12 * ly.abs().max(1.0) || eta < 1e-12 {
                break (cand, lc, gc);
            }
            eta *= 0.5;
        };
        if l_new < lx {
            t = 1.0;
            y = x_new.clone();
            ly = l_new;
            gy = g_new.clone();
        } else {
            let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let w = (t - 1.0) / t_new;
            y = x_new
                .iter()
                .zip(&x)
                .map(|(a, b)| (a + w * (a - b)).clamp(-opts.cap, opts.cap))
                .collect();
            let (l, g) = eval(&y)?;
            ly = l;
            gy = g;
            t = t_new;
        }
        x = x_new;
        lx = l_new;
        gx = g_new;
        if inf_norm(&gx) < best.1 {
            best = (x.clone(), inf_norm(&gx));
        }
    }
    let (x, moment_error) = best;
    Ok(FitResult {
        capped: x.iter().any(|v| v.abs() >= opts.cap),
        model: base.with_theta(&x)?,
        converged: moment_error < opts.tol,
        iterations,
        moment_error,
    })
}

#[cfg(test)]
mod tests;
