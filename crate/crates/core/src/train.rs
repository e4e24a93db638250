//! Maximum-likelihood training of fully visible Boltzmann machines.
//!
//! With `E(s) = <theta, phi(s)>`, the log-likelihood gradient is
//! `-E_data[phi] + E_model[phi]`, and updates ascend it:
//! `theta <- theta + eta * grad`.

use std::io::Write;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::KlEstimator;
use crate::exact::{exact_marginals, log_partition};
use crate::model::{IsingModel, SampleSet};
use crate::quantum::ClusterReduction;
use crate::rng::{self, label};
use crate::sampler::{seeded_chains, surrogate_sample, ChainEnsemble, GibbsKernel, SurrogateConfig};
use crate::stats::{sample_stats, SufficientStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Chains start at data points.
    Cd,
    /// Chains persist across parameter updates.
    Pcd,
    /// Chains start at fresh surrogate samples drawn at the current parameters.
    Seeded,
    /// Exact model expectations; no chains.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Nesterov,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum LrSchedule {
    Constant,
    /// `eta0 / (t / t_scale + 1)`.
    Annealed {
        t_scale: f64,
    },
}

pub fn lr_schedule(eta0: f64, t: usize, schedule: LrSchedule) -> f64 {
    match schedule {
        LrSchedule::Constant => eta0,
        LrSchedule::Annealed { t_scale } => eta0 / (t as f64 / t_scale + 1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub method: Method,
    /// Gibbs sweeps applied to each chain per gradient estimate.
    pub k: usize,
    pub n_chains: usize,
    pub optimizer: Optimizer,
    pub eta0: f64,
    pub schedule: LrSchedule,
    pub mu: f64,
    pub iterations: usize,
    pub surrogate: SurrogateConfig,
    /// Keep every field `h_v` at its initial value.
    pub freeze_fields: bool,
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::Pcd,
            k: 50,
            n_chains: 1000,
            optimizer: Optimizer::Nesterov,
            eta0: 0.1,
            schedule: LrSchedule::Constant,
            mu: 0.9,
            iterations: 200,
            surrogate: SurrogateConfig::default(),
            freeze_fields: true,
            eval_every: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 && matches!(self.method, Method::Cd | Method::Pcd) {
            return Err(Error::invalid("CD and PCD need k >= 1"));
        }
        if self.n_chains == 0 && self.method != Method::Exact {
            return Err(Error::invalid("n_chains must be positive"));
        }
        if !(self.eta0.is_finite() && self.eta0 > 0.0) {
            return Err(Error::invalid("eta0 must be positive"));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if let LrSchedule::Annealed { t_scale } = self.schedule {
            if !(t_scale > 0.0) {
                return Err(Error::invalid("t_scale must be positive"));
            }
        }
        if self.iterations == 0 || self.eval_every == 0 {
            return Err(Error::invalid("iterations and eval_every must be positive"));
        }
        Ok(())
    }
}

/// `-E_data[phi] + E_model[phi]`, with entries outside `mask` set to zero.
pub fn gradient_estimate(data: &SufficientStats, model: &SufficientStats, mask: Option<&[bool]>) -> Result<Vec<f64>> {
    let (d, m) = (data.to_vec(), model.to_vec());
    if d.len() != m.len() || mask.is_some_and(|k| k.len() != d.len()) {
        return Err(Error::invalid("statistics and mask shapes differ"));
    }
    Ok(d.iter()
        .zip(&m)
        .enumerate()
        .map(|(i, (d, m))| if mask.is_none_or(|k| k[i]) { m - d } else { 0.0 })
        .collect())
}

pub fn sgd_step(theta: &[f64], grad: &[f64], eta: f64) -> Vec<f64> {
    theta.iter().zip(grad).map(|(t, g)| t + eta * g).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub velocity: Vec<f64>,
    pub t: usize,
}

impl OptimizerState {
    pub fn new(dim: usize) -> Self {
        OptimizerState {
            velocity: vec![0.0; dim],
            t: 0,
        }
    }

    /// The point `theta + mu * velocity` where the next gradient is taken.
    pub fn lookahead(&self, theta: &[f64], mu: f64) -> Vec<f64> {
        theta.iter().zip(&self.velocity).map(|(t, v)| t + mu * v).collect()
    }
}

/// `v' = mu v + eta grad`, `theta' = theta + v'`, with `grad` taken at the
/// lookahead point.
pub fn nesterov_step(
    theta: &[f64],
    state: &OptimizerState,
    grad_at_lookahead: &[f64],
    eta: f64,
    mu: f64,
) -> (Vec<f64>, OptimizerState) {
    let velocity: Vec<f64> = state
        .velocity
        .iter()
        .zip(grad_at_lookahead)
        .map(|(v, g)| mu * v + eta * g)
        .collect();
    let theta = theta.iter().zip(&velocity).map(|(t, v)| t + v).collect();
    (
        theta,
        OptimizerState {
            velocity,
            t: state.t + 1,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    /// Parameter updates applied so far.
    pub iter: usize,
    pub eta: f64,
    pub grad_norm: f64,
    pub kl_train: f64,
    pub kl_test: f64,
    pub seconds: f64,
    pub theta_hash: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "status")]
pub enum TrainStatus {
    Completed,
    Diverged { iteration: usize },
}

#[derive(Clone, Debug)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
    pub status: TrainStatus,
    pub final_model: IsingModel,
}

impl TrainTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = out;
        writeln!(w, "iter,eta,grad_norm,kl_train,kl_test,seconds,theta_hash")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.iter, r.eta, r.grad_norm, r.kl_train, r.kl_test, r.seconds, r.theta_hash
            )?;
        }
        Ok(())
    }

    pub fn final_kl_test(&self) -> Option<f64> {
        self.rows.last().map(|r| r.kl_test)
    }

    pub fn min_kl_test(&self) -> Option<&TraceRow> {
        self.rows.iter().min_by(|a, b| a.kl_test.total_cmp(&b.kl_test))
    }

    pub fn diverged(&self) -> bool {
        matches!(self.status, TrainStatus::Diverged { .. })
    }
}

/// What the loop knows beyond data: the generating model (for KL
/// evaluation) and a cluster reduction for quantum surrogates.
#[derive(Clone, Debug, Default)]
pub struct TrainContext {
    pub truth: Option<IsingModel>,
    pub reduction: Option<ClusterReduction>,
}

fn theta_hash(theta: &[f64]) -> String {
    let mut h = Sha256::new();
    for t in theta {
        h.update(t.to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

struct Monitor {
    train: Option<KlEstimator>,
    test: KlEstimator,
}

impl Monitor {
    fn new(truth: &IsingModel, data: &SampleSet, test: &SampleSet) -> Result<Self> {
        Ok(Monitor {
            train: Some(KlEstimator::new(truth, data)?),
            test: KlEstimator::new(truth, test)?,
        })
    }

    fn evaluate(&self, model: &IsingModel) -> Result<(f64, f64)> {
        let lz = log_partition(model, 1.0)?;
        let test = self.test.estimate_with_log_z(model, lz)?;
        let train = match &self.train {
            Some(t) => t.estimate_with_log_z(model, lz)?,
            None => f64::NAN,
        };
        Ok((train, test))
    }
}

/// Runs `config.iterations` parameter updates from `model0`.
///
/// Rows are recorded at iteration 0, every `eval_every` updates, and at the
/// end. KL values are `KL(B(truth) || B(theta))` estimated on the training
/// and test sets; without a known truth, `empirical KL(P_test || B)` is
/// reported as the test value and the train value is `NaN`.
pub fn train(
    model0: &IsingModel,
    data: &SampleSet,
    test: &SampleSet,
    config: &TrainConfig,
    ctx: &TrainContext,
) -> Result<TrainTrace> {
    config.validate()?;
    if !data.conforms_to(model0.graph()) || !test.conforms_to(model0.graph()) {
        return Err(Error::invalid("data or test set does not match the model graph"));
    }
    if data.is_empty() || test.is_empty() {
        return Err(Error::invalid("data and test sets must be nonempty"));
    }
    let started = Instant::now();
    let nv = model0.node_count();
    let mask: Vec<bool> = (0..model0.param_count())
        .map(|i| !(config.freeze_fields && i < nv))
        .collect();
    let data_stats = sample_stats(data);
    let monitor = match &ctx.truth {
        Some(t) => Some(Monitor::new(t, data, test)?),
        None => None,
    };
    let evaluate = |m: &IsingModel| -> Result<(f64, f64)> {
        match &monitor {
            Some(mon) => mon.evaluate(m),
            None => Ok((f64::NAN, crate::eval::empirical_kl(m, test)?)),
        }
    };

    let mut theta = model0.theta();
    let mut opt = OptimizerState::new(theta.len());
    let mut pcd = (config.method == Method::Pcd).then(|| {
        ChainEnsemble::random(
            model0.graph_arc().clone(),
            config.n_chains,
            rng::sub_seed(config.seed, label::INIT),
        )
    });
    let mut rows = Vec::new();
    let mut record = |t: usize, eta: f64, grad_norm: f64, theta: &[f64]| -> Result<()> {
        let m = model0.with_theta(theta)?;
        let (kl_train, kl_test) = evaluate(&m)?;
        rows.push(TraceRow {
            iter: t,
            eta,
            grad_norm,
            kl_train,
            kl_test,
            seconds: started.elapsed().as_secs_f64(),
            theta_hash: theta_hash(theta),
        });
        Ok(())
    };
    record(0, lr_schedule(config.eta0, 0, config.schedule), 0.0, &theta)?;

    let mut status = TrainStatus::Completed;
    for t in 0..config.iterations {
        let eta = lr_schedule(config.eta0, t, config.schedule);
        let point = match config.optimizer {
            Optimizer::Nesterov => opt.lookahead(&theta, config.mu),
            Optimizer::Sgd => theta.clone(),
        };
        let at = model0.with_theta(&point)?;
        let model_stats = (|| -> Result<SufficientStats> {
            Ok(match config.method {
                Method::Exact => exact_marginals(&at, 1.0)?.to_stats(),
                Method::Cd => {
                    let mut r = rng::stream(rng::sub_seed(config.seed, label::iteration(label::MINIBATCH, t)), 0);
                    let seeds = minibatch(data, config.n_chains, &mut r);
                    let chain_seed = rng::sub_seed(config.seed, label::iteration(label::CHAINS, t));
                    sample_stats(&seeded_chains(&at, &seeds, config.k, chain_seed)?)
                }
                Method::Pcd => {
                    let chains = pcd.as_mut().expect("pcd chains");
                    let kernel = GibbsKernel::new(&at, 1.0)?;
                    chains.advance(
                        &kernel,
                        config.k,
                        rng::sub_seed(config.seed, label::iteration(label::CHAINS, t)),
                    )?;
                    sample_stats(chains.states())
                }
                Method::Seeded => {
                    let sseed = rng::sub_seed(config.seed, label::iteration(label::SURROGATE, t));
                    let seeds =
                        surrogate_sample(&at, &config.surrogate, config.n_chains, sseed, ctx.reduction.as_ref())?;
                    let chain_seed = rng::sub_seed(config.seed, label::iteration(label::CHAINS, t));
                    sample_stats(&seeded_chains(&at, &seeds, config.k, chain_seed)?)
                }
            })
        })();
        // parameters too large to exponentiate count as non-finite
        let step = match model_stats {
            Ok(ms) => {
                let grad = gradient_estimate(&data_stats, &ms, Some(&mask))?;
                let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                theta = match config.optimizer {
                    Optimizer::Sgd => sgd_step(&theta, &grad, eta),
                    Optimizer::Nesterov => {
                        let (next, state) = nesterov_step(&theta, &opt, &grad, eta, config.mu);
                        opt = state;
                        next
                    }
                };
                let finite = theta.iter().all(|x| x.is_finite()) && grad_norm.is_finite();
                let done = t + 1 == config.iterations;
                if finite && ((t + 1) % config.eval_every == 0 || done) {
                    match record(t + 1, eta, grad_norm, &theta) {
                        Err(Error::Numeric(_)) => false,
                        r => r.map(|_| true)?,
                    }
                } else {
                    finite
                }
            }
            Err(Error::Numeric(_)) => false,
            Err(e) => return Err(e),
        };
        if !step {
            status = TrainStatus::Diverged { iteration: t + 1 };
            if let Some(chains) = pcd.as_mut() {
                *chains = ChainEnsemble::random(
                    model0.graph_arc().clone(),
                    config.n_chains,
                    rng::sub_seed(config.seed, label::iteration(label::INIT, t + 1)),
                );
            }
            break;
        }
    }
    let final_model = match status {
        TrainStatus::Completed => model0.with_theta(&theta)?,
        TrainStatus::Diverged { .. } => model0.with_theta(
            &theta
                .iter()
                .map(|x| if x.is_finite() { *x } else { 0.0 })
                .collect::<Vec<_>>(),
        )?,
    };
    Ok(TrainTrace {
        rows,
        status,
        final_model,
    })
}

/// `count` rows drawn without replacement (with replacement if the data set
/// is smaller).
fn minibatch<R: Rng>(data: &SampleSet, count: usize, rng: &mut R) -> SampleSet {
    let rows: Vec<usize> = if count <= data.len() {
        index::sample(rng, data.len(), count).into_vec()
    } else {
        (0..count).map(|_| rng.random_range(0..data.len())).collect()
    };
    data.select(&rows)
}

#[cfg(test)]
mod tests;
