//! Config-driven experiment plumbing shared by the command-line tool, the
//! examples and the figure reproductions.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exact::{exact_marginals, exact_sample, ExactMarginals};
use crate::fcl::{enumerate_cluster_minima, FclSpec, ModeCatalog, MAX_CATALOG_CLUSTERS};
use crate::io;
use crate::model::{IsingModel, SampleSet};
use crate::quantum::ClusterReduction;
use crate::rng::{self, label};
use crate::sampler::{annealed_mcmc, seeded_chains, surrogate_sample, AnnealSchedule, SurrogateConfig, SurrogateMode};
use crate::train::TrainConfig;

/// Environment variable naming a directory for memoized exact marginals.
pub const CACHE_ENV: &str = "CHIMERA_BM_CACHE";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemConfig {
    Fcl {
        variant: u8,
    },
    ScaledFcl3,
    FclGrid {
        n: usize,
        #[serde(default = "default_intra")]
        j_intra: Vec<f64>,
        #[serde(default = "default_inter")]
        j_inter: Vec<f64>,
        #[serde(default)]
        frustrate_all: bool,
    },
    RandomPm1 {
        n: usize,
    },
    Custom {
        spec: FclSpec,
    },
    File {
        model: PathBuf,
        #[serde(default)]
        catalog: Option<PathBuf>,
    },
}

fn default_intra() -> Vec<f64> {
    vec![-2.5]
}

fn default_inter() -> Vec<f64> {
    vec![-0.25, 0.25]
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig::Fcl { variant: 1 }
    }
}

/// A generated or loaded problem with its mode catalog when one is
/// enumerable.
#[derive(Clone, Debug)]
pub struct Problem {
    pub model: IsingModel,
    pub spec: Option<FclSpec>,
    pub catalog: Option<ModeCatalog>,
}

impl Problem {
    pub fn generate(config: &ProblemConfig, seed: u64) -> Result<Self> {
        let spec = match config {
            ProblemConfig::Fcl { variant } => FclSpec::fcl(*variant)?,
            ProblemConfig::ScaledFcl3 => FclSpec::scaled_fcl3(),
            ProblemConfig::FclGrid {
                n,
                j_intra,
                j_inter,
                frustrate_all,
            } => FclSpec::random_grid(
                *n,
                j_intra,
                j_inter,
                *frustrate_all,
                rng::sub_seed(seed, label::PROBLEM),
            )?,
            ProblemConfig::Custom { spec } => spec.clone(),
            ProblemConfig::RandomPm1 { n } => {
                return Ok(Problem {
                    model: crate::fcl::make_random_pm1(*n, rng::sub_seed(seed, label::PROBLEM))?,
                    spec: None,
                    catalog: None,
                })
            }
            ProblemConfig::File { model, catalog } => {
                let m = io::read_model(model)?;
                let catalog = match catalog {
                    Some(p) => Some(io::read_catalog(p, m.graph_arc().clone())?),
                    None => None,
                };
                return Ok(Problem {
                    model: m,
                    spec: None,
                    catalog,
                });
            }
        };
        let model = spec.build()?;
        let catalog = if spec.clusters.len() <= MAX_CATALOG_CLUSTERS {
            Some(enumerate_cluster_minima(&model, &spec)?)
        } else {
            None
        };
        Ok(Problem {
            model,
            spec: Some(spec),
            catalog,
        })
    }

    /// The quantum-surrogate basis: one state per catalog entry.
    pub fn reduction(&self) -> Result<Option<ClusterReduction>> {
        self.catalog.as_ref().map(ClusterReduction::from_catalog).transpose()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    #[default]
    Exact,
    AnnealedMcmc,
    Surrogate,
    /// Surrogate seeds followed by `k` Gibbs sweeps.
    Seeded,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact" => SamplerKind::Exact,
            "annealed-mcmc" => SamplerKind::AnnealedMcmc,
            "surrogate" => SamplerKind::Surrogate,
            "seeded" => SamplerKind::Seeded,
            _ => return Err(Error::invalid(format!("unknown sampler {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    pub beta_min: f64,
    pub beta_max: f64,
    pub steps: usize,
    pub sweeps_per_beta: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            beta_min: 0.01,
            beta_max: 1.0,
            steps: 1000,
            sweeps_per_beta: 10,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<AnnealSchedule> {
        AnnealSchedule::linear(self.beta_min, self.beta_max, self.steps, self.sweeps_per_beta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub sampler: SamplerKind,
    pub count: usize,
    pub schedule: ScheduleConfig,
    pub surrogate: SurrogateConfig,
    pub k: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            sampler: SamplerKind::Exact,
            count: 10_000,
            schedule: ScheduleConfig::default(),
            surrogate: SurrogateConfig::default(),
            k: 50,
        }
    }
}

/// Draws `config.count` samples with the configured sampler.
pub fn run_sampler(
    model: &IsingModel,
    config: &SampleConfig,
    seed: u64,
    reduction: Option<&ClusterReduction>,
) -> Result<SampleSet> {
    let count = config.count;
    match config.sampler {
        SamplerKind::Exact => exact_sample(model, 1.0, count, seed),
        SamplerKind::AnnealedMcmc => annealed_mcmc(model, &config.schedule.build()?, count, seed),
        SamplerKind::Surrogate => surrogate_sample(model, &config.surrogate, count, seed, reduction),
        SamplerKind::Seeded => {
            let seeds = surrogate_sample(
                model,
                &config.surrogate,
                count,
                rng::sub_seed(seed, label::SURROGATE),
                reduction,
            )?;
            seeded_chains(model, &seeds, config.k, rng::sub_seed(seed, label::CHAINS))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub train: usize,
    pub test: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: 5000,
            test: 5000,
        }
    }
}

/// Exact Boltzmann training and test sets, split by interleaving one draw.
pub fn generate_dataset(model: &IsingModel, config: &DataConfig, seed: u64) -> Result<(SampleSet, SampleSet)> {
    if config.train == 0 || config.test == 0 {
        return Err(Error::invalid("train and test sizes must be positive"));
    }
    let half = config.train.max(config.test);
    let all = exact_sample(model, 1.0, 2 * half, rng::sub_seed(seed, label::DATA))?;
    let (train, test) = all.split_interleaved();
    let rows = |n: usize| (0..n).collect::<Vec<_>>();
    Ok((train.select(&rows(config.train)), test.select(&rows(config.test))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub catalog: bool,
    pub eval_every: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            catalog: true,
            eval_every: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub gzip_samples: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            gzip_samples: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub problem: ProblemConfig,
    pub data: DataConfig,
    pub sample: SampleConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Training config with the eval cadence applied.
    pub fn train_config(&self) -> TrainConfig {
        let mut t = self.train.clone();
        if let Some(e) = self.eval.eval_every {
            t.eval_every = e;
        }
        t
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample.count == 0 {
            return Err(Error::invalid("sample count must be positive"));
        }
        if self.data.train == 0 || self.data.test == 0 {
            return Err(Error::invalid("train and test sizes must be positive"));
        }
        if let ProblemConfig::File { model, catalog } = &self.problem {
            for p in std::iter::once(model).chain(catalog) {
                if !p.exists() {
                    return Err(Error::invalid(format!("{} does not exist", p.display())));
                }
            }
        }
        self.train_config().validate()
    }

    pub fn samples_path(&self, stem: &str) -> PathBuf {
        let ext = if self.output.gzip_samples { "txt.gz" } else { "txt" };
        self.output.dir.join(format!("{stem}.{ext}"))
    }
}

/// Surrogate mode needs a cluster reduction when the model is too large for
/// a direct transverse-field computation.
pub fn needs_reduction(model: &IsingModel, surrogate: &SurrogateConfig) -> bool {
    surrogate.mode == SurrogateMode::Quantum && model.node_count() > surrogate.quantum_cap
}

#[derive(Serialize, Deserialize)]
struct CachedMarginals {
    node_marg: Vec<f64>,
    edge_marg: Vec<f64>,
    log_z: f64,
}

fn model_key(model: &IsingModel, beta: f64) -> String {
    let mut h = Sha256::new();
    h.update((model.graph().n() as u64).to_le_bytes());
    for v in model.graph().masked_nodes() {
        h.update((v as u64).to_le_bytes());
    }
    h.update(b"|");
    for t in model.theta() {
        h.update(t.to_le_bytes());
    }
    h.update(beta.to_le_bytes());
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// [`exact_marginals`], memoized on disk under `$CHIMERA_BM_CACHE` when set.
pub fn cached_marginals(model: &IsingModel, beta: f64) -> Result<ExactMarginals> {
    let Some(dir) = std::env::var_os(CACHE_ENV).map(PathBuf::from) else {
        return exact_marginals(model, beta);
    };
    let path = dir.join(format!("{}.json", model_key(model, beta)));
    if let Ok(c) = io::read_json::<CachedMarginals>(&path) {
        return Ok(ExactMarginals {
            node_marg: c.node_marg,
            edge_marg: c.edge_marg,
            log_z: c.log_z,
        });
    }
    let m = exact_marginals(model, beta)?;
    io::write_json(
        &path,
        &CachedMarginals {
            node_marg: m.node_marg.clone(),
            edge_marg: m.edge_marg.clone(),
            log_z: m.log_z,
        },
    )?;
    Ok(m)
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything needed to re-run a command: arguments, seed, config and
/// the hashes of what it wrote.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub args: Vec<String>,
    pub version: String,
    pub seed: u64,
    pub paper_scale: bool,
    pub threads: usize,
    pub config: serde_json::Value,
    pub stages: Vec<StageTiming>,
    pub outputs: Vec<OutputRecord>,
    pub summary: serde_json::Value,
    #[serde(skip)]
    started: Option<Instant>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, paper_scale: bool, config: &impl Serialize) -> Self {
        Manifest {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            paper_scale,
            threads: rayon::current_num_threads(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            stages: Vec::new(),
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
            started: Some(Instant::now()),
        }
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn stage<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.stages.push(StageTiming {
            stage: stage.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.outputs.push(OutputRecord {
            path: path.to_path_buf(),
            sha256: hex(&Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        if let Some(t) = self.started {
            self.stages.push(StageTiming {
                stage: "total".into(),
                seconds: t.elapsed().as_secs_f64(),
            });
        }
        let path = dir.join("manifest.json");
        io::write_json(&path, self)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_toml_round_trip() {
        let text = r#"
            seed = 7
            [problem]
            kind = "fcl-grid"
            n = 3
            frustrate_all = true
            [sample]
            sampler = "annealed-mcmc"
            count = 100
            [sample.schedule]
            steps = 10
            [train]
            method = "seeded"
            k = 0
            [train.schedule]
            kind = "annealed"
            t_scale = 200.0
            [train.surrogate]
            mode = "noisy"
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.sample.schedule.steps, 10);
        assert_eq!(c.sample.schedule.sweeps_per_beta, 10);
        assert_eq!(c.train.surrogate.mode, SurrogateMode::Noisy);
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert!(ExperimentConfig::from_toml("[problem]\nkind = \"nope\"").is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ProblemConfig::RandomPm1 { n: 3 };
        let a = Problem::generate(&cfg, 7).unwrap();
        let b = Problem::generate(&cfg, 7).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.catalog.is_none());
        let f = Problem::generate(&ProblemConfig::Fcl { variant: 1 }, 0).unwrap();
        assert_eq!(f.catalog.unwrap().len(), 16);
    }

    #[test]
    fn dataset_split_sizes() {
        let p = Problem::generate(&ProblemConfig::Fcl { variant: 1 }, 0).unwrap();
        let (tr, te) = generate_dataset(&p.model, &DataConfig { train: 30, test: 20 }, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (30, 20));
    }

    #[test]
    fn cache_key_distinguishes_models() {
        let a = Problem::generate(&ProblemConfig::Fcl { variant: 1 }, 0).unwrap().model;
        let b = Problem::generate(&ProblemConfig::Fcl { variant: 2 }, 0).unwrap().model;
        assert_ne!(model_key(&a, 1.0), model_key(&b, 1.0));
        assert_ne!(model_key(&a, 1.0), model_key(&a, 0.5));
        assert_eq!(model_key(&a, 1.0), model_key(&a.clone(), 1.0));
    }
}
