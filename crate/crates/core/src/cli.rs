//! The `chimera-bm` command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 I/O or parse failure,
//! 3 training diverged, 4 resource limit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{empirical_kl, kl_over_modes, mode_histogram, test_log_likelihood, KlEstimator};
use crate::experiment::{
    generate_dataset, run_sampler, ExperimentConfig, Manifest, Problem, ProblemConfig, SamplerKind,
};
use crate::fcl::ModeCatalog;
use crate::io::{self, CsvWriter};
use crate::model::{IsingModel, SampleSet};
use crate::quantum::ClusterReduction;
use crate::reproduce::{self, assignment_string, catalog_probabilities, ReproduceOptions};
use crate::rng::{self, label};
use crate::sampler::SurrogateMode;
use crate::train::{train, LrSchedule, Method, Optimizer, TrainContext, TrainStatus};

#[derive(Parser, Debug)]
#[command(name = "chimera-bm", version, about = "Boltzmann machines on Chimera Ising models")]
pub struct Cli {
    /// Experiment config (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Use the published sample counts and iteration budgets.
    #[arg(long, global = true)]
    pub paper_scale: bool,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a problem's model file and, for cluster problems, its catalog.
    Generate(GenerateArgs),
    /// Draw samples from a model.
    Sample(SampleArgs),
    /// Learn parameters from data.
    Train(TrainArgs),
    /// Score a model against test data.
    Eval(EvalArgs),
    /// Regenerate the data behind one figure.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Frustrated cluster loop variant 1-4.
    #[arg(long, conflicts_with_all = ["scaled_fcl3", "fcl_grid", "random_pm1"])]
    pub fcl: Option<u8>,
    #[arg(long)]
    pub scaled_fcl3: bool,
    /// Random n×n grid of clusters.
    #[arg(long)]
    pub fcl_grid: bool,
    /// Random ±1 couplings on the full graph.
    #[arg(long)]
    pub random_pm1: bool,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub intra: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub inter: Option<Vec<f64>>,
    #[arg(long)]
    pub frustrate_all: bool,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// exact, annealed-mcmc, surrogate or seeded.
    #[arg(long)]
    pub sampler: Option<SamplerKind>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Surrogate mode: ideal, noisy or quantum.
    #[arg(long)]
    pub surrogate: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Gibbs sweeps after each seed (seeded sampler).
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Generating model; used for data generation and KL monitoring.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Initial parameters (default all zero).
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// cd, pcd, seeded or exact.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// sgd or nesterov.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Decay the learning rate as eta / (t / T + 1).
    #[arg(long)]
    pub t_scale: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub surrogate: Option<String>,
    #[arg(long)]
    pub eval_every: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Model to score.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Generating model, for the log-likelihood-ratio KL estimate.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Samples to compare with the model over the catalog.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// Figure id.
    pub id: String,
    #[arg(long)]
    pub instances: Option<usize>,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cd" => Method::Cd,
            "pcd" => Method::Pcd,
            "seeded" => Method::Seeded,
            "exact" => Method::Exact,
            _ => return Err(Error::invalid(format!("unknown method {s:?}"))),
        })
    }
}

impl std::str::FromStr for Optimizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sgd" => Optimizer::Sgd,
            "nesterov" => Optimizer::Nesterov,
            _ => return Err(Error::invalid(format!("unknown optimizer {s:?}"))),
        })
    }
}

impl std::str::FromStr for SurrogateMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ideal" => SurrogateMode::Ideal,
            "noisy" => SurrogateMode::Noisy,
            "quantum" => SurrogateMode::Quantum,
            _ => return Err(Error::invalid(format!("unknown surrogate mode {s:?}"))),
        })
    }
}

/// Parses `std::env::args`, runs the command and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Diverged) => {
            eprintln!("training diverged");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Parse { .. } => 2,
        Error::ResourceLimit(_) => 4,
        _ => 1,
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Diverged,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    if let Some(t) = cli.threads {
        // a second call in one process (tests) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.output.dir = o.clone();
    }
    match &cli.command {
        Command::Generate(a) => generate(&cli, config, a),
        Command::Sample(a) => sample(&cli, config, a),
        Command::Train(a) => train_cmd(&cli, config, a),
        Command::Eval(a) => eval_cmd(&cli, config, a),
        Command::Reproduce(a) => {
            let opts = ReproduceOptions {
                seed: config.seed,
                paper_scale: cli.paper_scale,
                instances: a.instances,
            };
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&a.id));
            let manifest = reproduce::reproduce(&a.id, &opts, &out)?;
            println!("wrote {}", manifest.display());
            Ok(Outcome::Done)
        }
    }
}

fn generate(cli: &Cli, mut config: ExperimentConfig, a: &GenerateArgs) -> Result<Outcome> {
    let n = a.n;
    let need_n = || n.ok_or_else(|| Error::invalid("--n is required for this problem"));
    if let Some(v) = a.fcl {
        config.problem = ProblemConfig::Fcl { variant: v };
    } else if a.scaled_fcl3 {
        config.problem = ProblemConfig::ScaledFcl3;
    } else if a.fcl_grid {
        config.problem = ProblemConfig::FclGrid {
            n: need_n()?,
            j_intra: a.intra.clone().unwrap_or_else(|| vec![-2.5]),
            j_inter: a.inter.clone().unwrap_or_else(|| vec![-0.25, 0.25]),
            frustrate_all: a.frustrate_all,
        };
    } else if a.random_pm1 {
        config.problem = ProblemConfig::RandomPm1 { n: need_n()? };
    }
    config.validate()?;
    let dir = config.output.dir.clone();
    let mut manifest = Manifest::new("generate", config.seed, cli.paper_scale, &config);
    let problem = manifest.stage("generate", || Problem::generate(&config.problem, config.seed))?;
    let g = problem.model.graph();
    let mut summary = format!("{} nodes, {} edges", g.node_count(), g.edge_count());
    let model_path = dir.join("model.json");
    io::write_model(&model_path, &problem.model)?;
    manifest.record(&model_path)?;
    if let Some(spec) = &problem.spec {
        let p = dir.join("spec.json");
        io::write_json(&p, spec)?;
        manifest.record(&p)?;
    }
    if let Some(c) = &problem.catalog {
        let p = dir.join("catalog.json");
        io::write_catalog(&p, c)?;
        manifest.record(&p)?;
        summary.push_str(&format!(
            "; {} minima, {} ground, gap {}",
            c.len(),
            c.ground_count,
            (c.gap * 1e9).round() / 1e9
        ));
    }
    manifest.summary = serde_json::json!({ "summary": summary });
    manifest.write(&dir)?;
    println!("{summary}");
    Ok(Outcome::Done)
}

/// Model and catalog from explicit files, or generated from the config.
fn load_problem(config: &ExperimentConfig, model: Option<&Path>, catalog: Option<&Path>) -> Result<Problem> {
    match model {
        Some(m) => {
            let model = io::read_model(m)?;
            let catalog = match catalog {
                Some(c) => Some(io::read_catalog(c, model.graph_arc().clone())?),
                None => None,
            };
            Ok(Problem {
                model,
                spec: None,
                catalog,
            })
        }
        None => Problem::generate(&config.problem, config.seed),
    }
}

fn reduction_for(
    model: &IsingModel,
    catalog: Option<&ModeCatalog>,
    mode: SurrogateMode,
    cap: usize,
) -> Result<Option<ClusterReduction>> {
    if mode != SurrogateMode::Quantum || model.node_count() <= cap {
        return Ok(None);
    }
    catalog.map(ClusterReduction::from_catalog).transpose()
}

fn write_histogram(path: &Path, catalog: &ModeCatalog, exact: &[f64], empirical: &[f64]) -> Result<()> {
    let mut w = CsvWriter::create(
        path,
        &["mode", "assignment", "energy", "label", "exact_p", "empirical_p"],
    )?;
    for i in catalog.by_energy() {
        let e = &catalog.entries[i];
        let label = if e.ground { "ground" } else { "excited" };
        w.row(&[
            &i,
            &assignment_string(&e.assignment),
            &e.energy,
            &label,
            &exact[i],
            &empirical[i],
        ])?;
    }
    w.finish()
}

fn sample(cli: &Cli, mut config: ExperimentConfig, a: &SampleArgs) -> Result<Outcome> {
    if let Some(s) = a.sampler {
        config.sample.sampler = s;
    }
    match a.count {
        Some(c) => config.sample.count = c,
        None if cli.paper_scale => config.sample.count = 100_000,
        None => {}
    }
    if let Some(m) = &a.surrogate {
        config.sample.surrogate.mode = m.parse()?;
    }
    if let Some(g) = a.gamma {
        config.sample.surrogate.gamma = g;
    }
    if let Some(k) = a.k {
        config.sample.k = k;
    }
    config.validate()?;
    let dir = config.output.dir.clone();
    let mut manifest = Manifest::new("sample", config.seed, cli.paper_scale, &config);
    let problem = load_problem(&config, a.model.as_deref(), a.catalog.as_deref())?;
    let s = &config.sample.surrogate;
    let reduction = reduction_for(&problem.model, problem.catalog.as_ref(), s.mode, s.quantum_cap)?;
    let samples = manifest.stage("sample", || {
        run_sampler(
            &problem.model,
            &config.sample,
            rng::sub_seed(config.seed, label::CHAINS),
            reduction.as_ref(),
        )
    })?;
    let path = config.samples_path("samples");
    io::write_samples(&path, &samples)?;
    manifest.record(&path)?;
    if let Some(catalog) = config.eval.catalog.then_some(problem.catalog.as_ref()).flatten() {
        let exact = catalog_probabilities(&problem.model, catalog, 1.0)?;
        let hist = mode_histogram(&samples, catalog)?;
        let kl = kl_over_modes(&exact, &hist)?;
        let p = dir.join("histogram.csv");
        write_histogram(&p, catalog, &exact, &hist.probabilities())?;
        manifest.record(&p)?;
        manifest.summary = serde_json::json!({ "kl": kl, "other_mass": hist.other_mass() });
        println!("KL over modes: {kl:.6} (mass outside catalog {:.4})", hist.other_mass());
    }
    manifest.write(&dir)?;
    println!("wrote {} samples to {}", samples.len(), path.display());
    Ok(Outcome::Done)
}

fn train_cmd(cli: &Cli, mut config: ExperimentConfig, a: &TrainArgs) -> Result<Outcome> {
    let t = &mut config.train;
    if let Some(m) = &a.method {
        t.method = m.parse()?;
    }
    if let Some(k) = a.k {
        t.k = k;
    }
    if let Some(c) = a.chains {
        t.n_chains = c;
    }
    if let Some(o) = &a.optimizer {
        t.optimizer = o.parse()?;
    }
    if let Some(e) = a.eta {
        t.eta0 = e;
    }
    if let Some(ts) = a.t_scale {
        t.schedule = LrSchedule::Annealed { t_scale: ts };
    }
    if let Some(i) = a.iterations {
        t.iterations = i;
    }
    if let Some(m) = &a.surrogate {
        t.surrogate.mode = m.parse()?;
    }
    if let Some(e) = a.eval_every {
        config.eval.eval_every = Some(e);
    }
    config.train.seed = config.seed;
    config.validate()?;
    let dir = config.output.dir.clone();
    let mut manifest = Manifest::new("train", config.seed, cli.paper_scale, &config);
    // the generating model, when one is known, drives data generation and KL monitoring
    let problem = if a.model.is_some() || a.data.is_none() || cli.config.is_some() {
        Some(load_problem(&config, a.model.as_deref(), a.catalog.as_deref())?)
    } else {
        None
    };
    let (data, test) = match (&a.data, &a.test) {
        (Some(d), Some(t)) => {
            let graph = match (&problem, &a.init) {
                (Some(p), _) => p.model.graph_arc().clone(),
                (None, Some(i)) => io::read_model(i)?.graph_arc().clone(),
                (None, None) => return Err(Error::invalid("--data needs --model or --init to fix the graph")),
            };
            (io::read_samples(d, graph.clone())?, io::read_samples(t, graph)?)
        }
        (None, None) => {
            let truth = &problem.as_ref().expect("problem loaded").model;
            let (d, t) = manifest.stage("data", || generate_dataset(truth, &config.data, config.seed))?;
            for (name, s) in [("train", &d), ("test", &t)] {
                let p = config.samples_path(name);
                io::write_samples(&p, s)?;
                manifest.record(&p)?;
            }
            (d, t)
        }
        _ => return Err(Error::invalid("give both --data and --test, or neither")),
    };
    let init = match &a.init {
        Some(p) => io::read_model(p)?,
        None => IsingModel::zeros(data.graph_arc().clone()),
    };
    let tc = config.train_config();
    let reduction = match &problem {
        Some(p) => reduction_for(&init, p.catalog.as_ref(), tc.surrogate.mode, tc.surrogate.quantum_cap)?,
        None => None,
    };
    let ctx = TrainContext {
        truth: problem.as_ref().map(|p| p.model.clone()),
        reduction,
    };
    let trace = manifest.stage("train", || train(&init, &data, &test, &tc, &ctx))?;
    let trace_path = dir.join("trace.csv");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let f = std::fs::File::create(&trace_path).map_err(|e| Error::io(&trace_path, e))?;
    trace
        .write_csv(std::io::BufWriter::new(f))
        .map_err(|e| Error::io(&trace_path, e))?;
    manifest.record(&trace_path)?;
    let model_path = dir.join("learned.json");
    io::write_model(&model_path, &trace.final_model)?;
    manifest.record(&model_path)?;
    manifest.summary = serde_json::json!({
        "status": trace.status,
        "final_kl_test": trace.final_kl_test(),
    });
    manifest.write(&dir)?;
    if let Some(r) = trace.rows.last() {
        println!(
            "iteration {}: kl_train {:.6} kl_test {:.6}",
            r.iter, r.kl_train, r.kl_test
        );
    }
    Ok(match trace.status {
        TrainStatus::Completed => Outcome::Done,
        TrainStatus::Diverged { .. } => Outcome::Diverged,
    })
}

fn eval_cmd(cli: &Cli, config: ExperimentConfig, a: &EvalArgs) -> Result<Outcome> {
    let dir = config.output.dir.clone();
    let mut manifest = Manifest::new("eval", config.seed, cli.paper_scale, &config);
    let model = io::read_model(&a.model)?;
    let test = io::read_samples(&a.test, model.graph_arc().clone())?;
    let mut summary = serde_json::Map::new();
    summary.insert("test_log_likelihood".into(), test_log_likelihood(&model, &test)?.into());
    summary.insert("empirical_kl".into(), empirical_kl(&model, &test)?.into());
    if let Some(t) = &a.truth {
        let truth = io::read_model(t)?;
        summary.insert(
            "kl_estimate".into(),
            KlEstimator::new(&truth, &test)?.estimate(&model)?.into(),
        );
    }
    if let (Some(c), Some(s)) = (&a.catalog, &a.samples) {
        let catalog = io::read_catalog(c, model.graph_arc().clone())?;
        let samples: SampleSet = io::read_samples(s, model.graph_arc().clone())?;
        let exact = catalog_probabilities(&model, &catalog, 1.0)?;
        let hist = mode_histogram(&samples, &catalog)?;
        summary.insert("kl_over_modes".into(), kl_over_modes(&exact, &hist)?.into());
        let p = dir.join("histogram.csv");
        write_histogram(&p, &catalog, &exact, &hist.probabilities())?;
        manifest.record(&p)?;
    }
    let summary = serde_json::Value::Object(summary);
    let p = dir.join("eval.json");
    io::write_json(&p, &summary)?;
    manifest.record(&p)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    manifest.summary = summary;
    manifest.write(&dir)?;
    Ok(Outcome::Done)
}
