//! Figure-data pipelines. Each runs at a reduced default scale, or at the
//! published settings with `paper_scale`, and writes plot-ready CSVs.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{
    boltzmann_fit_with, kl_over_modes, kl_smoothed, mode_histogram, test_log_likelihood, FitOptions, ModeHistogram,
};
use crate::exact::exact_mode_probabilities;
use crate::experiment::{
    generate_dataset, run_sampler, DataConfig, Manifest, Problem, ProblemConfig, SampleConfig, SamplerKind,
};
use crate::fcl::ModeCatalog;
use crate::io::{self, CsvWriter};
use crate::model::{IsingModel, SampleSet};
use crate::rng::{self, label};
use crate::sampler::{annealed_mcmc_traced, AnnealSchedule, SurrogateConfig};
use crate::train::{train, LrSchedule, Method, Optimizer, TrainConfig, TrainContext, TrainTrace};

pub const FIGURE_IDS: [&str; 8] = [
    "fcl1-sampling",
    "mcmc-dynamics",
    "pcd-size-scaling",
    "training",
    "sgd",
    "scaled-fcl3",
    "boltzmann-fit",
    "annealed-schedule",
];

#[derive(Clone, Debug, Serialize)]
pub struct ReproduceOptions {
    pub seed: u64,
    pub paper_scale: bool,
    /// Random instances per configuration where a figure uses several.
    pub instances: Option<usize>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions {
            seed: 0,
            paper_scale: false,
            instances: None,
        }
    }
}

impl ReproduceOptions {
    fn pick<T>(&self, desk: T, paper: T) -> T {
        if self.paper_scale {
            paper
        } else {
            desk
        }
    }
}

/// Runs figure `id` and writes its CSVs and a manifest into `out`.
pub fn reproduce(id: &str, opts: &ReproduceOptions, out: &Path) -> Result<PathBuf> {
    let mut manifest = Manifest::new(&format!("reproduce {id}"), opts.seed, opts.paper_scale, opts);
    let files = match id {
        "fcl1-sampling" => {
            let setup = SamplingSetup::new(opts);
            let fig = manifest.stage("sample", || sampling_figure(&setup))?;
            manifest.summary = serde_json::to_value(fig.kl_table())?;
            fig.write(out)?
        }
        "mcmc-dynamics" => {
            let setup = DynamicsSetup::new(opts);
            let fig = manifest.stage("anneal", || dynamics_figure(&setup))?;
            manifest.summary = serde_json::json!({
                "exact_excited_rise": fig.exact_excited_rise(),
                "exact_excited_fall": fig.exact_excited_fall(),
                "late_tv_max": fig.late_tv_max(0.1),
            });
            fig.write(out)?
        }
        "pcd-size-scaling" => {
            let setup = ScalingSetup::new(opts);
            let fig = manifest.stage("train", || scaling_figure(&setup))?;
            manifest.summary = serde_json::to_value(fig.medians())?;
            fig.write(out)?
        }
        "training" => {
            let setup = StabilitySetup::new(opts);
            let fig = manifest.stage("train", || stability_figure(&setup))?;
            manifest.summary = serde_json::to_value(fig.summary())?;
            fig.write(out)?
        }
        "sgd" => {
            let setup = SgdSetup::new(opts);
            let fig = manifest.stage("train", || sgd_figure(&setup))?;
            manifest.summary = serde_json::to_value(fig.summary())?;
            fig.write(out)?
        }
        "scaled-fcl3" | "boltzmann-fit" => {
            let setup = Fcl3Setup::new(opts);
            let fig = manifest.stage("train", || fcl3_study(&setup))?;
            manifest.summary = serde_json::to_value(fig.summary())?;
            if id == "scaled-fcl3" {
                fig.write_histograms(out)?
            } else {
                fig.write_fits(out)?
            }
        }
        "annealed-schedule" => {
            let setup = ScheduleSetup::new(opts);
            let fig = manifest.stage("train", || schedule_figure(&setup))?;
            manifest.summary = serde_json::to_value(fig.summary())?;
            fig.write(out)?
        }
        _ => {
            return Err(Error::invalid(format!(
                "unknown figure id {id:?}; valid ids: {}",
                FIGURE_IDS.join(", ")
            )))
        }
    };
    for f in &files {
        manifest.record(f)?;
    }
    manifest.write(out)
}

fn fcl(variant: u8) -> Result<(IsingModel, ModeCatalog)> {
    let p = Problem::generate(&ProblemConfig::Fcl { variant }, 0)?;
    Ok((p.model, p.catalog.expect("FCL problems have catalogs")))
}

/// Exact probabilities of the catalog states, renormalized over the catalog.
pub fn catalog_probabilities(model: &IsingModel, catalog: &ModeCatalog, beta: f64) -> Result<Vec<f64>> {
    let p = exact_mode_probabilities(model, beta, &catalog.states())?;
    let s: f64 = p.iter().sum();
    Ok(p.iter().map(|x| x / s).collect())
}

fn label_of(catalog: &ModeCatalog, i: usize) -> &'static str {
    if catalog.entries[i].ground {
        "ground"
    } else {
        "excited"
    }
}

// ---------------------------------------------------------------- sampling

#[derive(Clone, Debug)]
pub struct SamplingSetup {
    pub variants: Vec<u8>,
    pub chains: usize,
    pub schedule: AnnealSchedule,
    pub seed: u64,
}

impl SamplingSetup {
    pub fn new(opts: &ReproduceOptions) -> Self {
        SamplingSetup {
            variants: vec![1, 2, 3],
            chains: opts.pick(10_000, 100_000),
            schedule: AnnealSchedule::paper(),
            seed: opts.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SamplerResult {
    pub sampler: String,
    pub probabilities: Vec<f64>,
    pub kl: f64,
    pub other_mass: f64,
}

#[derive(Clone, Debug)]
pub struct SamplingPanel {
    pub variant: u8,
    pub catalog: ModeCatalog,
    pub exact: Vec<f64>,
    pub samplers: Vec<SamplerResult>,
}

impl SamplingPanel {
    pub fn kl(&self, sampler: &str) -> Option<f64> {
        self.samplers.iter().find(|s| s.sampler == sampler).map(|s| s.kl)
    }
}

#[derive(Clone, Debug)]
pub struct SamplingFigure {
    pub panels: Vec<SamplingPanel>,
}

#[derive(Serialize)]
pub struct KlRow {
    pub variant: u8,
    pub sampler: String,
    pub kl: f64,
    pub other_mass: f64,
}

fn sampler_result(name: &str, exact: &[f64], h: &ModeHistogram) -> Result<SamplerResult> {
    Ok(SamplerResult {
        sampler: name.to_string(),
        probabilities: h.probabilities(),
        kl: kl_over_modes(exact, h)?,
        other_mass: h.other_mass(),
    })
}

/// Mode occupation of FCL problems under exact Boltzmann, annealed MCMC and
/// the ideal, noisy and quantum surrogates.
pub fn sampling_figure(setup: &SamplingSetup) -> Result<SamplingFigure> {
    let mut panels = Vec::new();
    for &variant in &setup.variants {
        let (model, catalog) = fcl(variant)?;
        let exact = catalog_probabilities(&model, &catalog, 1.0)?;
        let seed = rng::sub_seed(setup.seed, variant as u64);
        let reduction = crate::quantum::ClusterReduction::from_catalog(&catalog)?;
        let mcmc = crate::sampler::annealed_mcmc(
            &model,
            &setup.schedule,
            setup.chains,
            rng::sub_seed(seed, label::CHAINS),
        )?;
        let mut samplers = vec![sampler_result("mcmc", &exact, &mode_histogram(&mcmc, &catalog)?)?];
        for (name, cfg) in [
            ("ideal", SurrogateConfig::ideal()),
            ("noisy", SurrogateConfig::noisy()),
            ("quantum", SurrogateConfig::quantum(crate::quantum::DEFAULT_GAMMA)),
        ] {
            let s = crate::sampler::surrogate_sample(
                &model,
                &cfg,
                setup.chains,
                rng::sub_seed(seed, label::SURROGATE),
                Some(&reduction),
            )?;
            samplers.push(sampler_result(name, &exact, &mode_histogram(&s, &catalog)?)?);
        }
        panels.push(SamplingPanel {
            variant,
            catalog,
            exact,
            samplers,
        });
    }
    Ok(SamplingFigure { panels })
}

impl SamplingFigure {
    pub fn kl_table(&self) -> Vec<KlRow> {
        self.panels
            .iter()
            .flat_map(|p| {
                p.samplers.iter().map(|s| KlRow {
                    variant: p.variant,
                    sampler: s.sampler.clone(),
                    kl: s.kl,
                    other_mass: s.other_mass,
                })
            })
            .collect()
    }

    pub fn panel(&self, variant: u8) -> Option<&SamplingPanel> {
        self.panels.iter().find(|p| p.variant == variant)
    }

    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let probs = out.join("mode-probabilities.csv");
        let names: Vec<String> = self.panels[0]
            .samplers
            .iter()
            .map(|s| format!("{}_p", s.sampler))
            .collect();
        let mut header = vec!["variant", "mode", "assignment", "energy", "label", "exact_p"];
        header.extend(names.iter().map(String::as_str));
        let mut w = CsvWriter::create(&probs, &header)?;
        for p in &self.panels {
            for i in p.catalog.by_energy() {
                let mut cells: Vec<String> = vec![
                    p.variant.to_string(),
                    i.to_string(),
                    assignment_string(&p.catalog.entries[i].assignment),
                    p.catalog.entries[i].energy.to_string(),
                    label_of(&p.catalog, i).to_string(),
                    p.exact[i].to_string(),
                ];
                cells.extend(p.samplers.iter().map(|s| s.probabilities[i].to_string()));
                w.row(&cells.iter().map(|c| c as &dyn std::fmt::Display).collect::<Vec<_>>())?;
            }
        }
        w.finish()?;
        let kl = out.join("kl.csv");
        let mut w = CsvWriter::create(&kl, &["variant", "sampler", "kl", "other_mass"])?;
        for r in self.kl_table() {
            w.row(&[&r.variant, &r.sampler, &r.kl, &r.other_mass])?;
        }
        w.finish()?;
        Ok(vec![probs, kl])
    }
}

pub fn assignment_string(a: &[i8]) -> String {
    a.iter().map(|&x| if x > 0 { '+' } else { '-' }).collect()
}

// ---------------------------------------------------------------- dynamics

#[derive(Clone, Debug)]
pub struct DynamicsSetup {
    pub variant: u8,
    pub chains: usize,
    pub schedule: AnnealSchedule,
    pub seed: u64,
}

impl DynamicsSetup {
    pub fn new(opts: &ReproduceOptions) -> Self {
        DynamicsSetup {
            variant: 1,
            chains: opts.pick(10_000, 100_000),
            schedule: AnnealSchedule::paper(),
            seed: opts.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicsRow {
    pub beta: f64,
    pub exact_ground: f64,
    pub exact_excited: f64,
    pub mcmc_ground: f64,
    pub mcmc_excited: f64,
    pub mcmc_other: f64,
    /// Total-variation change of the empirical mode distribution since the
    /// previous beta.
    pub tv_step: f64,
}

#[derive(Clone, Debug)]
pub struct DynamicsFigure {
    pub rows: Vec<DynamicsRow>,
}

/// Ground and excited occupation along an anneal: exact Boltzmann mass of
/// the catalog states at each beta next to the traced chains.
pub fn dynamics_figure(setup: &DynamicsSetup) -> Result<DynamicsFigure> {
    let (model, catalog) = fcl(setup.variant)?;
    let (_, traj) = annealed_mcmc_traced(&model, &setup.schedule, setup.chains, setup.seed, &catalog)?;
    let states = catalog.states();
    let ground: Vec<bool> = catalog.entries.iter().map(|e| e.ground).collect();
    let n = setup.chains as f64;
    let mut rows = Vec::with_capacity(traj.betas.len());
    let mut prev: Option<Vec<f64>> = None;
    for (step, &beta) in traj.betas.iter().enumerate() {
        let exact = exact_mode_probabilities(&model, beta, &states)?;
        let split = |p: &[f64]| -> (f64, f64) {
            p.iter()
                .zip(&ground)
                .fold((0.0, 0.0), |(g, e), (x, &gr)| if gr { (g + x, e) } else { (g, e + x) })
        };
        let (eg, ee) = split(&exact);
        let mut emp = traj.probabilities(step);
        emp.push(traj.other[step] as f64 / n);
        let (mg, me) = split(&emp[..emp.len() - 1]);
        let tv = prev.as_ref().map_or(f64::NAN, |q| {
            0.5 * emp.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
        });
        rows.push(DynamicsRow {
            beta,
            exact_ground: eg,
            exact_excited: ee,
            mcmc_ground: mg,
            mcmc_excited: me,
            mcmc_other: emp[emp.len() - 1],
            tv_step: tv,
        });
        prev = Some(emp);
    }
    Ok(DynamicsFigure { rows })
}

impl DynamicsFigure {
    fn peak(&self) -> usize {
        (0..self.rows.len())
            .max_by(|&a, &b| self.rows[a].exact_excited.total_cmp(&self.rows[b].exact_excited))
            .unwrap_or(0)
    }

    /// Rise of the exact excited mass from the start of the anneal to its peak.
    pub fn exact_excited_rise(&self) -> f64 {
        self.rows[self.peak()].exact_excited - self.rows[0].exact_excited
    }

    /// Fall of the exact excited mass from its peak to the end of the anneal.
    pub fn exact_excited_fall(&self) -> f64 {
        self.rows[self.peak()].exact_excited - self.rows[self.rows.len() - 1].exact_excited
    }

    /// Largest per-step total-variation change over the final `fraction` of
    /// the schedule.
    pub fn late_tv_max(&self, fraction: f64) -> f64 {
        let start = ((1.0 - fraction) * self.rows.len() as f64).floor() as usize;
        self.rows[start.max(1)..].iter().map(|r| r.tv_step).fold(0.0, f64::max)
    }

    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let path = out.join("occupation.csv");
        let mut w = CsvWriter::create(
            &path,
            &[
                "beta",
                "exact_ground",
                "exact_excited",
                "mcmc_ground",
                "mcmc_excited",
                "mcmc_other",
                "tv_step",
            ],
        )?;
        for r in &self.rows {
            w.row(&[
                &r.beta,
                &r.exact_ground,
                &r.exact_excited,
                &r.mcmc_ground,
                &r.mcmc_excited,
                &r.mcmc_other,
                &r.tv_step,
            ])?;
        }
        w.finish()?;
        Ok(vec![path])
    }
}

// ---------------------------------------------------------------- size scaling

#[derive(Clone, Debug)]
pub struct ScalingSetup {
    pub sizes: Vec<usize>,
    pub instances: usize,
    pub ks: Vec<usize>,
    pub data: DataConfig,
    pub iterations: usize,
    pub eta: f64,
    pub n_chains: usize,
    pub seed: u64,
}

impl ScalingSetup {
    pub fn new(opts: &ReproduceOptions) -> Self {
        ScalingSetup {
            sizes: opts.pick(vec![3, 4], vec![3, 4, 5]),
            instances: opts.instances.unwrap_or(opts.pick(5, 20)),
            ks: vec![2, 10, 50],
            data: DataConfig {
                train: 500_000,
                test: 500_000,
            },
            iterations: 500,
            eta: 0.1,
            n_chains: 1000,
            seed: opts.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub instance: usize,
    pub method: String,
    pub k: usize,
    pub final_kl: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingMedian {
    pub n: usize,
    pub method: String,
    pub k: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Clone, Debug)]
pub struct ScalingFigure {
    pub rows: Vec<ScalingRow>,
}

/// EXACT and PCD training of random ±1 models at several sizes.
pub fn scaling_figure(setup: &ScalingSetup) -> Result<ScalingFigure> {
    let mut rows = Vec::new();
    for &n in &setup.sizes {
        for inst in 0..setup.instances {
            let seed = rng::sub_seed(setup.seed, ((n as u64) << 20) | inst as u64);
            let truth = Problem::generate(&ProblemConfig::RandomPm1 { n }, seed)?.model;
            let (data, test) = generate_dataset(&truth, &setup.data, seed)?;
            let ctx = TrainContext {
                truth: Some(truth.clone()),
                reduction: None,
            };
            let zero = IsingModel::zeros(truth.graph_arc().clone());
            let mut runs = vec![(Method::Exact, 0)];
            runs.extend(setup.ks.iter().map(|&k| (Method::Pcd, k)));
            for (method, k) in runs {
                let cfg = TrainConfig {
                    method,
                    k: k.max(1),
                    n_chains: setup.n_chains,
                    optimizer: Optimizer::Nesterov,
                    eta0: setup.eta,
                    iterations: setup.iterations,
                    eval_every: setup.iterations,
                    seed: rng::sub_seed(seed, label::CHAINS),
                    ..Default::default()
                };
                let tr = train(&zero, &data, &test, &cfg, &ctx)?;
                rows.push(ScalingRow {
                    n,
                    instance: inst,
                    method: method_name(method).into(),
                    k,
                    final_kl: final_kl(&tr),
                });
            }
        }
    }
    Ok(ScalingFigure { rows })
}

fn final_kl(tr: &TrainTrace) -> f64 {
    if tr.diverged() {
        f64::INFINITY
    } else {
        tr.final_kl_test().unwrap_or(f64::INFINITY)
    }
}

pub fn method_name(m: Method) -> &'static str {
    match m {
        Method::Cd => "cd",
        Method::Pcd => "pcd",
        Method::Seeded => "seeded",
        Method::Exact => "exact",
    }
}

/// Linear-interpolated quantile of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }
}

impl ScalingFigure {
    pub fn medians(&self) -> Vec<ScalingMedian> {
        let mut keys: Vec<(usize, String, usize)> = self.rows.iter().map(|r| (r.n, r.method.clone(), r.k)).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(n, method, k)| {
                let v: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.n == n && r.method == method && r.k == k)
                    .map(|r| r.final_kl)
                    .collect();
                ScalingMedian {
                    n,
                    k,
                    median: quantile(&v, 0.5),
                    q25: quantile(&v, 0.25),
                    q75: quantile(&v, 0.75),
                    method,
                }
            })
            .collect()
    }

    pub fn median(&self, n: usize, method: &str, k: usize) -> Option<f64> {
        self.medians()
            .into_iter()
            .find(|m| m.n == n && m.method == method && m.k == k)
            .map(|m| m.median)
    }

    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let runs = out.join("runs.csv");
        let mut w = CsvWriter::create(&runs, &["n", "instance", "method", "k", "final_kl"])?;
        for r in &self.rows {
            w.row(&[&r.n, &r.instance, &r.method, &r.k, &r.final_kl])?;
        }
        w.finish()?;
        let med = out.join("medians.csv");
        let mut w = CsvWriter::create(&med, &["n", "method", "k", "median", "q25", "q75"])?;
        for m in self.medians() {
            w.row(&[&m.n, &m.method, &m.k, &m.median, &m.q25, &m.q75])?;
        }
        w.finish()?;
        Ok(vec![runs, med])
    }
}

// ---------------------------------------------------------------- training stability

#[derive(Clone, Debug)]
pub struct StabilitySetup {
    pub variant: u8,
    pub data: DataConfig,
    pub methods: Vec<Method>,
    pub k: usize,
    pub n_chains: usize,
    pub eta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl StabilitySetup {
    pub fn new(opts: &ReproduceOptions) -> Self {
        let size = opts.pick(20_000, 500_000);
        StabilitySetup {
            variant: 1,
            data: DataConfig {
                train: size,
                test: size,
            },
            methods: vec![Method::Seeded, Method::Cd, Method::Pcd],
            k: 50,
            n_chains: 1000,
            eta: 0.1,
            iterations: 200,
            seed: opts.seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TraceSet {
    pub traces: Vec<(String, TrainTrace)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceSummary {
    pub run: String,
    pub final_kl: f64,
    pub min_kl: f64,
    pub min_iter: usize,
    pub max_after_min: f64,
    pub diverged: bool,
}

impl TraceSet {
    pub fn get(&self, run: &str) -> Option<&TrainTrace> {
        self.traces.iter().find(|(r, _)| r == run).map(|(_, t)| t)
    }

    pub fn summary(&self) -> Vec<TraceSummary> {
        self.traces
            .iter()
            .map(|(run, t)| {
                let min = t.min_kl_test().expect("trace has rows");
                TraceSummary {
                    run: run.clone(),
                    final_kl: final_kl(t),
                    min_kl: min.kl_test,
                    min_iter: min.iter,
                    max_after_min: t
                        .rows
                        .iter()
                        .filter(|r| r.iter > min.iter)
                        .map(|r| r.kl_test)
                        .fold(min.kl_test, f64::max),
                    diverged: t.diverged(),
                }
            })
            .collect()
    }

    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let path = out.join("traces.csv");
        let mut w = CsvWriter::create(
            &path,
            &["run", "iter", "eta", "grad_norm", "kl_train", "kl_test", "seconds"],
        )?;
        for (run, t) in &self.traces {
            for r in &t.rows {
                w.row(&[run, &r.iter, &r.eta, &r.grad_norm, &r.kl_train, &r.kl_test, &r.seconds])?;
            }
        }
        w.finish()?;
        let sum = out.join("summary.csv");
        let mut w = CsvWriter::create(
            &sum,
            &["run", "final_kl", "min_kl", "min_iter", "max_after_min", "diverged"],
        )?;
        for s in self.summary() {
            w.row(&[
                &s.run,
                &s.final_kl,
                &s.min_kl,
                &s.min_iter,
                &s.max_after_min,
                &s.diverged,
            ])?;
        }
        w.finish()?;
        Ok(vec![path, sum])
    }
}

fn fcl_training_data(variant: u8, data: &DataConfig, seed: u64) -> Result<(IsingModel, SampleSet, SampleSet)> {
    let (truth, _) = fcl(variant)?;
    let (train_set, test) = generate_dataset(&truth, data, seed)?;
    Ok((truth, train_set, test))
}

/// SEEDED, CD and PCD training on an FCL problem with Nesterov updates.
pub fn stability_figure(setup: &StabilitySetup) -> Result<TraceSet> {
    let (truth, data, test) = fcl_training_data(setup.variant, &setup.data, setup.seed)?;
    let ctx = TrainContext {
        truth: Some(truth.clone()),
        reduction: None,
    };
    let zero = IsingModel::zeros(truth.graph_arc().clone());
    let mut traces = Vec::new();
    for &method in &setup.methods {
        let cfg = TrainConfig {
            method,
            k: setup.k,
            n_chains: setup.n_chains,
            optimizer: Optimizer::Nesterov,
            eta0: setup.eta,
            iterations: setup.iterations,
            eval_every: 1,
            surrogate: SurrogateConfig::ideal(),
            seed: rng::sub_seed(setup.seed, label::CHAINS),
            ..Default::default()
        };
        traces.push((method_name(method).to_string(), train(&zero, &data, &test, &cfg, &ctx)?));
    }
    Ok(TraceSet { traces })
}

// ---------------------------------------------------------------- SGD trade-off

#[derive(Clone, Debug)]
pub struct SgdSetup {
    pub variant: u8,
    pub data: DataConfig,
    pub etas: Vec<f64>,
    pub methods: Vec<Method>,
    pub sgd_iterations: usize,
    pub seeded_iterations: usize,
    pub k: usize,
    pub n_chains: usize,
    pub eval_every: usize,
    /// Target level above the SEEDED final KL that counts as reaching it.
    pub slack: f64,
    pub seed: u64,
}

impl SgdSetup {
    pub fn new(opts: &ReproduceOptions) -> Self {
        let size = opts.pick(20_000, 500_000);
        SgdSetup {
            variant: 2,
            data: DataConfig {
                train: size,
                test: size,
            },
            etas: vec![0.4, 0.2, 0.1, 0.05, 0.025, 0.0125],
            methods: opts.pick(vec![Method::Pcd], vec![Method::Pcd, Method::Cd]),
            sgd_iterations: opts.pick(5000, 10_000),
            seeded_iterations: 200,
            k: 50,
            n_chains: 1000,
            eval_every: 10,
            slack: 0.01,
            seed: opts.seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SgdFigure {
    pub traces: TraceSet,
    pub level: f64,
    pub seeded_run: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SgdSummary {
    pub run: String,
    pub final_kl: f64,
    pub min_kl: f64,
    pub updates_to_level: Option<usize>,
}

/// First recorded iteration at which the test KL is at or below `level`.
pub fn updates_to_reach(trace: &TrainTrace, level: f64) -> Option<usize> {
    trace.rows.iter().find(|r| r.kl_test <= level).map(|r| r.iter)
}

/// SEEDED-Nesterov against CD/PCD with plain SGD over a grid of fixed
/// learning rates.
pub fn sgd_figure(setup: &SgdSetup) -> Result<SgdFigure> {
    let (truth, data, test) = fcl_training_data(setup.variant, &setup.data, setup.seed)?;
    let ctx = TrainContext {
        truth: Some(truth.clone()),
        reduction: None,
    };
    let zero = IsingModel::zeros(truth.graph_arc().clone());
    let base = TrainConfig {
        k: setup.k,
        n_chains: setup.n_chains,
        surrogate: SurrogateConfig::ideal(),
        seed: rng::sub_seed(setup.seed, label::CHAINS),
        ..Default::default()
    };
    let seeded = train(
        &zero,
        &data,
        &test,
        &TrainConfig {
            method: Method::Seeded,
            optimizer: Optimizer::Nesterov,
            eta0: 0.1,
            iterations: setup.seeded_iterations,
            eval_every: 1,
            ..base.clone()
        },
        &ctx,
    )?;
    let level = final_kl(&seeded) + setup.slack;
    let seeded_run = "seeded-nesterov".to_string();
    let mut traces = vec![(seeded_run.clone(), seeded)];
    for &method in &setup.methods {
        for &eta in &setup.etas {
            let cfg = TrainConfig {
                method,
                optimizer: Optimizer::Sgd,
                eta0: eta,
                iterations: setup.sgd_iterations,
                eval_every: setup.eval_every,
                ..base.clone()
            };
            traces.push((
                format!("{}-sgd-{eta}", method_name(method)),
                train(&zero, &data, &test, &cfg, &ctx)?,
            ));
        }
    }
    Ok(SgdFigure {
        traces: TraceSet { traces },
        level,
        seeded_run,
    })
}

impl SgdFigure {
    pub fn summary(&self) -> Vec<SgdSummary> {
        self.traces
            .summary()
            .into_iter()
            .zip(&self.traces.traces)
            .map(|(s, (_, t))| SgdSummary {
                run: s.run,
                final_kl: s.final_kl,
                min_kl: s.min_kl,
                updates_to_level: updates_to_reach(t, self.level),
            })
            .collect()
    }

    pub fn seeded_updates(&self) -> Option<usize> {
        updates_to_reach(self.traces.get(&self.seeded_run)?, self.level)
    }

    /// Fewest updates any SGD run needed to reach the level.
    pub fn best_sgd_updates(&self, method: Method) -> Option<usize> {
        let prefix = format!("{}-sgd-", method_name(method));
        self.traces
            .traces
            .iter()
            .filter(|(r, _)| r.starts_with(&prefix))
            .filter_map(|(_, t)| updates_to_reach(t, self.level))
            .min()
    }

    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let mut files = self.traces.write(out)?;
        let path = out.join("updates.csv");
        let mut w = CsvWriter::create(&path, &["run", "final_kl", "min_kl", "level", "updates_to_level"])?;
        for s in self.summary() {
            let u = s.updates_to_level.map_or(String::new(), |u| u.to_string());
            w.row(&[&s.run, &s.final_kl, &s.min_kl, &self.level, &u])?;
        }
        w.finish()?;
        files.push(path);
        Ok(files)
    }
}

// ---------------------------------------------------------------- scaled FCL-3

#[derive(Clone, Debug)]
pub struct Fcl3Setup {
    pub data: DataConfig,
    /// `train` samples per Boltzmann fit, `test` held-out points to score fits.
    pub eval_size: DataConfig,
    pub surrogate: SurrogateConfig,
    pub k: usize,
    pub n_chains: usize,
    pub eta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Fcl3Setup {
    pub fn new(opts: &ReproduceOptions) -> Self {
        let size = opts.pick(20_000, 500_000);
        Fcl3Setup {
            data: DataConfig {
                train: size,
                test: size,
            },
            eval_size: DataConfig {
                train: 20_000,
                test: 5000,
            },
            surrogate: SurrogateConfig::quantum(crate::quantum::DEFAULT_GAMMA),
            k: 50,
            n_chains: 1000,
            eta: 0.1,
            iterations: 200,
            seed: opts.seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fcl3Study {
    pub catalog: ModeCatalog,
    pub trace: TrainTrace,
    pub learned: IsingModel,
    /// Mode probabilities: training data, `B(theta_learn)` and the surrogate
    /// `P_k(theta_learn)`.
    pub data_p: Vec<f64>,
    pub boltzmann_p: Vec<f64>,
    pub surrogate_p: Vec<f64>,
    pub kl_boltzmann: f64,
    pub kl_surrogate: f64,
    /// Mean test log-likelihoods of the held-out data.
    pub fits: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fcl3Summary {
    pub kl_boltzmann: f64,
    pub kl_surrogate: f64,
    pub fits: Vec<(String, f64)>,
}

/// SEEDED training against the cluster-reduced quantum surrogate on scaled
/// FCL-3, then a comparison of `B(theta_learn)` with `P_k(theta_learn)` by
/// mode histograms and by Boltzmann fits to samples from each.
pub fn fcl3_study(setup: &Fcl3Setup) -> Result<Fcl3Study> {
    let problem = Problem::generate(&ProblemConfig::ScaledFcl3, 0)?;
    let catalog = problem.catalog.clone().expect("scaled FCL-3 has a catalog");
    let reduction = problem.reduction()?.expect("catalog present");
    let truth = problem.model;
    let (data, test) = generate_dataset(&truth, &setup.data, setup.seed)?;
    let ctx = TrainContext {
        truth: Some(truth.clone()),
        reduction: Some(reduction.clone()),
    };
    let cfg = TrainConfig {
        method: Method::Seeded,
        k: setup.k,
        n_chains: setup.n_chains,
        optimizer: Optimizer::Nesterov,
        eta0: setup.eta,
        iterations: setup.iterations,
        eval_every: 10,
        surrogate: setup.surrogate.clone(),
        seed: rng::sub_seed(setup.seed, label::CHAINS),
        ..Default::default()
    };
    let trace = train(&IsingModel::zeros(truth.graph_arc().clone()), &data, &test, &cfg, &ctx)?;
    let learned = trace.final_model.clone();

    let n_eval = setup.eval_size.train;
    let eval_seed = rng::sub_seed(setup.seed, label::TEST);
    let surrogate_cfg = SampleConfig {
        sampler: SamplerKind::Seeded,
        count: n_eval,
        surrogate: setup.surrogate.clone(),
        k: setup.k,
        ..Default::default()
    };
    let surrogate_samples = run_sampler(&learned, &surrogate_cfg, eval_seed, Some(&reduction))?;
    let boltzmann_samples = crate::exact::exact_sample(&learned, 1.0, n_eval, eval_seed)?;
    let data_eval = data.select(&(0..n_eval.min(data.len())).collect::<Vec<_>>());

    let data_hist = mode_histogram(&data, &catalog)?;
    let data_p = data_hist.probabilities();
    let boltzmann_p = catalog_probabilities(&learned, &catalog, 1.0)?;
    let surrogate_hist = mode_histogram(&surrogate_samples, &catalog)?;
    let surrogate_p = surrogate_hist.probabilities();
    let kl_boltzmann = kl_smoothed(&data_p, &boltzmann_p, 0.0)?;
    let kl_surrogate = kl_smoothed(&data_p, &surrogate_p, 0.5 / surrogate_hist.total_count as f64)?;

    let held_out = test.select(&(0..setup.eval_size.test.min(test.len())).collect::<Vec<_>>());
    let fit_opts = FitOptions {
        pin_degenerate: false,
        ..Default::default()
    };
    let fit_on =
        |s: &SampleSet| -> Result<f64> { test_log_likelihood(&boltzmann_fit_with(s, &fit_opts)?.model, &held_out) };
    let fits = vec![
        ("true".to_string(), test_log_likelihood(&truth, &held_out)?),
        ("learned".to_string(), test_log_likelihood(&learned, &held_out)?),
        ("fit_data".to_string(), fit_on(&data_eval)?),
        ("fit_boltzmann_learned".to_string(), fit_on(&boltzmann_samples)?),
        ("fit_surrogate_learned".to_string(), fit_on(&surrogate_samples)?),
    ];
    Ok(Fcl3Study {
        catalog,
        trace,
        learned,
        data_p,
        boltzmann_p,
        surrogate_p,
        kl_boltzmann,
        kl_surrogate,
        fits,
    })
}

impl Fcl3Study {
    pub fn fit(&self, name: &str) -> Option<f64> {
        self.fits.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn summary(&self) -> Fcl3Summary {
        Fcl3Summary {
            kl_boltzmann: self.kl_boltzmann,
            kl_surrogate: self.kl_surrogate,
            fits: self.fits.clone(),
        }
    }

    pub fn write_histograms(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let path = out.join("mode-probabilities.csv");
        let mut w = CsvWriter::create(
            &path,
            &[
                "mode",
                "assignment",
                "energy",
                "label",
                "data_p",
                "boltzmann_learned_p",
                "surrogate_learned_p",
            ],
        )?;
        for i in self.catalog.by_energy() {
            let e = &self.catalog.entries[i];
            w.row(&[
                &i,
                &assignment_string(&e.assignment),
                &e.energy,
                &label_of(&self.catalog, i),
                &self.data_p[i],
                &self.boltzmann_p[i],
                &self.surrogate_p[i],
            ])?;
        }
        w.finish()?;
        let model = out.join("learned.json");
        io::write_model(&model, &self.learned)?;
        let trace = TraceSet {
            traces: vec![("seeded-quantum".into(), self.trace.clone())],
        };
        let mut files = trace.write(out)?;
        files.extend([path, model]);
        Ok(files)
    }

    pub fn write_fits(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let path = out.join("test-log-likelihood.csv");
        let mut w = CsvWriter::create(&path, &["model", "test_log_likelihood"])?;
        for (n, v) in &self.fits {
            w.row(&[n, v])?;
        }
        w.finish()?;
        Ok(vec![path])
    }
}

// ---------------------------------------------------------------- annealed schedule

#[derive(Clone, Debug)]
pub struct ScheduleSetup {
    pub n: usize,
    pub instances: usize,
    pub data: DataConfig,
    pub etas: Vec<f64>,
    pub seeded_eta: f64,
    pub t_scale: f64,
    pub iterations: usize,
    pub pcd_k: usize,
    pub seeded_k: usize,
    pub n_chains: usize,
    pub eval_every: usize,
    pub seed: u64,
}

impl ScheduleSetup {
    pub fn new(opts: &ReproduceOptions) -> Self {
        let size = opts.pick(50_000, 500_000);
        ScheduleSetup {
            n: 5,
            instances: opts.instances.unwrap_or(4),
            data: DataConfig {
                train: size,
                test: size,
            },
            etas: vec![0.1, 0.2, 0.4, 0.7, 1.0],
            seeded_eta: 0.4,
            t_scale: 200.0,
            iterations: 500,
            pcd_k: 50,
            seeded_k: 0,
            n_chains: 1000,
            eval_every: 25,
            seed: opts.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleRow {
    pub instance: usize,
    pub run: String,
    pub eta0: f64,
    pub iter: usize,
    pub kl_test: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleOutcome {
    pub instance: usize,
    pub seeded_kl: f64,
    pub pcd_best_kl: f64,
    pub pcd_best_eta0: f64,
}

#[derive(Clone, Debug)]
pub struct ScheduleFigure {
    pub rows: Vec<ScheduleRow>,
    pub outcomes: Vec<ScheduleOutcome>,
}

/// SEEDED against PCD at its best initial learning rate under decaying
/// learning rates on random 5×5 frustrated cluster grids.
pub fn schedule_figure(setup: &ScheduleSetup) -> Result<ScheduleFigure> {
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for inst in 0..setup.instances {
        let seed = rng::sub_seed(setup.seed, inst as u64);
        let problem = Problem::generate(
            &ProblemConfig::FclGrid {
                n: setup.n,
                j_intra: vec![-1.5, -2.5],
                j_inter: vec![-0.5, -0.25, 0.38],
                frustrate_all: true,
            },
            seed,
        )?;
        let truth = problem.model;
        let (data, test) = generate_dataset(&truth, &setup.data, seed)?;
        let ctx = TrainContext {
            truth: Some(truth.clone()),
            reduction: None,
        };
        let zero = IsingModel::zeros(truth.graph_arc().clone());
        let base = TrainConfig {
            n_chains: setup.n_chains,
            optimizer: Optimizer::Sgd,
            schedule: LrSchedule::Annealed { t_scale: setup.t_scale },
            iterations: setup.iterations,
            eval_every: setup.eval_every,
            surrogate: SurrogateConfig::ideal(),
            seed: rng::sub_seed(seed, label::CHAINS),
            ..Default::default()
        };
        let mut record = |run: &str, eta0: f64, t: &TrainTrace| {
            rows.extend(t.rows.iter().map(|r| ScheduleRow {
                instance: inst,
                run: run.to_string(),
                eta0,
                iter: r.iter,
                kl_test: r.kl_test,
            }));
        };
        let seeded = train(
            &zero,
            &data,
            &test,
            &TrainConfig {
                method: Method::Seeded,
                k: setup.seeded_k,
                eta0: setup.seeded_eta,
                ..base.clone()
            },
            &ctx,
        )?;
        record("seeded", setup.seeded_eta, &seeded);
        let mut best = (f64::INFINITY, f64::NAN);
        for &eta in &setup.etas {
            let t = train(
                &zero,
                &data,
                &test,
                &TrainConfig {
                    method: Method::Pcd,
                    k: setup.pcd_k,
                    eta0: eta,
                    ..base.clone()
                },
                &ctx,
            )?;
            record("pcd", eta, &t);
            let kl = final_kl(&t);
            if kl < best.0 {
                best = (kl, eta);
            }
        }
        outcomes.push(ScheduleOutcome {
            instance: inst,
            seeded_kl: final_kl(&seeded),
            pcd_best_kl: best.0,
            pcd_best_eta0: best.1,
        });
    }
    Ok(ScheduleFigure { rows, outcomes })
}

impl ScheduleFigure {
    pub fn summary(&self) -> &[ScheduleOutcome] {
        &self.outcomes
    }

    /// Instances where SEEDED ends at or below PCD's best.
    pub fn seeded_wins(&self) -> usize {
        self.outcomes.iter().filter(|o| o.seeded_kl <= o.pcd_best_kl).count()
    }

    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let path = out.join("traces.csv");
        let mut w = CsvWriter::create(&path, &["instance", "run", "eta0", "iter", "kl_test"])?;
        for r in &self.rows {
            w.row(&[&r.instance, &r.run, &r.eta0, &r.iter, &r.kl_test])?;
        }
        w.finish()?;
        let sum = out.join("outcomes.csv");
        let mut w = CsvWriter::create(&sum, &["instance", "seeded_kl", "pcd_best_kl", "pcd_best_eta0"])?;
        for o in &self.outcomes {
            w.row(&[&o.instance, &o.seeded_kl, &o.pcd_best_kl, &o.pcd_best_eta0])?;
        }
        w.finish()?;
        Ok(vec![path, sum])
    }
}
