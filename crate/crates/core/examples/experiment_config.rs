//! A TOML experiment: problem, data, training and a manifest of outputs.

use chimera_bm::experiment::{generate_dataset, ExperimentConfig, Manifest, Problem};
use chimera_bm::io;
use chimera_bm::model::IsingModel;
use chimera_bm::train::{train, TrainContext};

const CONFIG: &str = r#"
seed = 5

[problem]
kind = "fcl"
variant = 2

[data]
train = 5000
test = 5000

[train]
method = "seeded"
optimizer = "nesterov"
eta0 = 0.1
iterations = 60
eval_every = 20

[train.surrogate]
mode = "noisy"
"#;

fn main() -> chimera_bm::Result<()> {
    let config = ExperimentConfig::from_toml(CONFIG)?;
    config.validate()?;
    let out = std::env::temp_dir().join("chimera-bm-example");
    std::fs::create_dir_all(&out).map_err(|e| chimera_bm::Error::io(&out, e))?;

    let mut manifest = Manifest::new("example", config.seed, false, &config);
    let problem = manifest.stage("generate", || Problem::generate(&config.problem, config.seed))?;
    let (data, test) = manifest.stage("data", || generate_dataset(&problem.model, &config.data, config.seed))?;
    let ctx = TrainContext {
        truth: Some(problem.model.clone()),
        reduction: problem.reduction()?,
    };
    let zero = IsingModel::zeros(problem.model.graph_arc().clone());
    let trace = manifest.stage("train", || train(&zero, &data, &test, &config.train_config(), &ctx))?;
    for r in &trace.rows {
        println!("iter {:>3}  eta {:.3}  test KL {:.4}", r.iter, r.eta, r.kl_test);
    }

    let learned = out.join("learned.json");
    io::write_model(&learned, &trace.final_model)?;
    manifest.record(&learned)?;
    println!("wrote {}", manifest.write(&out)?.display());
    Ok(())
}
