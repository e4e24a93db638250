//! SEEDED, CD and PCD training of FCL-1 from exact samples.

use chimera_bm::experiment::{generate_dataset, DataConfig, Problem, ProblemConfig};
use chimera_bm::model::IsingModel;
use chimera_bm::train::{train, Method, TrainConfig, TrainContext};

fn main() -> chimera_bm::Result<()> {
    let truth = Problem::generate(&ProblemConfig::Fcl { variant: 1 }, 0)?.model;
    let (data, test) = generate_dataset(
        &truth,
        &DataConfig {
            train: 10_000,
            test: 10_000,
        },
        1,
    )?;
    let ctx = TrainContext {
        truth: Some(truth.clone()),
        reduction: None,
    };
    let zero = IsingModel::zeros(truth.graph_arc().clone());
    for method in [Method::Seeded, Method::Cd, Method::Pcd] {
        let cfg = TrainConfig {
            method,
            iterations: 100,
            eval_every: 10,
            ..Default::default()
        };
        let trace = train(&zero, &data, &test, &cfg, &ctx)?;
        let kls: Vec<String> = trace.rows.iter().map(|r| format!("{:.3}", r.kl_test)).collect();
        println!("{method:?}: test KL every 10 iterations {}", kls.join(" "));
    }
    Ok(())
}
