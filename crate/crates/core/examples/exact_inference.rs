//! Partition function, marginals and exact samples of a random C3 model.

use std::sync::Arc;

use chimera_bm::eval::mode_histogram;
use chimera_bm::exact::{exact_marginals, exact_mode_probabilities, exact_sample, log_partition};
use chimera_bm::fcl::{enumerate_cluster_minima, FclSpec};
use chimera_bm::graph::build_chimera;
use chimera_bm::model::IsingModel;
use chimera_bm::stats::sample_stats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> chimera_bm::Result<()> {
    let graph = Arc::new(build_chimera(3)?);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = (0..graph.node_count()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let j = (0..graph.edge_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = IsingModel::new(graph.clone(), h, j)?;

    let m = exact_marginals(&model, 1.0)?;
    println!(
        "C3: {} spins, {} couplers, ln Z = {:.6}",
        model.node_count(),
        graph.edge_count(),
        log_partition(&model, 1.0)?
    );

    let samples = exact_sample(&model, 1.0, 20_000, 1)?;
    let exact = m.to_stats().to_vec();
    let empirical = sample_stats(&samples).to_vec();
    let worst = exact
        .iter()
        .zip(&empirical)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("largest moment gap, 20000 exact samples vs exact marginals: {worst:.4}");

    // mode probabilities of the FCL-1 cluster minima
    let spec = FclSpec::fcl(1)?;
    let fcl = spec.build()?;
    let catalog = enumerate_cluster_minima(&fcl, &spec)?;
    let p = exact_mode_probabilities(&fcl, 1.0, &catalog.states())?;
    let hist = mode_histogram(&exact_sample(&fcl, 1.0, 20_000, 2)?, &catalog)?;
    println!(
        "FCL-1 catalog mass {:.4}, sampled {:.4}",
        p.iter().sum::<f64>(),
        1.0 - hist.other_mass()
    );
    Ok(())
}
