//! A fully visible quantum Boltzmann machine on six qubits: diagonal of
//! the thermal state, its lower-bound likelihood and bound-gradient ascent.

use std::collections::BTreeSet;
use std::sync::Arc;

use chimera_bm::graph::ChimeraGraph;
use chimera_bm::model::IsingModel;
use chimera_bm::quantum::{
    build_hamiltonian, golden_thompson_bound, quantum_diagonal_distribution, quantum_gradient_datum,
    quantum_log_likelihood, quantum_stats,
};

fn main() -> chimera_bm::Result<()> {
    // one unit cell with two spins masked out
    let graph = Arc::new(ChimeraGraph::masked(1, &BTreeSet::from([3, 7]))?);
    let truth = IsingModel::new(
        graph.clone(),
        vec![0.2, -0.1, 0.0, 0.3, 0.1, -0.2],
        (0..graph.edge_count())
            .map(|e| if e % 3 == 0 { 0.8 } else { -0.6 })
            .collect(),
    )?;
    let gamma = 0.5;
    let target = quantum_diagonal_distribution(&build_hamiltonian(&truth, gamma, 1.0)?)?;
    let data = quantum_stats(&truth, &target);

    let mut model = IsingModel::zeros(graph.clone());
    for step in 0..=300 {
        let dist = quantum_diagonal_distribution(&build_hamiltonian(&model, gamma, 1.0)?)?;
        if step % 50 == 0 {
            println!(
                "step {step:>3}: bound {:.5}  log-likelihood {:.5}",
                golden_thompson_bound(&model, &dist, 1.0, &data),
                quantum_log_likelihood(&dist, &target.probs)
            );
        }
        let g = quantum_gradient_datum(&model, &vec![gamma; model.node_count()], 1.0, &data)?;
        let theta: Vec<f64> = model.theta().iter().zip(&g).map(|(t, d)| t + 0.5 * d).collect();
        model = model.with_theta(&theta)?;
    }
    println!("optimum (truth): {:.5}", quantum_log_likelihood(&target, &target.probs));
    Ok(())
}
