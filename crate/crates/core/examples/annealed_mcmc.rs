//! Simulated annealing on FCL-1 freezes out before reaching Boltzmann
//! statistics at beta = 1.

use chimera_bm::eval::{kl_over_modes, mode_histogram};
use chimera_bm::experiment::{Problem, ProblemConfig};
use chimera_bm::reproduce::{assignment_string, catalog_probabilities};
use chimera_bm::sampler::{annealed_mcmc, AnnealSchedule};

fn main() -> chimera_bm::Result<()> {
    let problem = Problem::generate(&ProblemConfig::Fcl { variant: 1 }, 0)?;
    let catalog = problem.catalog.expect("FCL-1 has a catalog");
    let exact = catalog_probabilities(&problem.model, &catalog, 1.0)?;

    let chains = 5_000;
    let samples = annealed_mcmc(&problem.model, &AnnealSchedule::paper(), chains, 3)?;
    let hist = mode_histogram(&samples, &catalog)?;
    let emp = hist.probabilities();

    println!("{:<6} {:>6} {:>8} {:>8}", "mode", "E", "exact", "mcmc");
    for i in catalog.by_energy() {
        let e = &catalog.entries[i];
        println!(
            "{:<6} {:>6} {:>8.4} {:>8.4}",
            assignment_string(&e.assignment),
            e.energy,
            exact[i],
            emp[i]
        );
    }
    println!(
        "KL(B || P_mcmc) over the catalog, {chains} chains: {:.4}",
        kl_over_modes(&exact, &hist)?
    );
    Ok(())
}
