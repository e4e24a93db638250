//! Ideal, noisy and quantum annealer surrogates on FCL-2.

use chimera_bm::eval::{kl_over_modes, mode_histogram};
use chimera_bm::experiment::{Problem, ProblemConfig};
use chimera_bm::reproduce::catalog_probabilities;
use chimera_bm::sampler::{seeded_chains, surrogate_sample, SurrogateConfig};

fn main() -> chimera_bm::Result<()> {
    let problem = Problem::generate(&ProblemConfig::Fcl { variant: 2 }, 0)?;
    let catalog = problem.catalog.clone().expect("FCL-2 has a catalog");
    // the full model has 32 spins, so the quantum surrogate works on one
    // effective spin per cluster
    let reduction = problem.reduction()?;
    let exact = catalog_probabilities(&problem.model, &catalog, 1.0)?;

    let count = 20_000;
    for (name, cfg) in [
        ("ideal", SurrogateConfig::ideal()),
        ("noisy", SurrogateConfig::noisy()),
        ("quantum", SurrogateConfig::quantum(0.5)),
    ] {
        let raw = surrogate_sample(&problem.model, &cfg, count, 1, reduction.as_ref())?;
        let post = seeded_chains(&problem.model, &raw, 50, 2)?;
        let kl_raw = kl_over_modes(&exact, &mode_histogram(&raw, &catalog)?)?;
        let kl_post = kl_over_modes(&exact, &mode_histogram(&post, &catalog)?)?;
        println!("{name:<8} KL raw {kl_raw:.4}, after 50 Gibbs sweeps {kl_post:.4}");
    }
    Ok(())
}
