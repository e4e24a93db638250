//! Scoring samplers by the held-out likelihood of a Boltzmann fit to
//! their samples.

use chimera_bm::eval::{boltzmann_fit, empirical_kl, test_log_likelihood};
use chimera_bm::exact::exact_sample;
use chimera_bm::experiment::{Problem, ProblemConfig};
use chimera_bm::sampler::{annealed_mcmc, AnnealSchedule};

fn main() -> chimera_bm::Result<()> {
    let truth = Problem::generate(&ProblemConfig::Fcl { variant: 1 }, 0)?.model;
    let test = exact_sample(&truth, 1.0, 10_000, 1)?;
    println!(
        "test log-likelihood of the truth: {:.4}",
        test_log_likelihood(&truth, &test)?
    );

    for (name, samples) in [
        ("exact", exact_sample(&truth, 1.0, 5_000, 2)?),
        (
            "annealed mcmc",
            annealed_mcmc(&truth, &AnnealSchedule::linear(0.01, 1.0, 200, 5)?, 5_000, 3)?,
        ),
    ] {
        let fit = boltzmann_fit(&samples)?;
        println!(
            "{name:<14} fit: {} iterations, converged {}, test LL {:.4}, empirical KL to test {:.4}",
            fit.iterations,
            fit.converged,
            test_log_likelihood(&fit.model, &test)?,
            empirical_kl(&fit.model, &test)?
        );
    }
    Ok(())
}
