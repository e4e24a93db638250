use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::exact::{exact_mode_probabilities, exact_sample};
use crate::fcl::{enumerate_cluster_minima, FclSpec};
use crate::graph::{build_chimera, ChimeraGraph};
use crate::testutil::{enumerate, mask_of, random_weights};

fn c1() -> Arc<ChimeraGraph> {
    Arc::new(build_chimera(1).unwrap())
}

fn fcl1() -> (IsingModel, ModeCatalog) {
    let spec = FclSpec::fcl(1).unwrap();
    let model = spec.build().unwrap();
    let catalog = enumerate_cluster_minima(&model, &spec).unwrap();
    (model, catalog)
}

#[test]
fn histogram_counts_catalog_and_other() {
    let (model, catalog) = fcl1();
    let mut s = SampleSet::new(model.graph_arc().clone());
    for e in &catalog.entries {
        s.push(e.state.as_slice()).unwrap();
    }
    let mut odd = catalog.entries[0].state.as_slice().to_vec();
    odd[0] = -odd[0];
    s.push(&odd).unwrap();
    let h = mode_histogram(&s, &catalog).unwrap();
    assert!(h.counts.iter().all(|&c| c == 1));
    assert_eq!(h.other_count, 1);
    assert_eq!(h.total_count, catalog.len() as u64 + 1);
    assert!((h.other_mass() - 1.0 / 17.0).abs() < 1e-15);
}

#[test]
fn kl_of_identical_distributions_is_zero() {
    let p = [0.1, 0.2, 0.3, 0.4];
    assert!(kl_smoothed(&p, &p, 0.0).unwrap().abs() < 1e-15);
    let q = [0.4, 0.3, 0.2, 0.1];
    let direct: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
    assert!((kl_smoothed(&p, &q, 0.0).unwrap() - direct).abs() < 1e-14);
    assert!(kl_smoothed(&p, &q[..3], 0.0).is_err());
}

#[test]
fn kl_over_modes_near_zero_for_exact_samples() {
    let (model, catalog) = fcl1();
    let p = exact_mode_probabilities(&model, 1.0, &catalog.states()).unwrap();
    let s = exact_sample(&model, 1.0, 100_000, 2).unwrap();
    let kl = kl_over_modes(&p, &mode_histogram(&s, &catalog).unwrap()).unwrap();
    assert!(kl < 1e-3, "{kl}");
}

#[test]
fn zero_model_log_likelihood() {
    let m = IsingModel::zeros(c1());
    let s = exact_sample(
        &random_weights(&mut ChaCha8Rng::seed_from_u64(1), c1(), 1.0),
        1.0,
        100,
        1,
    )
    .unwrap();
    let ll = test_log_likelihood(&m, &s).unwrap();
    assert!((ll + 8.0 * std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn log_likelihood_matches_enumeration() {
    let m = random_weights(&mut ChaCha8Rng::seed_from_u64(2), c1(), 1.0);
    let s = exact_sample(&m, 1.0, 300, 4).unwrap();
    let o = enumerate(&m, 1.0);
    let direct: f64 = s.iter().map(|x| o.probs[mask_of(x)].ln()).sum::<f64>() / 300.0;
    assert!((test_log_likelihood(&m, &s).unwrap() - direct).abs() < 1e-10);
}

#[test]
fn ll_ratio_of_truth_is_zero_and_matches_enumeration() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let truth = random_weights(&mut r, c1(), 1.0);
    let learn = random_weights(&mut r, c1(), 1.0);
    let test = exact_sample(&truth, 1.0, 500, 5).unwrap();
    assert!(ll_ratio(&truth, &truth, &test).unwrap().abs() < 1e-12);
    let (pt, pl) = (enumerate(&truth, 1.0), enumerate(&learn, 1.0));
    let direct: f64 = test
        .iter()
        .map(|x| (pt.probs[mask_of(x)] / pl.probs[mask_of(x)]).ln())
        .sum::<f64>()
        / 500.0;
    assert!((ll_ratio(&truth, &learn, &test).unwrap() - direct).abs() < 1e-10);
}

#[test]
fn empirical_kl_matches_enumeration() {
    let m = random_weights(&mut ChaCha8Rng::seed_from_u64(7), c1(), 1.0);
    let s = exact_sample(&m, 1.0, 200, 8).unwrap();
    let o = enumerate(&m, 1.0);
    let mut counts = vec![0usize; 256];
    for x in s.iter() {
        counts[mask_of(x)] += 1;
    }
    let direct: f64 = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| {
            let p = c as f64 / 200.0;
            p * (p / o.probs[i]).ln()
        })
        .sum();
    assert!((empirical_kl(&m, &s).unwrap() - direct).abs() < 1e-10);
}

#[test]
fn fit_recovers_moments() {
    let truth = random_weights(&mut ChaCha8Rng::seed_from_u64(9), c1(), 0.5);
    let s = exact_sample(&truth, 1.0, 5000, 1).unwrap();
    let fit = boltzmann_fit(&s).unwrap();
    assert!(fit.converged, "{}", fit.moment_error);
    assert!(!fit.capped);
    let fitted = exact_marginals(&fit.model, 1.0).unwrap().to_stats().to_vec();
    let data = sample_stats(&s).to_vec();
    let worst = fitted.iter().zip(&data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3);
}

#[test]
fn fit_of_degenerate_samples_hits_cap() {
    let s = SampleSet::from_flat(c1(), vec![1i8; 8 * 10]).unwrap();
    let fit = boltzmann_fit(&s).unwrap();
    assert!(fit.capped);
}

#[test]
fn unpinned_fit_stays_finite_on_degenerate_pairs() {
    let mut s = SampleSet::new(c1());
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..400 {
        let a: i8 = if rand::Rng::random(&mut r) { 1 } else { -1 };
        let mut x: Vec<i8> = (0..8).map(|_| if rand::Rng::random(&mut r) { 1 } else { -1 }).collect();
        x[0] = a;
        x[4] = a;
        s.push(&x).unwrap();
    }
    let opts = FitOptions {
        pin_degenerate: false,
        ..Default::default()
    };
    let fit = boltzmann_fit_with(&s, &opts).unwrap();
    assert!(fit.converged);
    assert!(!fit.capped);
    assert!(boltzmann_fit(&s).unwrap().capped);
}
