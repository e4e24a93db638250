use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::graph::{build_chimera, ChimeraGraph};
use crate::stats::sample_stats;
use crate::testutil::{enumerate, mask_of, random_masked_model, random_weights};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn isolated_spins() {
    // C_1 with every edge removed by masking is not possible, so zero the couplings
    let m = IsingModel::zeros(Arc::new(build_chimera(2).unwrap()));
    let lz = log_partition(&m, 1.0).unwrap();
    assert!(rel(lz, 32.0 * std::f64::consts::LN_2) < 1e-14);
}

#[test]
fn single_edge() {
    let masked = (0..8).filter(|&v| v != 1 && v != 6).collect();
    let g = Arc::new(ChimeraGraph::masked(1, &masked).unwrap());
    let m = IsingModel::new(g, vec![0.0; 2], vec![1.0]).unwrap();
    let expected = (2.0 * 1f64.exp() + 2.0 * (-1f64).exp()).ln();
    assert!(rel(log_partition(&m, 1.0).unwrap(), expected) < 1e-14);
}

#[test]
fn random_c1_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let m = random_weights(&mut rng, Arc::new(build_chimera(1).unwrap()), 1.5);
        let o = enumerate(&m, 1.0);
        let lz = log_partition(&m, 1.0).unwrap();
        assert!(rel(lz, o.log_z) < 1e-12, "{lz} vs {}", o.log_z);
        let em = exact_marginals(&m, 1.0).unwrap();
        assert!(rel(em.log_z, o.log_z) < 1e-12);
        for (a, b) in em.node_marg.iter().zip(&o.node) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in em.edge_marg.iter().zip(&o.edge) {
            assert!((a - b).abs() < 1e-12);
        }
        let states: Vec<SpinConfig> = (0..5)
            .map(|i| SpinConfig::new(crate::testutil::config_of(i * 37, 8)).unwrap())
            .collect();
        let p = exact_mode_probabilities(&m, 1.0, &states).unwrap();
        for (s, pi) in states.iter().zip(&p) {
            assert!(rel(*pi, o.probs[mask_of(s.as_slice())]) < 1e-10);
        }
    }
}

#[test]
fn masked_models_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..40 {
        let n = 1 + trial % 3;
        let m = random_masked_model(&mut rng, n, 14, 2.0);
        let beta = 0.7;
        let o = enumerate(&m, beta);
        let em = exact_marginals(&m, beta).unwrap();
        assert!(rel(em.log_z, o.log_z) < 1e-10);
        for (a, b) in em.node_marg.iter().zip(&o.node) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in em.edge_marg.iter().zip(&o.edge) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn zero_model_marginals() {
    let m = IsingModel::zeros(Arc::new(build_chimera(3).unwrap()));
    let em = exact_marginals(&m, 1.0).unwrap();
    assert!(em.node_marg.iter().all(|&p| (p - 0.5).abs() < 1e-14));
    assert!(em.edge_marg.iter().all(|&x| x.abs() < 1e-14));
}

#[test]
fn strong_ferromagnetic_pair() {
    let masked = (0..8).filter(|&v| v != 0 && v != 4).collect();
    let g = Arc::new(ChimeraGraph::masked(1, &masked).unwrap());
    let m = IsingModel::new(g, vec![0.0; 2], vec![-10.0]).unwrap();
    let em = exact_marginals(&m, 1.0).unwrap();
    assert!((em.edge_marg[0] - 1.0).abs() < 1e-8);
}

#[test]
fn elimination_orders_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for n in 1..=3 {
        let m = random_weights(&mut rng, Arc::new(build_chimera(n).unwrap()), 1.0);
        let col = exact_marginals(&m, 1.0).unwrap();
        let row_opts = ExactOptions {
            order: EliminationOrder::RowMajor,
            ..Default::default()
        };
        let row = exact_marginals_with(&m, 1.0, &row_opts).unwrap();
        assert!(rel(col.log_z, row.log_z) < 1e-10);
        for (a, b) in col.edge_marg.iter().zip(&row.edge_marg) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn resource_limit() {
    let m = IsingModel::zeros(Arc::new(build_chimera(6).unwrap()));
    assert!(matches!(log_partition(&m, 1.0), Err(Error::ResourceLimit(_))));
    let m = IsingModel::zeros(Arc::new(build_chimera(2).unwrap()));
    let tight = ExactOptions {
        max_n: 1,
        ..Default::default()
    };
    assert!(log_partition_with(&m, 1.0, &tight).is_err());
}

#[test]
fn large_energies_do_not_overflow() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let m = random_weights(&mut rng, Arc::new(build_chimera(1).unwrap()), 1.0);
    let beta = 60.0;
    let o = enumerate(&m, beta);
    let lz = log_partition(&m, beta).unwrap();
    assert!(lz.is_finite());
    assert!(rel(lz, o.log_z) < 1e-12);
}

#[test]
fn sampling_is_deterministic_and_batch_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = random_weights(&mut rng, Arc::new(build_chimera(2).unwrap()), 1.0);
    let a = exact_sample(&m, 1.0, 300, 99).unwrap();
    let b = exact_sample(&m, 1.0, 300, 99).unwrap();
    assert_eq!(a, b);
    let c = exact_sample(&m, 1.0, 100, 99).unwrap();
    assert_eq!(c.as_flat(), &a.as_flat()[..c.as_flat().len()]);
    assert_ne!(exact_sample(&m, 1.0, 300, 100).unwrap(), a);
}

#[test]
fn zero_model_samples_are_fair_coins() {
    let m = IsingModel::zeros(Arc::new(build_chimera(1).unwrap()));
    let count = 100_000;
    let s = exact_sample(&m, 1.0, count, 5).unwrap();
    let st = sample_stats(&s);
    let sigma = 1.0 / (count as f64).sqrt();
    assert!(st.node_part.iter().all(|&x| x.abs() < 5.0 * sigma));
}

#[test]
fn samples_match_marginals_on_c2() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let m = random_weights(&mut rng, Arc::new(build_chimera(2).unwrap()), 0.6);
    let count = 40_000;
    let s = exact_sample(&m, 1.0, count, 1).unwrap();
    let st = sample_stats(&s);
    let ex = exact_marginals(&m, 1.0).unwrap().to_stats();
    for (a, b) in st.to_vec().iter().zip(ex.to_vec()) {
        let sd = ((1.0 - b * b) / count as f64).sqrt();
        assert!((a - b).abs() < 5.0 * sd + 1e-9, "{a} vs {b}");
    }
}

#[test]
fn row_major_sampling_matches_marginals() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let m = random_masked_model(&mut rng, 2, 20, 0.8);
    let opts = ExactOptions {
        order: EliminationOrder::RowMajor,
        ..Default::default()
    };
    let count = 40_000;
    let s = exact_sample_with(&m, 1.0, count, 3, &opts).unwrap();
    let st = sample_stats(&s);
    let ex = exact_marginals(&m, 1.0).unwrap().to_stats();
    for (a, b) in st.to_vec().iter().zip(ex.to_vec()) {
        let sd = ((1.0 - b * b) / count as f64).sqrt();
        assert!((a - b).abs() < 5.0 * sd + 1e-9);
    }
}

#[test]
#[ignore]
fn bench_c5() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = random_weights(&mut rng, Arc::new(build_chimera(5).unwrap()), 1.0);
    let t = std::time::Instant::now();
    let lz = log_partition(&m, 1.0).unwrap();
    eprintln!("logZ {lz} in {:?}", t.elapsed());
    let t = std::time::Instant::now();
    let em = exact_marginals(&m, 1.0).unwrap();
    eprintln!("marginals {} in {:?}", em.log_z, t.elapsed());
    let t = std::time::Instant::now();
    let s = exact_sample(&m, 1.0, 1000, 1).unwrap();
    eprintln!("1000 samples in {:?}", t.elapsed());
    let t = std::time::Instant::now();
    let s2 = exact_sample(&m, 1.0, 100000, 1).unwrap();
    eprintln!("100000 samples in {:?} {}", t.elapsed(), s.len() + s2.len());
}
