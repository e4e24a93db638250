use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::exact::exact_sample;
use crate::graph::build_chimera;
use crate::testutil::random_weights;

fn fixture() -> (IsingModel, SampleSet, SampleSet) {
    let g = Arc::new(build_chimera(1).unwrap());
    let truth = random_weights(&mut ChaCha8Rng::seed_from_u64(1), g, 0.8);
    let data = exact_sample(&truth, 1.0, 2000, 2).unwrap();
    let test = exact_sample(&truth, 1.0, 2000, 3).unwrap();
    (truth, data, test)
}

#[test]
fn exact_gradient_vanishes_at_moment_match() {
    let (truth, _, _) = fixture();
    let em = exact_marginals(&truth, 1.0).unwrap().to_stats();
    let g = gradient_estimate(&em, &em, None).unwrap();
    assert!(g.iter().all(|x| *x == 0.0));
    let theta = truth.theta();
    assert_eq!(sgd_step(&theta, &g, 0.3), theta);
}

#[test]
fn gradient_sign_is_ascent() {
    // one free spin, data all +1: ln L increases as h decreases
    let masked = (1..8).collect();
    let g = Arc::new(crate::graph::ChimeraGraph::masked(1, &masked).unwrap());
    let m = IsingModel::zeros(g.clone());
    let data = SampleSet::from_flat(g, vec![1, 1, 1, 1]).unwrap();
    let grad = gradient_estimate(
        &sample_stats(&data),
        &exact_marginals(&m, 1.0).unwrap().to_stats(),
        None,
    )
    .unwrap();
    assert_eq!(grad, vec![-1.0]);
}

#[test]
fn masked_parameters_stay_bit_exact() {
    let (truth, data, test) = fixture();
    let start = truth.scaled(0.3);
    for method in [Method::Exact, Method::Pcd, Method::Cd, Method::Seeded] {
        let cfg = TrainConfig {
            method,
            k: 2,
            n_chains: 50,
            iterations: 5,
            ..Default::default()
        };
        let tr = train(&start, &data, &test, &cfg, &TrainContext::default()).unwrap();
        assert_eq!(tr.final_model.h(), start.h(), "{method:?}");
        assert_ne!(tr.final_model.j(), start.j());
    }
}

#[test]
fn nesterov_converges_on_quadratic() {
    // ascent on -x^T A x / 2 with A = diag(1, 10)
    let a = [1.0, 10.0];
    let mut theta = vec![3.0, -2.0];
    let mut st = OptimizerState::new(2);
    for _ in 0..300 {
        let y = st.lookahead(&theta, 0.9);
        let g: Vec<f64> = y.iter().zip(&a).map(|(y, a)| -a * y).collect();
        let (t, s) = nesterov_step(&theta, &st, &g, 0.05, 0.9);
        theta = t;
        st = s;
    }
    assert!(theta.iter().all(|x| x.abs() < 1e-6), "{theta:?}");
    assert_eq!(st.t, 300);
}

#[test]
fn annealed_schedule_values() {
    let s = LrSchedule::Annealed { t_scale: 200.0 };
    assert_eq!(lr_schedule(0.1, 0, s), 0.1);
    assert!((lr_schedule(0.1, 200, s) - 0.05).abs() < 1e-15);
    assert_eq!(lr_schedule(0.1, 999, LrSchedule::Constant), 0.1);
}

#[test]
fn exact_training_reduces_kl() {
    let (truth, data, test) = fixture();
    let cfg = TrainConfig {
        method: Method::Exact,
        iterations: 100,
        eval_every: 10,
        freeze_fields: false,
        ..Default::default()
    };
    let ctx = TrainContext {
        truth: Some(truth.clone()),
        reduction: None,
    };
    let tr = train(&IsingModel::zeros(truth.graph_arc().clone()), &data, &test, &cfg, &ctx).unwrap();
    assert_eq!(tr.rows.len(), 11);
    let (first, last) = (tr.rows[0].kl_test, tr.final_kl_test().unwrap());
    assert!(last < 0.05 && last < first / 5.0, "{first} -> {last}");
    assert!(tr
        .rows
        .iter()
        .all(|r| r.kl_train.is_finite() && r.grad_norm.is_finite()));
}

#[test]
fn training_is_deterministic() {
    let (truth, data, test) = fixture();
    let cfg = TrainConfig {
        method: Method::Pcd,
        k: 3,
        n_chains: 100,
        iterations: 10,
        ..Default::default()
    };
    let ctx = TrainContext::default();
    let a = train(&truth, &data, &test, &cfg, &ctx).unwrap();
    let b = train(&truth, &data, &test, &cfg, &ctx).unwrap();
    assert_eq!(a.final_model, b.final_model);
}

#[test]
fn divergence_is_reported() {
    let (truth, data, test) = fixture();
    let cfg = TrainConfig {
        method: Method::Exact,
        eta0: f64::MAX,
        optimizer: Optimizer::Sgd,
        iterations: 10,
        freeze_fields: false,
        ..Default::default()
    };
    let tr = train(&truth, &data, &test, &cfg, &TrainContext::default()).unwrap();
    assert!(tr.diverged());
    assert!(tr.final_model.theta().iter().all(|x| x.is_finite()));
}

#[test]
fn invalid_configs_rejected() {
    let (truth, data, test) = fixture();
    for cfg in [
        TrainConfig {
            k: 0,
            ..Default::default()
        },
        TrainConfig {
            eta0: 0.0,
            ..Default::default()
        },
        TrainConfig {
            mu: 1.0,
            ..Default::default()
        },
        TrainConfig {
            iterations: 0,
            ..Default::default()
        },
    ] {
        assert!(train(&truth, &data, &test, &cfg, &TrainContext::default()).is_err());
    }
}
