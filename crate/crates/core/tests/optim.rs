mod common;

use std::sync::Arc;

use common::{mlp, point};
use gam_core::data::Targets;
use gam_core::models::{quadratic_loss, Activation, QuadraticSpec, Task};
use gam_core::optim::{
    gam_step, gam_step_traced, sam_step, schedule_value, sgd_step, train_run, Hyperparams,
    OptimizerKind, OptimizerState, Schedule, TrainSetup,
};
use gam_core::{Batch, Dataset, DifferentiableLoss};

fn plain(eta: f64, rho: f64, alpha: f64, momentum: f64) -> Hyperparams {
    Hyperparams {
        eta0: eta,
        rho0: rho,
        alpha,
        xi: 0.0,
        momentum,
        weight_decay: 0.0,
        gam_apply_ratio: 1.0,
        lr_schedule: Schedule::Constant,
        rho_schedule: Schedule::Constant,
    }
}

fn diag21() -> gam_core::models::QuadraticLoss {
    quadratic_loss(QuadraticSpec::centered(vec![2.0, 1.0])).unwrap()
}

#[test]
fn schedule_examples() {
    assert_eq!(schedule_value(Schedule::InvSqrt, 0.1, 4).unwrap(), 0.05);
    let c = schedule_value(Schedule::Cosine { total: 100 }, 0.1, 50).unwrap();
    assert!((c - 0.05).abs() < 1e-15);
    assert!(schedule_value(Schedule::Cosine { total: 100 }, 0.1, 100).unwrap().abs() < 1e-15);
    assert_eq!(schedule_value(Schedule::Constant, 0.3, 9).unwrap(), 0.3);
    assert!(schedule_value(Schedule::InvSqrt, 0.1, 0).is_err());
    assert!(schedule_value(Schedule::Cosine { total: 10 }, 0.1, 11).is_err());
}

#[test]
fn sgd_step_example() {
    let mut s = OptimizerState::new(plain(0.1, 0.0, 0.0, 0.0)).unwrap();
    let (next, r) = sgd_step(&mut s, &diag21(), &point(&[1.0, 0.0]), &Batch::placeholder()).unwrap();
    assert!((next.as_slice()[0] - 0.8).abs() < 1e-15 && next.as_slice()[1] == 0.0);
    assert_eq!(r.loss_value, 1.0);
    assert_eq!(s.t, 1);
}

#[test]
fn momentum_accumulates() {
    // Linear loss has a constant gradient: second step moves η(1 + μ)g.
    let lin = gam_core::models::LinearLoss::new(vec![1.0, -2.0], 0.0);
    let b = Batch::placeholder();
    let mut s = OptimizerState::new(plain(0.1, 0.0, 0.0, 0.9)).unwrap();
    let p0 = point(&[0.0, 0.0]);
    let (p1, _) = sgd_step(&mut s, &lin, &p0, &b).unwrap();
    let (p2, _) = sgd_step(&mut s, &lin, &p1, &b).unwrap();
    let step: Vec<f64> = p1.as_slice().iter().zip(p2.as_slice()).map(|(a, b)| a - b).collect();
    assert!((step[0] - 0.19).abs() < 1e-15 && (step[1] + 0.38).abs() < 1e-15);
}

#[test]
fn sam_step_example() {
    let mut s = OptimizerState::new(plain(0.1, 0.1, 0.0, 0.0)).unwrap();
    let (next, _) = sam_step(&mut s, &diag21(), &point(&[1.0, 0.0]), &Batch::placeholder()).unwrap();
    assert!((next.as_slice()[0] - 0.78).abs() < 1e-15 && next.as_slice()[1] == 0.0);
}

#[test]
fn gam_trace_example() {
    let q = diag21();
    let mut s = OptimizerState::new(plain(0.1, 0.1, 1.0, 0.0)).unwrap();
    let (next, report, trace) =
        gam_step_traced(&mut s, &q, &q, &point(&[1.0, 0.0]), &Batch::placeholder()).unwrap();
    let t = trace.unwrap();
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(close(&t.h_loss, &[2.0, 0.0]));
    assert!(close(&t.f, &[2.0, 0.0]));
    assert!(close(&t.theta_adv, &[1.1, 0.0]));
    assert!(close(&t.h_norm, &[0.2, 0.0]));
    assert!(close(next.as_slice(), &[0.78, 0.0]));
    assert!((report.overall_grad_norm_sq - 2.2 * 2.2).abs() < 1e-12);
}

#[test]
fn gam_at_stationary_point_stays_put() {
    let q = diag21();
    let mut s = OptimizerState::new(plain(0.1, 0.1, 1.0, 0.0)).unwrap();
    let (next, _) = gam_step(&mut s, &q, &q, &point(&[0.0, 0.0]), &Batch::placeholder()).unwrap();
    assert_eq!(next.as_slice(), &[0.0, 0.0]);
}

fn toy_data() -> Dataset {
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let x = (i as f64 * 0.61).sin();
        let y = (i as f64 * 1.37).cos();
        inputs.extend([x, y]);
        labels.push(usize::from(x + 0.5 * y > 0.0));
    }
    Dataset::new(inputs, 2, Targets::Labels { labels, classes: 2 }).unwrap()
}

#[test]
fn partial_gam_applies_to_leading_iterations() {
    let (loss, init) = mlp(&[2, 4, 2], Activation::Tanh, Task::SoftmaxCrossEntropy, 2);
    let data = toy_data();
    let setup = |ratio: f64| TrainSetup {
        empirical: Arc::new(loss.clone()) as Arc<dyn DifferentiableLoss>,
        train: &data,
        test: None,
        init: init.clone(),
        kind: OptimizerKind::Gam,
        hyper: Hyperparams {
            gam_apply_ratio: ratio,
            ..Hyperparams::default()
        },
        epochs: 3,
        batch_size: 8,
        seed: 5,
        accuracy: None,
        record_steps: true,
        record_timing: false,
    };
    for (ratio, per_epoch) in [(0.0, 0), (0.3, 2), (0.5, 3), (1.0, 5)] {
        let s = setup(ratio);
        assert_eq!(s.gam_iters_per_epoch(), per_epoch);
        let out = train_run(&s, |_, _| Ok(())).unwrap();
        let applied: Vec<bool> = out.steps.iter().map(|r| r.applied_gam).collect();
        assert_eq!(applied.len(), 15);
        for (i, a) in applied.iter().enumerate() {
            assert_eq!(*a, i % 5 < per_epoch, "ratio {ratio}, step {i}");
        }
    }
}

#[test]
fn every_optimizer_reduces_training_loss() {
    let (loss, init) = mlp(&[2, 6, 2], Activation::Tanh, Task::SoftmaxCrossEntropy, 4);
    let data = toy_data();
    for kind in [OptimizerKind::Sgd, OptimizerKind::Sam, OptimizerKind::Gam, OptimizerKind::SamGam] {
        let setup = TrainSetup {
            empirical: Arc::new(loss.clone()),
            train: &data,
            test: None,
            init: init.clone(),
            kind,
            hyper: Hyperparams {
                weight_decay: 1e-4,
                ..Hyperparams::default()
            },
            epochs: 30,
            batch_size: 10,
            seed: 1,
            accuracy: None,
            record_steps: false,
            record_timing: false,
        };
        let out = train_run(&setup, |_, _| Ok(())).unwrap();
        assert!(out.divergence.is_none());
        let first = out.rows.first().unwrap().train_loss;
        let last = out.rows.last().unwrap().train_loss;
        assert!(last < 0.5 * first, "{kind:?}: {first} -> {last}");
    }
}

#[test]
fn hyperparameter_violations_are_listed() {
    let h = Hyperparams {
        eta0: 0.0,
        rho0: -1.0,
        momentum: 1.0,
        gam_apply_ratio: 2.0,
        ..Hyperparams::default()
    };
    assert_eq!(h.violations().len(), 4);
    assert!(OptimizerState::new(h).is_err());
}
