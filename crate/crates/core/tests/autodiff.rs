mod common;

use common::{fd_gradient, gaussian, mlp, point, rel_l2, SquarePlusLinear, SquareTimes};
use gam_core::autodiff::{grad_norm_ascent_direction, hvp_fd};
use gam_core::models::{quadratic_loss, Activation, QuadraticSpec, Task};
use gam_core::{Batch, DifferentiableLoss, GradQuery};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn diag21() -> gam_core::models::QuadraticLoss {
    quadratic_loss(QuadraticSpec::centered(vec![2.0, 1.0])).unwrap()
}

#[test]
fn evaluate_and_gradient_examples() {
    let b = Batch::placeholder();
    assert_eq!(diag21().evaluate(&point(&[1.0, 0.0]), &b).unwrap(), 1.0);
    let g = SquarePlusLinear::new().gradient(&point(&[2.0, 1.0]), &b).unwrap();
    assert_eq!(g.as_slice(), &[4.0, 3.0]);
    let g = diag21().gradient(&point(&[1.0, 0.0]), &b).unwrap();
    assert_eq!(g.as_slice(), &[2.0, 0.0]);
}

#[test]
fn hvp_examples() {
    let b = Batch::placeholder();
    let f = SquareTimes::new();
    let p = point(&[1.0, 2.0]);
    assert_eq!(f.hvp(&p, &b, &[1.0, 0.0]).unwrap().as_slice(), &[4.0, 2.0]);
    assert_eq!(f.hvp(&p, &b, &[0.0, 1.0]).unwrap().as_slice(), &[2.0, 0.0]);
    let fd = hvp_fd(&f, &p, &b, &[1.0, 0.0], 1e-5).unwrap();
    assert!((fd.as_slice()[0] - 4.0).abs() < 1e-6 && (fd.as_slice()[1] - 2.0).abs() < 1e-6);
    for eps in [1e-3, 0.5, 7.0] {
        let fd = hvp_fd(&diag21(), &point(&[0.3, -1.0]), &b, &[0.0, 1.0], eps).unwrap();
        assert!((fd.as_slice()[0]).abs() < 1e-12 && (fd.as_slice()[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn grad_norm_ascent_examples() {
    let b = Batch::placeholder();
    let f = grad_norm_ascent_direction(&diag21(), &point(&[1.0, 0.0]), &b, 0.0).unwrap();
    assert_eq!(f.as_slice(), &[2.0, 0.0]);
    let q31 = quadratic_loss(QuadraticSpec::centered(vec![3.0, 1.0])).unwrap();
    let f = grad_norm_ascent_direction(&q31, &point(&[0.0, 1.0]), &b, 0.0).unwrap();
    assert_eq!(f.as_slice(), &[0.0, 1.0]);
    let f = grad_norm_ascent_direction(&q31, &point(&[0.0, 0.0]), &b, 0.0).unwrap();
    assert_eq!(f.as_slice(), &[0.0, 0.0]);
}

#[test]
fn query_builder_matches_free_functions() {
    let b = Batch::placeholder();
    let q = diag21();
    let p = point(&[1.0, 0.5]);
    let v = point(&[0.0, 1.0]);
    let query = GradQuery::new(&q, &p, &b);
    assert_eq!(query.evaluate().unwrap(), q.evaluate(&p, &b).unwrap());
    assert_eq!(query.along(&v).hvp().unwrap().as_slice(), &[0.0, 1.0]);
}

#[test]
fn dimension_mismatch_is_reported() {
    let b = Batch::placeholder();
    assert!(diag21().gradient(&point(&[1.0]), &b).is_err());
    assert!(diag21().hvp(&point(&[1.0, 0.0]), &b, &[1.0]).is_err());
}

#[test]
fn relu_mlp_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let widths = [3, 6, 2];
    let (loss, p) = mlp(&widths, Activation::Relu, Task::SoftmaxCrossEntropy, 4);
    let batch = common::random_batch(&mut rng, &widths, 5, Task::SoftmaxCrossEntropy);
    let g = loss.gradient(&p, &batch).unwrap();
    let fd = fd_gradient(&loss, &p, &batch, 1e-7);
    assert!(rel_l2(g.as_slice(), &fd) < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hvp_is_linear_and_symmetric(seed in 0u64..10_000, a in -3.0f64..3.0, c in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = [2, 4, 3];
        let (loss, p) = mlp(&widths, Activation::Tanh, Task::SoftmaxCrossEntropy, seed);
        let batch = common::random_batch(&mut rng, &widths, 4, Task::SoftmaxCrossEntropy);
        let u = gaussian(&mut rng, p.dim());
        let v = gaussian(&mut rng, p.dim());
        let hu = loss.hvp(&p, &batch, &u).unwrap();
        let hv = loss.hvp(&p, &batch, &v).unwrap();
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + c * y).collect();
        let hmix = loss.hvp(&p, &batch, &mix).unwrap();
        for i in 0..p.dim() {
            let expected = a * hu.as_slice()[i] + c * hv.as_slice()[i];
            let scale = 1.0 + a.abs() * hu.norm() + c.abs() * hv.norm();
            prop_assert!((hmix.as_slice()[i] - expected).abs() <= 1e-10 * scale);
        }
        let uhv: f64 = u.iter().zip(hv.as_slice()).map(|(x, y)| x * y).sum();
        let vhu: f64 = v.iter().zip(hu.as_slice()).map(|(x, y)| x * y).sum();
        prop_assert!((uhv - vhu).abs() <= 1e-8 * uhv.abs().max(vhu.abs()).max(1e-12));
    }

    #[test]
    fn mse_gradient_matches_finite_differences(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = [3, 5, 2];
        let (loss, p) = mlp(&widths, Activation::Tanh, Task::Mse, seed);
        let batch = common::random_batch(&mut rng, &widths, 3, Task::Mse);
        let g = loss.gradient(&p, &batch).unwrap();
        let fd = fd_gradient(&loss, &p, &batch, 1e-5);
        prop_assert!(rel_l2(g.as_slice(), &fd) < 1e-5);
    }
}
