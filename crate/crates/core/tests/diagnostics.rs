mod common;

use common::{mlp, point, Cosine};
use gam_core::diagnostics::{
    census_along, count_extrema, estimate_flatness, estimate_r0, estimate_r1, flatness_report,
    generalization_bound, hutchinson_trace, landscape_slice, minima_census, power_iteration_topk,
    BoundInputs, ExtremaCount, ProbeConfig, SliceSpec, SpectrumSettings,
};
use gam_core::models::{quadratic_loss, Activation, LinearLoss, QuadraticSpec, Task};
use gam_core::{Batch, DifferentiableLoss};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn diag(a: &[f64]) -> gam_core::models::QuadraticLoss {
    quadratic_loss(QuadraticSpec::centered(a.to_vec())).unwrap()
}

fn within(value: f64, expected: f64, rel: f64) -> bool {
    (value - expected).abs() <= rel * expected.abs()
}

#[test]
fn flatness_examples() {
    let b = Batch::placeholder();
    let probe = ProbeConfig::default();
    let q = diag(&[2.0, 1.0]);
    let r0 = estimate_r0(&q, &q.center(), &b, 0.1, &probe).unwrap();
    let r1 = estimate_r1(&q, &q.center(), &b, 0.1, &probe).unwrap();
    assert!(within(r0, 0.01, 0.02), "r0 = {r0}");
    assert!(within(r1, 0.02, 0.02), "r1 = {r1}");
    let (s0, s1) = estimate_flatness(&q, &q.center(), &b, 0.1, &probe).unwrap();
    assert!(s1 >= s0);

    let lin = LinearLoss::new(vec![3.0, 0.0], 0.0);
    let r0 = estimate_r0(&lin, &point(&[0.2, -0.4]), &b, 0.1, &probe).unwrap();
    assert!(within(r0, 0.3, 0.02), "linear r0 = {r0}");
    assert!(estimate_r0(&lin, &point(&[0.0, 0.0]), &b, 0.0, &probe).is_err());
}

#[test]
fn flatness_is_a_lower_bound_and_seeded() {
    let b = Batch::placeholder();
    let probe = ProbeConfig {
        seed: 17,
        ..ProbeConfig::default()
    };
    let q = diag(&[5.0, 3.0, 1.0]);
    let p = point(&[0.3, -0.2, 0.9]);
    let (r0, r1) = estimate_flatness(&q, &p, &b, 0.2, &probe).unwrap();
    assert_eq!((r0, r1), estimate_flatness(&q, &p, &b, 0.2, &probe).unwrap());
    // Analytic maxima over the ball bound the estimates from above.
    let grad_norm = (1.5f64 * 1.5 + 0.6 * 0.6 + 0.9 * 0.9).sqrt();
    assert!(r0 > 0.0 && r0 <= 0.2 * grad_norm + 0.5 * 5.0 * 0.04 + 1e-12);
    assert!(r1 > 0.0 && r1 <= 0.2 * (grad_norm + 5.0 * 0.2) + 1e-12);
}

#[test]
fn spectrum_examples() {
    let b = Batch::placeholder();
    let q = diag(&[3.0, 1.0]);
    let p = point(&[0.5, 0.5]);
    let one = power_iteration_topk(&q, &p, &b, 1, 200, 1e-12, 0).unwrap();
    assert!(within(one.eigenvalues[0], 3.0, 1e-6));
    let two = power_iteration_topk(&q, &p, &b, 2, 200, 1e-12, 0).unwrap();
    assert!(within(two.eigenvalues[0], 3.0, 1e-6) && within(two.eigenvalues[1], 1.0, 1e-6));
    assert!(power_iteration_topk(&q, &p, &b, 3, 10, 1e-8, 0).is_err());

    let t = hutchinson_trace(&q, &p, &b, 16, 3).unwrap();
    assert_eq!((t.trace, t.stderr), (4.0, 0.0));
}

#[test]
fn hutchinson_matches_exhaustive_diagonal_on_mlp() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let widths = [3, 8, 3];
    let (loss, p) = mlp(&widths, Activation::Tanh, Task::SoftmaxCrossEntropy, 6);
    let batch = common::random_batch(&mut rng, &widths, 10, Task::SoftmaxCrossEntropy);
    let exact: f64 = (0..p.dim())
        .map(|i| {
            let mut e = vec![0.0; p.dim()];
            e[i] = 1.0;
            loss.hvp(&p, &batch, &e).unwrap().as_slice()[i]
        })
        .sum();
    let t = hutchinson_trace(&loss, &p, &batch, 200, 9).unwrap();
    assert!((t.trace - exact).abs() <= 3.0 * t.stderr, "{} vs {exact} ± {}", t.trace, t.stderr);
}

#[test]
fn cosine_census_examples() {
    let b = Batch::placeholder();
    let probe = ProbeConfig {
        step_norm: 0.01,
        num_steps: 10,
        ..ProbeConfig::default()
    };
    let c = census_along(&Cosine::new(10.0), &point(&[0.0]), &b, &[vec![1.0]], &probe).unwrap();
    assert_eq!(c.per_direction, vec![ExtremaCount { minima: 0, maxima: 1 }]);
    // −cos(0.8πk) takes ranks 0,2,1,1,2 on k mod 5: one strict minimum (k = 5)
    // and four strict maxima; the k = 2,3 and 7,8 plateaus are not strict.
    let c = census_along(&Cosine::new(40.0), &point(&[0.0]), &b, &[vec![1.0]], &probe).unwrap();
    assert_eq!(c.per_direction, vec![ExtremaCount { minima: 1, maxima: 4 }]);
}

#[test]
fn census_is_deterministic_and_zero_on_convex_bowl() {
    let b = Batch::placeholder();
    let q = diag(&[4.0, 2.0, 1.0, 0.5]);
    let probe = ProbeConfig {
        seed: 3,
        num_directions: 50,
        ..ProbeConfig::default()
    };
    let c1 = minima_census(&q, &q.center(), &b, &probe).unwrap();
    let c2 = minima_census(&q, &q.center(), &b, &probe).unwrap();
    assert_eq!(c1, c2);
    assert_eq!(c1.histogram.len(), 1);
    assert_eq!((c1.histogram[0].minima, c1.histogram[0].maxima, c1.histogram[0].directions), (0, 0, 50));
    assert_eq!(count_extrema(&[2.0, 1.0, 2.0, 1.0, 2.0]), ExtremaCount { minima: 2, maxima: 1 });
}

#[test]
fn slice_example() {
    let q = diag(&[2.0, 1.0]);
    let spec = SliceSpec {
        half_width: 0.5,
        points: 11,
        filter_normalize: false,
    };
    let s = landscape_slice(&q, &q.center(), &Batch::placeholder(), &[1.0, 0.0], Some(&[0.0, 1.0]), &spec)
        .unwrap();
    for (iy, y) in s.ys.as_ref().unwrap().iter().enumerate() {
        for (ix, x) in s.xs.iter().enumerate() {
            assert!((s.at(ix, iy) - (x * x + 0.5 * y * y)).abs() < 1e-15);
        }
    }
}

#[test]
fn bound_examples() {
    let b = BoundInputs {
        n: 100,
        d: 10,
        rho: 0.1,
        loss_bound: 1.0,
        delta: 0.1,
        theta_norm: 1.0,
        emp_loss: 0.5,
        r1: 0.2,
    };
    // 60-digit evaluation of the same formula.
    let expected = 1.387_417_042_583_227_4;
    let v = generalization_bound(&b).unwrap();
    assert!(((v - expected) / expected).abs() < 1e-12, "{v}");
}

#[test]
fn report_collects_every_measurement() {
    let q = diag(&[3.0, 2.0, 1.0]);
    let probe = ProbeConfig {
        num_directions: 10,
        ..ProbeConfig::default()
    };
    let settings = SpectrumSettings {
        top_k: 2,
        ..SpectrumSettings::default()
    };
    let r = flatness_report(&q, &q.center(), &Batch::placeholder(), 0.1, &probe, &settings).unwrap();
    assert_eq!(r.lambda_topk.len(), 2);
    assert!(within(r.lambda_topk[0], 3.0, 1e-6) && within(r.lambda_topk[1], 2.0, 1e-6));
    assert_eq!((r.trace_hat, r.trace_stderr), (6.0, 0.0));
    assert!(r.r1_hat >= r.r0_hat);
    assert_eq!(r.census.iter().map(|c| c.directions).sum::<usize>(), 10);
}
