use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zsl_core::aste::predict_labels;
use zsl_core::baselines::{train_eszsl, train_lr, RidgeConfig};
use zsl_core::{Dataset, SemanticMatrix};

fn random_problem(seed: u64, n: usize, p: usize, q: usize, k: usize) -> (Dataset, SemanticMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let labels = (0..n).map(|i| i % k).collect();
    let a = DMatrix::from_fn(q, k, |_, _| rng.random_range(-1.0..1.0));
    (Dataset::new(x, labels, k).unwrap(), SemanticMatrix::new(a).unwrap())
}

fn one_hot_matrix(ds: &Dataset) -> DMatrix<f64> {
    DMatrix::from_fn(ds.len(), ds.num_classes(), |i, j| (ds.labels()[i] == j) as u8 as f64)
}

/// Conjugate gradients on a symmetric positive definite linear operator over
/// matrices with the Frobenius inner product.
fn conjugate_gradient<F>(op: F, rhs: &DMatrix<f64>) -> DMatrix<f64>
where
    F: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let mut x = DMatrix::zeros(rhs.nrows(), rhs.ncols());
    let mut r = rhs.clone();
    let mut d = r.clone();
    let mut rr = r.norm_squared();
    let stop = 1e-30 * rhs.norm_squared();
    for _ in 0..10 * rhs.len() {
        if rr <= stop {
            break;
        }
        let ad = op(&d);
        let alpha = rr / d.dot(&ad);
        x += &d * alpha;
        r -= &ad * alpha;
        let next = r.norm_squared();
        d = &r + &d * (next / rr);
        rr = next;
    }
    x
}

fn eszsl_objective(x: &DMatrix<f64>, v: &DMatrix<f64>, a: &DMatrix<f64>, y: &DMatrix<f64>, g: f64, l: f64) -> f64 {
    (x * v * a - y).norm_squared() + g * (v * a).norm_squared() + l * (x * v).norm_squared() + g * l * v.norm_squared()
}

#[test]
fn lr_is_stationary_and_matches_iterative_oracle() {
    for seed in 0..10 {
        let (ds, sem) = random_problem(seed, 20, 3, 4, 3);
        let gamma = 0.1;
        let w = train_lr(&ds, &sem, &RidgeConfig { gamma, lambda_sem: 1.0 }).unwrap();
        let x = ds.features();
        let s = one_hot_matrix(&ds) * sem.vectors().transpose();
        let residual = x.transpose() * (x * &w - &s) + &w * gamma;
        let rhs = x.transpose() * &s;
        assert!(residual.norm() / rhs.norm() < 1e-8, "residual {}", residual.norm());

        let oracle = conjugate_gradient(|m| x.transpose() * (x * m) + m * gamma, &rhs);
        assert!((&w - oracle).amax() < 1e-8);
    }
}

#[test]
fn eszsl_is_stationary_and_matches_iterative_oracle() {
    for seed in 0..10 {
        let (ds, sem) = random_problem(100 + seed, 20, 5, 4, 3);
        let (g, l) = (1.0, 1.0);
        let v = train_eszsl(&ds, &sem, &RidgeConfig { gamma: g, lambda_sem: l }).unwrap().v;
        let x = ds.features();
        let a = sem.vectors();
        let y = one_hot_matrix(&ds);
        let xtx = x.transpose() * x;
        let residual = x.transpose() * (x * &v * a - &y) * a.transpose()
            + &v * a * a.transpose() * g
            + &xtx * &v * l
            + &v * (g * l);
        let rhs = x.transpose() * &y * a.transpose();
        assert!(residual.norm() / rhs.norm() < 1e-8, "residual {}", residual.norm());

        let aat = a * a.transpose();
        let oracle = conjugate_gradient(|m| (&xtx * m + m * g) * (&aat + DMatrix::identity(a.nrows(), a.nrows()) * l), &rhs);
        assert!((&v - oracle).amax() < 1e-6);
    }
}

#[test]
fn eszsl_solution_is_a_strict_minimum() {
    let (ds, sem) = random_problem(7, 10, 4, 4, 3);
    let v = train_eszsl(&ds, &sem, &RidgeConfig::default()).unwrap().v;
    let (x, a, y) = (ds.features(), sem.vectors(), one_hot_matrix(&ds));
    let base = eszsl_objective(x, &v, a, &y, 1.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let mut dir = DMatrix::from_fn(v.nrows(), v.ncols(), |_, _| rng.random_range(-1.0..1.0));
        dir /= dir.norm();
        assert!(eszsl_objective(x, &(&v + dir * 1e-3), a, &y, 1.0, 1.0) > base);
    }
}

#[test]
fn lr_predictions_invariant_to_feature_scaling() {
    let (ds, sem) = random_problem(9, 30, 4, 3, 3);
    let w = train_lr(&ds, &sem, &RidgeConfig { gamma: 0.5, lambda_sem: 1.0 }).unwrap();
    let c = 3.7;
    let scaled = Dataset::new(ds.features() * c, ds.labels().to_vec(), 3).unwrap();
    let ws = train_lr(&scaled, &sem, &RidgeConfig { gamma: 0.5 * c * c, lambda_sem: 1.0 }).unwrap();
    let before = predict_labels(ds.features(), &w, &sem).unwrap();
    let after = predict_labels(scaled.features(), &ws, &sem).unwrap();
    assert_eq!(before, after);
}
