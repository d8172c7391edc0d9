//! Helpers shared by the invariance properties and the acceptance suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankshape::engine::TestSpec;
use rankshape::linalg::{sym_inv_sqrt, sym_sqrt};
use rankshape::radial::{sample_elliptical, EllipticalSpec, RadialFamily, RadialModel};
use rankshape::sign_rank::decompose;
use rankshape::{Matrix, ShapeMatrix, SignRankDecomposition};

pub const RANK_TESTS: [&str; 10] =
    ["vdw", "tnu:6", "tnu:2", "tnu:1", "tnu:0.5", "tnu:0.2", "sign", "wilcoxon", "spearman", "sign_adjusted"];

pub fn random_matrix(k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_shape(k: usize, rng: &mut ChaCha8Rng) -> ShapeMatrix {
    let a = random_matrix(k, rng);
    let spd = &a.matmul(&a.transpose()) + &Matrix::identity(k).scale(0.2);
    ShapeMatrix::normalized(spd).unwrap()
}

pub fn random_orthogonal(k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let a = random_matrix(k, rng);
    a.symmetrize().symmetric_eigen().1
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub struct Setup {
    pub x: Matrix,
    pub theta: Vec<f64>,
    pub v0: ShapeMatrix,
}

pub fn setup(k: usize, n: usize, family: &str, seed: u64) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v0 = random_shape(k, &mut rng);
    let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
    let model = RadialModel::new(RadialFamily::parse(family).unwrap(), k).unwrap();
    // Data drawn under the null keeps the statistics in a moderate range.
    let spec = EllipticalSpec::new(theta.clone(), 1.7, v0.clone(), model).unwrap();
    let x = sample_elliptical(&spec, n, seed ^ 0x5eed).unwrap();
    Setup { x, theta, v0 }
}

/// Applies `z ↦ g(z)` in the standardized coordinates `z = V₀^{-1/2}(x − θ)`.
pub fn transform(s: &Setup, g: impl Fn(&[f64]) -> Vec<f64>) -> Matrix {
    let root = sym_sqrt(s.v0.matrix()).unwrap();
    let inv_root = sym_inv_sqrt(s.v0.matrix()).unwrap();
    let k = s.theta.len();
    let rows: Vec<Vec<f64>> = (0..s.x.rows())
        .map(|i| {
            let centred: Vec<f64> = s.x.row(i).iter().zip(&s.theta).map(|(x, t)| x - t).collect();
            let z = inv_root.mul_vec(&centred);
            let out = root.mul_vec(&g(&z));
            (0..k).map(|j| out[j] + s.theta[j]).collect()
        })
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

pub fn statistics(x: &Matrix, s: &Setup, names: &[&str]) -> (SignRankDecomposition, Vec<f64>) {
    let k = s.theta.len();
    let d = decompose(x, Some(&s.theta), &s.v0).unwrap();
    // An indefinite fourth-moment matrix leaves Q*_S undefined; that is
    // itself invariant, so it is carried as NaN.
    let q = names
        .iter()
        .map(|t| TestSpec::parse(t, k).unwrap().run(&d, &s.v0).map_or(f64::NAN, |r| r.statistic))
        .collect();
    (d, q)
}

pub fn assert_invariant(name: &str, s: &Setup, moved: &Matrix, tests: &[&str], same_ranks: bool) {
    let (d0, q0) = statistics(&s.x, s, tests);
    let (d1, q1) = statistics(moved, s, tests);
    if same_ranks {
        assert_eq!(d0.ranks, d1.ranks, "{name}: ranks changed");
    }
    for ((t, a), b) in tests.iter().zip(&q0).zip(&q1) {
        assert!(close(*a, *b, 1e-9) || (a.is_nan() && b.is_nan()), "{name}: {t} moved from {a} to {b}");
    }
}
