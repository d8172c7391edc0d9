//! Simulation harness: sampling laws, reproducibility and calibration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, UnitCircle};
use rankshape::efficiency::local_power;
use rankshape::engine::{q_adjusted_sign, q_rank, p_value};
use rankshape::montecarlo::{generate_replication, run_study, Population, Scenario, ThetaHandling};
use rankshape::sign_rank::decompose;
use rankshape::{Matrix, ScoreFunction, ShapeMatrix, StudyResult};

fn scenario(pop: &str, m: u32, dir: Vec<f64>, n: usize) -> Scenario {
    Scenario::new(Population::parse(pop).unwrap(), m, dir, n, 2, ThetaHandling::Specified).unwrap()
}

fn column_means(batches: &[Matrix]) -> (Vec<f64>, Vec<f64>, usize) {
    let mut sum = [0.0; 2];
    let mut sq = [0.0; 2];
    let mut count = 0;
    for x in batches {
        for i in 0..x.rows() {
            for j in 0..2 {
                sum[j] += x[(i, j)];
                sq[j] += x[(i, j)] * x[(i, j)];
            }
            count += 1;
        }
    }
    let nf = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let sd: Vec<f64> = (0..2).map(|j| (sq[j] / nf - mean[j] * mean[j]).sqrt()).collect();
    (mean, sd, count)
}

#[test]
fn skew_normal_draws_are_centred() {
    let s = scenario("skewnormal", 3, vec![0.15, 0.0], 10_000);
    let batches: Vec<Matrix> = (0..100).map(|r| generate_replication(&s, 99, r).unwrap()).collect();
    let (mean, sd, count) = column_means(&batches);
    assert_eq!(count, 1_000_000);
    for j in 0..2 {
        let se = sd[j] / (count as f64).sqrt();
        assert!(mean[j].abs() < 4.0 * se, "coordinate {j}: mean {} with se {se}", mean[j]);
    }
}

#[test]
fn skew_t_centering_constant_matches_simulation() {
    // E[sqrt(ν/χ²_ν) |V|] for ν = 2; the tail index is 2, so the error of
    // the mean decays like sqrt(log N / N) rather than 1/sqrt(N).
    let nu = 2.0;
    let centre = Population::SkewT(nu).skew_centering().unwrap();
    assert!((centre - 2f64.sqrt()).abs() < 1e-12);
    let chi = ChiSquared::new(nu).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws = 10_000_000;
    let mut total = 0.0;
    for _ in 0..draws {
        let v: f64 = rng.sample(StandardNormal);
        total += (nu / chi.sample(&mut rng)).sqrt() * v.abs();
    }
    let mean = total / draws as f64;
    assert!((mean - centre).abs() < 6e-3, "simulated {mean} vs {centre}");

    let sn = Population::SkewNormal.skew_centering().unwrap();
    assert!((sn - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
    let t5 = Population::SkewT(5.0).skew_centering().unwrap();
    // sqrt(5/π) Γ(2)/Γ(5/2) = sqrt(5/π) · 4/(3 sqrt(π))
    assert!((t5 - 5f64.sqrt() * 4.0 / (3.0 * std::f64::consts::PI)).abs() < 1e-12);
}

#[test]
fn skew_t_draws_are_centred() {
    let s = scenario("skewt:2", 3, vec![0.25, 0.0], 10_000);
    let batches: Vec<Matrix> = (0..100).map(|r| generate_replication(&s, 5, r).unwrap()).collect();
    let (mean, _, _) = column_means(&batches);
    for (j, m) in mean.iter().enumerate() {
        assert!(m.abs() < 0.02, "coordinate {j}: mean {m}");
    }
}

#[test]
fn local_power_matches_noncentral_simulation() {
    let (ncp, alpha) = (5.0, 0.05);
    let value = local_power(ncp, 2, alpha).unwrap();
    let crit = 5.991464547107979;
    let shift = ncp.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let draws = 10_000_000;
    let mut hits = 0usize;
    for _ in 0..draws {
        let a: f64 = rng.sample::<f64, _>(StandardNormal) + shift;
        let b: f64 = rng.sample(StandardNormal);
        if a * a + b * b > crit {
            hits += 1;
        }
    }
    let f = hits as f64 / draws as f64;
    let se = (f * (1.0 - f) / draws as f64).sqrt();
    assert!((f - value).abs() < 3.0 * se, "simulated {f} vs {value} (se {se})");
}

fn small_study(parallelism: usize) -> StudyResult {
    let scenarios: Vec<Scenario> = ["gaussian", "tnu:1", "skewnormal"]
        .iter()
        .flat_map(|p| {
            let dir = if *p == "skewnormal" { vec![0.15, 0.0] } else { vec![0.0, 0.14] };
            (0..4).map(move |m| scenario(p, m, dir.clone(), 60))
        })
        .collect();
    let tests: Vec<String> = ["john", "gaussian", "vdw", "sign", "wilcoxon", "sign_adjusted"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    run_study(&scenarios, &tests, 200, 0.05, 77, parallelism).unwrap()
}

#[test]
fn studies_do_not_depend_on_thread_count() {
    let one = small_study(1);
    let many = small_study(8);
    assert_eq!(one, many);
    assert_eq!(one.cells.len(), 3 * 4 * 6);
}

#[test]
fn study_results_round_trip_through_json() {
    let r = small_study(0);
    let text = serde_json::to_string(&r).unwrap();
    let back: StudyResult = serde_json::from_str(&text).unwrap();
    assert_eq!(r, back);
    let cell = back.cell("gaussian", 0, "john").unwrap();
    assert_eq!(cell.rejections + cell.undefined <= 200, true);
}

#[test]
fn sign_statistics_agree_under_sphericity() {
    let s = scenario("gaussian", 0, vec![0.0, 0.14], 500);
    let v0 = ShapeMatrix::identity(2);
    let sign = ScoreFunction::sign(2);
    let reps = 2000;
    let (mut plain, mut adjusted) = (0.0, 0.0);
    for r in 0..reps {
        let x = generate_replication(&s, 11, r).unwrap();
        let d = decompose(&x, Some(&[0.0, 0.0]), &v0).unwrap();
        plain += q_rank(&d, &sign).unwrap();
        adjusted += q_adjusted_sign(&d, &v0).unwrap();
    }
    let (plain, adjusted) = (plain / reps as f64, adjusted / reps as f64);
    // Both are asymptotically χ² with k(k+1)/2 − 1 = 2 degrees of freedom.
    assert!((plain - 2.0).abs() < 0.2, "mean Q_S {plain}");
    assert!((adjusted - 2.0).abs() < 0.2, "mean Q*_S {adjusted}");
}

/// Unit shape without isotropic fourth moments: with probability `p` the
/// sign is one of the four axis directions, otherwise uniform.
fn axis_mixture(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let u: [f64; 2] = if rng.random::<f64>() < p {
                match rng.random_range(0..4) {
                    0 => [1.0, 0.0],
                    1 => [-1.0, 0.0],
                    2 => [0.0, 1.0],
                    _ => [0.0, -1.0],
                }
            } else {
                UnitCircle.sample(rng)
            };
            let r = -rng.random::<f64>().ln();
            vec![r * u[0], r * u[1]]
        })
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

#[test]
fn adjusted_sign_test_holds_level_under_unit_shape() {
    // The plain sign statistic tends to 1.8 Z₁² + 0.2 Z₂² here, whose upper
    // 5% χ²₂ tail is about 0.073.
    let (n, reps, p) = (200, 4000, 0.8);
    let v0 = ShapeMatrix::identity(2);
    let sign = ScoreFunction::sign(2);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut plain, mut adjusted, mut undefined) = (0usize, 0usize, 0usize);
    for _ in 0..reps {
        let x = axis_mixture(n, p, &mut rng);
        let d = decompose(&x, Some(&[0.0, 0.0]), &v0).unwrap();
        if p_value(q_rank(&d, &sign).unwrap(), 2) < 0.05 {
            plain += 1;
        }
        match q_adjusted_sign(&d, &v0) {
            Ok(q) if p_value(q, 2) < 0.05 => adjusted += 1,
            Ok(_) => {}
            Err(_) => undefined += 1,
        }
    }
    let fp = plain as f64 / reps as f64;
    let fa = adjusted as f64 / reps as f64;
    assert_eq!(undefined, 0);
    assert!((fa - 0.05).abs() < 0.015, "adjusted sign level {fa}");
    assert!(fp > 0.06, "plain sign level {fp} should exceed the nominal level");
}
