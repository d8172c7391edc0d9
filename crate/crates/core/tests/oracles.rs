//! Special functions and radial laws against statrs.

use rankshape::radial::RadialModel;
use rankshape::special::{
    beta_inv_pair, beta_reg, chi2_cdf, chi2_quantile, chi2_sf, f_cdf, f_quantile, gamma_inv, gamma_p, gamma_q,
    ln_gamma, noncentral_chi2_sf,
};
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF, FisherSnedecor, Gamma};
use statrs::function::{beta as sb, gamma as sg};

const SHAPES: [f64; 9] = [0.05, 0.5, 1.0, 1.5, 2.5, 5.0, 12.0, 40.0, 150.0];
const PROBS: [f64; 9] = [1e-8, 1e-4, 0.01, 0.1, 0.3, 0.5, 0.8, 0.95, 0.999];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn ln_gamma_agrees() {
    for x in [1e-3, 0.1, 0.5, 1.0, 2.5, 7.3, 33.0, 171.5, 1e4] {
        let ours: f64 = ln_gamma(x);
        let theirs = sg::ln_gamma(x);
        assert!((ours - theirs).abs() <= 1e-12 * theirs.abs().max(1.0), "x={x}: {ours} vs {theirs}");
    }
}

#[test]
fn regularized_gamma_agrees() {
    for &a in &SHAPES {
        for x in [1e-3, 0.1, 0.7, 1.0, 3.0, 10.0, 60.0, 200.0] {
            let p: f64 = gamma_p(a, x);
            let q: f64 = gamma_q(a, x);
            let sp = sg::gamma_lr(a, x);
            let sq = sg::gamma_ur(a, x);
            assert!((p - sp).abs() < 1e-12, "P({a},{x}) {p} vs {sp}");
            if sq > 1e-250 {
                assert!(rel(q, sq) < 1e-9, "Q({a},{x}) {q} vs {sq}");
            }
        }
    }
}

#[test]
fn regularized_beta_agrees() {
    for &a in &SHAPES {
        for &b in &[0.1, 0.5, 1.0, 3.0, 7.5, 60.0] {
            for x in [1e-6, 0.01, 0.2, 0.5, 0.77, 0.99] {
                let ours: f64 = beta_reg(a, b, x);
                let theirs = sb::beta_reg(a, b, x);
                assert!((ours - theirs).abs() < 1e-11, "I({a},{b},{x}) {ours} vs {theirs}");
            }
        }
    }
}

#[test]
fn gamma_quantile_agrees() {
    for &a in &SHAPES {
        let g = Gamma::new(a, 1.0).unwrap();
        for &p in &PROBS {
            let ours = gamma_inv(a, p, 1.0 - p).unwrap();
            let theirs = g.inverse_cdf(p);
            assert!((g.cdf(ours) - p).abs() <= 1e-10 * p.max(1e-3), "a={a} p={p}: cdf(ours)={}", g.cdf(ours));
            // statrs bisects down to a fixed floor, so its quantile is only
            // trusted where it round-trips.
            if (g.cdf(theirs) - p).abs() <= 1e-10 * p {
                assert!(rel(ours, theirs) < 1e-6, "a={a} p={p}: {ours} vs {theirs}");
            }
        }
    }
}

#[test]
fn beta_quantile_agrees() {
    for &a in &[0.5, 1.0, 1.5, 2.5, 5.0] {
        for &b in &[0.25, 0.5, 1.0, 3.0, 10.0] {
            let dist = Beta::new(a, b).unwrap();
            for &p in &PROBS[1..] {
                let (x, y) = beta_inv_pair(a, b, p, 1.0 - p).unwrap();
                assert!((x + y - 1.0).abs() < 1e-15);
                let theirs = dist.inverse_cdf(p);
                // Near x = 1 the complement y carries the precision.
                let back = if x < 0.5 { rel(dist.cdf(x), p) } else { rel(sb::beta_reg(b, a, y), 1.0 - p) };
                assert!(back < 1e-9, "a={a} b={b} p={p}");
                assert!((x - theirs).abs() < 1e-7 * theirs.max(1e-3), "a={a} b={b} p={p}: {x} vs {theirs}");
            }
        }
    }
}

#[test]
fn chi_square_agrees() {
    for df in [1.0, 2.0, 5.0, 9.0, 14.0, 54.0] {
        let d = ChiSquared::new(df).unwrap();
        for x in [0.01, 0.5, 2.0, 7.5, 20.0, 80.0] {
            assert!((chi2_cdf(x, df) - d.cdf(x)).abs() < 1e-12);
            let sf = d.sf(x);
            if sf > 1e-250 {
                assert!(rel(chi2_sf(x, df), sf) < 1e-9, "df={df} x={x}");
            }
        }
        for p in [0.01, 0.5, 0.95, 0.99] {
            let ours = chi2_quantile(df, p).unwrap();
            assert!(rel(ours, d.inverse_cdf(p)) < 1e-7, "df={df} p={p}");
        }
    }
    // Familiar critical values.
    assert!((chi2_quantile(2.0_f64, 0.95).unwrap() - 5.991464547107979).abs() < 1e-12);
    assert!((chi2_quantile(5.0_f64, 0.95).unwrap() - 11.070497693516351).abs() < 1e-11);
}

#[test]
fn fisher_agrees() {
    for (d1, d2) in [(1.0, 1.0), (2.0, 5.0), (5.0, 2.0), (9.0, 30.0), (14.0, 100.0)] {
        let f = FisherSnedecor::new(d1, d2).unwrap();
        for x in [0.05, 0.5, 1.0, 3.0, 12.0] {
            assert!((f_cdf(x, d1, d2) - f.cdf(x)).abs() < 1e-11, "F({d1},{d2}) at {x}");
        }
        for p in [0.05, 0.5, 0.95] {
            let q = f_quantile(d1, d2, p).unwrap();
            assert!((f.cdf(q) - p).abs() < 1e-10, "F({d1},{d2}) quantile {p}");
        }
    }
}

/// Poisson mixture of central χ² tails, summed outward from the mode.
fn ncx2_sf_series(x: f64, df: f64, ncp: f64) -> f64 {
    let lam = ncp / 2.0;
    let mode = lam.floor() as i64;
    let term = |j: i64| {
        let jf = j as f64;
        let w = (-lam + jf * lam.ln() - sg::ln_gamma(jf + 1.0)).exp();
        w * ChiSquared::new(df + 2.0 * jf).unwrap().sf(x)
    };
    let mut total = 0.0;
    for j in (0..=mode).rev() {
        let t = if lam == 0.0 && j == 0 { ChiSquared::new(df).unwrap().sf(x) } else { term(j) };
        total += t;
        if t < 1e-18 * total && j < mode - 5 {
            break;
        }
    }
    if lam > 0.0 {
        let mut j = mode + 1;
        loop {
            let t = term(j);
            total += t;
            if t < 1e-18 * total && j > mode + 5 {
                break;
            }
            j += 1;
        }
    }
    total
}

#[test]
fn noncentral_chi_square_against_poisson_series() {
    for df in [1.0, 2.0, 5.0, 9.0] {
        for ncp in [0.0, 0.3, 2.0, 10.0, 45.0] {
            for x in [0.5, 3.0, 11.07, 30.0, 90.0] {
                let ours = noncentral_chi2_sf(x, df, ncp);
                let series = ncx2_sf_series(x, df, ncp);
                assert!(
                    (ours - series).abs() < 1e-10 || rel(ours, series) < 1e-8,
                    "df={df} ncp={ncp} x={x}: {ours} vs {series}"
                );
            }
        }
    }
}

#[test]
fn radial_laws_match_reference_distributions() {
    for k in [2usize, 3, 5] {
        let kf = k as f64;
        let g = RadialModel::<f64>::gaussian(k).unwrap();
        let c = g.constant();
        let chi = ChiSquared::new(kf).unwrap();
        // a_k d² ~ χ²_k and the median sits at one.
        assert!((chi.cdf(c) - 0.5).abs() < 1e-12);
        for r in [0.3, 1.0, 1.7, 3.0] {
            assert!((g.cdf(r) - chi.cdf(c * r * r)).abs() < 1e-12);
        }
        for nu in [1.0, 4.5, 20.0] {
            let t = RadialModel::<f64>::student(k, nu).unwrap();
            let c = t.constant();
            let beta = Beta::new(kf / 2.0, nu / 2.0).unwrap();
            for r in [0.3, 1.0, 1.7, 3.0] {
                let s = c * r * r;
                assert!((t.cdf(r) - beta.cdf(s / (s + nu))).abs() < 1e-11);
            }
            assert!((t.cdf(1.0) - 0.5).abs() < 1e-12);
        }
        for eta in [0.5, 2.0, 5.0] {
            let pe = RadialModel::<f64>::power_exp(k, eta).unwrap();
            let b = pe.constant();
            let gam = Gamma::new(kf / (2.0 * eta), 1.0).unwrap();
            for r in [0.3, 1.0, 1.7] {
                assert!((pe.cdf(r) - gam.cdf(b * r.powf(2.0 * eta))).abs() < 1e-11);
            }
            assert!((pe.cdf(1.0) - 0.5).abs() < 1e-12);
        }
    }
}

#[test]
fn van_der_waerden_scores_are_chi_square_quantiles() {
    use rankshape::ScoreFunction;
    for k in [2usize, 4] {
        let vdw = ScoreFunction::van_der_waerden(k).unwrap();
        let chi = ChiSquared::new(k as f64).unwrap();
        for u in [0.01, 0.2, 0.5, 0.9, 0.999] {
            assert!(rel(vdw.value(u).unwrap(), chi.inverse_cdf(u)) < 1e-7);
        }
    }
}
