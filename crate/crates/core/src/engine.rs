//! Test statistics for `H₀: V = V₀`, their χ² p-values, and simulated
//! exact critical values for the rank tests.

use std::fmt;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron_inv_sqrt, reduced_stack_operators, shape_df, Matrix, ShapeMatrix};
use crate::radial::{uniform_direction, RadialFamily, RadialModel};
use crate::scalar::Scalar;
use crate::score::ScoreFunction;
use crate::sign_rank::SignRankDecomposition;
use crate::special::chi2_sf;

/// Largest `n` accepted by the enumeration mode of [`exact_critical_value`].
pub const MAX_ENUMERATE_N: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub n: usize,
    pub k: usize,
    pub theta_estimated: bool,
    pub notes: Vec<String>,
}

impl TestReport {
    fn build<T: Scalar>(test: String, statistic: T, d: &SignRankDecomposition<T>, mut notes: Vec<String>) -> Self {
        let statistic = statistic.to_f64_lossy().max(0.0);
        if d.theta_estimated {
            notes.push("location estimated by the spatial median; null distribution is asymptotic only".into());
        }
        if d.tie_flag {
            notes.push("tied distances broken by observation index".into());
        }
        Self {
            test,
            statistic,
            df: shape_df(d.k),
            p_value: p_value(statistic, d.k),
            n: d.n,
            k: d.k,
            theta_estimated: d.theta_estimated,
            notes,
        }
    }
}

/// Upper χ² tail with `k(k+1)/2 − 1` degrees of freedom.
pub fn p_value<T: Scalar>(statistic: T, k: usize) -> T {
    if statistic <= T::zero() {
        return T::one();
    }
    chi2_sf(statistic, T::from_usize_lossy(shape_df(k)))
}

/// `n k(k+2)/(2 norm) · (tr S_w² − tr² S_w / k)` with
/// `S_w = n⁻¹ Σ w_i U_i U_iᵀ`; the bracket is evaluated as
/// `‖S_w − (tr S_w / k) I‖²_F`, which is never negative.
pub fn weighted_trace_statistic<T: Scalar>(d: &SignRankDecomposition<T>, weights: &[T], norm: T) -> T {
    let s = d.weighted_sign_scatter(weights);
    let kf = T::from_usize_lossy(d.k);
    let t = s.trace() / kf;
    let mut dev = T::zero();
    for a in 0..d.k {
        for b in 0..d.k {
            let v = if a == b { s[(a, b)] - t } else { s[(a, b)] };
            dev = dev + v * v;
        }
    }
    let nf = T::from_usize_lossy(d.n);
    nf * kf * (kf + T::lit(2.0)) / (T::lit(2.0) * norm) * dev
}

/// `Σ_{i,j} w_i w_j ((U_iᵀU_j)² − 1/k)`; quadratic cost, used as a check.
pub fn weighted_double_sum<T: Scalar>(d: &SignRankDecomposition<T>, weights: &[T]) -> T {
    let inv_k = T::one() / T::from_usize_lossy(d.k);
    let mut total = T::zero();
    for i in 0..d.n {
        let ui = d.sign(i);
        for j in 0..d.n {
            let c: T = ui.iter().zip(d.sign(j)).map(|(&a, &b)| a * b).sum();
            total = total + weights[i] * weights[j] * (c * c - inv_k);
        }
    }
    total
}

fn rank_weights<T: Scalar>(d: &SignRankDecomposition<T>, table: &[T]) -> Vec<T> {
    d.ranks.iter().map(|&r| table[r - 1]).collect()
}

/// Rank-score statistic `Q_K` from a precomputed table `K(i/(n+1))`.
pub fn q_rank_with_table<T: Scalar>(d: &SignRankDecomposition<T>, table: &[T], e_k2: T) -> T {
    weighted_trace_statistic(d, &rank_weights(d, table), e_k2)
}

pub fn q_rank<T: Scalar>(d: &SignRankDecomposition<T>, score: &ScoreFunction<T>) -> Result<T> {
    score.check_dim(d.k)?;
    let table = score.rank_table(d.n)?;
    Ok(q_rank_with_table(d, &table, score.moments().1))
}

/// `Q_K` through the pairwise double sum.
pub fn q_rank_double_sum<T: Scalar>(d: &SignRankDecomposition<T>, score: &ScoreFunction<T>) -> Result<T> {
    score.check_dim(d.k)?;
    let w = rank_weights(d, &score.rank_table(d.n)?);
    let kf = T::from_usize_lossy(d.k);
    let nf = T::from_usize_lossy(d.n);
    let e2 = score.moments().1;
    Ok(kf * (kf + T::lit(2.0)) / (T::lit(2.0) * nf * e2) * weighted_double_sum(d, &w))
}

pub fn rank_score_statistic<T: Scalar>(d: &SignRankDecomposition<T>, score: &ScoreFunction<T>) -> Result<TestReport> {
    score.check_dim(d.k)?;
    let table = score.rank_table(d.n)?;
    let (e1, e2) = score.moments();
    let w = rank_weights(d, &table);
    let q = weighted_trace_statistic(d, &w, e2);
    // normalized-trace variant, equal to Q_K only up to o_P(1)
    let kf = T::from_usize_lossy(d.k);
    let s = d.weighted_sign_scatter(&w);
    let diag = kf * (kf + T::lit(2.0)) * e1 * e1 / (kf * kf * e2) * john_norm(&s, d.n);
    let notes = vec![format!("normalized-trace diagnostic: {:.6}", diag.to_f64_lossy())];
    Ok(TestReport::build(score.to_string(), q, d, notes))
}

/// `(n k²/2) ‖S/tr S − I/k‖²`.
fn john_norm<T: Scalar>(s: &Matrix<T>, n: usize) -> T {
    let k = s.rows();
    let kf = T::from_usize_lossy(k);
    let tr = s.trace();
    let mut dev = T::zero();
    for a in 0..k {
        for b in 0..k {
            let mut v = s[(a, b)] / tr;
            if a == b {
                v = v - T::one() / kf;
            }
            dev = dev + v * v;
        }
    }
    T::from_usize_lossy(n) * kf * kf / T::lit(2.0) * dev
}

/// `d_i²` after dividing by the largest distance. Every statistic built from
/// these is invariant to a common rescaling, and heavy tails would otherwise
/// overflow `d⁴`.
fn squared_distances<T: Scalar>(d: &SignRankDecomposition<T>) -> Vec<T> {
    let top = d.distances.iter().fold(T::zero(), |m, &x| m.max(x));
    d.distances.iter().map(|&x| (x / top) * (x / top)).collect()
}

/// `S = n⁻¹ Σ d_i² U_i U_iᵀ` up to the factor `1/max d²`.
pub fn standardized_scatter<T: Scalar>(d: &SignRankDecomposition<T>) -> Matrix<T> {
    d.weighted_sign_scatter(&squared_distances(d))
}

pub fn q_john<T: Scalar>(d: &SignRankDecomposition<T>) -> T {
    john_norm(&standardized_scatter(d), d.n)
}

/// `κ̂ = k (n⁻¹Σd⁴) / ((k+2)(n⁻¹Σd²)²) − 1`.
pub fn kurtosis_estimate<T: Scalar>(d: &SignRankDecomposition<T>) -> T {
    let nf = T::from_usize_lossy(d.n);
    let kf = T::from_usize_lossy(d.k);
    let d2 = squared_distances(d);
    let m2 = d2.iter().copied().sum::<T>() / nf;
    let m4 = d2.iter().map(|&x| x * x).sum::<T>() / nf;
    kf * m4 / ((kf + T::lit(2.0)) * m2 * m2) - T::one()
}

/// Kurtosis-adjusted Gaussian statistic `Q_N` (trace form).
pub fn q_gaussian<T: Scalar>(d: &SignRankDecomposition<T>) -> T {
    let d2 = squared_distances(d);
    let nf = T::from_usize_lossy(d.n);
    let sum4: T = d2.iter().map(|&x| x * x).sum();
    weighted_trace_statistic(d, &d2, sum4 / nf)
}

/// `Q_N` through the pairwise double sum.
pub fn q_gaussian_double_sum<T: Scalar>(d: &SignRankDecomposition<T>) -> T {
    let d2 = squared_distances(d);
    let kf = T::from_usize_lossy(d.k);
    let sum4: T = d2.iter().map(|&x| x * x).sum();
    kf * (kf + T::lit(2.0)) / (T::lit(2.0) * sum4) * weighted_double_sum(d, &d2)
}

pub fn john_statistic<T: Scalar>(d: &SignRankDecomposition<T>) -> Result<TestReport> {
    need_two(d)?;
    let notes = vec!["valid under Gaussian radial densities only".into()];
    Ok(TestReport::build("john".into(), q_john(d), d, notes))
}

pub fn gaussian_adjusted_statistic<T: Scalar>(d: &SignRankDecomposition<T>) -> Result<TestReport> {
    need_two(d)?;
    let kappa = kurtosis_estimate(d);
    let notes = vec![
        "requires finite fourth-order radial moments".into(),
        format!("kurtosis estimate: {:.6}", kappa.to_f64_lossy()),
    ];
    Ok(TestReport::build("gaussian".into(), q_gaussian(d), d, notes))
}

fn need_two<T>(d: &SignRankDecomposition<T>) -> Result<()> {
    if d.n < 2 {
        Err(Error::InvalidParameter(format!("need at least 2 observations, got {}", d.n)))
    } else {
        Ok(())
    }
}

fn median<T: Scalar>(v: &[T]) -> T {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2]
    } else {
        (s[m / 2 - 1] + s[m / 2]) * T::lit(0.5)
    }
}

/// Weights `(d_i/σ̂) ψ(d_i/σ̂)` with `σ̂` the median distance.
pub fn parametric_weights<T: Scalar>(d: &SignRankDecomposition<T>, model: &RadialModel<T>) -> Vec<T> {
    let sigma = median(&d.distances);
    d.distances
        .iter()
        .map(|&x| {
            let r = x / sigma;
            r * model.psi(r)
        })
        .collect()
}

/// Parametric statistic `Q_{f₁}` with scale estimated by the median distance.
pub fn q_parametric<T: Scalar>(d: &SignRankDecomposition<T>, model: &RadialModel<T>) -> Result<T> {
    if model.dim() != d.k {
        return Err(Error::Dimension { what: "radial model", expected: d.k, found: model.dim() });
    }
    Ok(weighted_trace_statistic(d, &parametric_weights(d, model), model.shape_information()))
}

pub fn parametric_f1_statistic<T: Scalar>(d: &SignRankDecomposition<T>, model: &RadialModel<T>) -> Result<TestReport> {
    let q = q_parametric(d, model)?;
    let notes = vec![format!("valid only when the radial density is {}", model.family())];
    Ok(TestReport::build(format!("parametric:{}", model.family()), q, d, notes))
}

/// Adjusted sign statistic `Q*_S`, valid under unit shape.
pub fn q_adjusted_sign<T: Scalar>(d: &SignRankDecomposition<T>, v0: &ShapeMatrix<T>) -> Result<T> {
    let k = d.k;
    if v0.dim() != k {
        return Err(Error::Dimension { what: "shape matrix", expected: k, found: v0.dim() });
    }
    let k2 = k * k;
    let kf = T::from_usize_lossy(k);
    let nf = T::from_usize_lossy(d.n);
    let (m, _) = reduced_stack_operators::<T>(k)?;
    let a = m.matmul(&kron_inv_sqrt(v0)?);

    let mut center = vec![T::zero(); k2];
    let mut second = Matrix::zeros(k2, k2);
    for i in 0..d.n {
        let u = d.sign(i);
        let v: Vec<T> = (0..k2).map(|idx| u[idx % k] * u[idx / k]).collect();
        for p in 0..k2 {
            center[p] = center[p] + v[p];
            for q in p..k2 {
                second[(p, q)] = second[(p, q)] + v[p] * v[q];
            }
        }
    }
    for p in 0..k2 {
        for q in 0..p {
            second[(p, q)] = second[(q, p)];
        }
    }
    for j in 0..k {
        center[j + j * k] = center[j + j * k] - nf / kf;
    }
    let shift = nf / (kf * kf);
    for i in 0..k {
        for j in 0..k {
            second[(i + i * k, j + j * k)] = second[(i + i * k, j + j * k)] - shift;
        }
    }
    let s = a.mul_vec(&center);
    let w = a.matmul(&second).matmul(&a.transpose()).symmetrize();
    let x = w
        .solve_spd(&s)
        .map_err(|_| Error::Singular("degenerate sign configuration in the adjusted sign statistic".into()))?;
    Ok(s.iter().zip(&x).map(|(&p, &q)| p * q).sum::<T>().max(T::zero()))
}

pub fn adjusted_sign_statistic<T: Scalar>(d: &SignRankDecomposition<T>, v0: &ShapeMatrix<T>) -> Result<TestReport> {
    let q = q_adjusted_sign(d, v0)?;
    let notes = vec!["valid under unit shape; df taken as k(k+1)/2 - 1".into()];
    Ok(TestReport::build("sign_adjusted".into(), q, d, notes))
}

/// A test selected by name, as used by the CLI and the simulation harness.
#[derive(Clone, Debug, PartialEq)]
pub enum TestSpec<T: Scalar> {
    John,
    Gaussian,
    Rank(ScoreFunction<T>),
    Parametric(RadialModel<T>),
    AdjustedSign,
}

impl<T: Scalar> TestSpec<T> {
    /// `john`, `gaussian`, `sign_adjusted`, `parametric:<family>`, or any
    /// score name accepted by [`ScoreFunction::parse`].
    pub fn parse(s: &str, k: usize) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "john" => Ok(Self::John),
            "gaussian" => Ok(Self::Gaussian),
            "sign_adjusted" | "sign*" => Ok(Self::AdjustedSign),
            _ => {
                if let Some(fam) = t.strip_prefix("parametric:") {
                    Ok(Self::Parametric(RadialModel::new(RadialFamily::parse(fam)?, k)?))
                } else {
                    Ok(Self::Rank(ScoreFunction::parse(&t, k)?))
                }
            }
        }
    }

    pub fn run(&self, d: &SignRankDecomposition<T>, v0: &ShapeMatrix<T>) -> Result<TestReport> {
        match self {
            Self::John => john_statistic(d),
            Self::Gaussian => gaussian_adjusted_statistic(d),
            Self::Rank(score) => rank_score_statistic(d, score),
            Self::Parametric(model) => parametric_f1_statistic(d, model),
            Self::AdjustedSign => adjusted_sign_statistic(d, v0),
        }
    }
}

impl<T: Scalar> fmt::Display for TestSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::John => write!(f, "john"),
            Self::Gaussian => write!(f, "gaussian"),
            Self::Rank(s) => write!(f, "{s}"),
            Self::Parametric(m) => write!(f, "parametric:{}", m.family()),
            Self::AdjustedSign => write!(f, "sign_adjusted"),
        }
    }
}

/// A [`TestSpec`] with its rank-score table precomputed for a sample size,
/// for repeated evaluation.
#[derive(Clone, Debug)]
pub struct PreparedTest<T: Scalar> {
    spec: TestSpec<T>,
    table: Vec<T>,
    e_k2: T,
}

impl<T: Scalar> PreparedTest<T> {
    pub fn new(spec: TestSpec<T>, n: usize) -> Result<Self> {
        let (table, e_k2) = match &spec {
            TestSpec::Rank(score) => (score.rank_table(n)?, score.moments().1),
            _ => (Vec::new(), T::one()),
        };
        Ok(Self { spec, table, e_k2 })
    }

    pub fn spec(&self) -> &TestSpec<T> {
        &self.spec
    }

    pub fn statistic(&self, d: &SignRankDecomposition<T>, v0: &ShapeMatrix<T>) -> Result<T> {
        match &self.spec {
            TestSpec::John => Ok(q_john(d)),
            TestSpec::Gaussian => Ok(q_gaussian(d)),
            TestSpec::Rank(score) => {
                score.check_dim(d.k)?;
                if self.table.len() != d.n {
                    return Err(Error::Dimension { what: "score table", expected: d.n, found: self.table.len() });
                }
                Ok(q_rank_with_table(d, &self.table, self.e_k2))
            }
            TestSpec::Parametric(model) => q_parametric(d, model),
            TestSpec::AdjustedSign => q_adjusted_sign(d, v0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CriticalMode {
    /// Every rank permutation, each paired with `sign_rounds` fresh sign draws.
    Enumerate { sign_rounds: usize },
    /// Independent draws of (ranks, signs).
    Sample { draws: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub value: f64,
    pub alpha: f64,
    pub n: usize,
    pub k: usize,
    pub score: String,
    #[serde(flatten)]
    pub mode: CriticalMode,
    pub seed: u64,
    pub simulated: usize,
    /// Standard error of the empirical quantile from order-statistic spacings.
    pub standard_error: f64,
}

/// Permutation of `0..n` with lexicographic index `idx`.
pub fn nth_permutation(n: usize, mut idx: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut fact: usize = (1..n).product::<usize>().max(1);
    let mut out = Vec::with_capacity(n);
    for remaining in (1..=n).rev() {
        let pos = idx / fact;
        idx %= fact;
        out.push(pool.remove(pos));
        if remaining > 1 {
            fact /= remaining - 1;
        }
    }
    out
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `Q_K` for weights `table[perm[i]]` and `n` fresh uniform signs from `rng`.
fn simulated_q(perm: &[usize], table: &[f64], e_k2: f64, k: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = perm.len();
    let mut s = vec![0.0; k * k];
    for &p in perm {
        let u = uniform_direction(k, rng);
        let w = table[p];
        for a in 0..k {
            for b in 0..k {
                s[a * k + b] += w * u[a] * u[b];
            }
        }
    }
    let nf = n as f64;
    let kf = k as f64;
    let tr: f64 = (0..k).map(|a| s[a * k + a]).sum::<f64>() / nf;
    let mut dev = 0.0;
    for a in 0..k {
        for b in 0..k {
            let v = s[a * k + b] / nf - if a == b { tr / kf } else { 0.0 };
            dev += v * v;
        }
    }
    nf * kf * (kf + 2.0) / (2.0 * e_k2) * dev
}

/// Simulated `(1 − α)` quantile of `Q_K` under the null, for a sample of
/// size `n` in dimension `k`. Results do not depend on the thread count.
pub fn exact_critical_value(
    n: usize,
    k: usize,
    score: &ScoreFunction<f64>,
    alpha: f64,
    mode: CriticalMode,
    seed: u64,
) -> Result<CriticalValue> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfUnitInterval { value: alpha });
    }
    if n < 1 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    score.check_dim(k)?;
    let table = score.rank_table(n)?;
    let e_k2 = score.moments().1;
    let mut values: Vec<f64> = match mode {
        CriticalMode::Enumerate { sign_rounds } => {
            if n > MAX_ENUMERATE_N {
                return Err(Error::TooLarge { n, max: MAX_ENUMERATE_N });
            }
            if sign_rounds == 0 {
                return Err(Error::InvalidParameter("sign_rounds must be positive".into()));
            }
            let perms: usize = (1..=n).product();
            (0..perms)
                .into_par_iter()
                .flat_map_iter(|p| {
                    let perm = nth_permutation(n, p);
                    let table = &table;
                    (0..sign_rounds).map(move |r| {
                        let mut rng = stream_rng(seed, (p * sign_rounds + r) as u64);
                        simulated_q(&perm, table, e_k2, k, &mut rng)
                    })
                })
                .collect()
        }
        CriticalMode::Sample { draws } => {
            if draws < 1000 {
                return Err(Error::InvalidParameter(format!("sample mode needs at least 1000 draws, got {draws}")));
            }
            (0..draws)
                .into_par_iter()
                .map(|b| {
                    let mut rng = stream_rng(seed, b as u64);
                    let mut perm: Vec<usize> = (0..n).collect();
                    perm.shuffle(&mut rng);
                    simulated_q(&perm, &table, e_k2, k, &mut rng)
                })
                .collect()
        }
    };
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let m = values.len();
    let (value, standard_error) = empirical_quantile(&values, 1.0 - alpha);
    Ok(CriticalValue {
        value,
        alpha,
        n,
        k,
        score: score.to_string(),
        mode,
        seed,
        simulated: m,
        standard_error,
    })
}

/// Type-1 empirical quantile of sorted data together with a spacing-based
/// standard error `(x_(j+δ) − x_(j−δ))/2`, `δ = √(m p (1−p))`.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> (f64, f64) {
    let m = sorted.len();
    let j = ((m as f64 * p).ceil() as usize).clamp(1, m) - 1;
    let delta = (m as f64 * p * (1.0 - p)).sqrt().ceil() as usize;
    let lo = j.saturating_sub(delta);
    let hi = (j + delta).min(m - 1);
    (sorted[j], (sorted[hi] - sorted[lo]) / 2.0)
}
