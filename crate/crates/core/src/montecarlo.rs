//! Replicated rejection-frequency studies under elliptical and skewed
//! alternatives to sphericity.
//!
//! Every scenario draws its base randomness (spherical `ε` or the latent
//! normals of the skew constructions) from a generator keyed by the
//! population, `n` and `k` only. Scenarios that differ in `m` or in the
//! perturbation direction therefore see identical base draws within a
//! replication, and each replication owns one ChaCha stream.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::efficiency::are;
use crate::engine::{p_value, PreparedTest, TestSpec};
use crate::error::{Error, Result};
use crate::linalg::{sym_sqrt, Matrix, ShapeMatrix, StackKind, StackedVector};
use crate::radial::{sample_spherical, RadialFamily, RadialModel};
use crate::sign_rank::decompose;
use crate::special::ln_gamma;
use crate::tabular::{fmt3, Table};

/// The eleven tests of the sphericity study.
pub const DEFAULT_BATTERY: [&str; 11] = [
    "john", "gaussian", "vdw", "tnu:6", "tnu:2", "tnu:1", "tnu:0.5", "tnu:0.2", "sign", "wilcoxon", "spearman",
];

pub const DEFAULT_SEED: u64 = 20060601;
pub const MIN_REPLICATIONS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Population {
    Elliptical(RadialFamily<f64>),
    /// `(sign V) W` with `(V, Wᵀ)ᵀ` trivariate normal.
    SkewNormal,
    /// As [`Population::SkewNormal`] with multivariate `t_ν` latent draws.
    SkewT(f64),
}

impl Population {
    /// `gaussian`, `tnu:ν`, `powerexp:η`, `skewnormal`, `skewt:ν`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "skewnormal" || t == "sn" {
            return Ok(Self::SkewNormal);
        }
        if let Some(nu) = t.strip_prefix("skewt:") {
            let nu: f64 = nu.parse().map_err(|_| Error::Parse(format!("bad skew-t degrees of freedom in '{s}'")))?;
            return Ok(Self::SkewT(nu));
        }
        Ok(Self::Elliptical(RadialFamily::parse(&t)?))
    }

    pub fn is_skew(&self) -> bool {
        !matches!(self, Self::Elliptical(_))
    }

    /// `E|V|` for the latent `V`: `sqrt(2/π)` for the normal and
    /// `sqrt(ν/π) Γ((ν−1)/2) / Γ(ν/2)` for Student `t_ν`.
    pub fn skew_centering(&self) -> Result<f64> {
        match *self {
            Self::SkewNormal => Ok((2.0 / std::f64::consts::PI).sqrt()),
            Self::SkewT(nu) if nu > 1.0 && nu.is_finite() => {
                Ok((nu / std::f64::consts::PI).sqrt() * (ln_gamma((nu - 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp())
            }
            Self::SkewT(nu) => Err(Error::InvalidParameter(format!(
                "skew-t needs nu > 1 for a finite mean, got {nu}"
            ))),
            Self::Elliptical(_) => Ok(0.0),
        }
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Elliptical(fam) => write!(f, "{fam}"),
            Self::SkewNormal => write!(f, "skewnormal"),
            Self::SkewT(nu) => write!(f, "skewt:{nu}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaHandling {
    /// θ = 0 is used as known.
    #[default]
    Specified,
    /// θ is replaced by the spatial median.
    Estimated,
}

/// How `m v` perturbs an elliptical population.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Shape `I + m v`: `X = (I + m v)^{1/2} ε`.
    #[default]
    Shape,
    /// Linear map `X = (I + m v) ε`, shape `(I + m v)²`.
    Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    population: Population,
    perturbation: Perturbation,
    m: u32,
    /// Elliptical: `vech1 v`. Skew: the direction vector `v`.
    direction: Vec<f64>,
    n: usize,
    k: usize,
    theta: ThetaHandling,
}

impl Scenario {
    pub fn new(population: Population, m: u32, direction: Vec<f64>, n: usize, k: usize, theta: ThetaHandling) -> Result<Self> {
        if !(2..=crate::linalg::MAX_DIM).contains(&k) {
            return Err(Error::DimensionRange { k, min: 2, max: crate::linalg::MAX_DIM });
        }
        if m > 3 {
            return Err(Error::InvalidParameter(format!("m = {m} outside 0..=3")));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!("sample size {n} below 2")));
        }
        let expected = if population.is_skew() { k } else { StackKind::Vech1.len(k) };
        if direction.len() != expected {
            return Err(Error::Dimension { what: "perturbation direction", expected, found: direction.len() });
        }
        if direction.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("perturbation direction must be finite".into()));
        }
        match population {
            Population::Elliptical(fam) => {
                RadialModel::new(fam, k)?;
            }
            Population::SkewT(_) => {
                population.skew_centering()?;
            }
            Population::SkewNormal => {}
        }
        let s = Self { population, perturbation: Perturbation::Shape, m, direction, n, k, theta };
        s.checked()
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Result<Self> {
        self.perturbation = perturbation;
        self.checked()
    }

    fn checked(self) -> Result<Self> {
        if !self.population.is_skew() {
            self.transform()?;
            self.population_shape()?;
        }
        Ok(self)
    }

    pub fn perturbation(&self) -> Perturbation {
        self.perturbation
    }

    pub fn population(&self) -> Population {
        self.population
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> ThetaHandling {
        self.theta
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    /// Skew designs outside `k = 2` have not been checked against reference
    /// values.
    pub fn is_experimental(&self) -> bool {
        self.population.is_skew() && self.k != 2
    }

    /// `I + m v`.
    pub fn perturbed_identity(&self) -> Matrix<f64> {
        let v = StackedVector::new(StackKind::Vech1, self.k, self.direction.clone())
            .expect("length checked")
            .unstack(0.0);
        &Matrix::identity(self.k) + &v.scale(self.m as f64)
    }

    /// The matrix `A` with `X_i = A ε_i` for elliptical scenarios.
    pub fn transform(&self) -> Result<Matrix<f64>> {
        let a = self.perturbed_identity();
        match self.perturbation {
            Perturbation::Linear => Ok(a),
            Perturbation::Shape => sym_sqrt(&a),
        }
    }

    /// Shape of `A Aᵀ`, rescaled so the (1,1) entry is one.
    pub fn population_shape(&self) -> Result<ShapeMatrix<f64>> {
        if self.population.is_skew() {
            return Err(Error::InvalidParameter("skew populations are not elliptical".into()));
        }
        let a = self.transform()?;
        ShapeMatrix::normalized(a.matmul(&a.transpose()))
    }

    /// `δ = (1 + m² vᵀv)^{-1/2} m v` for skew scenarios.
    pub fn delta(&self) -> Vec<f64> {
        let m = self.m as f64;
        let norm2: f64 = self.direction.iter().map(|x| x * x).sum();
        let c = m / (1.0 + m * m * norm2).sqrt();
        self.direction.iter().map(|x| c * x).collect()
    }

    fn base_key(&self) -> String {
        format!("{}|n={}|k={}", self.population, self.n, self.k)
    }
}

/// Draws shared by every scenario with the same base key.
enum BaseDraws {
    Spherical(Matrix<f64>),
    /// Latent `V_i`, `Z_i ~ N(0, I_k)` and the Student mixing factor
    /// `sqrt(ν/χ²_ν)` (one for the normal case).
    Latent { v: Vec<f64>, z: Matrix<f64>, mix: Vec<f64> },
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn replication_rng(seed: u64, key: &str, replication: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(key));
    rng.set_stream(replication as u64);
    rng
}

fn base_draws(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<BaseDraws> {
    let (n, k) = (s.n, s.k);
    match s.population {
        Population::Elliptical(fam) => Ok(BaseDraws::Spherical(sample_spherical(&RadialModel::new(fam, k)?, n, rng)?)),
        Population::SkewNormal | Population::SkewT(_) => {
            let chi = match s.population {
                Population::SkewT(nu) => {
                    Some((nu, ChiSquared::new(nu).map_err(|e| Error::InvalidParameter(e.to_string()))?))
                }
                _ => None,
            };
            let mut v = Vec::with_capacity(n);
            let mut z = Matrix::zeros(n, k);
            let mut mix = Vec::with_capacity(n);
            for i in 0..n {
                v.push(rng.sample(StandardNormal));
                for j in 0..k {
                    z[(i, j)] = rng.sample(StandardNormal);
                }
                mix.push(match &chi {
                    Some((nu, dist)) => (nu / rng.sample(dist)).sqrt(),
                    None => 1.0,
                });
            }
            Ok(BaseDraws::Latent { v, z, mix })
        }
    }
}

fn apply(s: &Scenario, base: &BaseDraws) -> Result<Matrix<f64>> {
    match base {
        BaseDraws::Spherical(eps) => Ok(eps.matmul(&s.transform()?.transpose())),
        BaseDraws::Latent { v, z, mix } => {
            let k = s.k;
            let delta = s.delta();
            let dd: f64 = delta.iter().map(|x| x * x).sum();
            // (I − δδᵀ)^{1/2} = I − c δδᵀ
            let c = if dd > 0.0 { (1.0 - (1.0 - dd).sqrt()) / dd } else { 0.0 };
            let centre = s.population.skew_centering()?;
            let mut x = Matrix::zeros(s.n, k);
            for i in 0..s.n {
                let zi = z.row(i);
                let dz: f64 = delta.iter().zip(zi).map(|(a, b)| a * b).sum();
                let sgn = if v[i] < 0.0 { -1.0 } else { 1.0 };
                for j in 0..k {
                    let rz = zi[j] - c * delta[j] * dz;
                    x[(i, j)] = mix[i] * (delta[j] * v[i].abs() + sgn * rz) - centre * delta[j];
                }
            }
            Ok(x)
        }
    }
}

/// Sample of replication `replication` of a scenario.
pub fn generate_replication(s: &Scenario, seed: u64, replication: usize) -> Result<Matrix<f64>> {
    let mut rng = replication_rng(seed, &s.base_key(), replication);
    apply(s, &base_draws(s, &mut rng)?)
}

/// One `n × k` sample of the scenario; replication 0 of [`run_study`].
pub fn generate_scenario_sample(s: &Scenario, seed: u64) -> Result<Matrix<f64>> {
    generate_replication(s, seed, 0)
}

/// `sqrt(f(1 − f)/N)`.
pub fn standard_error(frequency: f64, replications: usize) -> f64 {
    (frequency * (1.0 - frequency) / replications as f64).sqrt()
}

/// `1.96 sqrt(f(1 − f)/N)`, the 95% normal-approximation half-width.
pub fn half_width(frequency: f64, replications: usize) -> f64 {
    1.96 * standard_error(frequency, replications)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub population: String,
    pub m: u32,
    pub n: usize,
    pub k: usize,
    pub theta_estimated: bool,
    pub test: String,
    pub rejections: usize,
    /// Replications whose statistic was not finite or not defined; never
    /// counted as rejections.
    pub undefined: usize,
    pub frequency: f64,
    pub standard_error: f64,
    pub half_width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub replications: usize,
    pub alpha: f64,
    pub seed: u64,
    pub cells: Vec<StudyCell>,
}

impl StudyResult {
    pub fn cell(&self, population: &str, m: u32, test: &str) -> Option<&StudyCell> {
        self.cells.iter().find(|c| c.population == population && c.m == m && c.test == test)
    }

    pub fn frequency(&self, population: &str, m: u32, test: &str) -> Option<f64> {
        self.cell(population, m, test).map(|c| c.frequency)
    }
}

fn validity_warning(test: &TestSpec<f64>, population: &Population) -> Option<String> {
    let heavy = matches!(population, Population::Elliptical(RadialFamily::Student(nu)) if *nu <= 4.0)
        || matches!(population, Population::SkewT(nu) if *nu <= 4.0);
    match test {
        TestSpec::John if *population != Population::Elliptical(RadialFamily::Gaussian) => {
            Some(format!("john is valid under Gaussian densities only; population is {population}"))
        }
        TestSpec::Gaussian if heavy => {
            Some(format!("gaussian test requires finite fourth moments; {population} has none"))
        }
        TestSpec::Parametric(model) if Population::Elliptical(model.family()) != *population => {
            Some(format!("parametric test for {} run under {population}", model.family()))
        }
        _ => None,
    }
}

/// Runs every test on every scenario for `replications` replications.
/// `parallelism = 0` uses all cores; the result does not depend on it.
pub fn run_study(
    scenarios: &[Scenario],
    tests: &[String],
    replications: usize,
    alpha: f64,
    seed: u64,
    parallelism: usize,
) -> Result<StudyResult> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_REPLICATIONS} replications required, got {replications}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if scenarios.is_empty() || tests.is_empty() {
        return Err(Error::InvalidParameter("study needs at least one scenario and one test".into()));
    }
    let prepared: Vec<Vec<PreparedTest<f64>>> = scenarios
        .iter()
        .map(|s| tests.iter().map(|t| PreparedTest::new(TestSpec::parse(t, s.k)?, s.n)).collect())
        .collect::<Result<_>>()?;
    let shapes: Vec<ShapeMatrix<f64>> = scenarios.iter().map(|s| ShapeMatrix::identity(s.k)).collect();

    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, s) in scenarios.iter().enumerate() {
        let key = s.base_key();
        match groups.iter_mut().find(|(g, _)| *g == key) {
            Some((_, members)) => members.push(i),
            None => groups.push((key, vec![i])),
        }
    }

    let width = tests.len();
    // per replication: 0 = accept, 1 = reject, 2 = undefined
    let replicate = |r: usize| -> Result<Vec<u8>> {
        let mut out = vec![0u8; scenarios.len() * width];
        for (key, members) in &groups {
            let mut rng = replication_rng(seed, key, r);
            let base = base_draws(&scenarios[members[0]], &mut rng)?;
            for &si in members {
                let s = &scenarios[si];
                let x = apply(s, &base)?;
                let zero = vec![0.0; s.k];
                let theta = match s.theta {
                    ThetaHandling::Specified => Some(zero.as_slice()),
                    ThetaHandling::Estimated => None,
                };
                let d = decompose(&x, theta, &shapes[si])?;
                for (ti, test) in prepared[si].iter().enumerate() {
                    // A singular fourth-moment matrix in Q*_S depends on the
                    // draw, so it is counted like a non-finite statistic.
                    let q = match test.statistic(&d, &shapes[si]) {
                        Err(Error::Singular(_)) => f64::NAN,
                        other => other?,
                    };
                    out[si * width + ti] = if !q.is_finite() {
                        2
                    } else if p_value(q, s.k) < alpha {
                        1
                    } else {
                        0
                    };
                }
            }
        }
        Ok(out)
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if parallelism > 0 {
        builder = builder.num_threads(parallelism);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let outcomes: Vec<Vec<u8>> = pool.install(|| (0..replications).into_par_iter().map(replicate).collect::<Result<_>>())?;

    let mut rejections = vec![0usize; scenarios.len() * width];
    let mut undefined = vec![0usize; scenarios.len() * width];
    for o in &outcomes {
        for (idx, &v) in o.iter().enumerate() {
            match v {
                1 => rejections[idx] += 1,
                2 => undefined[idx] += 1,
                _ => {}
            }
        }
    }
    let mut cells = Vec::with_capacity(scenarios.len() * width);
    for (si, s) in scenarios.iter().enumerate() {
        for (ti, test) in prepared[si].iter().enumerate() {
            let idx = si * width + ti;
            let frequency = rejections[idx] as f64 / replications as f64;
            let mut warning = validity_warning(test.spec(), &s.population);
            if s.is_experimental() {
                warning = Some(format!("skew design with k = {} is experimental", s.k));
            }
            cells.push(StudyCell {
                population: s.population.to_string(),
                m: s.m,
                n: s.n,
                k: s.k,
                theta_estimated: s.theta == ThetaHandling::Estimated,
                test: test.spec().to_string(),
                rejections: rejections[idx],
                undefined: undefined[idx],
                frequency,
                standard_error: standard_error(frequency, replications),
                half_width: half_width(frequency, replications),
                warning,
            });
        }
    }
    Ok(StudyResult { replications, alpha, seed, cells })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Table3,
    Table4,
    #[default]
    Generic,
}

impl Layout {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table3" => Ok(Self::Table3),
            "table4" => Ok(Self::Table4),
            "generic" => Ok(Self::Generic),
            other => Err(Error::Parse(format!("unknown layout '{other}'"))),
        }
    }

    fn populations(self) -> &'static [&'static str] {
        match self {
            Self::Table3 => &["gaussian", "tnu:6", "tnu:1", "tnu:0.2", "skewnormal", "skewt:2"],
            Self::Table4 => &["gaussian", "tnu:0.2"],
            Self::Generic => &[],
        }
    }
}

/// Row label and the test names that may fill it, in order of preference.
/// At `k = 2` the `t₂` score and Wilcoxon coincide, so they share a row.
const PAPER_ROWS: [(&str, &[&str]); 10] = [
    ("john", &["john"]),
    ("gaussian", &["gaussian"]),
    ("vdw", &["vdw"]),
    ("tnu:6", &["tnu:6"]),
    ("tnu:2 = wilcoxon", &["tnu:2", "wilcoxon"]),
    ("tnu:1", &["tnu:1"]),
    ("tnu:0.5", &["tnu:0.5"]),
    ("tnu:0.2", &["tnu:0.2"]),
    ("sign", &["sign"]),
    ("spearman", &["spearman"]),
];

/// ARE annotation for a layout row: `ND` when the Gaussian reference test
/// (or the test itself) is not valid, `?` under skew populations.
fn are_annotation(population: &str, test: &str, k: usize) -> String {
    let Ok(pop) = Population::parse(population) else {
        return "?".into();
    };
    let Population::Elliptical(fam) = pop else {
        return "?".into();
    };
    let Ok(g1) = RadialModel::new(fam, k) else {
        return "?".into();
    };
    if g1.kurtosis().is_err() {
        return "ND".into();
    }
    match test {
        "gaussian" => "1.000".into(),
        "john" if fam == RadialFamily::Gaussian => "1.000".into(),
        "john" => "ND".into(),
        _ => match TestSpec::parse(test, k) {
            Ok(TestSpec::Rank(score)) => are(&score, &g1).map(fmt3).unwrap_or_else(|_| "?".into()),
            _ => "?".into(),
        },
    }
}

/// Renders a study as a table: rows are tests, columns are `m`, blocks are
/// populations. Any cell the layout needs but the result lacks is reported.
pub fn emit_table(result: &StudyResult, layout: Layout) -> Result<Table> {
    emit_with(result, layout, |c| format!("{:.4}", c.frequency))
}

/// The same layout filled with the 95% half-widths.
pub fn emit_half_widths(result: &StudyResult, layout: Layout) -> Result<Table> {
    let mut t = emit_with(result, layout, |c| format!("{:.4}", c.half_width))?;
    t.title = format!("95% half-widths (N = {})", result.replications);
    if layout != Layout::Generic {
        t.header.pop();
        for row in &mut t.rows {
            row.pop();
        }
    }
    Ok(t)
}

fn emit_with(result: &StudyResult, layout: Layout, value: fn(&StudyCell) -> String) -> Result<Table> {
    match layout {
        Layout::Generic => emit_generic(result, value),
        Layout::Table3 | Layout::Table4 => emit_paper(result, layout, value),
    }
}

fn emit_paper(result: &StudyResult, layout: Layout, value: fn(&StudyCell) -> String) -> Result<Table> {
    let title = match layout {
        Layout::Table3 => "Rejection frequencies, elliptical and skew populations",
        _ => "Rejection frequencies, small samples",
    };
    let mut header = vec!["test".to_string(), "population".to_string()];
    header.extend((0..4).map(|m| format!("m={m}")));
    header.push("ARE".into());
    let mut table = Table::new(format!("{title} (N = {})", result.replications), header);
    let mut missing = Vec::new();
    for pop in layout.populations() {
        for (label, names) in PAPER_ROWS {
            let mut row = vec![label.to_string(), pop.to_string()];
            let mut k = 2;
            for m in 0..4 {
                match names.iter().find_map(|t| result.cell(pop, m, t)) {
                    Some(c) => {
                        k = c.k;
                        row.push(value(c));
                    }
                    None => {
                        missing.push(format!("{pop} m={m} {label}"));
                        row.push(String::new());
                    }
                }
            }
            row.push(are_annotation(pop, names[0], k));
            table.push(row);
        }
    }
    if missing.is_empty() {
        Ok(table)
    } else {
        Err(Error::MissingCells(missing))
    }
}

fn emit_generic(result: &StudyResult, value: fn(&StudyCell) -> String) -> Result<Table> {
    if result.cells.is_empty() {
        return Err(Error::MissingCells(vec!["<empty study result>".into()]));
    }
    let ms: BTreeSet<u32> = result.cells.iter().map(|c| c.m).collect();
    let mut keys: Vec<(String, String)> = Vec::new();
    for c in &result.cells {
        let key = (c.population.clone(), c.test.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut header = vec!["test".to_string(), "population".to_string()];
    header.extend(ms.iter().map(|m| format!("m={m}")));
    let mut table = Table::new(format!("Rejection frequencies (N = {})", result.replications), header);
    let mut missing = Vec::new();
    for (pop, test) in keys {
        let mut row = vec![test.clone(), pop.clone()];
        for &m in &ms {
            match result.cell(&pop, m, &test) {
                Some(c) => row.push(value(c)),
                None => {
                    missing.push(format!("{pop} m={m} {test}"));
                    row.push(String::new());
                }
            }
        }
        table.push(row);
    }
    if missing.is_empty() {
        Ok(table)
    } else {
        Err(Error::MissingCells(missing))
    }
}

/// A study read from a configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub populations: Vec<String>,
    #[serde(default = "default_m")]
    pub m: Vec<u32>,
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default = "default_tests")]
    pub tests: Vec<String>,
    #[serde(default)]
    pub theta: ThetaHandling,
    #[serde(default)]
    pub perturbation: Perturbation,
    /// `vech1 v` for elliptical populations.
    #[serde(default = "default_elliptical_v")]
    pub elliptical_v: Vec<f64>,
    #[serde(default = "default_skewnormal_v")]
    pub skewnormal_v: Vec<f64>,
    #[serde(default = "default_skewt_v")]
    pub skewt_v: Vec<f64>,
    #[serde(default)]
    pub layout: Layout,
    /// Replications and sample size used when full scale is requested.
    #[serde(default)]
    pub full_replications: Option<usize>,
    #[serde(default)]
    pub full_n: Option<usize>,
    /// Output path stem; `.csv`, `.txt` and `.json` are appended.
    #[serde(default)]
    pub output: Option<String>,
}

fn default_m() -> Vec<u32> {
    vec![0, 1, 2, 3]
}

fn default_k() -> usize {
    2
}

fn default_alpha() -> f64 {
    0.05
}

fn default_tests() -> Vec<String> {
    DEFAULT_BATTERY.iter().map(|s| s.to_string()).collect()
}

fn default_elliptical_v() -> Vec<f64> {
    vec![0.0, 0.14]
}

fn default_skewnormal_v() -> Vec<f64> {
    vec![0.15, 0.0]
}

fn default_skewt_v() -> Vec<f64> {
    vec![0.25, 0.0]
}

impl StudyConfig {
    /// Switches to the full-scale replication count and sample size
    /// (2500 and 500 unless the configuration overrides them).
    pub fn escalate(&mut self) {
        self.replications = self.full_replications.unwrap_or(2500);
        self.n = self.full_n.unwrap_or(500);
    }

    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let mut out = Vec::new();
        for p in &self.populations {
            let pop = Population::parse(p)?;
            let dir = match pop {
                Population::Elliptical(_) => &self.elliptical_v,
                Population::SkewNormal => &self.skewnormal_v,
                Population::SkewT(_) => &self.skewt_v,
            };
            for &m in &self.m {
                out.push(Scenario::new(pop, m, dir.clone(), self.n, self.k, self.theta)?.with_perturbation(self.perturbation)?);
            }
        }
        Ok(out)
    }

    pub fn run(&self, seed: u64) -> Result<StudyResult> {
        run_study(&self.scenarios()?, &self.tests, self.replications, self.alpha, seed, self.parallelism)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(m: u32) -> Scenario {
        Scenario::new(Population::parse("gaussian").unwrap(), m, vec![0.0, 0.14], 50, 2, ThetaHandling::Specified)
            .unwrap()
    }

    #[test]
    fn half_widths_at_2500() {
        // the commonly quoted 0.0044 / 0.0080 / 0.0100 are one standard error
        assert!((standard_error(0.05, 2500) - 0.0044).abs() < 1e-4);
        assert!((standard_error(0.20, 2500) - 0.0080).abs() < 1e-4);
        assert!((standard_error(0.50, 2500) - 0.0100).abs() < 1e-4);
        assert!((half_width(0.05, 2500) - 0.0085).abs() < 1e-4);
        assert!((half_width(0.20, 2500) - 0.0157).abs() < 1e-4);
        assert!((half_width(0.50, 2500) - 0.0196).abs() < 1e-4);
    }

    #[test]
    fn shared_base_draws_across_m() {
        let x0 = generate_replication(&gaussian(0), 7, 3).unwrap();
        let x3 = generate_replication(&gaussian(3), 7, 3).unwrap();
        let a = gaussian(3).transform().unwrap();
        let mapped = x0.matmul(&a.transpose());
        assert_eq!(mapped, x3);
        assert_ne!(generate_replication(&gaussian(0), 7, 4).unwrap(), x0);
    }

    #[test]
    fn population_shape_of_the_alternative() {
        let s = gaussian(3).population_shape().unwrap();
        assert!((s.matrix()[(1, 1)] - 1.42).abs() < 1e-12);
        assert_eq!(s.matrix()[(0, 1)], 0.0);
        let lin = gaussian(3).with_perturbation(Perturbation::Linear).unwrap().population_shape().unwrap();
        assert!((lin.matrix()[(1, 1)] - 1.42f64.powi(2)).abs() < 1e-12);
        let g = Population::parse("gaussian").unwrap();
        assert!(Scenario::new(g, 1, vec![0.0, -1.5], 10, 2, ThetaHandling::Specified).is_err());
    }

    #[test]
    fn skew_normal_at_m0_is_standard_normal_draws() {
        let s = Scenario::new(Population::SkewNormal, 0, vec![0.15, 0.0], 20, 2, ThetaHandling::Specified).unwrap();
        assert_eq!(s.delta(), vec![0.0, 0.0]);
        let x = generate_scenario_sample(&s, 1).unwrap();
        let mut rng = replication_rng(1, &s.base_key(), 0);
        let BaseDraws::Latent { v, z, .. } = base_draws(&s, &mut rng).unwrap() else { panic!() };
        for i in 0..20 {
            let sg = if v[i] < 0.0 { -1.0 } else { 1.0 };
            assert_eq!(x[(i, 0)], sg * z[(i, 0)]);
        }
    }

    #[test]
    fn skew_t_centering() {
        let c = Population::SkewT(2.0).skew_centering().unwrap();
        assert!((c - 2f64.sqrt()).abs() < 1e-12);
        assert!(Population::SkewT(1.0).skew_centering().is_err());
        assert!(Scenario::new(Population::SkewT(0.5), 1, vec![0.25, 0.0], 10, 2, ThetaHandling::Specified).is_err());
    }

    #[test]
    fn scenario_validation() {
        let g = Population::parse("gaussian").unwrap();
        assert!(Scenario::new(g, 4, vec![0.0, 0.1], 10, 2, ThetaHandling::Specified).is_err());
        assert!(Scenario::new(g, 1, vec![0.0], 10, 2, ThetaHandling::Specified).is_err());
        assert!(Scenario::new(g, 1, vec![0.0, 0.1], 1, 2, ThetaHandling::Specified).is_err());
        let sk = Scenario::new(Population::SkewNormal, 1, vec![0.1, 0.0, 0.0], 10, 3, ThetaHandling::Specified).unwrap();
        assert!(sk.is_experimental());
    }

    #[test]
    fn parse_populations() {
        for s in ["gaussian", "tnu:0.2", "powerexp:2", "skewnormal", "skewt:2"] {
            assert_eq!(Population::parse(s).unwrap().to_string(), s);
        }
        assert!(Population::parse("skewt:x").is_err());
    }

    #[test]
    fn too_few_replications() {
        let tests = vec!["sign".to_string()];
        assert!(run_study(&[gaussian(0)], &tests, 10, 0.05, 1, 1).is_err());
    }

    #[test]
    fn empty_result_lists_missing_cells() {
        let r = StudyResult { replications: 100, alpha: 0.05, seed: 1, cells: vec![] };
        match emit_table(&r, Layout::Table4) {
            Err(Error::MissingCells(v)) => assert_eq!(v.len(), 2 * 10 * 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(emit_table(&r, Layout::Generic), Err(Error::MissingCells(_))));
    }

    #[test]
    fn single_cell_generic_table() {
        let tests = vec!["sign".to_string()];
        let r = run_study(&[gaussian(1)], &tests, 100, 0.05, 1, 1).unwrap();
        let t = emit_table(&r, Layout::Generic).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.header.len(), 3);
    }

    #[test]
    fn annotations() {
        assert_eq!(are_annotation("gaussian", "sign", 2), "0.500");
        assert_eq!(are_annotation("tnu:6", "john", 2), "ND");
        assert_eq!(are_annotation("tnu:1", "vdw", 2), "ND");
        assert_eq!(are_annotation("skewnormal", "vdw", 2), "?");
    }
}
