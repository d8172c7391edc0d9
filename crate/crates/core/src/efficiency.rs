//! Noncentrality parameters, local powers, asymptotic relative efficiencies
//! against the Gaussian test, and the cost of not knowing the scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{shape_df, Matrix, ShapeMatrix};
use crate::radial::{RadialFamily, RadialModel};
use crate::score::{ScoreFunction, ScoreKind};
use crate::special::{chi2_quantile_pair, noncentral_chi2_sf};
use crate::tabular::{fmt3, Table};

/// Local alternative `V₀ + n^{-1/2} v`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalAlternative {
    pub v0: ShapeMatrix<f64>,
    pub v: Matrix<f64>,
}

impl LocalAlternative {
    pub fn new(v0: ShapeMatrix<f64>, v: Matrix<f64>) -> Result<Self> {
        let k = v0.dim();
        if v.rows() != k || v.cols() != k {
            return Err(Error::Dimension { what: "perturbation", expected: k, found: v.rows() });
        }
        if !(v.asymmetry() <= 1e-12 * v.max_abs()) {
            return Err(Error::NotSymmetric { asymmetry: v.asymmetry() });
        }
        if v[(0, 0)] != 0.0 {
            return Err(Error::InvalidParameter(format!("perturbation must have v[0][0] = 0, found {}", v[(0, 0)])));
        }
        Ok(Self { v0, v })
    }

    pub fn dim(&self) -> usize {
        self.v0.dim()
    }

    fn v0_inv_v(&self) -> Result<Matrix<f64>> {
        Ok(self.v0.matrix().inverse()?.matmul(&self.v))
    }

    /// `tr(V₀⁻¹v)`.
    pub fn trace(&self) -> Result<f64> {
        Ok(self.v0_inv_v()?.trace())
    }
}

/// `tr((V₀⁻¹v)²) − (1/k)(tr V₀⁻¹v)²`.
pub fn shape_deviation(alt: &LocalAlternative) -> Result<f64> {
    let a = alt.v0_inv_v()?;
    let t = a.trace();
    Ok((a.matmul(&a).trace() - t * t / alt.dim() as f64).max(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub enum NcpTest {
    Rank(ScoreFunction<f64>),
    Gaussian,
    Parametric(RadialModel<f64>),
}

/// Noncentrality of the limiting χ² law under `alt` when the radial
/// density is `g1`.
pub fn noncentrality(test: &NcpTest, g1: &RadialModel<f64>, alt: &LocalAlternative) -> Result<f64> {
    let k = alt.dim() as f64;
    let bracket = shape_deviation(alt)?;
    match test {
        NcpTest::Rank(score) => {
            let j = cross_information(score, g1)?;
            Ok(j * j / (2.0 * k * (k + 2.0) * score.moments().1) * bracket)
        }
        NcpTest::Gaussian => Ok(bracket / (2.0 * (1.0 + g1.kurtosis()?))),
        NcpTest::Parametric(f1) => {
            if f1 != g1 {
                return Err(Error::InvalidParameter(format!(
                    "parametric noncentrality needs the true density to be {}, got {}",
                    f1.family(),
                    g1.family()
                )));
            }
            Ok(f1.shape_information() / (2.0 * k * (k + 2.0)) * bracket)
        }
    }
}

/// `P[χ²_df(ncp) > χ²_{df,1−α}]` with `df = k(k+1)/2 − 1`.
pub fn local_power(ncp: f64, k: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::OutOfUnitInterval { value: alpha });
    }
    if !(ncp >= 0.0) {
        return Err(Error::InvalidParameter(format!("noncentrality {ncp} must be nonnegative")));
    }
    let df = shape_df(k) as f64;
    let crit = chi2_quantile_pair(df, 1.0 - alpha, alpha)?;
    Ok(noncentral_chi2_sf(crit, df, ncp))
}

/// `J_k(K; g₁)` in closed form where one exists.
pub fn cross_information_closed(score: &ScoreFunction<f64>, g1: &RadialModel<f64>) -> Option<f64> {
    let k = g1.dim() as f64;
    match (score.kind(), g1.family()) {
        (ScoreKind::Sign, _) => Some(k),
        (ScoreKind::VanDerWaerden, RadialFamily::Gaussian) => Some(g1.shape_information()),
        (ScoreKind::Student(a), RadialFamily::Student(b)) if a == b => Some(g1.shape_information()),
        _ => None,
    }
}

/// `J_k(K; g₁)`: closed form when available, quadrature otherwise.
pub fn cross_information(score: &ScoreFunction<f64>, g1: &RadialModel<f64>) -> Result<f64> {
    score.check_dim(g1.dim())?;
    match cross_information_closed(score, g1) {
        Some(v) => Ok(v),
        None => score.cross_information(g1),
    }
}

/// `E_k/D_k²`, or `None` when the fourth moment is infinite.
fn moment_ratio(g1: &RadialModel<f64>, closed: bool) -> Result<Option<f64>> {
    let (d, e) = if closed {
        (g1.radial_moment(2), g1.radial_moment(4))
    } else {
        (g1.radial_moment_quadrature(2), g1.radial_moment_quadrature(4))
    };
    match (d, e) {
        (Ok(d), Ok(e)) => Ok(Some(e / (d * d))),
        (Err(Error::InfiniteMoment { .. }), _) | (_, Err(Error::InfiniteMoment { .. })) => Ok(None),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

/// ARE of the rank test with score `K` relative to the Gaussian test at
/// radial density `g1`: `(E_k/D_k²) J²(K; g₁) / ((k+2)² E[K²])`.
/// Returns `+∞` when `g1` has an infinite fourth moment.
pub fn are(score: &ScoreFunction<f64>, g1: &RadialModel<f64>) -> Result<f64> {
    score.check_dim(g1.dim())?;
    let k = g1.dim() as f64;
    if let Some(v) = are_closed(score, g1) {
        return Ok(v);
    }
    let Some(ratio) = moment_ratio(g1, true)? else {
        return Ok(f64::INFINITY);
    };
    let j = cross_information(score, g1)?;
    Ok(ratio * j * j / ((k + 2.0) * (k + 2.0) * score.moments().1))
}

/// Closed-form AREs: sign test at Gaussian and Student densities, and a
/// Student score at its own density.
pub fn are_closed(score: &ScoreFunction<f64>, g1: &RadialModel<f64>) -> Option<f64> {
    let k = g1.dim() as f64;
    match (score.kind(), g1.family()) {
        (_, RadialFamily::Student(nu)) if nu <= 4.0 => Some(f64::INFINITY),
        (ScoreKind::Sign, RadialFamily::Gaussian) => Some(k / (k + 2.0)),
        (ScoreKind::Sign, RadialFamily::Student(nu)) => Some(k * (nu - 2.0) / ((k + 2.0) * (nu - 4.0))),
        (ScoreKind::VanDerWaerden, RadialFamily::Gaussian) => Some(1.0),
        (ScoreKind::Student(a), RadialFamily::Student(nu)) if a == nu => {
            Some((k + nu) * (nu - 2.0) / ((k + nu + 2.0) * (nu - 4.0)))
        }
        _ => None,
    }
}

/// ARE computed entirely by quadrature (moments and cross-information).
pub fn are_quadrature(score: &ScoreFunction<f64>, g1: &RadialModel<f64>) -> Result<f64> {
    score.check_dim(g1.dim())?;
    let k = g1.dim() as f64;
    let Some(ratio) = moment_ratio(g1, false)? else {
        return Ok(f64::INFINITY);
    };
    let j = score.cross_information(g1)?;
    let (_, e2) = score.moments_quadrature()?;
    Ok(ratio * j * j / ((k + 2.0) * (k + 2.0) * e2))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScaleLossMode {
    /// `(1/(4k²))(J_k − k²)(tr V₀⁻¹v)²`.
    Absolute(LocalAlternative),
    /// Relative loss along diagonal alternatives.
    RelativeDiagonal,
}

pub fn scale_loss(model: &RadialModel<f64>, mode: &ScaleLossMode) -> Result<f64> {
    let k = model.dim() as f64;
    let excess = model.shape_information() - k * k;
    match mode {
        ScaleLossMode::Absolute(alt) => {
            if alt.dim() != model.dim() {
                return Err(Error::Dimension { what: "alternative", expected: model.dim(), found: alt.dim() });
            }
            let t = alt.trace()?;
            Ok(excess * t * t / (4.0 * k * k))
        }
        ScaleLossMode::RelativeDiagonal => Ok(relative_scale_loss(k, excess + k * k)),
    }
}

/// `(k+2)(J − k²) / (3k(J − k²) + 2k²(k−1))`.
pub fn relative_scale_loss(k: f64, j: f64) -> f64 {
    let excess = j - k * k;
    (k + 2.0) * excess / (3.0 * k * excess + 2.0 * k * k * (k - 1.0))
}

/// `(k+2)η / (k(k+3η−1))`.
pub fn relative_scale_loss_power_exp(k: f64, eta: f64) -> f64 {
    (k + 2.0) * eta / (k * (k + 3.0 * eta - 1.0))
}

/// `ν / (k(k+ν−1))`.
pub fn relative_scale_loss_student(k: f64, nu: f64) -> f64 {
    nu / (k * (k + nu - 1.0))
}

/// A table column parameter, possibly a limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Param {
    ToZero,
    Value(f64),
    ToInfinity,
}

impl Param {
    fn label(&self) -> String {
        match self {
            Param::ToZero => "->0".into(),
            Param::Value(v) => format!("{v}"),
            Param::ToInfinity => "->inf".into(),
        }
    }
}

pub const TABLE1_ETAS: [Param; 7] = [
    Param::ToZero,
    Param::Value(0.1),
    Param::Value(0.5),
    Param::Value(1.0),
    Param::Value(2.0),
    Param::Value(5.0),
    Param::ToInfinity,
];
pub const TABLE1_NUS: [Param; 7] = [
    Param::ToZero,
    Param::Value(1.0),
    Param::Value(3.0),
    Param::Value(5.0),
    Param::Value(8.0),
    Param::Value(15.0),
    Param::ToInfinity,
];
/// `None` stands for the `k → ∞` row.
pub const TABLE1_KS: [Option<usize>; 6] = [Some(2), Some(3), Some(4), Some(6), Some(10), None];

/// Relative scale loss for the power-exponential block; limits included.
pub fn table1_power_exp(k: Option<usize>, eta: Param) -> f64 {
    match (k, eta) {
        (_, Param::ToZero) => 0.0,
        (Some(k), Param::Value(e)) => {
            let k = k as f64;
            relative_scale_loss(k, k * (k + 2.0 * e))
        }
        (Some(k), Param::ToInfinity) => {
            let k = k as f64;
            (k + 2.0) / (3.0 * k)
        }
        (None, Param::Value(_)) => 0.0,
        (None, Param::ToInfinity) => 1.0 / 3.0,
    }
}

/// Relative scale loss for the Student block; limits included.
pub fn table1_student(k: Option<usize>, nu: Param) -> f64 {
    match (k, nu) {
        (_, Param::ToZero) | (None, _) => 0.0,
        (Some(k), Param::Value(v)) => {
            let kf = k as f64;
            relative_scale_loss(kf, kf * (kf + 2.0) * (kf + v) / (kf + v + 2.0))
        }
        (Some(k), Param::ToInfinity) => 1.0 / k as f64,
    }
}

fn k_label(k: Option<usize>) -> String {
    k.map_or("inf".into(), |k| k.to_string())
}

/// Both blocks of the relative-loss table.
pub fn table1() -> (Table, Table) {
    let header = |name: &str, ps: &[Param]| {
        std::iter::once(format!("k \\ {name}")).chain(ps.iter().map(Param::label)).collect::<Vec<_>>()
    };
    let mut pe = Table::new(
        "Relative power loss from unspecified scale, power-exponential densities",
        header("eta", &TABLE1_ETAS),
    );
    let mut st = Table::new("Relative power loss from unspecified scale, Student densities", header("nu", &TABLE1_NUS));
    for k in TABLE1_KS {
        pe.push(std::iter::once(k_label(k)).chain(TABLE1_ETAS.iter().map(|&e| fmt3(table1_power_exp(k, e)))).collect());
        st.push(std::iter::once(k_label(k)).chain(TABLE1_NUS.iter().map(|&v| fmt3(table1_student(k, v)))).collect());
    }
    (pe, st)
}

pub const TABLE2_KS: [usize; 5] = [2, 3, 4, 6, 10];
/// `None` is the Gaussian column.
pub const TABLE2_NUS: [Option<f64>; 8] = [Some(1.0), Some(3.0), Some(4.0), Some(5.0), Some(8.0), Some(15.0), Some(20.0), None];
pub const TABLE2_SCORES: [&str; 4] = ["tnu:6", "vdw", "sign", "wilcoxon"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreCell {
    pub score: String,
    pub k: usize,
    /// `None` for the Gaussian density.
    pub nu: Option<f64>,
    /// `None` when infinite.
    pub are: Option<f64>,
    pub infinite: bool,
}

pub fn table2_cells() -> Result<Vec<AreCell>> {
    use rayon::prelude::*;
    let jobs: Vec<(&str, usize, Option<f64>)> = TABLE2_SCORES
        .iter()
        .flat_map(|&s| TABLE2_KS.iter().flat_map(move |&k| TABLE2_NUS.iter().map(move |&nu| (s, k, nu))))
        .collect();
    jobs.into_par_iter()
        .map(|(s, k, nu)| {
            let score = ScoreFunction::parse(s, k)?;
            let g1 = match nu {
                Some(v) => RadialModel::student(k, v)?,
                None => RadialModel::gaussian(k)?,
            };
            let v = are(&score, &g1)?;
            Ok(AreCell {
                score: s.into(),
                k,
                nu,
                are: v.is_finite().then_some(v),
                infinite: v.is_infinite(),
            })
        })
        .collect()
}

/// Shape AREs of the t₆, van der Waerden, sign and Wilcoxon tests against
/// the Gaussian test under Student and normal densities.
pub fn table2() -> Result<Table> {
    let cells = table2_cells()?;
    let header = ["score", "k"]
        .iter()
        .map(|s| s.to_string())
        .chain(TABLE2_NUS.iter().map(|nu| nu.map_or("normal".into(), |v| format!("t{v}"))))
        .collect();
    let mut t = Table::new("Shape AREs with respect to the Gaussian test", header);
    for chunk in cells.chunks(TABLE2_NUS.len()) {
        let mut row = vec![chunk[0].score.clone(), chunk[0].k.to_string()];
        row.extend(chunk.iter().map(|c| c.are.map_or("+inf".into(), fmt3)));
        t.push(row);
    }
    Ok(t)
}

pub const DOMINANCE_ETAS: [f64; 6] = [0.5, 0.8, 1.0, 1.5, 2.0, 2.5];

/// ARE of the van der Waerden test with respect to the Gaussian test under
/// power-exponential densities, one row per `η`.
pub fn dominance_table(k: usize) -> Result<Table> {
    let vdw = ScoreFunction::van_der_waerden(k)?;
    let mut t = Table::new(
        format!("van der Waerden vs Gaussian test, power-exponential densities, k = {k}"),
        vec!["eta".into(), "ARE".into()],
    );
    for eta in DOMINANCE_ETAS {
        let v = are(&vdw, &RadialModel::power_exp(k, eta)?)?;
        t.push(vec![eta.to_string(), fmt3(v)]);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alt2(a: f64, b: f64, c: f64) -> LocalAlternative {
        let v = Matrix::from_rows(&[vec![a, b], vec![b, c]]).unwrap();
        LocalAlternative::new(ShapeMatrix::identity(2), v).unwrap()
    }

    #[test]
    fn shape_deviation_examples() {
        assert_eq!(shape_deviation(&alt2(0.0, 0.0, 0.0)).unwrap(), 0.0);
        assert!((shape_deviation(&alt2(0.0, 0.3, 0.0)).unwrap() - 0.18).abs() < 1e-15);
        assert!((shape_deviation(&alt2(0.0, 0.0, 0.14)).unwrap() - 0.0098).abs() < 1e-15);
    }

    #[test]
    fn alternative_validation() {
        let v = Matrix::from_rows(&[vec![0.1, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(LocalAlternative::new(ShapeMatrix::identity(2), v).is_err());
    }

    #[test]
    fn gaussian_noncentrality() {
        let g = RadialModel::gaussian(2).unwrap();
        let ncp = noncentrality(&NcpTest::Gaussian, &g, &alt2(0.0, 0.0, 0.14)).unwrap();
        assert!((ncp - 0.0049).abs() < 1e-15);
    }

    #[test]
    fn closed_are_examples() {
        let s4 = ScoreFunction::sign(4);
        assert!((are(&s4, &RadialModel::gaussian(4).unwrap()).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        let s3 = ScoreFunction::sign(3);
        assert!((are(&s3, &RadialModel::student(3, 5.0).unwrap()).unwrap() - 1.8).abs() < 1e-14);
        assert!(are(&s3, &RadialModel::student(3, 4.0).unwrap()).unwrap().is_infinite());
    }

    #[test]
    fn local_power_limits() {
        assert!((local_power(0.0, 2, 0.05).unwrap() - 0.05).abs() < 1e-12);
        assert!(local_power(1e3, 2, 0.05).unwrap() >= 1.0 - 1e-6);
    }

    #[test]
    fn scale_loss_examples() {
        let t1 = RadialModel::student(2, 1.0).unwrap();
        assert!((scale_loss(&t1, &ScaleLossMode::RelativeDiagonal).unwrap() - 0.25).abs() < 1e-15);
        let pe = RadialModel::power_exp(2, 1.0).unwrap();
        assert!((scale_loss(&pe, &ScaleLossMode::RelativeDiagonal).unwrap() - 0.5).abs() < 1e-15);
        let off = ScaleLossMode::Absolute(alt2(0.0, 0.4, 0.0));
        assert_eq!(scale_loss(&pe, &off).unwrap(), 0.0);
    }

    #[test]
    fn table1_shape() {
        let (pe, st) = table1();
        assert_eq!(pe.rows.len(), 6);
        assert_eq!(st.rows[0], vec!["2", "0.000", "0.250", "0.375", "0.417", "0.444", "0.469", "0.500"]);
        assert_eq!(pe.rows[5][7], "0.333");
    }
}
