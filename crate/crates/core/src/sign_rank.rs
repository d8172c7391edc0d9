//! Distances, multivariate signs and radial ranks relative to `(θ, V₀)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym_inv_sqrt, sym_sqrt, Matrix, ShapeMatrix};
use crate::scalar::Scalar;

const WEISZFELD_MAX_ITER: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignRankDecomposition<T> {
    pub n: usize,
    pub k: usize,
    pub theta_used: Vec<T>,
    pub theta_estimated: bool,
    /// `d_i = ‖V₀^{-1/2}(X_i − θ)‖`.
    pub distances: Vec<T>,
    /// `U_i = V₀^{-1/2}(X_i − θ) / d_i`, one row per observation.
    pub signs: Matrix<T>,
    /// Ranks in `1..=n`; ties broken by observation index.
    pub ranks: Vec<usize>,
    pub tie_flag: bool,
}

impl<T: Scalar> SignRankDecomposition<T> {
    /// Builds a decomposition from distances and signs directly.
    pub fn from_parts(distances: Vec<T>, signs: Matrix<T>, theta_used: Vec<T>, theta_estimated: bool) -> Result<Self> {
        let n = distances.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty sample".into()));
        }
        if signs.rows() != n {
            return Err(Error::Dimension { what: "sign rows", expected: n, found: signs.rows() });
        }
        let k = signs.cols();
        if theta_used.len() != k {
            return Err(Error::Dimension { what: "location", expected: k, found: theta_used.len() });
        }
        if let Some(i) = distances.iter().position(|&d| !(d > T::zero() && d.is_finite())) {
            return Err(Error::ZeroDistance { index: i });
        }
        let (ranks, tie_flag) = ranks_of(&distances);
        Ok(Self { n, k, theta_used, theta_estimated, distances, signs, ranks, tie_flag })
    }

    pub fn sign(&self, i: usize) -> &[T] {
        self.signs.row(i)
    }

    /// `Σ_i w_i U_i U_iᵀ / n`.
    pub fn weighted_sign_scatter(&self, weights: &[T]) -> Matrix<T> {
        let k = self.k;
        let mut s = Matrix::zeros(k, k);
        for (i, &w) in weights.iter().enumerate() {
            let u = self.signs.row(i);
            for a in 0..k {
                let wa = w * u[a];
                for b in a..k {
                    s[(a, b)] = s[(a, b)] + wa * u[b];
                }
            }
        }
        let nf = T::from_usize_lossy(self.n);
        for a in 0..k {
            for b in a..k {
                let v = s[(a, b)] / nf;
                s[(a, b)] = v;
                s[(b, a)] = v;
            }
        }
        s
    }
}

/// Ranks `1..=n` of `d`, ties broken by index; also reports whether any tie
/// occurred.
pub fn ranks_of<T: Scalar>(d: &[T]) -> (Vec<usize>, bool) {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let mut ranks = vec![0; d.len()];
    let mut tie = false;
    for (pos, &i) in order.iter().enumerate() {
        ranks[i] = pos + 1;
        if pos > 0 && d[order[pos - 1]] == d[i] {
            tie = true;
        }
    }
    (ranks, tie)
}

/// Splits observations into distances, signs and ranks. Without `theta`
/// the spatial median (computed in the `V₀` metric) is used.
pub fn decompose<T: Scalar>(x: &Matrix<T>, theta: Option<&[T]>, v0: &ShapeMatrix<T>) -> Result<SignRankDecomposition<T>> {
    let (n, k) = (x.rows(), x.cols());
    if n < 1 {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    if v0.dim() != k {
        return Err(Error::Dimension { what: "shape matrix", expected: k, found: v0.dim() });
    }
    let root_inv = if v0.is_identity() { None } else { Some(sym_inv_sqrt(v0.matrix())?) };
    let (theta_used, estimated) = match theta {
        Some(t) => {
            if t.len() != k {
                return Err(Error::Dimension { what: "location", expected: k, found: t.len() });
            }
            (t.to_vec(), false)
        }
        None => {
            let med = match &root_inv {
                None => spatial_median(x, None)?,
                Some(r) => {
                    let z = x.matmul(r);
                    let m = spatial_median(&z, None)?;
                    sym_sqrt(v0.matrix())?.mul_vec(&m)
                }
            };
            (med, true)
        }
    };
    let mut z = Matrix::from_fn(n, k, |i, j| x[(i, j)] - theta_used[j]);
    if let Some(r) = &root_inv {
        z = z.matmul(r);
    }
    let mut distances = Vec::with_capacity(n);
    for i in 0..n {
        let d = z.row(i).iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(d > T::zero()) {
            return Err(Error::ZeroDistance { index: i });
        }
        distances.push(d);
    }
    let signs = Matrix::from_fn(n, k, |i, j| z[(i, j)] / distances[i]);
    SignRankDecomposition::from_parts(distances, signs, theta_used, estimated)
}

/// Spatial median `argmin Σ‖X_i − θ‖` by Weiszfeld iteration with the
/// Vardi–Zhang modification at data points. Default tolerance is `1e-9`
/// times the bounding-box diagonal.
pub fn spatial_median<T: Scalar>(x: &Matrix<T>, tol: Option<T>) -> Result<Vec<T>> {
    let (n, k) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::InvalidParameter("empty sample".into()));
    }
    if n == 1 {
        return Ok(x.row(0).to_vec());
    }
    let diag = (0..k)
        .map(|j| {
            let (lo, hi) = (0..n).fold((T::infinity(), T::neg_infinity()), |(lo, hi), i| {
                (lo.min(x[(i, j)]), hi.max(x[(i, j)]))
            });
            (hi - lo) * (hi - lo)
        })
        .sum::<T>()
        .sqrt();
    if diag == T::zero() {
        return Ok(x.row(0).to_vec());
    }
    let tol = tol.unwrap_or(T::lit(1e-9) * diag);
    let coincide = T::epsilon() * diag;
    let nf = T::from_usize_lossy(n);
    let mut y: Vec<T> = (0..k).map(|j| (0..n).map(|i| x[(i, j)]).sum::<T>() / nf).collect();
    let mut grad_norm = T::infinity();

    for _ in 0..WEISZFELD_MAX_ITER {
        let mut weight_sum = T::zero();
        let mut weighted = vec![T::zero(); k];
        let mut resid = vec![T::zero(); k];
        let mut multiplicity = T::zero();
        for i in 0..n {
            let row = x.row(i);
            let d = row.iter().zip(&y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
            if d <= coincide {
                multiplicity = multiplicity + T::one();
                continue;
            }
            let w = T::one() / d;
            weight_sum = weight_sum + w;
            for j in 0..k {
                weighted[j] = weighted[j] + row[j] * w;
                resid[j] = resid[j] + (row[j] - y[j]) * w;
            }
        }
        let r = resid.iter().map(|&v| v * v).sum::<T>().sqrt();
        grad_norm = r;
        if weight_sum == T::zero() || r <= multiplicity {
            // every point coincides, or the anchor satisfies the optimality test
            return Ok(y);
        }
        let gamma = if multiplicity > T::zero() { (multiplicity / r).min(T::one()) } else { T::zero() };
        let next: Vec<T> = (0..k)
            .map(|j| (T::one() - gamma) * weighted[j] / weight_sum + gamma * y[j])
            .collect();
        let step = next.iter().zip(&y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
        y = next;
        if step <= tol {
            return Ok(y);
        }
    }
    Err(Error::NonConvergence {
        what: "spatial median",
        iterations: WEISZFELD_MAX_ITER,
        residual: grad_norm.to_f64_lossy(),
        last: y.iter().map(|v| v.to_f64_lossy()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn distance_and_sign() {
        let x = mat(&[&[3.0, 4.0], &[1.0, 0.0]]);
        let d = decompose(&x, Some(&[0.0, 0.0]), &ShapeMatrix::identity(2)).unwrap();
        assert_eq!(d.distances, vec![5.0, 1.0]);
        assert_eq!(d.sign(0), &[0.6, 0.8]);
        assert_eq!(d.ranks, vec![2, 1]);
        assert!(!d.theta_estimated);
    }

    #[test]
    fn ranks_of_distances() {
        assert_eq!(ranks_of(&[5.0, 1.0, 2.0]), (vec![3, 1, 2], false));
        assert_eq!(ranks_of(&[1.0, 1.0, 0.5]), (vec![2, 3, 1], true));
    }

    #[test]
    fn zero_distance_is_an_error() {
        let x = mat(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert!(matches!(
            decompose(&x, Some(&[0.0, 0.0]), &ShapeMatrix::identity(2)),
            Err(Error::ZeroDistance { index: 0 })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let x = mat(&[&[1.0, 2.0], &[1.0, 0.0]]);
        assert!(decompose(&x, Some(&[0.0]), &ShapeMatrix::identity(2)).is_err());
        assert!(decompose(&x, None, &ShapeMatrix::identity(3)).is_err());
    }

    #[test]
    fn symmetric_cross_median() {
        let x = mat(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
        let m = spatial_median(&x, None).unwrap();
        assert!(m[0].abs() < 1e-12 && m[1].abs() < 1e-12);
    }

    #[test]
    fn median_at_a_data_point() {
        // the centre point carries the optimum: three spokes around it
        let x = mat(&[&[0.0, 0.0], &[1.0, 0.0], &[-0.5, 0.8], &[-0.5, -0.8], &[0.0, 0.0]]);
        let m = spatial_median(&x, None).unwrap();
        assert!(m[0].abs() < 1e-8 && m[1].abs() < 1e-8, "{m:?}");
    }

    #[test]
    fn estimated_theta_flag() {
        let x = mat(&[&[1.0, 0.1], &[-1.0, 0.0], &[0.2, 1.0], &[0.0, -1.3], &[0.5, 0.5]]);
        let d = decompose(&x, None, &ShapeMatrix::identity(2)).unwrap();
        assert!(d.theta_estimated);
        assert_eq!(d.theta_used.len(), 2);
    }
}
