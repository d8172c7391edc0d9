//! Small dense matrices, the vec / vech stacking operators, the commutation
//! matrix, and the shape-information matrices built from them.
//!
//! `vec` stacks columns (column-major). The reduced half-vectorization
//! `vech1` lists the upper triangle row by row and drops the (1,1) entry:
//! `(v12, ..., v1k, v22, v23, ..., vkk)`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest dimension accepted by the dense operators (k² × k² stays small).
pub const MAX_DIM: usize = 25;

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                write!(f, "{:>12.6?} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_slice(rows: usize, cols: usize, values: &[T]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension {
                what: "matrix entries",
                expected: rows * cols,
                found: values.len(),
            });
        }
        Ok(Self { rows, cols, data: values.to_vec() })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Dimension { what: "matrix row", expected: c, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(l);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d = *d + a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (other.rows, other.cols);
        Self::from_fn(self.rows * p, self.cols * q, |i, j| {
            self[(i / p, j / q)] * other[(i % p, j % q)]
        })
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// ‖A − Aᵀ‖∞ entrywise.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, rel_tol: T) -> bool {
        self.is_square() && self.asymmetry() <= rel_tol * self.max_abs()
    }

    pub fn symmetrize(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    /// Column-major stacking.
    pub fn vec(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    pub fn from_vec(k: usize, values: &[T]) -> Result<Self> {
        if values.len() != k * k {
            return Err(Error::Dimension { what: "vec length", expected: k * k, found: values.len() });
        }
        Ok(Self::from_fn(k, k, |i, j| values[i + j * k]))
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
    /// Returns eigenvalues (ascending) and the matrix whose columns are the
    /// corresponding orthonormal eigenvectors.
    pub fn symmetric_eigen(&self) -> (Vec<T>, Self) {
        assert!(self.is_square(), "eigen-decomposition of a non-square matrix");
        let n = self.rows;
        let mut a = self.symmetrize();
        let mut v = Self::identity(n);
        let eps = T::epsilon();
        let scale = a.frobenius_norm();
        for _sweep in 0..100 {
            let off: T = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum::<T>()
                .sqrt();
            if off <= eps * scale || scale == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for r in 0..n {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        a[(r, p)] = c * arp - s * arq;
                        a[(r, q)] = s * arp + c * arq;
                    }
                    for r in 0..n {
                        let apr = a[(p, r)];
                        let aqr = a[(q, r)];
                        a[(p, r)] = c * apr - s * aqr;
                        a[(q, r)] = s * apr + c * aqr;
                    }
                    for r in 0..n {
                        let vrp = v[(r, p)];
                        let vrq = v[(r, q)];
                        v[(r, p)] = c * vrp - s * vrq;
                        v[(r, q)] = s * vrp + c * vrq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Self::from_fn(n, n, |r, c| v[(r, order[c])]);
        (values, vectors)
    }

    /// Inverse via Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Dimension { what: "inverse of non-square", expected: self.rows, found: self.cols });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap())
                .unwrap();
            let pv = a[(pivot, col)];
            if pv.abs() <= T::epsilon() * scale * T::from_usize_lossy(n) {
                return Err(Error::Singular(format!("pivot {:e} at column {col}", pv.to_f64_lossy())));
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                    inv.data.swap(pivot * n + j, col * n + j);
                }
            }
            let d = T::one() / a[(col, col)];
            for j in 0..n {
                a[(col, j)] = a[(col, j)] * d;
                inv[(col, j)] = inv[(col, j)] * d;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[(i, col)];
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    a[(i, j)] = a[(i, j)] - f * a[(col, j)];
                    inv[(i, j)] = inv[(i, j)] - f * inv[(col, j)];
                }
            }
        }
        Ok(inv)
    }

    /// `x` with `A x = b` for symmetric positive-definite `A`, by Cholesky.
    pub fn solve_spd(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for p in 0..j {
                d = d - l[(j, p)] * l[(j, p)];
            }
            if d <= T::zero() {
                return Err(Error::Singular(format!("Cholesky breakdown at row {j}")));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for p in 0..j {
                    s = s - l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / d;
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for p in 0..i {
                y[i] = y[i] - l[(i, p)] * y[p];
            }
            y[i] = y[i] / l[(i, i)];
        }
        for i in (0..n).rev() {
            for p in (i + 1)..n {
                y[i] = y[i] - l[(p, i)] * y[p];
            }
            y[i] = y[i] / l[(i, i)];
        }
        Ok(y)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: &Matrix<T>) -> Matrix<T> {
        self.matmul(rhs)
    }
}

fn check_dim(k: usize, min: usize) -> Result<()> {
    if k < min || k > MAX_DIM {
        Err(Error::DimensionRange { k, min, max: MAX_DIM })
    } else {
        Ok(())
    }
}

/// Symmetric square root of a symmetric positive-definite matrix.
///
/// Eigenvalues below `1e-12 · λ_max` are rejected rather than clamped.
pub fn sym_sqrt<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    sym_power(a, T::lit(0.5))
}

/// Inverse of the symmetric square root.
pub fn sym_inv_sqrt<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    sym_power(a, T::lit(-0.5))
}

fn sym_power<T: Scalar>(a: &Matrix<T>, power: T) -> Result<Matrix<T>> {
    if !a.is_square() {
        return Err(Error::Dimension { what: "square matrix", expected: a.rows(), found: a.cols() });
    }
    if !a.is_symmetric(T::lit(1e-12)) {
        return Err(Error::NotSymmetric { asymmetry: a.asymmetry().to_f64_lossy() });
    }
    let (values, vectors) = a.symmetric_eigen();
    let lmax = values.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let lmin = values[0];
    if lmin <= T::lit(1e-12) * lmax {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: lmin.to_f64_lossy() });
    }
    let n = a.rows();
    let mut out = Matrix::zeros(n, n);
    for (c, &lam) in values.iter().enumerate() {
        let w = lam.powf(power);
        for i in 0..n {
            let vi = vectors[(i, c)] * w;
            for j in 0..n {
                out[(i, j)] = out[(i, j)] + vi * vectors[(j, c)];
            }
        }
    }
    Ok(out.symmetrize())
}

/// A validated shape matrix: symmetric positive definite with `V[0][0] = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix<T>", into = "Matrix<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ShapeMatrix<T: Scalar> {
    matrix: Matrix<T>,
}

impl<T: Scalar> ShapeMatrix<T> {
    pub fn new(matrix: Matrix<T>) -> Result<Self> {
        check_dim(matrix.rows(), 1)?;
        if !matrix.is_square() {
            return Err(Error::Dimension { what: "shape matrix", expected: matrix.rows(), found: matrix.cols() });
        }
        if !matrix.is_symmetric(T::lit(1e-12)) {
            return Err(Error::NotSymmetric { asymmetry: matrix.asymmetry().to_f64_lossy() });
        }
        if matrix[(0, 0)] != T::one() {
            return Err(Error::ShapeNormalization { found: matrix[(0, 0)].to_f64_lossy() });
        }
        let (values, _) = matrix.symmetric_eigen();
        if values[0] <= T::zero() {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: values[0].to_f64_lossy() });
        }
        Ok(Self { matrix: matrix.symmetrize() })
    }

    /// Rescales a symmetric positive-definite matrix to `V[0][0] = 1`.
    pub fn normalized(matrix: Matrix<T>) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() == 0 {
            return Err(Error::Dimension { what: "shape matrix", expected: matrix.rows(), found: matrix.cols() });
        }
        let v11 = matrix[(0, 0)];
        if v11 <= T::zero() {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: v11.to_f64_lossy() });
        }
        let mut m = matrix.scale(T::one() / v11);
        m[(0, 0)] = T::one();
        Self::new(m)
    }

    pub fn identity(k: usize) -> Self {
        Self { matrix: Matrix::identity(k) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.matrix == Matrix::identity(self.dim())
    }
}

impl<T: Scalar> TryFrom<Matrix<T>> for ShapeMatrix<T> {
    type Error = Error;
    fn try_from(m: Matrix<T>) -> Result<Self> {
        Self::new(m)
    }
}

impl<T: Scalar> From<ShapeMatrix<T>> for Matrix<T> {
    fn from(s: ShapeMatrix<T>) -> Matrix<T> {
        s.matrix
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackKind {
    /// All k² entries, column-major.
    Vec,
    /// Upper triangle including (1,1), row by row.
    VechFull,
    /// Upper triangle row by row without (1,1).
    Vech1,
}

impl StackKind {
    pub fn len(self, k: usize) -> usize {
        match self {
            StackKind::Vec => k * k,
            StackKind::VechFull => k * (k + 1) / 2,
            StackKind::Vech1 => k * (k + 1) / 2 - 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackedVector<T> {
    pub kind: StackKind,
    pub k: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> StackedVector<T> {
    pub fn new(kind: StackKind, k: usize, values: Vec<T>) -> Result<Self> {
        let expected = kind.len(k);
        if values.len() != expected {
            return Err(Error::Dimension { what: "stacked vector", expected, found: values.len() });
        }
        Ok(Self { kind, k, values })
    }

    pub fn stack(kind: StackKind, m: &Matrix<T>) -> Self {
        let k = m.rows();
        let values = match kind {
            StackKind::Vec => m.vec(),
            StackKind::VechFull => upper_indices(k, false).map(|(r, s)| m[(r, s)]).collect(),
            StackKind::Vech1 => upper_indices(k, true).map(|(r, s)| m[(r, s)]).collect(),
        };
        Self { kind, k, values }
    }

    /// Rebuilds the (symmetric, for the vech kinds) matrix. `Vech1` restores
    /// the (1,1) entry from `v11`.
    pub fn unstack(&self, v11: T) -> Matrix<T> {
        let k = self.k;
        match self.kind {
            StackKind::Vec => Matrix::from_vec(k, &self.values).expect("length checked"),
            StackKind::VechFull | StackKind::Vech1 => {
                let skip = self.kind == StackKind::Vech1;
                let mut m = Matrix::zeros(k, k);
                if skip {
                    m[(0, 0)] = v11;
                }
                for ((r, s), &x) in upper_indices(k, skip).zip(&self.values) {
                    m[(r, s)] = x;
                    m[(s, r)] = x;
                }
                m
            }
        }
    }
}

/// Upper-triangular index pairs row by row, optionally without (0,0).
pub fn upper_indices(k: usize, skip_first: bool) -> impl Iterator<Item = (usize, usize)> {
    (0..k)
        .flat_map(move |r| (r..k).map(move |s| (r, s)))
        .filter(move |&(r, s)| !(skip_first && r == 0 && s == 0))
}

/// Dimension `k(k+1)/2 − 1` of the reduced shape parameter.
pub fn shape_df(k: usize) -> usize {
    k * (k + 1) / 2 - 1
}

/// Column-major `vec(A)` together with the commutation matrix `K_k`
/// satisfying `K_k vec(A) = vec(Aᵀ)`.
pub fn vec_and_commutation<T: Scalar>(a: &Matrix<T>) -> (StackedVector<T>, Matrix<T>) {
    let k = a.rows();
    (StackedVector::stack(StackKind::Vec, a), commutation(k))
}

pub fn commutation<T: Scalar>(k: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(k * k, k * k);
    for i in 0..k {
        for j in 0..k {
            m[(i + j * k, j + i * k)] = T::one();
        }
    }
    m
}

/// `J_k = (vec I_k)(vec I_k)ᵀ`.
pub fn vec_identity_outer<T: Scalar>(k: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(k * k, k * k);
    for i in 0..k {
        for j in 0..k {
            m[(i + i * k, j + j * k)] = T::one();
        }
    }
    m
}

/// `J_k^⊥ = I_{k²} − (1/k) J_k`.
pub fn trace_free_projector<T: Scalar>(k: usize) -> Matrix<T> {
    let j = vec_identity_outer::<T>(k).scale(T::one() / T::from_usize_lossy(k));
    &Matrix::identity(k * k) - &j
}

/// The reduced stacking operators `(M_k, N_k)`, both of shape
/// `(k(k+1)/2 − 1) × k²`: `M_kᵀ vech1(v) = vec(v)` for symmetric `v` with
/// `v₁₁ = 0`, and `N_k vec(v) = vech1(v)` for symmetric `v`.
pub fn reduced_stack_operators<T: Scalar>(k: usize) -> Result<(Matrix<T>, Matrix<T>)> {
    check_dim(k, 2)?;
    let p = shape_df(k);
    let mut m = Matrix::zeros(p, k * k);
    let mut n = Matrix::zeros(p, k * k);
    for (row, (r, s)) in upper_indices(k, true).enumerate() {
        m[(row, r + s * k)] = T::one();
        m[(row, s + r * k)] = T::one();
        n[(row, r + s * k)] = T::one();
    }
    Ok((m, n))
}

/// `(V ⊗ V)^{-1/2} = V^{-1/2} ⊗ V^{-1/2}`.
pub fn kron_inv_sqrt<T: Scalar>(v: &ShapeMatrix<T>) -> Result<Matrix<T>> {
    let r = sym_inv_sqrt(v.matrix())?;
    Ok(r.kron(&r))
}

/// `Υ_k^{-1}(V) = (1/(4k(k+2))) M_k (V⊗V)^{-1/2} [I + K_k − (2/k) J_k] (V⊗V)^{-1/2} M_kᵀ`.
pub fn upsilon_inverse<T: Scalar>(v: &ShapeMatrix<T>) -> Result<Matrix<T>> {
    let k = v.dim();
    let (m, _) = reduced_stack_operators::<T>(k)?;
    let kf = T::from_usize_lossy(k);
    let w = kron_inv_sqrt(v)?;
    let mid = &(&Matrix::identity(k * k) + &commutation(k))
        - &vec_identity_outer::<T>(k).scale(T::lit(2.0) / kf);
    let left = m.matmul(&w);
    let out = left.matmul(&mid).matmul(&left.transpose());
    Ok(out.scale(T::one() / (T::lit(4.0) * kf * (kf + T::lit(2.0)))).symmetrize())
}

/// Efficient information for shape, `Γ* = J_k(f₁) · Υ_k^{-1}(V)`.
pub fn efficient_info_shape<T: Scalar>(v: &ShapeMatrix<T>, radial_info: T) -> Result<Matrix<T>> {
    if !(radial_info > T::zero()) {
        return Err(Error::InvalidParameter(format!("radial information {radial_info} must be positive")));
    }
    Ok(upsilon_inverse(v)?.scale(radial_info))
}

/// Right-hand side of the identity for `(1/(k(k+2))) M_kᵀ Υ_k(V) M_k`:
/// `[I + K](V⊗V) − 2(V⊗V)e₁(vec V)ᵀ − 2(vec V)e₁ᵀ(V⊗V) + 2(vec V)(vec V)ᵀ`.
pub fn upsilon_identity_rhs<T: Scalar>(v: &Matrix<T>) -> Matrix<T> {
    let k = v.rows();
    let k2 = k * k;
    let vv = v.kron(v);
    let vecv = v.vec();
    let two = T::lit(2.0);
    let base = (&Matrix::identity(k2) + &commutation(k)).matmul(&vv);
    Matrix::from_fn(k2, k2, |i, j| {
        // (V⊗V) e₁ is the first column; e₁ᵀ(V⊗V) the first row
        base[(i, j)] - two * vv[(i, 0)] * vecv[j] - two * vecv[i] * vv[(0, j)]
            + two * vecv[i] * vecv[j]
    })
}

/// Frobenius residual between `(1/(k(k+2))) M_kᵀ Υ_k(V) M_k` and its
/// closed form, for symmetric positive-definite `V` with `V₁₁ = 1`.
pub fn lemma31_residual<T: Scalar>(v: &ShapeMatrix<T>) -> Result<T> {
    let k = v.dim();
    let kf = T::from_usize_lossy(k);
    let (m, _) = reduced_stack_operators::<T>(k)?;
    let upsilon = upsilon_inverse(v)?.inverse()?;
    let lhs = m.transpose().matmul(&upsilon).matmul(&m).scale(T::one() / (kf * (kf + T::lit(2.0))));
    let rhs = upsilon_identity_rhs(v.matrix());
    Ok((&lhs - &rhs).frobenius_norm())
}

/// `Γ*` reconstructed from the closed-form identity: since `N_k M_kᵀ = I`,
/// `Υ_k(V) = k(k+2) N_k · RHS · N_kᵀ`, and `Γ* = J · Υ_k(V)^{-1}`.
pub fn efficient_info_via_identity<T: Scalar>(v: &ShapeMatrix<T>, radial_info: T) -> Result<Matrix<T>> {
    let k = v.dim();
    let kf = T::from_usize_lossy(k);
    let (_, n) = reduced_stack_operators::<T>(k)?;
    let rhs = upsilon_identity_rhs(v.matrix());
    let upsilon = n.matmul(&rhs).matmul(&n.transpose()).scale(kf * (kf + T::lit(2.0)));
    Ok(upsilon.inverse()?.scale(radial_info).symmetrize())
}
