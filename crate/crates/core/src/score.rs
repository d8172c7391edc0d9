//! Score functions on (0, 1) for the rank statistics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_checked;
use crate::radial::RadialModel;
use crate::scalar::Scalar;
use crate::special::{beta_inv_pair, gamma_inv};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameter", rename_all = "snake_case")]
pub enum ScoreKind<T> {
    /// `K ≡ 1`.
    Sign,
    /// `K(u) = u^a`; `a = 1` is Wilcoxon, `a = 2` Spearman.
    Power(T),
    /// `K(u) = Ψ_k⁻¹(u)`, the χ²_k quantile.
    VanDerWaerden,
    /// Student(ν) optimal score `(k+ν) B⁻¹(u)` with `B` the Beta(k/2, ν/2) law.
    Student(T),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreFunction<T> {
    kind: ScoreKind<T>,
    k: usize,
}

impl<T: Scalar> ScoreFunction<T> {
    pub fn new(kind: ScoreKind<T>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::DimensionRange { k, min: 2, max: usize::MAX });
        }
        match kind {
            ScoreKind::Power(a) if !(a >= T::zero() && a.is_finite()) => {
                Err(Error::InvalidParameter(format!("power score exponent {a} must be >= 0")))
            }
            ScoreKind::Student(nu) if !(nu > T::zero() && nu.is_finite()) => {
                Err(Error::InvalidParameter(format!("Student score nu = {nu} must be positive")))
            }
            _ => Ok(Self { kind, k }),
        }
    }

    pub fn sign(k: usize) -> Self {
        Self { kind: ScoreKind::Sign, k: k.max(2) }
    }

    pub fn wilcoxon(k: usize) -> Self {
        Self { kind: ScoreKind::Power(T::one()), k: k.max(2) }
    }

    pub fn spearman(k: usize) -> Self {
        Self { kind: ScoreKind::Power(T::lit(2.0)), k: k.max(2) }
    }

    pub fn van_der_waerden(k: usize) -> Result<Self> {
        Self::new(ScoreKind::VanDerWaerden, k)
    }

    pub fn student(k: usize, nu: T) -> Result<Self> {
        Self::new(ScoreKind::Student(nu), k)
    }

    /// Parses `sign`, `wilcoxon`, `spearman`, `power:a`, `vdw`, `tnu:ν`.
    pub fn parse(s: &str, k: usize) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let param = |t: &str| -> Result<T> {
            t.parse::<f64>()
                .map(T::lit)
                .map_err(|_| Error::Parse(format!("bad score parameter '{t}' in '{s}'")))
        };
        let kind = match s.split_once(':') {
            None => match s.as_str() {
                "sign" => ScoreKind::Sign,
                "wilcoxon" => ScoreKind::Power(T::one()),
                "spearman" => ScoreKind::Power(T::lit(2.0)),
                "vdw" | "vanderwaerden" => ScoreKind::VanDerWaerden,
                _ => return Err(Error::Parse(format!("unknown score '{s}'"))),
            },
            Some(("power", a)) => ScoreKind::Power(param(a)?),
            Some(("tnu", nu)) => ScoreKind::Student(param(nu)?),
            Some(_) => return Err(Error::Parse(format!("unknown score '{s}'"))),
        };
        Self::new(kind, k)
    }

    pub fn kind(&self) -> ScoreKind<T> {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    /// Errors unless the score can be applied to `k`-dimensional data.
    /// Sign and power scores do not depend on `k`.
    pub fn check_dim(&self, k: usize) -> Result<()> {
        match self.kind {
            ScoreKind::VanDerWaerden | ScoreKind::Student(_) if self.k != k => {
                Err(Error::ScoreDimension { score: self.k, data: k })
            }
            _ => Ok(()),
        }
    }

    /// The same score rebuilt for dimension `k`.
    pub fn with_dim(&self, k: usize) -> Result<Self> {
        Self::new(self.kind, k)
    }

    pub fn value(&self, u: T) -> Result<T> {
        if !(u > T::zero() && u < T::one()) {
            return Err(Error::OutOfUnitInterval { value: u.to_f64_lossy() });
        }
        self.value_pair(u, T::one() - u)
    }

    /// `K(u)` given `u` and `1 - u`.
    pub fn value_pair(&self, u: T, c: T) -> Result<T> {
        let k = T::from_usize_lossy(self.k);
        let two = T::lit(2.0);
        match self.kind {
            ScoreKind::Sign => Ok(T::one()),
            ScoreKind::Power(a) => Ok(if a == T::zero() { T::one() } else { u.powf(a) }),
            ScoreKind::VanDerWaerden => Ok(two * gamma_inv(k / two, u, c)?),
            ScoreKind::Student(nu) => {
                let (b, _) = beta_inv_pair(k / two, nu / two, u, c)?;
                Ok((k + nu) * b)
            }
        }
    }

    /// `K(i/(n+1))` for `i = 1..=n`.
    pub fn rank_table(&self, n: usize) -> Result<Vec<T>> {
        let denom = T::from_usize_lossy(n + 1);
        (1..=n)
            .map(|i| {
                let u = T::from_usize_lossy(i) / denom;
                let c = T::from_usize_lossy(n + 1 - i) / denom;
                self.value_pair(u, c)
            })
            .collect()
    }

    /// `(E[K(U)], E[K²(U)])` in closed form.
    pub fn moments(&self) -> (T, T) {
        let k = T::from_usize_lossy(self.k);
        let one = T::one();
        let two = T::lit(2.0);
        match self.kind {
            ScoreKind::Sign => (one, one),
            ScoreKind::Power(a) => (one / (a + one), one / (two * a + one)),
            ScoreKind::VanDerWaerden => (k, k * (k + two)),
            ScoreKind::Student(nu) => (k, k * (k + two) * (k + nu) / (k + nu + two)),
        }
    }

    /// `(E[K(U)], E[K²(U)])` by quadrature.
    pub fn moments_quadrature(&self) -> Result<(T, T)> {
        let m1 = integrate_checked(|u, c| self.value_pair(u, c))?;
        let m2 = integrate_checked(|u, c| self.value_pair(u, c).map(|v| v * v))?;
        Ok((m1, m2))
    }

    /// `J_k(K; g₁) = ∫ K(u) K_{g₁}(u) du`.
    pub fn cross_information(&self, g1: &RadialModel<T>) -> Result<T> {
        self.check_dim(g1.dim())?;
        let v = integrate_checked(|u, c| Ok(self.value_pair(u, c)? * g1.matched_score_pair(u, c)?))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidParameter(format!("cross-information of {self} at {} diverges", g1.family())))
        }
    }
}

impl<T: Scalar> fmt::Display for ScoreFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ScoreKind::Sign => write!(f, "sign"),
            ScoreKind::Power(a) if a == T::one() => write!(f, "wilcoxon"),
            ScoreKind::Power(a) if a == T::lit(2.0) => write!(f, "spearman"),
            ScoreKind::Power(a) => write!(f, "power:{a}"),
            ScoreKind::VanDerWaerden => write!(f, "vdw"),
            ScoreKind::Student(nu) => write!(f, "tnu:{nu}"),
        }
    }
}
