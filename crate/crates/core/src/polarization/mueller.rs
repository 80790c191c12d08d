use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};
use crate::numerics::Real;

/// Stokes vector `[s0, s1, s2, s3]`.
///
/// `s1` is horizontal minus vertical, `s2` is +45 deg minus -45 deg and `s3`
/// is right minus left circular.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesVector<T = f64>(pub [T; 4]);

impl<T: Real> StokesVector<T> {
    pub fn new(s0: T, s1: T, s2: T, s3: T) -> Self {
        Self([s0, s1, s2, s3])
    }

    pub fn s0(&self) -> T {
        self.0[0]
    }

    /// Magnitude of the polarized part, `sqrt(s1^2 + s2^2 + s3^2)`.
    pub fn polarized_intensity(&self) -> T {
        (self.0[1] * self.0[1] + self.0[2] * self.0[2] + self.0[3] * self.0[3]).sqrt()
    }

    pub fn map<U>(self, f: impl Fn(T) -> U) -> StokesVector<U> {
        StokesVector(self.0.map(f))
    }
}

impl StokesVector<f64> {
    pub fn unpolarized(intensity: f64) -> Self {
        Self([intensity, 0.0, 0.0, 0.0])
    }

    /// Fully polarized horizontal state, the laser's native polarization.
    pub fn horizontal() -> Self {
        Self([1.0, 1.0, 0.0, 0.0])
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.0[0] >= -tol && self.polarized_intensity() <= self.0[0] * (1.0 + 1e-9) + tol
    }
}

/// Degree of polarization of `s`.
pub fn degree_of_polarization(s: &StokesVector) -> Result<f64> {
    if s.0[0] <= 0.0 {
        return Err(Error::ZeroIntensity(s.0[0]));
    }
    Ok(s.polarized_intensity() / s.0[0])
}

/// 4x4 Mueller matrix, indexed `[row][col]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuellerMatrix<T = f64> {
    pub m: [[T; 4]; 4],
}

impl<T: Real> MuellerMatrix<T> {
    pub fn from_rows(m: [[T; 4]; 4]) -> Self {
        Self { m }
    }

    pub fn zero() -> Self {
        Self {
            m: [[T::zero(); 4]; 4],
        }
    }

    pub fn identity() -> Self {
        Self::diag([T::one(); 4])
    }

    pub fn diag(d: [T; 4]) -> Self {
        let mut out = Self::zero();
        for i in 0..4 {
            out.m[i][i] = d[i];
        }
        out
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            m: self.m.map(|row| row.map(|x| x * k)),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            m: std::array::from_fn(|i| std::array::from_fn(|j| self.m[j][i])),
        }
    }

    pub fn row(&self, i: usize) -> [T; 4] {
        self.m[i]
    }

    pub fn col(&self, j: usize) -> [T; 4] {
        std::array::from_fn(|i| self.m[i][j])
    }

    /// Outer product `u v^T`.
    pub fn outer(u: [T; 4], v: [T; 4]) -> Self {
        Self {
            m: std::array::from_fn(|i| std::array::from_fn(|j| u[i] * v[j])),
        }
    }

    /// Row-major flattening, index `4*row + col`.
    pub fn to_vec16(&self) -> [T; 16] {
        std::array::from_fn(|k| self.m[k / 4][k % 4])
    }

    pub fn from_vec16(v: &[T]) -> Self {
        Self {
            m: std::array::from_fn(|i| std::array::from_fn(|j| v[4 * i + j])),
        }
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> MuellerMatrix<U> {
        MuellerMatrix {
            m: self.m.map(|row| row.map(&f)),
        }
    }

    pub fn apply(&self, s: &StokesVector<T>) -> StokesVector<T> {
        let mut out = [T::zero(); 4];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..4 {
                *o += self.m[i][j] * s.0[j];
            }
        }
        StokesVector(out)
    }
}

impl MuellerMatrix<f64> {
    pub fn values(&self) -> [[f64; 4]; 4] {
        self.m
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|x| x.is_finite())
    }
}

impl<T: Real> Mul for MuellerMatrix<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.m[i][k];
                for j in 0..4 {
                    out.m[i][j] += a * rhs.m[k][j];
                }
            }
        }
        out
    }
}

impl<T: Real> Mul<StokesVector<T>> for MuellerMatrix<T> {
    type Output = StokesVector<T>;
    fn mul(self, rhs: StokesVector<T>) -> StokesVector<T> {
        self.apply(&rhs)
    }
}

impl<T: Real> Add for MuellerMatrix<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            m: std::array::from_fn(|i| std::array::from_fn(|j| self.m[i][j] + rhs.m[i][j])),
        }
    }
}

impl<T: Real> Sub for MuellerMatrix<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            m: std::array::from_fn(|i| std::array::from_fn(|j| self.m[i][j] - rhs.m[i][j])),
        }
    }
}

impl<T> Index<(usize, usize)> for MuellerMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.m[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for MuellerMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.m[i][j]
    }
}
