//! Minkowski four-vectors and antisymmetric field tensors.
//!
//! Natural units (c = 1), metric η = diag(1, -1, -1, -1). Vectors are stored
//! with contravariant components; covariant components are produced on demand
//! with [`lower_index`].

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal of the metric tensor.
pub const METRIC: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

/// A four-vector with components (t, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const ZERO: FourVector = FourVector([0.0; 4]);

    pub const fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        FourVector([t, x, y, z])
    }

    /// Unit time-like vector at rest.
    pub const fn rest() -> Self {
        FourVector([1.0, 0.0, 0.0, 0.0])
    }

    /// On-shell four-velocity with the given spatial part.
    pub fn from_spatial_velocity(v: [f64; 3]) -> Self {
        let u0 = (1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        FourVector([u0, v[0], v[1], v[2]])
    }

    pub fn t(&self) -> f64 {
        self.0[0]
    }

    pub fn spatial(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }

    pub fn dot(&self, other: &FourVector) -> f64 {
        minkowski_dot(self, other)
    }

    /// Squared Minkowski norm u·u.
    pub fn norm_sq(&self) -> f64 {
        minkowski_dot(self, self)
    }

    pub fn lower(&self) -> FourVector {
        lower_index(self)
    }

    /// Euclidean norm of the four components (a coordinate-dependent size
    /// measure used for tolerances and diagnostics).
    pub fn euclidean_norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

/// a⁰b⁰ − a¹b¹ − a²b² − a³b³.
#[inline]
pub fn minkowski_dot(a: &FourVector, b: &FourVector) -> f64 {
    a.0[0] * b.0[0] - a.0[1] * b.0[1] - a.0[2] * b.0[2] - a.0[3] * b.0[3]
}

/// Flip the sign of the spatial components. An involution.
#[inline]
pub fn lower_index(a: &FourVector) -> FourVector {
    FourVector([a.0[0], -a.0[1], -a.0[2], -a.0[3]])
}

/// Rescale a time-like vector onto the unit mass shell.
pub fn renormalize_velocity(u: &FourVector) -> Result<FourVector> {
    let norm = u.norm_sq();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::NonTimelikeVelocity { norm });
    }
    Ok(*u * (1.0 / norm.sqrt()))
}

impl Index<usize> for FourVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for FourVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector([
            self.0[0] + o.0[0],
            self.0[1] + o.0[1],
            self.0[2] + o.0[2],
            self.0[3] + o.0[3],
        ])
    }
}

impl AddAssign for FourVector {
    fn add_assign(&mut self, o: FourVector) {
        *self = *self + o;
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector([
            self.0[0] - o.0[0],
            self.0[1] - o.0[1],
            self.0[2] - o.0[2],
            self.0[3] - o.0[3],
        ])
    }
}

impl SubAssign for FourVector {
    fn sub_assign(&mut self, o: FourVector) {
        *self = *self - o;
    }
}

impl Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, k: f64) -> FourVector {
        FourVector([self.0[0] * k, self.0[1] * k, self.0[2] * k, self.0[3] * k])
    }
}

impl Mul<FourVector> for f64 {
    type Output = FourVector;
    fn mul(self, v: FourVector) -> FourVector {
        v * self
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        FourVector([-self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }
}

/// ∂_l F_{μν}, indexed `[l][mu][nu]`.
pub type FaradayGradient = [[[f64; 4]; 4]; 4];

/// ∂_l ∂_m F_{μν}, indexed `[l][m][mu][nu]`.
pub type FaradaySecondGradient = [[[[f64; 4]; 4]; 4]; 4];

/// Covariant antisymmetric tensor F_{μν}. Antisymmetry is exact: only the
/// upper triangle is ever written, the lower one is its negation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaradayTensor {
    m: [[f64; 4]; 4],
}

impl FaradayTensor {
    pub const ZERO: FaradayTensor = FaradayTensor { m: [[0.0; 4]; 4] };

    /// Build from the six independent entries (F01, F02, F03, F12, F13, F23).
    pub fn from_components(c: [f64; 6]) -> Self {
        let [f01, f02, f03, f12, f13, f23] = c;
        FaradayTensor {
            m: [
                [0.0, f01, f02, f03],
                [-f01, 0.0, f12, f13],
                [-f02, -f12, 0.0, f23],
                [-f03, -f13, -f23, 0.0],
            ],
        }
    }

    /// Build from the upper triangle of `m`; the diagonal and lower triangle
    /// are ignored.
    pub fn from_upper(m: &[[f64; 4]; 4]) -> Self {
        Self::from_components([m[0][1], m[0][2], m[0][3], m[1][2], m[1][3], m[2][3]])
    }

    /// Lab-frame electric and magnetic fields: F_{0i} = E_i, F_{ij} = −ε_{ijk}B_k.
    pub fn from_fields(e: [f64; 3], b: [f64; 3]) -> Self {
        Self::from_components([e[0], e[1], e[2], -b[2], b[1], -b[0]])
    }

    pub fn components(&self) -> [f64; 6] {
        let m = &self.m;
        [m[0][1], m[0][2], m[0][3], m[1][2], m[1][3], m[2][3]]
    }

    pub fn electric(&self) -> [f64; 3] {
        [self.m[0][1], self.m[0][2], self.m[0][3]]
    }

    pub fn magnetic(&self) -> [f64; 3] {
        [-self.m[2][3], self.m[1][3], -self.m[1][2]]
    }

    #[inline]
    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        self.m[mu][nu]
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    /// F_{μν} v^ν — covariant result.
    pub fn contract(&self, v: &FourVector) -> FourVector {
        let mut out = [0.0; 4];
        for (mu, o) in out.iter_mut().enumerate() {
            *o = self.m[mu][0] * v.0[0]
                + self.m[mu][1] * v.0[1]
                + self.m[mu][2] * v.0[2]
                + self.m[mu][3] * v.0[3];
        }
        FourVector(out)
    }

    /// F^μ_ν v^ν — contravariant result.
    pub fn contract_raised(&self, v: &FourVector) -> FourVector {
        lower_index(&self.contract(v))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_components(self.components().map(|c| c * k))
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..4).all(|i| (0..4).all(|j| self.m[i][j] == -self.m[j][i]))
    }

    pub fn max_abs(&self) -> f64 {
        self.components().iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }
}

impl Add for FaradayTensor {
    type Output = FaradayTensor;
    fn add(self, o: FaradayTensor) -> FaradayTensor {
        let a = self.components();
        let b = o.components();
        FaradayTensor::from_components(std::array::from_fn(|i| a[i] + b[i]))
    }
}
