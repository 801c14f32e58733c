//! Prescribed analytic external fields.
//!
//! Potentials are returned with covariant components A_μ and the field tensor
//! is F_{μν} = ∂_μ A_ν − ∂_ν A_μ, with ∂_μ = ∂/∂r^μ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    lower_index, minkowski_dot, FaradayGradient, FaradaySecondGradient, FaradayTensor, FourVector,
};

/// Linearly polarized plane wave with a compactly supported envelope.
///
/// A_μ(r) = a0 ε_μ f(φ − φ_s), φ = k·r, where f(ξ) = W(ξ/L) sin ξ on
/// [0, L] and zero elsewhere. W is a symmetric bump built from the septic
/// smoothstep, so the potential is C³ and the field tensor C² everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWavePulse {
    amplitude: f64,
    wave: FourVector,
    polarization: FourVector,
    phase_start: f64,
    phase_width: f64,
}

impl PlaneWavePulse {
    /// `wave` and `polarization` are contravariant; the wave vector must be
    /// null and orthogonal to the polarization.
    pub fn new(
        amplitude: f64,
        wave: FourVector,
        polarization: FourVector,
        phase_start: f64,
        phase_width: f64,
    ) -> Result<Self> {
        let kk = wave.euclidean_norm();
        if !(kk > 0.0) || !wave.is_finite() || !polarization.is_finite() {
            return Err(Error::DomainError("wave vector must be finite and nonzero".into()));
        }
        if minkowski_dot(&wave, &wave).abs() > 1e-12 * kk * kk {
            return Err(Error::DomainError("wave vector must be null".into()));
        }
        if minkowski_dot(&wave, &polarization).abs() > 1e-12 * kk * polarization.euclidean_norm() {
            return Err(Error::DomainError(
                "polarization must be orthogonal to the wave vector".into(),
            ));
        }
        if !(phase_width > 0.0) || !phase_start.is_finite() || !amplitude.is_finite() {
            return Err(Error::DomainError("window width must be positive".into()));
        }
        Ok(PlaneWavePulse {
            amplitude,
            wave,
            polarization,
            phase_start,
            phase_width,
        })
    }

    /// Pulse travelling along +x with frequency ω, polarized along y.
    pub fn along_x(amplitude: f64, omega: f64, phase_start: f64, phase_width: f64) -> Result<Self> {
        Self::new(
            amplitude,
            FourVector::new(omega, omega, 0.0, 0.0),
            FourVector::new(0.0, 0.0, 1.0, 0.0),
            phase_start,
            phase_width,
        )
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn wave(&self) -> FourVector {
        self.wave
    }
    pub fn polarization(&self) -> FourVector {
        self.polarization
    }
    pub fn phase_start(&self) -> f64 {
        self.phase_start
    }
    pub fn phase_width(&self) -> f64 {
        self.phase_width
    }

    pub fn phase(&self, r: &FourVector) -> f64 {
        minkowski_dot(&self.wave, r)
    }

    /// f, f′, f″, f‴ at window coordinate ξ.
    fn profile(&self, xi: f64) -> [f64; 4] {
        let l = self.phase_width;
        if !(xi > 0.0 && xi < l) {
            return [0.0; 4];
        }
        let w = window(xi / l);
        let g = [w[0], w[1] / l, w[2] / (l * l), w[3] / (l * l * l)];
        let (s, c) = xi.sin_cos();
        [
            g[0] * s,
            g[1] * s + g[0] * c,
            g[2] * s + 2.0 * g[1] * c - g[0] * s,
            g[3] * s + 3.0 * g[2] * c - 3.0 * g[1] * s - g[0] * c,
        ]
    }

    fn bivector(&self) -> [[f64; 4]; 4] {
        let k = lower_index(&self.wave);
        let e = lower_index(&self.polarization);
        std::array::from_fn(|mu| std::array::from_fn(|nu| k[mu] * e[nu] - k[nu] * e[mu]))
    }
}

/// Symmetric bump on [0, 1] and its first three derivatives.
fn window(x: f64) -> [f64; 4] {
    if x <= 0.5 {
        let s = smoothstep7(2.0 * x);
        [s[0], 2.0 * s[1], 4.0 * s[2], 8.0 * s[3]]
    } else {
        let s = smoothstep7(2.0 - 2.0 * x);
        [s[0], -2.0 * s[1], 4.0 * s[2], -8.0 * s[3]]
    }
}

/// 35t⁴ − 84t⁵ + 70t⁶ − 20t⁷ and derivatives; flat to third order at both ends.
fn smoothstep7(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        t2 * t2 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t))),
        t3 * (140.0 + t * (-420.0 + t * (420.0 - 140.0 * t))),
        t2 * (420.0 + t * (-1680.0 + t * (2100.0 - 840.0 * t))),
        t * (840.0 + t * (-5040.0 + t * (8400.0 - 4200.0 * t))),
    ]
}

/// Catalogue of external field models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum ExternalFieldModel {
    #[default]
    Zero,
    UniformElectric([f64; 3]),
    UniformMagnetic([f64; 3]),
    PlaneWavePulse(PlaneWavePulse),
}

/// Potential, field tensor and field gradient at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldEval {
    pub potential: FourVector,
    pub faraday: FaradayTensor,
    pub gradient: FaradayGradient,
}

impl ExternalFieldModel {
    /// Covariant potential A_μ(r). Uniform fields use the symmetric gauge.
    pub fn potential(&self, r: &FourVector) -> FourVector {
        match self {
            ExternalFieldModel::Zero => FourVector::ZERO,
            ExternalFieldModel::UniformElectric(e) => {
                FourVector::new(-(e[0] * r[1] + e[1] * r[2] + e[2] * r[3]), 0.0, 0.0, 0.0)
            }
            ExternalFieldModel::UniformMagnetic(b) => {
                let x = [r[1], r[2], r[3]];
                let bx = [
                    b[1] * x[2] - b[2] * x[1],
                    b[2] * x[0] - b[0] * x[2],
                    b[0] * x[1] - b[1] * x[0],
                ];
                FourVector::new(0.0, -0.5 * bx[0], -0.5 * bx[1], -0.5 * bx[2])
            }
            ExternalFieldModel::PlaneWavePulse(p) => {
                let f = p.profile(p.phase(r) - p.phase_start);
                lower_index(&p.polarization) * (p.amplitude * f[0])
            }
        }
    }

    pub fn faraday(&self, r: &FourVector) -> FaradayTensor {
        match self {
            ExternalFieldModel::Zero => FaradayTensor::ZERO,
            ExternalFieldModel::UniformElectric(e) => FaradayTensor::from_fields(*e, [0.0; 3]),
            ExternalFieldModel::UniformMagnetic(b) => FaradayTensor::from_fields([0.0; 3], *b),
            ExternalFieldModel::PlaneWavePulse(p) => {
                let f = p.profile(p.phase(r) - p.phase_start);
                let k = p.amplitude * f[1];
                let w = p.bivector();
                FaradayTensor::from_upper(&w.map(|row| row.map(|c| c * k)))
            }
        }
    }

    pub fn faraday_gradient(&self, r: &FourVector) -> FaradayGradient {
        match self {
            ExternalFieldModel::PlaneWavePulse(p) => {
                let f = p.profile(p.phase(r) - p.phase_start);
                let kl = lower_index(&p.wave);
                let w = p.bivector();
                let c = p.amplitude * f[2];
                std::array::from_fn(|l| w.map(|row| row.map(|x| c * kl[l] * x)))
            }
            _ => [[[0.0; 4]; 4]; 4],
        }
    }

    pub fn faraday_second_gradient(&self, r: &FourVector) -> FaradaySecondGradient {
        match self {
            ExternalFieldModel::PlaneWavePulse(p) => {
                let f = p.profile(p.phase(r) - p.phase_start);
                let kl = lower_index(&p.wave);
                let w = p.bivector();
                let c = p.amplitude * f[3];
                std::array::from_fn(|l| {
                    std::array::from_fn(|m| w.map(|row| row.map(|x| c * kl[l] * kl[m] * x)))
                })
            }
            _ => [[[[0.0; 4]; 4]; 4]; 4],
        }
    }

    /// Whether the model is zero at `r` (trivially true for the zero model).
    pub fn vanishes_at(&self, r: &FourVector) -> bool {
        match self {
            ExternalFieldModel::Zero => true,
            ExternalFieldModel::UniformElectric(e) | ExternalFieldModel::UniformMagnetic(e) => {
                e.iter().all(|c| *c == 0.0)
            }
            ExternalFieldModel::PlaneWavePulse(p) => {
                let xi = p.phase(r) - p.phase_start;
                !(xi > 0.0 && xi < p.phase_width)
            }
        }
    }
}

/// Potential, field tensor and gradient in one call.
pub fn eval_field(model: &ExternalFieldModel, r: &FourVector) -> FieldEval {
    FieldEval {
        potential: model.potential(r),
        faraday: model.faraday(r),
        gradient: model.faraday_gradient(r),
    }
}

/// Covariant Lorentz force per unit rest mass, (q/m0) F_{μν} u^ν.
pub fn lorentz_force(faraday: &FaradayTensor, u: &FourVector, q: f64, m0: f64) -> FourVector {
    faraday.contract(u) * (q / m0)
}
