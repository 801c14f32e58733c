//! Fluid-level asymptotic self-force along Lagrangian paths.
//!
//! Velocity, density and pressure fields are analytic callbacks. Forces are
//! per unit mass with covariant components; accelerations are contravariant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ExternalFieldModel;
use crate::geometry::{lower_index, minkowski_dot, FourVector, METRIC};
use crate::history::WorldlineHistory;
use crate::selfforce::{gradient_contract, ll_combination, ll_h1, retarded_hamiltonian_terms, ParticleParams};

/// Symmetric contravariant tensor P^{μν}.
pub type Tensor2 = [[f64; 4]; 4];
/// ∂_l P^{μν}, indexed `[l][mu][nu]`.
pub type Tensor3 = [[[f64; 4]; 4]; 4];
/// ∂_l ∂_m P^{μν}, indexed `[l][m][mu][nu]`.
pub type Tensor4 = [[[[f64; 4]; 4]; 4]; 4];

/// Smallest density accepted before dividing by n.
pub const MIN_DENSITY: f64 = 1e-300;

/// Analytic fluid fields.
pub trait FluidStateCallbacks: Sync {
    fn velocity(&self, r: &FourVector) -> FourVector;
    fn density(&self, r: &FourVector) -> f64;
    /// ∂_l n.
    fn density_gradient(&self, r: &FourVector) -> [f64; 4];
    fn pressure(&self, r: &FourVector) -> Tensor2;
    fn pressure_gradient(&self, r: &FourVector) -> Tensor3;
    fn pressure_second_gradient(&self, r: &FourVector) -> Tensor4;
}

/// Δ^{μν} = η^{μν} − U^μU^ν.
pub fn projector(u: &FourVector) -> Tensor2 {
    std::array::from_fn(|mu| {
        std::array::from_fn(|nu| if mu == nu { METRIC[mu] } else { 0.0 } - u[mu] * u[nu])
    })
}

/// Δ^{μν} contracted with a contravariant vector on its second index.
pub fn project(delta: &Tensor2, v: &FourVector) -> FourVector {
    let vl = lower_index(v);
    FourVector(std::array::from_fn(|mu| (0..4).map(|nu| delta[mu][nu] * vl[nu]).sum()))
}

/// Isotropic pressure tensor p(U U − η) = −pΔ.
fn isotropic(u: &FourVector, p: f64) -> Tensor2 {
    projector(u).map(|row| row.map(|d| -p * d))
}

/// Uniform fluid with constant isotropic pressure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformFluid {
    pub velocity: FourVector,
    pub density: f64,
    pub pressure: f64,
}

impl FluidStateCallbacks for UniformFluid {
    fn velocity(&self, _: &FourVector) -> FourVector {
        self.velocity
    }
    fn density(&self, _: &FourVector) -> f64 {
        self.density
    }
    fn density_gradient(&self, _: &FourVector) -> [f64; 4] {
        [0.0; 4]
    }
    fn pressure(&self, _: &FourVector) -> Tensor2 {
        if self.pressure == 0.0 {
            return [[0.0; 4]; 4];
        }
        isotropic(&self.velocity, self.pressure)
    }
    fn pressure_gradient(&self, _: &FourVector) -> Tensor3 {
        [[[0.0; 4]; 4]; 4]
    }
    fn pressure_second_gradient(&self, _: &FourVector) -> Tensor4 {
        [[[[0.0; 4]; 4]; 4]; 4]
    }
}

/// Planar shear flow U = (γ, v0 + k y, 0, 0) with uniform density and
/// isotropic pressure p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShearFlow {
    pub v0: f64,
    pub shear: f64,
    pub density: f64,
    pub pressure: f64,
}

impl ShearFlow {
    /// U, ∂_y U, ∂²_y U.
    fn profile(&self, r: &FourVector) -> [FourVector; 3] {
        let v = self.v0 + self.shear * r[2];
        let g = (1.0 + v * v).sqrt();
        let k = self.shear;
        let dg = v * k / g;
        let d2g = k * k / (g * g * g);
        [
            FourVector::new(g, v, 0.0, 0.0),
            FourVector::new(dg, k, 0.0, 0.0),
            FourVector::new(d2g, 0.0, 0.0, 0.0),
        ]
    }
}

impl FluidStateCallbacks for ShearFlow {
    fn velocity(&self, r: &FourVector) -> FourVector {
        self.profile(r)[0]
    }
    fn density(&self, _: &FourVector) -> f64 {
        self.density
    }
    fn density_gradient(&self, _: &FourVector) -> [f64; 4] {
        [0.0; 4]
    }
    fn pressure(&self, r: &FourVector) -> Tensor2 {
        isotropic(&self.velocity(r), self.pressure)
    }
    fn pressure_gradient(&self, r: &FourVector) -> Tensor3 {
        let [u, du, _] = self.profile(r);
        let p = self.pressure;
        let mut g = [[[0.0; 4]; 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                g[2][mu][nu] = p * (du[mu] * u[nu] + u[mu] * du[nu]);
            }
        }
        g
    }
    fn pressure_second_gradient(&self, r: &FourVector) -> Tensor4 {
        let [u, du, d2u] = self.profile(r);
        let p = self.pressure;
        let mut g = [[[[0.0; 4]; 4]; 4]; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                g[2][2][mu][nu] = p * (d2u[mu] * u[nu] + 2.0 * du[mu] * du[nu] + u[mu] * d2u[nu]);
            }
        }
        g
    }
}

/// Isothermal fluid moving with constant U, with quadratic density
/// n(r) = n0 + g·r + ½ rᵀHr and pressure P = −nTΔ (p = nT).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsothermalFluid {
    pub velocity: FourVector,
    pub temperature: f64,
    pub n0: f64,
    pub gradient: [f64; 4],
    pub hessian: [[f64; 4]; 4],
}

impl FluidStateCallbacks for IsothermalFluid {
    fn velocity(&self, _: &FourVector) -> FourVector {
        self.velocity
    }
    fn density(&self, r: &FourVector) -> f64 {
        let mut n = self.n0;
        for l in 0..4 {
            n += self.gradient[l] * r[l];
            for m in 0..4 {
                n += 0.5 * self.hessian[l][m] * r[l] * r[m];
            }
        }
        n
    }
    fn density_gradient(&self, r: &FourVector) -> [f64; 4] {
        std::array::from_fn(|l| self.gradient[l] + (0..4).map(|m| self.hessian[l][m] * r[m]).sum::<f64>())
    }
    fn pressure(&self, r: &FourVector) -> Tensor2 {
        isotropic(&self.velocity, self.density(r) * self.temperature)
    }
    fn pressure_gradient(&self, r: &FourVector) -> Tensor3 {
        let dn = self.density_gradient(r);
        let base = isotropic(&self.velocity, self.temperature);
        std::array::from_fn(|l| base.map(|row| row.map(|b| b * dn[l])))
    }
    fn pressure_second_gradient(&self, _: &FourVector) -> Tensor4 {
        let base = isotropic(&self.velocity, self.temperature);
        std::array::from_fn(|l| std::array::from_fn(|m| base.map(|row| row.map(|b| b * self.hessian[l][m]))))
    }
}

/// Local fluid quantities entering the LL-type forms.
struct LocalState {
    u: FourVector,
    n: f64,
    /// U^l ∂_l ln n.
    dlogn: f64,
    /// ∂_μ P^{μν}.
    div_p: FourVector,
    /// U^l ∂_l ∂_μ P^{μν}.
    convective_div_p: FourVector,
}

fn local_state<C: FluidStateCallbacks + ?Sized>(fluid: &C, r: &FourVector) -> Result<LocalState> {
    let n = fluid.density(r);
    if !(n > MIN_DENSITY) || !n.is_finite() {
        return Err(Error::VanishingDensity(n));
    }
    let u = fluid.velocity(r);
    let dn = fluid.density_gradient(r);
    let dlogn = (0..4).map(|l| u[l] * dn[l]).sum::<f64>() / n;
    let g = fluid.pressure_gradient(r);
    let div_p = FourVector(std::array::from_fn(|nu| (0..4).map(|mu| g[mu][mu][nu]).sum()));
    let h = fluid.pressure_second_gradient(r);
    let convective_div_p = FourVector(std::array::from_fn(|nu| {
        (0..4)
            .map(|l| u[l] * (0..4).map(|mu| h[l][mu][mu][nu]).sum::<f64>())
            .sum()
    }));
    Ok(LocalState {
        u,
        n,
        dlogn,
        div_p,
        convective_div_p,
    })
}

/// Leading-order fluid acceleration DU^ν/Ds = (q/m0)F^ν_μU^μ − (1/n)∂_μP^{μν}.
pub fn first_order_acceleration<C: FluidStateCallbacks + ?Sized>(
    fluid: &C,
    field: &ExternalFieldModel,
    r: &FourVector,
    params: &ParticleParams,
) -> Result<FourVector> {
    let st = local_state(fluid, r)?;
    let qm = params.q / params.m0;
    Ok(field.faraday(r).contract_raised(&st.u) * qm - st.div_p * (1.0 / st.n))
}

/// Term-by-term second convective derivative D²U^ν/Ds² obtained by
/// iterating the leading-order fluid equation (contravariant).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlIterated {
    /// (q/m0) ∂_lF^{νμ}U_μU^l.
    pub field_gradient: FourVector,
    /// (q/m0)² F^{νμ}F_{μl}U^l.
    pub field_field: FourVector,
    /// −(q/m0)(1/n) F^{νμ}∂_lP_μ^l.
    pub field_pressure: FourVector,
    /// (1/n) ∂_μP^{μν} U^l∂_l ln n.
    pub pressure_log_density: FourVector,
    /// −(1/n) U^l∂_l∂_μP^{μν}.
    pub pressure_curvature: FourVector,
    pub total: FourVector,
}

pub fn ll_iterated_acceleration<C: FluidStateCallbacks + ?Sized>(
    fluid: &C,
    field: &ExternalFieldModel,
    r: &FourVector,
    params: &ParticleParams,
) -> Result<LlIterated> {
    let st = local_state(fluid, r)?;
    let qm = params.q / params.m0;
    let f = field.faraday(r);
    let grad = field.faraday_gradient(r);
    let u = st.u;
    let field_gradient = lower_index(&gradient_contract(&grad, &u, &u)) * qm;
    let field_field = f.contract_raised(&f.contract_raised(&u)) * (qm * qm);
    let field_pressure = f.contract_raised(&st.div_p) * (-qm / st.n);
    let pressure_log_density = st.div_p * (st.dlogn / st.n);
    let pressure_curvature = st.convective_div_p * (-1.0 / st.n);
    let total = field_gradient + field_field + field_pressure + pressure_log_density + pressure_curvature;
    Ok(LlIterated {
        field_gradient,
        field_field,
        field_pressure,
        pressure_log_density,
        pressure_curvature,
        total,
    })
}

/// LL-type fluid self-force per unit mass, with its parts (covariant).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidLlForce {
    /// −(q²/(σ m0))[(q/m0)F_{μν}U^ν − (1/n)∂_νP_μ^ν].
    pub mass: FourVector,
    pub h1: FourVector,
    pub h2: FourVector,
    pub total: FourVector,
}

/// h⁽²⁾_μ = S_μ − U_μ U^k S_k with
/// S = −(q/m0)(1/n)F_{μβ}∂_lP^{lβ} + (1/n)∂_νP_μ^ν U^l∂_l ln n − (1/n)U^l∂_l∂_νP_μ^ν.
fn h2_term(st: &LocalState, f: &crate::geometry::FaradayTensor, qm: f64) -> FourVector {
    let x = f.contract(&st.div_p) * (-qm / st.n);
    let y = lower_index(&st.div_p) * (st.dlogn / st.n);
    let z = lower_index(&st.convective_div_p) * (-1.0 / st.n);
    let s = x + y + z;
    s - lower_index(&st.u) * minkowski_dot(&st.u, &lower_index(&s))
}

pub fn fluid_ll_force<C: FluidStateCallbacks + ?Sized>(
    fluid: &C,
    field: &ExternalFieldModel,
    r: &FourVector,
    params: &ParticleParams,
) -> Result<FluidLlForce> {
    let st = local_state(fluid, r)?;
    let qm = params.q / params.m0;
    let f = field.faraday(r);
    let grad = field.faraday_gradient(r);
    let first_order = f.contract(&st.u) * qm - lower_index(&st.div_p) * (1.0 / st.n);
    let h1 = ll_h1(&f, &grad, &st.u, qm);
    let h2 = h2_term(&st, &f, qm);
    let terms = ll_combination(params, first_order, h1, h2);
    let inv_m = 1.0 / params.m0;
    Ok(FluidLlForce {
        mass: terms.mass * inv_m,
        h1,
        h2,
        total: terms.total() * inv_m,
    })
}

/// U, DU/Ds and D²U/Ds² along a Lagrangian path (contravariant).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathKinematics {
    pub u: FourVector,
    pub du: FourVector,
    pub d2u: FourVector,
}

/// Path kinematics from a stored path: U and DU/Ds from the history,
/// D²U/Ds² by a fourth-order central difference of the acceleration where
/// the stencil fits, falling back to second order near the frontier.
pub fn path_kinematics(path: &WorldlineHistory, s: f64, step: f64) -> Result<PathKinematics> {
    if !(step > 0.0) {
        return Err(Error::DomainError("difference step must be > 0".into()));
    }
    let x = path.interpolate(s)?;
    let a = |t: f64| path.interpolate(t).map(|p| p.a);
    let frontier = path.frontier();
    let d2u = if s + 2.0 * step <= frontier {
        (a(s - 2.0 * step)? - a(s + 2.0 * step)? + (a(s + step)? - a(s - step)?) * 8.0) * (1.0 / (12.0 * step))
    } else if s + step <= frontier {
        (a(s + step)? - a(s - step)?) * (0.5 / step)
    } else {
        (x.a * 3.0 - a(s - step)? * 4.0 + a(s - 2.0 * step)?) * (0.5 / step)
    };
    Ok(PathKinematics { u: x.u, du: x.a, d2u })
}

/// Present-time self-potential q[(1/σ)U_μ − DU_μ/Ds].
pub fn fluid_self_potential_present(kin: &PathKinematics, sigma: f64, q: f64) -> FourVector {
    lower_index(&(kin.u * (1.0 / sigma) - kin.du)) * q
}

/// Present-time self-force per unit mass:
/// −(q²/(σ m0)) DU_μ + (2/3)(q²/m0)[D²U_μ − U_μ(U·D²U)].
pub fn fluid_self_force_present(kin: &PathKinematics, sigma: f64, q: f64, m0: f64) -> FourVector {
    let q2m = q * q / m0;
    let proj = kin.d2u - kin.u * (minkowski_dot(&kin.u, &kin.d2u) / minkowski_dot(&kin.u, &kin.u));
    lower_index(&(kin.du * (-q2m / sigma) + proj * (2.0 * q2m / 3.0)))
}

/// Retarded-time self-potential and force per unit mass on a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetardedFluid {
    /// (q/σ) U_μ(s′).
    pub potential: FourVector,
    /// −(q²/(σ m0)) DU_μ(s′) − (1/3)(q²/m0)[D²U_μ − U_μ(U·D²U)](s′).
    pub force: FourVector,
    pub s_prime: f64,
}

pub fn fluid_self_force_retarded(path: &WorldlineHistory, s: f64, params: &ParticleParams) -> Result<RetardedFluid> {
    let r = path.position(s)?;
    let rp = crate::history::retarded_point(path, &r, s, params.sigma)?;
    let terms = retarded_hamiltonian_terms(path, &r, s, params)?;
    Ok(RetardedFluid {
        potential: lower_index(&rp.sample.u) * (params.q / params.sigma),
        force: terms.total() * (1.0 / params.m0),
        s_prime: rp.s_prime,
    })
}
