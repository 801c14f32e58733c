//! Self-interaction of a finite-size charged shell.
//!
//! Forces are returned with covariant components and in force units (the
//! right-hand side of m0 du_μ/ds = …). The exact model evaluates the
//! retarded self-field analytically from the stored world-line; the
//! asymptotic models are short-delay expansions of it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ExternalFieldModel;
use crate::geometry::{lower_index, minkowski_dot, FaradayGradient, FaradayTensor, FourVector};
use crate::history::{retarded_point, WorldlineHistory};

/// Charge, rest mass and shell radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleParams {
    pub q: f64,
    pub m0: f64,
    pub sigma: f64,
}

impl ParticleParams {
    pub fn new(q: f64, m0: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::DomainError(format!("sigma must be > 0 (got {sigma})")));
        }
        if !(m0 > 0.0) || !m0.is_finite() {
            return Err(Error::DomainError(format!("m0 must be > 0 (got {m0})")));
        }
        if !q.is_finite() {
            return Err(Error::DomainError("charge must be finite".into()));
        }
        Ok(ParticleParams { q, m0, sigma })
    }

    /// Leading-order electromagnetic mass q²/σ.
    pub fn m_em(&self) -> f64 {
        self.q * self.q / self.sigma
    }
}

/// Which self-force law drives the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelfForceModel {
    Exact,
    RetardedHamiltonian,
    PresentTime,
    LlIterative,
    None,
}

impl SelfForceModel {
    pub const ALL: [SelfForceModel; 5] = [
        SelfForceModel::Exact,
        SelfForceModel::RetardedHamiltonian,
        SelfForceModel::PresentTime,
        SelfForceModel::LlIterative,
        SelfForceModel::None,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SelfForceModel::Exact => "exact",
            SelfForceModel::RetardedHamiltonian => "retarded_hamiltonian",
            SelfForceModel::PresentTime => "present_time",
            SelfForceModel::LlIterative => "ll",
            SelfForceModel::None => "none",
        }
    }

    /// Models that need a stored world-line.
    pub fn uses_history(&self) -> bool {
        matches!(
            self,
            SelfForceModel::Exact | SelfForceModel::RetardedHamiltonian | SelfForceModel::PresentTime
        )
    }
}

impl fmt::Display for SelfForceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelfForceModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SelfForceModel::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown self-force model '{s}'")))
    }
}

/// An asymptotic force split into its mass-correction and radiative parts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceTerms {
    pub mass: FourVector,
    pub radiative: FourVector,
}

impl ForceTerms {
    pub fn total(&self) -> FourVector {
        self.mass + self.radiative
    }
}

/// Retarded self-potential at the history's own point r(s).
pub fn self_potential_exact(history: &WorldlineHistory, s: f64, params: &ParticleParams) -> Result<FourVector> {
    let r = history.position(s)?;
    self_potential_at(history, &r, s, params)
}

/// q u_μ(s′)/|R̃·u(s′)| seen from the event `r_point`.
pub fn self_potential_at(
    history: &WorldlineHistory,
    r_point: &FourVector,
    s: f64,
    params: &ParticleParams,
) -> Result<FourVector> {
    if params.q == 0.0 {
        return Ok(FourVector::ZERO);
    }
    let rp = retarded_point(history, r_point, s, params.sigma)?;
    let ru = minkowski_dot(&rp.separation, &rp.sample.u);
    Ok(lower_index(&rp.sample.u) * (params.q / ru.abs()))
}

/// Retarded self-field tensor at the history's own point r(s).
pub fn self_faraday_exact(history: &WorldlineHistory, s: f64, params: &ParticleParams) -> Result<FaradayTensor> {
    let r = history.position(s)?;
    self_faraday_at(history, &r, s, params)
}

/// −2q/|R̃·U| · d/ds′ X_{μk}, X = (U_μR̃_k − U_kR̃_μ)/(R̃·U), expanded by
/// the chain rule with dR̃/ds′ = −U and dU/ds′ = a.
pub fn self_faraday_at(
    history: &WorldlineHistory,
    r_point: &FourVector,
    s: f64,
    params: &ParticleParams,
) -> Result<FaradayTensor> {
    if params.q == 0.0 {
        return Ok(FaradayTensor::ZERO);
    }
    let rp = retarded_point(history, r_point, s, params.sigma)?;
    let (u, a, sep) = (rp.sample.u, rp.sample.a, rp.separation);
    let ru = minkowski_dot(&sep, &u);
    let d_ru = -minkowski_dot(&u, &u) + minkowski_dot(&sep, &a);
    let (ul, al, rl) = (lower_index(&u), lower_index(&a), lower_index(&sep));
    let k = -2.0 * params.q / (ru.abs() * ru);
    let ratio = d_ru / ru;
    let mut m = [[0.0; 4]; 4];
    for mu in 0..4 {
        for nu in (mu + 1)..4 {
            let n = ul[mu] * rl[nu] - ul[nu] * rl[mu];
            let dn = al[mu] * rl[nu] - al[nu] * rl[mu];
            m[mu][nu] = k * (dn - n * ratio);
        }
    }
    Ok(FaradayTensor::from_upper(&m))
}

/// G_μ = q F^{self}_{μk} u^k(s) at the history's own state at s.
pub fn self_force_exact(history: &WorldlineHistory, s: f64, params: &ParticleParams) -> Result<FourVector> {
    let x = history.interpolate(s)?;
    self_force_exact_at(history, &x.r, &x.u, s, params)
}

/// Exact self-force on a trial state (r, u) whose past is `history`.
pub fn self_force_exact_at(
    history: &WorldlineHistory,
    r: &FourVector,
    u: &FourVector,
    s: f64,
    params: &ParticleParams,
) -> Result<FourVector> {
    let f = self_faraday_at(history, r, s, params)?;
    Ok(f.contract(u) * params.q)
}

fn fd_step(history: &WorldlineHistory) -> Result<f64> {
    history
        .nominal_step()
        .filter(|h| *h > 0.0)
        .ok_or_else(|| Error::InsufficientHistory("no step size known for differencing".into()))
}

/// Central difference of the interpolated acceleration.
fn jerk_central(history: &WorldlineHistory, s: f64, h: f64) -> Result<FourVector> {
    if s + h > history.frontier() {
        return Err(Error::InsufficientHistory(format!(
            "stencil at s = {s} reaches past the frontier {}",
            history.frontier()
        )));
    }
    let ap = history.interpolate(s + h)?.a;
    let am = history.interpolate(s - h)?.a;
    Ok((ap - am) * (0.5 / h))
}

/// Second-order backward difference of the acceleration.
fn jerk_backward(history: &WorldlineHistory, s: f64, h: f64) -> Result<FourVector> {
    let a0 = history.interpolate(s)?.a;
    let a1 = history.interpolate(s - h)?.a;
    let a2 = history.interpolate(s - 2.0 * h)?.a;
    Ok((a0 * 3.0 - a1 * 4.0 + a2) * (0.5 / h))
}

/// ȧ − u(u·ȧ), lowered.
fn projected(jerk: &FourVector, u: &FourVector) -> FourVector {
    lower_index(&(*jerk - *u * (minkowski_dot(u, jerk) / minkowski_dot(u, u))))
}

/// Retarded-time model at a trial event: −m_EM a_μ(s′) − (q²/3)[ȧ_μ − u_μ(u·ȧ)](s′).
pub fn retarded_hamiltonian_terms(
    history: &WorldlineHistory,
    r_point: &FourVector,
    s: f64,
    params: &ParticleParams,
) -> Result<ForceTerms> {
    if params.q == 0.0 {
        return Ok(ForceTerms::default());
    }
    let h = fd_step(history)?;
    let rp = retarded_point(history, r_point, s, params.sigma)?;
    let jerk = jerk_central(history, rp.s_prime, h)?;
    let q2 = params.q * params.q;
    Ok(ForceTerms {
        mass: lower_index(&rp.sample.a) * (-params.m_em()),
        radiative: projected(&jerk, &rp.sample.u) * (-q2 / 3.0),
    })
}

pub fn self_force_retarded_hamiltonian(
    history: &WorldlineHistory,
    s: f64,
    params: &ParticleParams,
) -> Result<FourVector> {
    let r = history.position(s)?;
    Ok(retarded_hamiltonian_terms(history, &r, s, params)?.total())
}

/// Present-time model: −(q²/σ) a_μ(s) + (2/3)q²[ȧ_μ − u_μ(u·ȧ)](s).
///
/// ȧ is a central difference where the history extends past s and a
/// second-order backward difference at the frontier.
pub fn present_time_terms(history: &WorldlineHistory, s: f64, params: &ParticleParams) -> Result<ForceTerms> {
    if params.q == 0.0 {
        return Ok(ForceTerms::default());
    }
    let h = fd_step(history)?;
    let x = history.interpolate(s)?;
    let jerk = if s + h <= history.frontier() {
        jerk_central(history, s, h)?
    } else {
        jerk_backward(history, s, h)?
    };
    let q2 = params.q * params.q;
    Ok(ForceTerms {
        mass: lower_index(&x.a) * (-params.m_em()),
        radiative: projected(&jerk, &x.u) * (2.0 * q2 / 3.0),
    })
}

pub fn self_force_present_time(history: &WorldlineHistory, s: f64, params: &ParticleParams) -> Result<FourVector> {
    Ok(present_time_terms(history, s, params)?.total())
}

/// ∂_l F_{μν} v^ν w^l.
pub(crate) fn gradient_contract(grad: &FaradayGradient, v: &FourVector, w: &FourVector) -> FourVector {
    let mut out = [0.0; 4];
    for (mu, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for l in 0..4 {
            for nu in 0..4 {
                acc += grad[l][mu][nu] * v[nu] * w[l];
            }
        }
        *o = acc;
    }
    FourVector(out)
}

/// h⁽¹⁾_μ = ∂_lF_{μν}u^νu^l + (q/m0) F_{μν}L^ν + (q/m0)(L·L) u_μ with
/// L^ν = F^ν_k u^k. Orthogonal to u by construction.
pub fn ll_h1(faraday: &FaradayTensor, gradient: &FaradayGradient, u: &FourVector, q_over_m: f64) -> FourVector {
    let l = faraday.contract_raised(u);
    let grad_term = gradient_contract(gradient, u, u);
    let ffu = faraday.contract(&l);
    let ll = minkowski_dot(&l, &l);
    grad_term + ffu * q_over_m + lower_index(u) * (q_over_m * ll)
}

/// q²{ −(1/σ)·first_order + (2q/(3m0))·h1 + (2/3)·h2 } — shared by the
/// single-particle and fluid LL forms so that they agree bit-for-bit when
/// the pressure terms vanish.
pub(crate) fn ll_combination(
    params: &ParticleParams,
    first_order: FourVector,
    h1: FourVector,
    h2: FourVector,
) -> ForceTerms {
    let q2 = params.q * params.q;
    let mass = first_order * (-q2 / params.sigma);
    let radiative = h1 * (q2 * 2.0 * params.q / (3.0 * params.m0)) + h2 * (q2 * 2.0 / 3.0);
    ForceTerms { mass, radiative }
}

/// Local LL-iterated self-force split into mass and radiative parts.
pub fn ll_terms(field: &ExternalFieldModel, r: &FourVector, u: &FourVector, params: &ParticleParams) -> ForceTerms {
    let faraday = field.faraday(r);
    let gradient = field.faraday_gradient(r);
    let qm = params.q / params.m0;
    let first_order = faraday.contract(u) * qm;
    let h1 = ll_h1(&faraday, &gradient, u, qm);
    ll_combination(params, first_order, h1, FourVector::ZERO)
}

/// Local LL-iterated self-force (covariant, force units). No history needed.
pub fn self_force_ll_iterative(
    field: &ExternalFieldModel,
    r: &FourVector,
    u: &FourVector,
    params: &ParticleParams,
) -> FourVector {
    ll_terms(field, r, u, params).total()
}

/// P_μ = m0 u_μ + q(A^{ext}_μ + 2A^{self}_μ). Potentials are covariant.
pub fn effective_momentum(
    u: &FourVector,
    a_ext: &FourVector,
    a_self: &FourVector,
    params: &ParticleParams,
) -> FourVector {
    lower_index(u) * params.m0 + (*a_ext + *a_self * 2.0) * params.q
}

/// Canonical momentum of the bare variational Lagrangian, with the
/// self-potential entering with weight 1.
pub fn canonical_momentum_variational(
    u: &FourVector,
    a_ext: &FourVector,
    a_self: &FourVector,
    params: &ParticleParams,
) -> FourVector {
    lower_index(u) * params.m0 + (*a_ext + *a_self) * params.q
}

/// Invert [`effective_momentum`] for the contravariant kinetic velocity.
pub fn velocity_from_momentum(
    p: &FourVector,
    a_ext: &FourVector,
    a_self: &FourVector,
    params: &ParticleParams,
) -> FourVector {
    lower_index(&(*p - (*a_ext + *a_self * 2.0) * params.q)) * (1.0 / params.m0)
}

/// H_eff = (P − qA_eff)·(P − qA_eff)/(2m0), A_eff = A_ext + 2A_self.
pub fn effective_hamiltonian(
    p: &FourVector,
    a_ext: &FourVector,
    a_self: &FourVector,
    params: &ParticleParams,
) -> f64 {
    let k = *p - (*a_ext + *a_self * 2.0) * params.q;
    minkowski_dot(&k, &k) / (2.0 * params.m0)
}
