//! Method-of-steps integration of the delay equation of motion
//!
//!   m0 du_μ/ds = q F^{ext}_{μν} u^ν + G_μ[history],
//!
//! plus phase-space volume diagnostics.
//!
//! Because the delay s − s′ ≈ σ exceeds four steps, every delayed quantity a
//! Runge–Kutta stage needs lies strictly inside the stored history, so an
//! explicit RK4 with per-stage interpolation of the past is consistent.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::ExternalFieldModel;
use crate::geometry::{lower_index, renormalize_velocity, FourVector};
use crate::history::{WorldlineHistory, WorldlineSample};
use crate::selfforce::{
    effective_momentum, ll_terms, present_time_terms, retarded_hamiltonian_terms, self_force_exact_at,
    self_potential_at, velocity_from_momentum, ParticleParams, SelfForceModel,
};

/// How the mass-shell constraint is maintained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintMode {
    /// Rescale u onto the unit shell after every step.
    Projection,
    /// Leave u untouched (needed for canonical-coordinate Jacobians).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step: f64,
    pub span: f64,
    pub constraint: ConstraintMode,
    pub model: SelfForceModel,
    pub field: ExternalFieldModel,
    pub params: ParticleParams,
    /// Move the m_EM term of the asymptotic models into an effective mass
    /// m0 + m_EM. Ignored by the exact model and by `None`.
    pub renormalize_mass: bool,
    /// Optional history retention horizon (proper time).
    pub retention: Option<f64>,
}

impl IntegratorConfig {
    pub fn new(params: ParticleParams, field: ExternalFieldModel, model: SelfForceModel, step: f64, span: f64) -> Self {
        IntegratorConfig {
            step,
            span,
            constraint: ConstraintMode::Projection,
            model,
            field,
            params,
            renormalize_mass: false,
            retention: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidConfig(format!("step must be > 0 (got {})", self.step)));
        }
        if self.step > self.params.sigma / 4.0 * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "step {} exceeds sigma/4 = {}",
                self.step,
                self.params.sigma / 4.0
            )));
        }
        if !(self.span >= 0.0) || !self.span.is_finite() {
            return Err(Error::InvalidConfig(format!("span must be finite and >= 0 (got {})", self.span)));
        }
        if let Some(h) = self.retention {
            if !(h >= 2.0 * self.params.sigma) {
                return Err(Error::InvalidConfig("retention horizon must be at least 2 sigma".into()));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.span / self.step).round() as usize
    }
}

/// Initial event and velocity; the prehistory is inertial with velocity `u0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub s0: f64,
    pub r0: FourVector,
    pub u0: FourVector,
}

impl InitialState {
    pub fn new(s0: f64, r0: FourVector, u0: FourVector) -> Self {
        InitialState { s0, r0, u0 }
    }
}

/// Right-hand side at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceleration {
    /// du^μ/ds, contravariant.
    pub total: FourVector,
    /// External Lorentz force (covariant, force units).
    pub external: FourVector,
    /// Self-force (covariant, force units).
    pub self_force: FourVector,
}

/// Evaluate the equation of motion at (s, r, u), reading delayed data from
/// `source`.
pub fn acceleration(
    config: &IntegratorConfig,
    source: &WorldlineHistory,
    s: f64,
    r: &FourVector,
    u: &FourVector,
) -> Result<Acceleration> {
    let p = &config.params;
    let external = config.field.faraday(r).contract(u) * p.q;
    let mut mass = p.m0;
    let self_force = match config.model {
        SelfForceModel::None => FourVector::ZERO,
        SelfForceModel::Exact => self_force_exact_at(source, r, u, s, p)?,
        SelfForceModel::RetardedHamiltonian => {
            let t = retarded_hamiltonian_terms(source, r, s, p)?;
            if config.renormalize_mass {
                mass += p.m_em();
                t.radiative
            } else {
                t.total()
            }
        }
        SelfForceModel::PresentTime => {
            // The stage's own acceleration is unknown; the mass term lags by
            // reading the most recent stored value.
            let t = present_time_terms(source, s.min(source.frontier()), p)?;
            let radiative = reproject(&t.radiative, u);
            if config.renormalize_mass {
                mass += p.m_em();
                radiative
            } else {
                t.mass + radiative
            }
        }
        SelfForceModel::LlIterative => {
            let t = ll_terms(&config.field, r, u, p);
            if config.renormalize_mass {
                mass += p.m_em();
                t.radiative
            } else {
                t.total()
            }
        }
    };
    let total = lower_index(&(external + self_force)) * (1.0 / mass);
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("acceleration at s = {s}")));
    }
    Ok(Acceleration {
        total,
        external,
        self_force,
    })
}

/// Re-project a covariant vector orthogonal to the trial velocity u.
fn reproject(f: &FourVector, u: &FourVector) -> FourVector {
    let fu = f.dot(&lower_index(u));
    let uu = u.norm_sq();
    *f - lower_index(u) * (fu / uu)
}

/// One advanced state and the forces acting at the new state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub sample: WorldlineSample,
    pub forces: Acceleration,
}

/// RK4 advance from `state` without touching any history. Delayed data are
/// read from `source`, which must extend at least to `state.s` whenever the
/// model needs a history.
pub fn advance(state: &WorldlineSample, source: &WorldlineHistory, config: &IntegratorConfig) -> Result<StepOutcome> {
    let h = config.step;
    let s = state.s;
    let (r, u) = (state.r, state.u);
    let a1 = state.a;
    let r2 = r + u * (0.5 * h);
    let u2 = u + a1 * (0.5 * h);
    let a2 = acceleration(config, source, s + 0.5 * h, &r2, &u2)?.total;
    let r3 = r + u2 * (0.5 * h);
    let u3 = u + a2 * (0.5 * h);
    let a3 = acceleration(config, source, s + 0.5 * h, &r3, &u3)?.total;
    let r4 = r + u3 * h;
    let u4 = u + a3 * h;
    let a4 = acceleration(config, source, s + h, &r4, &u4)?.total;

    let r_new = r + (u + u2 * 2.0 + u3 * 2.0 + u4) * (h / 6.0);
    let mut u_new = u + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
    match config.constraint {
        ConstraintMode::Projection => u_new = renormalize_velocity(&u_new)?,
        ConstraintMode::None => {
            if !(u_new.norm_sq() > 0.0) {
                return Err(Error::NonTimelikeVelocity { norm: u_new.norm_sq() });
            }
        }
    }
    let forces = acceleration(config, source, s + h, &r_new, &u_new)?;
    Ok(StepOutcome {
        sample: WorldlineSample::new(s + h, r_new, u_new, forces.total),
        forces,
    })
}

/// Self-consistent step: the particle's own history is the delay source; the
/// new sample is appended to it.
pub fn step(state: &WorldlineSample, history: &mut WorldlineHistory, config: &IntegratorConfig) -> Result<WorldlineSample> {
    let out = advance(state, history, config)?;
    history.push(out.sample)?;
    Ok(out.sample)
}

/// Per-sample diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub s: f64,
    /// u·u − 1.
    pub shell_drift: f64,
    /// Euclidean size of the covariant external force.
    pub external_force: f64,
    /// Euclidean size of the covariant self-force.
    pub self_force: f64,
    /// ∫ f_ext^0 ds (trapezoid).
    pub work_external: f64,
    /// ∫ G^0 ds (trapezoid).
    pub work_self: f64,
}

/// Trajectory plus diagnostics.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub history: WorldlineHistory,
    pub diagnostics: Vec<DiagnosticRow>,
}

impl RunOutput {
    pub fn max_shell_drift(&self) -> f64 {
        self.diagnostics.iter().fold(0.0_f64, |m, d| m.max(d.shell_drift.abs()))
    }

    pub fn max_self_force(&self) -> f64 {
        self.diagnostics.iter().fold(0.0_f64, |m, d| m.max(d.self_force))
    }
}

/// CSV rendering of the diagnostics series.
pub fn diagnostics_csv(rows: &[DiagnosticRow]) -> String {
    let mut out = String::from("s,shell_drift,external_force,self_force,work_external,work_self\n");
    for d in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            d.s, d.shell_drift, d.external_force, d.self_force, d.work_external, d.work_self
        );
    }
    out
}

fn new_history(initial: &InitialState, config: &IntegratorConfig) -> Result<WorldlineHistory> {
    let sample = WorldlineSample::new(initial.s0, initial.r0, initial.u0, FourVector::ZERO);
    let mut history = match config.constraint {
        ConstraintMode::Projection => WorldlineHistory::new(sample)?,
        ConstraintMode::None => WorldlineHistory::unconstrained(sample)?,
    };
    history.set_nominal_step(config.step);
    history.set_retention(config.retention);
    Ok(history)
}

/// Integrate self-consistently over the configured span.
pub fn run_scenario(initial: &InitialState, config: &IntegratorConfig) -> Result<RunOutput> {
    run(initial, config, None)
}

/// Integrate with the delayed self-interaction read from a fixed `source`
/// world-line instead of the particle's own past.
pub fn run_with_source(initial: &InitialState, source: &WorldlineHistory, config: &IntegratorConfig) -> Result<RunOutput> {
    run(initial, config, Some(source))
}

fn run(initial: &InitialState, config: &IntegratorConfig, source: Option<&WorldlineHistory>) -> Result<RunOutput> {
    config.validate()?;
    let mut history = new_history(initial, config)?;
    let forces0 = {
        let src = source.unwrap_or(&history);
        acceleration(config, src, initial.s0, &initial.r0, &initial.u0)
            .map_err(|e| Error::StepFailed { s: initial.s0, source: Box::new(e) })?
    };
    history.set_last_acceleration(forces0.total);
    let mut state = *history.last();

    let mut diagnostics = Vec::with_capacity(config.steps() + 1);
    let mut prev = forces0;
    let mut row = DiagnosticRow {
        s: state.s,
        shell_drift: state.u.norm_sq() - 1.0,
        external_force: forces0.external.euclidean_norm(),
        self_force: forces0.self_force.euclidean_norm(),
        work_external: 0.0,
        work_self: 0.0,
    };
    diagnostics.push(row);

    for _ in 0..config.steps() {
        let out = {
            let src = source.unwrap_or(&history);
            advance(&state, src, config).map_err(|e| Error::StepFailed { s: state.s, source: Box::new(e) })?
        };
        history
            .push(out.sample)
            .map_err(|e| Error::StepFailed { s: state.s, source: Box::new(e) })?;
        let h = config.step;
        row = DiagnosticRow {
            s: out.sample.s,
            shell_drift: out.sample.u.norm_sq() - 1.0,
            external_force: out.forces.external.euclidean_norm(),
            self_force: out.forces.self_force.euclidean_norm(),
            work_external: row.work_external + 0.5 * h * (prev.external[0] + out.forces.external[0]),
            work_self: row.work_self + 0.5 * h * (prev.self_force[0] + out.forces.self_force[0]),
        };
        diagnostics.push(row);
        prev = out.forces;
        state = out.sample;
    }
    Ok(RunOutput { history, diagnostics })
}

/// Phase-space coordinates for the volume check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseCoordinates {
    /// y = (r^μ, P_μ) with the effective canonical momentum; 8-dimensional.
    Canonical,
    /// (r^μ, u^i) on the unit mass shell; 7-dimensional.
    OnShell,
}

/// Where perturbed trajectories take their self-interaction from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HistoryCoupling {
    /// Every trajectory feels the self-field of the unperturbed reference
    /// world-line: a prescribed history, for which the flow is Hamiltonian.
    Frozen,
    /// Every trajectory generates and feels its own history.
    SelfConsistent,
}

/// Determinant series of the finite-difference flow Jacobian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub s: Vec<f64>,
    pub determinant: Vec<f64>,
    /// ∫ div ds along the reference trajectory (on-shell coordinates with a
    /// local model only; empty otherwise).
    pub divergence_integral: Vec<f64>,
}

impl VolumeReport {
    pub fn final_determinant(&self) -> f64 {
        *self.determinant.last().unwrap_or(&1.0)
    }
}

/// Canonical-coordinate determinant after the configured span, with a
/// frozen history. Expected to be 1 for the Hamiltonian models.
pub fn liouville_volume_check(initial: &InitialState, config: &IntegratorConfig, delta: f64) -> Result<f64> {
    Ok(liouville_volume_series(initial, config, delta, PhaseCoordinates::Canonical, HistoryCoupling::Frozen, 1)?
        .final_determinant())
}

/// Determinant of ∂y(s)/∂y₀ at `checkpoints` evenly spaced times.
pub fn liouville_volume_series(
    initial: &InitialState,
    config: &IntegratorConfig,
    delta: f64,
    coords: PhaseCoordinates,
    coupling: HistoryCoupling,
    checkpoints: usize,
) -> Result<VolumeReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig("perturbation scale must be > 0".into()));
    }
    let mut cfg = *config;
    if coords == PhaseCoordinates::Canonical {
        cfg.constraint = ConstraintMode::None;
    }
    cfg.retention = None;
    let steps = cfg.steps();
    let checkpoints = checkpoints.max(1);
    let marks: Vec<usize> = (1..=checkpoints).map(|k| (k * steps) / checkpoints).collect();

    let reference = run_scenario(initial, &cfg)?;
    let dim = match coords {
        PhaseCoordinates::Canonical => 8,
        PhaseCoordinates::OnShell => 7,
    };
    let frozen = coupling == HistoryCoupling::Frozen && cfg.model.uses_history();
    let src = frozen.then_some(&reference.history);
    let y0 = to_coords(coords, &cfg, src, initial.s0, &initial.r0, &initial.u0, &initial.u0)?;

    let runs: Vec<Result<Vec<Vec<f64>>>> = (0..2 * dim)
        .into_par_iter()
        .map(|j| {
            let (k, sign) = (j / 2, if j % 2 == 0 { 1.0 } else { -1.0 });
            let mut y = y0.clone();
            y[k] += sign * delta;
            let start = from_coords(coords, &cfg, src, initial.s0, &y)?;
            let out = match src {
                Some(h) => run_with_source(&start, h, &cfg)?,
                None => run_scenario(&start, &cfg)?,
            };
            let samples: Vec<WorldlineSample> = out.history.samples().copied().collect();
            marks
                .iter()
                .map(|&m| {
                    let x = samples[m];
                    let own = if src.is_none() { Some(&out.history) } else { src };
                    to_coords(coords, &cfg, own, x.s, &x.r, &x.u, &start.u0)
                })
                .collect()
        })
        .collect();
    let runs: Vec<Vec<Vec<f64>>> = runs.into_iter().collect::<Result<_>>()?;

    let ref_samples: Vec<WorldlineSample> = reference.history.samples().copied().collect();
    let mut report = VolumeReport {
        s: Vec::new(),
        determinant: Vec::new(),
        divergence_integral: Vec::new(),
    };
    for (c, &m) in marks.iter().enumerate() {
        let jac = DMatrix::from_fn(dim, dim, |row, col| (runs[2 * col][c][row] - runs[2 * col + 1][c][row]) / (2.0 * delta));
        report.s.push(ref_samples[m].s);
        report.determinant.push(jac.determinant());
    }

    if coords == PhaseCoordinates::OnShell && !cfg.model.uses_history() {
        let div: Vec<f64> = ref_samples
            .iter()
            .map(|x| velocity_divergence(&cfg, &x.r, &x.u))
            .collect();
        let mut acc = 0.0;
        let mut integral = vec![0.0];
        for i in 1..div.len() {
            acc += 0.5 * cfg.step * (div[i - 1] + div[i]);
            integral.push(acc);
        }
        report.divergence_integral = marks.iter().map(|&m| integral[m]).collect();
    }
    Ok(report)
}

fn to_coords(
    coords: PhaseCoordinates,
    cfg: &IntegratorConfig,
    source: Option<&WorldlineHistory>,
    s: f64,
    r: &FourVector,
    u: &FourVector,
    u_pre: &FourVector,
) -> Result<Vec<f64>> {
    match coords {
        PhaseCoordinates::OnShell => Ok(vec![r[0], r[1], r[2], r[3], u[1], u[2], u[3]]),
        PhaseCoordinates::Canonical => {
            let a_ext = cfg.field.potential(r);
            let a_self = self_potential(cfg, source, s, r, u_pre)?;
            let p = effective_momentum(u, &a_ext, &a_self, &cfg.params);
            Ok(vec![r[0], r[1], r[2], r[3], p[0], p[1], p[2], p[3]])
        }
    }
}

/// Self-potential at r: from `source` if given, otherwise from an inertial
/// past with velocity `u_pre` (the state of a fresh trajectory).
fn self_potential(
    cfg: &IntegratorConfig,
    source: Option<&WorldlineHistory>,
    s: f64,
    r: &FourVector,
    u_pre: &FourVector,
) -> Result<FourVector> {
    if !cfg.model.uses_history() {
        return Ok(FourVector::ZERO);
    }
    match source {
        Some(h) => self_potential_at(h, r, s, &cfg.params),
        None => {
            let h = WorldlineHistory::unconstrained(WorldlineSample::new(s, *r, *u_pre, FourVector::ZERO))?;
            self_potential_at(&h, r, s, &cfg.params)
        }
    }
}

fn from_coords(
    coords: PhaseCoordinates,
    cfg: &IntegratorConfig,
    source: Option<&WorldlineHistory>,
    s0: f64,
    y: &[f64],
) -> Result<InitialState> {
    let r = FourVector::new(y[0], y[1], y[2], y[3]);
    match coords {
        PhaseCoordinates::OnShell => Ok(InitialState::new(s0, r, FourVector::from_spatial_velocity([y[4], y[5], y[6]]))),
        PhaseCoordinates::Canonical => {
            let p = FourVector::new(y[4], y[5], y[6], y[7]);
            let a_ext = cfg.field.potential(&r);
            let mut u = velocity_from_momentum(&p, &a_ext, &FourVector::ZERO, &cfg.params);
            if cfg.model.uses_history() {
                // The self-potential of an inertial past depends on the velocity
                // itself; fixed-point iteration contracts at rate ~ 2q²/(σ m0).
                for _ in 0..100 {
                    let a_self = self_potential(cfg, source, s0, &r, &u)?;
                    let next = velocity_from_momentum(&p, &a_ext, &a_self, &cfg.params);
                    let change = (next - u).max_abs();
                    u = next;
                    if change <= 1e-16 * u.max_abs() {
                        break;
                    }
                }
            }
            Ok(InitialState::new(s0, r, u))
        }
    }
}

/// Mass-shell restricted velocity divergence Σ_i ∂(du^i/ds)/∂u^i, with
/// u⁰ = √(1 + |u|²), of a local equation of motion (external Lorentz force
/// plus the model's self-force). Central differences.
pub fn velocity_divergence(config: &IntegratorConfig, r: &FourVector, u: &FourVector) -> f64 {
    let p = &config.params;
    let accel = |v: &FourVector| -> FourVector {
        let ext = config.field.faraday(r).contract(v) * p.q;
        let own = match config.model {
            SelfForceModel::LlIterative => ll_terms(&config.field, r, v, p).total(),
            _ => FourVector::ZERO,
        };
        lower_index(&(ext + own)) * (1.0 / p.m0)
    };
    let spatial = u.spatial();
    let eps = 1e-5 * (1.0 + spatial.iter().map(|c| c * c).sum::<f64>().sqrt());
    let mut div = 0.0;
    for i in 0..3 {
        let mut plus = spatial;
        let mut minus = spatial;
        plus[i] += eps;
        minus[i] -= eps;
        let ap = accel(&FourVector::from_spatial_velocity(plus));
        let am = accel(&FourVector::from_spatial_velocity(minus));
        div += (ap[i + 1] - am[i + 1]) / (2.0 * eps);
    }
    div
}

/// Velocity divergence of the LL-model equation of motion.
pub fn velocity_divergence_ll(field: &ExternalFieldModel, r: &FourVector, u: &FourVector, params: &ParticleParams) -> f64 {
    let cfg = IntegratorConfig::new(*params, *field, SelfForceModel::LlIterative, params.sigma / 4.0, 0.0);
    velocity_divergence(&cfg, r, u)
}
