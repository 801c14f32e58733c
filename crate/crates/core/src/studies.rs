//! Prescribed world-lines and σ-convergence studies of the asymptotic
//! self-force models against the exact delayed force.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FourVector;
use crate::history::{WorldlineHistory, WorldlineSample};
use crate::selfforce::{
    self_force_exact, self_force_present_time, self_force_retarded_hamiltonian, ParticleParams, SelfForceModel,
};

/// Analytic world-lines parametrized by proper time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrescribedMotion {
    /// Constant spatial velocity `v` (three-velocity) through the origin.
    Inertial { velocity: [f64; 3] },
    /// Circle of radius `radius` in the x–y plane with lab angular frequency `omega`.
    Circular { radius: f64, omega: f64 },
    /// Constant proper acceleration `g` along x, at rest at s = 0.
    Hyperbolic { acceleration: f64 },
}

impl PrescribedMotion {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PrescribedMotion::Inertial { velocity } => {
                let v2: f64 = velocity.iter().map(|v| v * v).sum();
                if !(v2 < 1.0) {
                    return Err(Error::InvalidConfig("inertial speed must be < 1".into()));
                }
            }
            PrescribedMotion::Circular { radius, omega } => {
                if !(radius > 0.0) || !(omega > 0.0) || !(radius * omega < 1.0) {
                    return Err(Error::InvalidConfig(
                        "circular motion needs radius > 0, omega > 0 and radius*omega < 1".into(),
                    ));
                }
            }
            PrescribedMotion::Hyperbolic { acceleration } => {
                if !(acceleration > 0.0) || !acceleration.is_finite() {
                    return Err(Error::InvalidConfig("hyperbolic acceleration must be > 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, s: f64) -> WorldlineSample {
        match *self {
            PrescribedMotion::Inertial { velocity } => {
                let u = FourVector::from_spatial_velocity(velocity);
                WorldlineSample::new(s, u * s, u, FourVector::ZERO)
            }
            PrescribedMotion::Circular { radius, omega } => {
                let v = radius * omega;
                let gamma = 1.0 / (1.0 - v * v).sqrt();
                let phase = omega * gamma * s;
                let (sn, cs) = phase.sin_cos();
                let w = omega * gamma;
                WorldlineSample::new(
                    s,
                    FourVector::new(gamma * s, radius * cs, radius * sn, 0.0),
                    FourVector::new(gamma, -radius * w * sn, radius * w * cs, 0.0),
                    FourVector::new(0.0, -radius * w * w * cs, -radius * w * w * sn, 0.0),
                )
            }
            PrescribedMotion::Hyperbolic { acceleration: g } => {
                let (sh, ch) = ((g * s).sinh(), (g * s).cosh());
                WorldlineSample::new(
                    s,
                    FourVector::new(sh / g, (ch - 1.0) / g, 0.0, 0.0),
                    FourVector::new(ch, sh, 0.0, 0.0),
                    FourVector::new(g * sh, g * ch, 0.0, 0.0),
                )
            }
        }
    }

    /// d³r/ds³ (contravariant).
    pub fn jerk(&self, s: f64) -> FourVector {
        match *self {
            PrescribedMotion::Inertial { .. } => FourVector::ZERO,
            PrescribedMotion::Circular { .. } => {
                let x = self.sample(s);
                let w = self.proper_frequency();
                FourVector::new(0.0, -w * w * x.u[1], -w * w * x.u[2], 0.0)
            }
            PrescribedMotion::Hyperbolic { acceleration: g } => self.sample(s).u * (g * g),
        }
    }

    fn proper_frequency(&self) -> f64 {
        match *self {
            PrescribedMotion::Circular { radius, omega } => omega / (1.0 - radius * radius * omega * omega).sqrt(),
            _ => 0.0,
        }
    }

    /// Tabulate the world-line on [start, end] with spacing `step` (the last
    /// node lands exactly on `end`). Before `start` the history continues
    /// inertially with the initial velocity.
    pub fn history(&self, start: f64, end: f64, step: f64) -> Result<WorldlineHistory> {
        self.validate()?;
        if !(step > 0.0) || !(end >= start) {
            return Err(Error::InvalidConfig("history needs step > 0 and end >= start".into()));
        }
        let n = ((end - start) / step).ceil() as usize;
        let h = if n == 0 { step } else { (end - start) / n as f64 };
        let mut history = WorldlineHistory::new(self.sample(start))?;
        for i in 1..=n {
            history.push(self.sample(start + i as f64 * h))?;
        }
        history.set_nominal_step(h.max(f64::MIN_POSITIVE));
        Ok(history)
    }
}

/// Self-force of an asymptotic model along a stored history.
pub fn asymptotic_force(
    model: SelfForceModel,
    history: &WorldlineHistory,
    s: f64,
    params: &ParticleParams,
) -> Result<FourVector> {
    match model {
        SelfForceModel::Exact => self_force_exact(history, s, params),
        SelfForceModel::RetardedHamiltonian => self_force_retarded_hamiltonian(history, s, params),
        SelfForceModel::PresentTime => self_force_present_time(history, s, params),
        SelfForceModel::None => Ok(FourVector::ZERO),
        SelfForceModel::LlIterative => Err(Error::InvalidConfig(
            "the iterated model depends on the external field, not on a prescribed world-line".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub sigma: f64,
    /// Euclidean norm of the exact force.
    pub exact_norm: f64,
    /// |exact − model| / |exact| (Euclidean component norms).
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub model: SelfForceModel,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of ln(error) against ln(σ).
    pub slope: f64,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,sigma,exact_norm,relative_error\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:e},{:e},{:e}\n", self.model, r.sigma, r.exact_norm, r.error));
        }
        out
    }
}

/// Settings for a σ-halving study on a prescribed world-line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub motion: PrescribedMotion,
    pub q: f64,
    pub m0: f64,
    pub sigmas: Vec<f64>,
    /// Proper time at which the forces are compared.
    pub s_eval: f64,
    /// Tabulation step, as a fraction of the smallest σ.
    pub step_fraction: f64,
}

impl ConvergenceStudy {
    pub fn new(motion: PrescribedMotion, q: f64, sigma0: f64, halvings: usize) -> Self {
        ConvergenceStudy {
            motion,
            q,
            m0: 1.0,
            sigmas: (0..halvings).map(|k| sigma0 / 2f64.powi(k as i32)).collect(),
            s_eval: 1.0,
            step_fraction: 1.0 / 64.0,
        }
    }

    pub fn run(&self, model: SelfForceModel) -> Result<ConvergenceTable> {
        if self.sigmas.len() < 2 {
            return Err(Error::InvalidConfig("convergence study needs at least two sigmas".into()));
        }
        let smin = self.sigmas.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = self.sigmas.iter().cloned().fold(0.0, f64::max);
        if !(smin > 0.0) || !(self.step_fraction > 0.0) {
            return Err(Error::InvalidConfig("sigmas and step_fraction must be > 0".into()));
        }
        let step = smin * self.step_fraction;
        let start = self.s_eval - 12.0 * smax;
        let history = self.motion.history(start, self.s_eval + 4.0 * step, step)?;
        let mut rows = Vec::with_capacity(self.sigmas.len());
        for &sigma in &self.sigmas {
            let params = ParticleParams::new(self.q, self.m0, sigma)?;
            let exact = self_force_exact(&history, self.s_eval, &params)?;
            let approx = asymptotic_force(model, &history, self.s_eval, &params)?;
            let norm = exact.euclidean_norm();
            rows.push(ConvergenceRow {
                sigma,
                exact_norm: norm,
                error: (exact - approx).euclidean_norm() / norm,
            });
        }
        let xs: Vec<f64> = rows.iter().map(|r| r.sigma.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
        Ok(ConvergenceTable {
            model,
            slope: fit_slope(&xs, &ys),
            rows,
        })
    }
}

/// Ordinary least-squares slope of y against x.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}
