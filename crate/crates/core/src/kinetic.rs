//! Relativistic Maxwellian ensembles and their fluid moments.
//!
//! Ensemble weights are lab-frame particle counts c. Moments use the
//! invariant weight w = c/u⁰ per unit volume:
//!
//!   n = Σ w,   N^μ = Σ w u^μ,   T^{μν} = Σ w u^μ u^ν,
//!
//! so N⁰ is the lab count density and η_{μν}T^{μν} = n on the mass shell.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_k_scaled;
use crate::error::{Error, Result};
use crate::fields::ExternalFieldModel;
use crate::geometry::{lower_index, minkowski_dot, renormalize_velocity, FourVector};
use crate::history::SHELL_TOLERANCE;
use crate::integrator::{run_scenario, InitialState, IntegratorConfig};
use crate::roots::{bisect, golden_section_min};
use crate::selfforce::{
    present_time_terms, retarded_hamiltonian_terms, self_force_exact_at, self_force_ll_iterative, ParticleParams,
    SelfForceModel,
};

/// Particles per work unit; fixes the reduction shape independently of the
/// number of threads.
const CHUNK: usize = 4096;

/// Maxwell–Jüttner parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellianParams {
    /// Chemical potential.
    pub mu: f64,
    /// Temperature (energy units).
    pub temperature: f64,
    /// Fluid four-velocity.
    pub fluid_velocity: FourVector,
    pub mass: f64,
    /// Value of the (2πħ)³ phase-space normalization.
    pub phase_space_norm: f64,
}

impl MaxwellianParams {
    pub fn new(mu: f64, temperature: f64, fluid_velocity: FourVector, mass: f64) -> Result<Self> {
        let p = MaxwellianParams {
            mu,
            temperature,
            fluid_velocity,
            mass,
            phase_space_norm: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::DomainError(format!("temperature must be > 0 (got {})", self.temperature)));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::DomainError(format!("mass must be > 0 (got {})", self.mass)));
        }
        if !(self.phase_space_norm > 0.0) {
            return Err(Error::DomainError("phase-space normalization must be > 0".into()));
        }
        let res = (self.fluid_velocity.norm_sq() - 1.0).abs();
        if !(res < SHELL_TOLERANCE) || !(self.fluid_velocity[0] > 0.0) {
            return Err(Error::DomainError("fluid velocity must satisfy U·U = 1".into()));
        }
        if !self.mu.is_finite() {
            return Err(Error::DomainError("chemical potential must be finite".into()));
        }
        Ok(())
    }

    /// θ = T/m.
    pub fn theta(&self) -> f64 {
        self.temperature / self.mass
    }
}

/// One macro-particle: position, four-velocity and lab count weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub r: FourVector,
    pub u: FourVector,
    pub weight: f64,
}

/// Statistics of the rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub trials: u64,
    pub accepted: u64,
    /// Monte-Carlo rest-frame density estimate.
    pub density: f64,
    /// Its binomial standard error.
    pub density_stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticEnsemble {
    pub particles: Vec<Particle>,
    /// Volume the weights refer to.
    pub volume: f64,
    pub params: Option<MaxwellianParams>,
    pub sampler: Option<SamplerStats>,
}

impl KineticEnsemble {
    pub fn new(particles: Vec<Particle>, volume: f64) -> Result<Self> {
        if !(volume > 0.0) {
            return Err(Error::DomainError("ensemble volume must be > 0".into()));
        }
        for p in &particles {
            if !(p.weight > 0.0) || !p.r.is_finite() {
                return Err(Error::DomainError("particle weights must be positive".into()));
            }
            let res = (p.u.norm_sq() - 1.0).abs();
            if !(res < SHELL_TOLERANCE) {
                return Err(Error::OffShellSample { s: p.r[0], residual: res });
            }
        }
        Ok(KineticEnsemble {
            particles,
            volume,
            params: None,
            sampler: None,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        chunked_sum(&self.particles, |p| p.weight)
    }

    /// CSV with header weight, r0..r3, u0..u3.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("weight,r0,r1,r2,r3,u0,u1,u2,u3\n");
        for p in &self.particles {
            let _ = write!(out, "{}", p.weight);
            for c in p.r.0.iter().chain(p.u.0.iter()) {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, volume: f64) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header.trim() != "weight,r0,r1,r2,r3,u0,u1,u2,u3" {
            return Err(Error::InvalidConfig(format!("unexpected ensemble header '{header}'")));
        }
        let mut particles = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::InvalidConfig(format!("ensemble line {}: {e}", i + 2)))?;
            if vals.len() != 9 {
                return Err(Error::InvalidConfig(format!("ensemble line {}: expected 9 columns", i + 2)));
            }
            particles.push(Particle {
                weight: vals[0],
                r: FourVector::new(vals[1], vals[2], vals[3], vals[4]),
                u: FourVector::new(vals[5], vals[6], vals[7], vals[8]),
            });
        }
        KineticEnsemble::new(particles, volume)
    }
}

/// Deterministic fixed-shape sum: sequential within chunks, chunks combined
/// in order.
fn chunked_sum<T: Sync, F: Fn(&T) -> f64 + Sync>(items: &[T], f: F) -> f64 {
    let partial: Vec<f64> = items.par_chunks(CHUNK).map(|c| c.iter().map(&f).sum::<f64>()).collect();
    partial.into_iter().sum()
}

/// Rejection sampler for x = γ − 1 with target density ∝
/// (1+x)√(x(x+2)) e^{−x/θ} and proposal λe^{−λx}.
#[derive(Debug, Clone, Copy)]
struct GammaSampler {
    theta: f64,
    lambda: f64,
    ln_envelope: f64,
}

impl GammaSampler {
    fn new(theta: f64) -> Self {
        let lambda = golden_section_min(|c| Self::ln_envelope(theta, c / theta), 1e-4, 1.0 - 1e-4, 1e-9) / theta;
        GammaSampler {
            theta,
            lambda,
            ln_envelope: Self::ln_envelope(theta, lambda),
        }
    }

    fn ln_target(theta: f64, x: f64) -> f64 {
        x.ln_1p() + 0.5 * (x * (x + 2.0)).ln() - x / theta
    }

    /// ln M(λ), M = sup_x target(x)/(λ e^{−λx}).
    fn ln_envelope(theta: f64, lambda: f64) -> f64 {
        let beta = 1.0 / theta - lambda;
        let slope = |x: f64| 1.0 / (1.0 + x) + (1.0 + x) / (x * (x + 2.0)) - beta;
        let mut hi = 1.0;
        while slope(hi) > 0.0 {
            hi *= 2.0;
        }
        let mut lo = hi;
        while slope(lo) < 0.0 {
            lo *= 0.5;
        }
        let x = bisect(slope, lo, 2.0 * lo, 1e-15 * lo).unwrap_or(lo);
        Self::ln_target(theta, x) + lambda * x - lambda.ln()
    }

    fn draw<R: Rng>(&self, rng: &mut R, trials: &mut u64) -> f64 {
        loop {
            *trials += 1;
            let x = -(1.0 - rng.gen::<f64>()).ln() / self.lambda;
            if x <= 0.0 {
                continue;
            }
            let v: f64 = rng.gen();
            let lhs = v.ln() + self.ln_envelope + self.lambda.ln() - self.lambda * x;
            if lhs <= Self::ln_target(self.theta, x) {
                return x;
            }
        }
    }
}

/// Boost a rest-frame vector into the frame where the fluid moves with U.
pub fn boost_from_rest(v: &FourVector, fluid: &FourVector) -> FourVector {
    let uv = fluid[1] * v[1] + fluid[2] * v[2] + fluid[3] * v[3];
    let k = v[0] + uv / (fluid[0] + 1.0);
    FourVector::new(
        fluid[0] * v[0] + uv,
        v[1] + fluid[1] * k,
        v[2] + fluid[2] * k,
        v[3] + fluid[3] * k,
    )
}

/// Sample `count` particles in the unit box.
pub fn sample_maxwellian(params: &MaxwellianParams, count: usize, seed: u64) -> Result<KineticEnsemble> {
    sample_maxwellian_in_box(params, count, seed, 1.0)
}

/// Sample `count` particles uniformly in a cube of side `box_length` at
/// t = 0, velocities Maxwell–Jüttner distributed about the fluid velocity.
pub fn sample_maxwellian_in_box(
    params: &MaxwellianParams,
    count: usize,
    seed: u64,
    box_length: f64,
) -> Result<KineticEnsemble> {
    params.validate()?;
    if count == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if !(box_length > 0.0) {
        return Err(Error::DomainError("box length must be > 0".into()));
    }
    let theta = params.theta();
    let sampler = GammaSampler::new(theta);
    let n_chunks = count.div_ceil(CHUNK);
    type Chunk = (Vec<(FourVector, FourVector, f64)>, u64);
    let chunks: Vec<Chunk> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(count - c * CHUNK);
            let mut trials = 0;
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let x = sampler.draw(&mut rng, &mut trials);
                let gamma = 1.0 + x;
                let p = (x * (x + 2.0)).sqrt();
                let cos_t = 2.0 * rng.gen::<f64>() - 1.0;
                let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
                let phi = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                let rest = FourVector::new(gamma, p * sin_t * phi.cos(), p * sin_t * phi.sin(), p * cos_t);
                let u = boost_from_rest(&rest, &params.fluid_velocity);
                let u = FourVector::from_spatial_velocity(u.spatial());
                let r = FourVector::new(
                    0.0,
                    box_length * rng.gen::<f64>(),
                    box_length * rng.gen::<f64>(),
                    box_length * rng.gen::<f64>(),
                );
                out.push((r, u, gamma));
            }
            (out, trials)
        })
        .collect();

    let trials: u64 = chunks.iter().map(|c| c.1).sum();
    let accepted = count as u64;
    let acc = accepted as f64 / trials as f64;
    let m = params.mass;
    let prefactor = 4.0 * std::f64::consts::PI * m * m * m / params.phase_space_norm
        * ((params.mu - m) / params.temperature).exp();
    let integral = sampler.ln_envelope.exp() * acc;
    let density = prefactor * integral;
    let density_stderr = density * ((1.0 - acc) / accepted as f64).sqrt();

    let volume = box_length.powi(3);
    let per_particle = density * volume / count as f64;
    let particles = chunks
        .into_iter()
        .flat_map(|c| c.0)
        .map(|(r, u, gamma)| Particle {
            r,
            u,
            weight: per_particle * u[0] / gamma,
        })
        .collect();
    Ok(KineticEnsemble {
        particles,
        volume,
        params: Some(*params),
        sampler: Some(SamplerStats {
            trials,
            accepted,
            density,
            density_stderr,
        }),
    })
}

/// Closed-form Maxwellian moments with the first-order self-potential
/// correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub n0: f64,
    pub n1: f64,
    pub p0: f64,
    pub p1: f64,
    /// Mean energy per particle, m K₃/K₂ − T.
    pub e: f64,
}

/// n₀ = 4πm²T K₂(m/T) exp[μ/T − q A_ext·U/T]/(2πħ)³,
/// n₁ = −2q (A_self·U)/T · n₀, p = nT, e = m K₃/K₂ − T.
pub fn maxwellian_closed_form(params: &MaxwellianParams, a_ext_u: f64, a_self_u: f64, charge: f64) -> Result<ClosedForm> {
    let t = params.temperature;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::DomainError(format!("temperature must be > 0 (got {t})")));
    }
    let m = params.mass;
    let x = m / t;
    let k2 = bessel_k_scaled(2.0, x)?;
    let k3 = bessel_k_scaled(3.0, x)?;
    let n0 = 4.0 * std::f64::consts::PI * m * m * t * k2 / params.phase_space_norm
        * ((params.mu - m) / t - charge * a_ext_u / t).exp();
    let n1 = -2.0 * charge * (a_self_u / t) * n0;
    Ok(ClosedForm {
        n0,
        n1,
        p0: n0 * t,
        p1: n1 * t,
        e: m * k3 / k2 - t,
    })
}

/// Number density, four-flow and stress-energy tensor of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidMoments {
    pub n: f64,
    pub flow: FourVector,
    pub stress: [[f64; 4]; 4],
    /// Rest-frame density √(N·N).
    pub n_rest: f64,
    /// N/√(N·N).
    pub velocity: FourVector,
    pub closed_form: Option<ClosedForm>,
}

impl FluidMoments {
    /// η_{μν} T^{μν}.
    pub fn stress_trace(&self) -> f64 {
        self.stress[0][0] - self.stress[1][1] - self.stress[2][2] - self.stress[3][3]
    }
}

pub fn compute_moments(ensemble: &KineticEnsemble) -> Result<FluidMoments> {
    if ensemble.particles.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let inv_v = 1.0 / ensemble.volume;
    let partial: Vec<[f64; 15]> = ensemble
        .particles
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = [0.0; 15];
            for p in chunk {
                let w = p.weight / p.u[0] * inv_v;
                acc[0] += w;
                let mut k = 1;
                for mu in 0..4 {
                    acc[k] += w * p.u[mu];
                    k += 1;
                }
                for mu in 0..4 {
                    for nu in mu..4 {
                        acc[k] += w * p.u[mu] * p.u[nu];
                        k += 1;
                    }
                }
            }
            acc
        })
        .collect();
    let mut tot = [0.0; 15];
    for p in partial {
        for (t, v) in tot.iter_mut().zip(p) {
            *t += v;
        }
    }
    let flow = FourVector::new(tot[1], tot[2], tot[3], tot[4]);
    let mut stress = [[0.0; 4]; 4];
    let mut k = 5;
    for mu in 0..4 {
        for nu in mu..4 {
            stress[mu][nu] = tot[k];
            stress[nu][mu] = tot[k];
            k += 1;
        }
    }
    let nn = flow.norm_sq();
    let n_rest = nn.max(0.0).sqrt();
    let velocity = if nn > 0.0 { renormalize_velocity(&flow)? } else { FourVector::rest() };
    Ok(FluidMoments {
        n: tot[0],
        flow,
        stress,
        n_rest,
        velocity,
        closed_form: None,
    })
}

/// A lab-time slice of an evolved ensemble. Particles must appear in the
/// same order in every snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub particles: Vec<SnapshotParticle>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotParticle {
    pub r: FourVector,
    pub u: FourVector,
    pub weight: f64,
    /// Self-force on the particle (covariant, force units).
    pub self_force: FourVector,
}

/// Evolve every particle of `ensemble` with `config` (span is overridden)
/// and slice the trajectories at the given lab times.
pub fn evolve_ensemble(ensemble: &KineticEnsemble, config: &IntegratorConfig, times: &[f64]) -> Result<Vec<Snapshot>> {
    let t_max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let per_particle: Vec<Result<Vec<SnapshotParticle>>> = ensemble
        .particles
        .par_iter()
        .map(|p| {
            let mut cfg = *config;
            // dt/ds = u⁰ ≥ 1, so a proper-time span of Δt reaches lab time t.
            let steps = ((t_max - p.r[0]) / cfg.step).ceil().max(0.0) + 2.0;
            cfg.span = steps * cfg.step;
            let out = run_scenario(&InitialState::new(0.0, p.r, p.u), &cfg)?;
            times
                .iter()
                .map(|&t| {
                    let x = out.history.at_coordinate_time(t)?;
                    let g = match cfg.model {
                        SelfForceModel::None => FourVector::ZERO,
                        SelfForceModel::Exact => self_force_exact_at(&out.history, &x.r, &x.u, x.s, &cfg.params)?,
                        SelfForceModel::RetardedHamiltonian => {
                            retarded_hamiltonian_terms(&out.history, &x.r, x.s, &cfg.params)?.total()
                        }
                        SelfForceModel::PresentTime => present_time_terms(&out.history, x.s, &cfg.params)?.total(),
                        SelfForceModel::LlIterative => self_force_ll_iterative(&cfg.field, &x.r, &x.u, &cfg.params),
                    };
                    Ok(SnapshotParticle {
                        r: x.r,
                        u: x.u,
                        weight: p.weight,
                        self_force: g,
                    })
                })
                .collect()
        })
        .collect();
    let per_particle: Vec<Vec<SnapshotParticle>> = per_particle.into_iter().collect::<Result<_>>()?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| Snapshot {
            t,
            particles: per_particle.iter().map(|v| v[k]).collect(),
        })
        .collect())
}

/// Periodic slab binning along one spatial axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    /// Spatial axis (1, 2 or 3).
    pub axis: usize,
    pub origin: f64,
    /// Period of the box along the axis.
    pub length: f64,
    /// Transverse cross-section of the box.
    pub cross_section: f64,
    pub bins: usize,
    pub min_per_bin: usize,
    /// Number of batches for the batch-means standard error.
    pub batches: usize,
}

impl BinGrid {
    pub fn new(axis: usize, origin: f64, length: f64, cross_section: f64, bins: usize) -> Self {
        BinGrid {
            axis,
            origin,
            length,
            cross_section,
            bins,
            min_per_bin: 500,
            batches: 20,
        }
    }

    fn bin_of(&self, x: f64) -> usize {
        let f = ((x - self.origin) / self.length).rem_euclid(1.0);
        ((f * self.bins as f64) as usize).min(self.bins - 1)
    }

    fn bin_volume(&self) -> f64 {
        self.length / self.bins as f64 * self.cross_section
    }
}

/// Residual of one balance law on every bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationResidual {
    pub name: String,
    pub residual: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Residual / dominant-term scale.
    pub normalized: Vec<f64>,
    /// RMS over bins of residual/stderr.
    pub z_rms: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub continuity: EquationResidual,
    pub momentum: Vec<EquationResidual>,
    pub min_particles_per_bin: usize,
    pub dt: f64,
}

impl ResidualReport {
    pub fn max_z_rms(&self) -> f64 {
        std::iter::once(&self.continuity)
            .chain(self.momentum.iter())
            .fold(0.0_f64, |m, e| m.max(e.z_rms))
    }
}

/// Per-bin, per-batch densities of one snapshot: [batch][bin][quantity].
/// Quantities: 0 = N⁰, 1 = N^x, 2..6 = T^{0ν}, 6..10 = T^{xν}, 10..14 = source^ν.
fn bin_snapshot(
    snap: &Snapshot,
    grid: &BinGrid,
    field: &ExternalFieldModel,
    params: &ParticleParams,
) -> (Vec<Vec<[f64; 14]>>, Vec<usize>) {
    let k = grid.batches;
    let mut acc = vec![vec![[0.0; 14]; grid.bins]; k];
    let mut counts = vec![0usize; grid.bins];
    let scale = k as f64 / grid.bin_volume();
    let ax = grid.axis;
    for (i, p) in snap.particles.iter().enumerate() {
        let b = grid.bin_of(p.r[ax]);
        counts[b] += 1;
        let c = p.weight * scale;
        let vx = p.u[ax] / p.u[0];
        let lorentz = field.faraday(&p.r).contract(&p.u) * (params.q / params.m0);
        let src = lower_index(&(lorentz + p.self_force * (1.0 / params.m0)));
        let cell = &mut acc[i % k][b];
        cell[0] += c;
        cell[1] += c * vx;
        for nu in 0..4 {
            cell[2 + nu] += c * p.u[nu];
            cell[6 + nu] += c * vx * p.u[nu];
            cell[10 + nu] += c / p.u[0] * src[nu];
        }
    }
    (acc, counts)
}

/// Finite-difference residuals of ∂_μN^μ = 0 and ∂_μT^{μν} = source^ν
/// between the first and last snapshot, on a periodic slab grid.
///
/// Time derivatives are differences of the two snapshots; flux divergences
/// and sources are averaged over them (second order about the midpoint).
pub fn moment_residuals(
    snapshots: &[Snapshot],
    field: &ExternalFieldModel,
    params: &ParticleParams,
    grid: &BinGrid,
) -> Result<ResidualReport> {
    if snapshots.len() < 2 {
        return Err(Error::InsufficientSnapshots(snapshots.len()));
    }
    if grid.bins < 3 || grid.batches < 2 || !(grid.length > 0.0) || !(1..=3).contains(&grid.axis) {
        return Err(Error::InvalidConfig("bin grid needs >= 3 bins, >= 2 batches and a spatial axis".into()));
    }
    let first = &snapshots[0];
    let last = &snapshots[snapshots.len() - 1];
    if first.particles.len() != last.particles.len() {
        return Err(Error::InvalidConfig("snapshots must track the same particles".into()));
    }
    if first.particles.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let dt = last.t - first.t;
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig("snapshot times must increase".into()));
    }
    let (b1, c1) = bin_snapshot(first, grid, field, params);
    let (b2, c2) = bin_snapshot(last, grid, field, params);
    let min_count = c1.iter().chain(c2.iter()).copied().min().unwrap_or(0);
    for (bin, &count) in c1.iter().chain(c2.iter()).enumerate() {
        if count < grid.min_per_bin {
            return Err(Error::SparseBin {
                bin: bin % grid.bins,
                count,
                required: grid.min_per_bin,
            });
        }
    }
    let nb = grid.bins;
    let dx = grid.length / nb as f64;
    // (density index, flux index, source index or none)
    let equations: [(&str, usize, usize, Option<usize>); 5] = [
        ("continuity", 0, 1, None),
        ("momentum_0", 2, 6, Some(10)),
        ("momentum_1", 3, 7, Some(11)),
        ("momentum_2", 4, 8, Some(12)),
        ("momentum_3", 5, 9, Some(13)),
    ];
    let k = grid.batches;
    let mut results = Vec::new();
    for (name, qi, fi, si) in equations {
        // [batch][bin] residual, plus term magnitudes for normalization.
        let mut per_batch = vec![vec![0.0; nb]; k];
        let mut term_sq = [0.0; 3];
        for batch in 0..k {
            for bin in 0..nb {
                let (up, down) = ((bin + 1) % nb, (bin + nb - 1) % nb);
                let dq = (b2[batch][bin][qi] - b1[batch][bin][qi]) / dt;
                let div1 = (b1[batch][up][fi] - b1[batch][down][fi]) / (2.0 * dx);
                let div2 = (b2[batch][up][fi] - b2[batch][down][fi]) / (2.0 * dx);
                let div = 0.5 * (div1 + div2);
                let src = si.map_or(0.0, |s| 0.5 * (b1[batch][bin][s] + b2[batch][bin][s]));
                per_batch[batch][bin] = dq + div - src;
                term_sq[0] += dq * dq;
                term_sq[1] += div * div;
                term_sq[2] += src * src;
            }
        }
        let norm = (k * nb) as f64;
        let scale = term_sq.iter().map(|t| (t / norm).sqrt()).fold(0.0_f64, f64::max);
        let mut residual = vec![0.0; nb];
        let mut stderr = vec![0.0; nb];
        let mut z_sq = 0.0;
        for bin in 0..nb {
            let mean = (0..k).map(|b| per_batch[b][bin]).sum::<f64>() / k as f64;
            let var = (0..k).map(|b| (per_batch[b][bin] - mean).powi(2)).sum::<f64>() / (k as f64 - 1.0);
            let se = (var / k as f64).sqrt();
            residual[bin] = mean;
            stderr[bin] = se;
            let z = if se > 0.0 {
                mean / se
            } else if mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            z_sq += z * z;
        }
        let normalized = residual.iter().map(|r| if scale > 0.0 { r / scale } else { 0.0 }).collect();
        results.push(EquationResidual {
            name: name.to_string(),
            residual,
            stderr,
            normalized,
            z_rms: (z_sq / nb as f64).sqrt(),
            scale,
        });
    }
    let continuity = results.remove(0);
    Ok(ResidualReport {
        continuity,
        momentum: results,
        min_particles_per_bin: min_count,
        dt,
    })
}

/// Mean rest-frame Lorentz factor of a Jüttner gas, K₁/K₂ + 3θ.
pub fn mean_gamma(theta: f64) -> Result<f64> {
    let x = 1.0 / theta;
    Ok(bessel_k_scaled(1.0, x)? / bessel_k_scaled(2.0, x)? + 3.0 * theta)
}

/// ⟨u⟩ check helper: Minkowski product of the ensemble's mean drift with U.
pub fn drift_alignment(moments: &FluidMoments, fluid: &FourVector) -> f64 {
    minkowski_dot(&moments.velocity, fluid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_particle_at_rest() {
        let e = KineticEnsemble::new(
            vec![Particle {
                r: FourVector::ZERO,
                u: FourVector::rest(),
                weight: 1.0,
            }],
            1.0,
        )
        .unwrap();
        let m = compute_moments(&e).unwrap();
        assert_eq!(m.n, 1.0);
        assert_eq!(m.flow, FourVector::rest());
        assert_eq!(m.stress[0][0], 1.0);
        for mu in 0..4 {
            for nu in 0..4 {
                if (mu, nu) != (0, 0) {
                    assert_eq!(m.stress[mu][nu], 0.0);
                }
            }
        }
    }

    #[test]
    fn symmetric_pair() {
        let u1 = FourVector::from_spatial_velocity([0.5, 0.0, 0.0]);
        let u2 = FourVector::from_spatial_velocity([-0.5, 0.0, 0.0]);
        let e = KineticEnsemble::new(
            vec![
                Particle { r: FourVector::ZERO, u: u1, weight: 1.0 },
                Particle { r: FourVector::ZERO, u: u2, weight: 1.0 },
            ],
            1.0,
        )
        .unwrap();
        let m = compute_moments(&e).unwrap();
        assert_eq!(m.flow[1], 0.0);
        assert_eq!(m.stress[0][1], 0.0);
        assert!(m.stress[1][1] > 0.0);
        assert!((m.stress_trace() - m.n).abs() < 1e-15);
    }

    #[test]
    fn empty_ensemble_is_an_error() {
        let e = KineticEnsemble::new(vec![], 1.0).unwrap();
        assert_eq!(compute_moments(&e), Err(Error::EmptyEnsemble));
    }

    #[test]
    fn closed_form_identities() {
        let p = MaxwellianParams::new(1.0, 0.3, FourVector::rest(), 1.0).unwrap();
        let c = maxwellian_closed_form(&p, 0.0, 0.0, 0.7).unwrap();
        assert_eq!(c.n1, 0.0);
        assert_eq!(c.p1, 0.0);
        assert_eq!(c.p0, c.n0 * 0.3);
        let bad = MaxwellianParams { temperature: 0.0, ..p };
        assert!(matches!(maxwellian_closed_form(&bad, 0.0, 0.0, 1.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn boost_maps_rest_to_fluid() {
        let fluid = FourVector::from_spatial_velocity([0.3, -0.4, 0.2]);
        let b = boost_from_rest(&FourVector::rest(), &fluid);
        assert!((b - fluid).max_abs() < 1e-15);
        let v = FourVector::from_spatial_velocity([0.1, 0.7, -0.2]);
        assert!((boost_from_rest(&v, &fluid).norm_sq() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let p = MaxwellianParams::new(1.0, 0.2, FourVector::rest(), 1.0).unwrap();
        let e = sample_maxwellian(&p, 50, 3).unwrap();
        let back = KineticEnsemble::from_csv(&e.to_csv(), e.volume).unwrap();
        assert_eq!(back.particles, e.particles);
    }

    #[test]
    fn sampler_is_seed_deterministic() {
        let p = MaxwellianParams::new(1.0, 0.5, FourVector::from_spatial_velocity([0.2, 0.0, 0.0]), 1.0).unwrap();
        let a = sample_maxwellian(&p, 9000, 11).unwrap();
        let b = sample_maxwellian(&p, 9000, 11).unwrap();
        let c = sample_maxwellian(&p, 9000, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.particles, c.particles);
    }

    #[test]
    fn snapshots_required() {
        let grid = BinGrid::new(1, 0.0, 1.0, 1.0, 4);
        let p = ParticleParams::new(0.0, 1.0, 0.1).unwrap();
        assert_eq!(
            moment_residuals(&[], &ExternalFieldModel::Zero, &p, &grid),
            Err(Error::InsufficientSnapshots(0))
        );
    }
}
