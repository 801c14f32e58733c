//! Scenario execution and artifact rendering.
//!
//! Every artifact is built in memory first; the manifest hashes the exact
//! bytes that land on disk. Nothing time- or host-dependent is recorded, so
//! the same scenario and seed reproduce every file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use rr_core::fluid::{fluid_ll_force, ll_iterated_acceleration, FluidLlForce, FluidStateCallbacks, LlIterated};
use rr_core::integrator::{diagnostics_csv, liouville_volume_series};
use rr_core::kinetic::{
    compute_moments, evolve_ensemble, maxwellian_closed_form, moment_residuals, sample_maxwellian_in_box, BinGrid,
    MaxwellianParams, Snapshot,
};
use rr_core::selfforce::self_force_ll_iterative;
use rr_core::studies::{ConvergenceStudy, ConvergenceTable};
use rr_core::{run_scenario, FourVector};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::scenario::{FluidState, Mode, Scenario};

/// Version of the CSV/JSON output layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Progress messages on stderr.
    pub trace: bool,
    /// Recorded in the manifest. Reductions are always fixed-shape.
    pub deterministic_reduce: bool,
}

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: &str, text: String) -> Self {
        Artifact {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }

    fn json<T: Serialize>(name: &str, value: &T) -> Result<Self, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Serialize(e.to_string()))?;
        text.push('\n');
        Ok(Artifact::text(name, text))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub engine: String,
    pub engine_version: String,
    pub mode: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub deterministic_reduce: bool,
    pub files: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Hash of the canonical (JSON) form of the scenario.
pub fn config_hash(scenario: &Scenario) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(scenario).map_err(|e| CliError::Serialize(e.to_string()))?;
    Ok(sha256_hex(&bytes))
}

fn trace(opts: &RunOptions, msg: impl AsRef<str>) {
    if opts.trace {
        eprintln!("[trace] {}", msg.as_ref());
    }
}

/// Run the scenario and return its artifacts, manifest last.
pub fn execute(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<Artifact>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(scenario.threads)
        .build()
        .map_err(|e| CliError::Io {
            path: "<thread pool>".into(),
            message: e.to_string(),
        })?;
    trace(opts, format!("mode {} on {} worker threads", scenario.mode.as_str(), pool.current_num_threads()));
    let mut artifacts = pool.install(|| match scenario.mode {
        Mode::Single => run_single(scenario, opts),
        Mode::Sweep => run_sweep(scenario, opts),
        Mode::Ensemble => run_ensemble(scenario, opts),
        Mode::Liouville => run_liouville(scenario, opts),
        Mode::FluidCheck => run_fluid_check(scenario, opts),
    })?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        engine: "rr-core".into(),
        engine_version: rr_core::VERSION.into(),
        mode: scenario.mode.as_str().into(),
        config_sha256: config_hash(scenario)?,
        seed: scenario.seed,
        deterministic_reduce: opts.deterministic_reduce,
        files: artifacts
            .iter()
            .map(|a| FileRecord {
                name: a.name.clone(),
                bytes: a.bytes.len(),
                sha256: sha256_hex(&a.bytes),
            })
            .collect(),
    };
    artifacts.push(Artifact::json(MANIFEST_NAME, &manifest)?);
    Ok(artifacts)
}

/// Execute and write every artifact into `out`.
pub fn run(scenario: &Scenario, opts: &RunOptions, out: &Path) -> Result<Vec<Artifact>, CliError> {
    let artifacts = execute(scenario, opts)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for a in &artifacts {
        let path = out.join(&a.name);
        fs::write(&path, &a.bytes).map_err(|e| CliError::io(&path, e))?;
        trace(opts, format!("wrote {} ({} bytes)", path.display(), a.bytes.len()));
    }
    Ok(artifacts)
}

fn run_single(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<Artifact>, CliError> {
    let cfg = scenario.integrator_config();
    trace(opts, format!("integrating {} steps with model {}", cfg.steps(), cfg.model));
    let out = run_scenario(&scenario.initial_state(), &cfg)?;
    let first = *out.history.first();
    let last = *out.history.last();
    let work = out.diagnostics.last().copied();
    let report = json!({
        "mode": "single",
        "model": cfg.model.as_str(),
        "steps": out.diagnostics.len().saturating_sub(1),
        "initial": { "s": first.s, "r": first.r, "u": first.u },
        "final": { "s": last.s, "r": last.r, "u": last.u },
        "max_shell_drift": out.max_shell_drift(),
        "max_self_force": out.max_self_force(),
        "work_external": work.map_or(0.0, |w| w.work_external),
        "work_self": work.map_or(0.0, |w| w.work_self),
    });
    Ok(vec![
        Artifact::text("trajectory.csv", out.history.to_csv()),
        Artifact::text("diagnostics.csv", diagnostics_csv(&out.diagnostics)),
        Artifact::json("report.json", &report)?,
    ])
}

fn run_sweep(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<Artifact>, CliError> {
    let sweep = scenario.sweep.as_ref().expect("validated sweep section");
    let study = ConvergenceStudy {
        motion: sweep.motion,
        q: scenario.particle.q,
        m0: scenario.particle.m0,
        sigmas: scenario.sweep_scenarios().iter().map(|s| s.particle.sigma).collect(),
        s_eval: sweep.s_eval,
        step_fraction: sweep.step_fraction,
    };
    let tables: Vec<ConvergenceTable> = sweep
        .models
        .iter()
        .map(|&m| {
            trace(opts, format!("sigma sweep for {m}"));
            study.run(m)
        })
        .collect::<rr_core::Result<_>>()?;
    let mut csv = String::from("model,sigma,exact_norm,relative_error\n");
    for t in &tables {
        csv.extend(t.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
    }
    let report = json!({
        "mode": "sweep",
        "motion": sweep.motion,
        "sigmas": study.sigmas,
        "tables": tables,
    });
    Ok(vec![Artifact::text("convergence.csv", csv), Artifact::json("report.json", &report)?])
}

fn snapshots_csv(snaps: &[Snapshot]) -> String {
    let mut out = String::from("t,id,weight,r0,r1,r2,r3,u0,u1,u2,u3,g0,g1,g2,g3\n");
    for snap in snaps {
        for (i, p) in snap.particles.iter().enumerate() {
            let _ = write!(out, "{},{},{}", snap.t, i, p.weight);
            for c in p.r.0.iter().chain(&p.u.0).chain(&p.self_force.0) {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
    }
    out
}

fn run_ensemble(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<Artifact>, CliError> {
    let spec = scenario.ensemble.as_ref().expect("validated ensemble section");
    let seed = scenario.seed.expect("validated seed");
    let mp = MaxwellianParams::new(
        spec.mu,
        spec.temperature,
        FourVector::from_spatial_velocity(spec.drift),
        scenario.particle.m0,
    )?;
    trace(opts, format!("sampling {} particles (seed {seed})", spec.count));
    let ensemble = sample_maxwellian_in_box(&mp, spec.count, seed, spec.box_length)?;
    let moments = compute_moments(&ensemble)?;
    let closed = maxwellian_closed_form(&mp, 0.0, 0.0, scenario.particle.q)?;

    let cfg = scenario.integrator_config();
    trace(opts, format!("evolving with model {} to t = {:?}", cfg.model, spec.times.last()));
    let snaps = evolve_ensemble(&ensemble, &cfg, &spec.times)?;
    let cross = spec.box_length * spec.box_length;
    let grid = BinGrid::new(spec.axis, 0.0, spec.box_length, cross, spec.bins);
    let residuals = moment_residuals(&snaps, &scenario.field, &scenario.particle, &grid)?;

    let report = json!({
        "mode": "ensemble",
        "model": cfg.model.as_str(),
        "count": spec.count,
        "seed": seed,
        "sampler": ensemble.sampler,
        "closed_form": closed,
        "moments": moments,
        "residuals": residuals,
        "max_z_rms": residuals.max_z_rms(),
    });
    Ok(vec![
        Artifact::text("ensemble.csv", ensemble.to_csv()),
        Artifact::text("snapshots.csv", snapshots_csv(&snaps)),
        Artifact::json("report.json", &report)?,
    ])
}

fn run_liouville(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<Artifact>, CliError> {
    let spec = scenario.liouville.expect("validated liouville section");
    let cfg = scenario.integrator_config();
    trace(opts, format!("volume check over {} steps, {:?} coordinates", cfg.steps(), spec.coordinates));
    let rep = liouville_volume_series(
        &scenario.initial_state(),
        &cfg,
        spec.delta,
        spec.coordinates,
        spec.coupling,
        spec.checkpoints,
    )?;
    let mut csv = String::from("s,determinant,ln_determinant,divergence_integral\n");
    for (k, (s, d)) in rep.s.iter().zip(&rep.determinant).enumerate() {
        let div = rep.divergence_integral.get(k).map_or(String::new(), |v| v.to_string());
        let _ = writeln!(csv, "{s},{d},{},{div}", d.ln());
    }
    let report = json!({
        "mode": "liouville",
        "model": cfg.model.as_str(),
        "coordinates": spec.coordinates,
        "coupling": spec.coupling,
        "delta": spec.delta,
        "series": rep,
        "final_determinant": rep.final_determinant(),
    });
    Ok(vec![Artifact::text("volume.csv", csv), Artifact::json("report.json", &report)?])
}

#[derive(Serialize)]
struct FluidPoint {
    r: FourVector,
    u: FourVector,
    density: f64,
    iterated: LlIterated,
    force: FluidLlForce,
    /// Single-particle LL force per unit mass at the local fluid velocity.
    particle: FourVector,
}

fn fluid_point<C: FluidStateCallbacks>(fluid: &C, scenario: &Scenario, r: FourVector) -> rr_core::Result<FluidPoint> {
    let params = &scenario.particle;
    let u = fluid.velocity(&r);
    Ok(FluidPoint {
        r,
        u,
        density: fluid.density(&r),
        iterated: ll_iterated_acceleration(fluid, &scenario.field, &r, params)?,
        force: fluid_ll_force(fluid, &scenario.field, &r, params)?,
        particle: self_force_ll_iterative(&scenario.field, &r, &u, params) * (1.0 / params.m0),
    })
}

fn run_fluid_check(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<Artifact>, CliError> {
    let spec = scenario.fluid.as_ref().expect("validated fluid section");
    trace(opts, format!("fluid terms at {} points", spec.points.len()));
    let points: Vec<FluidPoint> = spec
        .points
        .par_iter()
        .map(|&p| {
            let r = FourVector(p);
            match &spec.state {
                FluidState::Uniform(f) => fluid_point(f, scenario, r),
                FluidState::Shear(f) => fluid_point(f, scenario, r),
                FluidState::Isothermal(f) => fluid_point(f, scenario, r),
            }
        })
        .collect::<rr_core::Result<_>>()?;
    let mut csv = String::from("point,term,c0,c1,c2,c3\n");
    for (i, p) in points.iter().enumerate() {
        let rows = [
            ("field_gradient", p.iterated.field_gradient),
            ("field_field", p.iterated.field_field),
            ("field_pressure", p.iterated.field_pressure),
            ("pressure_log_density", p.iterated.pressure_log_density),
            ("pressure_curvature", p.iterated.pressure_curvature),
            ("mass", p.force.mass),
            ("h1", p.force.h1),
            ("h2", p.force.h2),
            ("total", p.force.total),
            ("particle", p.particle),
        ];
        for (name, v) in rows {
            let _ = writeln!(csv, "{i},{name},{},{},{},{}", v[0], v[1], v[2], v[3]);
        }
    }
    let max_particle_gap = points
        .iter()
        .fold(0.0_f64, |m, p| m.max((p.force.total - p.particle).max_abs()));
    let report = json!({
        "mode": "fluid-check",
        "state": spec.state,
        "points": points,
        "max_particle_gap": max_particle_gap,
    });
    Ok(vec![Artifact::text("fluid.csv", csv), Artifact::json("report.json", &report)?])
}

