//! Scenario documents.
//!
//! The canonical format is TOML. Every section except `[particle]` is
//! optional and falls back to documented defaults; validation reports every
//! problem at once, each tagged with its dotted field path.

use rr_core::fluid::{IsothermalFluid, ShearFlow, UniformFluid};
use rr_core::integrator::{HistoryCoupling, PhaseCoordinates};
use rr_core::studies::PrescribedMotion;
use rr_core::{
    ConstraintMode, ExternalFieldModel, FourVector, InitialState, IntegratorConfig, ParticleParams, PlaneWavePulse,
    SelfForceModel,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, FieldError};

/// What a run does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Integrate one particle.
    Single,
    /// σ-halving convergence study of the asymptotic models.
    Sweep,
    /// Sample, evolve and take moments of a Maxwellian ensemble.
    Ensemble,
    /// Phase-space volume check.
    Liouville,
    /// Fluid self-force term breakdown at sample points.
    FluidCheck,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Single, Mode::Sweep, Mode::Ensemble, Mode::Liouville, Mode::FluidCheck];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Sweep => "sweep",
            Mode::Ensemble => "ensemble",
            Mode::Liouville => "liouville",
            Mode::FluidCheck => "fluid-check",
        }
    }

    fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn needs_seed(&self) -> bool {
        matches!(self, Mode::Ensemble)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    pub step: f64,
    pub span: f64,
    pub constraint: ConstraintMode,
    pub renormalize_mass: bool,
    pub retention: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub s0: f64,
    pub position: [f64; 4],
    /// Spatial part of the four-velocity.
    pub u: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub motion: PrescribedMotion,
    pub halvings: usize,
    pub s_eval: f64,
    pub step_fraction: f64,
    pub models: Vec<SelfForceModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub count: usize,
    pub temperature: f64,
    pub mu: f64,
    /// Spatial part of the fluid four-velocity.
    pub drift: [f64; 3],
    pub box_length: f64,
    /// Lab times of the snapshots.
    pub times: Vec<f64>,
    pub bins: usize,
    pub axis: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiouvilleSpec {
    pub delta: f64,
    pub coordinates: PhaseCoordinates,
    pub coupling: HistoryCoupling,
    pub checkpoints: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FluidState {
    Uniform(UniformFluid),
    Shear(ShearFlow),
    Isothermal(IsothermalFluid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidSpec {
    pub state: FluidState,
    pub points: Vec<[f64; 4]>,
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub mode: Mode,
    pub seed: Option<u64>,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
    pub particle: ParticleParams,
    pub field: ExternalFieldModel,
    pub model: SelfForceModel,
    pub integrator: IntegratorSpec,
    pub initial: InitialSpec,
    pub output_dir: String,
    pub sweep: Option<SweepSpec>,
    pub ensemble: Option<EnsembleSpec>,
    pub liouville: Option<LiouvilleSpec>,
    pub fluid: Option<FluidSpec>,
}

impl Scenario {
    pub fn integrator_config(&self) -> IntegratorConfig {
        let mut cfg = IntegratorConfig::new(self.particle, self.field, self.model, self.integrator.step, self.integrator.span);
        cfg.constraint = self.integrator.constraint;
        cfg.renormalize_mass = self.integrator.renormalize_mass;
        cfg.retention = self.integrator.retention;
        cfg
    }

    pub fn initial_state(&self) -> InitialState {
        InitialState::new(
            self.initial.s0,
            FourVector(self.initial.position),
            FourVector::from_spatial_velocity(self.initial.u),
        )
    }

    /// The single-particle scenarios of a sweep: σ₀/2^k for k < halvings,
    /// with the step scaled along so each stays within its σ/4 bound.
    pub fn sweep_scenarios(&self) -> Vec<Scenario> {
        let Some(sweep) = &self.sweep else {
            return Vec::new();
        };
        (0..sweep.halvings)
            .map(|k| {
                let f = 0.5f64.powi(k as i32);
                let mut s = self.clone();
                s.mode = Mode::Single;
                s.sweep = None;
                s.particle.sigma *= f;
                s.integrator.step *= f;
                s
            })
            .collect()
    }

    /// Canonical TOML text; parsing it gives back an equal scenario.
    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(&RawScenario::from(self)).map_err(|e| CliError::Serialize(e.to_string()))
    }
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    parse_scenario_with_seed(text, None)
}

/// As [`parse_scenario`], with the seed replaced before validation.
pub fn parse_scenario_with_seed(text: &str, seed: Option<u64>) -> Result<Scenario, CliError> {
    let mut raw: RawScenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |span| line_col(text, span.start));
        CliError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    if seed.is_some() {
        raw.seed = seed;
    }
    raw.validate()
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = text.get(..offset).unwrap_or(text);
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().unwrap_or("").chars().count() + 1;
    (line, column)
}

// ---------------------------------------------------------------------------
// Document shape. Everything optional so that validation can see (and
// report) all missing or bad values at once.

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    mode: Option<String>,
    seed: Option<u64>,
    threads: Option<usize>,
    particle: Option<RawParticle>,
    field: Option<RawField>,
    self_force: Option<RawSelfForce>,
    integrator: Option<RawIntegrator>,
    initial: Option<RawInitial>,
    output: Option<RawOutput>,
    sweep: Option<RawSweep>,
    ensemble: Option<RawEnsemble>,
    liouville: Option<RawLiouville>,
    fluid: Option<RawFluid>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParticle {
    q: Option<f64>,
    m0: Option<f64>,
    sigma: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    kind: Option<String>,
    e: Option<[f64; 3]>,
    b: Option<[f64; 3]>,
    amplitude: Option<f64>,
    omega: Option<f64>,
    wave: Option<[f64; 4]>,
    polarization: Option<[f64; 4]>,
    phase_start: Option<f64>,
    phase_width: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSelfForce {
    model: Option<String>,
    renormalize_mass: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    step: Option<f64>,
    span: Option<f64>,
    constraint: Option<String>,
    retention: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    s0: Option<f64>,
    position: Option<[f64; 4]>,
    u: Option<[f64; 3]>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    halvings: Option<usize>,
    s_eval: Option<f64>,
    step_fraction: Option<f64>,
    models: Option<Vec<String>>,
    motion: Option<RawMotion>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMotion {
    kind: Option<String>,
    velocity: Option<[f64; 3]>,
    radius: Option<f64>,
    omega: Option<f64>,
    acceleration: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    count: Option<usize>,
    temperature: Option<f64>,
    mu: Option<f64>,
    drift: Option<[f64; 3]>,
    box_length: Option<f64>,
    times: Option<Vec<f64>>,
    bins: Option<usize>,
    axis: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLiouville {
    delta: Option<f64>,
    coordinates: Option<String>,
    coupling: Option<String>,
    checkpoints: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFluid {
    kind: Option<String>,
    u: Option<[f64; 3]>,
    density: Option<f64>,
    pressure: Option<f64>,
    v0: Option<f64>,
    shear: Option<f64>,
    temperature: Option<f64>,
    n0: Option<f64>,
    gradient: Option<[f64; 4]>,
    hessian: Option<[[f64; 4]; 4]>,
    points: Option<Vec<[f64; 4]>>,
}

// ---------------------------------------------------------------------------
// Validation.

#[derive(Default)]
struct Checker {
    errors: Vec<FieldError>,
}

impl Checker {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(FieldError::new(path, message));
    }

    fn name(path: &str) -> &str {
        path.rsplit('.').next().unwrap_or(path)
    }

    fn required<T: Default>(&mut self, path: &str, v: Option<T>) -> T {
        v.unwrap_or_else(|| {
            self.push(path, format!("{} is required", Self::name(path)));
            T::default()
        })
    }

    fn finite(&mut self, path: &str, v: f64) -> f64 {
        if !v.is_finite() {
            self.push(path, format!("{} must be finite", Self::name(path)));
        }
        v
    }

    fn finite_all(&mut self, path: &str, v: &[f64]) {
        if v.iter().any(|x| !x.is_finite()) {
            self.push(path, format!("{} must be finite", Self::name(path)));
        }
    }

    fn positive(&mut self, path: &str, v: f64) -> f64 {
        if !(v > 0.0 && v.is_finite()) {
            self.push(path, format!("{} must be > 0", Self::name(path)));
        }
        v
    }

    fn non_negative(&mut self, path: &str, v: f64) -> f64 {
        if !(v >= 0.0 && v.is_finite()) {
            self.push(path, format!("{} must be >= 0", Self::name(path)));
        }
        v
    }

    fn choice<T: Copy>(&mut self, path: &str, v: Option<&str>, default: T, options: &[(&str, T)]) -> T {
        let Some(s) = v else {
            return default;
        };
        match options.iter().find(|(k, _)| *k == s) {
            Some((_, t)) => *t,
            None => {
                let names: Vec<&str> = options.iter().map(|(k, _)| *k).collect();
                self.push(path, format!("unknown value '{s}' (expected one of {})", names.join(", ")));
                default
            }
        }
    }
}

impl RawScenario {
    fn validate(self) -> Result<Scenario, CliError> {
        let mut c = Checker::default();
        let mode = match self.mode.as_deref() {
            None => Mode::Single,
            Some(s) => Mode::parse(s).unwrap_or_else(|| {
                let names: Vec<&str> = Mode::ALL.iter().map(Mode::as_str).collect();
                c.push("mode", format!("unknown mode '{s}' (expected one of {})", names.join(", ")));
                Mode::Single
            }),
        };
        if mode.needs_seed() && self.seed.is_none() {
            c.push("seed", format!("seed is required for {} mode", mode.as_str()));
        }

        let particle = validate_particle(&mut c, self.particle);
        let field = validate_field(&mut c, self.field);
        let sf = self.self_force.unwrap_or_default();
        let model = match sf.model.as_deref() {
            None => SelfForceModel::Exact,
            Some(s) => s.parse().unwrap_or_else(|_| {
                let names: Vec<&str> = SelfForceModel::ALL.iter().map(SelfForceModel::as_str).collect();
                c.push("self_force.model", format!("unknown model '{s}' (expected one of {})", names.join(", ")));
                SelfForceModel::Exact
            }),
        };
        let integrator = validate_integrator(&mut c, self.integrator, &particle, sf.renormalize_mass.unwrap_or(false));
        let initial = validate_initial(&mut c, self.initial);
        let output_dir = self.output.and_then(|o| o.dir).unwrap_or_else(|| "out".into());
        if output_dir.trim().is_empty() {
            c.push("output.dir", "dir must not be empty");
        }

        let require = |c: &mut Checker, present: bool, section: &str, m: Mode| {
            if mode == m && !present {
                c.push(section, format!("section [{section}] is required for {} mode", m.as_str()));
            }
        };
        require(&mut c, self.sweep.is_some(), "sweep", Mode::Sweep);
        require(&mut c, self.ensemble.is_some(), "ensemble", Mode::Ensemble);
        require(&mut c, self.fluid.is_some(), "fluid", Mode::FluidCheck);
        let sweep = self.sweep.map(|s| validate_sweep(&mut c, s));
        let ensemble = self.ensemble.map(|e| validate_ensemble(&mut c, e, particle.m0));
        let liouville = match (self.liouville, mode) {
            (Some(l), _) => Some(validate_liouville(&mut c, l)),
            (None, Mode::Liouville) => Some(validate_liouville(&mut c, RawLiouville::default())),
            (None, _) => None,
        };
        let fluid = self.fluid.map(|f| validate_fluid(&mut c, f));

        if !c.errors.is_empty() {
            return Err(CliError::Validation(c.errors));
        }
        Ok(Scenario {
            mode,
            seed: self.seed,
            threads: self.threads.unwrap_or(0),
            particle,
            field,
            model,
            integrator,
            initial,
            output_dir,
            sweep,
            ensemble,
            liouville,
            fluid,
        })
    }
}

fn validate_particle(c: &mut Checker, raw: Option<RawParticle>) -> ParticleParams {
    let p = raw.unwrap_or_default();
    let q = c.required("particle.q", p.q);
    c.finite("particle.q", q);
    let m0 = c.positive("particle.m0", p.m0.unwrap_or(1.0));
    let sigma = match p.sigma {
        Some(s) => c.positive("particle.sigma", s),
        None => {
            c.push("particle.sigma", "sigma is required");
            1.0
        }
    };
    ParticleParams { q, m0, sigma }
}

fn validate_field(c: &mut Checker, raw: Option<RawField>) -> ExternalFieldModel {
    let Some(f) = raw else {
        return ExternalFieldModel::Zero;
    };
    let kind = f.kind.as_deref().unwrap_or("zero");
    match kind {
        "zero" => ExternalFieldModel::Zero,
        "uniform_electric" => {
            let e = c.required("field.e", f.e);
            c.finite_all("field.e", &e);
            ExternalFieldModel::UniformElectric(e)
        }
        "uniform_magnetic" => {
            let b = c.required("field.b", f.b);
            c.finite_all("field.b", &b);
            ExternalFieldModel::UniformMagnetic(b)
        }
        "plane_wave_pulse" => {
            let amplitude = c.required("field.amplitude", f.amplitude);
            c.finite("field.amplitude", amplitude);
            let width = c.required("field.phase_width", f.phase_width);
            if f.phase_width.is_some() {
                c.positive("field.phase_width", width);
            }
            let start = c.finite("field.phase_start", f.phase_start.unwrap_or(0.0));
            let (wave, polarization) = match (f.wave, f.omega) {
                (Some(k), _) => (FourVector(k), FourVector(c.required("field.polarization", f.polarization))),
                (None, Some(w)) => {
                    c.positive("field.omega", w);
                    (FourVector::new(w, w, 0.0, 0.0), FourVector::new(0.0, 0.0, 1.0, 0.0))
                }
                (None, None) => {
                    c.push("field.wave", "either wave (with polarization) or omega is required");
                    (FourVector::new(1.0, 1.0, 0.0, 0.0), FourVector::new(0.0, 0.0, 1.0, 0.0))
                }
            };
            match PlaneWavePulse::new(amplitude, wave, polarization, start, width.max(f64::MIN_POSITIVE)) {
                Ok(p) => ExternalFieldModel::PlaneWavePulse(p),
                Err(e) => {
                    c.push("field", e.to_string());
                    ExternalFieldModel::Zero
                }
            }
        }
        other => {
            c.push(
                "field.kind",
                format!("unknown value '{other}' (expected one of zero, uniform_electric, uniform_magnetic, plane_wave_pulse)"),
            );
            ExternalFieldModel::Zero
        }
    }
}

fn validate_integrator(c: &mut Checker, raw: Option<RawIntegrator>, p: &ParticleParams, renormalize_mass: bool) -> IntegratorSpec {
    let r = raw.unwrap_or_default();
    // The default step follows sigma; only an explicit step is checked, so a
    // bad sigma is reported once.
    let step = match r.step {
        Some(h) => {
            if c.positive("integrator.step", h) > p.sigma / 4.0 * (1.0 + 1e-12) && p.sigma > 0.0 {
                c.push("integrator.step", "step must be <= sigma/4");
            }
            h
        }
        None => p.sigma / 8.0,
    };
    let span = c.non_negative("integrator.span", r.span.unwrap_or(1.0));
    let constraint = c.choice(
        "integrator.constraint",
        r.constraint.as_deref(),
        ConstraintMode::Projection,
        &[("projection", ConstraintMode::Projection), ("none", ConstraintMode::None)],
    );
    if let Some(h) = r.retention {
        if !(h >= 2.0 * p.sigma) || !h.is_finite() {
            c.push("integrator.retention", "retention must be >= 2 sigma");
        }
    }
    IntegratorSpec {
        step,
        span,
        constraint,
        renormalize_mass,
        retention: r.retention,
    }
}

fn validate_initial(c: &mut Checker, raw: Option<RawInitial>) -> InitialSpec {
    let r = raw.unwrap_or_default();
    let s0 = c.finite("initial.s0", r.s0.unwrap_or(0.0));
    let position = r.position.unwrap_or([0.0; 4]);
    c.finite_all("initial.position", &position);
    let u = r.u.unwrap_or([0.0; 3]);
    c.finite_all("initial.u", &u);
    InitialSpec { s0, position, u }
}

fn validate_sweep(c: &mut Checker, s: RawSweep) -> SweepSpec {
    let halvings = s.halvings.unwrap_or(4);
    if halvings < 2 {
        c.push("sweep.halvings", "halvings must be >= 2");
    }
    let s_eval = c.finite("sweep.s_eval", s.s_eval.unwrap_or(1.0));
    let step_fraction = s.step_fraction.unwrap_or(1.0 / 64.0);
    if !(step_fraction > 0.0 && step_fraction <= 0.25) {
        c.push("sweep.step_fraction", "step_fraction must be in (0, 1/4]");
    }
    let names = s
        .models
        .unwrap_or_else(|| vec!["retarded_hamiltonian".into(), "present_time".into()]);
    if names.is_empty() {
        c.push("sweep.models", "models must not be empty");
    }
    let mut models = Vec::new();
    for (i, name) in names.iter().enumerate() {
        match name.parse::<SelfForceModel>() {
            Ok(m @ (SelfForceModel::RetardedHamiltonian | SelfForceModel::PresentTime)) => models.push(m),
            _ => c.push(
                &format!("sweep.models[{i}]"),
                format!("'{name}' is not a history-based asymptotic model (expected retarded_hamiltonian or present_time)"),
            ),
        }
    }
    let motion = validate_motion(c, s.motion);
    SweepSpec {
        motion,
        halvings,
        s_eval,
        step_fraction,
        models,
    }
}

fn validate_motion(c: &mut Checker, raw: Option<RawMotion>) -> PrescribedMotion {
    let fallback = PrescribedMotion::Inertial { velocity: [0.0; 3] };
    let Some(m) = raw else {
        c.push("sweep.motion", "motion is required");
        return fallback;
    };
    let motion = match m.kind.as_deref() {
        Some("inertial") => PrescribedMotion::Inertial {
            velocity: m.velocity.unwrap_or([0.0; 3]),
        },
        Some("circular") => PrescribedMotion::Circular {
            radius: c.required("sweep.motion.radius", m.radius),
            omega: c.required("sweep.motion.omega", m.omega),
        },
        Some("hyperbolic") => PrescribedMotion::Hyperbolic {
            acceleration: c.required("sweep.motion.acceleration", m.acceleration),
        },
        Some(other) => {
            c.push(
                "sweep.motion.kind",
                format!("unknown value '{other}' (expected one of inertial, circular, hyperbolic)"),
            );
            return fallback;
        }
        None => {
            c.push("sweep.motion.kind", "kind is required");
            return fallback;
        }
    };
    if let Err(e) = motion.validate() {
        c.push("sweep.motion", e.to_string());
    }
    motion
}

fn validate_ensemble(c: &mut Checker, e: RawEnsemble, mass: f64) -> EnsembleSpec {
    let count = e.count.unwrap_or(10_000);
    if count == 0 {
        c.push("ensemble.count", "count must be > 0");
    }
    let temperature = c.required("ensemble.temperature", e.temperature);
    if e.temperature.is_some() {
        c.positive("ensemble.temperature", temperature);
    }
    let mu = c.finite("ensemble.mu", e.mu.unwrap_or(mass));
    let drift = e.drift.unwrap_or([0.0; 3]);
    c.finite_all("ensemble.drift", &drift);
    let box_length = c.positive("ensemble.box_length", e.box_length.unwrap_or(1.0));
    let times = e.times.unwrap_or_else(|| vec![0.0, 0.5]);
    if times.len() < 2 {
        c.push("ensemble.times", "times needs at least two snapshots");
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| !(w[1] > w[0])) {
        c.push("ensemble.times", "times must be finite, >= 0 and strictly increasing");
    }
    let bins = e.bins.unwrap_or(20);
    if bins == 0 {
        c.push("ensemble.bins", "bins must be > 0");
    }
    let axis = e.axis.unwrap_or(1);
    if !(1..=3).contains(&axis) {
        c.push("ensemble.axis", "axis must be 1, 2 or 3");
    }
    EnsembleSpec {
        count,
        temperature,
        mu,
        drift,
        box_length,
        times,
        bins,
        axis,
    }
}

fn validate_liouville(c: &mut Checker, l: RawLiouville) -> LiouvilleSpec {
    let delta = c.positive("liouville.delta", l.delta.unwrap_or(1e-6));
    let coordinates = c.choice(
        "liouville.coordinates",
        l.coordinates.as_deref(),
        PhaseCoordinates::Canonical,
        &[("canonical", PhaseCoordinates::Canonical), ("on_shell", PhaseCoordinates::OnShell)],
    );
    let coupling = c.choice(
        "liouville.coupling",
        l.coupling.as_deref(),
        HistoryCoupling::Frozen,
        &[("frozen", HistoryCoupling::Frozen), ("self_consistent", HistoryCoupling::SelfConsistent)],
    );
    let checkpoints = l.checkpoints.unwrap_or(4);
    if checkpoints == 0 {
        c.push("liouville.checkpoints", "checkpoints must be > 0");
    }
    LiouvilleSpec {
        delta,
        coordinates,
        coupling,
        checkpoints,
    }
}

fn validate_fluid(c: &mut Checker, f: RawFluid) -> FluidSpec {
    let u = f.u.unwrap_or([0.0; 3]);
    c.finite_all("fluid.u", &u);
    let velocity = FourVector::from_spatial_velocity(u);
    let pressure = c.non_negative("fluid.pressure", f.pressure.unwrap_or(0.0));
    let density = |c: &mut Checker| {
        let n = c.required("fluid.density", f.density);
        if f.density.is_some() {
            c.positive("fluid.density", n);
        }
        n
    };
    let state = match f.kind.as_deref() {
        Some("uniform") => FluidState::Uniform(UniformFluid {
            velocity,
            density: density(c),
            pressure,
        }),
        Some("shear") => {
            let shear = c.required("fluid.shear", f.shear);
            c.finite("fluid.shear", shear);
            FluidState::Shear(ShearFlow {
                v0: c.finite("fluid.v0", f.v0.unwrap_or(0.0)),
                shear,
                density: density(c),
                pressure,
            })
        }
        Some("isothermal") => {
            let temperature = c.required("fluid.temperature", f.temperature);
            if f.temperature.is_some() {
                c.positive("fluid.temperature", temperature);
            }
            let n0 = c.required("fluid.n0", f.n0);
            if f.n0.is_some() {
                c.positive("fluid.n0", n0);
            }
            let gradient = f.gradient.unwrap_or([0.0; 4]);
            c.finite_all("fluid.gradient", &gradient);
            let hessian = f.hessian.unwrap_or([[0.0; 4]; 4]);
            c.finite_all("fluid.hessian", hessian.as_flattened());
            FluidState::Isothermal(IsothermalFluid {
                velocity,
                temperature,
                n0,
                gradient,
                hessian,
            })
        }
        Some(other) => {
            c.push("fluid.kind", format!("unknown value '{other}' (expected one of uniform, shear, isothermal)"));
            FluidState::Uniform(UniformFluid { velocity, density: 1.0, pressure })
        }
        None => {
            c.push("fluid.kind", "kind is required");
            FluidState::Uniform(UniformFluid { velocity, density: 1.0, pressure })
        }
    };
    let points = f.points.unwrap_or_else(|| vec![[0.0; 4]]);
    if points.is_empty() {
        c.push("fluid.points", "points must not be empty");
    }
    for (i, p) in points.iter().enumerate() {
        c.finite_all(&format!("fluid.points[{i}]"), p);
    }
    FluidSpec { state, points }
}

// ---------------------------------------------------------------------------
// Canonical serialization: every value spelled out.

fn spatial(u: &FourVector) -> [f64; 3] {
    [u[1], u[2], u[3]]
}

impl From<&Scenario> for RawScenario {
    fn from(s: &Scenario) -> Self {
        let field = match s.field {
            ExternalFieldModel::Zero => RawField {
                kind: Some("zero".into()),
                ..Default::default()
            },
            ExternalFieldModel::UniformElectric(e) => RawField {
                kind: Some("uniform_electric".into()),
                e: Some(e),
                ..Default::default()
            },
            ExternalFieldModel::UniformMagnetic(b) => RawField {
                kind: Some("uniform_magnetic".into()),
                b: Some(b),
                ..Default::default()
            },
            ExternalFieldModel::PlaneWavePulse(p) => RawField {
                kind: Some("plane_wave_pulse".into()),
                amplitude: Some(p.amplitude()),
                wave: Some(p.wave().0),
                polarization: Some(p.polarization().0),
                phase_start: Some(p.phase_start()),
                phase_width: Some(p.phase_width()),
                ..Default::default()
            },
        };
        let constraint = match s.integrator.constraint {
            ConstraintMode::Projection => "projection",
            ConstraintMode::None => "none",
        };
        RawScenario {
            mode: Some(s.mode.as_str().into()),
            seed: s.seed,
            threads: Some(s.threads),
            particle: Some(RawParticle {
                q: Some(s.particle.q),
                m0: Some(s.particle.m0),
                sigma: Some(s.particle.sigma),
            }),
            field: Some(field),
            self_force: Some(RawSelfForce {
                model: Some(s.model.as_str().into()),
                renormalize_mass: Some(s.integrator.renormalize_mass),
            }),
            integrator: Some(RawIntegrator {
                step: Some(s.integrator.step),
                span: Some(s.integrator.span),
                constraint: Some(constraint.into()),
                retention: s.integrator.retention,
            }),
            initial: Some(RawInitial {
                s0: Some(s.initial.s0),
                position: Some(s.initial.position),
                u: Some(s.initial.u),
            }),
            output: Some(RawOutput {
                dir: Some(s.output_dir.clone()),
            }),
            sweep: s.sweep.as_ref().map(|w| RawSweep {
                halvings: Some(w.halvings),
                s_eval: Some(w.s_eval),
                step_fraction: Some(w.step_fraction),
                models: Some(w.models.iter().map(|m| m.as_str().into()).collect()),
                motion: Some(match w.motion {
                    PrescribedMotion::Inertial { velocity } => RawMotion {
                        kind: Some("inertial".into()),
                        velocity: Some(velocity),
                        ..Default::default()
                    },
                    PrescribedMotion::Circular { radius, omega } => RawMotion {
                        kind: Some("circular".into()),
                        radius: Some(radius),
                        omega: Some(omega),
                        ..Default::default()
                    },
                    PrescribedMotion::Hyperbolic { acceleration } => RawMotion {
                        kind: Some("hyperbolic".into()),
                        acceleration: Some(acceleration),
                        ..Default::default()
                    },
                }),
            }),
            ensemble: s.ensemble.as_ref().map(|e| RawEnsemble {
                count: Some(e.count),
                temperature: Some(e.temperature),
                mu: Some(e.mu),
                drift: Some(e.drift),
                box_length: Some(e.box_length),
                times: Some(e.times.clone()),
                bins: Some(e.bins),
                axis: Some(e.axis),
            }),
            liouville: s.liouville.map(|l| RawLiouville {
                delta: Some(l.delta),
                coordinates: Some(
                    match l.coordinates {
                        PhaseCoordinates::Canonical => "canonical",
                        PhaseCoordinates::OnShell => "on_shell",
                    }
                    .into(),
                ),
                coupling: Some(
                    match l.coupling {
                        HistoryCoupling::Frozen => "frozen",
                        HistoryCoupling::SelfConsistent => "self_consistent",
                    }
                    .into(),
                ),
                checkpoints: Some(l.checkpoints),
            }),
            fluid: s.fluid.as_ref().map(|f| {
                let mut raw = RawFluid {
                    points: Some(f.points.clone()),
                    ..Default::default()
                };
                match f.state {
                    FluidState::Uniform(u) => {
                        raw.kind = Some("uniform".into());
                        raw.u = Some(spatial(&u.velocity));
                        raw.density = Some(u.density);
                        raw.pressure = Some(u.pressure);
                    }
                    FluidState::Shear(sh) => {
                        raw.kind = Some("shear".into());
                        raw.v0 = Some(sh.v0);
                        raw.shear = Some(sh.shear);
                        raw.density = Some(sh.density);
                        raw.pressure = Some(sh.pressure);
                    }
                    FluidState::Isothermal(iso) => {
                        raw.kind = Some("isothermal".into());
                        raw.u = Some(spatial(&iso.velocity));
                        raw.temperature = Some(iso.temperature);
                        raw.n0 = Some(iso.n0);
                        raw.gradient = Some(iso.gradient);
                        raw.hessian = Some(iso.hessian);
                    }
                }
                raw
            }),
        }
    }
}
