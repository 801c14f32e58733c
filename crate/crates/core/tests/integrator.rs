use rr_core::integrator::{
    liouville_volume_check, liouville_volume_series, velocity_divergence_ll, HistoryCoupling, PhaseCoordinates,
};
use rr_core::{
    run_scenario, ConstraintMode, Error, ExternalFieldModel, FourVector, InitialState, IntegratorConfig,
    ParticleParams, PlaneWavePulse, SelfForceModel,
};

fn helix_error(step: f64) -> f64 {
    // Uniform B along z: proper gyro-frequency Ω = qB/m, helix about the z axis.
    let (q, b) = (1.0, 2.0);
    let p = ParticleParams::new(q, 1.0, 1.0).unwrap();
    let field = ExternalFieldModel::UniformMagnetic([0.0, 0.0, b]);
    let u0 = FourVector::from_spatial_velocity([0.6, 0.0, 0.3]);
    let span = 3.0;
    let cfg = IntegratorConfig::new(p, field, SelfForceModel::None, step, span);
    let out = run_scenario(&InitialState::new(0.0, FourVector::ZERO, u0), &cfg).unwrap();
    let w = q * b;
    let s = out.history.last().s;
    let (sn, cs) = (w * s).sin_cos();
    let ux = u0[1];
    // F_{12} = −B_z gives du^x/ds = Ω u^y, du^y/ds = −Ω u^x.
    let exact = FourVector::new(
        u0[0] * s,
        ux / w * sn,
        ux / w * (cs - 1.0),
        u0[3] * s,
    );
    (out.history.last().r - exact).max_abs()
}

#[test]
fn helix_is_fourth_order() {
    let e1 = helix_error(0.02);
    let e2 = helix_error(0.01);
    let ratio = e1 / e2;
    assert!((ratio - 16.0).abs() < 2.0, "error ratio {ratio} ({e1:e} → {e2:e})");
}

#[test]
fn shell_constraint_holds_with_exact_self_force() {
    let p = ParticleParams::new(0.1, 1.0, 0.05).unwrap();
    let field = ExternalFieldModel::UniformMagnetic([0.0, 0.0, 5.0]);
    let cfg = IntegratorConfig::new(p, field, SelfForceModel::Exact, 0.0125, 125.0);
    let init = InitialState::new(0.0, FourVector::ZERO, FourVector::from_spatial_velocity([0.5, 0.0, 0.0]));
    let out = run_scenario(&init, &cfg).unwrap();
    assert_eq!(out.diagnostics.len(), 10_001);
    assert!(out.max_shell_drift() < 1e-9, "{:e}", out.max_shell_drift());
}

#[test]
fn step_larger_than_quarter_sigma_is_rejected() {
    let p = ParticleParams::new(0.1, 1.0, 0.04).unwrap();
    let cfg = IntegratorConfig::new(p, ExternalFieldModel::Zero, SelfForceModel::Exact, 0.011, 1.0);
    let init = InitialState::new(0.0, FourVector::ZERO, FourVector::rest());
    assert!(matches!(run_scenario(&init, &cfg), Err(Error::InvalidConfig(_))));
}

fn pulse_config(sigma: f64, q: f64, model: SelfForceModel, span: f64) -> IntegratorConfig {
    let p = ParticleParams::new(q, 1.0, sigma).unwrap();
    let pulse = PlaneWavePulse::along_x(0.1, 1.0, 0.0, 20.0).unwrap();
    IntegratorConfig::new(p, ExternalFieldModel::PlaneWavePulse(pulse), model, sigma / 16.0, span)
}

#[test]
fn smooth_turn_on_leaves_self_force_below_roundoff_scale() {
    // The pulse reaches the particle at s = 0; on [0, σ] the retarded point
    // still lies on the inertial past.
    let (sigma, q) = (0.01, 0.1);
    let init = InitialState::new(0.0, FourVector::ZERO, FourVector::rest());
    let exact = run_scenario(&init, &pulse_config(sigma, q, SelfForceModel::Exact, sigma)).unwrap();
    let bare = run_scenario(&init, &pulse_config(sigma, q, SelfForceModel::None, sigma)).unwrap();
    let bound = 1e-14 * q * q / (sigma * sigma);
    assert!(exact.max_self_force() < bound, "{:e} vs {bound:e}", exact.max_self_force());
    // The external pulse does act: the particle is no longer at rest.
    assert!(bare.history.last().u[2].abs() > 0.0);
    for (a, b) in exact.history.samples().zip(bare.history.samples()) {
        assert!((a.u - b.u).max_abs() < 1e-15);
    }
}

#[test]
fn sudden_turn_on_gives_quadratic_transient() {
    // A step-function field is not C³: the exact force on the turn-on window
    // is set by the departure from the inertial extrapolation, ∝ τ².
    let (sigma, q) = (0.05, 0.2);
    let p = ParticleParams::new(q, 1.0, sigma).unwrap();
    let cfg = IntegratorConfig::new(p, ExternalFieldModel::UniformElectric([1.0, 0.0, 0.0]), SelfForceModel::Exact, sigma / 64.0, sigma);
    let init = InitialState::new(0.0, FourVector::ZERO, FourVector::rest());
    let out = run_scenario(&init, &cfg).unwrap();
    let at = |k: usize| out.diagnostics[k].self_force;
    assert!(at(8) > 0.0);
    let ratio = at(16) / at(8);
    assert!((ratio - 4.0).abs() < 0.4, "τ-scaling ratio {ratio}");
}

fn cyclotron_init() -> InitialState {
    InitialState::new(0.0, FourVector::ZERO, FourVector::from_spatial_velocity([0.3, 0.0, 0.0]))
}

#[test]
fn lorentz_flow_preserves_canonical_volume() {
    let p = ParticleParams::new(0.05, 1.0, 0.05).unwrap();
    let cfg = IntegratorConfig::new(p, ExternalFieldModel::UniformMagnetic([0.0, 0.0, 10.0]), SelfForceModel::None, 0.0125, 12.5);
    let det = liouville_volume_check(&cyclotron_init(), &cfg, 1e-5).unwrap();
    assert!((det - 1.0).abs() < 1e-6, "{det}");
}

#[test]
fn exact_flow_preserves_canonical_volume() {
    // Frozen-history coupling; weak coupling keeps the ghost-shell repulsion
    // between perturbed and reference world-lines in the linear regime.
    let p = ParticleParams::new(0.001, 1.0, 0.05).unwrap();
    let cfg = IntegratorConfig::new(p, ExternalFieldModel::UniformMagnetic([0.0, 0.0, 500.0]), SelfForceModel::Exact, 0.0125, 12.5);
    let rep = liouville_volume_series(&cyclotron_init(), &cfg, 1e-6, PhaseCoordinates::Canonical, HistoryCoupling::Frozen, 4).unwrap();
    for d in &rep.determinant {
        assert!((d - 1.0).abs() < 1e-4, "{:?}", rep.determinant);
    }
}

#[test]
fn ll_volume_follows_divergence_integral() {
    let p = ParticleParams::new(0.05, 1.0, 0.05).unwrap();
    let cfg = IntegratorConfig::new(p, ExternalFieldModel::UniformMagnetic([0.0, 0.0, 10.0]), SelfForceModel::LlIterative, 0.0125, 12.5);
    let rep = liouville_volume_series(&cyclotron_init(), &cfg, 1e-5, PhaseCoordinates::OnShell, HistoryCoupling::Frozen, 5).unwrap();
    let mut last = 0.0;
    for (d, i) in rep.determinant.iter().zip(&rep.divergence_integral) {
        let ln = d.ln();
        assert!(ln < last, "volume must shrink monotonically");
        last = ln;
        assert!(((ln - i) / i).abs() < 0.2, "ln det {ln} vs ∫div {i}");
    }
}

#[test]
fn ll_divergence_at_rest_matches_hand_value() {
    let (q, b, m) = (0.3, 2.0, 1.5);
    let p = ParticleParams::new(q, m, 0.1).unwrap();
    let field = ExternalFieldModel::UniformMagnetic([0.0, 0.0, b]);
    let div = velocity_divergence_ll(&field, &FourVector::ZERO, &FourVector::rest(), &p);
    let expect = -(4.0 / 3.0) * q.powi(4) * b * b / m.powi(3);
    assert!(((div - expect) / expect).abs() < 1e-6, "{div} vs {expect}");
}

#[test]
fn self_consistent_exact_flow_contracts() {
    // With each trajectory radiating on its own history the flow is no longer
    // a prescribed-history Hamiltonian flow; damping shrinks the volume.
    let p = ParticleParams::new(0.05, 1.0, 0.05).unwrap();
    let cfg = IntegratorConfig::new(p, ExternalFieldModel::UniformMagnetic([0.0, 0.0, 10.0]), SelfForceModel::Exact, 0.0125, 12.5);
    let rep = liouville_volume_series(&cyclotron_init(), &cfg, 1e-5, PhaseCoordinates::OnShell, HistoryCoupling::SelfConsistent, 2).unwrap();
    let d = rep.final_determinant();
    assert!(d < 1.0 && d > 0.9, "{d}");
}

#[test]
fn radiation_drains_energy_in_magnetic_field() {
    let p = ParticleParams::new(0.05, 1.0, 0.05).unwrap();
    let field = ExternalFieldModel::UniformMagnetic([0.0, 0.0, 10.0]);
    for model in [SelfForceModel::Exact, SelfForceModel::LlIterative] {
        let mut cfg = IntegratorConfig::new(p, field, model, 0.0125, 25.0);
        cfg.renormalize_mass = model == SelfForceModel::LlIterative;
        cfg.constraint = ConstraintMode::Projection;
        let out = run_scenario(&cyclotron_init(), &cfg).unwrap();
        let g0 = out.history.first().u[0];
        let g1 = out.history.last().u[0];
        assert!(g1 < g0, "{model}: γ {g0} → {g1}");
        // The magnetic field does no work: the loss is the self-force work.
        let w = out.diagnostics.last().unwrap();
        assert!(w.work_external.abs() < 1e-12);
        assert!(w.work_self < 0.0);
    }
}
