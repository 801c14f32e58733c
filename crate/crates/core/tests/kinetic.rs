// Oracle constants are kept at the precision they were computed to.
#![allow(clippy::excessive_precision)]

use rr_core::bessel::{bessel_k, bessel_k_scaled};
use rr_core::kinetic::{
    compute_moments, drift_alignment, evolve_ensemble, maxwellian_closed_form, mean_gamma, moment_residuals,
    sample_maxwellian, sample_maxwellian_in_box, BinGrid, KineticEnsemble, MaxwellianParams,
};
use rr_core::{minkowski_dot, ExternalFieldModel, FourVector, IntegratorConfig, ParticleParams, SelfForceModel};

/// K_ν(x) for ν = 0..3, from an arbitrary-precision evaluation (50 digits,
/// rounded to 25).
const BESSEL_TABLE: [(f64, [f64; 4]); 5] = [
    (0.5, [0.9244190712276658617819242, 1.656441120003300893696445, 7.550183551240869436567706, 62.05790952993025638623809]),
    (1.0, [0.4210244382407083333356274, 0.60190723019723457473754, 1.624838898635177482810707, 7.10126282473794450598037]),
    (5.0, [0.003691098334042594274735261, 0.004044613445452164208365022, 0.00530894371222345995808127, 0.008291768415230932174830038]),
    (50.0, [3.410167749789495513920675e-23, 3.444102226717555612591853e-23, 3.54793183885819773842435e-23, 3.727936773826211431665801e-23]),
    (100.0, [4.656628229175902018939005e-45, 4.679853735636909286562544e-45, 4.750225303888640204670256e-45, 4.869862747792454894749355e-45]),
];

#[test]
fn bessel_matches_high_precision_table() {
    for (x, row) in BESSEL_TABLE {
        for (nu, &expect) in row.iter().enumerate() {
            let got = bessel_k(nu as f64, x).unwrap();
            assert!(((got - expect) / expect).abs() < 1e-10, "K_{nu}({x}) = {got:e} vs {expect:e}");
        }
    }
}

#[test]
fn bessel_recurrence() {
    for x in [0.5, 1.0, 5.0] {
        let (k1, k2, k3) = (bessel_k(1.0, x).unwrap(), bessel_k(2.0, x).unwrap(), bessel_k(3.0, x).unwrap());
        let lhs = k3 - k1;
        let rhs = 4.0 / x * k2;
        assert!(((lhs - rhs) / rhs).abs() < 1e-9, "x={x}");
    }
}

#[test]
fn bessel_large_argument_asymptotics() {
    // K_ν(x) ≈ √(π/2x) e^{−x} [1 + (4ν²−1)/(8x)]; the neglected term is
    // (4ν²−1)(4ν²−9)/(2!(8x)²) ≈ 7e-4 relative for ν = 2 at x = 50.
    let x = 50.0;
    let scaled = bessel_k_scaled(2.0, x).unwrap();
    let asym = (std::f64::consts::PI / (2.0 * x)).sqrt() * (1.0 + 15.0 / (8.0 * x));
    assert!(((scaled - asym) / asym).abs() < 0.03);
    // Same ratio from the table: K₂(50)·√(100/π)·e⁵⁰.
    let ratio = scaled * (100.0 / std::f64::consts::PI).sqrt();
    assert!((ratio - 1.037825713238204647234407).abs() < 1e-12);
}

#[test]
fn bessel_scaled_survives_underflow() {
    let s = bessel_k_scaled(2.0, 800.0).unwrap();
    assert!(s.is_finite() && s > 0.0);
    assert_eq!(bessel_k(2.0, 800.0).unwrap(), 0.0);
}

fn rest_params(temperature: f64) -> MaxwellianParams {
    MaxwellianParams::new(1.0, temperature, FourVector::rest(), 1.0).unwrap()
}

#[test]
fn cold_limit_energy() {
    let cf = maxwellian_closed_form(&rest_params(0.01), 0.0, 0.0, 0.0).unwrap();
    // m K₃/K₂ − T at T = 0.01 m, from a high-precision evaluation.
    assert!((cf.e - 1.015185635680454317522983).abs() < 1e-12);
    let cold = 1.0 + 1.5 * 0.01;
    assert!(((cf.e - cold) / cold).abs() < 0.01);
}

#[test]
fn self_potential_density_correction_is_exact() {
    let p = rest_params(0.3);
    let (q, a_self) = (0.2, 1.7);
    let cf = maxwellian_closed_form(&p, 0.4, a_self, q).unwrap();
    assert_eq!(cf.n1 / cf.n0, -2.0 * q * a_self / 0.3);
    assert_eq!(cf.p0, cf.n0 * 0.3);
}

#[test]
fn external_potential_shifts_density_by_boltzmann_factor() {
    let p = rest_params(0.5);
    let a = maxwellian_closed_form(&p, 0.0, 0.0, 1.0).unwrap();
    let b = maxwellian_closed_form(&p, 0.3, 0.0, 1.0).unwrap();
    assert!((b.n0 / a.n0 - (-0.6f64).exp()).abs() < 1e-14);
}

#[test]
fn sampled_density_matches_closed_form() {
    let n = 100_000;
    for theta in [0.05, 0.5, 3.0] {
        let p = rest_params(theta);
        let ens = sample_maxwellian(&p, n, 11).unwrap();
        let cf = maxwellian_closed_form(&p, 0.0, 0.0, 0.0).unwrap();
        let stats = ens.sampler.unwrap();
        let rel = (stats.density - cf.n0).abs() / cf.n0;
        assert!(rel < 3.0 / (n as f64).sqrt(), "θ={theta}: rel {rel:e}");
    }
}

#[test]
fn sampled_mean_gamma_matches_bessel_ratio() {
    let n = 100_000;
    for theta in [0.1, 1.0] {
        let ens = sample_maxwellian(&rest_params(theta), n, 3).unwrap();
        let g: Vec<f64> = ens.particles.iter().map(|p| p.u[0]).collect();
        let mean = g.iter().sum::<f64>() / n as f64;
        let var = g.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let expect = mean_gamma(theta).unwrap();
        let z = (mean - expect) / (var / n as f64).sqrt();
        assert!(z.abs() < 4.0, "θ={theta}: ⟨γ⟩ {mean} vs {expect} (z = {z})");
    }
}

#[test]
fn rest_gas_has_no_drift() {
    let n = 100_000;
    let ens = sample_maxwellian(&rest_params(0.5), n, 5).unwrap();
    let m = compute_moments(&ens).unwrap();
    for i in 1..4 {
        assert!((m.flow[i] / m.flow[0]).abs() < 5.0 / (n as f64).sqrt());
    }
    // η_{μν}T^{μν} = n for unit-mass-shell velocities.
    assert!((m.stress_trace() - m.n).abs() < 1e-12 * m.n);
}

#[test]
fn boosted_gas_drifts_with_fluid_velocity() {
    let n = 100_000;
    let u = FourVector::from_spatial_velocity([0.8, -0.4, 0.2]);
    let p = MaxwellianParams::new(1.0, 0.2, u, 1.0).unwrap();
    let ens = sample_maxwellian(&p, n, 9).unwrap();
    let m = compute_moments(&ens).unwrap();
    assert!((drift_alignment(&m, &u) - 1.0).abs() < 1e-3);
    let density = ens.sampler.unwrap().density;
    assert!((m.n_rest - density).abs() < 5.0 * density / (n as f64).sqrt());
    for p in &ens.particles {
        assert!((minkowski_dot(&p.u, &p.u) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sampling_is_seed_deterministic() {
    let p = rest_params(0.4);
    let a = sample_maxwellian(&p, 10_000, 42).unwrap();
    let b = sample_maxwellian(&p, 10_000, 42).unwrap();
    let c = sample_maxwellian(&p, 10_000, 43).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_ne!(a.to_csv(), c.to_csv());
    let back = KineticEnsemble::from_csv(&a.to_csv(), a.volume).unwrap();
    assert_eq!(back.particles, a.particles);
}

fn evolved_snapshots(model: SelfForceModel, n: usize) -> (Vec<rr_core::kinetic::Snapshot>, ExternalFieldModel, ParticleParams) {
    let mp = MaxwellianParams::new(1.0, 0.1, FourVector::from_spatial_velocity([0.3, 0.0, 0.0]), 1.0).unwrap();
    let ens = sample_maxwellian_in_box(&mp, n, 7, 1.0).unwrap();
    let p = ParticleParams::new(0.05, 1.0, 0.05).unwrap();
    let field = ExternalFieldModel::UniformMagnetic([0.0, 0.0, 10.0]);
    let cfg = IntegratorConfig::new(p, field, model, 0.0125, 0.0);
    (evolve_ensemble(&ens, &cfg, &[0.0, 0.5]).unwrap(), field, p)
}

#[test]
fn moment_residuals_vanish_with_force_source() {
    let (snaps, field, p) = evolved_snapshots(SelfForceModel::LlIterative, 100_000);
    let grid = BinGrid::new(1, 0.0, 1.0, 1.0, 20);
    let rep = moment_residuals(&snaps, &field, &p, &grid).unwrap();
    assert!(rep.min_particles_per_bin >= 500);
    assert!(rep.max_z_rms() <= 3.0, "{rep:?}");
    // Negative control: dropping the Lorentz source is detected in the
    // momentum component the field rotates into.
    let wrong = moment_residuals(&snaps, &ExternalFieldModel::Zero, &p, &grid).unwrap();
    assert!(wrong.momentum[2].z_rms > 3.0, "{:?}", wrong.momentum[2]);
}

#[test]
fn sparse_bins_are_rejected() {
    let (snaps, field, p) = evolved_snapshots(SelfForceModel::None, 2_000);
    let grid = BinGrid::new(1, 0.0, 1.0, 1.0, 10);
    assert!(matches!(
        moment_residuals(&snaps, &field, &p, &grid),
        Err(rr_core::Error::SparseBin { required: 500, .. })
    ));
    assert!(matches!(
        moment_residuals(&snaps[..1], &field, &p, &grid),
        Err(rr_core::Error::InsufficientSnapshots(1))
    ));
}
