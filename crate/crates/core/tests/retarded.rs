use proptest::prelude::*;
use rr_core::studies::PrescribedMotion;
use rr_core::{find_retarded_time, retarded_point, Error, FourVector, WorldlineHistory, WorldlineSample};

/// Brute-force oracle: scan the analytic world-line for the sign change of
/// (r(s) − r(s′))² − σ² below s − σ/2 and bisect it to full precision.
fn scan_root(motion: &PrescribedMotion, s: f64, sigma: f64) -> f64 {
    let r = motion.sample(s).r;
    let g = |sp: f64| {
        let d = r - motion.sample(sp).r;
        d.norm_sq() - sigma * sigma
    };
    let mut hi = s - 0.5 * sigma;
    let n = 2000;
    let dx = 9.5 * sigma / n as f64;
    let mut lo = hi - dx;
    for _ in 0..n {
        if g(lo) > 0.0 && g(hi) <= 0.0 {
            break;
        }
        hi = lo;
        lo -= dx;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn rest_worldline_delay_equals_sigma() {
    let motion = PrescribedMotion::Inertial { velocity: [0.0; 3] };
    let history = motion.history(0.0, 2.0, 0.01).unwrap();
    for sigma in [1e-3, 0.05, 0.1, 0.15] {
        let sp = find_retarded_time(&history, 2.0, sigma).unwrap();
        let delay = 2.0 - sp;
        assert!(((delay - sigma) / sigma).abs() < 1e-10, "σ={sigma}: delay {delay}");
    }
}

#[test]
fn delay_from_prehistory_only() {
    // A single-sample history: the root lies entirely in the inertial past.
    let u = FourVector::from_spatial_velocity([0.6, -0.2, 0.1]);
    let h = WorldlineHistory::new(WorldlineSample::new(0.0, FourVector::ZERO, u, FourVector::ZERO)).unwrap();
    let sp = find_retarded_time(&h, 0.0, 0.07).unwrap();
    assert!(((-sp - 0.07) / 0.07).abs() < 1e-12);
}

#[test]
fn circular_root_matches_brute_force_scan() {
    for (radius, omega) in [(1.0, 0.5), (0.1, 9.0), (2.0, 0.45)] {
        let motion = PrescribedMotion::Circular { radius, omega };
        for sigma in [0.02, 0.1] {
            let history = motion.history(0.0, 3.0, sigma / 256.0).unwrap();
            let s = 2.5;
            let got = find_retarded_time(&history, s, sigma).unwrap();
            let oracle = scan_root(&motion, s, sigma);
            // Agreement limited by the Hermite tabulation, O(h⁴).
            assert!((got - oracle).abs() < 1e-10 * sigma, "R={radius} σ={sigma}: {got} vs {oracle}");
        }
    }
}

#[test]
fn hyperbolic_root_matches_brute_force_scan() {
    let motion = PrescribedMotion::Hyperbolic { acceleration: 2.0 };
    let history = motion.history(-1.0, 1.0, 1e-3).unwrap();
    let got = retarded_point(&history, &motion.sample(0.7).r, 0.7, 0.05).unwrap();
    let oracle = scan_root(&motion, 0.7, 0.05);
    assert!((got.s_prime - oracle).abs() < 1e-11);
    assert!((got.separation.norm_sq() - 0.0025).abs() < 1e-13);
    assert!(got.delay > 0.0);
}

/// Max Hermite position error at midpoints between nodes.
fn midpoint_error(motion: &PrescribedMotion, h: f64) -> (f64, f64) {
    let history = motion.history(0.0, 2.0, h).unwrap();
    let mut err_r: f64 = 0.0;
    let mut err_u: f64 = 0.0;
    let n = (2.0 / h).round() as usize;
    for i in 0..n {
        let s = (i as f64 + 0.5) * h;
        let got = history.interpolate(s).unwrap();
        let exact = motion.sample(s);
        err_r = err_r.max((got.r - exact.r).max_abs());
        err_u = err_u.max((got.u - exact.u).max_abs());
        assert!((got.u.norm_sq() - 1.0).abs() < 1e-12);
    }
    (err_r, err_u)
}

#[test]
fn hermite_interpolation_is_fourth_order() {
    let motion = PrescribedMotion::Circular { radius: 1.0, omega: 0.8 };
    let (r1, u1) = midpoint_error(&motion, 0.1);
    let (r2, u2) = midpoint_error(&motion, 0.05);
    let order_r = (r1 / r2).log2();
    let order_u = (u1 / u2).log2();
    assert!((order_r - 4.0).abs() < 0.2, "position order {order_r}");
    assert!(order_u > 3.8, "velocity order {order_u}");
}

#[test]
fn nodes_are_reproduced_exactly() {
    let motion = PrescribedMotion::Hyperbolic { acceleration: 0.5 };
    let history = motion.history(0.0, 1.0, 0.125).unwrap();
    for x in history.samples() {
        assert_eq!(history.interpolate(x.s).unwrap(), *x);
    }
}

#[test]
fn coordinate_time_lookup_inverts_worldline() {
    let motion = PrescribedMotion::Circular { radius: 1.0, omega: 0.5 };
    let history = motion.history(0.0, 4.0, 0.01).unwrap();
    let x = history.at_coordinate_time(2.0).unwrap();
    assert!((x.r[0] - 2.0).abs() < 1e-12);
    assert!((x.s - 2.0 * (1.0f64 - 0.25).sqrt()).abs() < 1e-10);
}

#[test]
fn query_errors() {
    let motion = PrescribedMotion::Inertial { velocity: [0.1, 0.0, 0.0] };
    let mut history = motion.history(0.0, 1.0, 0.1).unwrap();
    assert!(matches!(history.interpolate(1.5), Err(Error::FutureQuery { .. })));
    assert!(matches!(history.push(motion.sample(0.5)), Err(Error::NonMonotonicSample { .. })));
    let mut off = motion.sample(1.1);
    off.u[0] *= 1.01;
    assert!(matches!(history.push(off), Err(Error::OffShellSample { .. })));
    let mut nan = motion.sample(1.1);
    nan.r[2] = f64::NAN;
    assert!(history.push(nan).is_err());
}

#[test]
fn retention_prunes_old_samples() {
    let motion = PrescribedMotion::Inertial { velocity: [0.0; 3] };
    let mut history = motion.history(0.0, 0.0, 0.1).unwrap();
    history.set_retention(Some(0.5));
    for i in 1..=40 {
        history.push(motion.sample(i as f64 * 0.1)).unwrap();
    }
    assert!(history.first().s >= 4.0 - 0.5 - 0.1 - 1e-12);
    assert!(matches!(history.interpolate(1.0), Err(Error::PrunedQuery { .. })));
    assert!(find_retarded_time(&history, 4.0, 0.1).is_ok());
}

#[test]
fn csv_has_stable_header() {
    let motion = PrescribedMotion::Inertial { velocity: [0.0; 3] };
    let csv = motion.history(0.0, 0.2, 0.1).unwrap().to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,r0,r1,r2,r3,u0,u1,u2,u3,a0,a1,a2,a3"));
    assert_eq!(lines.count(), 3);
}

proptest! {
    #[test]
    fn inertial_delay_is_sigma(v in prop::array::uniform3(-0.5..0.5f64), sigma in 1e-3..0.3f64, s in 0.0..5.0f64) {
        let motion = PrescribedMotion::Inertial { velocity: v };
        let history = motion.history(0.0, 5.0, 0.05).unwrap();
        let sp = find_retarded_time(&history, s, sigma).unwrap();
        prop_assert!(((s - sp - sigma) / sigma).abs() < 1e-10);
    }
}
