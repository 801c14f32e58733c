//! World-line storage, dense output and the retarded-time root.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{minkowski_dot, FourVector};
use crate::roots::newton_bisect;

/// Mass-shell tolerance enforced on constrained histories.
pub const SHELL_TOLERANCE: f64 = 1e-9;

/// Relative tolerance of the retarded-time root, in units of σ².
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Search horizon for the retarded root, in units of σ.
pub const ROOT_HORIZON: f64 = 10.0;

/// One stored point of a world-line: proper time, position, velocity and
/// acceleration (all contravariant).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldlineSample {
    pub s: f64,
    pub r: FourVector,
    pub u: FourVector,
    pub a: FourVector,
}

impl WorldlineSample {
    pub fn new(s: f64, r: FourVector, u: FourVector, a: FourVector) -> Self {
        WorldlineSample { s, r, u, a }
    }

    fn is_finite(&self) -> bool {
        self.s.is_finite() && self.r.is_finite() && self.u.is_finite() && self.a.is_finite()
    }
}

/// Dense record of a world-line with an inertial prehistory.
///
/// For s < s₀ the particle moved with the constant `prehistory_velocity`:
/// r(s) = r(s₀) + (s − s₀)·u_pre, a = 0.
#[derive(Debug, Clone)]
pub struct WorldlineHistory {
    samples: VecDeque<WorldlineSample>,
    s0: f64,
    r0: FourVector,
    prehistory_velocity: FourVector,
    on_shell: bool,
    retention: Option<f64>,
    nominal_step: Option<f64>,
}

/// The causal retarded point seen from a given event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetardedPoint {
    /// Retarded proper time s′.
    pub s_prime: f64,
    /// Delay s − s′ (> 0).
    pub delay: f64,
    /// R̃ = r(s) − r(s′), contravariant.
    pub separation: FourVector,
    /// Interpolated state at s′.
    pub sample: WorldlineSample,
}

impl WorldlineHistory {
    /// Start a history whose prehistory velocity equals the initial velocity.
    /// The initial velocity must lie on the unit mass shell.
    pub fn new(initial: WorldlineSample) -> Result<Self> {
        Self::build(initial, initial.u, true)
    }

    /// Start a history with an explicit prehistory velocity.
    pub fn with_prehistory(initial: WorldlineSample, prehistory_velocity: FourVector) -> Result<Self> {
        check_shell(initial.s, &prehistory_velocity)?;
        Self::build(initial, prehistory_velocity, true)
    }

    /// A history whose samples are not required to be on the mass shell
    /// (used for unconstrained canonical-coordinate runs).
    pub fn unconstrained(initial: WorldlineSample) -> Result<Self> {
        Self::build(initial, initial.u, false)
    }

    fn build(initial: WorldlineSample, pre: FourVector, on_shell: bool) -> Result<Self> {
        if !initial.is_finite() || !pre.is_finite() {
            return Err(Error::NonFinite(format!("initial sample at s = {}", initial.s)));
        }
        if on_shell {
            check_shell(initial.s, &initial.u)?;
        } else if !(initial.u.norm_sq() > 0.0) {
            return Err(Error::NonTimelikeVelocity {
                norm: initial.u.norm_sq(),
            });
        }
        let mut samples = VecDeque::new();
        samples.push_back(initial);
        Ok(WorldlineHistory {
            samples,
            s0: initial.s,
            r0: initial.r,
            prehistory_velocity: pre,
            on_shell,
            retention: None,
            nominal_step: None,
        })
    }

    /// Discard samples older than `frontier − horizon` after each push.
    pub fn set_retention(&mut self, horizon: Option<f64>) {
        self.retention = horizon;
    }

    /// Step used for finite-difference stencils on this history.
    pub fn set_nominal_step(&mut self, h: f64) {
        self.nominal_step = Some(h);
    }

    pub fn nominal_step(&self) -> Option<f64> {
        self.nominal_step.or_else(|| {
            let n = self.samples.len();
            (n >= 2).then(|| self.samples[n - 1].s - self.samples[n - 2].s)
        })
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn prehistory_velocity(&self) -> FourVector {
        self.prehistory_velocity
    }

    pub fn is_on_shell(&self) -> bool {
        self.on_shell
    }

    pub fn frontier(&self) -> f64 {
        self.last().s
    }

    pub fn last(&self) -> &WorldlineSample {
        self.samples.back().expect("history is never empty")
    }

    pub fn first(&self) -> &WorldlineSample {
        self.samples.front().expect("history is never empty")
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &WorldlineSample> {
        self.samples.iter()
    }

    /// Append a sample beyond the frontier.
    pub fn push(&mut self, sample: WorldlineSample) -> Result<()> {
        let last = self.frontier();
        if !sample.is_finite() {
            return Err(Error::NonFinite(format!("sample at s = {}", sample.s)));
        }
        if !(sample.s > last) {
            return Err(Error::NonMonotonicSample { last, next: sample.s });
        }
        if self.on_shell {
            check_shell(sample.s, &sample.u)?;
        }
        self.samples.push_back(sample);
        if let Some(h) = self.retention {
            let cutoff = sample.s - h;
            while self.samples.len() > 2 && self.samples[1].s < cutoff {
                self.samples.pop_front();
            }
        }
        Ok(())
    }

    /// Overwrite the acceleration stored at the frontier.
    pub fn set_last_acceleration(&mut self, a: FourVector) {
        if let Some(last) = self.samples.back_mut() {
            last.a = a;
        }
    }

    fn prehistory(&self, s: f64) -> WorldlineSample {
        WorldlineSample {
            s,
            r: self.r0 + self.prehistory_velocity * (s - self.s0),
            u: self.prehistory_velocity,
            a: FourVector::ZERO,
        }
    }

    /// Locate the interval [i, i+1] containing s, or the node index on an
    /// exact hit.
    fn locate(&self, s: f64) -> Result<Locate> {
        let frontier = self.frontier();
        if s > frontier {
            return Err(Error::FutureQuery { query: s, frontier });
        }
        if s < self.s0 {
            return Ok(Locate::Prehistory);
        }
        let oldest = self.first().s;
        if s < oldest {
            return Err(Error::PrunedQuery { query: s, oldest });
        }
        let idx = self.samples.partition_point(|p| p.s <= s);
        // idx ≥ 1 because samples[0].s ≤ s.
        let i = idx - 1;
        if self.samples[i].s == s {
            return Ok(Locate::Node(i));
        }
        Ok(Locate::Interval(i))
    }

    /// Dense output at proper time `s`.
    pub fn interpolate(&self, s: f64) -> Result<WorldlineSample> {
        match self.locate(s)? {
            Locate::Prehistory => Ok(self.prehistory(s)),
            Locate::Node(i) => Ok(self.samples[i]),
            Locate::Interval(i) => Ok(hermite(&self.samples[i], &self.samples[i + 1], s)),
        }
    }

    /// Position only (cheaper than a full interpolation).
    pub fn position(&self, s: f64) -> Result<FourVector> {
        match self.locate(s)? {
            Locate::Prehistory => Ok(self.prehistory(s).r),
            Locate::Node(i) => Ok(self.samples[i].r),
            Locate::Interval(i) => {
                let (p, q) = (&self.samples[i], &self.samples[i + 1]);
                let h = q.s - p.s;
                let t = (s - p.s) / h;
                let b = hermite_basis(t);
                Ok(p.r * b[0] + p.u * (b[1] * h) + q.r * b[2] + q.u * (b[3] * h))
            }
        }
    }

    /// Proper time at which the world-line reaches coordinate time `t`, and
    /// the interpolated state there.
    pub fn at_coordinate_time(&self, t: f64) -> Result<WorldlineSample> {
        let last = self.last();
        if t > last.r[0] {
            return Err(Error::FutureQuery {
                query: t,
                frontier: last.r[0],
            });
        }
        if t < self.r0[0] {
            let s = self.s0 + (t - self.r0[0]) / self.prehistory_velocity[0];
            return Ok(self.prehistory(s));
        }
        let oldest = self.first();
        if t < oldest.r[0] {
            return Err(Error::PrunedQuery {
                query: t,
                oldest: oldest.r[0],
            });
        }
        let idx = self.samples.partition_point(|p| p.r[0] <= t);
        let i = idx - 1;
        if self.samples[i].r[0] == t {
            return Ok(self.samples[i]);
        }
        let (p, q) = (&self.samples[i], &self.samples[i + 1]);
        let s = newton_bisect(
            |s| {
                let x = hermite(p, q, s);
                (x.r[0] - t, x.u[0])
            },
            p.s,
            q.s,
            1e-15 * (1.0 + q.s.abs()),
            1e-15 * (1.0 + t.abs()),
        )
        .ok_or_else(|| Error::DomainError(format!("coordinate time {t} not bracketed")))?;
        Ok(hermite(p, q, s))
    }

    /// CSV dump with columns s, r0..r3, u0..u3, a0..a3.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,r0,r1,r2,r3,u0,u1,u2,u3,a0,a1,a2,a3\n");
        for p in &self.samples {
            let _ = write!(out, "{}", p.s);
            for v in [&p.r, &p.u, &p.a] {
                for c in v.0 {
                    let _ = write!(out, ",{c}");
                }
            }
            out.push('\n');
        }
        out
    }
}

enum Locate {
    Prehistory,
    Node(usize),
    Interval(usize),
}

fn check_shell(s: f64, u: &FourVector) -> Result<()> {
    let residual = (u.norm_sq() - 1.0).abs();
    if !(residual < SHELL_TOLERANCE) || !(u[0] > 0.0) {
        return Err(Error::OffShellSample { s, residual });
    }
    Ok(())
}

/// Cubic Hermite basis h00, h10, h01, h11 at t ∈ [0, 1].
#[inline]
fn hermite_basis(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    ]
}

#[inline]
fn hermite_basis_deriv(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        6.0 * t2 - 6.0 * t,
        3.0 * t2 - 4.0 * t + 1.0,
        -6.0 * t2 + 6.0 * t,
        3.0 * t2 - 2.0 * t,
    ]
}

fn hermite(p: &WorldlineSample, q: &WorldlineSample, s: f64) -> WorldlineSample {
    let h = q.s - p.s;
    let t = (s - p.s) / h;
    let b = hermite_basis(t);
    let db = hermite_basis_deriv(t);
    let r = p.r * b[0] + p.u * (b[1] * h) + q.r * b[2] + q.u * (b[3] * h);
    let u_raw = p.u * b[0] + p.a * (b[1] * h) + q.u * b[2] + q.a * (b[3] * h);
    let a = (p.u * db[0] + q.u * db[2]) * (1.0 / h) + p.a * db[1] + q.a * db[3];
    // Rescale onto the norm interpolated between the nodes (the unit shell
    // for constrained histories).
    let target = p.u.norm_sq() * (1.0 - t) + q.u.norm_sq() * t;
    let raw = u_raw.norm_sq();
    let u = if raw > 0.0 && target > 0.0 {
        u_raw * (target / raw).sqrt()
    } else {
        u_raw
    };
    WorldlineSample { s, r, u, a }
}

/// Retarded proper time s′ for the event r(s) on the history itself.
pub fn find_retarded_time(history: &WorldlineHistory, s: f64, sigma: f64) -> Result<f64> {
    let r = history.position(s)?;
    Ok(retarded_point(history, &r, s, sigma)?.s_prime)
}

/// Retarded point of an arbitrary event `r_point` at proper-time label
/// `s`: the causal root of (r_point − r(s′))² = σ² with s′ < s.
///
/// The label only seeds the search; `r_point` need not lie on the history
/// (integrator stages evaluate trial points).
pub fn retarded_point(
    history: &WorldlineHistory,
    r_point: &FourVector,
    s: f64,
    sigma: f64,
) -> Result<RetardedPoint> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::DomainError(format!("sigma must be > 0 (got {sigma})")));
    }
    let phi = |delay: f64| -> Result<(f64, f64)> {
        let x = history.interpolate(s - delay)?;
        let sep = *r_point - x.r;
        Ok((minkowski_dot(&sep, &sep) - sigma * sigma, 2.0 * minkowski_dot(&sep, &x.u)))
    };
    let min_delay = (s - history.frontier()).max(0.0);
    let horizon = ROOT_HORIZON * sigma;

    let mut lo = (0.5 * sigma).max(min_delay);
    let mut f_lo = phi(lo)?.0;
    let mut tries = 0;
    while f_lo >= 0.0 && tries < 40 {
        let next = min_delay + 0.5 * (lo - min_delay);
        if next == lo {
            break;
        }
        lo = next;
        f_lo = phi(lo)?.0;
        tries += 1;
    }
    if f_lo >= 0.0 {
        if f_lo == 0.0 {
            return finish(history, r_point, s, lo);
        }
        return Err(Error::RootNotBracketed { s, horizon });
    }
    let mut hi = (1.5 * sigma).max(lo + 0.5 * sigma);
    let mut f_hi = phi(hi)?.0;
    while f_hi < 0.0 {
        if hi >= horizon {
            return Err(Error::RootNotBracketed { s, horizon });
        }
        lo = hi;
        hi = (hi * 1.5).min(horizon);
        f_hi = phi(hi)?.0;
    }

    let f_tol = ROOT_TOLERANCE * sigma * sigma;
    let x_tol = (1e-15 * sigma).max(4.0 * f64::EPSILON * s.abs());
    let delay = newton_bisect(
        |d| phi(d).unwrap_or((f64::NAN, f64::NAN)),
        lo,
        hi,
        x_tol,
        f_tol,
    )
    .ok_or(Error::RootNotBracketed { s, horizon })?;
    finish(history, r_point, s, delay)
}

fn finish(history: &WorldlineHistory, r_point: &FourVector, s: f64, delay: f64) -> Result<RetardedPoint> {
    let s_prime = s - delay;
    let sample = history.interpolate(s_prime)?;
    let separation = *r_point - sample.r;
    let ru = minkowski_dot(&separation, &sample.u);
    if !(delay > 0.0) || !(ru > 0.0) || !(separation[0] > 0.0) {
        return Err(Error::NonCausalRoot { s_ret: s_prime, ru });
    }
    Ok(RetardedPoint {
        s_prime,
        delay,
        separation,
        sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inertial(u: FourVector) -> WorldlineHistory {
        WorldlineHistory::new(WorldlineSample::new(0.0, FourVector::ZERO, u, FourVector::ZERO)).unwrap()
    }

    #[test]
    fn prehistory_is_linear() {
        let u = FourVector::from_spatial_velocity([0.3, -0.2, 0.1]);
        let h = inertial(u);
        for s in [-3.0, -0.5, -1e-3] {
            let x = h.interpolate(s).unwrap();
            assert_eq!(x.r, u * s);
            assert_eq!(x.u, u);
            assert_eq!(x.a, FourVector::ZERO);
        }
    }

    #[test]
    fn node_hit_returns_node() {
        let mut h = inertial(FourVector::rest());
        let p = WorldlineSample::new(0.1, FourVector::new(0.1, 0.0, 0.0, 0.0), FourVector::rest(), FourVector::ZERO);
        h.push(p).unwrap();
        assert_eq!(h.interpolate(0.1).unwrap(), p);
        assert_eq!(h.interpolate(0.0).unwrap(), *h.first());
    }

    #[test]
    fn future_query_is_an_error() {
        let h = inertial(FourVector::rest());
        assert!(matches!(h.interpolate(1e-9), Err(Error::FutureQuery { .. })));
    }

    #[test]
    fn rejects_off_shell_and_unordered() {
        let mut h = inertial(FourVector::rest());
        let bad = WorldlineSample::new(0.1, FourVector::ZERO, FourVector::new(2.0, 0.0, 0.0, 0.0), FourVector::ZERO);
        assert!(matches!(h.push(bad), Err(Error::OffShellSample { .. })));
        let back = WorldlineSample::new(0.0, FourVector::ZERO, FourVector::rest(), FourVector::ZERO);
        assert!(matches!(h.push(back), Err(Error::NonMonotonicSample { .. })));
        assert!(WorldlineHistory::new(bad).is_err());
    }

    #[test]
    fn rest_root_is_sigma() {
        let mut h = inertial(FourVector::rest());
        for i in 1..=40 {
            let s = i as f64 * 0.01;
            h.push(WorldlineSample::new(s, FourVector::new(s, 0.0, 0.0, 0.0), FourVector::rest(), FourVector::ZERO))
                .unwrap();
        }
        let sp = find_retarded_time(&h, 0.4, 0.1).unwrap();
        assert!((0.4 - sp - 0.1).abs() < 1e-14);
        // Entirely in the prehistory.
        let sp = find_retarded_time(&h, 0.05, 0.1).unwrap();
        assert!((0.05 - sp - 0.1).abs() < 1e-14);
    }

    #[test]
    fn retention_prunes_old_samples() {
        let mut h = inertial(FourVector::rest());
        h.set_retention(Some(0.1));
        for i in 1..=100 {
            let s = i as f64 * 0.01;
            h.push(WorldlineSample::new(s, FourVector::new(s, 0.0, 0.0, 0.0), FourVector::rest(), FourVector::ZERO))
                .unwrap();
        }
        assert!(h.len() < 15);
        assert!(matches!(h.interpolate(0.5), Err(Error::PrunedQuery { .. })));
        // Prehistory remains available.
        assert_eq!(h.interpolate(-1.0).unwrap().r[0], -1.0);
        assert!(h.interpolate(0.95).is_ok());
    }

    #[test]
    fn coordinate_time_lookup() {
        let u = FourVector::from_spatial_velocity([0.6, 0.0, 0.0]);
        let mut h = inertial(u);
        for i in 1..=10 {
            let s = i as f64 * 0.1;
            h.push(WorldlineSample::new(s, u * s, u, FourVector::ZERO)).unwrap();
        }
        let x = h.at_coordinate_time(0.5).unwrap();
        assert!((x.s - 0.5 / u[0]).abs() < 1e-14);
        let x = h.at_coordinate_time(-0.5).unwrap();
        assert!((x.s + 0.5 / u[0]).abs() < 1e-14);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let h = inertial(FourVector::rest());
        let csv = h.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "s,r0,r1,r2,r3,u0,u1,u2,u3,a0,a1,a2,a3");
        assert_eq!(lines.next().unwrap(), "0,0,0,0,0,1,0,0,0,0,0,0,0");
    }
}
