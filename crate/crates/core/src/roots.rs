//! Scalar root finding and minimization helpers.

/// Safeguarded Newton iteration on a sign-changing bracket.
///
/// `f` returns (value, derivative). Newton steps that leave the current
/// bracket, or fail to shrink it quickly enough, fall back to bisection.
/// Terminates when |f| ≤ `f_tol` or the bracket is narrower than `x_tol`.
/// Returns `None` if the endpoints do not bracket a sign change.
pub fn newton_bisect<F>(f: F, mut lo: f64, mut hi: f64, x_tol: f64, f_tol: f64) -> Option<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if !f_lo.is_finite() || !f_hi.is_finite() {
        return None;
    }
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if (f_lo < 0.0) == (f_hi < 0.0) {
        return None;
    }

    let mut x = 0.5 * (lo + hi);
    let mut last_width = hi - lo;
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if !fx.is_finite() {
            return None;
        }
        if fx.abs() <= f_tol {
            return Some(x);
        }
        if (fx < 0.0) == (f_lo < 0.0) {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }
        let width = hi - lo;
        if width <= x_tol {
            return Some(0.5 * (lo + hi));
        }
        let newton = x - fx / dfx;
        // Bisect when Newton leaves the bracket or the bracket stops shrinking.
        let inside = dfx != 0.0 && newton > lo && newton < hi;
        x = if inside && width <= 0.9 * last_width {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last_width = width;
    }
    Some(x)
}

/// Plain bisection for a continuous function with f(lo), f(hi) of opposite sign.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if (f_lo < 0.0) == (f_hi < 0.0) {
        return None;
    }
    while hi - lo > x_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Golden-section search for the minimum of a unimodal function on [a, b].
pub fn golden_section_min<F>(f: F, mut a: f64, mut b: f64, x_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > x_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
