//! Proximal maps of the kinetic (perspective) and linear energy cells.

use crate::error::{Error, Result};

/// Proximal map of `(rho, q) -> a * |q|^2 / rho` on `rho >= 0`, with the
/// closure convention `0/0 = 0` and `|q|^2/0 = inf` for `q != 0`:
///
/// ```text
/// argmin  a |q|^2 / rho + (1 / 2 tau) ((rho - rho_bar)^2 + |q - q_bar|^2)
/// ```
///
/// The density is the nonnegative root of
/// `(rho - rho_bar)(rho + 2 a tau)^2 = a tau |q_bar|^2` and the flux follows
/// as `q = rho q_bar / (rho + 2 a tau)`. `q` is overwritten with the result.
pub fn prox_perspective(rho_bar: f64, q: &mut [f64], tau: f64, a: f64) -> Result<f64> {
    let q2: f64 = q.iter().map(|v| v * v).sum();
    let rho = perspective_root(rho_bar, q2, tau * a)?;
    if rho == 0.0 {
        q.iter_mut().for_each(|v| *v = 0.0);
    } else {
        let f = rho / (rho + 2.0 * a * tau);
        q.iter_mut().for_each(|v| *v *= f);
    }
    Ok(rho)
}

/// Scalar version of [`prox_perspective`] with an optional `q >= 0`
/// constraint. Restricting to `q >= 0` is the same as replacing `q_bar` by
/// its positive part, since the two objectives then differ by a constant.
#[inline]
pub fn prox_perspective_scalar(rho_bar: f64, q_bar: f64, tau: f64, a: f64, nonneg: bool) -> Result<(f64, f64)> {
    let q_bar = if nonneg { q_bar.max(0.0) } else { q_bar };
    let at = a * tau;
    let rho = perspective_root(rho_bar, q_bar * q_bar, at)?;
    if rho == 0.0 {
        Ok((0.0, 0.0))
    } else {
        Ok((rho, rho * q_bar / (rho + 2.0 * at)))
    }
}

/// Proximal map of `q -> c q` (plus `q >= 0` when `nonneg`).
#[inline]
pub fn prox_linear(q_bar: f64, tau: f64, c: f64, nonneg: bool) -> f64 {
    let q = q_bar - tau * c;
    if nonneg {
        q.max(0.0)
    } else {
        q
    }
}

/// Root of `f(rho) = (rho - rho_bar)(rho + 2 at)^2 - at q2` on
/// `[max(rho_bar, 0), inf)`, or 0 when `f(0) >= 0` and `rho_bar <= 0`.
fn perspective_root(rho_bar: f64, q2: f64, at: f64) -> Result<f64> {
    if q2 == 0.0 {
        return Ok(rho_bar.max(0.0));
    }
    let c = 2.0 * at;
    let f = |r: f64| (r - rho_bar) * (r + c) * (r + c) - at * q2;
    let lo0 = rho_bar.max(0.0);
    if rho_bar <= 0.0 && f(0.0) >= 0.0 {
        return Ok(0.0);
    }
    let mut lo = lo0;
    let k = at * q2;
    let k3 = k.cbrt();
    let mut hi = lo0 + k3;
    while f(hi) < 0.0 {
        // only reachable through rounding in the bracket estimate
        hi = 2.0 * hi + 1e-300;
        if !hi.is_finite() {
            return Err(Error::NonconvergentRootFind {
                rho_bar,
                q_norm: q2.sqrt(),
            });
        }
    }
    // with s = rho + c the root solves s^2 (s - p) = k, p = rho_bar + c; the
    // guesses below are within a small factor of s in every regime
    let p = rho_bar + c;
    let guess = if p > 0.0 {
        rho_bar + k / (p * p + k3 * k3)
    } else {
        k3.min((k / -p).sqrt()) - c
    };
    let mut r = if guess > lo && guess < hi { guess } else { hi };
    // f is increasing and convex on the bracket, so Newton iterates decrease
    // monotonically after at most one overshoot; bisection guards rounding.
    for _ in 0..200 {
        let fr = f(r);
        if fr == 0.0 {
            return Ok(r);
        }
        if fr > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let df = (r + c) * (r + c) + 2.0 * (r - rho_bar) * (r + c);
        let step = fr / df;
        if step.abs() <= 1e-15 * r.abs() {
            return Ok((r - step).clamp(lo, hi));
        }
        let mut next = r - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) <= 1e-15 * hi.max(1e-300) {
            return Ok(next);
        }
        r = next;
    }
    if hi - lo <= 1e-12 * hi.max(1.0) {
        return Ok(0.5 * (lo + hi));
    }
    Err(Error::NonconvergentRootFind {
        rho_bar,
        q_norm: q2.sqrt(),
    })
}
