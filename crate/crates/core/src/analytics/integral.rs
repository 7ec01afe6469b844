use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_power_tail, QuadOptions, QuadResult};

/// `∫_0^∞ x^{-d_s} (x+1)^{-d_t} dx` by adaptive quadrature.
///
/// The interval is split at `x = 1`. On `[0, 1]` the substitution
/// `x = u^{1/(1-d_s)}` absorbs the endpoint singularity; on `[1, ∞)` the
/// power-tail map of [`integrate_power_tail`] leaves a bounded integrand.
pub fn c_integral(d_s: f64, d_t: f64) -> Result<f64> {
    c_integral_with(d_s, d_t, QuadOptions::default()).map(|r| r.value)
}

pub fn c_integral_with(d_s: f64, d_t: f64, opts: QuadOptions) -> Result<QuadResult> {
    check_integrable(d_s, d_t)?;
    let a = 1.0 - d_s;
    let p = 1.0 / a;
    let head = integrate(|u: f64| (1.0 + u.powf(p)).powf(-d_t) / a, 0.0, 1.0, opts)?;
    let tail = integrate_power_tail(
        |x: f64| x.powf(-d_s) * (x + 1.0).powf(-d_t),
        1.0,
        d_s + d_t,
        opts,
    )?;
    Ok(QuadResult {
        value: head.value + tail.value,
        abs_err: head.abs_err + tail.abs_err,
        intervals: head.intervals + tail.intervals,
    })
}

fn check_integrable(d_s: f64, d_t: f64) -> Result<()> {
    if !(d_s.is_finite() && d_t.is_finite()) {
        return Err(Error::Integrability(format!(
            "non-finite exponents d_s={d_s}, d_t={d_t}"
        )));
    }
    if d_s >= 1.0 {
        return Err(Error::Integrability(format!(
            "d_s < 1 is required for integrability at x = 0 (d_s={d_s})"
        )));
    }
    if d_s + d_t <= 1.0 {
        return Err(Error::Integrability(format!(
            "d_s + d_t > 1 is required for integrability at infinity (d_s + d_t = {})",
            d_s + d_t
        )));
    }
    Ok(())
}

/// `1/(1-d) + 1/(2d-1)`, an upper bound on `c_integral(d, d)` for `1/2 < d < 1`.
pub fn c_upper_bound(d: f64) -> Result<f64> {
    if !(d > 0.5 && d < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "c upper bound needs 1/2 < d < 1, got {d}"
        )));
    }
    Ok(1.0 / (1.0 - d) + 1.0 / (2.0 * d - 1.0))
}
