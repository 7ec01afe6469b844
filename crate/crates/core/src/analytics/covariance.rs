use serde::Serialize;

use super::integral::c_integral;
use crate::error::{Error, Result};
use crate::model::{is_boundary, ProcessSpec};
use crate::quadrature::{integrate_power_tail, QuadOptions};

/// Terms summed directly before the Euler–Maclaurin tail takes over.
const LAG_DIRECT_TERMS: u64 = 1024;

/// Integrals above this are reported as infinite on a finite grid.
pub const L2_OVERFLOW_THRESHOLD: f64 = 1e12;

/// A series value with a certified absolute error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub abs_err: f64,
}

impl SeriesValue {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            abs_err: self.abs_err * factor.abs(),
        }
    }
}

/// `Σ_{j≥0} (j+1)^{-d_s} (j+h+1)^{-d_t}` for `d_s + d_t > 1`, `h ≥ 0`.
///
/// The first terms are added directly; the remainder is the integral plus
/// the first two Euler–Maclaurin corrections. The summand is completely
/// monotone, so the omitted correction bounds the error.
pub fn lag_series(d_s: f64, d_t: f64, h: f64) -> Result<SeriesValue> {
    let beta = d_s + d_t;
    if !(beta > 1.0) || h < 0.0 || !h.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lag series needs d_s + d_t > 1 and h >= 0 (d_s={d_s}, d_t={d_t}, h={h})"
        )));
    }
    let f = |x: f64| x.powf(-d_s) * (x + h).powf(-d_t);
    let mut direct = 0.0;
    for i in (1..=LAG_DIRECT_TERMS).rev() {
        direct += f(i as f64);
    }
    let a = (LAG_DIRECT_TERMS + 1) as f64;
    let fa = f(a);
    let dfa = -fa * (d_s / a + d_t / (a + h));
    let integral = integrate_power_tail(f, a, beta, QuadOptions::default())?;
    let value = direct + integral.value + 0.5 * fa - dfa / 12.0;
    let em_err = fa * beta * (beta + 1.0) * (beta + 2.0) / a.powi(3) / 720.0;
    let round = LAG_DIRECT_TERMS as f64 * f64::EPSILON * value.abs();
    Ok(SeriesValue {
        value,
        abs_err: em_err + integral.abs_err + round,
    })
}

/// `E[X_0(s) X_h(t)]` for grid indices `s`, `t`.
pub fn cross_covariance_exact(
    spec: &ProcessSpec,
    s: usize,
    t: usize,
    h: u64,
) -> Result<SeriesValue> {
    let sigma = spec.sigma(s, t);
    if sigma == 0.0 {
        return Ok(SeriesValue {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    Ok(lag_series(spec.d(s), spec.d(t), h as f64)?.scaled(sigma))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticRegime {
    /// Power-law decay or growth driven by `c(s,t)`.
    PowerLaw,
    /// Both exponents equal to one.
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Asymptotic {
    pub value: f64,
    pub regime: AsymptoticRegime,
}

/// Leading-order behaviour of `E[X_0(s) X_h(t)]` as `h → ∞`.
pub fn cross_covariance_asymptotic(
    d_s: f64,
    d_t: f64,
    sigma_st: f64,
    h: f64,
) -> Result<Asymptotic> {
    if !(h >= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "asymptotic lag must be at least 2, got {h}"
        )));
    }
    if d_s > 0.5 && d_s < 1.0 && !is_boundary(d_s) && d_t > 0.5 {
        let c = c_integral(d_s, d_t)?;
        return Ok(Asymptotic {
            value: c * sigma_st * h.powf(1.0 - d_s - d_t),
            regime: AsymptoticRegime::PowerLaw,
        });
    }
    if is_boundary(d_s) && is_boundary(d_t) {
        return Ok(Asymptotic {
            value: sigma_st * h.ln() / h,
            regime: AsymptoticRegime::Logarithmic,
        });
    }
    Err(Error::UncoveredRegime(format!(
        "lag covariance law is only available for 1/2 < d_s < 1 with d_t > 1/2, or d_s = d_t = 1 (got d_s={d_s}, d_t={d_t})"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Summability {
    Convergent,
    Divergent,
}

/// Whether `Σ_h E[X_0(s) X_h(t)]` converges: iff `d_t > 1` and `d_s + d_t > 2`.
pub fn classify_summability(d_s: f64, d_t: f64) -> Summability {
    if d_t > 1.0 && !is_boundary(d_t) && d_s + d_t > 2.0 + 1e-12 {
        Summability::Convergent
    } else {
        Summability::Divergent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L2Membership {
    /// `∫ σ²(r) μ(dr)`
    pub variance_integral: f64,
    /// `∫ σ²(r)/(2d(r)-1) μ(dr)`
    pub weighted_integral: f64,
    pub member: bool,
}

/// Grid quadrature of the two integrals deciding whether paths lie in `L²(μ)`.
pub fn l2_membership(spec: &ProcessSpec) -> L2Membership {
    let grid = spec.grid();
    let s2 = spec.innovations().sigma2();
    let weighted: Vec<f64> = s2
        .iter()
        .zip(spec.memory().values())
        .map(|(s, d)| s / (2.0 * d - 1.0))
        .collect();
    let variance_integral = grid.integrate(&s2);
    let weighted_integral = grid.integrate(&weighted);
    let finite = |v: f64| v.is_finite() && v.abs() < L2_OVERFLOW_THRESHOLD;
    L2Membership {
        variance_integral,
        weighted_integral,
        member: finite(variance_integral) && finite(weighted_integral),
    }
}
