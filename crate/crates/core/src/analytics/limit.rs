use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::Serialize;

use super::integral::c_integral;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{is_boundary, validate, CltPart, ProcessSpec};

/// Largest horizon scanned for the unit-exponent variance constant.
pub const BOUNDARY_SCAN_MAX_N: usize = 1 << 20;

/// Safety factor applied to the scanned supremum.
pub const BOUNDARY_SAFETY: f64 = 1.05;

/// Covariance of the Gaussian limit of normalized partial sums on the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitKernel {
    pub regime: CltPart,
    #[serde(skip)]
    pub k: DMatrix<f64>,
}

fn clt_part(spec: &ProcessSpec) -> Result<CltPart> {
    let report = validate(spec);
    report
        .clt
        .part
        .ok_or_else(|| Error::MixedRegimes(report.clt.reason.clone()))
}

/// Limit covariance:
/// `[c(s,t)+c(t,s)] σ(s,t) / ((2-β)(3-β))` with `β = d(s)+d(t)` when every
/// exponent lies in `(1/2, 1)`, and `σ(s,t)` when every exponent is one.
pub fn limit_kernel(spec: &ProcessSpec) -> Result<LimitKernel> {
    let regime = clt_part(spec)?;
    let q = spec.dim();
    let mut k = DMatrix::zeros(q, q);
    match regime {
        CltPart::Boundary => k.copy_from(spec.innovations().sigma()),
        CltPart::Long => {
            for i in 0..q {
                for j in 0..q {
                    let sigma = spec.sigma(i, j);
                    if sigma == 0.0 {
                        continue;
                    }
                    let (ds, dt) = (spec.d(i), spec.d(j));
                    let beta = ds + dt;
                    let c = c_integral(ds, dt)? + c_integral(dt, ds)?;
                    k[(i, j)] = c * sigma / ((2.0 - beta) * (3.0 - beta));
                }
            }
            linalg::symmetrize(&mut k);
        }
    }
    Ok(LimitKernel { regime, k })
}

/// `n^{3/2-d}` for `1/2 < d < 1`, `√n ln n` for `d = 1`.
pub fn normalization_factor(d: f64, n: f64) -> Result<f64> {
    if is_boundary(d) {
        if !(n >= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "unit-exponent normalization needs n >= 2, got {n}"
            )));
        }
        return Ok(n.sqrt() * n.ln());
    }
    if d > 0.5 && d < 1.0 {
        if !(n >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "normalization needs n >= 1, got {n}"
            )));
        }
        return Ok(n.powf(1.5 - d));
    }
    Err(Error::UncoveredRegime(format!(
        "no normalization for d={d}"
    )))
}

/// Per-point divisors `b_n(t_i)` turning partial sums into their CLT scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationPlan {
    pub regime: CltPart,
    pub n: usize,
    pub factors: Vec<f64>,
}

impl NormalizationPlan {
    pub fn apply(&self, sums: &[f64]) -> Vec<f64> {
        sums.iter().zip(&self.factors).map(|(s, b)| s / b).collect()
    }

    pub fn apply_in_place(&self, sums: &mut [f64]) {
        for (s, b) in sums.iter_mut().zip(&self.factors) {
            *s /= b;
        }
    }

    /// `m(s,t) / (b(s) b(t))`.
    pub fn normalize_covariance(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            m[(i, j)] / (self.factors[i] * self.factors[j])
        })
    }
}

pub fn normalization_plan(spec: &ProcessSpec, n: usize) -> Result<NormalizationPlan> {
    let regime = clt_part(spec)?;
    let factors = spec
        .memory()
        .values()
        .iter()
        .map(|&d| normalization_factor(d, n as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(NormalizationPlan { regime, n, factors })
}

/// `V_n / (n ln² n)` for `d = 1`, `σ² = 1`, over `2 ≤ n ≤ n_max`.
///
/// Uses `γ(h) = H_h / h`, `γ(0) = π²/6` and
/// `V_{n+1} = V_n + γ(0) + 2 Σ_{h=1}^{n} γ(h)`.
pub fn unit_exponent_normalized_variances(n_max: usize) -> Vec<f64> {
    let g0 = std::f64::consts::PI.powi(2) / 6.0;
    let mut out = Vec::with_capacity(n_max.saturating_sub(1));
    let mut v = g0;
    let mut harmonic = 0.0;
    let mut lag_sum = 0.0;
    for n in 1..n_max {
        let h = n as f64;
        harmonic += 1.0 / h;
        lag_sum += harmonic / h;
        v += g0 + 2.0 * lag_sum;
        let m = h + 1.0;
        out.push(v / (m * m.ln().powi(2)));
    }
    out
}

/// Default constant `C` in the unit-exponent dominating bound.
pub fn boundary_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let sup = unit_exponent_normalized_variances(BOUNDARY_SCAN_MAX_N)
            .into_iter()
            .fold(0.0, f64::max);
        BOUNDARY_SAFETY * sup
    })
}

/// Bound on the normalized partial-sum variance holding for every `n`.
pub fn dominating_bound(d: f64, sigma2: f64) -> Result<f64> {
    dominating_bound_with_constant(d, sigma2, boundary_constant())
}

pub fn dominating_bound_with_constant(d: f64, sigma2: f64, boundary_c: f64) -> Result<f64> {
    if is_boundary(d) {
        return Ok(boundary_c * sigma2);
    }
    if !(d > 0.5 && d < 1.0) {
        return Err(Error::UncoveredRegime(format!(
            "dominating bound needs 1/2 < d <= 1, got {d}"
        )));
    }
    if sigma2 == 0.0 {
        return Ok(0.0);
    }
    let c = c_integral(d, d)?;
    Ok(sigma2 * (1.0 + 1.0 / (2.0 * d - 1.0)) + sigma2 * c / ((1.0 - d) * (3.0 - 2.0 * d)))
}
