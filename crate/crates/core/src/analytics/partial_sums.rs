//! Partial sums `S_n(t) = Σ_{k=1}^n X_k(t)` as weighted sums of independent
//! innovations, and their exact and asymptotic covariances.
//!
//! With `P_m(d) = Σ_{k=1}^m k^{-d}` and `Z_m(d) = Σ_{k=1}^n (k+m)^{-d}` the
//! weight of `ε_j` in `S_n` is `P_{n-j+1}` for `2 ≤ j ≤ n` and `Z_{1-j}` for
//! `j ≤ 1`, so
//!
//! `E[S_n(s) S_n(t)] = σ(s,t) [Σ_{m=1}^{n-1} P_m(d_s) P_m(d_t) + Σ_{m≥0} Z_m(d_s) Z_m(d_t)]`.

use nalgebra::DMatrix;
use serde::Serialize;

use super::covariance::{lag_series, SeriesValue};
use super::integral::c_integral;
use crate::error::{Error, Result};
use crate::model::{is_boundary, ProcessSpec, DEFAULT_TRUNCATION_CAP};
use crate::quadrature::{integrate_power_tail, QuadOptions};
use crate::special::{power_integral_len, power_sum_from};

/// Past weights summed directly before the Euler–Maclaurin tail.
const PAST_DIRECT_TERMS: u64 = 2048;

/// Horizons up to which the stationary lag-sum route is evaluated as a
/// cross-check of the coefficient route.
pub const CROSS_CHECK_MAX_N: usize = 512;

/// Relative agreement demanded between the two routes, on top of their
/// certified errors.
pub const CROSS_CHECK_REL_TOL: f64 = 1e-10;

/// `[P_0, P_1, …, P_n]` with `P_m = Σ_{k=1}^m k^{-d}`.
pub fn prefix_power_sums(d: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(acc);
    for k in 1..=n {
        acc += (k as f64).powf(-d);
        out.push(acc);
    }
    out
}

/// `Z_m = Σ_{k=1}^n (k+m)^{-d}` for real `m ≥ 0`: weight of the innovation
/// `m` steps before time 1.
pub fn past_weight(d: f64, n: usize, m: f64) -> f64 {
    power_sum_from(d, m + 1.0, n as u64)
}

fn past_weight_slope(d: f64, n: usize, m: f64) -> f64 {
    -d * power_sum_from(d + 1.0, m + 1.0, n as u64)
}

/// `Σ_{m ≥ from} Z_m(d_s) Z_m(d_t)`.
///
/// The summand is completely monotone in `m`; after direct summation the
/// tail is its integral plus two Euler–Maclaurin corrections, with the
/// next correction as certified error.
pub fn past_product_series(d_s: f64, d_t: f64, n: usize, from: u64) -> Result<SeriesValue> {
    let beta = d_s + d_t;
    if !(beta > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "past series needs d_s + d_t > 1, got {beta}"
        )));
    }
    let g = |m: f64| past_weight(d_s, n, m) * past_weight(d_t, n, m);
    let end = from + PAST_DIRECT_TERMS;
    let mut direct = 0.0;
    for m in (from..end).rev() {
        direct += g(m as f64);
    }
    let a = end as f64;
    let (zs, zt) = (past_weight(d_s, n, a), past_weight(d_t, n, a));
    let ga = zs * zt;
    let dga = past_weight_slope(d_s, n, a) * zt + zs * past_weight_slope(d_t, n, a);
    let integral = integrate_power_tail(g, a, beta, QuadOptions::default())?;
    let value = direct + integral.value + 0.5 * ga - dga / 12.0;
    let em_err = ga * beta * (beta + 1.0) * (beta + 2.0) / a.powi(3) / 720.0;
    let round = PAST_DIRECT_TERMS as f64 * f64::EPSILON * value.abs();
    Ok(SeriesValue {
        value,
        abs_err: em_err + integral.abs_err + round,
    })
}

/// `Σ_{m=1}^{n-1} P_m(d_s) P_m(d_t)`: contribution of innovations inside the horizon.
pub fn inner_product_sum(d_s: f64, d_t: f64, n: usize) -> f64 {
    let ps = prefix_power_sums(d_s, n);
    if d_s.to_bits() == d_t.to_bits() {
        return ps[1..n].iter().map(|p| p * p).sum();
    }
    let pt = prefix_power_sums(d_t, n);
    ps[1..n].iter().zip(&pt[1..n]).map(|(a, b)| a * b).sum()
}

/// `E[S_n(s) S_n(t)] / σ(s,t)` through the coefficient route.
pub fn partial_sum_series(d_s: f64, d_t: f64, n: usize) -> Result<SeriesValue> {
    if n == 0 {
        return Ok(SeriesValue {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    let past = past_product_series(d_s, d_t, n, 0)?;
    let inner = inner_product_sum(d_s, d_t, n);
    let value = inner + past.value;
    Ok(SeriesValue {
        value,
        abs_err: past.abs_err + n as f64 * f64::EPSILON * value,
    })
}

/// `E[S_n(s) S_n(t)] / σ(s,t)` through stationary lag covariances:
/// `n γ_st(0) + Σ_{h=1}^{n-1} (n-h) [γ_st(h) + γ_ts(h)]`.
pub fn stationary_partial_sum_series(d_s: f64, d_t: f64, n: usize) -> Result<SeriesValue> {
    if n == 0 {
        return Ok(SeriesValue {
            value: 0.0,
            abs_err: 0.0,
        });
    }
    let g0 = lag_series(d_s, d_t, 0.0)?;
    let mut value = n as f64 * g0.value;
    let mut err = n as f64 * g0.abs_err;
    for h in 1..n {
        let w = (n - h) as f64;
        let a = lag_series(d_s, d_t, h as f64)?;
        let b = lag_series(d_t, d_s, h as f64)?;
        value += w * (a.value + b.value);
        err += w * (a.abs_err + b.abs_err);
    }
    Ok(SeriesValue {
        value,
        abs_err: err + n as f64 * f64::EPSILON * value.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSumCovariance {
    pub value: f64,
    pub abs_err: f64,
    /// Stationary lag-sum value, when it was evaluated.
    pub cross_check: Option<f64>,
}

/// `E[S_n(s) S_n(t)]` for grid indices `s`, `t`.
///
/// Returns the coefficient-route value. For `n ≤ CROSS_CHECK_MAX_N` the
/// stationary lag-sum route is evaluated too and any disagreement beyond the
/// combined certified error is an [`Error::Inconsistent`].
pub fn partial_sum_covariance_exact(
    spec: &ProcessSpec,
    n: usize,
    s: usize,
    t: usize,
) -> Result<PartialSumCovariance> {
    let sigma = spec.sigma(s, t);
    if sigma == 0.0 {
        return Ok(PartialSumCovariance {
            value: 0.0,
            abs_err: 0.0,
            cross_check: Some(0.0),
        });
    }
    let (d_s, d_t) = (spec.d(s), spec.d(t));
    let b = partial_sum_series(d_s, d_t, n)?;
    let mut cross_check = None;
    if n <= CROSS_CHECK_MAX_N {
        let a = stationary_partial_sum_series(d_s, d_t, n)?;
        let tol = a.abs_err + b.abs_err + CROSS_CHECK_REL_TOL * b.value.abs();
        if (a.value - b.value).abs() > tol {
            return Err(Error::Inconsistent {
                what: format!("partial-sum covariance routes disagree at n={n}, points ({s},{t})"),
                a: a.value,
                b: b.value,
                tol,
            });
        }
        cross_check = Some(sigma * a.value);
    }
    let scaled = b.scaled(sigma);
    Ok(PartialSumCovariance {
        value: scaled.value,
        abs_err: scaled.abs_err,
        cross_check,
    })
}

/// Full `q × q` matrix of `E[S_n(s) S_n(t)]`, one evaluation per distinct
/// exponent pair.
pub fn partial_sum_covariance_matrix(spec: &ProcessSpec, n: usize) -> Result<DMatrix<f64>> {
    let q = spec.dim();
    let groups = spec.memory().groups();
    let mut series = vec![vec![0.0; groups.len()]; groups.len()];
    for a in 0..groups.len() {
        for b in a..groups.len() {
            let v = partial_sum_series(groups[a].0, groups[b].0, n)?.value;
            series[a][b] = v;
            series[b][a] = v;
        }
    }
    let mut group_of = vec![0; q];
    for (g, (_, idx)) in groups.iter().enumerate() {
        for &i in idx {
            group_of[i] = g;
        }
    }
    Ok(DMatrix::from_fn(q, q, |i, j| {
        spec.sigma(i, j) * series[group_of[i]][group_of[j]]
    }))
}

/// Window-restricted covariance via coefficients: innovations with index
/// below `-past_cut` are zero, so
/// `Σ_{m=1}^{n-1} P_m P_m + Σ_{m=0}^{past_cut+1} Z_m Z_m`.
pub fn windowed_coefficient_sum(d_s: f64, d_t: f64, n: usize, past_cut: u64) -> f64 {
    let inner = inner_product_sum(d_s, d_t, n);
    let mut past = 0.0;
    for m in (0..=past_cut + 1).rev() {
        let m = m as f64;
        past += past_weight(d_s, n, m) * past_weight(d_t, n, m);
    }
    inner + past
}

/// Window-restricted covariance via the triple sum over pairs `(k, l)`:
/// `Σ_k G^{st}_0(k+J) + Σ_{h≥1} Σ_{k=1}^{n-h} [G^{st}_h(k+J) + G^{ts}_h(k+J)]`
/// with `G^{st}_h(K) = Σ_{i=0}^{K} (i+1)^{-d_s} (i+h+1)^{-d_t}`.
pub fn windowed_triple_sum(d_s: f64, d_t: f64, n: usize, past_cut: u64) -> f64 {
    let j = past_cut as usize;
    let lagged = |a: f64, b: f64, h: usize| -> f64 {
        let term = |i: usize| ((i + 1) as f64).powf(-a) * ((i + h + 1) as f64).powf(-b);
        let mut g: f64 = (0..=j).map(term).sum();
        let mut total = 0.0;
        for k in 1..=(n - h) {
            g += term(k + j);
            total += g;
        }
        total
    };
    let mut total = lagged(d_s, d_t, 0);
    for h in 1..n {
        total += lagged(d_s, d_t, h) + lagged(d_t, d_s, h);
    }
    total
}

/// Weights `z_{n,j}(t_i)` for `j = -past_cut, …, n` at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    n: usize,
    past_cut: u64,
    /// Row `r` holds `j = r - past_cut`; one column per grid point.
    z: DMatrix<f64>,
    /// `σ²(t) Σ_{j < -past_cut} z²_{n,j}(t)` upper bounds.
    tail_var: Vec<f64>,
}

impl CoefficientTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn past_cut(&self) -> u64 {
        self.past_cut
    }

    pub fn rows(&self) -> usize {
        self.z.nrows()
    }

    pub fn first_index(&self) -> i64 {
        -(self.past_cut as i64)
    }

    pub fn get(&self, j: i64, point: usize) -> f64 {
        self.z[((j - self.first_index()) as usize, point)]
    }

    /// Weights of one grid point, ordered by increasing `j`.
    pub fn column(&self, point: usize) -> &[f64] {
        let r = self.z.nrows();
        &self.z.as_slice()[point * r..(point + 1) * r]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn tail_var(&self) -> &[f64] {
        &self.tail_var
    }
}

/// Upper bound on `Σ_{m ≥ past_cut+2} Z_m²` from `Z_m ≤ ∫_m^{m+n} y^{-d} dy`.
pub fn past_tail_bound(d: f64, n: usize, past_cut: u64) -> Result<f64> {
    let start = past_cut as f64 + 1.0;
    let f = |x: f64| power_integral_len(d, x, n as f64).powi(2);
    let r = integrate_power_tail(
        f,
        start,
        2.0 * d,
        QuadOptions {
            rel_tol: 1e-10,
            ..QuadOptions::default()
        },
    )?;
    Ok(r.value + r.abs_err)
}

pub fn z_coefficients(spec: &ProcessSpec, n: usize, past_cut: u64) -> Result<CoefficientTable> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "coefficient table needs n >= 1".into(),
        ));
    }
    if past_cut > DEFAULT_TRUNCATION_CAP {
        return Err(Error::TailBudgetUnreachable {
            d: spec.memory().min(),
            tail_tol: spec.tail_tol(),
            required: past_cut as f64,
            cap: DEFAULT_TRUNCATION_CAP,
            suggested_tol: f64::NAN,
        });
    }
    let q = spec.dim();
    let rows = past_cut as usize + n + 1;
    let mut z = DMatrix::zeros(rows, q);
    let mut tail_var = vec![0.0; q];
    for (d, idx) in spec.memory().groups() {
        let col = coefficient_column(d, n, past_cut);
        let bound = past_tail_bound(d, n, past_cut)?;
        for &i in &idx {
            z.column_mut(i).copy_from_slice(&col);
            tail_var[i] = spec.sigma(i, i) * bound;
        }
    }
    Ok(CoefficientTable {
        n,
        past_cut,
        z,
        tail_var,
    })
}

/// `z_{n,j}` for `j = -past_cut, …, n` at a single exponent.
pub fn coefficient_column(d: f64, n: usize, past_cut: u64) -> Vec<f64> {
    let p = prefix_power_sums(d, n);
    let mut col = Vec::with_capacity(past_cut as usize + n + 1);
    for m in (0..=past_cut + 1).rev() {
        col.push(past_weight(d, n, m as f64));
    }
    for j in 2..=n {
        col.push(p[n - j + 1]);
    }
    col
}

/// Smallest past cut whose truncated variance is within `tail_tol` of the
/// exact partial-sum variance at every grid point.
pub fn required_past_cut(spec: &ProcessSpec, n: usize) -> Result<u64> {
    let tol = spec.tail_tol();
    let mut need = 0;
    for (d, _) in spec.memory().groups() {
        let var = partial_sum_series(d, d, n)?.value;
        let budget = tol * var;
        let cap = DEFAULT_TRUNCATION_CAP;
        let at_cap = past_tail_bound(d, n, cap)?;
        if at_cap > budget {
            // Z_m ≈ n m^{-d} far in the past
            let required =
                (budget * (2.0 * d - 1.0) / (n as f64).powi(2)).powf(1.0 / (1.0 - 2.0 * d));
            return Err(Error::TailBudgetUnreachable {
                d,
                tail_tol: tol,
                required,
                cap,
                suggested_tol: at_cap / var,
            });
        }
        let (mut lo, mut hi) = (0_u64, cap);
        if past_tail_bound(d, n, 0)? <= budget {
            hi = 0;
        }
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if past_tail_bound(d, n, mid)? <= budget {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        need = need.max(hi);
    }
    Ok(need)
}

/// Leading-order `E[S_n(s) S_n(t)]`.
pub fn partial_sum_covariance_asymptotic(
    d_s: f64,
    d_t: f64,
    sigma_st: f64,
    n: f64,
) -> Result<super::covariance::Asymptotic> {
    use super::covariance::{Asymptotic, AsymptoticRegime};
    let long = |d: f64| d > 0.5 && d < 1.0 && !is_boundary(d);
    if long(d_s) && long(d_t) {
        let beta = d_s + d_t;
        let c = c_integral(d_s, d_t)? + c_integral(d_t, d_s)?;
        return Ok(Asymptotic {
            value: c * sigma_st / ((2.0 - beta) * (3.0 - beta)) * n.powf(3.0 - beta),
            regime: AsymptoticRegime::PowerLaw,
        });
    }
    if is_boundary(d_s) && is_boundary(d_t) {
        let l = n.ln();
        return Ok(Asymptotic {
            value: sigma_st * n * l * l,
            regime: AsymptoticRegime::Logarithmic,
        });
    }
    Err(Error::UncoveredRegime(format!(
        "partial-sum growth law needs both exponents in (1/2, 1) or both equal to 1 (got d_s={d_s}, d_t={d_t})"
    )))
}
