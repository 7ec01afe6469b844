//! Monte Carlo and deterministic checks of the partial-sum CLT.
//!
//! Replications draw the in-window part of `S_n` exactly through the
//! coefficient table and add the far past (innovations older than the
//! window) as one Gaussian vector with its exact covariance. The pass/fail
//! target for the sample covariance is the exact finite-`n` covariance; the
//! distance from that target to the limit kernel is reported separately.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::analytics::{
    limit_kernel, normalization_plan, partial_sum_covariance_matrix, partial_sum_series,
    past_product_series, z_coefficients,
};
use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::model::{is_boundary, CltPart, ProcessSpec, Regime};
use crate::rng::{InnovationField, SeedRecord, SeededInnovations};
use crate::simulate::partial_sums_from_table;

pub const DEFAULT_Z_STAR: f64 = 4.0;
pub const DEFAULT_WINDOW_FACTOR: u64 = 4;
pub const DEFAULT_BATCHES: usize = 20;
pub const MIN_REPLICATIONS: usize = 100;
pub const MIN_NORMALITY_SAMPLES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CltOptions {
    pub z_star: f64,
    /// Exactly simulated past, in multiples of `n`.
    pub window_factor: u64,
    /// Batches for the jackknife standard error.
    pub batches: usize,
}

impl Default for CltOptions {
    fn default() -> Self {
        Self {
            z_star: DEFAULT_Z_STAR,
            window_factor: DEFAULT_WINDOW_FACTOR,
            batches: DEFAULT_BATCHES,
        }
    }
}

/// Running mean and co-moment matrix; merging two accumulators equals
/// accumulating their samples in one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAccumulator {
    count: u64,
    mean: Vec<f64>,
    /// Row-major `q × q` sum of centered products.
    comoment: Vec<f64>,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        let q = self.dim();
        self.count += 1;
        let k = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / k;
        }
        for i in 0..q {
            let after = x[i] - self.mean[i];
            for j in 0..q {
                self.comoment[i * q + j] += after * delta[j];
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let q = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other
            .mean
            .iter()
            .zip(&self.mean)
            .map(|(b, a)| b - a)
            .collect();
        for i in 0..q {
            for j in 0..q {
                self.comoment[i * q + j] +=
                    other.comoment[i * q + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance (divisor `N - 1`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let q = self.dim();
        let denom = (self.count.max(2) - 1) as f64;
        let mut c = DMatrix::from_fn(q, q, |i, j| self.comoment[i * q + j] / denom);
        crate::linalg::symmetrize(&mut c);
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardErrorMethod {
    /// `√((K_ss K_tt + K_st²)/N)` from the exact covariance `K`.
    GaussianFourthMoment,
    JackknifeBatches,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub regime: CltPart,
    pub z_star: f64,
    pub se_method: StandardErrorMethod,
    /// Innovations with index below `-past_cut` enter through the Gaussian far-past term.
    pub past_cut: u64,
    /// Share of each coordinate's exact variance carried by the far-past term.
    pub far_past_share: Vec<f64>,
    #[serde(skip)]
    pub empirical: DMatrix<f64>,
    #[serde(skip)]
    pub finite_n_exact: DMatrix<f64>,
    #[serde(skip)]
    pub limit: DMatrix<f64>,
    #[serde(skip)]
    pub se: DMatrix<f64>,
    #[serde(skip)]
    pub verdicts: DMatrix<bool>,
    /// `N × q` normalized partial sums, one row per replication.
    #[serde(skip)]
    pub samples: DMatrix<f64>,
}

impl CovarianceReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|&v| v)
    }

    pub fn failures(&self) -> usize {
        self.verdicts.iter().filter(|v| !**v).count()
    }

    /// Largest `|empirical - exact| / se` over all entries.
    pub fn max_z(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.empirical.nrows() {
            for j in 0..self.empirical.ncols() {
                let d = (self.empirical[(i, j)] - self.finite_n_exact[(i, j)]).abs();
                if self.se[(i, j)] > 0.0 {
                    worst = worst.max(d / self.se[(i, j)]);
                }
            }
        }
        worst
    }

    /// `|exact - limit|` entrywise.
    pub fn gap(&self) -> DMatrix<f64> {
        (&self.finite_n_exact - &self.limit).abs()
    }

    /// `|exact - limit| / |limit|` entrywise; zero where the limit vanishes.
    pub fn relative_gap(&self) -> DMatrix<f64> {
        let q = self.limit.nrows();
        DMatrix::from_fn(q, q, |i, j| {
            let l = self.limit[(i, j)];
            if l == 0.0 {
                0.0
            } else {
                (self.finite_n_exact[(i, j)] - l).abs() / l.abs()
            }
        })
    }

    pub fn max_relative_gap(&self) -> f64 {
        self.relative_gap().iter().copied().fold(0.0, f64::max)
    }

    pub fn exact_variances(&self) -> Vec<f64> {
        self.finite_n_exact.diagonal().iter().copied().collect()
    }
}

pub fn run_clt_experiment(
    spec: &ProcessSpec,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<CovarianceReport> {
    run_clt_experiment_with(spec, n, replications, seed, CltOptions::default())
}

pub fn run_clt_experiment_with(
    spec: &ProcessSpec,
    n: usize,
    replications: usize,
    seed: u64,
    opts: CltOptions,
) -> Result<CovarianceReport> {
    let plan = normalization_plan(spec, n)?;
    let limit = limit_kernel(spec)?;
    if replications < MIN_REPLICATIONS {
        return Err(Error::InvalidArgument(format!(
            "CLT experiment needs at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    if opts.batches < 2 || opts.batches > replications {
        return Err(Error::InvalidArgument(format!(
            "batch count must lie in [2, {replications}], got {}",
            opts.batches
        )));
    }
    let past_cut = opts.window_factor * n as u64;
    let table = z_coefficients(spec, n, past_cut)?;
    let exact = plan.normalize_covariance(&partial_sum_covariance_matrix(spec, n)?);
    let remainder = far_past_covariance(spec, n, past_cut)?;
    let far_factor = psd_factor(&remainder)?;
    let q = spec.dim();
    let far_past_share: Vec<f64> = (0..q)
        .map(|i| {
            let total = exact[(i, i)] * plan.factors[i] * plan.factors[i];
            if total > 0.0 {
                remainder[(i, i)] / total
            } else {
                0.0
            }
        })
        .collect();

    let samples: Vec<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let field = SeededInnovations::new(spec.innovations(), seed, r)?;
            let mut sums = partial_sums_from_table(&table, &field);
            let far = SeededInnovations::auxiliary(spec.innovations(), far_factor.clone(), seed, r);
            let mut tail = vec![0.0; q];
            far.fill(0, &mut tail);
            for (s, t) in sums.iter_mut().zip(&tail) {
                *s += t;
            }
            plan.apply_in_place(&mut sums);
            Ok(sums)
        })
        .collect::<Result<_>>()?;

    let batches = batch_accumulators(&samples, q, opts.batches);
    let mut total = CovarianceAccumulator::new(q);
    for b in &batches {
        total.merge(b);
    }
    let empirical = total.covariance();

    let gaussian = spec.innovations().law().is_gaussian();
    let (se, se_method) = if gaussian {
        let nn = replications as f64;
        (
            DMatrix::from_fn(q, q, |i, j| {
                ((exact[(i, i)] * exact[(j, j)] + exact[(i, j)].powi(2)) / nn).sqrt()
            }),
            StandardErrorMethod::GaussianFourthMoment,
        )
    } else {
        (
            jackknife_se(&batches),
            StandardErrorMethod::JackknifeBatches,
        )
    };
    let verdicts = DMatrix::from_fn(q, q, |i, j| {
        (empirical[(i, j)] - exact[(i, j)]).abs() <= opts.z_star * se[(i, j)]
    });
    let flat: Vec<f64> = samples.into_iter().flatten().collect();
    Ok(CovarianceReport {
        n,
        replications,
        seed,
        regime: plan.regime,
        z_star: opts.z_star,
        se_method,
        past_cut,
        far_past_share,
        empirical,
        finite_n_exact: exact,
        limit: limit.k,
        se,
        verdicts,
        samples: DMatrix::from_row_slice(replications, q, &flat),
    })
}

/// `σ(s,t) Σ_{j < -past_cut} z_{n,j}(s) z_{n,j}(t)`.
pub fn far_past_covariance(spec: &ProcessSpec, n: usize, past_cut: u64) -> Result<DMatrix<f64>> {
    let groups = spec.memory().groups();
    let mut series = vec![vec![0.0; groups.len()]; groups.len()];
    for a in 0..groups.len() {
        for b in a..groups.len() {
            let v = past_product_series(groups[a].0, groups[b].0, n, past_cut + 2)?.value;
            series[a][b] = v;
            series[b][a] = v;
        }
    }
    let q = spec.dim();
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

/// Contiguous, nearly equal batches in replication order.
pub fn batch_accumulators(
    samples: &[Vec<f64>],
    dim: usize,
    batches: usize,
) -> Vec<CovarianceAccumulator> {
    let n = samples.len();
    (0..batches)
        .map(|b| {
            let (lo, hi) = (b * n / batches, (b + 1) * n / batches);
            let mut acc = CovarianceAccumulator::new(dim);
            for s in &samples[lo..hi] {
                acc.push(s);
            }
            acc
        })
        .collect()
}

/// Delete-one-batch jackknife standard error of the sample covariance.
pub fn jackknife_se(batches: &[CovarianceAccumulator]) -> DMatrix<f64> {
    let b = batches.len();
    let q = batches[0].dim();
    let leave_out: Vec<DMatrix<f64>> = (0..b)
        .map(|skip| {
            let mut acc = CovarianceAccumulator::new(q);
            for (i, batch) in batches.iter().enumerate() {
                if i != skip {
                    acc.merge(batch);
                }
            }
            acc.covariance()
        })
        .collect();
    let mut mean = DMatrix::zeros(q, q);
    for c in &leave_out {
        mean += c;
    }
    mean /= b as f64;
    let mut var = DMatrix::zeros(q, q);
    for c in &leave_out {
        let d = c - &mean;
        var += d.component_mul(&d);
    }
    (var * ((b - 1) as f64 / b as f64)).map(f64::sqrt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalityOptions {
    pub skew_multiplier: f64,
    pub kurtosis_multiplier: f64,
    /// Flag threshold for `√N · D_KS`.
    pub ks_band: f64,
}

impl Default for NormalityOptions {
    fn default() -> Self {
        Self {
            skew_multiplier: 4.0,
            kurtosis_multiplier: 4.0,
            ks_band: 2.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointNormality {
    pub index: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Kolmogorov distance to `N(0, reference variance)`.
    pub ks_distance: f64,
    pub skew_band: f64,
    pub kurtosis_band: f64,
    pub ks_band: f64,
    pub skew_ok: bool,
    pub kurtosis_ok: bool,
    pub ks_ok: bool,
}

impl PointNormality {
    pub fn ok(&self) -> bool {
        self.skew_ok && self.kurtosis_ok && self.ks_ok
    }
}

fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Per-column skewness, excess kurtosis and Kolmogorov distance against a
/// centred normal with the given reference variances.
pub fn normality_diagnostics(
    samples: &DMatrix<f64>,
    reference_var: &[f64],
    opts: NormalityOptions,
) -> Result<Vec<PointNormality>> {
    let nn = samples.nrows();
    if nn < MIN_NORMALITY_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "normality diagnostics need at least {MIN_NORMALITY_SAMPLES} samples, got {nn}"
        )));
    }
    if reference_var.len() != samples.ncols() {
        return Err(Error::InvalidArgument(
            "one reference variance per column is required".into(),
        ));
    }
    let n = nn as f64;
    let skew_band = opts.skew_multiplier * (6.0 / n).sqrt();
    let kurtosis_band = opts.kurtosis_multiplier * (24.0 / n).sqrt();
    let ks_band = opts.ks_band / n.sqrt();
    Ok(samples
        .column_iter()
        .enumerate()
        .map(|(index, col)| {
            let mean = col.iter().sum::<f64>() / n;
            let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
            for &x in col.iter() {
                let d = x - mean;
                let d2 = d * d;
                m2 += d2;
                m3 += d2 * d;
                m4 += d2 * d2;
            }
            m2 /= n;
            m3 /= n;
            m4 /= n;
            let skewness = m3 / m2.powf(1.5);
            let excess_kurtosis = m4 / (m2 * m2) - 3.0;
            let sd = reference_var[index].sqrt();
            let mut sorted: Vec<f64> = col.iter().copied().collect();
            sorted.sort_by(f64::total_cmp);
            let ks_distance = sorted
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = standard_normal_cdf(x / sd);
                    ((i + 1) as f64 / n - f).max(f - i as f64 / n)
                })
                .fold(0.0, f64::max);
            PointNormality {
                index,
                skewness,
                excess_kurtosis,
                ks_distance,
                skew_band,
                kurtosis_band,
                ks_band,
                skew_ok: skewness.abs() <= skew_band,
                kurtosis_ok: excess_kurtosis.abs() <= kurtosis_band,
                ks_ok: ks_distance <= ks_band,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFit {
    pub index: usize,
    pub d: f64,
    pub regime: Regime,
    /// Least-squares slope of `ln Var(S_n)` against `ln n`; for unit
    /// exponents the response is `ln(Var(S_n) / ln² n)`.
    pub slope: f64,
    pub intercept: f64,
    pub theoretical: f64,
    pub deviation: f64,
    pub residuals: Vec<f64>,
    /// `Var(S_n)` over the leading-order growth law at each horizon.
    pub growth_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub n_list: Vec<usize>,
    pub points: Vec<PointFit>,
}

/// Fits the variance growth exponent per grid point from exact variances.
pub fn fit_variance_exponent(spec: &ProcessSpec, n_list: &[usize]) -> Result<ExponentFit> {
    if n_list.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "exponent fit needs at least 5 horizons, got {}",
            n_list.len()
        )));
    }
    if let Some(&bad) = n_list.iter().find(|&&n| n < 2 || !n.is_power_of_two()) {
        return Err(Error::InvalidArgument(format!(
            "horizons must be dyadic and at least 2, got {bad}"
        )));
    }
    let xs: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let mut points = Vec::with_capacity(spec.dim());
    for (d, idx) in spec.memory().groups() {
        let regime = Regime::of(d).expect("validated spec");
        let vars = n_list
            .iter()
            .map(|&n| partial_sum_series(d, d, n).map(|v| v.value))
            .collect::<Result<Vec<_>>>()?;
        let boundary = is_boundary(d);
        let ys: Vec<f64> = vars
            .iter()
            .zip(&xs)
            .map(|(v, x)| {
                if boundary {
                    v.ln() - 2.0 * x.ln()
                } else {
                    v.ln()
                }
            })
            .collect();
        let (slope, intercept) = least_squares(&xs, &ys);
        let residuals: Vec<f64> = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| y - (intercept + slope * x))
            .collect();
        let theoretical = match regime {
            Regime::Long => 3.0 - 2.0 * d,
            Regime::Boundary | Regime::Short => 1.0,
        };
        let growth_ratios: Vec<f64> = match regime {
            Regime::Long => {
                let k = crate::analytics::partial_sum_covariance_asymptotic(d, d, 1.0, 1.0)?.value;
                vars.iter()
                    .zip(n_list)
                    .map(|(v, &n)| v / (k * (n as f64).powf(theoretical)))
                    .collect()
            }
            Regime::Boundary => vars
                .iter()
                .zip(n_list)
                .map(|(v, &n)| {
                    let l = (n as f64).ln();
                    v / (n as f64 * l * l)
                })
                .collect(),
            Regime::Short => vars
                .iter()
                .zip(n_list)
                .map(|(v, &n)| v / n as f64)
                .collect(),
        };
        for i in idx {
            points.push(PointFit {
                index: i,
                d,
                regime,
                slope,
                intercept,
                theoretical,
                deviation: (slope - theoretical).abs(),
                residuals: residuals.clone(),
                growth_ratios: growth_ratios.clone(),
            });
        }
    }
    points.sort_by_key(|p| p.index);
    Ok(ExponentFit {
        n_list: n_list.to_vec(),
        points,
    })
}

/// Ordinary least squares `y ≈ a + b x`, returning `(b, a)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Seeds of every replication in an experiment.
pub fn replication_records(spec: &ProcessSpec, seed: u64, replications: usize) -> Vec<SeedRecord> {
    (0..replications as u64)
        .map(|r| SeedRecord {
            seed,
            seed_stream: spec.innovations().seed_stream(),
            replication: r,
        })
        .collect()
}
