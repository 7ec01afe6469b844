//! Seeded paths `X_k(t)`, their partial sums by two summation orders, and
//! CLT normalization.
//!
//! Truncation is a window on the innovations: every `ε_j` with
//! `j < -past_cut` is zero, so `X_k(t) = Σ_{i=0}^{k+past_cut} (i+1)^{-d(t)} ε_{k-i}(t)`.
//! Both partial-sum routes see exactly the same innovations.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::analytics::{z_coefficients, CoefficientTable, NormalizationPlan};
use crate::error::{Error, Result};
use crate::model::ProcessSpec;
use crate::rng::{InnovationField, SeedRecord, SeededInnovations};
use crate::special::power_tail;

/// Innovation rows generated per block.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathEnsemble {
    pub spec_hash: u64,
    pub n: usize,
    /// Row `k-1` holds `X_k(t_1), …, X_k(t_q)`.
    #[serde(skip)]
    pub values: DMatrix<f64>,
    pub past_cut: u64,
    pub seed: SeedRecord,
    /// Per point, the variance of `X_1(t)` lost to the window,
    /// `σ²(t) Σ_{i>past_cut+1} (i+1)^{-2d(t)}`; later `X_k` lose less.
    pub truncation_variance: Vec<f64>,
}

impl PathEnsemble {
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// Window on the time axis shared by the two partial-sum routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub n: usize,
    pub past_cut: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSums {
    pub values: Vec<f64>,
    pub window: Window,
    pub seed: Option<SeedRecord>,
}

/// Paths for `k = 1..=n` from any innovation field.
pub fn paths_from_field<F: InnovationField + ?Sized>(
    spec: &ProcessSpec,
    n: usize,
    past_cut: u64,
    field: &F,
) -> DMatrix<f64> {
    let q = spec.dim();
    let groups = spec.memory().groups();
    let mut x = vec![0.0; n * q];
    let first = -(past_cut as i64);
    let total = past_cut as usize + n + 1;
    let mut eps = vec![0.0; BLOCK.min(total) * q];
    let mut weights = vec![0.0; groups.len()];
    let mut done = 0;
    while done < total {
        let count = BLOCK.min(total - done);
        let start = first + done as i64;
        field.fill_block(start, count, &mut eps[..count * q]);
        for (r, e) in eps.chunks_exact(q).take(count).enumerate() {
            let j = start + r as i64;
            for k in j.max(1)..=n as i64 {
                let ln = ((k - j + 1) as f64).ln();
                for (w, (d, _)) in weights.iter_mut().zip(&groups) {
                    *w = (-d * ln).exp();
                }
                let row = &mut x[(k as usize - 1) * q..k as usize * q];
                for (w, (_, idx)) in weights.iter().zip(&groups) {
                    for &i in idx {
                        row[i] += w * e[i];
                    }
                }
            }
        }
        done += count;
    }
    DMatrix::from_row_slice(n, q, &x)
}

fn truncation_variance(spec: &ProcessSpec, past_cut: u64) -> Vec<f64> {
    (0..spec.dim())
        .map(|i| spec.sigma(i, i) * power_tail(2.0 * spec.d(i), past_cut as f64 + 3.0))
        .collect()
}

/// Paths with the spec's truncation length as past window.
pub fn generate_paths(spec: &ProcessSpec, n: usize, seed: u64) -> Result<PathEnsemble> {
    let past_cut = spec.truncation()?;
    generate_paths_with(spec, n, seed, 0, past_cut)
}

pub fn generate_paths_with(
    spec: &ProcessSpec,
    n: usize,
    seed: u64,
    replication: u64,
    past_cut: u64,
) -> Result<PathEnsemble> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "path horizon must be at least 1".into(),
        ));
    }
    let field = SeededInnovations::new(spec.innovations(), seed, replication)?;
    let values = paths_from_field(spec, n, past_cut, &field);
    Ok(PathEnsemble {
        spec_hash: spec.fingerprint(),
        n,
        values,
        past_cut,
        seed: field.record(),
        truncation_variance: truncation_variance(spec, past_cut),
    })
}

/// `Σ_{k=1}^n X_k(t_i)` from materialized paths.
pub fn partial_sums_direct(ensemble: &PathEnsemble) -> PartialSums {
    let q = ensemble.dim();
    let mut values = vec![0.0; q];
    for row in ensemble.values.row_iter() {
        for (v, x) in values.iter_mut().zip(row.iter()) {
            *v += x;
        }
    }
    PartialSums {
        values,
        window: Window {
            n: ensemble.n,
            past_cut: ensemble.past_cut,
        },
        seed: Some(ensemble.seed),
    }
}

/// `Σ_j z_{n,j}(t_i) ε_j(t_i)` over the table's window.
pub fn partial_sums_from_table<F: InnovationField + ?Sized>(
    table: &CoefficientTable,
    field: &F,
) -> Vec<f64> {
    let q = field.dim();
    let mut sums = vec![0.0; q];
    let first = table.first_index();
    let total = table.rows();
    let columns: Vec<&[f64]> = (0..q).map(|i| table.column(i)).collect();
    let mut eps = vec![0.0; BLOCK.min(total) * q];
    let mut done = 0;
    while done < total {
        let count = BLOCK.min(total - done);
        field.fill_block(first + done as i64, count, &mut eps[..count * q]);
        for (r, e) in eps.chunks_exact(q).take(count).enumerate() {
            for (i, s) in sums.iter_mut().enumerate() {
                *s += columns[i][done + r] * e[i];
            }
        }
        done += count;
    }
    sums
}

/// Partial sums through the coefficient table, on the same innovations and
/// window that [`generate_paths`] uses.
pub fn partial_sums_via_z(spec: &ProcessSpec, n: usize, seed: u64) -> Result<PartialSums> {
    let past_cut = spec.truncation()?;
    partial_sums_via_z_with(spec, n, seed, 0, past_cut)
}

pub fn partial_sums_via_z_with(
    spec: &ProcessSpec,
    n: usize,
    seed: u64,
    replication: u64,
    past_cut: u64,
) -> Result<PartialSums> {
    let table = z_coefficients(spec, n, past_cut)?;
    let field = SeededInnovations::new(spec.innovations(), seed, replication)?;
    Ok(PartialSums {
        values: partial_sums_from_table(&table, &field),
        window: Window { n, past_cut },
        seed: Some(field.record()),
    })
}

/// Largest coordinate discrepancy relative to the coordinate magnitude,
/// refusing to compare sums built on different windows or draws.
pub fn compare_partial_sums(a: &PartialSums, b: &PartialSums) -> Result<f64> {
    if a.window != b.window || a.seed != b.seed || a.values.len() != b.values.len() {
        return Err(Error::WindowMismatch {
            left: format!("{:?} seed {:?}", a.window, a.seed),
            right: format!("{:?} seed {:?}", b.window, b.seed),
        });
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| {
            let scale = x.abs().max(y.abs());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(0.0, f64::max))
}

pub fn normalize_partial_sums(sums: &[f64], plan: &NormalizationPlan) -> Vec<f64> {
    plan.apply(sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::normalization_plan;
    use crate::model::{InnovationModel, MemoryFunction, SpaceGrid};
    use crate::rng::TableInnovations;

    fn spec(d: Vec<f64>, tail_tol: f64) -> ProcessSpec {
        let g = SpaceGrid::uniform(0.25, 1.0, d.len()).unwrap();
        ProcessSpec::new(
            g.clone(),
            MemoryFunction::table(&g, d).unwrap(),
            InnovationModel::wiener(&g).unwrap(),
            tail_tol,
            8,
        )
        .unwrap()
    }

    #[test]
    fn injected_unit_innovations_give_coefficients() {
        let s = spec(vec![1.0], 1e-3);
        let table = z_coefficients(&s, 2, 0).unwrap();
        let first = TableInnovations::new(1, vec![vec![1.0], vec![0.0]]);
        assert!((partial_sums_from_table(&table, &first)[0] - 1.5).abs() < 1e-15);
        let second = TableInnovations::new(1, vec![vec![0.0], vec![1.0]]);
        assert_eq!(partial_sums_from_table(&table, &second)[0], 1.0);
        let x = paths_from_field(&s, 2, 0, &first);
        assert_eq!(x[(0, 0)], 1.0);
        assert!((x[(1, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn steep_memory_paths_are_innovations() {
        let s = spec(vec![50.0, 50.0], 1e-3);
        let ens = generate_paths(&s, 6, 4).unwrap();
        let field = SeededInnovations::new(s.innovations(), 4, 0).unwrap();
        let mut e = vec![0.0; 2];
        for k in 1..=6 {
            field.fill(k, &mut e);
            for i in 0..2 {
                assert!(
                    (ens.values[(k as usize - 1, i)] - e[i]).abs() <= 1e-15 * (1.0 + e[i].abs())
                );
            }
        }
    }

    #[test]
    fn single_step_sum_is_first_row() {
        let s = spec(vec![0.8, 1.3], 0.05);
        let ens = generate_paths(&s, 1, 11).unwrap();
        let sums = partial_sums_direct(&ens);
        assert_eq!(
            sums.values,
            ens.values.row(0).iter().copied().collect::<Vec<_>>()
        );
    }

    #[test]
    fn z_route_matches_direct_route() {
        let s = spec(vec![0.6, 0.6, 2.0, 2.0], 1e-3);
        for n in [2, 3, 17, 64] {
            let d = partial_sums_direct(&generate_paths_with(&s, n, 5, 2, 40).unwrap());
            let z = partial_sums_via_z_with(&s, n, 5, 2, 40).unwrap();
            assert!(compare_partial_sums(&d, &z).unwrap() < 1e-12);
        }
    }

    #[test]
    fn mismatched_windows_are_refused() {
        let s = spec(vec![1.5], 1e-3);
        let d = partial_sums_direct(&generate_paths_with(&s, 4, 5, 0, 10).unwrap());
        let z = partial_sums_via_z_with(&s, 4, 5, 0, 11).unwrap();
        assert!(matches!(
            compare_partial_sums(&d, &z),
            Err(Error::WindowMismatch { .. })
        ));
        let z = partial_sums_via_z_with(&s, 4, 6, 0, 10).unwrap();
        assert!(compare_partial_sums(&d, &z).is_err());
    }

    #[test]
    fn unreachable_window_is_reported() {
        let s = spec(vec![0.6], 1e-3);
        assert!(matches!(
            generate_paths(&s, 5, 1),
            Err(Error::TailBudgetUnreachable { .. })
        ));
    }

    #[test]
    fn normalization_divides_by_plan() {
        let s = spec(vec![1.0, 1.0], 1e-3);
        let plan = normalization_plan(&s, 100).unwrap();
        let b = 10.0 * 100_f64.ln();
        let out = normalize_partial_sums(&[b, 0.0], &plan);
        assert!((out[0] - 1.0).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
    }
}
