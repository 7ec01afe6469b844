use nalgebra::DMatrix;
use varmem_core::analytics::{
    cross_covariance_exact, limit_kernel, normalization_plan, partial_sum_covariance_matrix,
};
use varmem_core::mcverify::{
    normality_diagnostics, run_clt_experiment, run_clt_experiment_with, CltOptions,
    NormalityOptions,
};
use varmem_core::rng::sample_innovations;
use varmem_core::simulate::generate_paths_with;
use varmem_core::{Error, InnovationModel, MemoryFunction, ProcessSpec, SpaceGrid};

fn spec_with(g: &SpaceGrid, d: Vec<f64>, innovations: InnovationModel) -> ProcessSpec {
    ProcessSpec::new(
        g.clone(),
        MemoryFunction::table(g, d).unwrap(),
        innovations,
        1e-3,
        64,
    )
    .unwrap()
}

fn sample_cov(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let mut c = DMatrix::zeros(x.ncols(), x.ncols());
    for row in x.row_iter() {
        let d = row - &mean;
        c += d.transpose() * &d;
    }
    c / (n - 1.0)
}

#[test]
fn innovation_covariance_matches_sigma() {
    let g = SpaceGrid::with_probability_weights(vec![0.2, 0.5, 0.7, 1.0]).unwrap();
    let count = 40_000;
    for model in [
        InnovationModel::wiener(&g).unwrap(),
        InnovationModel::white(&g, vec![1.0, 2.0, 0.5, 3.0]).unwrap(),
    ] {
        let c = sample_cov(&sample_innovations(&model, count, 17).unwrap());
        for i in 0..4 {
            for j in 0..4 {
                let s = model.sigma_at(i, j);
                let se =
                    ((model.sigma_at(i, i) * model.sigma_at(j, j) + s * s) / count as f64).sqrt();
                assert!(
                    (c[(i, j)] - s).abs() <= 4.0 * se,
                    "({i},{j}) {} vs {s}",
                    c[(i, j)]
                );
            }
        }
    }
}

#[test]
fn lag_covariances_match_exact_series() {
    let g = SpaceGrid::new(vec![1.0], vec![1.0]).unwrap();
    let spec = spec_with(
        &g,
        vec![1.2],
        InnovationModel::white(&g, vec![1.0]).unwrap(),
    );
    let past_cut = 2000;
    let reps = 3000;
    let lags = [0usize, 1, 10, 100];
    let mut prod = vec![Vec::with_capacity(reps); lags.len()];
    for r in 0..reps as u64 {
        let x = generate_paths_with(&spec, 101, 3, r, past_cut)
            .unwrap()
            .values;
        for (l, &h) in lags.iter().enumerate() {
            prod[l].push(x[(0, 0)] * x[(h, 0)]);
        }
    }
    for (l, &h) in lags.iter().enumerate() {
        let n = reps as f64;
        let mean = prod[l].iter().sum::<f64>() / n;
        let var = prod[l].iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let exact = cross_covariance_exact(&spec, 0, 0, h as u64).unwrap().value;
        let window_bias = 1e-3 * exact.abs().max(1e-3);
        assert!(
            (mean - exact).abs() <= 4.0 * (var / n).sqrt() + window_bias,
            "lag {h}: {mean} vs {exact}"
        );
    }
}

#[test]
fn independent_points_have_zero_covariance() {
    let g = SpaceGrid::with_probability_weights(vec![0.3, 0.6, 0.9]).unwrap();
    let spec = spec_with(
        &g,
        vec![0.65, 0.8, 0.9],
        InnovationModel::white(&g, vec![1.0, 1.0, 2.0]).unwrap(),
    );
    let r = run_clt_experiment(&spec, 128, 400, 5).unwrap();
    assert_eq!(r.finite_n_exact[(0, 1)], 0.0);
    assert!(r.all_pass(), "max z {}", r.max_z());
}

#[test]
fn unit_exponent_experiment_targets_sigma() {
    let g = SpaceGrid::with_probability_weights(vec![0.25, 0.5, 0.75, 1.0]).unwrap();
    let spec = ProcessSpec::new(
        g.clone(),
        MemoryFunction::constant(&g, 1.0).unwrap(),
        InnovationModel::white(&g, vec![1.0; 4]).unwrap(),
        1e-3,
        4096,
    )
    .unwrap();
    let r = run_clt_experiment(&spec, 4096, 600, 21).unwrap();
    assert!(r.all_pass(), "max z {}", r.max_z());
    assert_eq!(r.limit, DMatrix::identity(4, 4));
    // exact / limit = Var(S_n) / (n ln² n), frozen from the harmonic-lag recursion
    assert!(
        (r.finite_n_exact[(0, 0)] - 0.962_893).abs() < 1e-5,
        "{}",
        r.finite_n_exact[(0, 0)]
    );
}

#[test]
fn mixed_regimes_are_refused() {
    let g = SpaceGrid::with_probability_weights(vec![0.5, 1.0]).unwrap();
    let spec = spec_with(&g, vec![0.6, 2.0], InnovationModel::wiener(&g).unwrap());
    let e = run_clt_experiment(&spec, 64, 200, 1).unwrap_err();
    assert!(matches!(e, Error::MixedRegimes(_)));
    assert!(e.to_string().contains("CLT not stated for mixed regimes"));
}

#[test]
fn too_few_replications_are_refused() {
    let g = SpaceGrid::new(vec![1.0], vec![1.0]).unwrap();
    let spec = spec_with(
        &g,
        vec![0.7],
        InnovationModel::white(&g, vec![1.0]).unwrap(),
    );
    assert!(matches!(
        run_clt_experiment(&spec, 64, 99, 1),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn monte_carlo_error_shrinks_like_inverse_root_n() {
    let g = SpaceGrid::with_probability_weights(vec![0.5, 1.0]).unwrap();
    let spec = spec_with(&g, vec![0.75, 0.75], InnovationModel::wiener(&g).unwrap());
    let rms = |reps: usize| {
        let seeds = 6;
        let total: f64 = (0..seeds)
            .map(|s| {
                let r = run_clt_experiment(&spec, 64, reps, 1000 + s).unwrap();
                (&r.empirical - &r.finite_n_exact).norm_squared()
            })
            .sum();
        (total / seeds as f64).sqrt()
    };
    let ratio = rms(200) / rms(3200);
    // ideal ratio is 4
    assert!((2.0..8.0).contains(&ratio), "{ratio}");
}

#[test]
fn deterministic_gap_shrinks_with_n() {
    for d in [0.6, 0.7, 0.8] {
        let g = SpaceGrid::with_probability_weights(vec![0.5, 1.0]).unwrap();
        let spec = spec_with(&g, vec![d, d], InnovationModel::wiener(&g).unwrap());
        let limit = limit_kernel(&spec).unwrap().k;
        let gaps: Vec<f64> = (6..=16)
            .map(|p| {
                let n = 1usize << p;
                let plan = normalization_plan(&spec, n).unwrap();
                let exact =
                    plan.normalize_covariance(&partial_sum_covariance_matrix(&spec, n).unwrap());
                (&exact - &limit).amax()
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "d={d}: {gaps:?}");
    }
}

#[test]
fn direct_normal_samples_pass_diagnostics() {
    let g = SpaceGrid::with_probability_weights(vec![0.5, 1.0]).unwrap();
    let model = InnovationModel::white(&g, vec![1.0, 4.0]).unwrap();
    let x = sample_innovations(&model, 2000, 77).unwrap();
    let diag = normality_diagnostics(&x, &[1.0, 4.0], NormalityOptions::default()).unwrap();
    assert!(diag.iter().all(|p| p.ok()), "{diag:?}");
}

#[test]
fn gaussian_partial_sums_are_normal_at_small_n() {
    let g = SpaceGrid::with_probability_weights(vec![0.25, 0.5, 0.75, 1.0]).unwrap();
    let spec = spec_with(&g, vec![0.7; 4], InnovationModel::wiener(&g).unwrap());
    for n in [1, 4, 32] {
        let r = run_clt_experiment_with(&spec, n, 1000, 11, CltOptions::default()).unwrap();
        let diag = normality_diagnostics(
            &r.samples,
            &r.exact_variances(),
            NormalityOptions::default(),
        )
        .unwrap();
        assert!(diag.iter().all(|p| p.ok()), "n={n}: {diag:?}");
    }
}
