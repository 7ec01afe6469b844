use std::collections::HashMap;

use anyhow::{anyhow, Context, Result};
use nalgebra::DMatrix;
use serde_json::{json, Value};
use varmem_core::analytics::{
    c_integral, classify_summability, cross_covariance_asymptotic, l2_membership, lag_series,
    Summability,
};
use varmem_core::export::{csv, key_values, matrix_csv, paths_csv};
use varmem_core::mcverify::{
    fit_variance_exponent, normality_diagnostics, run_clt_experiment_with, MIN_NORMALITY_SAMPLES,
};
use varmem_core::model::validate;
use varmem_core::simulate::generate_paths;
use varmem_core::special::c_closed_form;
use varmem_core::{CltOptions, NormalityOptions, ProcessSpec, SpecConfig};

use crate::artifacts::RunOutput;
use crate::{CommonArgs, Outcome};

fn load(args: &CommonArgs) -> Result<(SpecConfig, ProcessSpec)> {
    let mut cfg = SpecConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = args.tail_tol {
        cfg.tail_tol = tol;
    }
    let spec = cfg.build_spec()?;
    Ok((cfg, spec))
}

fn resolved(cfg: &SpecConfig) -> Result<Value> {
    Ok(serde_json::to_value(cfg)?)
}

/// Keeps free-text notes inside one CSV field.
fn field(text: &str) -> String {
    text.replace([',', '\n'], ";")
}

pub fn simulate(args: &CommonArgs) -> Result<Outcome> {
    let (cfg, spec) = load(args)?;
    let n = cfg.simulate.n.unwrap_or(spec.horizon());
    let ens = generate_paths(&spec, n, cfg.seed)?;
    let mut out = RunOutput::create(&args.out)?;
    out.write("paths.csv", &paths_csv(&ens.values, spec.grid()))?;
    if let Some((k, i)) = (0..n)
        .flat_map(|k| (0..spec.dim()).map(move |i| (k, i)))
        .find(|&(k, i)| !ens.values[(k, i)].is_finite())
    {
        return Err(anyhow!("non-finite path value at k={} point {i}", k + 1));
    }
    let summary = json!({
        "n": n,
        "points": spec.dim(),
        "past_cut": ens.past_cut,
        "seed": ens.seed,
        "spec_fingerprint": format!("{:016x}", ens.spec_hash),
        "truncation_variance": ens.truncation_variance,
        "validation": validate(&spec),
    });
    println!(
        "simulate: {n} paths x {} points, past window {}",
        spec.dim(),
        ens.past_cut
    );
    out.finish("simulate", resolved(&cfg)?, summary)?;
    Ok(Outcome::Pass)
}

pub fn analyze(args: &CommonArgs) -> Result<Outcome> {
    let (cfg, spec) = load(args)?;
    let q = spec.dim();
    let grid = spec.grid();
    let pts = grid.points();
    let lags = &cfg.analyze.lags;
    let mut out = RunOutput::create(&args.out)?;

    let mut series: HashMap<(u64, u64, u64), f64> = HashMap::new();
    let mut rows = Vec::new();
    let mut rejections = 0usize;
    for s in 0..q {
        for t in 0..q {
            let (ds, dt, sigma) = (spec.d(s), spec.d(t), spec.sigma(s, t));
            for &h in lags {
                let key = (ds.to_bits(), dt.to_bits(), h);
                let base = match series.get(&key) {
                    Some(v) => *v,
                    None => {
                        let v = lag_series(ds, dt, h as f64)?.value;
                        series.insert(key, v);
                        v
                    }
                };
                let exact = sigma * base;
                let (asym, ratio, note) = match cross_covariance_asymptotic(ds, dt, sigma, h as f64)
                {
                    Ok(a) => {
                        let ratio = if a.value != 0.0 {
                            (exact / a.value).to_string()
                        } else {
                            "NA".into()
                        };
                        (
                            a.value.to_string(),
                            ratio,
                            format!("{:?}", a.regime).to_lowercase(),
                        )
                    }
                    Err(e) => {
                        rejections += 1;
                        ("NA".into(), "NA".into(), field(&e.to_string()))
                    }
                };
                rows.push(vec![
                    s.to_string(),
                    t.to_string(),
                    pts[s].to_string(),
                    pts[t].to_string(),
                    ds.to_string(),
                    dt.to_string(),
                    h.to_string(),
                    exact.to_string(),
                    asym,
                    ratio,
                    note,
                ]);
            }
        }
    }
    let header: Vec<String> = [
        "s",
        "t",
        "t_s",
        "t_t",
        "d_s",
        "d_t",
        "lag",
        "exact",
        "asymptotic",
        "ratio",
        "note",
    ]
    .map(String::from)
    .into();
    out.write("covariance.csv", &csv(&header, rows))?;

    let header: Vec<String> = ["s", "t", "d_s", "d_t", "lag_sum"].map(String::from).into();
    let spec_ref = &spec;
    let rows = (0..q).flat_map(|s| {
        (0..q).map(move |t| {
            let spec = spec_ref;
            let class = match classify_summability(spec.d(s), spec.d(t)) {
                Summability::Convergent => "convergent",
                Summability::Divergent => "divergent",
            };
            vec![
                s.to_string(),
                t.to_string(),
                spec.d(s).to_string(),
                spec.d(t).to_string(),
                class.to_string(),
            ]
        })
    });
    out.write("summability.csv", &csv(&header, rows))?;

    let mut c = DMatrix::from_element(q, q, f64::NAN);
    let mut delta = DMatrix::from_element(q, q, f64::NAN);
    let mut c_notes = Vec::new();
    let mut cache: HashMap<(u64, u64), Option<(f64, f64)>> = HashMap::new();
    for s in 0..q {
        for t in 0..q {
            let (ds, dt) = (spec.d(s), spec.d(t));
            let entry =
                cache
                    .entry((ds.to_bits(), dt.to_bits()))
                    .or_insert_with(|| match c_integral(ds, dt) {
                        Ok(v) => {
                            let oracle = c_closed_form(ds, dt);
                            Some((v, (v - oracle).abs() / oracle.abs()))
                        }
                        Err(e) => {
                            c_notes.push(vec![s.to_string(), t.to_string(), field(&e.to_string())]);
                            None
                        }
                    });
            if let Some((v, dl)) = *entry {
                c[(s, t)] = v;
                delta[(s, t)] = dl;
            }
        }
    }
    out.write("c_matrix.csv", &matrix_csv(&c, grid))?;
    out.write("c_oracle_delta.csv", &matrix_csv(&delta, grid))?;
    out.write(
        "c_rejections.csv",
        &csv(&["s", "t", "reason"].map(String::from), c_notes),
    )?;

    let l2 = l2_membership(&spec);
    out.write(
        "l2.csv",
        &key_values(&[
            ("total_measure", grid.total_measure().to_string()),
            ("variance_integral", l2.variance_integral.to_string()),
            ("weighted_integral", l2.weighted_integral.to_string()),
            ("member", l2.member.to_string()),
        ]),
    )?;
    let report = validate(&spec);
    out.write_json("validation.json", &report)?;
    println!(
        "analyze: {q} points, {} lags, {rejections} asymptotic rejections, L2 member {}",
        lags.len(),
        l2.member
    );
    let summary = json!({ "points": q, "lags": lags, "asymptotic_rejections": rejections, "l2_member": l2.member });
    out.finish("analyze", resolved(&cfg)?, summary)?;
    Ok(Outcome::Pass)
}

pub fn verify_clt(args: &CommonArgs) -> Result<Outcome> {
    let (cfg, spec) = load(args)?;
    let v = cfg
        .verify
        .clone()
        .context("config has no `verify` section")?;
    let opts = CltOptions {
        z_star: v.z_star,
        window_factor: v.window_factor,
        batches: v.batches,
    };
    let report = run_clt_experiment_with(&spec, v.n, v.replications, cfg.seed, opts)?;
    let fit = fit_variance_exponent(&spec, &v.n_list)?;
    let grid = spec.grid();
    let q = spec.dim();
    let mut out = RunOutput::create(&args.out)?;
    out.write(
        "covariance_empirical.csv",
        &matrix_csv(&report.empirical, grid),
    )?;
    out.write(
        "covariance_exact.csv",
        &matrix_csv(&report.finite_n_exact, grid),
    )?;
    out.write("covariance_limit.csv", &matrix_csv(&report.limit, grid))?;
    out.write("standard_errors.csv", &matrix_csv(&report.se, grid))?;
    out.write("gap.csv", &matrix_csv(&report.gap(), grid))?;
    out.write(
        "relative_gap.csv",
        &matrix_csv(&report.relative_gap(), grid),
    )?;
    let verdicts = report.verdicts.map(|b| if b { 1.0 } else { 0.0 });
    out.write("verdicts.csv", &matrix_csv(&verdicts, grid))?;

    let normality = if v.replications >= MIN_NORMALITY_SAMPLES {
        let nopts = NormalityOptions {
            skew_multiplier: v.skew_multiplier,
            kurtosis_multiplier: v.kurtosis_multiplier,
            ks_band: v.ks_band,
        };
        Some(normality_diagnostics(
            &report.samples,
            &report.exact_variances(),
            nopts,
        )?)
    } else {
        None
    };
    if let Some(diag) = &normality {
        let header: Vec<String> = [
            "point",
            "t",
            "skewness",
            "excess_kurtosis",
            "ks_distance",
            "skew_band",
            "kurtosis_band",
            "ks_band",
            "ok",
        ]
        .map(String::from)
        .into();
        let rows = diag.iter().map(|p| {
            vec![
                p.index.to_string(),
                grid.points()[p.index].to_string(),
                p.skewness.to_string(),
                p.excess_kurtosis.to_string(),
                p.ks_distance.to_string(),
                p.skew_band.to_string(),
                p.kurtosis_band.to_string(),
                p.ks_band.to_string(),
                p.ok().to_string(),
            ]
        });
        out.write("normality.csv", &csv(&header, rows))?;
    }

    let header: Vec<String> = [
        "point",
        "t",
        "d",
        "regime",
        "slope",
        "theoretical",
        "deviation",
        "last_growth_ratio",
    ]
    .map(String::from)
    .into();
    let rows = fit.points.iter().map(|p| {
        vec![
            p.index.to_string(),
            grid.points()[p.index].to_string(),
            p.d.to_string(),
            p.regime.name().to_string(),
            p.slope.to_string(),
            p.theoretical.to_string(),
            p.deviation.to_string(),
            p.growth_ratios
                .last()
                .copied()
                .unwrap_or(f64::NAN)
                .to_string(),
        ]
    });
    out.write("exponent_fit.csv", &csv(&header, rows))?;

    let cov_pass = report.all_pass();
    let normal_pass = normality.as_ref().is_none_or(|d| d.iter().all(|p| p.ok()));
    let normal_ok = normality
        .as_ref()
        .map(|d| d.iter().filter(|p| p.ok()).count());
    let summary = json!({
        "n": report.n,
        "replications": report.replications,
        "seed": report.seed,
        "regime": report.regime,
        "z_star": report.z_star,
        "se_method": report.se_method,
        "past_cut": report.past_cut,
        "far_past_share": report.far_past_share,
        "covariance_verdicts_passed": report.verdicts.len() - report.failures(),
        "covariance_verdicts_total": report.verdicts.len(),
        "max_z": report.max_z(),
        "max_relative_gap": report.max_relative_gap(),
        "normality_points_ok": normal_ok,
        "n_list": fit.n_list,
        "pass": cov_pass && normal_pass,
    });
    out.write_json("report.json", &summary)?;
    println!(
        "verify-clt: {}/{} covariance entries within {} se (max z {:.3})",
        report.verdicts.len() - report.failures(),
        report.verdicts.len(),
        report.z_star,
        report.max_z()
    );
    println!(
        "verify-clt: max relative gap of exact finite-n covariance to limit kernel {:.4}",
        report.max_relative_gap()
    );
    match normal_ok {
        Some(k) => println!("verify-clt: normality within bands at {k}/{q} points"),
        None => println!(
            "verify-clt: normality skipped (needs at least {MIN_NORMALITY_SAMPLES} replications)"
        ),
    }
    out.finish("verify-clt", resolved(&cfg)?, summary)?;
    Ok(if cov_pass && normal_pass {
        Outcome::Pass
    } else {
        Outcome::VerdictFailure
    })
}
