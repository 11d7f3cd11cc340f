//! Subcommand implementations.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde_json::{json, Value};
use zonalchaos::arw::{
    build_frequency_set, covariance_diagnostics, grid_doubling, mean_summary, min_grid, run_replicates,
    variance_summary, ReplicateRow, WaveConfig,
};
use zonalchaos::chaos::{
    coefficients_mc, det_coefficient, det_coefficient_sigma, radial_coefficient_integral, truncation_errors,
    variance_expansion, ChaosExpansion, CoefficientRecord,
};
use zonalchaos::geometry::{
    ellipsoid_intrinsic_volumes, intrinsic_volume_ellipsoid_determinant, intrinsic_volume_ellipsoid_kubota,
    intrinsic_volume_ellipsoid_stiefel, mixed_volume_from_intrinsic, steiner_check, EllipsoidSpec, VolumeEstimate,
};
use zonalchaos::matpoly::{hermite_eval, hermite_eval_sigma, laguerre_eval, HermitePoly, MatPolyContext};
use zonalchaos::mehler::{
    correlated_closed_form, correlated_hermite_covariance, eigenvalue_ratio, mehler_apply, CorrelationSpec,
    MehlerSpec,
};
use zonalchaos::partitions::enumerate_partitions;
use zonalchaos::sampling::RngStream;
use zonalchaos::zonal::{cache_path, ZonalTable, DEFAULT_MAX_DEGREE};
use zonalchaos::{acceptance, Partition};

use crate::config::Params;
use crate::output::{tidy, Output};
use crate::CliError;

type Res = Result<Output, CliError>;

fn stream(p: &Params) -> RngStream {
    RngStream::new(p.seed(), 0)
}

fn samples(p: &Params, default: usize) -> usize {
    p.samples.unwrap_or(default)
}

/// The zonal table: loaded from (or written to) the cache directory when
/// one is configured, built in memory otherwise.
fn table(p: &Params, needed: usize) -> Result<Arc<ZonalTable>, CliError> {
    let degree = p.max_degree.unwrap_or(needed.max(6));
    if degree < needed {
        return Err(CliError::Validation(format!("--max-degree {degree} is below the needed degree {needed}")));
    }
    match p.cache_dir() {
        Some(dir) => Ok(Arc::new(ZonalTable::load_or_build(&dir, degree)?)),
        None => Ok(ZonalTable::shared(degree)),
    }
}

fn context(p: &Params, ell: usize, n: usize, needed: usize) -> Result<MatPolyContext, CliError> {
    Ok(MatPolyContext::new(ell, n, table(p, needed)?)?)
}

fn single_value(columns: &[&'static str], row: Vec<Value>, value: f64) -> Output {
    let mut out = Output::table(columns);
    out.push(row);
    out.with_text(tidy(value))
}

fn coefficient_rows(records: &[CoefficientRecord]) -> Output {
    let mut out = Output::table(&["partition", "value", "route", "std_error"]);
    for r in records {
        out.push(vec![
            json!(r.kappa.to_string()),
            json!(r.value),
            serde_json::to_value(r.route).expect("route"),
            json!(r.std_error),
        ]);
    }
    if let [r] = records {
        let text = match r.std_error {
            Some(se) => format!("{} +- {}", tidy(r.value), tidy(se)),
            None => tidy(r.value),
        };
        out = out.with_text(text);
    }
    out
}

fn partitions_for(p: &Params, ell: usize) -> Result<Vec<Partition>, CliError> {
    match p.kappa_opt()? {
        Some(k) => Ok(vec![k]),
        None => {
            let k_max = p.k_max.unwrap_or(3);
            Ok((0..=k_max).flat_map(|k| enumerate_partitions(k, ell)).collect())
        }
    }
}

fn functional(p: &Params) -> Result<fn(&[f64]) -> f64, CliError> {
    match p.func.as_deref().unwrap_or("sqrt-det") {
        "sqrt-det" => Ok(|e: &[f64]| e.iter().map(|v| v.max(0.0)).product::<f64>().sqrt()),
        "trace" => Ok(|e: &[f64]| e.iter().sum()),
        "log-det" => Ok(|e: &[f64]| e.iter().map(|v| v.ln()).sum()),
        other => Err(CliError::Validation(format!(
            "--func {other:?} is not one of sqrt-det, trace, log-det"
        ))),
    }
}

pub fn tables_build(p: &Params) -> Res {
    let degree = p.max_degree.unwrap_or(DEFAULT_MAX_DEGREE);
    let dir = p
        .cache_dir()
        .ok_or_else(|| CliError::Validation(format!("set --cache-dir or {}", crate::config::CACHE_ENV)))?;
    let t = ZonalTable::load_or_build(&dir, degree)?;
    let count: usize = (0..=degree).map(|k| t.partitions(k).len()).sum();
    let path = cache_path(&dir, degree);
    let mut out = Output::table(&["path", "max_degree", "partitions"]);
    out.push(vec![json!(path.display().to_string()), json!(degree), json!(count)]);
    Ok(out)
}

pub fn tables_show(p: &Params) -> Res {
    let kappa = p.kappa()?;
    let t = table(p, kappa.weight())?;
    let mut out = Output::table(&["basis", "partition", "coefficient"]);
    for (lambda, c) in t.monomial(&kappa)?.terms() {
        out.push(vec![json!("monomial"), json!(lambda.to_string()), json!(c.to_string())]);
    }
    for (nu, c) in t.powersum(&kappa)?.terms() {
        out.push(vec![json!("powersum"), json!(nu.to_string()), json!(c.to_string())]);
    }
    Ok(out)
}

pub fn eval_zonal(p: &Params) -> Res {
    let kappa = p.kappa()?;
    let eigs = p.eigs()?;
    let v = table(p, kappa.weight())?.eval(&kappa, &eigs)?;
    Ok(single_value(&["partition", "eigenvalues", "value"], vec![json!(kappa.to_string()), json!(eigs), json!(v)], v))
}

pub fn eval_hermite(p: &Params) -> Res {
    let kappa = p.kappa()?;
    let x = p.x()?;
    let ctx = context(p, x.nrows(), x.ncols(), kappa.weight())?;
    let v = match p.sigma_opt()? {
        Some(s) => hermite_eval_sigma(&kappa, &x, &s, &ctx)?,
        None => hermite_eval(&kappa, &x, &ctx)?,
    };
    Ok(single_value(&["partition", "l", "n", "value"], vec![json!(kappa.to_string()), json!(x.nrows()), json!(x.ncols()), json!(v)], v))
}

pub fn eval_laguerre(p: &Params) -> Res {
    let kappa = p.kappa()?;
    let eigs = p.eigs()?;
    let gamma = p.gamma.ok_or_else(|| CliError::Validation("missing required parameter --gamma".into()))?;
    let ell = eigs.len();
    let ctx = context(p, ell, ell, kappa.weight())?;
    let v = laguerre_eval(&kappa, gamma, &eigs, &ctx)?;
    Ok(single_value(&["partition", "gamma", "eigenvalues", "value"], vec![json!(kappa.to_string()), json!(gamma), json!(eigs), json!(v)], v))
}

pub fn coeff_det(p: &Params) -> Res {
    let (ell, n) = (p.ell()?, p.n_usize()?);
    let records = partitions_for(p, ell)?
        .iter()
        .map(|k| {
            det_coefficient(k, ell, n).map(|value| CoefficientRecord {
                kappa: k.clone(),
                value,
                route: zonalchaos::chaos::Route::ClosedForm,
                std_error: None,
            })
        })
        .collect::<zonalchaos::Result<Vec<_>>>()?;
    Ok(coefficient_rows(&records))
}

pub fn coeff_det_sigma(p: &Params) -> Res {
    let (ell, n) = (p.ell()?, p.n_usize()?);
    let sigma = p.sigma()?;
    let records = partitions_for(p, ell)?
        .iter()
        .map(|k| det_coefficient_sigma(k, ell, n, &sigma, samples(p, 100_000), stream(p)))
        .collect::<zonalchaos::Result<Vec<_>>>()?;
    Ok(coefficient_rows(&records))
}

pub fn coeff_mc(p: &Params) -> Res {
    let (ell, n) = (p.ell()?, p.n_usize()?);
    let kappas = partitions_for(p, ell)?;
    let degree = kappas.iter().map(Partition::weight).max().unwrap_or(0);
    let ctx = context(p, ell, n, degree)?;
    let records = coefficients_mc(functional(p)?, &kappas, &ctx, samples(p, 200_000), stream(p))?;
    Ok(coefficient_rows(&records))
}

pub fn coeff_radial(p: &Params) -> Res {
    let (ell, n) = (p.ell()?, p.n_usize()?);
    let kappas = partitions_for(p, ell)?;
    let degree = kappas.iter().map(Partition::weight).max().unwrap_or(0);
    let ctx = context(p, ell, n, degree)?;
    let f = functional(p)?;
    let records = kappas
        .iter()
        .enumerate()
        .map(|(i, k)| radial_coefficient_integral(f, k, &ctx, samples(p, 200_000), stream(p).substream(i as u64)))
        .collect::<zonalchaos::Result<Vec<_>>>()?;
    Ok(coefficient_rows(&records))
}

pub fn variance_expansion_cmd(p: &Params) -> Res {
    let (ell, n) = (p.ell()?, p.n_usize()?);
    let k_max = p.k_max.unwrap_or(4);
    let exp = ChaosExpansion::determinant(ell, n, k_max)?;
    let sums = variance_expansion(&exp, k_max)?;
    let mean = exp.coefficients[0].value;
    let second_moment: f64 = (0..ell).map(|i| (n - i) as f64).product();
    let total = second_moment - mean * mean;
    let mc = match p.samples {
        Some(s) => Some(truncation_errors(functional(p)?, &exp, s, stream(p))?),
        None => None,
    };
    let mut out = Output::table(&["k", "partial_sum", "remaining", "mc_truncation_error", "mc_std_error"]);
    for k in 0..=k_max {
        let partial = if k == 0 { 0.0 } else { sums[k - 1] };
        let (m, se) = mc.as_ref().map(|v| (json!(v[k].value), json!(v[k].std_error))).unwrap_or((Value::Null, Value::Null));
        out.push(vec![json!(k), json!(partial), json!(total - partial), m, se]);
    }
    Ok(out.with_summary(json!({ "variance": total, "mean": mean })))
}

fn ellipsoid(p: &Params) -> Result<EllipsoidSpec, CliError> {
    Ok(EllipsoidSpec::new(p.sigma()?)?)
}

fn volume_routes(p: &Params, e: &EllipsoidSpec, ell: usize) -> Result<Vec<VolumeEstimate>, CliError> {
    let s = samples(p, 100_000);
    let st = stream(p);
    let route = p.route.as_deref().unwrap_or("all");
    let mut v = Vec::new();
    if matches!(route, "kubota" | "all") {
        v.push(intrinsic_volume_ellipsoid_kubota(e, ell, s, st.substream(0))?);
    }
    if matches!(route, "stiefel" | "all") {
        v.push(intrinsic_volume_ellipsoid_stiefel(e, ell, s, st.substream(1))?);
    }
    if matches!(route, "determinant" | "all") {
        v.push(intrinsic_volume_ellipsoid_determinant(e, ell, s, st.substream(2))?);
    }
    if v.is_empty() {
        return Err(CliError::Validation(format!(
            "--route {route:?} is not one of kubota, stiefel, determinant, all"
        )));
    }
    Ok(v)
}

fn volume_rows(v: &[VolumeEstimate]) -> Output {
    let mut out = Output::table(&["route", "value", "std_error"]);
    for e in v {
        out.push(vec![serde_json::to_value(e.route).expect("route"), json!(e.value), json!(e.std_error)]);
    }
    out
}

pub fn geometry_intrinsic(p: &Params) -> Res {
    let e = ellipsoid(p)?;
    Ok(volume_rows(&volume_routes(p, &e, p.ell()?)?))
}

pub fn geometry_mixed(p: &Params) -> Res {
    let e = ellipsoid(p)?;
    let ell = p.ell()?;
    let v: Vec<VolumeEstimate> =
        volume_routes(p, &e, ell)?.into_iter().map(|v| mixed_volume_from_intrinsic(v, ell, e.n())).collect();
    Ok(volume_rows(&v))
}

pub fn geometry_steiner(p: &Params) -> Res {
    let e = ellipsoid(p)?;
    let eps = p.eps.unwrap_or(0.5);
    let s = samples(p, 200_000);
    let intrinsic = ellipsoid_intrinsic_volumes(&e, s, stream(p).substream(0))?;
    let check = steiner_check(&e, &intrinsic, eps, s, stream(p).substream(1))?;
    let mut out = Output::table(&["eps", "mc_volume", "mc_std_error", "steiner_volume", "relative_error"]);
    out.push(vec![
        json!(eps),
        json!(check.mc_volume.value),
        json!(check.mc_volume.std_error),
        json!(check.steiner_volume),
        json!(check.relative_error),
    ]);
    Ok(out.with_summary(json!({ "intrinsic_volumes": intrinsic })))
}

pub fn mehler_apply_cmd(p: &Params) -> Res {
    let kappa = p.kappa()?;
    let x = p.x()?;
    let ctx = context(p, x.nrows(), x.ncols(), kappa.weight())?;
    let t = p.t.ok_or_else(|| CliError::Validation("missing required parameter --t".into()))?;
    let spec = MehlerSpec::new(t, p.diag_a(x.ncols())?)?;
    let h = HermitePoly::new(&kappa, &ctx)?;
    let hx = h.eval(&x)?;
    let ratio = eigenvalue_ratio(&kappa, &spec, ctx.table())?;
    let est = mehler_apply(|m: &DMatrix<f64>| h.eval(m).unwrap_or(f64::NAN), &x, &spec, samples(p, 100_000), stream(p))?;
    let mut out = Output::table(&["partition", "t", "estimate", "std_error", "hermite_value", "ratio", "expected", "z_score"]);
    let expected = ratio * hx;
    out.push(vec![
        json!(kappa.to_string()),
        json!(t),
        json!(est.value),
        json!(est.std_error),
        json!(hx),
        json!(ratio),
        json!(expected),
        json!(est.z_score(expected)),
    ]);
    Ok(out)
}

pub fn mehler_covariance(p: &Params) -> Res {
    let (kappa, sigma) = (p.kappa()?, p.kappa2()?);
    let (ell, n) = (p.ell()?, p.n_usize()?);
    let ctx = context(p, ell, n, kappa.weight().max(sigma.weight()))?;
    let (spec, label) = match p.r()? {
        Some(r) => (CorrelationSpec::new(r)?, "matrix".to_string()),
        None => {
            let rho = p.rho.unwrap_or(0.6);
            (CorrelationSpec::rho(n, rho)?, format!("rho={rho}"))
        }
    };
    let est = correlated_hermite_covariance(&kappa, &sigma, &spec, &ctx, samples(p, 200_000), stream(p))?;
    let closed = correlated_closed_form(&kappa, &sigma, &spec, &ctx)?;
    let mut out = Output::table(&["kappa", "sigma", "r_label", "estimate", "std_error", "closed_form", "z_score"]);
    out.push(vec![
        json!(kappa.to_string()),
        json!(sigma.to_string()),
        json!(label),
        json!(est.value),
        json!(est.std_error),
        json!(closed),
        json!(est.z_score(closed)),
    ]);
    Ok(out)
}

fn wave_config(p: &Params, default_replicates: usize) -> Result<WaveConfig, CliError> {
    let n = p.n_u64()?;
    let cfg = WaveConfig {
        n,
        ell: p.l.unwrap_or(1),
        grid: p.grid.unwrap_or_else(|| min_grid(n)),
        replicates: p.replicates.unwrap_or(default_replicates),
        seed: p.seed(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn arw_freq(p: &Params) -> Res {
    let f = build_frequency_set(p.n_u64()?)?;
    let mut out = Output::table(&["lambda1", "lambda2", "lambda3", "half_set"]);
    for l in &f.lambdas {
        out.push(vec![json!(l[0]), json!(l[1]), json!(l[2]), json!(f.half_set.contains(l))]);
    }
    Ok(out.with_summary(json!({ "n": f.n, "count": f.count() })))
}

fn replicate_table(rows: &[ReplicateRow]) -> Output {
    let mut out =
        Output::table(&["replicate", "total_variation", "second_chaos_stat", "second_chaos_quadrature"]);
    for r in rows {
        out.push(vec![
            json!(r.replicate),
            json!(r.total_variation),
            json!(r.second_chaos_stat),
            json!(r.second_chaos_quadrature),
        ]);
    }
    out
}

fn summary_only(mut out: Output, p: &Params, summary: Value) -> Output {
    // text mode shows the summary alone; per-replicate rows go to csv/json
    let text = serde_json::to_string_pretty(&summary).expect("json");
    out = out.with_summary(summary);
    if p.format() == crate::config::Format::Text {
        out = out.with_text(text);
    }
    out
}

pub fn arw_mean(p: &Params) -> Res {
    let cfg = wave_config(p, 100)?;
    let rows = run_replicates(&cfg)?;
    let record = mean_summary(&cfg, &rows)?;
    let mut summary = serde_json::to_value(&record).expect("json");
    if let Some(k) = p.samples {
        summary["grid_doubling"] = serde_json::to_value(grid_doubling(&cfg, k)?).expect("json");
    }
    Ok(summary_only(replicate_table(&rows), p, summary))
}

pub fn arw_variance(p: &Params) -> Res {
    let cfg = wave_config(p, 500)?;
    let rows = run_replicates(&cfg)?;
    let record = variance_summary(&cfg, &rows)?;
    Ok(summary_only(replicate_table(&rows), p, serde_json::to_value(&record).expect("json")))
}

pub fn arw_clt(p: &Params) -> Res {
    let cfg = wave_config(p, 1000)?;
    let rows = run_replicates(&cfg)?;
    let record = variance_summary(&cfg, &rows)?;
    let sd = record.variance_empirical.sqrt();
    let mut out = Output::table(&["replicate", "normalized_total_variation", "second_chaos_stat"]);
    for r in &rows {
        out.push(vec![
            json!(r.replicate),
            json!((r.total_variation - record.mean_theory) / sd),
            json!(r.second_chaos_stat),
        ]);
    }
    let summary = json!({
        "ks_total_variation": record.ks_total_variation,
        "ks_total_variation_theory_scale": record.ks_total_variation_theory_scale,
        "ks_second_chaos": record.ks_second_chaos,
        "second_chaos_share": record.second_chaos_share,
        "variance_ratio": record.variance_ratio,
    });
    Ok(summary_only(out, p, summary))
}

pub fn arw_diagnostics(p: &Params) -> Res {
    let f = build_frequency_set(p.n_u64()?)?;
    let grid = p.grid.unwrap_or_else(|| min_grid(f.n));
    let d = covariance_diagnostics(&f, grid)?;
    let mut out = Output::table(&["n", "count", "grid", "integral_tr_r2", "expected", "r0_deviation"]);
    out.push(vec![
        json!(d.n),
        json!(d.count),
        json!(d.grid),
        json!(d.integral_tr_r2),
        json!(d.expected),
        json!(d.r0_deviation),
    ]);
    Ok(out)
}

/// Returns the output and whether every criterion passed.
pub fn suite_acceptance(p: &Params) -> Result<(Output, bool), CliError> {
    let results = match p.id {
        Some(id) => vec![acceptance::run(id)?],
        None => acceptance::run_all(),
    };
    let mut out = Output::table(&["id", "name", "passed", "seconds", "detail"]);
    for r in &results {
        out.push(vec![json!(r.id), json!(r.name), json!(r.passed), json!(r.seconds), json!(r.detail)]);
    }
    let text = results.iter().map(|r| r.line()).collect::<Vec<_>>().join("\n");
    let all = results.iter().all(|r| r.passed);
    Ok((out.with_text(text), all))
}
