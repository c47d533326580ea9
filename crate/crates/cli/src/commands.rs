use crate::config::{CommandKind, ModelName, RunConfig};
use anyhow::{bail, ensure, Context, Result};
use fidkit::expansions::{fd_expansion, mle_expansion, mle_polynomial, ExpansionSpec, LogLikProfile};
use fidkit::fiducial::{fd_from_family, Binomial, FidDistribution};
use fidkit::nef::{asymptotic_fd, build_schur, schur_moments, triangular_transform, Multinomial};
use fidkit::pstar::{
    bvn_log_lik, pstar_fd, BvnPStar, BvnRhoData, ExponentialMeanPStar, HyperbolaData, HyperbolaPStar, PStar, PStarModel,
};
use fidkit::sim::{csv_string, method_fd, run_experiment, Method, ModelData, ReportFormat, ReportJson, ReportMetadata, RunOptions};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::Arc;

pub enum Body {
    Json(Value),
    Csv(String),
}

/// One output file; `suffix` distinguishes the files of a multi-file command.
pub struct Artifact {
    pub suffix: Option<String>,
    pub body: Body,
}

#[derive(Default)]
pub struct Product {
    pub artifacts: Vec<Artifact>,
    pub residuals: BTreeMap<String, f64>,
    /// Internal checks that did not pass.
    pub failed: Vec<String>,
}

impl Product {
    fn single(body: Body) -> Self {
        Self {
            artifacts: vec![Artifact { suffix: None, body }],
            ..Self::default()
        }
    }
}

/// Default and allowed output formats of each command.
pub fn resolve_format(command: CommandKind, requested: Option<ReportFormat>) -> Result<ReportFormat> {
    let (default, csv_ok) = match command {
        CommandKind::Fd => (ReportFormat::Json, true),
        CommandKind::Curve | CommandKind::Coverage => (ReportFormat::Csv, true),
        CommandKind::Expand | CommandKind::Pstar | CommandKind::Mvn => (ReportFormat::Json, false),
    };
    let f = requested.unwrap_or(default);
    ensure!(csv_ok || f == ReportFormat::Json, "{} only writes json", command.name());
    Ok(f)
}

pub fn run(command: CommandKind, cfg: &RunConfig, format: ReportFormat) -> Result<Product> {
    match command {
        CommandKind::Fd => cmd_fd(cfg, format),
        CommandKind::Curve => cmd_curve(cfg, format),
        CommandKind::Expand => cmd_expand(cfg),
        CommandKind::Pstar => cmd_pstar(cfg),
        CommandKind::Mvn => cmd_mvn(cfg),
        CommandKind::Coverage => cmd_coverage(cfg, format),
    }
}

fn model_data(cfg: &RunConfig, model: ModelName) -> Result<ModelData> {
    let s = &cfg.stats;
    let n = cfg.n()?;
    Ok(match model {
        ModelName::Exponential => {
            let mean = s.mu_hat.context("config is missing 'stats.mu_hat'")?;
            ensure!(mean > 0.0 && mean.is_finite(), "stats.mu_hat must be positive");
            ensure!(n >= 2, "exponential needs n >= 2");
            ModelData::Exponential { n, mean }
        }
        ModelName::Hyperbola => ModelData::Hyperbola(HyperbolaData::new(
            n,
            s.s1.context("config is missing 'stats.s1'")?,
            s.s2.context("config is missing 'stats.s2'")?,
        )?),
        ModelName::BvnRho => {
            let data = match (&s.x, &s.y) {
                (Some(x), Some(y)) => BvnRhoData::from_sample(x, y)?,
                _ => BvnRhoData::from_stats(
                    n,
                    s.s1.context("config is missing 'stats.s1'")?,
                    s.s2.context("config is missing 'stats.s2'")?,
                    s.r.context("config is missing 'stats.r'")?,
                )?,
            };
            ensure!(data.n == n, "stats.n = {n} but the sample has {} pairs", data.n);
            ModelData::Bvn(data)
        }
        ModelName::Binomial | ModelName::Multinomial => bail!("{model:?} has no model data"),
    })
}

fn build_fd(cfg: &RunConfig, model: ModelName, method: Method) -> Result<FidDistribution> {
    if model == ModelName::Binomial {
        ensure!(method == Method::Exact, "binomial supports only the exact method");
        let s = cfg.stats.s.context("config is missing 'stats.s'")?;
        return Ok(fd_from_family(&Binomial::new(cfg.n()? as u64)?, s as f64)?);
    }
    Ok(method_fd(method, &model_data(cfg, model)?)?)
}

fn cmd_fd(cfg: &RunConfig, format: ReportFormat) -> Result<Product> {
    let model = cfg.model()?;
    let level = cfg.level()?;
    let mut results = Vec::new();
    for &method in &cfg.methods {
        let fd = build_fd(cfg, model, method).with_context(|| format!("building the {method} FD"))?;
        let iv = fd.interval(level)?;
        results.push(json!({
            "method": method.name(),
            "source": fd.source().to_string(),
            "median": fd.median()?,
            "center": fd.center(),
            "scale": fd.scale(),
            "interval": iv,
            "notes": fd.notes(),
        }));
    }
    Ok(Product::single(match format {
        ReportFormat::Json => Body::Json(json!({ "results": results })),
        ReportFormat::Csv => {
            let mut out = String::from("method,source,median,lower,upper,length\n");
            for r in &results {
                let iv = &r["interval"];
                out += &format!(
                    "{},{},{},{},{},{}\n",
                    r["method"].as_str().unwrap_or(""),
                    r["source"].as_str().unwrap_or(""),
                    r["median"],
                    iv["lower"],
                    iv["upper"],
                    iv["length"]
                );
            }
            Body::Csv(out)
        }
    }))
}

fn cmd_curve(cfg: &RunConfig, format: ReportFormat) -> Result<Product> {
    let model = cfg.model()?;
    let grid = cfg.grid()?.values();
    let mut product = Product::default();
    for &method in &cfg.methods {
        let fd = build_fd(cfg, model, method).with_context(|| format!("building the {method} FD"))?;
        let dom = fd.domain();
        let mut rows = Vec::with_capacity(grid.len());
        for &t in &grid {
            let cdf = fd.cdf(t);
            let (density, cc) = if t > dom.lo && t < dom.hi {
                (fd.density(t)?, fd.confidence_curve(t)?)
            } else {
                (0.0, 1.0)
            };
            rows.push([t, cdf, density, cc]);
        }
        let drop = rows.windows(2).map(|w| w[0][1] - w[1][1]).fold(0.0, f64::max);
        let key = format!("{}_max_cdf_decrease", method.name());
        if drop > 1e-9 {
            product.failed.push(format!("{method} CDF decreases by {drop:e} on the grid"));
        }
        product.residuals.insert(key, drop);
        let body = match format {
            ReportFormat::Csv => {
                let mut out = String::from("theta,cdf,density,cc\n");
                for r in &rows {
                    out += &format!("{},{},{},{}\n", r[0], r[1], r[2], r[3]);
                }
                Body::Csv(out)
            }
            ReportFormat::Json => Body::Json(json!({
                "method": method.name(),
                "rows": rows.iter().map(|r| json!({"theta": r[0], "cdf": r[1], "density": r[2], "cc": r[3]})).collect::<Vec<_>>(),
            })),
        };
        product.artifacts.push(Artifact {
            suffix: Some(method.name().to_string()),
            body,
        });
    }
    Ok(product)
}

/// Per-observation log-likelihood, MLE and finite-difference scale.
fn unit_profile(data: &ModelData) -> Result<LogLikProfile> {
    Ok(match *data {
        ModelData::Exponential { mean, .. } => LogLikProfile::new(move |m: f64| -mean / m - m.ln(), mean, 0.2 * mean)?,
        ModelData::Hyperbola(d) => LogLikProfile::new(move |e| d.log_lik_unit(e), d.eta_hat(), 0.2 * d.b().sqrt())?,
        ModelData::Bvn(d) => {
            let rho = d.rho_hat()?;
            let n = d.n as f64;
            LogLikProfile::new(move |r| bvn_log_lik(r, n, d.s1, d.s2) / n, rho, 0.05 * (1.0 - rho.abs()))?
        }
    })
}

fn range_json((lo, hi): (f64, f64)) -> Value {
    // JSON has no infinities.
    let f = |x: f64| if x.is_finite() { json!(x) } else { Value::Null };
    json!([f(lo), f(hi)])
}

fn cmd_expand(cfg: &RunConfig) -> Result<Product> {
    let model = cfg.model()?;
    let data = model_data(cfg, model)?;
    let n = data.n();
    let profile = unit_profile(&data)?;
    let spec = ExpansionSpec::from_profile(&profile, n)?;
    let expansion = spec.expansion()?;
    let mut body = json!({
        "model": model,
        "theta_hat": spec.theta_hat,
        "n": n,
        "b": spec.b,
        "ell3": spec.ell3,
        "b32_ell3": spec.b.powf(1.5) * spec.ell3,
        "correction": spec.correction.0,
        "monotone_range": range_json(expansion.monotone_range()),
        "faithful_range": range_json(expansion.faithful_range()),
        "description": expansion.describe(),
    });
    if let Some(level) = cfg.level {
        body["fd_interval"] = serde_json::to_value(fd_expansion(&spec)?.interval(level)?)?;
        if let ModelData::Exponential { mean, .. } = data {
            let g = mle_polynomial("exponential")?;
            body["mle_correction"] = json!(g.0);
            body["mle_interval"] = serde_json::to_value(mle_expansion(mean, n, spec.b, g)?.interval(level)?)?;
        }
    }
    Ok(Product::single(Body::Json(body)))
}

fn pstar_body<M: PStarModel + 'static>(model: M, cfg: &RunConfig, extra: Value) -> Result<Product> {
    let engine = Arc::new(PStar::new(model)?);
    let fd = pstar_fd(Arc::clone(&engine))?;
    let (th, sc) = (engine.model().theta_hat(), engine.model().scale());
    let grid = match cfg.grid {
        Some(_) => cfg.grid()?.values(),
        None => (-3..=3).map(|k| th + sc * k as f64).collect(),
    };
    let dom = engine.model().theta_domain();
    ensure!(grid.iter().all(|&t| t > dom.lo && t < dom.hi), "p* grid must lie inside the parameter domain");
    let mut rows = Vec::with_capacity(grid.len());
    for &t in &grid {
        rows.push(json!({"theta": t, "normalizer": engine.normalizer(t)?, "h": engine.h_star(t)}));
    }
    let mut body = json!({
        "model": engine.model().name(),
        "theta_hat": th,
        "scale": sc,
        "median": fd.median()?,
        "normalizer_variation": engine.normalizer_variation(&grid)?,
        "grid": rows,
        "details": extra,
    });
    if let Some(level) = cfg.level {
        body["interval"] = serde_json::to_value(fd.interval(level)?)?;
    }
    Ok(Product::single(Body::Json(body)))
}

fn cmd_pstar(cfg: &RunConfig) -> Result<Product> {
    let model = cfg.model()?;
    match model_data(cfg, model)? {
        ModelData::Exponential { n, mean } => pstar_body(ExponentialMeanPStar::new(n, mean)?, cfg, json!({})),
        ModelData::Hyperbola(d) => pstar_body(HyperbolaPStar::new(&d), cfg, json!({"a": d.a(), "w": d.w(), "b": d.b()})),
        ModelData::Bvn(d) => {
            let m = BvnPStar::new(&d)?;
            let a = m.ancillary();
            pstar_body(m, cfg, json!({"ancillary": a, "r": d.r}))
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>())
}

fn cmd_mvn(cfg: &RunConfig) -> Result<Product> {
    let counts = cfg.stats.counts.as_ref().context("config is missing 'stats.counts'")?;
    let n = cfg.n()?;
    let total: u64 = counts.iter().sum();
    ensure!(
        counts.iter().all(|&c| c > 0) && total < n as u64,
        "counts {counts:?} of n = {n} lie on the boundary of the simplex"
    );
    let x_bar = DVector::from_iterator(counts.len(), counts.iter().map(|&c| c as f64 / n as f64));
    let spec = Multinomial::new(counts.len())?;
    let fd = asymptotic_fd(&spec, &x_bar, n)?;
    let v = &fd.covariance * n as f64;
    let schur = build_schur(&v)?;
    let mut product = Product::default();
    product.residuals.insert("schur_offdiag".into(), schur.residuals.0);
    product.residuals.insert("schur_reconstruction".into(), schur.residuals.1);
    let mut moments_gap: f64 = 0.0;
    for k in 1..=counts.len() {
        let (_, q) = schur_moments(&v, &x_bar, &x_bar, k)?;
        moments_gap = moments_gap.max((q - schur.q[k - 1]).abs());
    }
    product.residuals.insert("schur_moment_gap".into(), moments_gap);
    if moments_gap > 1e-12 {
        product.failed.push(format!("schur_moments and build_schur disagree by {moments_gap:e}"));
    }
    let mut body = json!({
        "n": n,
        "x_bar": x_bar.as_slice(),
        "variance": rows(&v),
        "mean": fd.mean.as_slice(),
        "covariance": rows(&fd.covariance),
        "schur": {"a": rows(&schur.a), "q": schur.q.as_slice()},
    });
    if cfg.phi {
        let phi = triangular_transform(
            &fd,
            |m| DVector::from_vec(vec![m[0] / m[1], m[1]]),
            |m| DMatrix::from_row_slice(2, 2, &[1.0 / m[1], -m[0] / (m[1] * m[1]), 0.0, 1.0]),
        )?;
        body["phi"] = json!({"mean": phi.mean.as_slice(), "covariance": rows(&phi.covariance)});
    }
    product.artifacts.push(Artifact {
        suffix: None,
        body: Body::Json(body),
    });
    Ok(product)
}

fn cmd_coverage(cfg: &RunConfig, format: ReportFormat) -> Result<Product> {
    let model = cfg.model()?.sim_model().context("coverage supports exponential, hyperbola and bvn-rho")?;
    let plan = cfg.plan(model)?;
    let report = run_experiment(&plan, RunOptions::default())?;
    let mut product = Product::single(match format {
        ReportFormat::Csv => Body::Csv(csv_string(&report)?),
        ReportFormat::Json => Body::Json(serde_json::to_value(ReportJson {
            metadata: ReportMetadata {
                plan: Some(plan.clone()),
                seed: Some(plan.master_seed),
                version: fidkit::sim::version_string().to_string(),
                failures: report.failures.clone(),
            },
            rows: report.rows.clone(),
        })?),
    });
    let excluded: usize = report.failures.iter().map(|f| f.failures).sum();
    product.residuals.insert("excluded_replications".into(), excluded as f64);
    Ok(product)
}
