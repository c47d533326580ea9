//! Seeded Monte Carlo coverage and expected-length study of interval methods.
//!
//! Every (grid point, replication) pair draws its data from its own stream, so
//! results do not depend on how the work is scheduled.

mod export;

pub use export::{csv_string, export_report, parse_csv, parse_json, version_string, ReportFormat, ReportJson, ReportMetadata, CSV_HEADER};

use crate::error::{Error, Result};
use crate::expansions::{fd_expansion_with, jeffreys_posterior, mle_polynomial, Expansion, ExpansionSpec, MleExpansion};
use crate::fiducial::{fd_from_family, FidDistribution, GammaMean, IntervalReport, Source};
use crate::numerics::Bracket;
use crate::pstar::{
    bvn_expansion_fd, bvn_jeffreys_fd, bvn_pstar_fd, fisher_z_fd, hyperbola_exact_fd, pearson_exact_fd, pearson_normal_fd,
    pstar_fd_for, BvnRhoData, ExponentialMeanPStar, HyperbolaData, HyperbolaPStar,
};
use crate::rng::{derive_stream, Stream};
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// Largest tolerated share of failed replications per (grid point, method).
pub const MAX_FAILURE_RATE: f64 = 1e-3;
pub const MIN_REPLICATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelId {
    /// Mean of `n` exponential observations.
    Exponential,
    /// Correlation of `n` standard bivariate normal pairs.
    #[serde(alias = "bvn")]
    BvnRho,
    /// Gamma hyperbola parameter η.
    Hyperbola,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    #[serde(alias = "expansion1")]
    FdExpansion,
    MleExpansion,
    #[serde(alias = "approx", alias = "expansion0")]
    NormalApprox,
    Pstar,
    #[serde(alias = "r")]
    PearsonR,
    PearsonRExact,
    #[serde(alias = "rstab")]
    FisherZ,
    Jeffreys,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Exact,
        Method::FdExpansion,
        Method::MleExpansion,
        Method::NormalApprox,
        Method::Pstar,
        Method::PearsonR,
        Method::PearsonRExact,
        Method::FisherZ,
        Method::Jeffreys,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::FdExpansion => "fd-expansion",
            Method::MleExpansion => "mle-expansion",
            Method::NormalApprox => "normal-approx",
            Method::Pstar => "pstar",
            Method::PearsonR => "pearson-r",
            Method::PearsonRExact => "pearson-r-exact",
            Method::FisherZ => "fisher-z",
            Method::Jeffreys => "jeffreys",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

impl ModelId {
    pub fn supports(self, method: Method) -> bool {
        use Method::*;
        match self {
            ModelId::Exponential => matches!(method, Exact | FdExpansion | MleExpansion | NormalApprox | Pstar | Jeffreys),
            ModelId::BvnRho => matches!(method, FdExpansion | NormalApprox | Pstar | PearsonR | PearsonRExact | FisherZ | Jeffreys),
            ModelId::Hyperbola => matches!(method, Exact | FdExpansion | NormalApprox | Pstar | Jeffreys),
        }
    }

    pub fn domain(self) -> Bracket {
        match self {
            ModelId::Exponential => Bracket::positive(),
            ModelId::BvnRho => Bracket { lo: -1.0, hi: 1.0 },
            ModelId::Hyperbola => Bracket::real_line(),
        }
    }

    fn min_n(self) -> usize {
        match self {
            ModelId::Exponential | ModelId::Hyperbola => 2,
            ModelId::BvnRho => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub model: ModelId,
    pub methods: Vec<Method>,
    pub grid: Vec<f64>,
    pub n: usize,
    pub level: f64,
    pub replications: usize,
    pub master_seed: u64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::Experiment(format!(
                "replications must be at least {MIN_REPLICATIONS}, got {}",
                self.replications
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Experiment(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.n < self.model.min_n() {
            return Err(Error::Experiment(format!("{:?} needs n >= {}, got {}", self.model, self.model.min_n(), self.n)));
        }
        if self.methods.is_empty() || self.grid.is_empty() {
            return Err(Error::Experiment("plan needs at least one method and one grid point".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Experiment("duplicate method in plan".into()));
        }
        if let Some(m) = self.methods.iter().find(|m| !self.model.supports(**m)) {
            return Err(Error::Experiment(format!("method {m} is not available for model {:?}", self.model)));
        }
        let dom = self.model.domain();
        if let Some(t) = self.grid.iter().find(|&&t| !(t > dom.lo && t < dom.hi)) {
            return Err(Error::Experiment(format!("grid point {t} is outside the parameter domain")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub theta: f64,
    pub method: Method,
    pub coverage: f64,
    pub coverage_se: f64,
    pub mean_length: f64,
    pub length_se: f64,
}

/// Replications excluded from a row because the interval could not be built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCount {
    pub theta: f64,
    pub method: Method,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub failures: Vec<FailureCount>,
}

impl CoverageReport {
    pub fn row(&self, theta: f64, method: Method) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.theta == theta && r.method == method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses `FIDKIT_THREADS` or every core.
    pub workers: Option<usize>,
}

/// Worker count from `FIDKIT_THREADS`, if set to a positive integer.
pub fn env_workers() -> Option<usize> {
    std::env::var("FIDKIT_THREADS").ok()?.trim().parse().ok().filter(|&w| w > 0)
}

/// Sufficient statistics of one data set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelData {
    Exponential { n: usize, mean: f64 },
    Bvn(BvnRhoData),
    Hyperbola(HyperbolaData),
}

impl ModelData {
    pub fn model(&self) -> ModelId {
        match self {
            ModelData::Exponential { .. } => ModelId::Exponential,
            ModelData::Bvn(_) => ModelId::BvnRho,
            ModelData::Hyperbola(_) => ModelId::Hyperbola,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ModelData::Exponential { n, .. } => *n,
            ModelData::Bvn(d) => d.n,
            ModelData::Hyperbola(d) => d.n,
        }
    }
}

/// Draw one data set of size `n` at `theta`.
pub fn simulate(model: ModelId, theta: f64, n: usize, rng: &mut Stream) -> Result<ModelData> {
    let nf = n as f64;
    match model {
        ModelId::Exponential => {
            let g = Gamma::new(nf, theta / nf).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            Ok(ModelData::Exponential { n, mean: g.sample(rng) })
        }
        ModelId::BvnRho => {
            let c = (1.0 - theta * theta).sqrt();
            let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..n {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                x.push(z1);
                y.push(theta * z1 + c * z2);
            }
            Ok(ModelData::Bvn(BvnRhoData::from_sample(&x, &y)?))
        }
        ModelId::Hyperbola => {
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let a: f64 = <Exp1 as Distribution<f64>>::sample(&Exp1, rng);
                let b: f64 = <Exp1 as Distribution<f64>>::sample(&Exp1, rng);
                s1 += theta.exp() * a;
                s2 += (-theta).exp() * b;
            }
            Ok(ModelData::Hyperbola(HyperbolaData::new(n, s1, s2)?))
        }
    }
}

/// Standardized expansions shared by every data set of one size.
struct Shared {
    fd_exp: Option<Arc<Expansion>>,
    mle_exp: Option<Arc<Expansion>>,
}

impl Shared {
    fn new(model: ModelId, n: usize, methods: &[Method]) -> Result<Self> {
        let mut shared = Shared { fd_exp: None, mle_exp: None };
        if model == ModelId::Exponential {
            // b^{3/2} ℓ''' = 4 at every μ̂, so one correction serves all samples.
            if methods.contains(&Method::FdExpansion) {
                shared.fd_exp = Some(Arc::new(ExpansionSpec::fd(1.0, n, 1.0, 4.0)?.expansion()?));
            }
            if methods.contains(&Method::MleExpansion) {
                shared.mle_exp = Some(Arc::new(Expansion::new(mle_polynomial("exponential")?, n as f64)?));
            }
        }
        Ok(shared)
    }
}

fn missing(method: Method) -> Error {
    Error::Experiment(format!("{method} expansion was not prepared"))
}

fn exponential_fd(method: Method, n: usize, mean: f64, shared: &Shared) -> Result<FidDistribution> {
    let b = mean * mean;
    let nf = n as f64;
    match method {
        Method::Exact => fd_from_family(&GammaMean::exponential_sample_mean(n)?, mean),
        Method::FdExpansion => fd_expansion_with(
            &ExpansionSpec::fd(mean, n, b, 4.0 / (mean * b))?,
            shared.fd_exp.clone().ok_or_else(|| missing(method))?,
        ),
        Method::MleExpansion => MleExpansion::with_expansion(mean, n, b, shared.mle_exp.clone().ok_or_else(|| missing(method))?).fd(),
        Method::NormalApprox => FidDistribution::normal(mean, mean / nf.sqrt(), Source::AsymptoticNormal),
        Method::Pstar => pstar_fd_for(ExponentialMeanPStar::new(n, mean)?),
        Method::Jeffreys => jeffreys_posterior(
            move |m: f64| -nf * (mean / m + m.ln()),
            |m: f64| -m.ln(),
            Bracket::positive(),
            mean,
            mean / nf.sqrt(),
        ),
        _ => Err(Error::Experiment(format!("{method} does not apply to the exponential model"))),
    }
}

fn bvn_fd(method: Method, data: &BvnRhoData) -> Result<FidDistribution> {
    match method {
        Method::Pstar => bvn_pstar_fd(data),
        Method::PearsonR => pearson_normal_fd(data.r, data.n),
        Method::PearsonRExact => pearson_exact_fd(data.r, data.n),
        Method::FisherZ => fisher_z_fd(data.r, data.n),
        Method::Jeffreys => bvn_jeffreys_fd(data),
        Method::FdExpansion => bvn_expansion_fd(data, true),
        Method::NormalApprox => bvn_expansion_fd(data, false),
        _ => Err(Error::Experiment(format!("{method} does not apply to the correlation model"))),
    }
}

fn hyperbola_fd(method: Method, data: &HyperbolaData) -> Result<FidDistribution> {
    match method {
        Method::Exact => hyperbola_exact_fd(data),
        Method::Pstar => pstar_fd_for(HyperbolaPStar::new(data)),
        // ℓ''' vanishes for this model, so the expansion is the normal limit.
        Method::FdExpansion | Method::NormalApprox => {
            FidDistribution::normal(data.eta_hat(), (data.b() / data.n as f64).sqrt(), Source::AsymptoticNormal)
        }
        Method::Jeffreys => {
            let (s1, s2) = (data.s1, data.s2);
            // Constant information: the Jeffreys prior is flat in η.
            jeffreys_posterior(
                move |e: f64| -((-e).exp() * s1 + e.exp() * s2),
                |_| 0.0,
                Bracket::real_line(),
                data.eta_hat(),
                (data.b() / data.n as f64).sqrt(),
            )
        }
        _ => Err(Error::Experiment(format!("{method} does not apply to the hyperbola model"))),
    }
}

fn fd_with(method: Method, data: &ModelData, shared: &Shared) -> Result<FidDistribution> {
    match data {
        ModelData::Exponential { n, mean } => exponential_fd(method, *n, *mean, shared),
        ModelData::Bvn(d) => bvn_fd(method, d),
        ModelData::Hyperbola(d) => hyperbola_fd(method, d),
    }
}

/// Fiducial distribution of `method` for the observed `data`.
pub fn method_fd(method: Method, data: &ModelData) -> Result<FidDistribution> {
    if !data.model().supports(method) {
        return Err(Error::Experiment(format!("method {method} is not available for model {:?}", data.model())));
    }
    fd_with(method, data, &Shared::new(data.model(), data.n(), &[method])?)
}

fn interval_for(method: Method, data: &ModelData, level: f64, shared: &Shared) -> Result<IntervalReport> {
    let iv = match (method, data) {
        // Quantiles of the standardized MLE law give the interval directly.
        (Method::MleExpansion, ModelData::Exponential { n, mean }) => {
            MleExpansion::with_expansion(*mean, *n, mean * mean, shared.mle_exp.clone().ok_or_else(|| missing(method))?).interval(level)?
        }
        _ => fd_with(method, data, shared)?.interval(level)?,
    };
    if !(iv.length > 0.0 && iv.length.is_finite() && iv.lower.is_finite() && iv.upper.is_finite()) {
        return Err(Error::NonFinite("interval endpoints"));
    }
    Ok(iv)
}

/// Per-method outcome of one replication: `(hit, length)`, or `None` on failure.
type Outcome = Vec<Option<(bool, f64)>>;

fn replicate(plan: &ExperimentPlan, shared: &Shared, grid_index: usize, rep: usize) -> Outcome {
    let theta = plan.grid[grid_index];
    let mut rng = derive_stream(plan.master_seed, grid_index as u64, rep as u64);
    let data = match simulate(plan.model, theta, plan.n, &mut rng) {
        Ok(d) => d,
        Err(_) => return vec![None; plan.methods.len()],
    };
    plan.methods
        .iter()
        .map(|&m| {
            interval_for(m, &data, plan.level, shared)
                .ok()
                .map(|iv| (iv.lower <= theta && theta <= iv.upper, iv.length))
        })
        .collect()
}

fn aggregate(theta: f64, method: Method, outcomes: impl Iterator<Item = Option<(bool, f64)>>, total: usize) -> Result<(CoverageRow, usize)> {
    let (mut valid, mut hits, mut sum, mut sumsq) = (0usize, 0usize, 0.0, 0.0);
    for o in outcomes.flatten() {
        valid += 1;
        hits += o.0 as usize;
        sum += o.1;
        sumsq += o.1 * o.1;
    }
    let failures = total - valid;
    if failures as f64 >= MAX_FAILURE_RATE * total as f64 && failures > 0 {
        return Err(Error::Experiment(format!(
            "{method} failed in {failures} of {total} replications at theta = {theta}"
        )));
    }
    let m = valid as f64;
    let coverage = hits as f64 / m;
    let mean_length = sum / m;
    let var = if valid > 1 { ((sumsq - m * mean_length * mean_length) / (m - 1.0)).max(0.0) } else { 0.0 };
    Ok((
        CoverageRow {
            theta,
            method,
            coverage,
            coverage_se: (coverage * (1.0 - coverage) / m).sqrt(),
            mean_length,
            length_se: (var / m).sqrt(),
        },
        failures,
    ))
}

/// Run `plan`. Rows are ordered by grid point, then by the plan's method order.
pub fn run_experiment(plan: &ExperimentPlan, options: RunOptions) -> Result<CoverageReport> {
    plan.validate()?;
    let shared = Shared::new(plan.model, plan.n, &plan.methods)?;
    let workers = options.workers.or_else(env_workers);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Experiment(format!("thread pool: {e}")))?;
    let mut report = CoverageReport::default();
    for (gi, &theta) in plan.grid.iter().enumerate() {
        // Results come back in replication order whatever the schedule.
        let outcomes: Vec<Outcome> = pool.install(|| {
            (0..plan.replications)
                .into_par_iter()
                .map(|rep| replicate(plan, &shared, gi, rep))
                .collect()
        });
        for (mi, &method) in plan.methods.iter().enumerate() {
            let (row, failures) = aggregate(theta, method, outcomes.iter().map(|o| o[mi]), plan.replications)?;
            report.rows.push(row);
            if failures > 0 {
                report.failures.push(FailureCount { theta, method, failures });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(methods: Vec<Method>, reps: usize) -> ExperimentPlan {
        ExperimentPlan {
            model: ModelId::Exponential,
            methods,
            grid: vec![0.5, 2.0],
            n: 15,
            level: 0.9,
            replications: reps,
            master_seed: 7,
        }
    }

    #[test]
    fn validation() {
        let mut p = plan(vec![Method::Exact], 50);
        assert!(p.validate().is_err());
        p.replications = 100;
        assert!(p.validate().is_ok());
        p.methods = vec![Method::FisherZ];
        assert!(matches!(run_experiment(&p, RunOptions::default()), Err(Error::Experiment(_))));
        p.methods = vec![Method::Exact, Method::Exact];
        assert!(p.validate().is_err());
        p.methods = vec![Method::Exact];
        p.grid = vec![-1.0];
        assert!(p.validate().is_err());
        p.grid = vec![1.0];
        p.level = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn method_names_and_aliases() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(m.to_string(), m.name());
        }
        assert_eq!("r".parse::<Method>().unwrap(), Method::PearsonR);
        assert_eq!("rstab".parse::<Method>().unwrap(), Method::FisherZ);
        assert_eq!("expansion1".parse::<Method>().unwrap(), Method::FdExpansion);
        assert_eq!("approx".parse::<Method>().unwrap(), Method::NormalApprox);
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn exact_method_is_exact_and_scale_free() {
        let r = run_experiment(&plan(vec![Method::Exact, Method::NormalApprox], 4000), RunOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 4);
        for row in r.rows.iter().filter(|r| r.method == Method::Exact) {
            assert!((row.coverage - 0.9).abs() <= 3.0 * row.coverage_se, "{row:?}");
        }
        // Same streams at both grid points make the coverages identical.
        let (a, b) = (r.row(0.5, Method::Exact).unwrap(), r.row(2.0, Method::Exact).unwrap());
        assert!((a.coverage - b.coverage).abs() <= 3.0 * a.coverage_se.max(b.coverage_se));
        assert!((b.mean_length / a.mean_length - 4.0).abs() < 0.2);
        assert!(r.failures.is_empty());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = plan(vec![Method::Exact, Method::FdExpansion, Method::MleExpansion], 300);
        let a = run_experiment(&p, RunOptions { workers: Some(1) }).unwrap();
        let b = run_experiment(&p, RunOptions { workers: Some(3) }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hyperbola_exact_coverage() {
        let p = ExperimentPlan {
            model: ModelId::Hyperbola,
            methods: vec![Method::Exact, Method::Jeffreys],
            grid: vec![0.0, 1.5],
            n: 5,
            level: 0.9,
            replications: 1000,
            master_seed: 3,
        };
        let r = run_experiment(&p, RunOptions::default()).unwrap();
        for row in &r.rows {
            assert!((row.coverage - 0.9).abs() <= 3.0 * row.coverage_se, "{row:?}");
        }
    }

    #[test]
    fn failure_threshold() {
        let ok = aggregate(1.0, Method::Exact, (0..2000).map(|i| if i == 0 { None } else { Some((true, 1.0)) }), 2000).unwrap();
        assert_eq!(ok.1, 1);
        assert_eq!(ok.0.coverage, 1.0);
        assert!(aggregate(1.0, Method::Exact, (0..2000).map(|i| if i < 2 { None } else { Some((true, 1.0)) }), 2000).is_err());
    }
}
