use anyhow::{bail, ensure, Context, Result};
use fidkit::sim::{Method, ModelId, ReportFormat};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Fd,
    Curve,
    Expand,
    Pstar,
    Mvn,
    Coverage,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Fd => "fd",
            CommandKind::Curve => "curve",
            CommandKind::Expand => "expand",
            CommandKind::Pstar => "pstar",
            CommandKind::Mvn => "mvn",
            CommandKind::Coverage => "coverage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    Exponential,
    #[serde(alias = "bvn")]
    BvnRho,
    Hyperbola,
    Binomial,
    Multinomial,
}

impl ModelName {
    /// The simulation model behind this name, if there is one.
    pub fn sim_model(self) -> Option<ModelId> {
        match self {
            ModelName::Exponential => Some(ModelId::Exponential),
            ModelName::BvnRho => Some(ModelId::BvnRho),
            ModelName::Hyperbola => Some(ModelId::Hyperbola),
            ModelName::Binomial | ModelName::Multinomial => None,
        }
    }
}

/// Observed statistics; which fields are needed depends on the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stats {
    pub n: Option<usize>,
    pub mu_hat: Option<f64>,
    pub s: Option<u64>,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub r: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub counts: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    pub model: Option<ModelName>,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub stats: Stats,
    pub level: Option<f64>,
    pub grid: Option<GridSpec>,
    /// True parameter values of a coverage study.
    pub theta_grid: Option<Vec<f64>>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<ReportFormat>,
    /// `mvn`: also report the (p1/p2, p2) moments.
    #[serde(default)]
    pub phi: bool,
    pub note: Option<String>,
}

/// Raw JSON (echoed into metadata) and its parsed form.
pub fn load(path: &Path) -> Result<(serde_json::Value, RunConfig)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let raw: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let cfg: RunConfig = serde_json::from_value(raw.clone()).with_context(|| format!("invalid config {}", path.display()))?;
    Ok((raw, cfg))
}

fn need<T: Copy>(v: Option<T>, what: &str) -> Result<T> {
    v.with_context(|| format!("config is missing '{what}'"))
}

impl RunConfig {
    pub fn model(&self) -> Result<ModelName> {
        need(self.model, "model")
    }

    pub fn level(&self) -> Result<f64> {
        let level = need(self.level, "level")?;
        ensure!(level > 0.0 && level < 1.0, "level must lie in (0, 1), got {level}");
        Ok(level)
    }

    pub fn n(&self) -> Result<usize> {
        need(self.stats.n, "stats.n")
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = need(self.grid, "grid")?;
        ensure!(g.points >= 2, "grid needs at least 2 points, got {}", g.points);
        ensure!(g.lo < g.hi && g.lo.is_finite() && g.hi.is_finite(), "grid needs finite lo < hi");
        Ok(g)
    }

    /// Structural checks for `command`, without any computation.
    pub fn validate(&self, command: CommandKind) -> Result<()> {
        if let Some(c) = self.command {
            ensure!(c == command, "config is for '{}' but '{}' was invoked", c.name(), command.name());
        }
        match command {
            CommandKind::Fd | CommandKind::Curve => {
                let model = self.model()?;
                ensure!(!self.methods.is_empty(), "config lists no methods");
                self.check_methods(model)?;
                self.check_stats(model)?;
                if command == CommandKind::Fd {
                    self.level()?;
                } else {
                    self.grid()?;
                }
            }
            CommandKind::Expand | CommandKind::Pstar => {
                let model = self.model()?;
                ensure!(model.sim_model().is_some(), "{} supports exponential, hyperbola and bvn-rho", command.name());
                self.check_stats(model)?;
                if self.level.is_some() {
                    self.level()?;
                }
                if self.grid.is_some() {
                    self.grid()?;
                }
            }
            CommandKind::Mvn => {
                let counts = self.stats.counts.as_ref().context("config is missing 'stats.counts'")?;
                ensure!(!counts.is_empty(), "'stats.counts' is empty");
                self.n()?;
                ensure!(!self.phi || counts.len() == 2, "the phi transform needs exactly two counts");
            }
            CommandKind::Coverage => {
                let model = self.model()?.sim_model().context("coverage supports exponential, hyperbola and bvn-rho")?;
                ensure!(!self.methods.is_empty(), "config lists no methods");
                need(self.seed, "seed")?;
                need(self.replications, "replications")?;
                self.theta_grid.as_ref().context("config is missing 'theta_grid'")?;
                self.level()?;
                self.plan(model)?.validate()?;
            }
        }
        Ok(())
    }

    fn check_methods(&self, model: ModelName) -> Result<()> {
        for &m in &self.methods {
            let ok = match model.sim_model() {
                Some(id) => id.supports(m),
                None => model == ModelName::Binomial && m == Method::Exact,
            };
            ensure!(ok, "method {m} is not available for model {model:?}");
        }
        Ok(())
    }

    fn check_stats(&self, model: ModelName) -> Result<()> {
        let s = &self.stats;
        self.n()?;
        match model {
            ModelName::Exponential => {
                need(s.mu_hat, "stats.mu_hat")?;
            }
            ModelName::Hyperbola => {
                need(s.s1, "stats.s1")?;
                need(s.s2, "stats.s2")?;
            }
            ModelName::BvnRho => {
                if s.x.is_none() {
                    need(s.s1, "stats.s1")?;
                    need(s.s2, "stats.s2")?;
                    need(s.r, "stats.r")?;
                } else {
                    ensure!(s.y.is_some(), "config is missing 'stats.y'");
                }
            }
            ModelName::Binomial => {
                need(s.s, "stats.s")?;
            }
            ModelName::Multinomial => bail!("use the mvn command for multinomial counts"),
        }
        Ok(())
    }

    pub fn plan(&self, model: ModelId) -> Result<fidkit::sim::ExperimentPlan> {
        Ok(fidkit::sim::ExperimentPlan {
            model,
            methods: self.methods.clone(),
            grid: self.theta_grid.clone().context("config is missing 'theta_grid'")?,
            n: self.n()?,
            level: self.level()?,
            replications: need(self.replications, "replications")?,
            master_seed: need(self.seed, "seed")?,
        })
    }
}
