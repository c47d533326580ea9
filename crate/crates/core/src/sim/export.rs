use super::{CoverageReport, CoverageRow, ExperimentPlan, FailureCount};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

pub const CSV_HEADER: [&str; 6] = ["theta", "method", "coverage", "coverage_se", "mean_length", "length_se"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::InvalidArgument(format!("unknown format '{s}', expected csv or json"))),
        }
    }
}

/// `git describe` of the build, or `v<crate version>` outside a checkout.
pub fn version_string() -> &'static str {
    env!("FIDKIT_VERSION")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub plan: Option<ExperimentPlan>,
    pub seed: Option<u64>,
    pub version: String,
    pub failures: Vec<FailureCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub metadata: ReportMetadata,
    pub rows: Vec<CoverageRow>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn csv_string(report: &CoverageReport) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Io {
        path: "<memory>".into(),
        message: e.to_string(),
    };
    w.write_record(CSV_HEADER).map_err(fail)?;
    for row in &report.rows {
        w.serialize(row).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: "<memory>".into(),
        message: e.to_string(),
    })?;
    String::from_utf8(bytes).map_err(|e| Error::Io {
        path: "<memory>".into(),
        message: e.to_string(),
    })
}

/// Write `report` to `path`. JSON carries the plan, seed, version and
/// failure counts alongside the rows.
pub fn export_report(report: &CoverageReport, format: ReportFormat, path: &Path, plan: Option<&ExperimentPlan>) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => csv_string(report)?,
        ReportFormat::Json => {
            let doc = ReportJson {
                metadata: ReportMetadata {
                    plan: plan.cloned(),
                    seed: plan.map(|p| p.master_seed),
                    version: version_string().to_string(),
                    failures: report.failures.clone(),
                },
                rows: report.rows.clone(),
            };
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| io_err(path, e))?;
            s.push('\n');
            s
        }
    };
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn parse_csv(path: &Path) -> Result<Vec<CoverageRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(io_err(path, format!("unexpected header {header:?}")));
    }
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| io_err(path, e))
}

pub fn parse_json(path: &Path) -> Result<ReportJson> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}
