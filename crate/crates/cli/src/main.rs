mod commands;
mod config;

use anyhow::{anyhow, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use commands::{Body, Product};
use config::{CommandKind, RunConfig};
use fidkit::sim::ReportFormat;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Fiducial and confidence distributions from the command line.
#[derive(Parser)]
#[command(name = "fidkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Median and equal-tail interval of each requested FD
    Fd(CmdArgs),
    /// CDF, density and confidence curve on a grid, one file per method
    Curve(CmdArgs),
    /// Second-order expansion coefficients and their validity range
    Expand(CmdArgs),
    /// p* fiducial distribution and its normalizer
    Pstar(CmdArgs),
    /// Asymptotic multinomial FD with its Schur decomposition
    Mvn(CmdArgs),
    /// Monte Carlo coverage study
    Coverage(CmdArgs),
}

#[derive(Args)]
struct CmdArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<ReportFormat>,
    /// Check the config and exit without computing anything
    #[arg(long)]
    validate: bool,
}

impl Cmd {
    fn split(&self) -> (CommandKind, &CmdArgs) {
        match self {
            Cmd::Fd(a) => (CommandKind::Fd, a),
            Cmd::Curve(a) => (CommandKind::Curve, a),
            Cmd::Expand(a) => (CommandKind::Expand, a),
            Cmd::Pstar(a) => (CommandKind::Pstar, a),
            Cmd::Mvn(a) => (CommandKind::Mvn, a),
            Cmd::Coverage(a) => (CommandKind::Coverage, a),
        }
    }
}

/// Usage and config problems exit with 2, computation failures with 1.
enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli) -> std::result::Result<(), Failure> {
    let (kind, args) = cli.command.split();
    let (raw, cfg) = config::load(&args.config).map_err(Failure::Usage)?;
    cfg.validate(kind).map_err(Failure::Usage)?;
    let format = commands::resolve_format(kind, args.format.or(cfg.format)).map_err(Failure::Usage)?;
    if args.validate {
        println!("config ok: {} ({})", args.config.display(), kind.name());
        return Ok(());
    }
    let out = args.out.clone().or_else(|| cfg.out.clone());
    let product = commands::run(kind, &cfg, format).map_err(Failure::Run)?;
    let written = write_outputs(kind, &cfg, &raw, out.as_deref(), format, &product).map_err(Failure::Run)?;
    for path in &written {
        eprintln!("wrote {}", path.display());
    }
    if product.failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Run(anyhow!("internal checks failed: {}", product.failed.join("; "))))
    }
}

fn metadata(kind: CommandKind, cfg: &RunConfig, raw: &Value, product: &Product) -> Value {
    json!({
        "command": kind.name(),
        "config": raw,
        "seed": cfg.seed,
        "version": fidkit::sim::version_string(),
        "residuals": product.residuals,
        "checks_passed": product.failed.is_empty(),
    })
}

fn output_path(out: &Path, suffix: Option<&str>, format: ReportFormat) -> PathBuf {
    let Some(suffix) = suffix else {
        return out.to_path_buf();
    };
    let ext = out.extension().and_then(|e| e.to_str()).unwrap_or(match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    });
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    out.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn render(body: &Body, meta: &Value) -> Result<String> {
    Ok(match body {
        Body::Csv(s) => s.clone(),
        Body::Json(v) => {
            let mut v = v.clone();
            if let Value::Object(map) = &mut v {
                match map.get_mut("metadata") {
                    Some(Value::Object(existing)) => {
                        for (k, val) in meta.as_object().into_iter().flatten() {
                            existing.insert(k.clone(), val.clone());
                        }
                    }
                    _ => {
                        map.insert("metadata".into(), meta.clone());
                    }
                }
            }
            serde_json::to_string_pretty(&v)? + "\n"
        }
    })
}

fn write_outputs(
    kind: CommandKind,
    cfg: &RunConfig,
    raw: &Value,
    out: Option<&Path>,
    format: ReportFormat,
    product: &Product,
) -> Result<Vec<PathBuf>> {
    let meta = metadata(kind, cfg, raw, product);
    let Some(out) = out else {
        ensure!(product.artifacts.len() == 1, "{} writes several files; pass --out", kind.name());
        print!("{}", render(&product.artifacts[0].body, &meta)?);
        eprintln!("{}", serde_json::to_string(&meta)?);
        return Ok(Vec::new());
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut written = Vec::new();
    for a in &product.artifacts {
        let path = output_path(out, a.suffix.as_deref(), format);
        std::fs::write(&path, render(&a.body, &meta)?).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    let mut sidecar = meta;
    sidecar["outputs"] = json!(written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>());
    let meta_path = PathBuf::from(format!("{}.meta.json", out.display()));
    std::fs::write(&meta_path, serde_json::to_string_pretty(&sidecar)? + "\n")
        .with_context(|| format!("writing {}", meta_path.display()))?;
    written.push(meta_path);
    Ok(written)
}
