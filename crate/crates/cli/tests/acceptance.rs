// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Runs without the libtest harness so the lines come out in order and unbuffered.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fidkit::expansions::{curvature, LogLikProfile};
use fidkit::fiducial::{pivotal_uniformity_check, sup_cdf_distance, FidDistribution, GammaMean};
use fidkit::nef::{asymptotic_fd, build_schur, multinomial_phi_fd, schur_moments, triangular_transform, Multinomial};
use fidkit::numerics::{norm_cdf, Bracket};
use fidkit::pstar::HyperbolaData;
use fidkit::rng::derive_stream;
use fidkit::sim::{method_fd, parse_csv, run_experiment, CoverageRow, ExperimentPlan, Method, ModelData, ModelId, RunOptions};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn(&mut Ctx) -> Outcome;

/// Shared scratch space and cached binary runs.
struct Ctx {
    dir: PathBuf,
    correlation_coverage: Option<(PathBuf, Duration)>,
}

fn examples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn run_coverage_config(config: &Path, out: &Path, threads: Option<&str>) -> Result<Duration, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fidkit"));
    cmd.arg("coverage").arg("--config").arg(config).arg("--out").arg(out);
    cmd.env_remove("FIDKIT_THREADS");
    if let Some(t) = threads {
        cmd.env("FIDKIT_THREADS", t);
    }
    let start = Instant::now();
    let res = cmd.output().map_err(|e| format!("spawn failed: {e}"))?;
    let took = start.elapsed();
    if !res.status.success() {
        return Err(format!("{} exited with {}: {}", config.display(), res.status, String::from_utf8_lossy(&res.stderr)));
    }
    Ok(took)
}

fn exponential_coverage_plan() -> ExperimentPlan {
    ExperimentPlan {
        model: ModelId::Exponential,
        methods: vec![Method::Exact, Method::FdExpansion, Method::MleExpansion, Method::NormalApprox],
        grid: vec![0.5, 1.0, 2.0],
        n: 15,
        level: 0.90,
        replications: 20_000,
        master_seed: 20170301,
    }
}

fn c1_c2(which: u8) -> Outcome {
    let start = Instant::now();
    let report = match run_experiment(&exponential_coverage_plan(), RunOptions { workers: Some(1) }) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let took = start.elapsed();
    let cov = |theta: f64, m: Method| report.row(theta, m).map(|r| r.coverage).unwrap_or(f64::NAN);
    let mut pass = true;
    let mut parts = Vec::new();
    for &theta in &[0.5, 1.0, 2.0] {
        if which == 1 {
            let c = cov(theta, Method::Exact);
            pass &= (c - 0.90).abs() <= 0.010;
            parts.push(format!("mu={theta}: {c:.4}"));
        } else {
            let (f, m) = (cov(theta, Method::FdExpansion), cov(theta, Method::MleExpansion));
            let (df, dm) = ((f - 0.90).abs(), (m - 0.90).abs());
            pass &= df < dm && df <= 0.06 && dm <= 0.06;
            parts.push(format!("mu={theta}: fd {f:.4} mle {m:.4}"));
        }
    }
    if which == 1 {
        pass &= took <= Duration::from_secs(120);
        parts.push(format!("single-threaded {:.1}s", took.as_secs_f64()));
    }
    outcome(pass, parts.join(", "))
}

fn c1(_: &mut Ctx) -> Outcome {
    c1_c2(1)
}

fn c2(_: &mut Ctx) -> Outcome {
    c1_c2(2)
}

fn c3(_: &mut Ctx) -> Outcome {
    let mut worst: f64 = 0.0;
    for &mu_hat in &[0.5, 1.0, 1.7, 4.0] {
        let profile = match LogLikProfile::new(move |mu: f64| -(mu_hat / mu + mu.ln()), mu_hat, mu_hat) {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("profile: {e}")),
        };
        let c = match curvature(&profile) {
            Ok(c) => c,
            Err(e) => return outcome(false, format!("curvature: {e}")),
        };
        worst = worst.max((c.b.powf(1.5) * c.ell3 - 4.0).abs());
    }
    outcome(worst <= 1e-3, format!("max |b^1.5 l''' - 4| = {worst:.2e}"))
}

fn hyperbola_distance(data: &HyperbolaData) -> Result<f64, String> {
    let exact = method_fd(Method::Exact, &ModelData::Hyperbola(*data)).map_err(|e| e.to_string())?;
    let (m, sd) = (data.eta_hat(), (data.b() / data.n as f64).sqrt());
    let range = Bracket { lo: m - 8.0 * sd, hi: m + 8.0 * sd };
    Ok(sup_cdf_distance(&|t| exact.cdf(t), &|t| norm_cdf((t - m) / sd), range, 4001))
}

fn c4(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let data = match HyperbolaData::new(5, 17.321, 0.116) {
        Ok(d) => d,
        Err(e) => return outcome(false, e.to_string()),
    };
    let eta_hat = data.eta_hat();
    let ell3 = LogLikProfile::new(move |e| data.log_lik_unit(e), eta_hat, data.b().sqrt())
        .and_then(|p| curvature(&p))
        .map(|c| c.ell3);
    let ell3 = match ell3 {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("curvature: {e}")),
    };
    let mut dists = Vec::new();
    for &n in &[5usize, 20, 80] {
        match HyperbolaData::from_ancillary(n, data.a(), eta_hat).map_err(|e| e.to_string()).and_then(|d| hyperbola_distance(&d)) {
            Ok(d) => dists.push(d),
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        }
    }
    let pass = ell3.abs() <= 1e-6 && dists[0] <= 0.03 && dists[1] < dists[0] && dists[2] < dists[1];
    outcome(
        pass,
        format!(
            "l'''={ell3:.1e}, d(5,20,80) = {:.4}, {:.4}, {:.4} ({:.2}s)",
            dists[0],
            dists[1],
            dists[2],
            start.elapsed().as_secs_f64()
        ),
    )
}

fn exp_fd(method: Method, n: usize, mean: f64) -> Result<FidDistribution, String> {
    method_fd(method, &ModelData::Exponential { n, mean }).map_err(|e| e.to_string())
}

fn c5(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for &(n, mean) in &[(15usize, 1.3), (5, 0.7), (40, 2.0)] {
        let pair = exp_fd(Method::Exact, n, mean).and_then(|e| exp_fd(Method::Pstar, n, mean).map(|p| (e, p)));
        let (exact, pstar) = match pair {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        };
        let range = match (exact.quantile(1e-7), exact.quantile(1.0 - 1e-7)) {
            (Ok(lo), Ok(hi)) => Bracket { lo, hi },
            _ => return outcome(false, "exact quantiles failed".into()),
        };
        worst = worst.max(sup_cdf_distance(&|t| exact.cdf(t), &|t| pstar.cdf(t), range, 2001));
    }
    outcome(worst <= 1e-3, format!("sup distance {worst:.2e} ({:.2}s)", start.elapsed().as_secs_f64()))
}

fn correlation_coverage_rows(ctx: &mut Ctx) -> Result<(Vec<CoverageRow>, Duration), String> {
    if ctx.correlation_coverage.is_none() {
        let out = ctx.dir.join("correlation_coverage_a.csv");
        let took = run_coverage_config(&examples_dir().join("correlation_coverage.json"), &out, None)?;
        ctx.correlation_coverage = Some((out, took));
    }
    let (path, took) = ctx.correlation_coverage.clone().unwrap();
    let rows = parse_csv(&path).map_err(|e| e.to_string())?;
    Ok((rows, took))
}

fn c6(ctx: &mut Ctx) -> Outcome {
    let (rows, took) = match correlation_coverage_rows(ctx) {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let grid = [0.0, 0.3, 0.6, 0.9];
    let get = |rho: f64, m: Method| rows.iter().find(|r| r.theta == rho && r.method == m);
    let dev = |rho: f64, m: Method| get(rho, m).map(|r| (r.coverage - 0.95).abs()).unwrap_or(f64::NAN);
    let methods: Vec<Method> = {
        let mut v: Vec<Method> = rows.iter().map(|r| r.method).collect();
        v.dedup();
        v.sort_by_key(|m| m.name());
        v.dedup();
        v
    };
    if grid.iter().any(|&g| methods.iter().any(|&m| get(g, m).is_none())) {
        return outcome(false, "missing rows in correlation_coverage output".into());
    }

    let fz_cov: Vec<f64> = grid.iter().map(|&g| get(g, Method::FisherZ).unwrap().coverage).collect();
    let a = fz_cov.iter().all(|&c| c >= 0.95);

    let longest: Vec<Method> = grid
        .iter()
        .map(|&g| {
            *methods
                .iter()
                .max_by(|&&x, &&y| get(g, x).unwrap().mean_length.total_cmp(&get(g, y).unwrap().mean_length))
                .unwrap()
        })
        .collect();
    let b = longest.iter().all(|&m| m == Method::FisherZ);

    let mean_dev = |m: Method| grid.iter().map(|&g| dev(g, m)).sum::<f64>() / grid.len() as f64;
    let trio = [Method::PearsonR, Method::FisherZ, Method::Pstar];
    let trio_dev: Vec<f64> = trio.iter().map(|&m| mean_dev(m)).collect();
    let c = trio_dev[2] < trio_dev[0] && trio_dev[2] < trio_dev[1];

    let worst_dev: Vec<Method> = grid[1..]
        .iter()
        .map(|&g| *methods.iter().max_by(|&&x, &&y| dev(g, x).total_cmp(&dev(g, y))).unwrap())
        .collect();
    let d = worst_dev.iter().all(|&m| m == Method::PearsonR);

    let e = took <= Duration::from_secs(15 * 60);
    let fmt_cov = fz_cov.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>().join("/");
    let fmt_m = |v: &[Method]| v.iter().map(|m| m.name()).collect::<Vec<_>>().join("/");
    outcome(
        a && b && c && d && e,
        format!(
            "[{}] fisher-z cov >= .95: {fmt_cov}; [{}] longest: {}; [{}] mean |dev| pearson-r {:.4} fisher-z {:.4} pstar {:.4}; \
             [{}] largest |dev| at rho>=.3: {}; [{}] {:.1}s",
            ok(a),
            ok(b),
            fmt_m(&longest),
            ok(c),
            trio_dev[0],
            trio_dev[1],
            trio_dev[2],
            ok(d),
            fmt_m(&worst_dev),
            ok(e),
            took.as_secs_f64()
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "no"
    }
}

fn c7(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let (mut off_max, mut back_max, mut q_max): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for d in 2..=6usize {
        for case in 0..100u64 {
            let mut rng = derive_stream(7, d as u64, case);
            let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let v = g.transpose() * &g + DMatrix::identity(d, d) * 0.1;
            let s = match build_schur(&v) {
                Ok(s) => s,
                Err(e) => return outcome(false, format!("d={d} case {case}: {e}")),
            };
            let q = s.q_matrix();
            let avat = &s.a * &v * s.a.transpose();
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        off_max = off_max.max(avat[(i, j)].abs());
                    }
                }
            }
            let a_inv = match s.a.clone().try_inverse() {
                Some(m) => m,
                None => return outcome(false, "A is singular".into()),
            };
            back_max = back_max.max((&a_inv * &q * a_inv.transpose() - &v).amax());
            let zero = DVector::zeros(d);
            for k in 1..=d {
                match schur_moments(&v, &zero, &zero, k) {
                    Ok((_, qk)) => q_max = q_max.max((qk - q[(k - 1, k - 1)]).abs()),
                    Err(e) => return outcome(false, format!("schur_moments: {e}")),
                }
            }
        }
    }
    let took = start.elapsed();
    let pass = off_max <= 1e-10 && back_max <= 1e-10 && q_max <= 1e-12 && took < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "off-diag {off_max:.1e}, reconstruction {back_max:.1e}, q_k {q_max:.1e}, {:.3}s",
            took.as_secs_f64()
        ),
    )
}

fn c8(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let (x1, x2) = (0.3_f64, 0.5_f64);
    let n = 100usize;
    let nf = n as f64;
    let spec = match Multinomial::new(2) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let out = asymptotic_fd(&spec, &DVector::from_vec(vec![x1, x2]), n).and_then(|fd| {
        triangular_transform(
            &fd,
            |m| DVector::from_vec(vec![m[0] / m[1], m[1]]),
            |m| DMatrix::from_row_slice(2, 2, &[1.0 / m[1], -m[0] / (m[1] * m[1]), 0.0, 1.0]),
        )
    });
    let out = match out {
        Ok(o) => o,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mean_err = (out.mean[0] - x1 / x2).abs().max((out.mean[1] - x2).abs());
    let var_err = (out.covariance[(0, 0)] - x1 * (x1 + x2) / (nf * x2.powi(3))).abs();

    let mut dists = Vec::new();
    for &n in &[50u64, 200, 800] {
        let nf = n as f64;
        let (s1, s2) = ((x1 * nf).round() as u64, (x2 * nf).round() as u64);
        let fd = match multinomial_phi_fd(s1, s2, n) {
            Ok(f) => f,
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        };
        let (m, sd) = (x1 / x2, (x1 * (x1 + x2) / (nf * x2.powi(3))).sqrt());
        let range = Bracket { lo: (m - 8.0 * sd).max(1e-9), hi: m + 8.0 * sd };
        dists.push(sup_cdf_distance(&|t| fd.phi1.cdf(t), &|t| norm_cdf((t - m) / sd), range, 2001));
    }
    let took = start.elapsed();
    let pass = mean_err <= 1e-10
        && var_err <= 1e-10
        && dists[1] < dists[0]
        && dists[2] < dists[1]
        && took <= Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "mean err {mean_err:.1e}, var(phi1) err {var_err:.1e}, d(50,200,800) = {:.4}, {:.4}, {:.4} ({:.2}s)",
            dists[0],
            dists[1],
            dists[2],
            took.as_secs_f64()
        ),
    )
}

fn c9(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let mean = 1.0;
    let mut dists = Vec::new();
    for &n in &[10usize, 40, 160] {
        let pair = exp_fd(Method::FdExpansion, n, mean).and_then(|e| exp_fd(Method::Jeffreys, n, mean).map(|j| (e, j)));
        let (expansion, jeffreys) = match pair {
            Ok(p) => p,
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        };
        let sd = mean / (n as f64).sqrt();
        let range = Bracket { lo: (mean - 8.0 * sd).max(1e-3), hi: mean + 12.0 * sd };
        dists.push(sup_cdf_distance(&|t| expansion.cdf(t), &|t| jeffreys.cdf(t), range, 4001));
    }
    let r1 = dists[1] / dists[0];
    let r2 = dists[2] / dists[1];
    let within = |r: f64| (1.0 / 6.0..=1.0 / 2.5).contains(&r);
    outcome(
        within(r1) && within(r2),
        format!(
            "d(10,40,160) = {:.2e}, {:.2e}, {:.2e}; ratios {r1:.3}, {r2:.3} ({:.2}s)",
            dists[0],
            dists[1],
            dists[2],
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c10(_: &mut Ctx) -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    let mut seed = 20170310u64;
    for &n in &[5usize, 15] {
        for &theta in &[0.5, 1.0, 2.0] {
            seed += 1;
            let res = GammaMean::exponential_sample_mean(n).and_then(|f| pivotal_uniformity_check(&f, theta, 5000, seed, None));
            match res {
                Ok(r) => {
                    pass &= r.p_value > 0.01;
                    parts.push(format!("({theta},{n}) p={:.3}", r.p_value));
                }
                Err(e) => return outcome(false, format!("({theta},{n}): {e}")),
            }
        }
    }
    parts.push(format!("{:.2}s", start.elapsed().as_secs_f64()));
    outcome(pass, parts.join(", "))
}

fn c11(ctx: &mut Ctx) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["exponential_coverage", "correlation_coverage"] {
        let config = examples_dir().join(format!("{name}.json"));
        let runs: Result<Vec<Vec<u8>>, String> = (|| {
            let first = if name == "correlation_coverage" {
                correlation_coverage_rows(ctx)?;
                ctx.correlation_coverage.as_ref().unwrap().0.clone()
            } else {
                let p = ctx.dir.join(format!("{name}_a.csv"));
                run_coverage_config(&config, &p, None)?;
                p
            };
            let second = ctx.dir.join(format!("{name}_b.csv"));
            run_coverage_config(&config, &second, None)?;
            let third = ctx.dir.join(format!("{name}_c.csv"));
            run_coverage_config(&config, &third, Some("3"))?;
            [first, second, third]
                .iter()
                .map(|p| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display())))
                .collect()
        })();
        match runs {
            Ok(bytes) => {
                let same = bytes[0] == bytes[1] && bytes[0] == bytes[2] && !bytes[0].is_empty();
                pass &= same;
                parts.push(format!("{name}: {}", if same { "identical" } else { "differs" }));
            }
            Err(e) => return outcome(false, e),
        }
    }
    outcome(pass, parts.join(", "))
}

fn main() {
    let dir = std::env::temp_dir().join(format!("fidkit-acceptance-{}", std::process::id()));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("cannot create {}: {e}", dir.display());
        std::process::exit(1);
    }
    let mut ctx = Ctx { dir: dir.clone(), correlation_coverage: None };
    let checks: [(&str, Check); 11] = [
        ("exact coverage, exponential n=15", c1),
        ("fd-expansion beats mle-expansion", c2),
        ("exponential curvature coefficient", c3),
        ("gamma hyperbola normal approximation", c4),
        ("p* exactness, exponential mean", c5),
        ("bvn rho ordering", c6),
        ("schur decomposition algebra", c7),
        ("delta method for (p1/p2, p2)", c8),
        ("expansion vs jeffreys rate", c9),
        ("pivotal uniformity", c10),
        ("determinism of bundled configs", c11),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check(&mut ctx);
        failed += !o.pass as usize;
        println!("{} criterion {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    let _ = std::fs::remove_dir_all(&dir);
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
