mod config;

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use quasiground::critical::{eps_sweep, test_function, InstantonParams, SweepReport};
use quasiground::functional::Problem;
use quasiground::grid::Grid;
use quasiground::solver::{initial_field, level_certificate, minimize_from, InitialGuess, SolveReport};
use quasiground::verify::{run_suite, Suite};
use quasiground::{Error, PropertyReport};
use serde::Serialize;

use crate::config::Loaded;

#[derive(Parser, Debug)]
#[command(name = "quasiground", version, about = "Ground states of quasilinear Schrödinger equations with critical growth")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize on the Nehari manifold and certify the level.
    Solve(Common),
    /// Run a property suite: g, growth, fibering, functional-equivalence or all.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Instanton ε-sweep with rates and the level bound.
    Level {
        #[command(flatten)]
        common: Common,
        /// Comma-separated decreasing ε values.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Sweep table and test-function profiles as CSV.
    SweepExport {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Verify { .. } => "verify",
            Command::Level { .. } => "level",
            Command::SweepExport { .. } => "sweep-export",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Solve(c) => c,
            Command::Verify { common, .. } | Command::Level { common, .. } | Command::SweepExport { common, .. } => {
                common
            }
        }
    }
}

struct Outcome {
    exit: u8,
    pass: bool,
    summary: String,
    outputs: Vec<PathBuf>,
    grid_fingerprint: Option<String>,
}

impl Outcome {
    fn failed(exit: u8, err: &anyhow::Error) -> Self {
        Outcome { exit, pass: false, summary: format!("{err:#}"), outputs: Vec::new(), grid_fingerprint: None }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    artifact_version: &'a str,
    config_path: String,
    config: &'a serde_json::Value,
    seed: Option<u64>,
    grid_fingerprint: Option<&'a str>,
    wall_time_s: f64,
    outputs: Vec<String>,
    pass: bool,
    exit_code: u8,
    summary: &'a str,
}

/// 2 for configuration problems, 4 for failed assumptions, 3 for numerical failures.
fn exit_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Assumption(_)) => 4,
        Some(Error::InvalidParameter(_) | Error::Grid(_) | Error::Domain(_)) => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn write_file(path: PathBuf, contents: &str, outputs: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    fs::write(&path, contents).map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    outputs.push(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    pass: bool,
    seed: u64,
    report: &'a SolveReport,
    certificate: Option<&'a PropertyReport>,
    certificate_error: Option<String>,
}

fn cmd_solve(l: &Loaded, out: &Path, seed: u64) -> anyhow::Result<Outcome> {
    let grid = l.solve.grid.build(l.model.dimension())?;
    let problem = Problem::new(l.model.clone(), grid.clone())?;
    let initial = match &l.solve.initial {
        InitialGuess::File { path } => {
            let path = l.dir.join(path);
            problem.field(config::read_field_csv(&path)?)?
        }
        guess => initial_field(&problem, guess)?,
    };
    let report = minimize_from(&problem, &l.solve, initial)?;
    let (certificate, certificate_error) = match level_certificate(&report, &problem, 1e-6) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let pass = report.converged && certificate.as_ref().is_some_and(|c| c.pass);
    let mut outputs = Vec::new();
    let body = SolveOutput { pass, seed, report: &report, certificate: certificate.as_ref(), certificate_error };
    write_file(out.join("solve_report.json"), &to_json(&body)?, &mut outputs)?;
    write_file(out.join("v_star.csv"), &report.v_star.to_csv(), &mut outputs)?;
    write_file(out.join("u_star.csv"), &report.u_star.to_csv(), &mut outputs)?;

    println!("converged      {} after {} iterations", report.converged, report.iterations);
    println!("level c        {:.10}", report.level);
    println!("threshold      {:.10}", report.threshold);
    println!("gradient norm  {:.3e}", report.gradient_norm);
    println!("nehari resid.  {:.3e}", report.nehari_residual);
    println!("concentration  {:.4} of L2 mass within r = {}", report.concentration.fraction, report.concentration.radius);
    for w in &report.warnings {
        println!("warning: {w}");
    }
    if let Some(c) = &certificate {
        print!("{c}");
    }
    let summary = format!("converged={} c={:.10} threshold={:.6}", report.converged, report.level, report.threshold);
    Ok(Outcome { exit: if pass { 0 } else { 3 }, pass, summary, outputs, grid_fingerprint: Some(grid.fingerprint()) })
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    suite: &'a str,
    seed: u64,
    pass: bool,
    reports: &'a [PropertyReport],
}

fn cmd_verify(l: &Loaded, out: &Path, seed: u64, suite: &str) -> anyhow::Result<Outcome> {
    let suite: Suite = suite.parse()?;
    let grid = l.solve.grid.build(l.model.dimension())?;
    let reports = run_suite(&l.model, &grid, suite, seed)?;
    let pass = reports.iter().all(|r| r.pass);
    for r in &reports {
        println!("{r}");
    }
    let mut outputs = Vec::new();
    let body = VerifyOutput { suite: suite.name(), seed, pass, reports: &reports };
    write_file(out.join("verify_report.json"), &to_json(&body)?, &mut outputs)?;
    let failed: usize = reports.iter().map(|r| r.failures().count()).sum();
    Ok(Outcome {
        exit: if pass { 0 } else { 1 },
        pass,
        summary: format!("suite {suite}: {failed} failing entries"),
        outputs,
        grid_fingerprint: Some(grid.fingerprint()),
    })
}

fn sweep(l: &Loaded, eps: &Option<Vec<f64>>) -> anyhow::Result<(Arc<Grid>, Vec<f64>, SweepReport)> {
    let n = l.model.dimension();
    let list = eps.clone().unwrap_or_else(|| l.config.sweep.eps_or_default(n));
    let grid = l.config.sweep.grid_or_default(l.model.omega_radius()).build(n)?;
    let report = eps_sweep(&l.model, &list, &grid)?;
    Ok((grid, list, report))
}

fn print_sweep(r: &SweepReport) {
    println!("{:>10} {:>14} {:>12} {:>10} {:>12} {:>12}", "eps", "grad excess", "|v|_2^2", "t_eps", "max I(tv)", "margin");
    for p in &r.points {
        println!(
            "{:>10.3e} {:>14.6e} {:>12.6e} {:>10.6} {:>12.6} {:>12.6}",
            p.eps, p.gradient_excess, p.l2_sq, p.t_eps, p.max_level, p.margin
        );
    }
    println!("fit window     [{:.3e}, {:.3e}]", r.fit_window.0, r.fit_window.1);
    println!("gradient rate  {:.4} (expected {})", r.gradient_fit.slope, r.gradient_fit.expected);
    println!("L2 rate        {:.4} (expected {})", r.l2_fit.slope, r.l2_fit.expected);
    println!("L2/eta spread  {:.4}", r.l2_ratio_spread);
    println!("K              {:.8} (S^(N/2) = {:.8})", r.k_extrapolated, r.sobolev_constant.powf(r.dimension as f64 / 2.0));
    println!("t_eps range    [{:.6}, {:.6}]", r.t_bounds.0, r.t_bounds.1);
    println!("threshold      {:.8}", r.threshold);
    println!("final margin   {:.8}", r.final_margin);
    for w in &r.warnings {
        println!("warning: {w}");
    }
}

fn cmd_level(l: &Loaded, out: &Path, eps: &Option<Vec<f64>>) -> anyhow::Result<Outcome> {
    let (grid, _, report) = sweep(l, eps)?;
    print_sweep(&report);
    let mut outputs = Vec::new();
    write_file(out.join("sweep.json"), &to_json(&report)?, &mut outputs)?;
    write_file(out.join("sweep.csv"), &report.to_csv(), &mut outputs)?;
    let pass = report.final_margin > 0.0;
    Ok(Outcome {
        exit: if pass { 0 } else { 1 },
        pass,
        summary: format!("margin at smallest eps {:.6e}", report.final_margin),
        outputs,
        grid_fingerprint: Some(grid.fingerprint()),
    })
}

fn cmd_sweep_export(l: &Loaded, out: &Path, eps: &Option<Vec<f64>>) -> anyhow::Result<Outcome> {
    let (grid, list, report) = sweep(l, eps)?;
    let n = l.model.dimension();
    let profiles = list
        .iter()
        .map(|&e| Ok(test_function(&InstantonParams::new(n, e, l.model.omega_radius())?, &grid)?.v))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut csv = String::from("distance");
    for e in &list {
        let _ = write!(csv, ",v_eps_{e:e}");
    }
    csv.push('\n');
    for j in 0..grid.len() {
        let _ = write!(csv, "{:e}", grid.distance(j));
        for p in &profiles {
            let _ = write!(csv, ",{:e}", p.values()[j]);
        }
        csv.push('\n');
    }
    let mut outputs = Vec::new();
    write_file(out.join("sweep.csv"), &report.to_csv(), &mut outputs)?;
    write_file(out.join("profiles.csv"), &csv, &mut outputs)?;
    Ok(Outcome {
        exit: 0,
        pass: true,
        summary: format!("{} sweep points exported", list.len()),
        outputs,
        grid_fingerprint: Some(grid.fingerprint()),
    })
}

fn run(cmd: &Command, l: &Loaded, out: &Path, seed: u64) -> anyhow::Result<Outcome> {
    match cmd {
        Command::Solve(_) => cmd_solve(l, out, seed),
        Command::Verify { suite, .. } => cmd_verify(l, out, seed, suite),
        Command::Level { eps, .. } => cmd_level(l, out, eps),
        Command::SweepExport { eps, .. } => cmd_sweep_export(l, out, eps),
    }
}

fn append_manifest(out: &Path, manifest: &Manifest) -> anyhow::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(out.join("runs.jsonl"))?;
    writeln!(f, "{}", serde_json::to_string(manifest)?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let common = cli.command.common().clone();
    if let Err(e) = fs::create_dir_all(&common.out) {
        eprintln!("error: cannot create {}: {e}", common.out.display());
        return ExitCode::from(2);
    }
    let loaded = config::load(&common.config);
    let (raw, seed) = match &loaded {
        Ok(l) => (l.raw.clone(), Some(common.seed.unwrap_or(l.config.seed))),
        Err(_) => (serde_json::Value::Null, common.seed),
    };
    let outcome = match &loaded {
        Err(e) => Outcome::failed(2, e),
        Ok(l) => {
            let seed = seed.expect("seed set for a loaded config");
            run(&cli.command, l, &common.out, seed).unwrap_or_else(|e| Outcome::failed(exit_for(&e), &e))
        }
    };
    if outcome.exit != 0 {
        eprintln!("{}: {}", cli.command.name(), outcome.summary);
    }
    let manifest = Manifest {
        command: cli.command.name(),
        artifact_version: env!("CARGO_PKG_VERSION"),
        config_path: common.config.display().to_string(),
        config: &raw,
        seed,
        grid_fingerprint: outcome.grid_fingerprint.as_deref(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
        pass: outcome.pass,
        exit_code: outcome.exit,
        summary: &outcome.summary,
    };
    if let Err(e) = append_manifest(&common.out, &manifest) {
        eprintln!("error: cannot append manifest: {e:#}");
    }
    ExitCode::from(outcome.exit)
}
