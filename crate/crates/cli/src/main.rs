use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use supercurve::action::{action_a1, action_a2, compare_a1_a2, harmonic_action};
use supercurve::config::RunConfig;
use supercurve::construct::construct;
use supercurve::fieldio::{read_super_field, write_super_field};
use supercurve::fields::{Pullback, VectorField};
use supercurve::report::{grassmann_value, Check};
use supercurve::suite::{convergence, Order, Suite};
use supercurve::worldsheet::{Scheme, TorusGrid};
use supercurve::Error;

/// Verification toolkit for holomorphic supercurves on a discretized torus.
#[derive(Parser)]
#[command(name = "supercurve", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification checks and write a JSON suite report.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// comma-separated check names; all checks when omitted
        #[arg(long)]
        checks: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// report path; defaults to `<output_dir>/verify.json`
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build the explicit flat-torus supercurve and write its fields.
    Construct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-refinement study of one identity; CSV on stdout.
    Convergence {
        #[arg(long)]
        check: String,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        grids: Vec<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// overrides the scheme of the configuration
        #[arg(long)]
        scheme: Option<Scheme>,
    },
    /// Evaluate the action functionals on a field bundle.
    Action {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        fields: PathBuf,
    },
}

/// Exit codes: 0 all checks pass, 1 some check fails, 2 usage or input error.
fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("SUPERCURVE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .with_context(|| format!("SUPERCURVE_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Verify {
            config,
            checks,
            seed,
            report,
        } => verify(&config, checks.as_deref(), seed, report),
        Command::Construct { config, out } => construct_cmd(&config, &out),
        Command::Convergence {
            check,
            grids,
            config,
            scheme,
        } => convergence_cmd(&check, &grids, config.as_deref(), scheme),
        Command::Action { config, fields } => action_cmd(&config, &fields),
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes to stdout; a reader that hung up early is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn verify(config: &Path, checks: Option<&str>, seed: Option<u64>, report: Option<PathBuf>) -> anyhow::Result<bool> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let checks = match checks {
        Some(list) => Check::parse_list(list)?,
        None => Check::ALL.to_vec(),
    };
    let suite = Suite::new(&cfg)?;
    let r = suite.run(&checks);
    let text = serde_json::to_string_pretty(&r)?;
    let path = report.unwrap_or_else(|| cfg.output_dir.join("verify.json"));
    write_file(&path, &text)?;
    emit(&text)?;
    for f in r.failures() {
        eprintln!("FAIL {} [{}]: defect {:e} > {:e}", f.check, f.case, f.defect, f.tolerance);
    }
    eprintln!(
        "{} checks: {} passed, {} failed, {} skipped; report at {}",
        r.summary.total,
        r.summary.passed,
        r.summary.failed,
        r.summary.skipped,
        path.display()
    );
    Ok(r.pass)
}

fn construct_cmd(config: &Path, out: &Path) -> anyhow::Result<bool> {
    let cfg = RunConfig::load(config)?;
    let grid = cfg.build_grid()?;
    let c = construct(&grid, &cfg.target, &cfg.construction_params())?;
    write_super_field(out, &grid, &c.field)?;
    let r = Suite::new(&cfg)?.run(&[Check::Construction]);
    let text = serde_json::to_string_pretty(&json!({
        "degenerate": c.degenerate,
        "analytic_energy": c.analytic_energy,
        "report": r,
    }))?;
    write_file(&out.join("report.json"), &text)?;
    emit(&text)?;
    if c.degenerate {
        eprintln!("warning: zero winding, the constructed map is constant");
    }
    Ok(r.pass)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    check: &'a str,
    scheme: &'a str,
    n: usize,
    h: f64,
    defect: f64,
    observed_order: Option<f64>,
}

fn convergence_cmd(check: &str, grids: &[usize], config: Option<&Path>, scheme: Option<Scheme>) -> anyhow::Result<bool> {
    let check: Check = check.parse()?;
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = scheme {
        cfg.grid.scheme = s;
    }
    let table = convergence(&cfg, check, grids)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &table.rows {
        w.serialize(CsvRow {
            check: check.name(),
            scheme: table.scheme.name(),
            n: r.n,
            h: r.h,
            defect: r.defect,
            observed_order: r.observed_order,
        })?;
    }
    emit(std::str::from_utf8(&w.into_inner()?)?.trim_end())?;
    let order = match table.order {
        Order::Exact => "exact".to_string(),
        Order::Floor => "floor".to_string(),
        Order::Fitted { order } => format!("{order:.3}"),
    };
    eprintln!(
        "{check} on {}: order {order}, expected {}{}: {}",
        table.scheme,
        table.expectation,
        if table.monotone { "" } else { ", defects not monotone" },
        if table.pass { "PASS" } else { "FAIL" }
    );
    Ok(table.pass)
}

fn action_cmd(config: &Path, fields: &Path) -> anyhow::Result<bool> {
    let cfg = RunConfig::load(config)?;
    let (grid, sf) = read_super_field(fields, cfg.grid.scheme)?;
    note_grid(&grid, &cfg);
    let target = cfg.target.build()?;
    if sf.phi.dim() != target.dim() {
        bail!(Error::Shape(format!(
            "fields have {} components, target `{}` has dimension {}",
            sf.phi.dim(),
            target.name(),
            target.dim()
        )));
    }
    let lambda = cfg.lambda.build(&grid)?;
    let pb = Pullback::new(&grid, target.as_ref(), &lambda, &sf.phi)?;
    let a1 = action_a1(&pb, &sf)?;
    let zero = VectorField::zeros(&grid, pb.dim());
    let a2 = action_a2(&pb, &pb.e_plus(&sf.psi1.theta), &zero)?;
    let mut out = json!({
        "A": harmonic_action(&pb),
        "A1": grassmann_value(&a1),
        "A2": a2,
    });
    if sf.psi2.theta.max_abs() == 0.0 && sf.xi.max_abs() == 0.0 {
        out["compare_a1_a2"] = serde_json::to_value(compare_a1_a2(&pb, &sf)?)?;
    }
    emit(&serde_json::to_string_pretty(&out)?)?;
    Ok(true)
}

fn note_grid(grid: &TorusGrid, cfg: &RunConfig) {
    let g = cfg.grid;
    if grid.n_s() != g.n_s || grid.n_t() != g.n_t || grid.p_s() != g.p_s || grid.p_t() != g.p_t {
        eprintln!(
            "note: fields live on a {}x{} grid with periods ({}, {}); using it instead of the configured grid",
            grid.n_s(),
            grid.n_t(),
            grid.p_s(),
            grid.p_t()
        );
    }
}
