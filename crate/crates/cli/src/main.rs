use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use mmfem::experiments::{run_cavity, run_convergence, run_stability, DtRule, ExperimentConfig, ExperimentKind};
use mmfem::linsolve::{Backend, SolverConfig};
use mmfem::schemes::SchemeId;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    Convergence,
    Stability,
    Cavity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverChoice {
    Auto,
    Direct,
    Iterative,
}

/// Run convergence, energy-stability or lid-driven cavity experiments for the
/// 3D magneto-micropolar equations.
#[derive(Debug, Parser)]
#[command(name = "mmfem", version)]
struct Args {
    #[arg(long, value_enum)]
    experiment: Experiment,

    /// euler-conforming, euler-stabilized, cn-conforming, cn-stabilized,
    /// decoupled-conforming or decoupled-stabilized
    #[arg(long, default_value = "euler-conforming", value_parser = parse_scheme)]
    scheme: SchemeId,

    /// Mesh width, as `1/8` or `0.125`; repeat for several meshes
    #[arg(long = "h", value_parser = parse_h)]
    h: Vec<usize>,

    /// `h`, `sqrt-h` or `fixed:<dt>`; default depends on the experiment
    #[arg(long, value_parser = parse_dt_rule)]
    dt_rule: Option<DtRule>,

    /// Final time
    #[arg(long = "T")]
    t_final: Option<f64>,

    /// Output directory for CSV and VTK files
    #[arg(long, default_value = "out")]
    out: PathBuf,

    #[arg(long, value_enum)]
    solver: Option<SolverChoice>,

    /// Relative residual tolerance of the linear solves
    #[arg(long)]
    tol: Option<f64>,

    /// Worker threads; 1 gives reproducible single-threaded runs
    #[arg(long)]
    threads: Option<usize>,

    /// Cavity snapshot times (repeatable; default: final time)
    #[arg(long = "snapshot")]
    snapshots: Vec<f64>,

    /// Quadrature degree of the error norms
    #[arg(long)]
    error_degree: Option<usize>,

    /// Also write per-step solver diagnostics
    #[arg(long)]
    step_log: bool,
}

fn parse_scheme(s: &str) -> std::result::Result<SchemeId, String> {
    s.parse().map_err(|e: mmfem::Error| e.to_string())
}

fn parse_dt_rule(s: &str) -> std::result::Result<DtRule, String> {
    s.parse().map_err(|e: mmfem::Error| e.to_string())
}

/// Subdivision count `n` with `h = 1/n`.
fn parse_h(s: &str) -> std::result::Result<usize, String> {
    let h = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad mesh width '{s}'"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad mesh width '{s}'"))?;
            a / b
        }
        None => s.trim().parse().map_err(|_| format!("bad mesh width '{s}'"))?,
    };
    if !(h > 0.0 && h <= 1.0) {
        return Err(format!("mesh width must lie in (0, 1], got {s}"));
    }
    let n = (1.0 / h).round();
    if ((1.0 / h) - n).abs() > 1e-6 {
        return Err(format!("1/h must be an integer, got h={s}"));
    }
    Ok(n as usize)
}

fn build_config(args: &Args) -> Result<ExperimentConfig> {
    let kind = match args.experiment {
        Experiment::Convergence => ExperimentKind::Convergence,
        Experiment::Stability => ExperimentKind::Stability,
        Experiment::Cavity => ExperimentKind::Cavity,
    };
    let mut cfg = ExperimentConfig::new(kind, args.scheme);
    if !args.h.is_empty() {
        cfg.mesh_sizes = args.h.clone();
    }
    cfg.dt_rule = args.dt_rule;
    if let Some(t) = args.t_final {
        cfg.t_final = t;
    }
    cfg.out = Some(args.out.clone());
    let mut solver = SolverConfig::from_env()?;
    if let Some(s) = args.solver {
        solver.backend = match s {
            SolverChoice::Auto => Backend::Auto,
            SolverChoice::Direct => Backend::Direct,
            SolverChoice::Iterative => Backend::Iterative,
        };
    }
    if let Some(t) = args.tol {
        if !(t > 0.0 && t < 1.0) {
            bail!("--tol must lie in (0, 1), got {t}");
        }
        solver.rel_tol = Some(t);
    }
    cfg.solver = solver;
    cfg.snapshot_times = args.snapshots.clone();
    if let Some(d) = args.error_degree {
        cfg.error_degree = d;
    }
    cfg.step_log = args.step_log;
    Ok(cfg)
}

fn run(args: Args) -> Result<bool> {
    if let Some(t) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring worker threads")?;
    }
    let cfg = build_config(&args)?;
    let out = args.out.display();
    match cfg.experiment {
        ExperimentKind::Convergence => {
            let table = run_convergence(&cfg)?;
            print!("{}", table.to_csv());
            let mut ok = true;
            for (n, msg) in table.rows.iter().filter_map(|r| r.as_ref().err()) {
                eprintln!("h=1/{n} failed: {msg}");
                ok = false;
            }
            eprintln!("wrote {out}/convergence_{}.csv", cfg.scheme);
            Ok(ok)
        }
        ExperimentKind::Stability => {
            let series = run_stability(&cfg)?;
            println!("h,dt,steps,E0,EN,monotone");
            for s in &series {
                let first = s.points.first().map_or(f64::NAN, |p| p.2);
                let last = s.points.last().map_or(f64::NAN, |p| p.2);
                println!(
                    "1/{},{},{},{first:.6e},{last:.6e},{}",
                    s.n,
                    s.dt,
                    s.points.len() - 1,
                    s.is_monotone()
                );
            }
            eprintln!("wrote {} stability series to {out}", series.len());
            Ok(true)
        }
        ExperimentKind::Cavity => {
            let runs = run_cavity(&cfg)?;
            println!("h,dt,steps,max_energy,final_energy,snapshots");
            for r in &runs {
                let e = &r.energy;
                println!(
                    "1/{},{},{},{:.6e},{:.6e},{}",
                    e.n,
                    e.dt,
                    e.points.len() - 1,
                    e.max_energy(),
                    e.points.last().map_or(f64::NAN, |p| p.2),
                    r.snapshots.len()
                );
            }
            eprintln!("wrote cavity outputs to {out}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
