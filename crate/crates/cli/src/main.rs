use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use shapeopt_core::elliptic::solve_semilinear_with;
use shapeopt_core::io;
use shapeopt_core::objective::value_from_state;
use shapeopt_core::radial::{instability_demo, stability_verdict_with, VerdictOptions};
use shapeopt_core::validation::run_all;
use shapeopt_core::{
    check_hypotheses, disk_indicator, optimize, solve_radial_state_adjoint, Config, Error, Result,
    TOOL_VERSION,
};

#[derive(Parser, Debug)]
#[command(name = "shapeopt", version, about = "Relaxed shape optimization and ball stability")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Number of Fourier modes for `stability`.
    #[arg(long, global = true, value_name = "K")]
    modes: Option<usize>,

    /// Cells per side of the box grid.
    #[arg(long, global = true, value_name = "N")]
    grid: Option<usize>,

    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Relaxed state on the centered disk of area m.
    Solve,
    /// Projected-gradient density optimization.
    Optimize,
    /// Radial spectrum and stability verdict of the ball.
    Stability,
    /// ω₁ along `radial.rho_list` for g ≡ 1 on the unit ball.
    InstabilityDemo,
    /// Runs the acceptance checks.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Optimize => "optimize",
            Command::Stability => "stability",
            Command::InstabilityDemo => "instability-demo",
            Command::Validate => "validate",
        }
    }
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    tool_version: &'static str,
    config_hash: &'a str,
    command: &'static str,
    config: &'a Config,
    result: T,
}

struct Outputs {
    dir: PathBuf,
    stem: String,
    quiet: bool,
}

impl Outputs {
    fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{ext}", self.stem))
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn wrote(&self, path: &Path) {
        self.note(format!("wrote {}", path.display()));
    }
}

fn config_hash(cfg: &Config) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    Ok(hex::encode(Sha256::digest(&bytes))[..16].to_string())
}

fn resolve_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(modes) = cli.modes {
        cfg.radial.modes = modes;
    }
    if let Some(n) = cli.grid {
        cfg.grid.n = n;
    }
    // Re-check after overrides.
    Config::from_toml_str(&cfg.to_toml_string()?)
}

fn write_artifact<T: Serialize>(
    out: &Outputs,
    command: Command,
    cfg: &Config,
    hash: &str,
    result: T,
) -> Result<()> {
    let path = out.path("json");
    io::write_json_file(
        &path,
        &Artifact {
            tool_version: TOOL_VERSION,
            config_hash: hash,
            command: command.name(),
            config: cfg,
            result,
        },
    )?;
    out.wrote(&path);
    Ok(())
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    hypotheses: &'a shapeopt_core::HypothesisReport,
    disk_radius: f64,
    value: f64,
    picard_iterations: usize,
    sup_norm: f64,
    convergence: &'a [shapeopt_core::PicardRecord],
}

fn run_solve(cfg: &Config, hash: &str, out: &Outputs) -> Result<()> {
    let grid = cfg.grid()?;
    let f = cfg.nonlinearity()?;
    let g = cfg.source();
    let hypotheses = check_hypotheses(&f, &g, cfg.m, &grid)?;
    hypotheses.require_below_rho_bar(cfg.rho)?;
    let radius = (cfg.m / std::f64::consts::PI).sqrt();
    let a = disk_indicator(&grid, radius)?;
    let problem = cfg.relaxed_problem()?;
    let sol = solve_semilinear_with(
        &grid,
        &a,
        cfg.penalty,
        cfg.rho,
        &f,
        &g,
        &problem.solver,
        None,
    )?;
    let value = value_from_state(&problem, &a, &sol.u);

    let csv = out.path("csv");
    io::write_field_csv(io::create_file(&csv)?, &sol.u)?;
    out.wrote(&csv);
    let dat = out.path("dat");
    io::write_dat(
        io::create_file(&dat)?,
        &["iter", "increment", "residual"],
        sol.log
            .iter()
            .map(|r| vec![r.iter as f64, r.increment, r.residual]),
    )?;
    out.wrote(&dat);
    write_artifact(
        out,
        Command::Solve,
        cfg,
        hash,
        SolveSummary {
            hypotheses: &hypotheses,
            disk_radius: radius,
            value,
            picard_iterations: sol.log.len(),
            sup_norm: sol.u.sup_norm(),
            convergence: &sol.log,
        },
    )?;
    out.note(format!("J = {value:.10e} after {} Picard iterations", sol.log.len()));
    Ok(())
}

#[derive(Serialize)]
struct OptimizeSummary<'a> {
    value: f64,
    mass: f64,
    binariness: f64,
    stalled: bool,
    binariness_tracked: bool,
    stages: &'a [shapeopt_core::optimizer::StageSummary],
    grid: shapeopt_core::Grid2D,
    density: &'a [f64],
}

fn run_optimize(cfg: &Config, hash: &str, out: &Outputs) -> Result<()> {
    let problem = cfg.relaxed_problem()?;
    let state = optimize(&problem, cfg.m, &cfg.optimizer_options(), None)?;

    let csv = out.path("csv");
    io::write_history_csv(io::create_file(&csv)?, &state.history)?;
    out.wrote(&csv);
    let dat = out.path("dat");
    io::write_density_dat(io::create_file(&dat)?, &state.density)?;
    out.wrote(&dat);
    write_artifact(
        out,
        Command::Optimize,
        cfg,
        hash,
        OptimizeSummary {
            value: state.value,
            mass: state.density.mass(),
            binariness: state.density.binariness(),
            stalled: state.stalled,
            binariness_tracked: state.binariness_tracked,
            stages: &state.stages,
            grid: problem.grid,
            density: state.density.values(),
        },
    )?;
    out.note(format!(
        "J = {:.10e}, mass = {:.6}, {} accepted steps{}",
        state.value,
        state.density.mass(),
        state.history.len(),
        if state.stalled { " (stalled)" } else { "" }
    ));
    Ok(())
}

fn run_stability(cfg: &Config, hash: &str, out: &Outputs) -> Result<()> {
    let rs = solve_radial_state_adjoint(
        &cfg.radial_grid()?,
        cfg.rho,
        &cfg.nonlinearity()?,
        &cfg.source(),
    )?;
    let report = stability_verdict_with(
        &rs,
        &VerdictOptions {
            modes: cfg.radial.modes,
            xi_source: cfg.radial.xi_source,
        },
    )?;
    let csv = out.path("csv");
    io::write_spectrum_csv(io::create_file(&csv)?, &report)?;
    out.wrote(&csv);
    let dat = out.path("dat");
    io::write_spectrum_dat(io::create_file(&dat)?, &report)?;
    out.wrote(&dat);
    out.note(format!(
        "omega_1 = {:.6e}, verdict {}",
        report.omega[0], report.verdict
    ));
    write_artifact(out, Command::Stability, cfg, hash, report)
}

fn run_instability(cfg: &Config, hash: &str, out: &Outputs) -> Result<()> {
    let report = instability_demo(
        &cfg.nonlinearity()?,
        &cfg.radial.rho_list,
        cfg.radial.n_r,
        cfg.radial.xi_source,
    )?;
    let csv = out.path("csv");
    {
        use std::io::Write;
        let mut w = io::create_file(&csv)?;
        writeln!(w, "rho,omega1,ratio,unstable")?;
        for e in &report.entries {
            let ratio = e.ratio.map_or(String::new(), |r| r.to_string());
            writeln!(w, "{},{},{ratio},{}", e.rho, e.omega1, e.unstable)?;
        }
        w.flush()?;
    }
    out.wrote(&csv);
    for e in &report.entries {
        out.note(format!(
            "rho = {:e}: omega_1 = {:.6e}{}",
            e.rho,
            e.omega1,
            if e.marginal { " (marginal)" } else { "" }
        ));
    }
    write_artifact(out, Command::InstabilityDemo, cfg, hash, report)
}

fn run_validate(quiet: bool) -> ExitCode {
    let results = run_all();
    let passed = results.iter().filter(|r| r.passed).count();
    if !quiet {
        for r in &results {
            println!("{}", r.line());
        }
        println!("{passed}/{} criteria passed", results.len());
    }
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let hash = config_hash(&cfg)?;
    std::fs::create_dir_all(&cli.out)?;
    let out = Outputs {
        dir: cli.out.clone(),
        stem: format!("{}-{hash}", cli.command.name()),
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Solve => run_solve(&cfg, &hash, &out),
        Command::Optimize => run_optimize(&cfg, &hash, &out),
        Command::Stability => run_stability(&cfg, &hash, &out),
        Command::InstabilityDemo => run_instability(&cfg, &hash, &out),
        Command::Validate => unreachable!(),
    }
}

fn exit_code(err: &Error) -> ExitCode {
    if err.is_non_convergence() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Command::Validate = cli.command {
        return run_validate(cli.quiet);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
