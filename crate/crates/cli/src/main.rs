use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde_json::json;

use magcomb::analysis::{lyapunov_largest, run_sweep, steady_magnon_number, LyapunovResult};
use magcomb::config::RunConfig;
use magcomb::io::{self, SweepManifest, TrajectoryMeta};
use magcomb::spectral::{analyze_comb, power_spectrum, CombAnalysis};
use magcomb::{integrate, ConfigError, IntegrationError, IoError, ModeState, SpectralError};

mod help;

/// Simulator and spectral analyzer for magnonic frequency combs.
#[derive(Parser, Debug)]
#[command(name = "magcomb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Shared {
    /// JSON run configuration; omitted keys take the defaults below.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps [default: 1].
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Dotted-path override applied after the config file, e.g.
    /// `params.j_am_over_omega_b=1.3`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the mode equations and write the recorded trajectory.
    Simulate {
        #[command(flatten)]
        shared: Shared,
    },
    /// Power spectrum and comb metrics of a trajectory file or a fresh run.
    Spectrum {
        #[command(flatten)]
        shared: Shared,
        /// Trajectory CSV to analyze instead of simulating.
        #[arg(long, value_name = "PATH")]
        trajectory: Option<PathBuf>,
    },
    /// Sweep one parameter and tabulate comb metrics per point.
    Sweep {
        #[command(flatten)]
        shared: Shared,
        /// Values in units of omega_b: `0,0.5,1` or `start:stop:step`.
        #[arg(long, value_name = "GRID")]
        grid: Option<String>,
    },
    /// Largest Lyapunov exponent after the transient.
    Lyapunov {
        #[command(flatten)]
        shared: Shared,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Diverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Diverged(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Diverged(_) => "divergence",
            Failure::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Diverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<IntegrationError> for Failure {
    fn from(e: IntegrationError) -> Self {
        match e {
            IntegrationError::Diverged { .. } | IntegrationError::StepUnderflow { .. } => {
                Failure::Diverged(e.to_string())
            }
            IntegrationError::InvalidConfig(_) | IntegrationError::Model(_) => Failure::Usage(e.to_string()),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load_config(shared: &Shared, extra: &[String]) -> Result<RunConfig, Failure> {
    let text = match &shared.config {
        Some(p) => Some(io::read_to_string(p)?),
        None => None,
    };
    let mut overrides = shared.overrides.clone();
    overrides.extend_from_slice(extra);
    if let Some(out) = &shared.out {
        overrides.push(format!(
            "out={}",
            serde_json::Value::String(out.to_string_lossy().into_owned())
        ));
    }
    if let Some(w) = shared.workers {
        overrides.push(format!("workers={w}"));
    }
    Ok(RunConfig::load(text.as_deref(), &overrides)?)
}

fn write_resolved(cfg: &RunConfig) -> Result<(), Failure> {
    let path = cfg.out.join("config.resolved.json");
    std::fs::create_dir_all(&cfg.out).map_err(|e| Failure::Io(format!("cannot create {}: {e}", cfg.out.display())))?;
    std::fs::write(&path, cfg.to_json()).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn simulate(cfg: &RunConfig) -> Result<(), Failure> {
    write_resolved(cfg)?;
    let p = cfg.params.scaled().map_err(IntegrationError::from)?;
    let traj = integrate(&p, &cfg.integration, &ModeState::ZERO)?;
    let csv = cfg.out.join("trajectory.csv");
    io::save_trajectory_csv(&csv, &traj)?;
    let steady = steady_magnon_number(&traj, cfg.thresholds.tail_fraction);
    let meta = TrajectoryMeta {
        params: cfg.params,
        scaled: p,
        integration: cfg.integration.resolved(&p)?,
        params_digest: traj.params_digest.clone(),
        samples: traj.len(),
        t0: traj.t0,
        dt_sample: traj.dt_sample,
        steady_m2: steady,
        max_m2: traj.max_magnon_number(),
        low_lying_ratio: traj.max_magnon_number() / (2.0 * cfg.n_spin),
    };
    io::write_json(&cfg.out.join("trajectory.json"), &meta)?;
    println!(
        "wrote {} samples to {} (steady |m|^2 = {steady:e})",
        traj.len(),
        csv.display()
    );
    Ok(())
}

fn spectrum(cfg: &RunConfig, trajectory: Option<&Path>) -> Result<(), Failure> {
    write_resolved(cfg)?;
    let traj = match trajectory {
        Some(path) => io::load_trajectory_csv(path)?,
        None => {
            let p = cfg.params.scaled().map_err(IntegrationError::from)?;
            integrate(&p, &cfg.integration, &ModeState::ZERO)?
        }
    };
    let spec = power_spectrum(&traj, cfg.thresholds.window)?;
    let comb: CombAnalysis = analyze_comb(&spec, &cfg.thresholds.comb)?;
    io::save_spectrum_csv(&cfg.out.join("spectrum.csv"), &spec)?;
    io::write_json(&cfg.out.join("comb.json"), &comb)?;
    println!(
        "{} teeth, repetition {}, plateau {}, cutoff {}",
        comb.line_count,
        comb.repetition_rate.map_or("n/a".into(), |r| r.to_string()),
        comb.plateau
            .as_ref()
            .map_or("none".into(), |p| format!("{}..{}", p.first_order, p.last_order)),
        comb.cutoff_order.map_or("none".into(), |c| c.to_string()),
    );
    Ok(())
}

fn sweep(cfg: &RunConfig) -> Result<(), Failure> {
    write_resolved(cfg)?;
    let spec = cfg.sweep_spec();
    let rows = run_sweep(&spec).map_err(Failure::Usage)?;
    let mut files = vec!["sweep.csv".to_string()];
    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> Result<(), IoError>| -> Result<(), Failure> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        let path = cfg.out.join(name);
        std::fs::write(&path, buf).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
    };
    write("sweep.csv", &|b| io::write_sweep_csv(b, &spec, &rows))?;
    if let Some(axis) = &spec.contour {
        write("contour.csv", &|b| io::write_contour_csv(b, &spec, axis, &rows))?;
        files.push("contour.csv".into());
    }
    let manifest = SweepManifest {
        parameter: spec.parameter.name().to_string(),
        grid: spec.grid.clone(),
        workers: spec.workers,
        omega_b_rad_per_s: spec.base.omega_b,
        files,
        rows: rows.clone(),
    };
    io::write_json(&cfg.out.join("sweep.json"), &manifest)?;
    for r in &rows {
        println!(
            "{} = {}: {} lines, regime {}{}",
            spec.parameter.name(),
            r.value,
            r.line_count,
            r.regime.label(),
            r.error.as_ref().map_or(String::new(), |e| format!(" ({e})"))
        );
    }
    Ok(())
}

fn lyapunov_report(cfg: &RunConfig, l: &LyapunovResult) -> serde_json::Value {
    json!({
        "lambda_max_over_omega_b": l.lambda_max,
        "lambda_max_rad_per_s": l.lambda_max_si(cfg.params.omega_b),
        "std_error_over_omega_b": l.std_error,
        "resolution_over_omega_b": l.resolution(),
        "renorm_interval_times_omega_b": l.renorm_interval,
        "perturbation_norm": l.perturbation_norm,
        "history": l.history,
        "running": l.running,
    })
}

fn lyapunov(cfg: &RunConfig) -> Result<(), Failure> {
    write_resolved(cfg)?;
    let p = cfg.params.scaled().map_err(IntegrationError::from)?;
    let lcfg = cfg.lyapunov.unwrap_or_default();
    let l = lyapunov_largest(&p, &cfg.integration, &ModeState::ZERO, &lcfg)?;
    io::write_json(&cfg.out.join("lyapunov.json"), &lyapunov_report(cfg, &l))?;
    println!(
        "lambda_max = {:e} omega_b ({:e} rad/s) +/- {:e}",
        l.lambda_max,
        l.lambda_max_si(cfg.params.omega_b),
        l.std_error
    );
    Ok(())
}

type Action = fn(&RunConfig, &Command) -> Result<(), Failure>;

fn run(cli: Cli) -> Result<(), (Failure, Option<PathBuf>)> {
    let (shared, extra, action): (&Shared, Vec<String>, Action) = match &cli.command {
        Command::Simulate { shared } => (shared, vec![], |c, _| simulate(c)),
        Command::Spectrum { shared, .. } => (shared, vec![], |c, cmd| match cmd {
            Command::Spectrum { trajectory, .. } => spectrum(c, trajectory.as_deref()),
            _ => unreachable!(),
        }),
        Command::Sweep { shared, grid } => (
            shared,
            grid.iter()
                .map(|g| format!("sweep.grid_over_omega_b={}", serde_json::Value::String(g.clone())))
                .collect(),
            |c, _| sweep(c),
        ),
        Command::Lyapunov { shared } => (shared, vec![], |c, _| lyapunov(c)),
    };
    let cfg = load_config(shared, &extra).map_err(|f| (f, None))?;
    action(&cfg, &cli.command).map_err(|f| (f, Some(cfg.out.clone())))
}

fn main() -> ExitCode {
    let defaults = help::defaults_text(&RunConfig::default());
    let cmd = Cli::command()
        .after_help(defaults.clone())
        .mut_subcommands(|sc| sc.after_help(defaults.clone()));
    let matches = cmd.get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((failure, out)) => {
            let report = json!({
                "error": failure.kind(),
                "message": failure.message(),
                "exit_code": failure.code(),
            });
            let text = serde_json::to_string_pretty(&report).expect("error report serializes");
            eprintln!("{text}");
            if let Some(dir) = out.filter(|_| !matches!(failure, Failure::Io(_))) {
                let _ = std::fs::write(dir.join("error.json"), text + "\n");
            }
            ExitCode::from(failure.code())
        }
    }
}
