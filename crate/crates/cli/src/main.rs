use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use wedgeshock::config::{report_error, ExperimentConfig, GridArg, Mode};
use wedgeshock::pipeline::{self, Outcome};
use wedgeshock::Error;

/// Attached weak shocks past perturbed wedges.
#[derive(Parser)]
#[command(name = "wedgeshock", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shock polar curve and critical angles.
    Polar(Common),
    /// Background state and stability certificate.
    Certify(Common),
    /// One linearized step from the initial state.
    SolveLinear(Common),
    /// Full fixed-point run.
    Run(Common),
    /// Runs over the configured amplitude scales.
    Sweep(Common),
    /// Dry-run precondition checks; solves nothing.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid override `NSxNT` or `NSxNTxNZ`.
    #[arg(long)]
    grid: Option<GridArg>,
    /// Truncation radius R.
    #[arg(long)]
    radius: Option<f64>,
    /// Seed of the random background survey (polar).
    #[arg(long)]
    seed: Option<u64>,
}

const EXIT_OTHER: u8 = 1;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Detached { .. }) => 2,
        Some(Error::NotWeakTransonic(_) | Error::NotTransonic { .. } | Error::NoTransonicWindow) => 3,
        Some(Error::NotContracting { .. }) => 4,
        Some(Error::SolverFailed { .. }) => 5,
        _ => EXIT_OTHER,
    }
}

fn load(c: &Common, mode: Option<Mode>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if let Some(g) = c.grid {
        cfg.apply_grid(g);
    }
    if let Some(r) = c.radius {
        cfg.solver.radius = r;
    }
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    Ok(cfg)
}

fn report(outcome: &Outcome) {
    match outcome {
        Outcome::Polar(p) => println!(
            "theta_s* = {:.6} deg, theta_w* = {:.6} deg, theta_w = {:.6} deg",
            p.theta_s_star_deg, p.theta_w_star_deg, p.theta_w_deg
        ),
        Outcome::Certify(c) => println!(
            "certified: alpha = {:.4}, beta = {:.4}, min margin = {:.3e}",
            c.certificate.alpha, c.certificate.beta, c.certificate.margins.min_margin
        ),
        Outcome::Run(s) => {
            println!(
                "iterations {} converged {} max kappa {} gain {}",
                s.history.iterations,
                s.history.converged,
                s.history.max_kappa.map_or("-".into(), |k| format!("{k:.3e}")),
                s.gain.map_or("-".into(), |g| format!("{g:.4e}")),
            );
            println!("residual max {:.3e}, wall clock {:.2} s", s.residuals.max(), s.wall_clock_s);
        }
        Outcome::Sweep(s) => {
            for r in &s.rows {
                println!("t = {:.3e}  input {:.4e}  output {:.4e}", r.scale, r.input_norm, r.output_norm);
            }
            println!(
                "slope {}  gain spread {}",
                s.slope.map_or("-".into(), |v| format!("{v:.4}")),
                s.gain_spread.map_or("-".into(), |v| format!("{v:.4}"))
            );
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let (common, mode) = match &cli.command {
        Command::Polar(c) => (c, Some(Mode::Polar)),
        Command::Certify(c) => (c, Some(Mode::Certify)),
        Command::SolveLinear(c) => (c, Some(Mode::SolveLinear)),
        Command::Run(c) => (c, Some(Mode::Run)),
        Command::Sweep(c) => (c, Some(Mode::Sweep)),
        Command::Validate(c) => (c, None),
    };
    let cfg = load(common, mode)?;
    if mode.is_none() {
        let rep = pipeline::validate(&cfg);
        println!("{}", serde_json::to_string_pretty(&rep)?);
        return Ok(if rep.is_ok() { 0 } else { exit_code(&report_error(&rep).into()) });
    }
    let outcome = pipeline::execute(&cfg, &cfg.output.dir, common.seed)?;
    report(&outcome);
    if let Outcome::Run(s) = &outcome {
        if !s.history.converged {
            eprintln!("no convergence within {} iterations", cfg.solver.max_iter);
            return Ok(EXIT_OTHER);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
