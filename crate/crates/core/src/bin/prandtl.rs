use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prandtl_core::run::{error_record, load_config, run, Mode, RunOptions, RunSummary};

/// Periodic Prandtl boundary layers and eddy-vorticity selection.
#[derive(Parser)]
#[command(name = "prandtl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single Picard solve (plus the oracle if `oracle.enabled`).
    Solve(Common),
    /// Epsilon sweep with log-log slope fits.
    Sweep(Common),
    /// Picard against the marching/shooting oracle.
    Crosscheck(Common),
    /// Curvilinear identities and unit-vorticity checks.
    Identities(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Concurrent sweep entries.
    #[arg(long, env = "PRANDTL_WORKERS")]
    workers: Option<usize>,
    /// Repeat for more log output.
    #[arg(long, short, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn report(summary: &RunSummary) {
    for e in &summary.entries {
        println!(
            "eps={:<10e} omega0={:.15} leading={:.15} |Q|_X14={:.6e} iterations={}",
            e.epsilon, e.omega0, e.omega0_leading, e.q_norm_x14, e.iterations
        );
        if let Some(o) = e.oracle_omega0 {
            println!("  oracle omega0={o:.15} difference={:.3e}", e.omega0 - o);
        }
    }
    if let Some(s) = &summary.slopes {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!("slopes: omega_err {} q_norm {}", show(s.omega_err), show(s.q_norm));
    }
    for c in summary.checks.iter().filter(|c| !c.passed) {
        println!("FAILED {}: {:e} (tol {:e})", c.name, c.value, c.tol);
    }
    println!("{}", if summary.passed { "all checks passed" } else { "some checks failed" });
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Solve(c) => (Mode::Single, c),
        Command::Sweep(c) => (Mode::Sweep, c),
        Command::Crosscheck(c) => (Mode::Crosscheck, c),
        Command::Identities(c) => (Mode::Identities, c),
    };
    let level = match common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut config = match load_config(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", error_record(&e));
            return ExitCode::from(2);
        }
    };
    if config.mode != mode {
        log::info!("config mode `{}` replaced by `{}`", config.mode.name(), mode.name());
        config.mode = mode;
    }
    let opts = RunOptions { output_dir: common.output_dir, workers: common.workers, dry: false };
    match run(&config, &opts) {
        Ok(out) => {
            report(&out.summary);
            if out.summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", error_record(&e));
            ExitCode::from(2)
        }
    }
}
