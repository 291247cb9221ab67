use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nonadiabat_cli::{parse_scenario, run_command, CliError, RunOptions, Verb};

/// Entropy production audits for Lindblad and Kraus scenarios.
///
/// Exit status: 0 on success, 2 when a physics check fails (outputs are still
/// written), 1 on input or runtime errors. NONADIABAT_THREADS caps the number
/// of worker threads.
#[derive(Debug, Parser)]
#[command(name = "nonadiabat", version)]
struct Args {
    verb: Verb,
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Base seed for trajectory ensembles.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    ntraj: Option<usize>,
    /// Repeatable; keys as in the scenario `tolerances` object.
    #[arg(long = "tol-override", value_name = "KEY=VAL", value_parser = parse_override)]
    tol_override: Vec<(String, f64)>,
    /// Also write events.csv for `trajectories`.
    #[arg(long)]
    event_log: bool,
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (key, value) = s.split_once('=').ok_or_else(|| format!("expected KEY=VAL, got `{s}`"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("`{value}`: {e}"))?;
    Ok((key.trim().to_string(), value))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("NONADIABAT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::invalid("NONADIABAT_THREADS", format!("`{raw}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::invalid("NONADIABAT_THREADS", e.to_string()))
}

fn run(args: Args) -> Result<i32, CliError> {
    configure_threads()?;
    let scenario = parse_scenario(&args.scenario)?;
    let opts = RunOptions {
        out: args.out,
        seed: args.seed,
        dt: args.dt,
        ntraj: args.ntraj,
        tol_overrides: args.tol_override,
        event_log: args.event_log,
    };
    let report = run_command(args.verb, scenario, &opts)?;
    for line in &report.summary {
        println!("{line}");
    }
    for path in &report.files {
        println!("wrote {}", path.display());
    }
    for failure in &report.failures {
        eprintln!("check failed: {failure}");
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
