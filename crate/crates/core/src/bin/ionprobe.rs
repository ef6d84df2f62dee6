use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

use ionprobe::cli::{self, EXIT_FAILED, EXIT_OK, EXIT_USAGE};

/// Run a measurement scenario and write a JSON report.
#[derive(Debug, Parser)]
#[command(name = "ionprobe", version)]
struct Args {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep table destination (CSV); only used when the scenario has a sweep.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Exit with status 1 unless every check passes.
    #[arg(long)]
    strict: bool,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("ionprobe: {msg}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    if let Some(n) = args.threads {
        if n == 0 {
            return fail(EXIT_USAGE, "--threads must be >= 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(EXIT_USAGE, e);
        }
    }
    let report = match cli::run_scenario_file(&args.scenario, args.seed) {
        Ok(r) => r,
        Err(e) => return fail(cli::exit_code(&e), e),
    };
    let json = report.to_json() + "\n";
    let written = match &args.out {
        Some(p) => std::fs::write(p, json).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{json}");
            Ok(())
        }
    };
    if let Err(e) = written {
        return fail(EXIT_USAGE, e);
    }
    if let (Some(path), Some(rows)) = (&args.table, &report.sweep) {
        let file = match std::fs::File::create(path) {
            Ok(f) => f,
            Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
        };
        if let Err(e) = cli::write_sweep_csv(rows, file) {
            return fail(EXIT_USAGE, e);
        }
    }
    if args.strict && !report.pass {
        for c in report.checks.iter().filter(|c| !c.pass) {
            eprintln!("ionprobe: check `{}` failed: deviation {:.3e} > {:.3e}", c.name, c.deviation, c.tolerance);
        }
        return ExitCode::from(EXIT_FAILED as u8);
    }
    ExitCode::from(EXIT_OK as u8)
}
