use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use polyfrac::harness::{
    emit_plot_data, load_scenario, run_scenario_with, run_suite, RunOptions, RunRecord, SuiteOptions,
};

/// Default root for run directories when `--out` is not given.
const OUT_ENV: &str = "POLYFRAC_OUT";

#[derive(Parser)]
#[command(name = "polyfrac", version, about = "Run and inspect poly-fractional scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// Replace the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a tolerance, e.g. `--tol-override solver=1e-12`. Repeatable.
    #[arg(long = "tol-override", value_name = "KEY=VALUE")]
    tol_override: Vec<String>,
    /// Record wall-clock timings in record.json (breaks byte-identical reruns).
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario into a run directory.
    Run {
        scenario: PathBuf,
        /// Run directory. Defaults to `$POLYFRAC_OUT/<name>`, else `runs/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Parse and check a scenario without running it.
    Validate { scenario: PathBuf },
    /// Write CSV series for plotting into `<run-dir>/plot/`.
    PlotData { run_dir: PathBuf },
    /// Run every `*.toml` scenario in a directory.
    Suite {
        dir: PathBuf,
        /// Output root. Defaults to `$POLYFRAC_OUT`, else `runs`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
}

fn out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

fn print_record(dir: &Path, record: &RunRecord) {
    for a in &record.assertions {
        let mark = if a.passed { "pass" } else { "FAIL" };
        let value = a.value.map_or_else(|| "-".into(), |v| format!("{v:e}"));
        let threshold = a.threshold.map_or_else(String::new, |t| format!(" {t:e}"));
        let detail = a.detail.as_deref().map_or_else(String::new, |d| format!("  [{d}]"));
        println!("{mark}  {}: {value} {}{threshold}{detail}", a.name, a.relation.symbol());
    }
    if let Some(e) = &record.error {
        println!("error: {e}");
    }
    let verdict = if record.passed { "passed" } else { "failed" };
    println!("{} {verdict} -> {}", record.scenario, dir.display());
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { scenario, out, flags } => {
            let s = load_scenario(&scenario, flags.seed, &flags.tol_override)
                .with_context(|| format!("loading {}", scenario.display()))?;
            let dir = out.unwrap_or_else(|| out_root().join(&s.name));
            let opts = RunOptions {
                record_timings: flags.timings,
            };
            let record = run_scenario_with(&s, &dir, &opts).with_context(|| format!("writing {}", dir.display()))?;
            print_record(&dir, &record);
            Ok(status(record.passed))
        }
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario, None, &[]).with_context(|| format!("loading {}", scenario.display()))?;
            println!("{}: ok ({}, {}-D, {} points per axis)", s.name, s.task.name(), s.dim, s.points);
            Ok(ExitCode::SUCCESS)
        }
        Command::PlotData { run_dir } => {
            for path in emit_plot_data(&run_dir).with_context(|| format!("plotting {}", run_dir.display()))? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Suite { dir, out, flags } => {
            let root = out.unwrap_or_else(out_root);
            let opts = SuiteOptions {
                seed: flags.seed,
                overrides: flags.tol_override,
                run: RunOptions {
                    record_timings: flags.timings,
                },
            };
            let report = run_suite(&dir, &root, &opts).with_context(|| format!("running suite {}", dir.display()))?;
            for e in &report.entries {
                let mark = if e.passed { "pass" } else { "FAIL" };
                match &e.error {
                    Some(err) => println!("{mark}  {}  ({err})", e.file),
                    None => println!("{mark}  {}", e.file),
                }
            }
            println!("{} passed, {} failed -> {}", report.passed, report.failed, root.display());
            Ok(status(report.all_passed()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
