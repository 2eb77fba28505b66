//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage errors, unreadable files and
//! schema violations, 1 for runtime failures. The `AIRMAX_SEED` environment
//! variable, when set, overrides the seed of every loaded scenario (useful
//! for re-running a batch under a fresh seed without editing files).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use airmax::airlink::SignalRanges;
use airmax::channel::ChannelModel;
use airmax::harness::{
    comparison_csv, compare_tdma, failure_csv, run_scenario, summary_json, trace_csv,
    ScenarioConfig,
};
use airmax::nomographic::{demo_failure_under_pipeline, MaxApprox};

const SEED_ENV: &str = "AIRMAX_SEED";

#[derive(Parser)]
#[command(
    name = "airmax",
    about = "Max-consensus over fading wireless multiple-access channels",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and report the outcome.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Write the per-iteration trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the run summary as JSON instead of printing it.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run every `*.json` scenario in a directory, writing
    /// `<name>.trace.csv` and `<name>.summary.json` next to each.
    Batch {
        /// Directory of scenario files.
        dir: PathBuf,
    },
    /// Randomized slot-count comparison of the standard TDMA approach
    /// against the finite-time superposition protocol.
    CompareTdma {
        #[arg(long, default_value_t = 3)]
        n_min: u32,
        #[arg(long, default_value_t = 30)]
        n_max: u32,
        #[arg(long, default_value_t = 20)]
        trials: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the nomographic max approximation through the noisy analog
    /// pipeline and record the error per sharpness value.
    DemoNomographic {
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Which approximation to push through the pipeline.
        #[arg(long, value_enum, default_value_t = ApproxArg::SumOfPowers)]
        which: ApproxArg,
    },
    /// Parse and schema-check a scenario file.
    Validate {
        /// Scenario JSON file.
        scenario: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproxArg {
    SumOfPowers,
    LogSumExp,
}

impl From<ApproxArg> for MaxApprox {
    fn from(arg: ApproxArg) -> Self {
        match arg {
            ApproxArg::SumOfPowers => MaxApprox::SumOfPowers,
            ApproxArg::LogSumExp => MaxApprox::LogSumExp,
        }
    }
}

/// Failures carry the exit status they should terminate with.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders its own message; keep its exit code for usage
            // errors and 0 for --help/--version.
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { scenario, trace, summary } => cmd_run(&scenario, trace, summary),
        Command::Batch { dir } => cmd_batch(&dir),
        Command::CompareTdma { n_min, n_max, trials, seed, out } => {
            cmd_compare(n_min, n_max, trials, seed, out)
        }
        Command::DemoNomographic { out, which } => cmd_demo(out, which.into()),
        Command::Validate { scenario } => cmd_validate(&scenario),
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::from_json(&text)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if let Ok(value) = std::env::var(SEED_ENV) {
        cfg.seed = value
            .parse()
            .map_err(|_| Failure::usage(format!("{SEED_ENV} must be a 64-bit integer")))?;
    }
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))
}

fn cmd_run(
    scenario: &Path,
    trace: Option<PathBuf>,
    summary: Option<PathBuf>,
) -> Result<(), Failure> {
    let cfg = load_scenario(scenario)?;
    let result = run_scenario(&cfg).map_err(|e| Failure::runtime(e.to_string()))?;
    if let Some(path) = trace {
        write_file(&path, &trace_csv(&result))?;
    }
    match summary {
        Some(path) => write_file(&path, &summary_json(&result))?,
        None => print!("{}", summary_json(&result)),
    }
    Ok(())
}

fn cmd_batch(dir: &Path) -> Result<(), Failure> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|entry| entry.path())
        .filter(|path| {
            // Scenario inputs only; skip summaries from a previous batch run.
            path.extension().is_some_and(|ext| ext == "json")
                && !path
                    .file_name()
                    .is_some_and(|name| name.to_string_lossy().ends_with(".summary.json"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::usage(format!("no scenario files in {}", dir.display())));
    }
    let scenarios = paths
        .iter()
        .map(|path| Ok((path.display().to_string(), load_scenario(path)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let results = airmax::harness::run_batch(&scenarios);
    for (path, (name, result)) in paths.iter().zip(results) {
        let result = result.map_err(|e| Failure::runtime(format!("{name}: {e}")))?;
        write_file(&path.with_extension("trace.csv"), &trace_csv(&result))?;
        write_file(&path.with_extension("summary.json"), &summary_json(&result))?;
        println!(
            "{}: converged={} iterations={} slots={}",
            path.display(),
            result.converged,
            result.iterations,
            result.slots,
        );
    }
    Ok(())
}

fn cmd_compare(
    n_min: u32,
    n_max: u32,
    trials: u32,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    let records = compare_tdma(n_min, n_max, trials, &ChannelModel::Rayleigh { scale: 1.0 }, seed)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let text = comparison_csv(&records);
    match out {
        Some(path) => write_file(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_demo(out: Option<PathBuf>, which: MaxApprox) -> Result<(), Failure> {
    let ranges = SignalRanges::default();
    let noise = 1e-3 * 4.0; // 1e-3 * (P_max - P_min) for the default ranges
    let table = demo_failure_under_pipeline(
        &[1.0, 2.0, 3.0],
        &[1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
        which,
        &ranges,
        noise,
        2024,
    )
    .map_err(|e| Failure::runtime(e.to_string()))?;
    let text = failure_csv(&table);
    match out {
        Some(path) => write_file(&path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_validate(scenario: &Path) -> Result<(), Failure> {
    load_scenario(scenario)?;
    println!("ok");
    Ok(())
}
