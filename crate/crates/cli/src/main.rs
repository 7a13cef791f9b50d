use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qpchaser::sim::bench::{prediction_grid, qp_grid};
use qpchaser::sim::output::{plot_data, write_run};
use qpchaser::sim::{load_scenario, run, verify, SimError};

const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_ORACLE: u8 = 4;

#[derive(Parser)]
#[command(name = "qpchaser", version, about = "Occlusion-free chasing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Prediction,
    Qp,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trace, summary and oracle report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
        /// Defaults to the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute derived columns and oracles for a trace.
    Verify {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Print a timing grid as CSV.
    Bench {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Instances per grid cell.
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write per-panel CSVs (distance, visibility, view angle) for a trace.
    PlotData {
        #[arg(long)]
        trace: PathBuf,
        /// Defaults to the trace directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_for(err: &SimError) -> u8 {
    match err {
        SimError::Io { .. } => EXIT_USAGE,
        _ => EXIT_VALIDATION,
    }
}

fn fail(err: SimError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_for(&err))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, duration, seed, out } => {
            let scenario = match load_scenario(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            if !(duration > 0.0 && duration.is_finite()) {
                eprintln!("error: --duration must be positive");
                return ExitCode::from(EXIT_USAGE);
            }
            let seed = seed.unwrap_or(scenario.params.seed);
            let output = match run(&scenario, duration, seed) {
                Ok(o) => o,
                Err(e) => return fail(e),
            };
            let (summary, oracle) = match write_run(&out, &scenario, seed, &output) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            if oracle.violations() > 0 {
                eprintln!("oracle violations: {}", oracle.violations());
                return ExitCode::from(EXIT_ORACLE);
            }
            ExitCode::SUCCESS
        }
        Command::Verify { trace } => {
            let report = match verify(&trace) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("verification failed");
                ExitCode::from(EXIT_ORACLE)
            }
        }
        Command::Bench { suite, instances, seed } => {
            if instances == 0 {
                eprintln!("error: --instances must be positive");
                return ExitCode::from(EXIT_USAGE);
            }
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            match suite {
                Suite::Qp => {
                    let _ = writeln!(out, "mode,n_c,segments,obstacles,instances,optimal,median_ms,p90_ms,qp_median_ms");
                    for r in qp_grid(instances, seed) {
                        let mode = serde_json::to_value(r.mode).expect("serializable");
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{},{:.4},{:.4},{:.4}",
                            mode.as_str().unwrap_or("?"),
                            r.degree,
                            r.segments,
                            r.obstacles,
                            r.instances,
                            r.optimal,
                            r.median_ms,
                            r.p90_ms,
                            r.qp_median_ms
                        );
                    }
                }
                Suite::Prediction => {
                    let rows = match prediction_grid(instances, seed) {
                        Ok(r) => r,
                        Err(e) => return fail(e),
                    };
                    let _ = writeln!(out, "samples,obstacles,runs,sampling_us,collision_us,reachable_ms,total_ms");
                    for r in rows {
                        let _ = writeln!(
                            out,
                            "{},{},{},{:.2},{:.2},{:.4},{:.4}",
                            r.samples, r.obstacles, r.runs, r.sampling_us, r.collision_us, r.reachable_ms, r.total_ms
                        );
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Command::PlotData { trace, out } => {
            let out = out.unwrap_or_else(|| trace.parent().map(PathBuf::from).unwrap_or_default());
            match plot_data(&trace, &out) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
