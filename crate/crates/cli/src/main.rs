//! `relaycap` command-line front end.
//!
//! Exit status: 0 success, 1 invalid input or arguments, 2 a verification or
//! simulation check failed, 3 an input or output file could not be accessed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};
use relaycap::experiments::{compare_relay_counts, run_sweep};
use relaycap::montecarlo::simulate;
use relaycap::report::{
    comparison_to_csv, curve_to_csv, curve_to_svg, moments_to_csv, parse_network, parse_sim_run,
    parse_sweep, rate_summary, summary_to_csv, to_json, verify_to_csv,
};
use relaycap::verify::{run_suite, Suite};
use relaycap::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "relaycap", version, about = "Cutset bounds and relaying rates for parallel-relay Gaussian networks")]
struct Cli {
    /// Increase log detail on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Direct, cutset, AF, MRC and parallel-channel rates of one network.
    Rate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Rates along a relay-position sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Relay counts; one value overrides the document, two produce the
        /// two-versus-one cutset comparison.
        #[arg(long, value_delimiter = ',')]
        relays: Vec<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Run a randomized property suite.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Simulate the network and compare sample moments with closed forms.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Output {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to csv for sweeps and json otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

enum Failure {
    Input(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("relaycap: {msg}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(Failure::Input(e)) => {
            eprintln!("relaycap: {e}");
            match e {
                Error::Io(_) => ExitCode::from(EXIT_IO),
                _ => ExitCode::from(EXIT_VALIDATION),
            }
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(output: &Output, text: &str) -> Result<(), Error> {
    match &output.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            info!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn format_or(output: &Output, default: Format, allow_svg: bool) -> Result<Format, Error> {
    let format = output.format.unwrap_or(default);
    if format == Format::Svg && !allow_svg {
        return Err(Error::Config {
            field: "format".into(),
            reason: "svg output is only available for single-count sweeps".into(),
        });
    }
    Ok(format)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Rate { config, output } => {
            let format = format_or(&output, Format::Json, false)?;
            let network = parse_network(&read(&config)?)?;
            let summary = rate_summary(&network)?;
            let text = match format {
                Format::Csv => summary_to_csv(&summary)?,
                _ => to_json(&summary),
            };
            emit(&output, &text)?;
            Ok(())
        }
        Command::Sweep {
            config,
            relays,
            output,
        } => {
            let mut spec = parse_sweep(&read(&config)?)?;
            if relays.len() > 1 {
                let format = format_or(&output, Format::Csv, false)?;
                let cmp = compare_relay_counts(&spec, &relays)?;
                let text = match format {
                    Format::Csv => comparison_to_csv(&cmp)?,
                    _ => to_json(&cmp),
                };
                emit(&output, &text)?;
                return Ok(());
            }
            if let Some(&count) = relays.first() {
                spec.relays = count;
                spec.validate()?;
            }
            let format = format_or(&output, Format::Csv, true)?;
            let curve = run_sweep(&spec)?;
            info!("evaluated {} positions", curve.rows.len());
            let text = match format {
                Format::Csv => curve_to_csv(&curve)?,
                Format::Json => to_json(&curve),
                Format::Svg => curve_to_svg(&curve),
            };
            emit(&output, &text)?;
            Ok(())
        }
        Command::Verify {
            suite,
            seed,
            trials,
            output,
        } => {
            let format = format_or(&output, Format::Json, false)?;
            let suite: Suite = suite.parse()?;
            let report = run_suite(suite, seed, trials)?;
            let text = match format {
                Format::Csv => verify_to_csv(&report)?,
                _ => to_json(&report),
            };
            emit(&output, &text)?;
            if report.pass {
                Ok(())
            } else {
                Err(Failure::Check(format!(
                    "suite {suite}: {} of {} trials failed (max deviation {:e}, tolerance {:e})",
                    report.failures, report.trials, report.max_deviation, report.tolerance
                )))
            }
        }
        Command::Simulate {
            config,
            seed,
            output,
        } => {
            let format = format_or(&output, Format::Json, false)?;
            let run = parse_sim_run(&read(&config)?, seed)?;
            let report = simulate(&run)?;
            let text = match format {
                Format::Csv => moments_to_csv(&report)?,
                _ => to_json(&report),
            };
            emit(&output, &text)?;
            if report.all_pass() {
                Ok(())
            } else {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.name.as_str())
                    .collect();
                Err(Failure::Check(format!("moment checks failed: {}", failed.join(", "))))
            }
        }
    }
}
