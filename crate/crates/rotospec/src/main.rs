use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use rotospec::config::{parse_scenario, serialize_scenario};
use rotospec::harness::{builtin, builtin_description, builtin_names, run_scenario_with, RunOptions};
use rotospec::report::{write_results, OutputFormat};

#[derive(Parser)]
#[command(name = "rotospec", version, about = "Rotation-speed measurement simulator and estimator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write a results table.
    Run {
        /// Scenario file (TOML).
        scenario: PathBuf,
        /// Override the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the results table.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the scenario's trial count.
        #[arg(long)]
        trials: Option<u32>,
        /// Output format.
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Zero the wall_time_ms column for byte-reproducible output.
        #[arg(long)]
        no_timing: bool,
    },
    /// List the builtin scenario names.
    ListBuiltins,
    /// Emit the scenario file of a builtin.
    GenConfig {
        /// Builtin name (see list-builtins).
        name: String,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("rotospec: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            trials,
            format,
            no_timing,
        } => {
            let text = fs::read_to_string(&scenario)
                .map_err(|e| format!("{}: {e}", scenario.display()))?;
            let parsed = parse_scenario(&text).map_err(|e| e.to_string())?;
            let options = RunOptions {
                record_timing: !no_timing,
                trials_override: trials,
                seed_override: seed,
            };
            let results = run_scenario_with(&parsed, &options).map_err(|e| e.to_string())?;

            let format: OutputFormat = format.into();
            fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            let destination = out.join(format!("{}.{}", parsed.name, format.extension()));
            write_results(&results, format, &destination).map_err(|e| e.to_string())?;

            let detected: Vec<&_> = results.iter().filter(|r| !r.detection_failed).collect();
            let mean_abs = if detected.is_empty() {
                f64::NAN
            } else {
                detected.iter().map(|r| r.abs_error_rpm).sum::<f64>() / detected.len() as f64
            };
            let mean_ratio = if results.is_empty() {
                f64::NAN
            } else {
                results.iter().map(|r| r.loc_ratio).sum::<f64>() / results.len() as f64
            };
            println!(
                "{}: {} rows ({} detection failures), mean |error| {:.3} rpm, mean convergence ratio {:.3}",
                parsed.name,
                results.len(),
                results.len() - detected.len(),
                mean_abs,
                mean_ratio
            );
            println!("wrote {}", destination.display());
            Ok(())
        }
        Command::ListBuiltins => {
            for name in builtin_names() {
                println!("{name:24} {}", builtin_description(name).unwrap_or(""));
            }
            Ok(())
        }
        Command::GenConfig { name, out } => {
            let scenario = builtin(&name).ok_or_else(|| {
                format!(
                    "unknown builtin '{name}' (available: {})",
                    builtin_names().join(", ")
                )
            })?;
            let text = serialize_scenario(&scenario).map_err(|e| e.to_string())?;
            match out {
                Some(path) => {
                    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}
