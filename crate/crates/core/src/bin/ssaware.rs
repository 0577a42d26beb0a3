//! Command-line front end of the scenario runner.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 runtime,
//! 5 guarantee violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ssaware::sim::{self, ConfigError, ScenarioConfig, SimError};
use ssaware::wire::fuzz_decode;

const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;
const EXIT_VIOLATION: u8 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "ssaware",
    version,
    about = "Guaranteed cooperative perception scenario runner"
)]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long, global = true, default_value = "occluded_pedestrian")]
    scenario: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario and write all artifacts.
    Run {
        /// Exit with code 5 if any set misses the true state.
        #[arg(long)]
        self_check: bool,
    },
    /// Rebuild the report of a finished run in the output directory.
    Report,
    /// Load and validate the scenario.
    Validate,
    /// Decode random and mutated buffers.
    FuzzWire {
        #[arg(long, default_value_t = 100_000)]
        iterations: usize,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
    Violation(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(cli: &Cli) -> Result<(ScenarioConfig, String), Failure> {
    let loaded = match sim::bundled(&cli.scenario) {
        Some(text) if !Path::new(&cli.scenario).exists() => {
            ScenarioConfig::from_toml(text).map(|c| (c, text.to_owned()))
        }
        _ => ScenarioConfig::load(Path::new(&cli.scenario)),
    };
    let (mut cfg, text) = loaded.map_err(|e: ConfigError| Failure::Config(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok((cfg, text))
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate => {
            let (cfg, _) = load(cli)?;
            println!(
                "ok: {} with {} actors, {} ticks at {} Hz",
                cfg.name,
                cfg.actors.len(),
                cfg.ticks(),
                cfg.tick_rate_hz
            );
            Ok(())
        }
        Command::Run { self_check } => {
            let (cfg, text) = load(cli)?;
            let output = sim::run(&cfg)?;
            let manifest = sim::write_artifacts(&cli.out, &text, &cfg, &output)?;
            let s = &output.summary;
            println!("scenario {} seed {} -> {}", cfg.name, manifest.seed, cli.out.display());
            println!("ticks {}", s.ticks);
            println!(
                "messages sent {} delivered {} out of order {}",
                s.messages_sent, s.messages_delivered, s.out_of_order
            );
            println!(
                "corrected sets checked {} violations {}",
                s.corrected_checks, s.corrected_violations
            );
            println!(
                "aligned sets checked {} violations {}",
                s.aligned_checks, s.aligned_violations
            );
            println!(
                "fused sets checked {} violations {}",
                s.fused_checks, s.fused_violations
            );
            println!("mixed association groups {}", s.mixed_groups);
            print!("\n{}", output.report.text);
            if *self_check && s.violations() > 0 {
                return Err(Failure::Violation(format!("{} containment violations", s.violations())));
            }
            Ok(())
        }
        Command::Report => {
            let report = sim::regenerate_report(&cli.out)?;
            print!("{}", report.text);
            Ok(())
        }
        Command::FuzzWire { iterations } => {
            let seed = cli.seed.unwrap_or(0);
            let previous = std::panic::take_hook();
            std::panic::set_hook(Box::new(|_| {}));
            let stats = fuzz_decode(seed, *iterations);
            std::panic::set_hook(previous);
            println!(
                "buffers {} decoded {} panics {}",
                stats.buffers, stats.decoded, stats.panics
            );
            for (kind, n) in &stats.errors {
                println!("  {kind} {n}");
            }
            if stats.panics > 0 {
                return Err(Failure::Violation(format!("decoder panicked {} times", stats.panics)));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("runtime error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Violation(m)) => {
            eprintln!("guarantee violation: {m}");
            ExitCode::from(EXIT_VIOLATION)
        }
    }
}
