use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use beamsense::harness::output::{report, write_run};
use beamsense::harness::{run_many, run_scenario, scenarios, summarize, ExperimentConfig};
use beamsense::Error;

#[derive(Parser)]
#[command(name = "beamsense", version, about = "Radar-aided mmWave beam management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides scene.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides output_dir (default: ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the same experiment at several recalibration periods.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        recal_periods: Vec<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a run directory: CDF tables and a text summary.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Write a config for a built-in scenario.
    Scenario {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::UnknownStrategy(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load(config: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.scene.seed = s;
    }
    Ok(cfg)
}

fn out_dir(out: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, seed, out } => {
            let cfg = load(&config, seed)?;
            let dir = out_dir(out, &cfg);
            log::info!("running {} s scene, seed {}", cfg.scene.duration, cfg.scene.seed);
            let log = run_scenario(&cfg)?;
            write_run(&dir, &log)?;
            std::fs::write(dir.join("config.json"), cfg.to_json() + "\n").map_err(|e| Failure::Runtime(e.to_string()))?;
            for (name, s) in summarize(&log)? {
                println!(
                    "{name:<18} median {:>8.1} Mbps  p20 {:>8.1} Mbps  median angle error {:>6.2} deg",
                    s.throughput_mbps.median, s.throughput_mbps.p20, s.angle_error_deg.median
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Sweep { config, recal_periods, seed, out } => {
            let base = load(&config, seed)?;
            let dir = out_dir(out, &base);
            let mut configs = Vec::new();
            for p in &recal_periods {
                let cfg = ExperimentConfig { recal_period: Some(*p), ..base.clone() };
                cfg.validate()?;
                configs.push(cfg);
            }
            let logs = run_many(&configs);
            for (p, log) in recal_periods.iter().zip(logs) {
                let log = log?;
                let sub = dir.join(format!("recal_{p}"));
                write_run(&sub, &log)?;
                for (name, s) in summarize(&log)? {
                    println!(
                        "recal {p:>5} s  {name:<18} median {:>8.1} Mbps  median angle error {:>6.2} deg",
                        s.throughput_mbps.median, s.angle_error_deg.median
                    );
                }
            }
            println!("wrote {}", dir.display());
        }
        Command::Report { input } => {
            print!("{}", report(&input)?);
        }
        Command::Scenario { name, seed, out } => {
            let cfg = ExperimentConfig::new(scenarios::builtin(&name, seed)?);
            std::fs::write(&out, cfg.to_json() + "\n").map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
