use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stripe_inp::experiment::{
    parse_config, run_experiment, write_csv, ExperimentSpec, SweepAxis, SweepRow,
};
use stripe_inp::{Error, HybridMode, Scheme};

/// Monte-Carlo runner for sequential in-network processing over parallel
/// radio stripes.
#[derive(Parser)]
#[command(name = "stripe-inp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one configuration (any sweep in the config is ignored).
    Simulate(Common),
    /// Sweep one parameter and write one CSV row per (value, scheme).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sweep axis; overrides the config.
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        /// Comma-separated sweep values; overrides the config.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Run the built-in self-checks.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config file; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated schemes: mmse-opt, mrc-opt, mmse-naive, mrc-naive.
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    scheme: Option<Vec<Scheme>>,
    /// Hybrid analog/digital front end: off, proposed or random.
    #[arg(long, value_parser = parse_hybrid)]
    hybrid: Option<HybridMode>,
    /// CSV destination; stdout when neither this nor the config names one.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_hybrid(s: &str) -> Result<HybridMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec, Error> {
        let mut spec = match &self.config {
            Some(path) => parse_config(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(seed) = self.seed {
            spec.base.seed = seed;
        }
        if let Some(trials) = self.trials {
            spec.base.trials = trials;
        }
        if let Some(schemes) = &self.scheme {
            spec.schemes = schemes.clone();
        }
        if let Some(hybrid) = self.hybrid {
            spec.hybrid = hybrid;
        }
        if let Some(out) = &self.out {
            spec.output_path = Some(out.display().to_string());
        }
        Ok(spec)
    }
}

fn emit(spec: &ExperimentSpec, rows: &[SweepRow]) -> Result<(), Error> {
    match &spec.output_path {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_csv(rows, &mut w)?;
            w.flush()?;
            for r in rows {
                let at = r
                    .sweep_value
                    .map(|v| format!(" at {v}"))
                    .unwrap_or_default();
                eprintln!(
                    "{}{at}: sum-rate {:.4} +- {:.4}, cutset {:.4}",
                    r.scheme, r.mean_sum_rate, r.std_sum_rate, r.mean_cutset
                );
            }
            eprintln!("wrote {} rows to {path}", rows.len());
        }
        None => write_csv(rows, io::stdout().lock())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Simulate(common) => {
            let mut spec = common.spec()?;
            spec.sweep = None;
            emit(&spec, &run_experiment(&spec)?)?;
        }
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let mut spec = common.spec()?;
            match (axis, values, spec.sweep.take()) {
                (Some(a), Some(v), _) => spec.sweep = Some((a, v)),
                (Some(a), None, Some((_, v))) => spec.sweep = Some((a, v)),
                (None, Some(v), Some((a, _))) => spec.sweep = Some((a, v)),
                (None, None, Some(s)) => spec.sweep = Some(s),
                _ => {
                    return Err(Error::InvalidConfig(
                        "sweep needs an axis and values (flags or sweep_axis/sweep_values in the config)".into(),
                    ))
                }
            }
            emit(&spec, &run_experiment(&spec)?)?;
        }
        Command::Verify { seed } => {
            let checks = stripe_inp::verify::run_checks(seed);
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag}  {}: {}", c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
