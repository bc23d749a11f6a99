use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hdqkd_cli::report::{beta_csv, json, sweep_csv};
use hdqkd_cli::sweep::{
    evaluate_config, grid, optimize_beta, run_sweep, SweepError, SweepRow, SweepSpec, SweepVariable,
};
use hdqkd_core::config::REFERENCE_CONFIG;
use hdqkd_core::overlap::{overlap_dilated, overlap_result};
use hdqkd_core::security::d_min;
use hdqkd_core::{AbortReason, ConfigDocument};

#[derive(Parser)]
#[command(
    name = "hdqkd",
    version,
    about = "Finite-key key-rate calculator for time-energy HD-QKD"
)]
struct Cli {
    /// Configuration file; the built-in reference configuration when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set distance_km=40`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output format.
    #[arg(long, value_enum, global = true)]
    out: Option<Format>,
    /// Use a Poisson-sampled session with this seed instead of expected counts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1, global = true)]
    parallel: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one session and print the key-rate report.
    Keyrate,
    /// Evaluate the pipeline over a grid of one variable.
    Sweep {
        /// distance_km, running_time_s, delta, beta_D or d0.
        #[arg(long = "var")]
        variable: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', conflicts_with = "grid")]
        values: Option<Vec<f64>>,
        /// Grid as START:STOP:COUNT.
        #[arg(long)]
        grid: Option<String>,
        /// Space the grid logarithmically.
        #[arg(long)]
        log: bool,
    },
    /// Scan beta_D on a log grid and report the rate-maximizing value.
    OptimizeBeta {
        #[arg(long, default_value_t = 1e3)]
        from: f64,
        #[arg(long, default_value_t = 1e8)]
        to: f64,
        #[arg(long, default_value_t = 41)]
        count: usize,
    },
    /// Print the measurement overlap.
    Overlap {
        /// Bin width (ps); configured value when omitted.
        #[arg(long)]
        delta: Option<f64>,
        /// GVD coefficient (ps²); configured value when omitted.
        #[arg(long = "beta-d")]
        beta_d: Option<f64>,
        /// Only the dilated closed form.
        #[arg(long)]
        dilated: bool,
    },
    /// Print d_min and the configured threshold d0.
    Threshold,
}

fn load(cli: &Cli) -> Result<ConfigDocument> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => REFERENCE_CONFIG.to_string(),
    };
    let mut doc = ConfigDocument::parse(&text)?;
    for o in &cli.overrides {
        doc.apply_override(o)?;
    }
    Ok(doc)
}

fn parse_grid(s: &str, log: bool) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        bail!("grid must be START:STOP:COUNT");
    };
    Ok(grid(a.parse()?, b.parse()?, n.parse()?, log)?)
}

#[derive(Serialize)]
struct Threshold {
    d_min: f64,
    d0: f64,
    feasible: bool,
}

#[derive(Serialize)]
struct Dilated {
    c_dilated: f64,
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let doc = load(cli)?;
    match &cli.command {
        Command::Keyrate => {
            let config = doc.resolve()?;
            let e = evaluate_config(&config, cli.seed)?;
            match cli.out.unwrap_or(Format::Json) {
                Format::Json => println!("{}", json(&e)),
                Format::Csv => print!(
                    "{}",
                    sweep_csv(&[SweepRow::from_evaluation(config.session.distance_km, &e)])
                ),
            }
            Ok(if e.report.abort_reason == AbortReason::None {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Command::Sweep {
            variable,
            values,
            grid,
            log,
        } => {
            let variable = SweepVariable::parse(variable)?;
            let values = match (values, grid) {
                (Some(v), None) => v.clone(),
                (None, Some(g)) => parse_grid(g, *log)?,
                _ => bail!("give either --values or --grid"),
            };
            doc.resolve()?;
            let spec = SweepSpec::new(variable, values)?;
            let rows = run_sweep(&doc, &spec, cli.seed, cli.parallel)?;
            match cli.out.unwrap_or(Format::Csv) {
                Format::Csv => print!("{}", sweep_csv(&rows)),
                Format::Json => println!("{}", json(&rows)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::OptimizeBeta { from, to, count } => {
            doc.resolve()?;
            let betas = grid(*from, *to, *count, true)?;
            match optimize_beta(&doc, &betas, cli.seed, cli.parallel) {
                Ok(o) => {
                    match cli.out.unwrap_or(Format::Json) {
                        Format::Json => println!("{}", json(&o)),
                        Format::Csv => print!("{}", beta_csv(&o.curve)),
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Err(SweepError::NoFeasiblePoint) => {
                    eprintln!("error: {}", SweepError::NoFeasiblePoint);
                    Ok(ExitCode::from(2))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Overlap { delta, beta_d, dilated } => {
            let config = doc.resolve()?;
            let delta = delta.unwrap_or(config.protocol.delta);
            let beta_d = beta_d.unwrap_or(config.protocol.beta_d);
            if *dilated {
                println!(
                    "{}",
                    json(&Dilated {
                        c_dilated: overlap_dilated(delta, beta_d)?
                    })
                );
            } else {
                println!("{}", json(&overlap_result(delta, beta_d)?));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Threshold => {
            let p = doc.resolve()?.protocol;
            let dm = d_min(&p);
            println!(
                "{}",
                json(&Threshold {
                    d_min: dm,
                    d0: p.d0,
                    feasible: p.d0 > dm
                })
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.parallel == 0 {
        eprintln!("error: {}", anyhow!("--parallel must be at least 1"));
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
