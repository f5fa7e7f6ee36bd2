use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eprsim::config::{sweep_plan, Format, Mode, Overrides, ScenarioConfig, Settings};
use eprsim::record::write_records;
use eprsim::run::{self, Report};
use eprsim::validate::{validate, ValidateOptions};
use eprsim::CliError;

/// Simulate phase-lock-free direct detection of bright EPR beams.
#[derive(Parser)]
#[command(name = "eprsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the standard chain and check its identities.
    Demo(Common),
    /// Evaluate the scenario over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of: r, eta, common_phase, differential_phase, hwp_angle, alpha.
        #[arg(long)]
        param: Option<String>,
        /// `start:stop:points` or a comma-separated list.
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
    },
    /// Run the invariant suite.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Include the Monte Carlo oracle checks.
        #[arg(long)]
        mc: bool,
        /// Perturb one covariance entry of the symmetry probe (negative control).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        inject_asymmetry: f64,
    },
    /// Compare exact photocurrent statistics with the linearized model.
    Mc(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Transmissivity of a loss on both beams ahead of the wave plates.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    /// Monte Carlo samples per batch.
    #[arg(long)]
    batch: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> Result<Settings, CliError> {
        let config = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        let overrides = Overrides {
            alpha: self.alpha,
            r: self.r,
            mode: self.mode,
            eta: self.eta,
            seed: self.seed,
            samples: self.samples,
            batch: self.batch,
            format: self.format,
            out: self.out.clone(),
        };
        Settings::resolve(config, &overrides)
    }
}

fn execute(command: &Command) -> Result<Report, CliError> {
    let (settings, report) = match command {
        Command::Demo(c) => {
            let s = c.settings()?;
            let r = run::demo(&s)?;
            (s, r)
        }
        Command::Sweep { common, param, grid } => {
            let s = common.settings()?;
            let (p, g) = sweep_plan(&s, param.as_deref(), grid.as_deref())?;
            let r = run::sweep(&s, p, &g)?;
            (s, r)
        }
        Command::Validate {
            common,
            mc,
            inject_asymmetry,
        } => {
            let s = common.settings()?;
            let opts = ValidateOptions {
                mc: *mc,
                inject_asymmetry: *inject_asymmetry,
            };
            let r = validate(&s, opts)?;
            (s, r)
        }
        Command::Mc(c) => {
            let s = c.settings()?;
            let r = run::mc(&s)?;
            (s, r)
        }
    };
    match &settings.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            write_records(BufWriter::new(file), &report.records, settings.format)?;
        }
        None => write_records(BufWriter::new(io::stdout().lock()), &report.records, settings.format)?,
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(report) if report.ok => ExitCode::SUCCESS,
        Ok(report) => {
            for r in report.records.iter().filter(|r| r.pass == Some(false)) {
                eprintln!("failed: {} (value {:?}, expected {:?})", r.name, r.value, r.expected);
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("eprsim: {e}");
            e.exit_code()
        }
    }
}
