use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phasing_cli::manifest::{HarnessConfig, RunManifest};
use phasing_cli::{exit_code, EXIT_CONFIG};
use phasing_core::control::ControllerKind;
use phasing_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "phasing",
    version,
    about = "Combustion-phasing models, controllers and virtual engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Harness configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run a case preset in closed loop.
    Run {
        /// case1..case4, 1..4, or a preset file ending in .toml
        #[arg(long)]
        case: String,
        #[arg(long, default_value = "adaptive")]
        controller: ControllerKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Simulated seconds; both segments when omitted.
        #[arg(long)]
        duration: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Fit intake and combustion coefficients.
    Calibrate {
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset CSV; overrides the config and skips synthetic generation.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Adaptive control with and without CA50 measurement noise.
    NoiseStudy {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "adaptive")]
        controller: ControllerKind,
        #[command(flatten)]
        common: Common,
    },
    /// CA50 prediction error under biased inputs.
    Sensitivity {
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Knock-integral SOC against the closed form over the operating grid.
    OracleCheck {
        #[command(flatten)]
        common: Common,
    },
}

fn config(path: &Option<PathBuf>) -> Result<HarnessConfig> {
    match path {
        Some(p) => HarnessConfig::load(p),
        None => Ok(HarnessConfig::default()),
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            case,
            controller,
            seed,
            duration,
            common,
        } => {
            let m = RunManifest::new(
                &case,
                controller,
                seed,
                common.out,
                duration,
                config(&common.config)?,
            )?;
            report(&phasing_cli::run(&m)?);
        }
        Command::Calibrate {
            seed,
            dataset,
            common,
        } => {
            let mut cfg = config(&common.config)?;
            if dataset.is_some() {
                cfg.calibration.dataset = dataset;
            }
            report(&phasing_cli::calibrate(&cfg, seed, &common.out)?);
        }
        Command::NoiseStudy {
            seed,
            controller,
            common,
        } => {
            if controller != ControllerKind::Adaptive {
                return Err(Error::Config(
                    "the noise study runs the adaptive controller only".into(),
                ));
            }
            report(&phasing_cli::noise_study(
                &config(&common.config)?,
                seed,
                &common.out,
            )?);
        }
        Command::Sensitivity { seed, common } => {
            report(&phasing_cli::sensitivity(
                &config(&common.config)?,
                seed,
                &common.out,
            )?);
        }
        Command::OracleCheck { common } => {
            let (r, paths) = phasing_cli::oracle_check(&config(&common.config)?, &common.out)?;
            print!("{}", r.to_text());
            report(&paths);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
