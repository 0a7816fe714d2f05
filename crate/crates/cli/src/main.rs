use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qutrit_battery_cli::commands::{cmd_brachistochrone, cmd_charge, cmd_discharge, cmd_protocol, cmd_tomography};
use qutrit_battery_cli::config::parse_override;
use qutrit_battery_cli::{exit, CliError, RawConfig};
use toml::Value;

#[derive(Parser)]
#[command(name = "qbattery", version, about = "Three-level quantum battery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file (dotted keys).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (`output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// RNG seed (`seed`).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Charged fraction of the maximum ergotropy (`threshold`).
    #[arg(long, global = true, value_name = "F")]
    threshold: Option<f64>,

    /// Integration step in seconds (`dt_s`).
    #[arg(long, global = true, value_name = "SEC")]
    dt: Option<f64>,

    /// Overrides any configuration key, e.g. `--set protocol.tau_s=2e-7`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Schedule CSVs for all four families in both modes.
    Protocol,
    /// Ergotropy traces and charging times over the duration sweep.
    Charge,
    /// Free decay from the charged state and its discharge model.
    Discharge,
    /// Unconstrained solutions, functionals and second-variation verdicts.
    Brachistochrone,
    /// Tomographic reconstruction of a state from a charging run.
    Tomography,
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let mut overrides: Vec<(String, Value)> = cli
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<_, _>>()?;
    if let Some(out) = &cli.out {
        overrides.push(("output_dir".into(), Value::String(out.display().to_string())));
    }
    if let Some(seed) = cli.seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::Usage(format!("seed {seed} is too large")))?;
        overrides.push(("seed".into(), Value::Integer(seed)));
    }
    if let Some(t) = cli.threshold {
        overrides.push(("threshold".into(), Value::Float(t)));
    }
    if let Some(dt) = cli.dt {
        overrides.push(("dt_s".into(), Value::Float(dt)));
    }
    let cfg = RawConfig::load(cli.config.as_deref(), &overrides)?.validate()?;
    match cli.command {
        Command::Protocol => cmd_protocol(&cfg),
        Command::Charge => cmd_charge(&cfg),
        Command::Discharge => cmd_discharge(&cfg),
        Command::Brachistochrone => cmd_brachistochrone(&cfg),
        Command::Tomography => cmd_tomography(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::USAGE as u8
            } else {
                exit::OK as u8
            });
        }
    };
    match run(cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
