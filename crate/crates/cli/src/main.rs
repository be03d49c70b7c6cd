use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gbdei_cli::{
    apply_overrides, converge, default_space_levels, default_time_levels, desk_space_sweep, run,
    SweepMode, EXIT_INVALID_CONFIG,
};
use gbdei_core::config::valid_presets;
use gbdei_core::{parse_config, preset_case, ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "gbdei", version, about = "Good Boussinesq solver: runs, convergence sweeps and preset cases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Source {
    /// Configuration file (`key = value` lines).
    config: Option<PathBuf>,
    /// Start from a preset instead of (or before) a file.
    #[arg(long)]
    preset: Option<String>,
    /// Override one key, e.g. `--set tau=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Time,
    Space,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration and write CSV artifacts.
    Run(Source),
    /// Tabulate final-time errors over several step sizes or grids.
    Converge {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "time")]
        mode: Mode,
        /// Comma-separated levels: step sizes (time) or mode counts (space).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// Keep the configured tau and T in a spatial sweep instead of the desk defaults.
        #[arg(long)]
        keep_time: bool,
        /// Order-table path; defaults to `<out_dir>/order_<mode>.csv`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the expanded configuration of a preset.
    Preset { id: String },
    /// List preset identifiers.
    Presets,
}

enum Failure {
    Config(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(source: &Source) -> Result<ExperimentConfig, Failure> {
    let mut text = match &source.config {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?,
        None => String::new(),
    };
    let mut overrides = Vec::new();
    if let Some(id) = &source.preset {
        overrides.push(("preset".to_string(), id.clone()));
    }
    for item in &source.overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if source.config.is_none() && overrides.is_empty() {
        return Err(Failure::Config("give a configuration file or --preset".into()));
    }
    text = apply_overrides(&text, &overrides);
    Ok(parse_config(&text)?)
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Run(source) => {
            let config = load(&source)?;
            let summary = run(&config)?;
            for r in &summary.final_errors {
                println!("t={} m={} e_z={:e} e_dz={:e} total={:e}", r.t, r.m, r.e_z, r.e_dz, r.total);
            }
            println!("output: {}", config.out_dir.display());
            println!("{}", summary.status.status_line());
            Ok(summary.status.exit_code())
        }
        Command::Converge {
            source,
            mode,
            levels,
            keep_time,
            output,
        } => {
            let mut config = load(&source)?;
            let (mode, default_levels) = match mode {
                Mode::Time => (SweepMode::Time, default_time_levels()),
                Mode::Space => {
                    if !keep_time {
                        config = desk_space_sweep(config);
                    }
                    (SweepMode::Space, default_space_levels())
                }
            };
            let levels = levels.unwrap_or(default_levels);
            let table = converge(&config, mode, &levels)?;
            let path = output.unwrap_or_else(|| config.out_dir.join(format!("order_{}.csv", mode.name())));
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
            }
            let csv = table.to_csv();
            fs::write(&path, &csv).with_context(|| format!("cannot write {}", path.display()))?;
            print!("{csv}");
            println!("output: {}", path.display());
            let diverged = table.rows.iter().filter(|r| r.errors.is_none()).count();
            if diverged > 0 {
                return Err(anyhow!("{diverged} level(s) diverged").into());
            }
            Ok(0)
        }
        Command::Preset { id } => {
            print!("{}", preset_case(&id)?.to_config_text());
            Ok(0)
        }
        Command::Presets => {
            for id in valid_presets().split(", ") {
                println!("{id}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(message)) => {
            eprintln!("invalid config: {message}");
            ExitCode::from(EXIT_INVALID_CONFIG)
        }
        Err(Failure::Other(e)) => {
            // validation errors surfacing from the drivers are still config errors
            if let Some(c) = e.downcast_ref::<ConfigError>() {
                eprintln!("invalid config: {c}");
                return ExitCode::from(EXIT_INVALID_CONFIG);
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
