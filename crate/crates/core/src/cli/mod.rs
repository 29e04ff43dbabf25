//! Command-line front end: `run`, `verify` and `montecarlo`.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{cmd_montecarlo, cmd_run, cmd_verify, TableReport, TableRow, TRACKING_TRANSIENT};
pub use config::{
    ConfigError, ConstraintSection, InspectionSetup, MonteCarloSection, NetworkSection, NoiseSection, OutputSection,
    PotentialSection, ScenarioConfig, ScenarioSection, UgvSetup, VerifySection,
};

use crate::constrained::ConstraintKind;
use crate::scenarios::ScenarioKind;
use crate::verify::Fault;

/// Exit status: success.
pub const EXIT_OK: u8 = 0;
/// Exit status: a property failed or a run could not complete.
pub const EXIT_FAILURE: u8 = 1;
/// Exit status: the configuration or the command line is invalid.
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "localizability", version, about = "Localizability potentials for range-measuring robot networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Constraint model of the UGV scenario.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    pub scenario: Option<ScenarioArg>,
    /// Deliberate fault for checking that `verify` catches it.
    #[arg(long, global = true, value_enum, hide = true)]
    pub fault: Option<FaultArg>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Runs the configured scenario and writes its trace, summary and plot data.
    Run,
    /// Runs the property suites and reports pass/fail per property.
    Verify,
    /// Monte Carlo MSE table at the first and last scenario configurations.
    Montecarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "D")]
    D,
    #[value(name = "RP")]
    Rp,
}

impl From<ModeArg> for ConstraintKind {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::D => ConstraintKind::DistanceOnly,
            ModeArg::Rp => ConstraintKind::RelativePosition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Inspection,
    Ugv,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Inspection => ScenarioKind::Inspection,
            ScenarioArg::Ugv => ScenarioKind::Ugv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    SignFlip,
}

/// Loads the configuration and applies the command-line overrides.
pub fn effective_config(args: &CommonArgs) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(mode) = args.mode {
        cfg.constraints.mode = mode.into();
    }
    if let Some(s) = args.scenario {
        cfg.scenario.which = s.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `argv`, dispatches and maps the outcome to an exit status.
pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    let cfg = match effective_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let fault = match cli.common.fault {
        Some(FaultArg::SignFlip) => Fault::GradientSignFlip,
        None => Fault::None,
    };
    let explicit_mode = cli.common.mode.map(ConstraintKind::from);
    let outcome = match cli.command {
        Command::Run => cmd_run(&cfg),
        Command::Verify => cmd_verify(&cfg, fault),
        Command::Montecarlo => cmd_montecarlo(&cfg, explicit_mode),
    };
    match outcome {
        Ok(true) => ExitCode::from(EXIT_OK),
        Ok(false) => ExitCode::from(EXIT_FAILURE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
