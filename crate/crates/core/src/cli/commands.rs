use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::constrained::ConstraintKind;
use crate::error::Error;
use crate::scenarios::{run_inspection_scenario, run_ugv_scenario, ScenarioKind, ScenarioTrace};
use crate::verify::{run_all, Fault, PropertyReport};

/// Tracking errors of the first steps (robots leaving their start) are left
/// out of the summary maximum.
pub const TRACKING_TRANSIENT: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

type CmdResult<T> = std::result::Result<T, CommandError>;

fn write(dir: &Path, name: &str, contents: &str) -> CmdResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CommandError::Io { path, source })
}

fn prepare_output(cfg: &ScenarioConfig) -> CmdResult<&Path> {
    let dir = cfg.output.dir.as_path();
    fs::create_dir_all(dir).map_err(|source| CommandError::Io { path: dir.to_path_buf(), source })?;
    write(dir, "config.toml", &cfg.to_toml())?;
    Ok(dir)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn run_scenario(cfg: &ScenarioConfig) -> CmdResult<ScenarioTrace> {
    Ok(match cfg.scenario.which {
        ScenarioKind::Inspection => run_inspection_scenario(&cfg.inspection_config())?,
        ScenarioKind::Ugv => run_ugv_scenario(&cfg.ugv_config(cfg.constraints.mode))?,
    })
}

/// Runs the configured scenario. Writes `config.toml`, `trace.csv`,
/// `potential.csv`, `summary.json` and, with Monte Carlo enabled, `mse.csv`.
pub fn cmd_run(cfg: &ScenarioConfig) -> CmdResult<bool> {
    let dir = prepare_output(cfg)?;
    let trace = run_scenario(cfg)?;
    write(dir, "trace.csv", &trace.to_csv()?)?;
    write(dir, "potential.csv", &trace.potential_csv()?)?;
    if let Some(mc) = &trace.monte_carlo {
        write(dir, "mse.csv", &mc.to_csv()?)?;
    }
    let summary = trace.summary(TRACKING_TRANSIENT);
    write(dir, "summary.json", &json(&summary))?;

    let label = match (summary.scenario, summary.mode) {
        (ScenarioKind::Inspection, _) => "inspection".to_string(),
        (ScenarioKind::Ugv, Some(m)) => format!("ugv ({})", mode_label(m)),
        (ScenarioKind::Ugv, None) => "ugv".to_string(),
    };
    println!(
        "{label}: {} steps, potential {:.6} -> {:.6}{}",
        summary.steps,
        summary.initial_potential,
        summary.final_potential,
        if summary.potential_decreased { " (decreased)" } else { "" }
    );
    for e in &summary.mse {
        println!("  step {:>4}: MSE {:.6} [{:.6}, {:.6}]", e.step, e.mse, e.b_minus, e.b_plus);
    }
    for d in &summary.diagnostics {
        println!("  note: {d}");
    }
    println!("outputs in {}", dir.display());
    Ok(true)
}

/// Runs every property suite; writes `verify.json` and prints one line per
/// property. Failing instances go to stderr as JSON.
pub fn cmd_verify(cfg: &ScenarioConfig, fault: Fault) -> CmdResult<bool> {
    let dir = prepare_output(cfg)?;
    let opts = cfg.suite_options(fault);
    let reports: Vec<PropertyReport> = run_all(&opts)?;
    #[derive(Serialize)]
    struct VerifyFile<'a> {
        seed: u64,
        passed: bool,
        properties: &'a [PropertyReport],
    }
    let passed = reports.iter().all(|r| r.passed);
    write(dir, "verify.json", &json(&VerifyFile { seed: cfg.seed, passed, properties: &reports }))?;
    for r in &reports {
        println!("{}", r.line());
    }
    for r in reports.iter().filter(|r| !r.passed) {
        if let Some(inst) = &r.failing_instance {
            eprintln!("failing instance for {}:\n{}", r.name, serde_json::to_string(inst).expect("serializable"));
        }
    }
    println!("{}", if passed { "all properties passed" } else { "some properties FAILED" });
    Ok(passed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub initial_step: usize,
    pub final_step: usize,
    pub mse_initial: f64,
    /// Half-width of the 3-sigma interval of the mean.
    pub half_width_initial: f64,
    pub mse_final: f64,
    pub half_width_final: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub scenario: ScenarioKind,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<TableRow>,
}

impl TableReport {
    pub fn to_csv(&self) -> crate::error::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 csv"))
    }
}

fn mode_label(m: ConstraintKind) -> &'static str {
    match m {
        ConstraintKind::DistanceOnly => "D",
        ConstraintKind::RelativePosition => "RP",
    }
}

fn table_row(label: String, trace: &ScenarioTrace) -> CmdResult<TableRow> {
    let mc = trace
        .monte_carlo
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("the scenario produced no Monte Carlo data".into()))?;
    let (first, last) = match (mc.steps.first(), mc.steps.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::InvalidParameter("empty Monte Carlo data".into()).into()),
    };
    let half = |s: &crate::estimation::ErrorStats| (s.b_plus - s.b_minus) / 2.0;
    Ok(TableRow {
        label,
        initial_step: first.step,
        final_step: last.step,
        mse_initial: first.mean.mse,
        half_width_initial: half(&first.mean),
        mse_final: last.mean.mse,
        half_width_final: half(&last.mean),
        failures: mc.steps.iter().map(|s| s.failures).sum(),
    })
}

/// Monte Carlo at the first and last configurations of the scenario:
/// both constraint models for the UGV (or only `mode`), the unconstrained
/// estimator for the inspection run. Writes `montecarlo.json` and
/// `montecarlo.csv`; elapsed time is printed only.
pub fn cmd_montecarlo(cfg: &ScenarioConfig, mode: Option<ConstraintKind>) -> CmdResult<bool> {
    let dir = prepare_output(cfg)?;
    let trials = cfg.montecarlo.table_trials;
    let mut rows = Vec::new();
    let mut elapsed = Vec::new();
    match cfg.scenario.which {
        ScenarioKind::Ugv => {
            let modes = match mode {
                Some(m) => vec![m],
                None => vec![ConstraintKind::DistanceOnly, ConstraintKind::RelativePosition],
            };
            for m in modes {
                let mut ucfg = cfg.ugv_config(m);
                ucfg.mc_trials = trials;
                let t = Instant::now();
                let trace = run_ugv_scenario(&ucfg)?;
                elapsed.push(t.elapsed().as_secs_f64());
                rows.push(table_row(mode_label(m).to_string(), &trace)?);
            }
        }
        ScenarioKind::Inspection => {
            let mut icfg = cfg.inspection_config();
            icfg.mc_trials = trials;
            icfg.mc_every = icfg.steps;
            let t = Instant::now();
            let trace = run_inspection_scenario(&icfg)?;
            elapsed.push(t.elapsed().as_secs_f64());
            rows.push(table_row("unconstrained".into(), &trace)?);
        }
    }
    let report = TableReport { scenario: cfg.scenario.which, trials, seed: cfg.seed, rows };
    write(dir, "montecarlo.json", &json(&report))?;
    write(dir, "montecarlo.csv", &report.to_csv()?)?;

    println!("Monte Carlo, M = {trials}, seed {}", cfg.seed);
    println!("{:<14} {:>24} {:>24} {:>10}", "estimator", "MSE_0 [m^2]", "MSE_F [m^2]", "ET [s]");
    for (r, t) in report.rows.iter().zip(&elapsed) {
        println!(
            "{:<14} {:>24} {:>24} {:>10.2}",
            r.label,
            format!("{:.6} +- {:.6}", r.mse_initial, r.half_width_initial),
            format!("{:.6} +- {:.6}", r.mse_final, r.half_width_final),
            t
        );
    }
    Ok(true)
}
