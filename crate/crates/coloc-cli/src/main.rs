//! Command line front end: run scenarios, re-derive metrics from logs, and
//! validate configuration files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use coloc::harness::{
    rows_from_csv, write_csv, LogRow, Method, MethodSummary, Report, RobotMetrics, Scenario,
};

#[derive(Parser)]
#[command(name = "coloc", about = "Two-robot cooperative localization simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory logs plus a metrics report.
    Simulate {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the method set, comma separated
        /// (dr,sl,ccl,dcl,ccl-lm,dcl-lm).
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<u32>,
    },
    /// Recompute the metrics report from previously written logs.
    Metrics {
        /// Directory produced by `simulate`.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Check a scenario file and exit.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { scenario, out, seed, methods, trials } => {
            simulate(&scenario, &out, seed, methods, trials)
        }
        Command::Metrics { input } => metrics(&input),
        Command::Validate { scenario } => validate(&scenario),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scenario file {}", path.display()))?;
    Scenario::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
}

fn simulate(
    scenario_path: &Path,
    out: &Path,
    seed: Option<u64>,
    methods: Option<Vec<String>>,
    trials: Option<u32>,
) -> Result<()> {
    let mut scenario = load_scenario(scenario_path)?;
    if let Some(seed) = seed {
        scenario.run.seed = seed;
    }
    if let Some(methods) = methods {
        scenario.run.methods = methods;
    }
    if let Some(trials) = trials {
        scenario.run.trials = trials;
    }
    scenario.validate()?;

    let (outputs, report) = coloc::harness::run_scenario(&scenario)?;
    fs::create_dir_all(out)?;
    for (t, trial) in outputs.iter().enumerate() {
        let dir = out.join(format!("trial_{t:03}"));
        fs::create_dir_all(&dir)?;
        for run in &trial.runs {
            for (robot, rows) in run.rows.iter().enumerate() {
                let path = dir.join(format!("{}_robot{}.csv", run.method.name(), robot + 1));
                write_csv(&path, rows)?;
            }
        }
    }
    let report_path = out.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;

    print_summary(&report);
    println!(
        "\nwrote {} trial director{} and {}",
        outputs.len(),
        if outputs.len() == 1 { "y" } else { "ies" },
        report_path.display()
    );
    Ok(())
}

fn print_summary(report: &Report) {
    println!(
        "scenario `{}`: {} trials from seed {}",
        report.scenario, report.trials, report.base_seed
    );
    println!("method   robot  rmse_x   rmse_y   rmse_pos  max_x    max_y    nees");
    for m in &report.methods {
        for (i, r) in m.robots.iter().enumerate() {
            println!(
                "{:8} r{}   {:.4}   {:.4}   {:.4}    {:.4}   {:.4}   {:.2}",
                m.method, i + 1, r.rmse_x, r.rmse_y, r.rmse_pos, r.max_err_x, r.max_err_y, r.nees_mean
            );
        }
        if let Some(bw) = &m.bandwidth {
            println!(
                "{:8} link: {} sent, {} delivered, {} bytes ({:.1}% below broadcast)",
                m.method,
                bw.packets_sent,
                bw.packets_delivered,
                bw.bytes_delivered,
                100.0 * bw.reduction
            );
        }
    }
}

/// Rebuild the per-method metrics from the CSV logs alone. Bandwidth
/// counters live only in the simulation-time report, so they are absent
/// here.
fn metrics(input: &Path) -> Result<()> {
    let mut trials: Vec<PathBuf> = fs::read_dir(input)
        .with_context(|| format!("reading {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("trial_"))
        })
        .collect();
    trials.sort();
    if trials.is_empty() {
        bail!("no trial_* directories under {}", input.display());
    }

    // method name -> per-trial -> per-robot rows
    let mut by_method: BTreeMap<String, Vec<[Vec<LogRow>; 2]>> = BTreeMap::new();
    for dir in &trials {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            let Some(stem) = name.strip_suffix(".csv") else {
                continue;
            };
            let Some((method, robot)) = stem.rsplit_once("_robot") else {
                continue;
            };
            let robot: usize = robot.parse().context("robot index in filename")?;
            Method::parse(method).map_err(|e| anyhow::anyhow!("{e}"))?;
            let rows = rows_from_csv(&path)?;
            let slot = by_method.entry(method.to_string()).or_default();
            while slot.len() < trials.len() {
                slot.push([Vec::new(), Vec::new()]);
            }
            let trial_idx = trials.iter().position(|t| t == dir).unwrap();
            slot[trial_idx][robot - 1] = rows;
        }
    }

    let mut methods = Vec::new();
    for (method, trials_rows) in &by_method {
        let mut per_trial = Vec::new();
        for robots in trials_rows {
            let mut metrics = Vec::new();
            for rows in robots {
                metrics.push(coloc::harness::compute_metrics(rows)?);
            }
            per_trial.push(metrics);
        }
        let robots: Vec<RobotMetrics> = (0..2)
            .map(|i| RobotMetrics::ensemble(per_trial.iter().map(|t| &t[i])))
            .collect();
        methods.push(MethodSummary {
            method: method.clone(),
            robots,
            per_trial,
            bandwidth: None,
            skipped_updates: 0,
        });
    }
    let report = Report {
        scenario: input.display().to_string(),
        base_seed: 0,
        trials: trials.len() as u32,
        methods,
    };
    print_summary(&report);
    let path = input.join("report_from_logs.json");
    fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    println!("\nwrote {}", path.display());
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    let scenario = load_scenario(path)?;
    println!(
        "ok: scenario `{}` ({} steps of {} s, {} methods, {} trials)",
        scenario.name,
        scenario.time.steps,
        scenario.time.dt,
        scenario.run.methods.len(),
        scenario.run.trials
    );
    Ok(())
}
