//! `monoap`: run built-in or user scenarios, classify trajectory files and
//! inspect attractor fibers.
//!
//! Exit codes: 0 pass, 2 hypothesis failure, 3 numerical non-convergence,
//! 4 invalid input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use monoap_core::io;
use monoap_core::recurrence::{classify, RecurrenceSettings};
use monoap_core::scenario::{builtin_scenario, builtin_scenarios, run, run_attractor, ScenarioConfig, StageStatus};
use monoap_core::Error;

#[derive(Parser)]
#[command(name = "monoap", version, about = "Distinguished recurrent solutions of monotone quasi-periodic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory for JSON and CSV artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for every randomized check
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Forward horizon of the distinguished trajectory
    #[arg(long, global = true)]
    horizon: Option<f64>,

    /// Suppress the human-readable report
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenarios
    List,
    /// Run the full pipeline on a config file or a built-in name
    Run { scenario: String },
    /// Recurrence report for a trajectory CSV (`t,u_1..u_d,theta_1..theta_m`)
    Classify {
        trajectory: PathBuf,
        /// Comma-separated eps values
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05])]
        eps: Vec<f64>,
        /// Almost-period window
        #[arg(long)]
        window: Option<f64>,
    },
    /// Dissipativity estimate, Levinson fiber over theta0 and its invariance
    Attractor { scenario: String },
}

/// A built-in name, or else a path to a JSON config.
fn load_scenario(arg: &str) -> Result<ScenarioConfig, Error> {
    if let Some(cfg) = builtin_scenario(arg) {
        return Ok(cfg);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(Error::Config(format!("`{arg}` is neither a built-in scenario nor an existing file")));
    }
    ScenarioConfig::load(path)
}

fn apply_overrides(cfg: &mut ScenarioConfig, cli: &Cli) -> Result<(), Error> {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(h) = cli.horizon {
        cfg.set_horizon(h)?;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(())
}

fn code_of(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map_or(4, |e| e.exit_code() as u8)
}

fn cmd_list() -> anyhow::Result<u8> {
    for cfg in builtin_scenarios() {
        let tag = cfg.expected_failure.map(|s| format!(" [expected failure: {s}]")).unwrap_or_default();
        println!("{:<4} {}{tag}", cfg.name, cfg.description);
    }
    Ok(0)
}

fn cmd_run(cli: &Cli, scenario: &str) -> anyhow::Result<u8> {
    let mut cfg = load_scenario(scenario)?;
    apply_overrides(&mut cfg, cli)?;
    let outcome = run(&cfg).with_context(|| format!("running scenario {}", cfg.name))?;
    let s = &outcome.summary;
    if !cli.quiet {
        println!("scenario {}", s.scenario);
        for st in &s.stages {
            let label = match st.status {
                StageStatus::Pass => "pass",
                StageStatus::Fail => "FAIL",
                StageStatus::NotRun => "-",
            };
            println!("  {:<14} {label}", st.stage.to_string());
        }
        if let Some(sol) = &outcome.solution {
            println!("  gamma0 = {:?} (tail diameter {:.3e})", sol.gamma0, sol.gamma.tail_diameter);
            for row in &sol.comparability.rows {
                println!(
                    "  comparability eps = {}: delta = {:.3e}, witnesses = {}",
                    row.eps, row.delta, row.witness_count
                );
            }
        }
        if let Some(err) = &s.error {
            println!("  error: {err}");
        }
        if let Some(expected) = s.expected_failure {
            let met = if s.expectation_met { "met" } else { "NOT met" };
            println!("  expected failure at {expected}: {met}");
        }
        if let Some(dir) = &cfg.output_dir {
            println!("  artifacts in {}", dir.display());
        }
    }
    Ok(s.exit_code as u8)
}

fn cmd_classify(cli: &Cli, path: &Path, eps: &[f64], window: Option<f64>) -> anyhow::Result<u8> {
    let traj = io::read_trajectory_csv(path)?;
    let settings = RecurrenceSettings { eps_list: eps.to_vec(), window, ..RecurrenceSettings::default() };
    let report = classify(&traj, &settings)?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        io::write_json(&dir.join("recurrence.json"), &report)?;
        io::write_eps_table_csv(&dir.join("recurrence_eps.csv"), &report.eps_table)?;
    }
    if !cli.quiet {
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(0)
}

fn cmd_attractor(cli: &Cli, scenario: &str) -> anyhow::Result<u8> {
    let mut cfg = load_scenario(scenario)?;
    apply_overrides(&mut cfg, cli)?;
    let report = run_attractor(&cfg)?;
    if !cli.quiet {
        println!("scenario {}", report.scenario);
        println!("  absorbing radius r = {:.4}", report.dissipativity.r);
        println!(
            "  fiber over {:?}: {} point(s), residual {:.3e}",
            report.fiber.base.phases(),
            report.fiber.cloud.len(),
            report.fiber.hausdorff_residual
        );
        for inv in &report.invariance {
            println!("  invariance t = {}: Hausdorff {:.3e} ({})", inv.t, inv.distance, if inv.pass { "pass" } else { "FAIL" });
        }
    }
    Ok(if report.invariance.iter().all(|i| i.pass) { 0 } else { 3 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 4 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::List => cmd_list(),
        Command::Run { scenario } => cmd_run(&cli, scenario),
        Command::Classify { trajectory, eps, window } => cmd_classify(&cli, trajectory, eps, *window),
        Command::Attractor { scenario } => cmd_attractor(&cli, scenario),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code_of(&err))
        }
    }
}
