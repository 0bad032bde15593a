//! Command-line front end: `plan`, `simulate`, `sweep`, `calibrate` and
//! `validate` subcommands over the library. The binary in `main.rs` only
//! calls [`run`].
//!
//! Exit codes: 0 success, 1 hard error, 2 partial plan (or residual
//! defects in `validate`), 3 illegal plan in `validate`. The distinct
//! partial code lets shell pipelines branch on logjams.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{
    self, calibrate, compare_traversal, defect_histogram, sweep_cycles, sweep_moves_vs_size,
    CalibrationOptions, CalibrationTargets, CycleSweepSpec, MovesVsSizeSpec,
};
use crate::config::{LossSection, RunConfig};
use crate::error::{Error, Result};
use crate::gridio::{
    pattern_from_ascii, pattern_from_toml, state_from_ascii, state_from_toml, state_to_ascii,
};
use crate::lattice::{feasibility, ArrayState, TargetPattern};
use crate::planner::{plan_cycle, Algorithm, MovePlan};
use crate::replay::replay;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_ILLEGAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "atomsort",
    version,
    about = "Planner and stochastic simulator for defect-free dual-species atom-array assembly"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one rearrangement cycle for a state file and write the plan.
    Plan(PlanArgs),
    /// Run seeded Monte-Carlo trials of multi-cycle assembly.
    Simulate(SimulateArgs),
    /// Run an experiment sweep and emit its CSV table.
    Sweep(SweepArgs),
    /// Fit the loss model to target filling fractions.
    Calibrate(CalibrateArgs),
    /// Replay a plan file against a state file and report legality.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count override.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Planner: hha8, hha4 or greedy.
    #[arg(long)]
    algorithm: Option<String>,
    /// Allowed move directions: 4 or 8.
    #[arg(long)]
    directions: Option<u8>,
    /// Require the orthogonal flankers of every diagonal step to be empty.
    #[arg(long)]
    strict_diagonal: bool,
}

impl CommonArgs {
    /// Loads the config (or defaults) and applies the flag overrides.
    fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let (mut config, base) = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => (RunConfig::default(), PathBuf::from(".")),
        };
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.run.trials = trials;
        }
        if let Some(algorithm) = &self.algorithm {
            config.run.algorithm = Algorithm::from_token(algorithm)?;
        }
        if let Some(directions) = self.directions {
            config.rules.directions = directions;
        }
        if self.strict_diagonal {
            config.rules.strict_diagonal = true;
        }
        config.validate()?;
        Ok((config, base))
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// State file (ASCII grid, or the TOML document form for `.toml`).
    #[arg(long)]
    state: PathBuf,
    /// Pattern file; the config's pattern is used when omitted.
    #[arg(long)]
    pattern: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Cycle count override.
    #[arg(long)]
    cycles: Option<usize>,
    /// Also write one JSON record per trial (trials.jsonl).
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// moves-vs-size, cycles, defect-histogram or traversal.
    #[arg(long)]
    kind: String,
    /// Region sides for moves-vs-size, comma separated.
    #[arg(long, default_value = "4,6,8,10,12,14,16")]
    sizes: String,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Target filling fraction after one cycle.
    #[arg(long, default_value_t = 0.9724)]
    target_single_cycle: f64,
    /// Target mean filling fraction over cycles 4..=10.
    #[arg(long, default_value_t = 0.986)]
    target_saturation: f64,
    /// Trials per objective evaluation.
    #[arg(long, default_value_t = 160)]
    trials_per_eval: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// State file the plan should apply to.
    #[arg(long)]
    state: PathBuf,
    /// Pattern file defining targets.
    #[arg(long)]
    pattern: PathBuf,
    /// Plan file to replay.
    #[arg(long)]
    plan: PathBuf,
}

/// Parses the process arguments and runs the selected subcommand,
/// returning the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Plan(args) => cmd_plan(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Calibrate(args) => cmd_calibrate(&args),
        Command::Validate(args) => cmd_validate(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn read_state(path: &Path) -> Result<ArrayState> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "toml") {
        state_from_toml(&text)
    } else {
        state_from_ascii(&text)
    }
}

fn read_pattern(path: &Path) -> Result<TargetPattern> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "toml") {
        pattern_from_toml(&text)
    } else {
        pattern_from_ascii(&text)
    }
}

fn emit(out: &Option<PathBuf>, filename: &str, content: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(filename), content)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct PlanSummary {
    config_hash: String,
    algorithm: &'static str,
    n_moves: usize,
    n_traversed_sites: usize,
    n_discards: usize,
    partial: bool,
    solvable: bool,
    replay_legal: bool,
    replay_defect_free: bool,
}

fn cmd_plan(args: &PlanArgs) -> Result<i32> {
    let (config, base) = args.common.resolve()?;
    let state = read_state(&args.state)?;
    let pattern = match &args.pattern {
        Some(path) => read_pattern(path)?,
        None => config.resolve_pattern(&base)?,
    };
    let rules = config.move_rules()?;
    let feas = feasibility(&state, &pattern)?;
    if !feas.solvable {
        eprintln!(
            "warning: infeasible pattern (A {}/{}, B {}/{}); expect a partial plan",
            feas.available_a, feas.required_a, feas.available_b, feas.required_b
        );
    }
    let plan = plan_cycle(&state, &pattern, &rules, config.run.algorithm)?;
    let outcome = replay(&plan, &state, &pattern)?;
    let stats = plan.stats();
    let summary = PlanSummary {
        config_hash: config.hash(),
        algorithm: plan.algorithm.token(),
        n_moves: stats.n_moves,
        n_traversed_sites: stats.n_traversed_sites,
        n_discards: stats.n_discards,
        partial: stats.partial,
        solvable: feas.solvable,
        replay_legal: outcome.legal,
        replay_defect_free: outcome.defect_free,
    };
    emit(&args.common.out, "plan.txt", &plan.to_text())?;
    emit(
        &args.common.out,
        "plan_stats.toml",
        &toml::to_string(&summary).expect("summary serializes"),
    )?;
    Ok(if plan.partial { EXIT_PARTIAL } else { EXIT_OK })
}

#[derive(Serialize)]
struct SimulateSummary {
    config_hash: String,
    algorithm: &'static str,
    trials: usize,
    n_cycles: usize,
    seed: u64,
    first_cycle_defect_free: f64,
    first_cycle_filling: f64,
    saturation_defect_free: f64,
    saturation_filling: f64,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let (mut config, base) = args.common.resolve()?;
    if let Some(cycles) = args.cycles {
        config.run.n_cycles = cycles;
    }
    config.validate()?;
    let spec = CycleSweepSpec {
        geometry: config.geometry()?,
        pattern: config.resolve_pattern(&base)?,
        rules: config.move_rules()?,
        algorithm: config.run.algorithm,
        loss: config.loss_model(),
        n_cycles: config.run.n_cycles,
        trials: config.run.trials,
        seed: config.run.seed,
    };
    let (points, trials) = sweep_cycles(&spec)?;
    let mut table = bench::cycles_table(&points, &spec);
    table.tag("config_hash", config.hash());
    emit(&args.common.out, "cycles.csv", &table.to_csv())?;

    let (sat_df, sat_fill) = bench::window_means(&points, 4, spec.n_cycles);
    let summary = SimulateSummary {
        config_hash: config.hash(),
        algorithm: spec.algorithm.token(),
        trials: spec.trials,
        n_cycles: spec.n_cycles,
        seed: spec.seed,
        first_cycle_defect_free: points[0].defect_free_prob,
        first_cycle_filling: points[0].filling_mean,
        saturation_defect_free: sat_df,
        saturation_filling: sat_fill,
    };
    emit(
        &args.common.out,
        "summary.toml",
        &toml::to_string(&summary).expect("summary serializes"),
    )?;
    if args.raw {
        let mut lines = String::new();
        for trial in &trials {
            lines.push_str(&serde_json::to_string(trial).expect("trial serializes"));
            lines.push('\n');
        }
        emit(&args.common.out, "trials.jsonl", &lines)?;
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let (config, base) = args.common.resolve()?;
    match args.kind.as_str() {
        "moves-vs-size" => {
            let sizes: Vec<usize> = args
                .sizes
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad size {s:?}")))
                })
                .collect::<Result<_>>()?;
            let spec = MovesVsSizeSpec {
                sizes,
                trials_per_point: config.run.trials.min(1000),
                loss: config.loss_model(),
                rules: config.move_rules()?,
                seed: config.run.seed,
            };
            let points = sweep_moves_vs_size(&spec)?;
            let mut table = bench::moves_vs_size_table(&points, spec.seed);
            table.tag("config_hash", config.hash());
            emit(&args.common.out, "moves_vs_size.csv", &table.to_csv())?;
        }
        "cycles" => {
            let spec = CycleSweepSpec {
                geometry: config.geometry()?,
                pattern: config.resolve_pattern(&base)?,
                rules: config.move_rules()?,
                algorithm: config.run.algorithm,
                loss: config.loss_model(),
                n_cycles: config.run.n_cycles,
                trials: config.run.trials,
                seed: config.run.seed,
            };
            let (points, _) = sweep_cycles(&spec)?;
            let mut table = bench::cycles_table(&points, &spec);
            table.tag("config_hash", config.hash());
            emit(&args.common.out, "cycles.csv", &table.to_csv())?;
        }
        "defect-histogram" => {
            let spec = CycleSweepSpec {
                geometry: config.geometry()?,
                pattern: config.resolve_pattern(&base)?,
                rules: config.move_rules()?,
                algorithm: config.run.algorithm,
                loss: config.loss_model(),
                n_cycles: 1,
                trials: config.run.trials,
                seed: config.run.seed,
            };
            let hist = defect_histogram(&spec)?;
            let mut table = bench::histogram_table(&hist, spec.seed);
            table.tag("config_hash", config.hash());
            emit(&args.common.out, "defect_histogram.csv", &table.to_csv())?;
        }
        "traversal" => {
            let cmp = compare_traversal(
                config.geometry()?,
                &config.resolve_pattern(&base)?,
                &config.move_rules()?,
                &config.loss_model(),
                config.run.trials,
                config.run.seed,
            )?;
            let mut table = bench::traversal_table(&cmp, config.run.seed);
            table.tag("config_hash", config.hash());
            emit(&args.common.out, "traversal.csv", &table.to_csv())?;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown sweep kind {other:?}; expected moves-vs-size, cycles, defect-histogram or traversal"
            )))
        }
    }
    Ok(EXIT_OK)
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<i32> {
    let (config, base) = args.common.resolve()?;
    let targets = CalibrationTargets {
        single_cycle_filling: args.target_single_cycle,
        saturation_filling: args.target_saturation,
    };
    let opts = CalibrationOptions {
        trials_per_eval: args.trials_per_eval,
        seed: config.run.seed,
        ..Default::default()
    };
    let fit = calibrate(
        config.geometry()?,
        &config.resolve_pattern(&base)?,
        &config.move_rules()?,
        targets,
        &opts,
    )?;
    if !fit.converged {
        eprintln!(
            "warning: calibration did not converge (residuals {:+.4} / {:+.4})",
            fit.residual_single_cycle, fit.residual_saturation
        );
    }
    let mut table = bench::calibration_table(&fit);
    table.tag("config_hash", config.hash());
    emit(&args.common.out, "calibration.csv", &table.to_csv())?;

    // A ready-to-use config with the fitted loss model swapped in.
    let mut fitted_config = config.clone();
    fitted_config.loss = LossSection::from_loss_model(&fit.model);
    emit(
        &args.common.out,
        "calibrated_config.toml",
        &fitted_config.to_toml(),
    )?;
    Ok(EXIT_OK)
}

fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let state = read_state(&args.state)?;
    let pattern = read_pattern(&args.pattern)?;
    let plan = MovePlan::from_text(&std::fs::read_to_string(&args.plan)?)?;
    let outcome = replay(&plan, &state, &pattern)?;
    match outcome.fingerprint_matches {
        Some(true) => println!("fingerprint: match"),
        Some(false) => println!("fingerprint: MISMATCH (plan was made for a different state)"),
        None => println!("fingerprint: not recorded"),
    }
    match &outcome.first_illegal {
        None => println!("legal: yes ({} moves)", plan.moves.len()),
        Some((index, reason)) => println!("legal: no; move {index} is illegal: {reason}"),
    }
    println!("defect_free: {}", outcome.defect_free);
    println!("filling_fraction: {:.6}", outcome.filling_fraction);
    println!("final state:\n{}", state_to_ascii(&outcome.final_state));
    if !outcome.legal {
        Ok(EXIT_ILLEGAL)
    } else if !outcome.defect_free {
        Ok(EXIT_PARTIAL)
    } else {
        Ok(EXIT_OK)
    }
}
