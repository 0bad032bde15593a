//! Planner and stochastic simulator for atom-by-atom assembly of
//! defect-free two-dimensional dual-species atom arrays.
//!
//! A static grid of optical tweezers is randomly loaded with two atomic
//! species; a movable tweezer then drags atoms one at a time to assemble
//! a demanded pattern. This crate provides:
//!
//! * the lattice model: grids, species, occupancy, target patterns and
//!   site classification ([`lattice`]);
//! * path search for the movable tweezer along eight azimuths with
//!   obstacle avoidance ([`pathing`]);
//! * the enhanced heuristic planner, its four-direction baseline and a
//!   greedy comparison baseline ([`planner`]), plus a replay validator
//!   ([`replay`]);
//! * a seeded stochastic executor with transport, imaging and vacuum
//!   loss channels ([`physics`]);
//! * an experiment harness for move-count scaling, multi-cycle filling
//!   statistics, defect histograms, algorithm comparisons and loss-model
//!   calibration ([`bench`]);
//! * a thin command-line front end ([`cli`], [`config`]).
//!
//! Start with the runnable programs under `examples/`; each demonstrates
//! one capability end to end.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod gridio;
pub mod lattice;
pub mod pathing;
pub mod physics;
pub mod planner;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
pub use lattice::{
    classify, count_defects, feasibility, filling_fraction, load_random, make_pattern,
    ArrayState, Demand, GridGeometry, Mask, Occupancy, PatternKind, Region, SiteClass,
    SiteCoord, Species, TargetPattern,
};
pub use pathing::{
    find_path, path_metrics, segment_clear, Destination, Direction, DirectionMode, Move,
    MoveRules, MoveTiming, Path, PathMetrics, Segment,
};
pub use physics::{
    apply_imaging, apply_vacuum_decay, execute_move, run_cycle, run_trial, CycleReport,
    LossModel, MoveOutcome, TrialReport,
};
pub use planner::{
    compute_depths, greedy_baseline, plan_cycle, plan_repair, plan_single_species, Algorithm,
    MovePlan, PlanStats,
};
pub use replay::{replay, ReplayOutcome};
pub use rng::RandomSource;
