//! Stochastic execution of plans and rearrangement cycles.
//!
//! Loss channels: transport (pick-up, per-traversed-site transit, and
//! release efficiencies), fluorescence imaging (own-species survival plus
//! cross-talk from the other species' probe light in dual-species
//! readouts), and vacuum lifetime decay over the cycle duration. All
//! randomness flows through the caller's [`RandomSource`], so a trial is
//! a pure function of its `(seed, stream)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    count_defects, filling_fraction, load_random, ArrayState, GridGeometry, Occupancy,
    SiteClass, SiteCoord, Species, TargetPattern,
};
use crate::pathing::{path_metrics, Destination, Move, MoveRules, MoveTiming};
use crate::planner::{plan_cycle, Algorithm};
use crate::replay::check_move;
use crate::rng::RandomSource;

/// Default vacuum-limited trap lifetime, seconds.
pub const DEFAULT_TAU_VACUUM_S: f64 = 29.0;

/// All stochastic parameters of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    /// Probability a site traps an atom during loading.
    pub p_load: f64,
    /// Probability a loaded atom is species A.
    pub r_a: f64,
    /// Pick-up efficiency of the movable tweezer.
    pub eta_pick: f64,
    /// Release efficiency into the target site.
    pub eta_release: f64,
    /// Survival per lattice site traversed during transport.
    pub eta_transit_per_site: f64,
    /// Survival of an atom under its own species' probe light.
    pub q_image_same: f64,
    /// Survival of a species-A atom under the B probe (cross-talk).
    pub q_image_cross_a: f64,
    /// Survival of a species-B atom under the A probe (cross-talk).
    pub q_image_cross_b: f64,
    /// Vacuum-limited lifetime, seconds.
    pub tau_vacuum_s: f64,
    /// Imaging exposure per species, milliseconds.
    pub t_image_ms: f64,
    /// Movable-tweezer timing.
    pub timing: MoveTiming,
}

impl Default for LossModel {
    fn default() -> Self {
        Self {
            p_load: 0.6,
            r_a: 0.5,
            eta_pick: 0.99,
            eta_release: 0.99,
            eta_transit_per_site: 0.999,
            q_image_same: 0.992,
            q_image_cross_a: 0.997,
            q_image_cross_b: 0.997,
            tau_vacuum_s: DEFAULT_TAU_VACUUM_S,
            t_image_ms: 20.0,
            timing: MoveTiming::default(),
        }
    }
}

impl LossModel {
    /// Perfect transfer, perfect imaging, effectively infinite lifetime.
    pub fn lossless() -> Self {
        Self {
            eta_pick: 1.0,
            eta_release: 1.0,
            eta_transit_per_site: 1.0,
            q_image_same: 1.0,
            q_image_cross_a: 1.0,
            q_image_cross_b: 1.0,
            tau_vacuum_s: 1e12,
            ..Self::default()
        }
    }

    /// Sets both cross-talk survivals at once.
    pub fn with_symmetric_cross(mut self, q_image_cross: f64) -> Self {
        self.q_image_cross_a = q_image_cross;
        self.q_image_cross_b = q_image_cross;
        self
    }

    pub fn q_image_cross(&self, species: Species) -> f64 {
        match species {
            Species::A => self.q_image_cross_a,
            Species::B => self.q_image_cross_b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("p_load", self.p_load),
            ("r_a", self.r_a),
            ("eta_pick", self.eta_pick),
            ("eta_release", self.eta_release),
            ("eta_transit_per_site", self.eta_transit_per_site),
            ("q_image_same", self.q_image_same),
            ("q_image_cross_a", self.q_image_cross_a),
            ("q_image_cross_b", self.q_image_cross_b),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability { name, value });
            }
        }
        for (name, value) in [
            ("tau_vacuum_s", self.tau_vacuum_s),
            ("t_image_ms", self.t_image_ms),
            ("t_pick_ms", self.timing.t_pick_ms),
            ("t_transport_floor_ms", self.timing.t_transport_floor_ms),
            ("t_release_ms", self.timing.t_release_ms),
            ("speed_um_per_ms", self.timing.speed_um_per_ms),
        ] {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive",
                });
            }
        }
        Ok(())
    }
}

/// Stage at which a transported atom was lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LossStage {
    Pickup,
    Transit,
    Release,
}

/// Outcome of executing one planned move against the live state.
#[derive(Debug, Clone, PartialEq)]
pub enum MoveOutcome {
    Succeeded,
    /// The atom was lost at the given stage; `site` is where it died.
    Lost { stage: LossStage, site: SiteCoord },
    /// The move was illegal against the runtime state (an earlier loss
    /// changed the board) and was skipped.
    Aborted { reason: String },
}

/// Executes one move. Success probability is
/// `eta_pick * eta_transit_per_site^traversed * eta_release`; on failure
/// the atom is removed at the sampled stage. Discards always succeed in
/// removing their atom.
pub fn execute_move(
    state: &mut ArrayState,
    mv: &Move,
    loss: &LossModel,
    rng: &mut RandomSource,
) -> MoveOutcome {
    if let Err(reason) = check_move(state, mv) {
        return MoveOutcome::Aborted { reason };
    }
    let Destination::Site(dest) = mv.destination else {
        state.take(mv.source);
        return MoveOutcome::Succeeded;
    };
    if !rng.chance(loss.eta_pick) {
        state.take(mv.source);
        return MoveOutcome::Lost {
            stage: LossStage::Pickup,
            site: mv.source,
        };
    }
    let geometry = *state.geometry();
    for segment in mv.path.segments() {
        for step in 1..=segment.length {
            let site = segment
                .site_at(step, &geometry)
                .expect("legal move stays on the grid");
            if !rng.chance(loss.eta_transit_per_site) {
                state.take(mv.source);
                return MoveOutcome::Lost {
                    stage: LossStage::Transit,
                    site,
                };
            }
        }
    }
    if !rng.chance(loss.eta_release) {
        state.take(mv.source);
        return MoveOutcome::Lost {
            stage: LossStage::Release,
            site: dest,
        };
    }
    let species = state.take(mv.source).expect("checked source occupancy");
    state.set(dest, Occupancy::Occupied(species));
    MoveOutcome::Succeeded
}

/// Applies one readout. Dual-species readouts expose every atom to its
/// own probe and to the other species' probe; single-species readouts
/// apply own-species survival only. Returns the lost atoms.
pub fn apply_imaging(
    state: &mut ArrayState,
    loss: &LossModel,
    dual_species: bool,
    rng: &mut RandomSource,
) -> Vec<(SiteCoord, Species)> {
    let atoms: Vec<(SiteCoord, Species)> = state.occupied_sites().collect();
    let mut lost = Vec::new();
    for (site, species) in atoms {
        let survival = if dual_species {
            loss.q_image_same * loss.q_image_cross(species)
        } else {
            loss.q_image_same
        };
        if !rng.chance(survival) {
            state.take(site);
            lost.push((site, species));
        }
    }
    lost
}

/// Applies vacuum decay over `elapsed_ms`: each atom independently
/// survives with probability `exp(-elapsed / tau)`.
pub fn apply_vacuum_decay(
    state: &mut ArrayState,
    elapsed_ms: f64,
    loss: &LossModel,
    rng: &mut RandomSource,
) -> Vec<(SiteCoord, Species)> {
    debug_assert!(elapsed_ms >= 0.0);
    let survival = (-(elapsed_ms / 1000.0) / loss.tau_vacuum_s).exp();
    let atoms: Vec<(SiteCoord, Species)> = state.occupied_sites().collect();
    let mut lost = Vec::new();
    for (site, species) in atoms {
        if !rng.chance(survival) {
            state.take(site);
            lost.push((site, species));
        }
    }
    lost
}

/// Metrics of one rearrangement cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle_index: usize,
    pub moves_attempted: usize,
    pub moves_succeeded: usize,
    pub moves_aborted: usize,
    pub atoms_discarded: usize,
    pub atoms_lost_transport: usize,
    pub atoms_lost_imaging: usize,
    pub atoms_lost_vacuum: usize,
    /// Finished targets over total targets, measured after imaging.
    pub filling_fraction_after: f64,
    pub defect_free: bool,
    /// Defect-free restricted to species-A target sites.
    pub defect_free_a: bool,
    /// Defect-free restricted to species-B target sites.
    pub defect_free_b: bool,
    pub model_time_elapsed_ms: f64,
}

fn species_defect_free(state: &ArrayState, pattern: &TargetPattern, species: Species) -> bool {
    pattern
        .target_sites()
        .filter(|&(_, s)| s == species)
        .all(|(site, _)| crate::lattice::class_at(state, pattern, site) == SiteClass::Finished)
}

/// Runs one cycle in place: plan on the current state, execute the moves
/// in order with transport losses, apply vacuum decay over the cycle
/// duration, then image (which both loses atoms and reveals the state the
/// next cycle plans from).
pub fn run_cycle(
    state: &mut ArrayState,
    pattern: &TargetPattern,
    rules: &MoveRules,
    algorithm: Algorithm,
    loss: &LossModel,
    cycle_index: usize,
    rng: &mut RandomSource,
) -> Result<CycleReport> {
    let plan = plan_cycle(state, pattern, rules, algorithm)?;
    let pitch = state.geometry().pitch_um;
    let dual = pattern.is_dual_species();

    let mut elapsed_ms = 0.0;
    let mut moves_succeeded = 0;
    let mut moves_aborted = 0;
    let mut atoms_discarded = 0;
    let mut atoms_lost_transport = 0;
    for mv in &plan.moves {
        match execute_move(state, mv, loss, rng) {
            MoveOutcome::Succeeded => {
                moves_succeeded += 1;
                if mv.is_discard() {
                    atoms_discarded += 1;
                }
                elapsed_ms += path_metrics(&mv.path, pitch, &loss.timing).duration_ms;
            }
            MoveOutcome::Lost { .. } => {
                atoms_lost_transport += 1;
                elapsed_ms += path_metrics(&mv.path, pitch, &loss.timing).duration_ms;
            }
            // Skipped moves cost no model time.
            MoveOutcome::Aborted { .. } => moves_aborted += 1,
        }
    }
    let exposures = if dual { 2.0 } else { 1.0 };
    elapsed_ms += exposures * loss.t_image_ms;

    let atoms_lost_vacuum = apply_vacuum_decay(state, elapsed_ms, loss, rng).len();
    let atoms_lost_imaging = apply_imaging(state, loss, dual, rng).len();

    let defects = count_defects(state, pattern);
    Ok(CycleReport {
        cycle_index,
        moves_attempted: plan.moves.len(),
        moves_succeeded,
        moves_aborted,
        atoms_discarded,
        atoms_lost_transport,
        atoms_lost_imaging,
        atoms_lost_vacuum,
        filling_fraction_after: filling_fraction(state, pattern),
        defect_free: defects.is_defect_free(),
        defect_free_a: species_defect_free(state, pattern, Species::A),
        defect_free_b: species_defect_free(state, pattern, Species::B),
        model_time_elapsed_ms: elapsed_ms,
    })
}

/// Everything recorded about one Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub stream: u64,
    pub algorithm: Algorithm,
    /// Echo of the parameters the trial ran under.
    pub loss_model: LossModel,
    pub cycles: Vec<CycleReport>,
    pub final_atoms: usize,
    pub final_state_rows: Vec<String>,
}

impl TrialReport {
    pub fn defect_free_at(&self, cycle_index: usize) -> bool {
        self.cycles
            .get(cycle_index - 1)
            .map(|c| c.defect_free)
            .unwrap_or(false)
    }
}

/// Loads once, then runs `n_cycles` rearrangement cycles.
pub fn run_trial(
    geometry: GridGeometry,
    pattern: &TargetPattern,
    rules: &MoveRules,
    algorithm: Algorithm,
    loss: &LossModel,
    n_cycles: usize,
    rng: &mut RandomSource,
) -> Result<TrialReport> {
    loss.validate()?;
    if n_cycles == 0 {
        return Err(Error::Config("n_cycles must be at least 1".into()));
    }
    let mut state = load_random(geometry, loss, rng)?;
    let mut cycles = Vec::with_capacity(n_cycles);
    for cycle_index in 1..=n_cycles {
        cycles.push(run_cycle(
            &mut state,
            pattern,
            rules,
            algorithm,
            loss,
            cycle_index,
            rng,
        )?);
    }
    Ok(TrialReport {
        seed: rng.seed(),
        stream: rng.stream(),
        algorithm,
        loss_model: loss.clone(),
        final_atoms: state.atom_count(),
        final_state_rows: crate::gridio::state_to_ascii(&state)
            .lines()
            .map(String::from)
            .collect(),
        cycles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridio::{pattern_from_ascii, state_from_ascii};
    use crate::lattice::{make_pattern, PatternKind, Region};
    use crate::pathing::Path;

    fn one_step_move() -> (ArrayState, Move) {
        let state = state_from_ascii("A.\n").unwrap();
        let mv = Move::transfer(
            SiteCoord::new(0, 0),
            SiteCoord::new(1, 0),
            Path::from_compact(SiteCoord::new(0, 0), "E1").unwrap(),
            Species::A,
        );
        (state, mv)
    }

    #[test]
    fn lossless_move_always_succeeds() {
        let loss = LossModel::lossless();
        let mut rng = RandomSource::new(1, 0);
        for _ in 0..100 {
            let (mut state, mv) = one_step_move();
            assert_eq!(execute_move(&mut state, &mv, &loss, &mut rng), MoveOutcome::Succeeded);
            assert!(state.is_empty(SiteCoord::new(0, 0)));
            assert!(!state.is_empty(SiteCoord::new(1, 0)));
        }
    }

    #[test]
    fn zero_pick_efficiency_loses_at_pickup() {
        let mut loss = LossModel::lossless();
        loss.eta_pick = 0.0;
        let mut rng = RandomSource::new(1, 0);
        let (mut state, mv) = one_step_move();
        let outcome = execute_move(&mut state, &mv, &loss, &mut rng);
        assert_eq!(
            outcome,
            MoveOutcome::Lost {
                stage: LossStage::Pickup,
                site: SiteCoord::new(0, 0)
            }
        );
        assert_eq!(state.atom_count(), 0);
    }

    #[test]
    fn illegal_runtime_move_is_aborted_not_lost() {
        let loss = LossModel::lossless();
        let mut rng = RandomSource::new(1, 0);
        let mut state = state_from_ascii("..\n").unwrap();
        let (_, mv) = one_step_move();
        assert!(matches!(
            execute_move(&mut state, &mv, &loss, &mut rng),
            MoveOutcome::Aborted { .. }
        ));
    }

    #[test]
    fn move_success_rate_matches_closed_form() {
        // eta_pick = eta_release = 0.999, eta_transit = 0.9995 over five
        // traversed sites: p = 0.999^2 * 0.9995^5.
        let mut loss = LossModel::lossless();
        loss.eta_pick = 0.999;
        loss.eta_release = 0.999;
        loss.eta_transit_per_site = 0.9995;
        let expected = 0.999f64.powi(2) * 0.9995f64.powi(5);

        let state0 = state_from_ascii("A.....\n").unwrap();
        let mv = Move::transfer(
            SiteCoord::new(0, 0),
            SiteCoord::new(5, 0),
            Path::from_compact(SiteCoord::new(0, 0), "E5").unwrap(),
            Species::A,
        );
        let n = 100_000;
        let mut rng = RandomSource::new(11, 0);
        let mut successes = 0;
        for _ in 0..n {
            let mut state = state0.clone();
            if execute_move(&mut state, &mv, &loss, &mut rng) == MoveOutcome::Succeeded {
                successes += 1;
            }
        }
        let rate = successes as f64 / n as f64;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!(
            (rate - expected).abs() < 3.0 * se,
            "rate {rate} vs {expected} +- {}",
            3.0 * se
        );
    }

    #[test]
    fn perfect_imaging_loses_nothing() {
        let loss = LossModel::lossless();
        let mut state = state_from_ascii("AB\nBA\n").unwrap();
        let mut rng = RandomSource::new(2, 0);
        assert!(apply_imaging(&mut state, &loss, true, &mut rng).is_empty());
        assert_eq!(state.atom_count(), 4);
    }

    #[test]
    fn imaging_loss_matches_binomial_expectation() {
        // 120 atoms, q_same = 0.998, q_cross = 0.995: about 0.84 lost per
        // dual readout.
        let mut loss = LossModel::lossless();
        loss.q_image_same = 0.998;
        loss = loss.with_symmetric_cross(0.995);
        let g = GridGeometry::new(12, 10, 5.4).unwrap();
        let mut base = ArrayState::empty(g);
        for site in g.sites() {
            base.set(site, Occupancy::Occupied(Species::A));
        }
        let trials = 10_000;
        let mut rng = RandomSource::new(3, 0);
        let mut total_lost = 0usize;
        for _ in 0..trials {
            let mut state = base.clone();
            total_lost += apply_imaging(&mut state, &loss, true, &mut rng).len();
        }
        let mean = total_lost as f64 / trials as f64;
        let p_lost = 1.0 - 0.998 * 0.995;
        let expected = 120.0 * p_lost;
        let se = (120.0 * p_lost * (1.0 - p_lost) / trials as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs {expected} +- {}",
            3.0 * se
        );
    }

    #[test]
    fn single_species_readout_ignores_cross_talk() {
        let mut loss = LossModel::lossless();
        loss = loss.with_symmetric_cross(0.0);
        let mut state = state_from_ascii("AAAA\n").unwrap();
        let mut rng = RandomSource::new(4, 0);
        // q_same = 1, q_cross = 0: a dual readout would kill everything,
        // a single-species readout nothing.
        assert!(apply_imaging(&mut state, &loss, false, &mut rng).is_empty());
        assert_eq!(state.atom_count(), 4);
    }

    #[test]
    fn zero_elapsed_vacuum_decay_is_lossless() {
        let loss = LossModel::default();
        let mut state = state_from_ascii("AB\n").unwrap();
        let mut rng = RandomSource::new(5, 0);
        assert!(apply_vacuum_decay(&mut state, 0.0, &loss, &mut rng).is_empty());
    }

    #[test]
    fn lossless_trial_is_defect_free_after_one_cycle() {
        let g = GridGeometry::new(10, 10, 5.4).unwrap();
        let pattern = make_pattern(g, &PatternKind::Checkerboard, Region::centered(&g, 4, 4))
            .unwrap();
        let loss = LossModel::lossless();
        let mut rng = RandomSource::new(6, 0);
        let report = run_trial(
            g,
            &pattern,
            &MoveRules::default(),
            Algorithm::Hha8,
            &loss,
            1,
            &mut rng,
        )
        .unwrap();
        assert!(report.cycles[0].defect_free, "{:?}", report.cycles[0]);
        assert_eq!(report.cycles[0].filling_fraction_after, 1.0);
    }

    #[test]
    fn atoms_are_conserved_through_a_lossy_cycle() {
        let g = GridGeometry::new(12, 12, 5.4).unwrap();
        let pattern = make_pattern(g, &PatternKind::Zebra, Region::centered(&g, 6, 6)).unwrap();
        let mut loss = LossModel::default();
        loss.eta_pick = 0.9;
        loss.q_image_same = 0.95;
        loss.tau_vacuum_s = 5.0;
        for stream in 0..20 {
            let mut rng = RandomSource::new(7, stream);
            let mut state = load_random(g, &loss, &mut rng).unwrap();
            let before = state.atom_count();
            let report = run_cycle(
                &mut state,
                &pattern,
                &MoveRules::default(),
                Algorithm::Hha8,
                &loss,
                1,
                &mut rng,
            )
            .unwrap();
            let after = state.atom_count();
            assert_eq!(
                after,
                before
                    - report.atoms_lost_transport
                    - report.atoms_lost_imaging
                    - report.atoms_lost_vacuum
                    - report.atoms_discarded,
                "{report:?}"
            );
        }
    }

    #[test]
    fn trial_reports_are_bit_reproducible() {
        let g = GridGeometry::new(10, 10, 5.4).unwrap();
        let pattern = make_pattern(g, &PatternKind::Checkerboard, Region::centered(&g, 4, 4))
            .unwrap();
        let loss = LossModel::default();
        let run = |seed, stream| {
            let mut rng = RandomSource::new(seed, stream);
            let report = run_trial(
                g,
                &pattern,
                &MoveRules::default(),
                Algorithm::Hha8,
                &loss,
                3,
                &mut rng,
            )
            .unwrap();
            serde_json::to_string(&report).unwrap()
        };
        assert_eq!(run(42, 9), run(42, 9));
        assert_ne!(run(42, 9), run(42, 10));
    }

    #[test]
    fn validate_rejects_bad_parameters() {
        let mut loss = LossModel::default();
        loss.q_image_same = 1.2;
        assert!(loss.validate().is_err());
        let mut loss = LossModel::default();
        loss.tau_vacuum_s = 0.0;
        assert!(loss.validate().is_err());
    }

    #[test]
    fn pattern_species_mode_detection() {
        let dual = pattern_from_ascii("ab\n").unwrap();
        assert!(dual.is_dual_species());
        let single = pattern_from_ascii("aa\n").unwrap();
        assert!(!single.is_dual_species());
    }
}
