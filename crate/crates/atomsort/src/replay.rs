//! Lossless plan replay and legality checking.
//!
//! The validator replays a plan against a starting state, enforcing at
//! every step what the hardware would enforce: the source holds the
//! recorded species, the landing site is empty, and every site the
//! tweezer passes over is empty. It reports the first illegal move (if
//! any) and the final classification, which is also how non-partial plans
//! are proven to assemble a defect-free array.

use crate::error::Result;
use crate::gridio::state_fingerprint;
use crate::lattice::{count_defects, filling_fraction, ArrayState, Occupancy, TargetPattern};
use crate::pathing::{segment_clear, Destination, Move, MoveRules};
use crate::planner::MovePlan;

/// Result of replaying a plan.
#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub legal: bool,
    /// Index and reason of the first illegal move, when any.
    pub first_illegal: Option<(usize, String)>,
    /// Whether the plan's fingerprint matches the provided state; `None`
    /// when the plan does not carry one.
    pub fingerprint_matches: Option<bool>,
    pub defect_free: bool,
    pub filling_fraction: f64,
    pub final_state: ArrayState,
}

pub(crate) fn check_move(state: &ArrayState, mv: &Move) -> std::result::Result<(), String> {
    let geometry = state.geometry();
    if !geometry.contains(mv.source) {
        return Err(format!("source {} is off the grid", mv.source));
    }
    match state.occupancy(mv.source) {
        Occupancy::Empty => return Err(format!("source {} is empty", mv.source)),
        Occupancy::Occupied(s) if s != mv.species => {
            return Err(format!(
                "source {} holds {} but the move recorded {}",
                mv.source,
                s.letter(),
                mv.species.letter()
            ))
        }
        Occupancy::Occupied(_) => {}
    }
    let Destination::Site(dest) = mv.destination else {
        return Ok(()); // discards only need an occupied source
    };
    if !geometry.contains(dest) {
        return Err(format!("destination {dest} is off the grid"));
    }
    if mv.path.start() != Some(mv.source) {
        return Err("path does not start at the source".into());
    }
    if mv.path.end(geometry) != Some(dest) {
        return Err("path does not end at the destination".into());
    }
    // Physical clearance only; direction mode and segment caps are
    // planning-time constraints, not replay constraints.
    let clearance = MoveRules {
        strict_diagonal: false,
        ..MoveRules::default()
    };
    for segment in mv.path.segments() {
        match segment_clear(state, segment, &clearance) {
            Ok(true) => {}
            Ok(false) => {
                return Err(format!(
                    "segment {}{} from {} crosses an occupied site",
                    segment.direction.token(),
                    segment.length,
                    segment.from
                ))
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(())
}

/// Replays `plan` against `state`, stopping at the first illegal move.
pub fn replay(plan: &MovePlan, state: &ArrayState, pattern: &TargetPattern) -> Result<ReplayOutcome> {
    state.geometry().check_matches(pattern.geometry())?;
    let fingerprint_matches = if plan.planned_for.is_empty() {
        None
    } else {
        Some(plan.planned_for == state_fingerprint(state))
    };
    let mut work = state.clone();
    let mut first_illegal = None;
    for (index, mv) in plan.moves.iter().enumerate() {
        if let Err(reason) = check_move(&work, mv) {
            first_illegal = Some((index, reason));
            break;
        }
        let species = work.take(mv.source).expect("checked source occupancy");
        if let Destination::Site(dest) = mv.destination {
            work.set(dest, Occupancy::Occupied(species));
        }
    }
    let defects = count_defects(&work, pattern);
    Ok(ReplayOutcome {
        legal: first_illegal.is_none(),
        first_illegal,
        fingerprint_matches,
        defect_free: defects.is_defect_free(),
        filling_fraction: filling_fraction(&work, pattern),
        final_state: work,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridio::{pattern_from_ascii, state_from_ascii};
    use crate::lattice::{SiteCoord, Species};
    use crate::pathing::Path;
    use crate::planner::Algorithm;

    #[test]
    fn empty_plan_on_defect_free_state_is_legal_and_defect_free() {
        let state = state_from_ascii("AB\n..\n").unwrap();
        let pattern = pattern_from_ascii("ab\n..\n").unwrap();
        let plan = MovePlan {
            algorithm: Algorithm::Hha8,
            planned_for: String::new(),
            moves: vec![],
            partial: false,
            residual: vec![],
        };
        let outcome = replay(&plan, &state, &pattern).unwrap();
        assert!(outcome.legal);
        assert!(outcome.defect_free);
        assert_eq!(outcome.filling_fraction, 1.0);
        assert_eq!(outcome.fingerprint_matches, None);
    }

    #[test]
    fn occupied_destination_is_illegal_at_that_move() {
        let state = state_from_ascii("A.B\n...\n").unwrap();
        let pattern = pattern_from_ascii("...\n...\n").unwrap();
        let bad = Move::transfer(
            SiteCoord::new(0, 0),
            SiteCoord::new(2, 0),
            Path::from_compact(SiteCoord::new(0, 0), "E2").unwrap(),
            Species::A,
        );
        let plan = MovePlan {
            algorithm: Algorithm::Hha8,
            planned_for: String::new(),
            moves: vec![bad],
            partial: false,
            residual: vec![],
        };
        let outcome = replay(&plan, &state, &pattern).unwrap();
        assert!(!outcome.legal);
        let (index, reason) = outcome.first_illegal.unwrap();
        assert_eq!(index, 0);
        assert!(reason.contains("occupied"), "{reason}");
    }

    #[test]
    fn species_mismatch_is_illegal() {
        let state = state_from_ascii("B..\n").unwrap();
        let pattern = pattern_from_ascii("...\n").unwrap();
        let mv = Move::transfer(
            SiteCoord::new(0, 0),
            SiteCoord::new(2, 0),
            Path::from_compact(SiteCoord::new(0, 0), "E2").unwrap(),
            Species::A,
        );
        let plan = MovePlan {
            algorithm: Algorithm::Hha8,
            planned_for: String::new(),
            moves: vec![mv],
            partial: false,
            residual: vec![],
        };
        let outcome = replay(&plan, &state, &pattern).unwrap();
        assert!(!outcome.legal);
    }

    #[test]
    fn fingerprint_mismatch_is_reported() {
        let state = state_from_ascii("A.\n..\n").unwrap();
        let other = state_from_ascii(".A\n..\n").unwrap();
        let pattern = pattern_from_ascii("..\n..\n").unwrap();
        let plan = MovePlan {
            algorithm: Algorithm::Hha8,
            planned_for: crate::gridio::state_fingerprint(&other),
            moves: vec![],
            partial: false,
            residual: vec![],
        };
        let outcome = replay(&plan, &state, &pattern).unwrap();
        assert_eq!(outcome.fingerprint_matches, Some(false));
    }
}
