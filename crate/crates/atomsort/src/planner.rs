//! Rearrangement planners.
//!
//! Three planners share one engine:
//!
//! * `hha8` — the enhanced heuristic: eight-direction moves, misplaced
//!   atoms corrected first, then voids filled innermost-first, sweeping
//!   until nothing improves. Voids the reservoir cannot reach directly
//!   are repaired by relay chains: a finished atom of the right species
//!   hops into the void and the vacated site is refilled, migrating the
//!   defect outward until the reservoir can inject.
//! * `hha4` — the row/column baseline: the same phases restricted to
//!   four directions, with bent routes executed as one move per straight
//!   leg. Wrong-species atoms block its lanes, which is what makes
//!   logjams possible, and the staged legs roughly double its move count.
//! * `greedy` — a connectivity-agnostic proxy baseline: voids filled in
//!   row-major order from the Euclidean-nearest admissible source,
//!   ignoring depth. It trades longer traversals for the same move
//!   structure and exists for algorithm comparisons.
//!
//! Plans are computed on a working copy of the state and are valid for
//! lossless replay: every move is legal at its point in the sequence, and
//! a non-partial plan replays to a defect-free state.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridio::state_fingerprint;
use crate::lattice::{
    class_at, ArrayState, Occupancy, SiteClass, SiteCoord, Species, TargetPattern,
};
use crate::pathing::{find_path, reach_map, source_scan, Move, MoveRules, Path};

/// Planner selector. The tag pins the historical move rules: `hha4`
/// always plans four-direction staged moves and `hha8` always plans
/// with all eight directions, whatever the base rules say; the greedy
/// proxy uses the base rules unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Hha8,
    Hha4,
    Greedy,
}

impl Algorithm {
    pub fn token(self) -> &'static str {
        match self {
            Algorithm::Hha8 => "hha8",
            Algorithm::Hha4 => "hha4",
            Algorithm::Greedy => "greedy",
        }
    }

    pub fn from_token(token: &str) -> Result<Self> {
        match token {
            "hha8" => Ok(Algorithm::Hha8),
            "hha4" => Ok(Algorithm::Hha4),
            "greedy" => Ok(Algorithm::Greedy),
            other => Err(Error::Parse(format!("unknown algorithm {other:?}"))),
        }
    }

    /// Rules actually used when planning with this algorithm.
    pub fn effective_rules(self, base: &MoveRules) -> MoveRules {
        match self {
            Algorithm::Hha8 => MoveRules {
                directions: crate::pathing::DirectionMode::Eight,
                ..*base
            },
            Algorithm::Hha4 => MoveRules {
                directions: crate::pathing::DirectionMode::Four,
                ..*base
            },
            Algorithm::Greedy => *base,
        }
    }

    /// The row/column baseline cannot drag through a turn: a bent route
    /// is executed as one move per straight leg, parking the atom at each
    /// corner. The enhanced planner drags the whole path in one move.
    fn stages_moves(self) -> bool {
        matches!(self, Algorithm::Hha4)
    }

    /// Relay repair of walled-in voids is an enhanced capability; the
    /// old baseline only fills from directly reachable sources, which is
    /// why its failure rate grows with the array size.
    fn uses_relay(self) -> bool {
        !matches!(self, Algorithm::Hha4)
    }

    fn depth_ordered(self) -> bool {
        !matches!(self, Algorithm::Greedy)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::from_token(s)
    }
}

/// Depth of every target site: boundary targets (8-adjacent to a
/// non-target site or the grid edge) sit at depth 0, and each interior
/// target is one more than its shallowest target neighbour. Innermost
/// voids are filled first so later moves need not cross them.
#[derive(Debug, Clone)]
pub struct DepthMap {
    depths: Vec<Option<u32>>,
}

impl DepthMap {
    pub fn depth(&self, pattern: &TargetPattern, site: SiteCoord) -> Option<u32> {
        self.depths[pattern.geometry().index(site)]
    }

    pub fn max_depth(&self) -> u32 {
        self.depths.iter().flatten().copied().max().unwrap_or(0)
    }
}

/// Computes the depth map of a pattern by multi-source breadth-first
/// search from the boundary targets.
pub fn compute_depths(pattern: &TargetPattern) -> DepthMap {
    let geometry = pattern.geometry();
    let mut depths: Vec<Option<u32>> = vec![None; geometry.n_sites()];
    let mut queue = VecDeque::new();

    let neighbors = |site: SiteCoord| -> Vec<Option<SiteCoord>> {
        let mut out = Vec::with_capacity(8);
        for dc in -1i64..=1 {
            for dr in -1i64..=1 {
                if dc == 0 && dr == 0 {
                    continue;
                }
                let col = site.col as i64 + dc;
                let row = site.row as i64 + dr;
                if col < 0 || row < 0 {
                    out.push(None);
                    continue;
                }
                let n = SiteCoord::new(col as usize, row as usize);
                out.push(geometry.contains(n).then_some(n));
            }
        }
        out
    };

    for (site, _) in pattern.target_sites() {
        let boundary = neighbors(site).iter().any(|n| match n {
            None => true, // grid edge
            Some(n) => pattern.demand(*n).species().is_none(),
        });
        if boundary {
            depths[geometry.index(site)] = Some(0);
            queue.push_back(site);
        }
    }
    while let Some(site) = queue.pop_front() {
        let d = depths[geometry.index(site)].unwrap();
        for n in neighbors(site).into_iter().flatten() {
            if pattern.demand(n).species().is_some() && depths[geometry.index(n)].is_none() {
                depths[geometry.index(n)] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    DepthMap { depths }
}

/// Ordered move list transforming a state toward its pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct MovePlan {
    pub algorithm: Algorithm,
    /// Fingerprint of the state the plan was computed for.
    pub planned_for: String,
    pub moves: Vec<Move>,
    /// Set when defects remain even after sweeping to a fixed point.
    pub partial: bool,
    /// Defects left in the working copy of a partial plan.
    pub residual: Vec<(SiteCoord, SiteClass)>,
}

/// Headline numbers of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlanStats {
    pub n_moves: usize,
    pub n_traversed_sites: usize,
    pub n_discards: usize,
    pub partial: bool,
}

impl MovePlan {
    pub fn stats(&self) -> PlanStats {
        PlanStats {
            n_moves: self.moves.len(),
            n_traversed_sites: self.moves.iter().map(|m| m.path.traversed_sites()).sum(),
            n_discards: self.moves.iter().filter(|m| m.is_discard()).count(),
            partial: self.partial,
        }
    }

    /// Line-oriented text form used by plan files and golden tests.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# atomsort plan v1\n");
        out.push_str(&format!("# algorithm: {}\n", self.algorithm.token()));
        out.push_str(&format!("# state: {}\n", self.planned_for));
        out.push_str(&format!("# partial: {}\n", self.partial));
        if !self.residual.is_empty() {
            let residual = self
                .residual
                .iter()
                .map(|(site, class)| format!("({site}):{class:?}"))
                .collect::<Vec<_>>()
                .join(" ");
            out.push_str(&format!("# residual: {residual}\n"));
        }
        for mv in &self.moves {
            out.push_str(&mv.to_line());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut algorithm = Algorithm::Hha8;
        let mut planned_for = String::new();
        let mut partial = false;
        let mut moves = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(v) = comment.strip_prefix("algorithm:") {
                    algorithm = Algorithm::from_token(v.trim())?;
                } else if let Some(v) = comment.strip_prefix("state:") {
                    planned_for = v.trim().to_string();
                } else if let Some(v) = comment.strip_prefix("partial:") {
                    partial = v.trim() == "true";
                }
                continue;
            }
            moves.push(Move::from_line(line)?);
        }
        Ok(Self {
            algorithm,
            planned_for,
            moves,
            partial,
            residual: Vec::new(),
        })
    }
}

/// Plans one rearrangement cycle with the chosen algorithm.
pub fn plan_cycle(
    state: &ArrayState,
    pattern: &TargetPattern,
    rules: &MoveRules,
    algorithm: Algorithm,
) -> Result<MovePlan> {
    state.geometry().check_matches(pattern.geometry())?;
    let rules = algorithm.effective_rules(rules);
    let mut engine = Engine {
        pattern,
        depths: compute_depths(pattern),
        rules,
        algorithm,
        work: state.clone(),
        moves: Vec::new(),
    };
    engine.correct_misplaced();
    engine.fill_voids();
    let residual = engine.residual_defects();
    Ok(MovePlan {
        algorithm,
        planned_for: state_fingerprint(state),
        moves: engine.moves,
        partial: !residual.is_empty(),
        residual,
    })
}

/// Repair entry point for post-imaging survivor states. The algorithm is
/// identical to [`plan_cycle`]; the distinct name lets reports separate
/// initial assembly from repair cycles.
pub fn plan_repair(
    state: &ArrayState,
    pattern: &TargetPattern,
    rules: &MoveRules,
    algorithm: Algorithm,
) -> Result<MovePlan> {
    plan_cycle(state, pattern, rules, algorithm)
}

/// Plans a single-species (mask) pattern. Same machinery; with only one
/// species demanded the misplaced phase reduces to ejecting wrong-species
/// atoms off target sites.
pub fn plan_single_species(
    state: &ArrayState,
    pattern: &TargetPattern,
    rules: &MoveRules,
) -> Result<MovePlan> {
    plan_cycle(state, pattern, rules, Algorithm::Hha8)
}

/// Nearest-available-source baseline without depth ordering; stands in
/// for the external connectivity-optimizing algorithm in comparisons and
/// is labelled `HCOA-proxy` in report output.
pub fn greedy_baseline(
    state: &ArrayState,
    pattern: &TargetPattern,
    rules: &MoveRules,
) -> Result<MovePlan> {
    plan_cycle(state, pattern, rules, Algorithm::Greedy)
}

struct Engine<'a> {
    pattern: &'a TargetPattern,
    depths: DepthMap,
    rules: MoveRules,
    algorithm: Algorithm,
    work: ArrayState,
    moves: Vec<Move>,
}

impl Engine<'_> {
    fn class(&self, site: SiteCoord) -> SiteClass {
        class_at(&self.work, self.pattern, site)
    }

    fn depth(&self, site: SiteCoord) -> u32 {
        self.depths.depth(self.pattern, site).unwrap_or(0)
    }

    fn apply_transfer(&mut self, source: SiteCoord, dest: SiteCoord, path: Path, species: Species) {
        self.work.take(source);
        self.work.set(dest, Occupancy::Occupied(species));
        if self.algorithm.stages_moves() && path.segments().len() > 1 {
            let geometry = self.work.geometry();
            for segment in path.segments() {
                let leg_end = segment.endpoint(geometry).expect("path stays on the grid");
                let leg = Path::new(vec![*segment], geometry).expect("single segment is a path");
                self.moves
                    .push(Move::transfer(segment.from, leg_end, leg, species));
            }
        } else {
            self.moves.push(Move::transfer(source, dest, path, species));
        }
    }

    /// Phase 0: every misplaced atom is recycled into a void of its own
    /// species when reachable, parked on the nearest reachable empty
    /// reservoir site otherwise, and released as a last resort. Deep
    /// misplaced atoms go first, while escape lanes are still open.
    fn correct_misplaced(&mut self) {
        let mut misplaced: Vec<SiteCoord> = self
            .pattern
            .target_sites()
            .map(|(site, _)| site)
            .filter(|&site| self.class(site) == SiteClass::Misplaced)
            .collect();
        if self.algorithm.depth_ordered() {
            misplaced.sort_by_key(|&site| {
                (std::cmp::Reverse(self.depth(site)), site.row, site.col)
            });
        }
        for site in misplaced {
            if self.class(site) != SiteClass::Misplaced {
                continue;
            }
            let species = self
                .work
                .occupancy(site)
                .species()
                .expect("misplaced site holds an atom");
            let reach = reach_map(&self.work, site, &self.rules);
            let geometry = self.work.geometry();

            // Prefer a void of this atom's species (fixes two defects with
            // one move), then any empty reservoir site.
            let mut destination = self.pick_destination(site, &reach, |s| {
                self.class(s) == SiteClass::Void
                    && self.pattern.demand(s).species() == Some(species)
            });
            if destination.is_none() {
                destination =
                    self.pick_destination(site, &reach, |s| self.class(s) == SiteClass::ReservoirEmpty);
            }
            match destination {
                Some(dest) => {
                    let path = find_path(&self.work, site, dest, &self.rules)
                        .expect("reachable destination has a path");
                    debug_assert_eq!(path.end(geometry), Some(dest));
                    self.apply_transfer(site, dest, path, species);
                }
                None => {
                    self.work.take(site);
                    self.moves.push(Move::discard(site, species));
                }
            }
        }
    }

    /// Picks the best destination among empty sites satisfying `accept`,
    /// by traversed distance, then squared Euclidean distance, then
    /// row-major order.
    fn pick_destination<F>(
        &self,
        from: SiteCoord,
        reach: &[Option<u32>],
        accept: F,
    ) -> Option<SiteCoord>
    where
        F: Fn(SiteCoord) -> bool,
    {
        let geometry = self.work.geometry();
        let mut best: Option<(u32, u64, SiteCoord)> = None;
        for idx in 0..geometry.n_sites() {
            let Some(dist) = reach[idx] else { continue };
            let site = geometry.site_at(idx);
            if !accept(site) {
                continue;
            }
            let key = (dist, from.dist2(site), site);
            match &best {
                Some((d, e, s)) if (*d, *e, *s) <= (key.0, key.1, key.2) => {}
                _ => best = Some(key),
            }
        }
        best.map(|(_, _, site)| site)
    }

    /// Void-filling sweeps. Each sweep visits the current voids (deepest
    /// first for the heuristic planners, row-major for the greedy proxy)
    /// and fills what it can; sweeping repeats until a pass makes no
    /// progress.
    fn fill_voids(&mut self) {
        loop {
            let mut voids: Vec<(SiteCoord, Species)> = self
                .pattern
                .target_sites()
                .filter(|&(site, _)| self.class(site) == SiteClass::Void)
                .collect();
            if self.algorithm.depth_ordered() {
                voids.sort_by_key(|&(site, _)| {
                    (std::cmp::Reverse(self.depth(site)), site.row, site.col)
                });
            }
            let mut progress = false;
            for (site, species) in voids {
                if self.class(site) != SiteClass::Void {
                    continue;
                }
                if self.fill_one_void(site, species) {
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
    }

    /// Fills one void from the best admissible source. Reservoir and
    /// misplaced atoms are the primary supply; a void walled in by
    /// finished sites falls back to a relay chain.
    fn fill_one_void(&mut self, void: SiteCoord, species: Species) -> bool {
        let scan = source_scan(&self.work, void, &self.rules);
        if let Some(source) = self.pick_primary_source(void, species, &scan) {
            self.transfer_along_best_path(source, void, species);
            return true;
        }
        self.algorithm.uses_relay() && self.relay_fill(void, species)
    }

    fn transfer_along_best_path(&mut self, source: SiteCoord, dest: SiteCoord, species: Species) {
        let path =
            find_path(&self.work, source, dest, &self.rules).expect("scanned source has a path");
        debug_assert_eq!(path.end(self.work.geometry()), Some(dest));
        self.apply_transfer(source, dest, path, species);
    }

    /// Relay fallback for voids the reservoir cannot reach directly: a
    /// finished atom of the required species hops into the void, its
    /// vacated site becomes the new void, and the chain repeats until a
    /// reservoir (or misplaced) atom can inject. Each hop is chosen as
    /// the first step of a currently-shortest chain; the chain is
    /// re-planned after every hop because placed atoms change the board.
    /// Returns true only when the final injection happened.
    fn relay_fill(&mut self, start: SiteCoord, species: Species) -> bool {
        let n_sites = self.work.geometry().n_sites();
        // Sites filled during this relay; never pulled back out.
        let mut sealed = vec![false; n_sites];
        let mut current = start;
        loop {
            let scan = source_scan(&self.work, current, &self.rules);
            if let Some(source) = self.pick_primary_source(current, species, &scan) {
                self.transfer_along_best_path(source, current, species);
                return true;
            }
            let Some(hop) = self.pick_relay_hop(current, species, &sealed) else {
                return false;
            };
            self.transfer_along_best_path(hop, current, species);
            sealed[self.work.geometry().index(current)] = true;
            current = hop;
        }
    }

    /// Breadth-first search over hypothetical void positions for the
    /// shortest relay chain from `start` to anywhere a primary source can
    /// reach; returns the chain's first hop (a finished atom that can
    /// move into `start` now).
    fn pick_relay_hop(
        &self,
        start: SiteCoord,
        species: Species,
        sealed: &[bool],
    ) -> Option<SiteCoord> {
        let geometry = self.work.geometry();
        let mut visited = vec![false; geometry.n_sites()];
        // First hop of the chain leading to each visited position.
        let mut first_hop: Vec<Option<SiteCoord>> = vec![None; geometry.n_sites()];
        visited[geometry.index(start)] = true;
        let mut queue = VecDeque::new();
        queue.push_back(start);
        while let Some(position) = queue.pop_front() {
            let scan = source_scan(&self.work, position, &self.rules);
            let mut candidates: Vec<(u32, u64, SiteCoord)> = Vec::new();
            for idx in 0..geometry.n_sites() {
                let Some(dist) = scan[idx] else { continue };
                let site = geometry.site_at(idx);
                if self.work.occupancy(site).species() != Some(species) {
                    continue;
                }
                candidates.push((dist, position.dist2(site), site));
            }
            candidates.sort_unstable();
            for (_, _, site) in candidates {
                match self.class(site) {
                    SiteClass::ReservoirOccupied | SiteClass::Misplaced => {
                        // A primary source reaches this position, so the
                        // chain through it completes. At the start this
                        // cannot happen (the direct fill already failed).
                        if position != start {
                            return first_hop[geometry.index(position)];
                        }
                    }
                    SiteClass::Finished => {
                        let idx = geometry.index(site);
                        if visited[idx] || sealed[idx] {
                            continue;
                        }
                        visited[idx] = true;
                        first_hop[idx] = if position == start {
                            Some(site)
                        } else {
                            first_hop[geometry.index(position)]
                        };
                        queue.push_back(site);
                    }
                    _ => {}
                }
            }
        }
        None
    }

    fn pick_primary_source(
        &self,
        void: SiteCoord,
        species: Species,
        scan: &[Option<u32>],
    ) -> Option<SiteCoord> {
        self.pick_source(
            void,
            species,
            scan,
            &[SiteClass::ReservoirOccupied, SiteClass::Misplaced],
        )
    }

    fn pick_source(
        &self,
        void: SiteCoord,
        species: Species,
        scan: &[Option<u32>],
        classes: &[SiteClass],
    ) -> Option<SiteCoord> {
        let geometry = self.work.geometry();
        let greedy = self.algorithm == Algorithm::Greedy;
        let mut best: Option<(u64, u64, SiteCoord)> = None;
        for idx in 0..geometry.n_sites() {
            let Some(dist) = scan[idx] else { continue };
            let site = geometry.site_at(idx);
            if self.work.occupancy(site).species() != Some(species) {
                continue;
            }
            if !classes.contains(&self.class(site)) {
                continue;
            }
            // The heuristic planners minimize traversed sites (the loss
            // currency); the greedy proxy minimizes plain distance.
            let key = if greedy {
                (void.dist2(site), dist as u64, site)
            } else {
                (dist as u64, void.dist2(site), site)
            };
            match &best {
                Some(b) if (b.0, b.1, b.2) <= (key.0, key.1, key.2) => {}
                _ => best = Some(key),
            }
        }
        best.map(|(_, _, site)| site)
    }

    fn residual_defects(&self) -> Vec<(SiteCoord, SiteClass)> {
        self.pattern
            .target_sites()
            .filter_map(|(site, _)| match self.class(site) {
                class @ (SiteClass::Void | SiteClass::Misplaced) => Some((site, class)),
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridio::{pattern_from_ascii, state_from_ascii};
    use crate::lattice::{make_pattern, GridGeometry, PatternKind, Region, DEFAULT_PITCH_UM};
    use crate::replay::replay;

    fn geo(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(w, h, DEFAULT_PITCH_UM).unwrap()
    }

    #[test]
    fn depth_of_single_site_region_is_zero() {
        let pattern = make_pattern(geo(5, 5), &PatternKind::Checkerboard, Region::new(2, 2, 1, 1))
            .unwrap();
        let depths = compute_depths(&pattern);
        assert_eq!(depths.depth(&pattern, SiteCoord::new(2, 2)), Some(0));
        assert_eq!(depths.max_depth(), 0);
    }

    #[test]
    fn depth_of_5x5_block() {
        let pattern =
            make_pattern(geo(9, 9), &PatternKind::Checkerboard, Region::new(2, 2, 5, 5)).unwrap();
        let depths = compute_depths(&pattern);
        assert_eq!(depths.depth(&pattern, SiteCoord::new(4, 4)), Some(2));
        assert_eq!(depths.depth(&pattern, SiteCoord::new(3, 3)), Some(1));
        assert_eq!(depths.depth(&pattern, SiteCoord::new(2, 2)), Some(0));
        assert_eq!(depths.max_depth(), 2);
    }

    #[test]
    fn depth_of_12x10_region_maxes_at_four() {
        let g = geo(20, 20);
        let pattern = make_pattern(g, &PatternKind::Zebra, Region::centered(&g, 12, 10)).unwrap();
        assert_eq!(compute_depths(&pattern).max_depth(), 4);
    }

    #[test]
    fn defect_free_state_plans_empty() {
        let state = state_from_ascii("AB\nBA\n").unwrap();
        let pattern = pattern_from_ascii("ab\nba\n").unwrap();
        let plan = plan_cycle(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        assert!(plan.moves.is_empty());
        assert!(!plan.partial);
    }

    #[test]
    fn single_void_single_reservoir_atom_is_one_move() {
        let state = state_from_ascii("....\n.A..\n....\n").unwrap();
        let pattern = pattern_from_ascii("....\n..a.\n....\n").unwrap();
        let plan = plan_cycle(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        assert_eq!(plan.moves.len(), 1);
        assert!(!plan.partial);
        assert_eq!(plan.moves[0].to_line(), "1,1 -> 2,1 via E1 [A]");
    }

    #[test]
    fn misplaced_corrected_before_voids() {
        // A on a B target, with an A void elsewhere: the misplaced atom is
        // recycled straight into the void as the very first move.
        let state = state_from_ascii(".....\n.A.B.\n.B...\n").unwrap();
        let pattern = pattern_from_ascii(".....\n.b.b.\n..a..\n").unwrap();
        let plan = plan_cycle(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        assert!(!plan.partial);
        let first = &plan.moves[0];
        assert_eq!(first.source, SiteCoord::new(1, 1));
        assert_eq!(
            first.destination,
            crate::pathing::Destination::Site(SiteCoord::new(2, 2))
        );
        let outcome = replay(&plan, &state, &pattern).unwrap();
        assert!(outcome.legal);
        assert!(outcome.defect_free);
    }

    #[test]
    fn misplaced_without_refuge_is_discarded() {
        // Single-site grid fully demanded by A but holding B, nowhere to
        // park: the atom is released.
        let state = state_from_ascii("B\n").unwrap();
        let pattern = pattern_from_ascii("a\n").unwrap();
        let plan = plan_cycle(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        assert_eq!(plan.moves.len(), 1);
        assert!(plan.moves[0].is_discard());
        // No A atom exists to fill the vacated void.
        assert!(plan.partial);
    }

    #[test]
    fn surrounded_void_repairs_under_hha8_but_not_hha4() {
        // Checkerboard block, fully filled except the max-depth centre
        // void, plus one spare A atom in the reservoir. Every axial
        // neighbour of the void holds the wrong species, so only diagonal
        // moves can repair it: the diagonal neighbour hops in, and the
        // spare refills the vacated corner.
        let state = state_from_ascii("A....\n.ABA.\n.B.B.\n.ABA.\n.....\n").unwrap();
        let pattern = pattern_from_ascii(".....\n.aba.\n.bab.\n.aba.\n.....\n").unwrap();

        let plan8 = plan_repair(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        assert!(!plan8.partial, "residual: {:?}", plan8.residual);
        assert_eq!(plan8.moves.len(), 2);
        let outcome = replay(&plan8, &state, &pattern).unwrap();
        assert!(outcome.legal && outcome.defect_free);

        let plan4 = plan_repair(&state, &pattern, &MoveRules::default(), Algorithm::Hha4).unwrap();
        assert!(plan4.partial);
    }

    #[test]
    fn hha4_stages_bent_routes_into_straight_legs() {
        // Fill a void two columns east and one row south: hha8 drags one
        // dog-leg, hha4 emits one move per straight leg.
        let state = state_from_ascii("A....\n.....\n").unwrap();
        let pattern = pattern_from_ascii(".....\n..a..\n").unwrap();
        let plan8 = plan_cycle(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        assert_eq!(plan8.moves.len(), 1);
        let plan4 = plan_cycle(&state, &pattern, &MoveRules::default(), Algorithm::Hha4).unwrap();
        assert!(plan4.moves.len() > 1, "{:?}", plan4.moves);
        for mv in &plan4.moves {
            assert_eq!(mv.path.segments().len(), 1);
            assert!(!mv.path.segments()[0].direction.is_diagonal());
        }
        let outcome = replay(&plan4, &state, &pattern).unwrap();
        assert!(outcome.legal && outcome.defect_free);
    }

    #[test]
    fn two_interior_voids_of_both_species_are_repaired() {
        let g = geo(8, 8);
        let pattern = make_pattern(g, &PatternKind::Checkerboard, Region::new(2, 2, 4, 4)).unwrap();
        // Fill the pattern completely, then punch out one site of each
        // species and park replacements in the reservoir.
        let mut state = ArrayState::empty(g);
        for (site, species) in pattern.target_sites() {
            state.set(site, Occupancy::Occupied(species));
        }
        let void_a = SiteCoord::new(4, 4);
        let void_b = SiteCoord::new(4, 3);
        assert_eq!(pattern.demand(void_a).species(), Some(Species::A));
        assert_eq!(pattern.demand(void_b).species(), Some(Species::B));
        state.take(void_a);
        state.take(void_b);
        state.set(SiteCoord::new(0, 0), Occupancy::Occupied(Species::A));
        state.set(SiteCoord::new(7, 7), Occupancy::Occupied(Species::B));

        let plan = plan_repair(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        assert!(!plan.partial, "residual: {:?}", plan.residual);
        let outcome = replay(&plan, &state, &pattern).unwrap();
        assert!(outcome.legal && outcome.defect_free);
    }

    #[test]
    fn greedy_matches_hha_on_single_defect() {
        let state = state_from_ascii(".....\n.A...\n.....\n").unwrap();
        let pattern = pattern_from_ascii(".....\n...a.\n.....\n").unwrap();
        let hha = plan_cycle(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        let greedy = greedy_baseline(&state, &pattern, &MoveRules::default()).unwrap();
        assert_eq!(hha.stats().n_traversed_sites, greedy.stats().n_traversed_sites);
        assert_eq!(greedy.moves.len(), 1);
    }

    #[test]
    fn plans_are_deterministic() {
        let g = geo(12, 12);
        let pattern = make_pattern(g, &PatternKind::Zebra, Region::centered(&g, 6, 6)).unwrap();
        let mut rng = crate::rng::RandomSource::new(5, 0);
        let state =
            crate::lattice::load_random(g, &crate::physics::LossModel::default(), &mut rng)
                .unwrap();
        let a = plan_cycle(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        let b = plan_cycle(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn plan_text_round_trip() {
        let state = state_from_ascii(".....\n.A.B.\n.....\n").unwrap();
        let pattern = pattern_from_ascii(".....\n.b.b.\n..a..\n").unwrap();
        let plan = plan_cycle(&state, &pattern, &MoveRules::default(), Algorithm::Hha8).unwrap();
        let text = plan.to_text();
        let parsed = MovePlan::from_text(&text).unwrap();
        assert_eq!(parsed.moves, plan.moves);
        assert_eq!(parsed.algorithm, plan.algorithm);
        assert_eq!(parsed.planned_for, plan.planned_for);
        assert_eq!(parsed.partial, plan.partial);
    }
}
