//! Move primitives along the eight azimuths and path search over the
//! static grid.
//!
//! A move drags one atom with the movable tweezer along a path of straight
//! segments. Every lattice site the tweezer passes over (excluding the
//! pick-up site) must be empty, including the landing site. The enhanced
//! planner uses all eight directions; the four-direction mode reproduces
//! the row/column-only baseline.
//!
//! [`find_path`] returns the unique shortest admissible path under a fixed
//! total order: fewest traversed sites, then fewest segments, then the
//! lexicographically smallest direction sequence with
//! `E < NE < N < NW < W < SW < S < SE`.

use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ArrayState, GridGeometry, SiteCoord, Species};

/// One of the eight unit steps. Declaration order is the tie-break and
/// serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    E,
    NE,
    N,
    NW,
    W,
    SW,
    S,
    SE,
}

/// All eight directions in precedence order.
pub const ALL_DIRECTIONS: [Direction; 8] = [
    Direction::E,
    Direction::NE,
    Direction::N,
    Direction::NW,
    Direction::W,
    Direction::SW,
    Direction::S,
    Direction::SE,
];

/// The four axial directions in precedence order.
pub const AXIAL_DIRECTIONS: [Direction; 4] =
    [Direction::E, Direction::N, Direction::W, Direction::S];

impl Direction {
    /// `(dcol, drow)` with row 0 at the top, so N decreases the row.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::E => (1, 0),
            Direction::NE => (1, -1),
            Direction::N => (0, -1),
            Direction::NW => (-1, -1),
            Direction::W => (-1, 0),
            Direction::SW => (-1, 1),
            Direction::S => (0, 1),
            Direction::SE => (1, 1),
        }
    }

    pub fn is_diagonal(self) -> bool {
        let (dc, dr) = self.delta();
        dc != 0 && dr != 0
    }

    pub fn token(self) -> &'static str {
        match self {
            Direction::E => "E",
            Direction::NE => "NE",
            Direction::N => "N",
            Direction::NW => "NW",
            Direction::W => "W",
            Direction::SW => "SW",
            Direction::S => "S",
            Direction::SE => "SE",
        }
    }

    pub fn from_token(token: &str) -> Result<Self> {
        ALL_DIRECTIONS
            .iter()
            .copied()
            .find(|d| d.token() == token)
            .ok_or_else(|| Error::Parse(format!("unknown direction token {token:?}")))
    }

    fn index(self) -> u8 {
        self as u8
    }
}

/// Whether diagonal segments are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionMode {
    Four,
    Eight,
}

impl DirectionMode {
    pub fn allowed(self) -> &'static [Direction] {
        match self {
            DirectionMode::Four => &AXIAL_DIRECTIONS,
            DirectionMode::Eight => &ALL_DIRECTIONS,
        }
    }
}

/// Constraints on admissible paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveRules {
    pub directions: DirectionMode,
    /// Maximum straight segments per move (turns cost a segment).
    pub max_segments: usize,
    /// When set, a diagonal step also requires the two orthogonal sites
    /// flanking it to be empty, not just the sites on the path line.
    pub strict_diagonal: bool,
}

impl Default for MoveRules {
    fn default() -> Self {
        Self {
            directions: DirectionMode::Eight,
            max_segments: 3,
            strict_diagonal: false,
        }
    }
}

impl MoveRules {
    pub fn four_direction_single_segment() -> Self {
        Self {
            directions: DirectionMode::Four,
            max_segments: 1,
            strict_diagonal: false,
        }
    }
}

/// A straight run of `length` unit steps from `from`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub from: SiteCoord,
    pub direction: Direction,
    pub length: usize,
}

impl Segment {
    pub fn new(from: SiteCoord, direction: Direction, length: usize) -> Self {
        debug_assert!(length >= 1);
        Self {
            from,
            direction,
            length,
        }
    }

    /// Site reached after `steps` unit steps, if it stays on the grid.
    pub fn site_at(&self, steps: usize, geometry: &GridGeometry) -> Option<SiteCoord> {
        let (dc, dr) = self.direction.delta();
        let col = self.from.col as i64 + dc * steps as i64;
        let row = self.from.row as i64 + dr * steps as i64;
        if col < 0 || row < 0 {
            return None;
        }
        let site = SiteCoord::new(col as usize, row as usize);
        geometry.contains(site).then_some(site)
    }

    pub fn endpoint(&self, geometry: &GridGeometry) -> Option<SiteCoord> {
        self.site_at(self.length, geometry)
    }
}

/// Contiguous sequence of segments; each starts where the previous ends.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Path {
    segments: Vec<Segment>,
}

impl Path {
    /// Empty path (used by discard moves).
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(segments: Vec<Segment>, geometry: &GridGeometry) -> Result<Self> {
        let mut cursor = None;
        for seg in &segments {
            if let Some(prev) = cursor {
                if seg.from != prev {
                    return Err(Error::Parse(format!(
                        "segment starting at {} does not continue from {prev}",
                        seg.from
                    )));
                }
            }
            cursor = Some(seg.endpoint(geometry).ok_or(Error::OutOfBounds {
                site: seg.from,
                width: geometry.width,
                height: geometry.height,
            })?);
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn start(&self) -> Option<SiteCoord> {
        self.segments.first().map(|s| s.from)
    }

    pub fn end(&self, geometry: &GridGeometry) -> Option<SiteCoord> {
        self.segments.last().and_then(|s| s.endpoint(geometry))
    }

    /// Lattice sites the tweezer passes over, excluding the start site and
    /// including the landing site.
    pub fn traversed_sites(&self) -> usize {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Geometric length in micrometers.
    pub fn euclidean_um(&self, pitch_um: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let unit = if s.direction.is_diagonal() {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                s.length as f64 * unit * pitch_um
            })
            .sum()
    }

    /// Compact text form, e.g. `E3,NE2`.
    pub fn to_compact(&self) -> String {
        self.segments
            .iter()
            .map(|s| format!("{}{}", s.direction.token(), s.length))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parses the compact form starting at `from`. Bounds are not checked
    /// here; replay against a concrete grid does that.
    pub fn from_compact(from: SiteCoord, text: &str) -> Result<Self> {
        let mut segments = Vec::new();
        let mut cursor = from;
        for token in text.split(',').filter(|t| !t.is_empty()) {
            let split = token
                .find(|c: char| c.is_ascii_digit())
                .ok_or_else(|| Error::Parse(format!("segment {token:?} has no length")))?;
            let direction = Direction::from_token(&token[..split])?;
            let length: usize = token[split..]
                .parse()
                .map_err(|_| Error::Parse(format!("bad segment length in {token:?}")))?;
            if length == 0 {
                return Err(Error::Parse(format!("zero-length segment {token:?}")));
            }
            segments.push(Segment::new(cursor, direction, length));
            let (dc, dr) = direction.delta();
            let col = cursor.col as i64 + dc * length as i64;
            let row = cursor.row as i64 + dr * length as i64;
            if col < 0 || row < 0 {
                return Err(Error::Parse(format!(
                    "segment {token:?} leaves the grid at negative coordinates"
                )));
            }
            cursor = SiteCoord::new(col as usize, row as usize);
        }
        Ok(Self { segments })
    }
}

/// Move destination: another site, or release into free space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Destination {
    Site(SiteCoord),
    Discard,
}

/// One planned tweezer operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub source: SiteCoord,
    pub destination: Destination,
    /// Empty for discards.
    pub path: Path,
    /// Species picked up, recorded for auditing.
    pub species: Species,
}

impl Move {
    pub fn transfer(source: SiteCoord, destination: SiteCoord, path: Path, species: Species) -> Self {
        Self {
            source,
            destination: Destination::Site(destination),
            path,
            species,
        }
    }

    pub fn discard(source: SiteCoord, species: Species) -> Self {
        Self {
            source,
            destination: Destination::Discard,
            path: Path::empty(),
            species,
        }
    }

    pub fn is_discard(&self) -> bool {
        self.destination == Destination::Discard
    }

    /// One move per line: `c,r -> c,r via E3,NE2 [A]` or `c,r -> DISCARD [B]`.
    pub fn to_line(&self) -> String {
        match self.destination {
            Destination::Site(dst) => format!(
                "{} -> {} via {} [{}]",
                self.source,
                dst,
                self.path.to_compact(),
                self.species.letter()
            ),
            Destination::Discard => {
                format!("{} -> DISCARD [{}]", self.source, self.species.letter())
            }
        }
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let parse_site = |text: &str| -> Result<SiteCoord> {
            let (c, r) = text
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad site {text:?}")))?;
            Ok(SiteCoord::new(
                c.trim().parse().map_err(|_| Error::Parse(format!("bad site {text:?}")))?,
                r.trim().parse().map_err(|_| Error::Parse(format!("bad site {text:?}")))?,
            ))
        };
        let (body, species) = line
            .rsplit_once(" [")
            .ok_or_else(|| Error::Parse(format!("move line missing species tag: {line:?}")))?;
        let species = match species.trim_end_matches(']') {
            "A" => Species::A,
            "B" => Species::B,
            other => return Err(Error::Parse(format!("unknown species {other:?}"))),
        };
        let (src, rest) = body
            .split_once(" -> ")
            .ok_or_else(|| Error::Parse(format!("move line missing arrow: {line:?}")))?;
        let source = parse_site(src.trim())?;
        if rest.trim() == "DISCARD" {
            return Ok(Move::discard(source, species));
        }
        let (dst, compact) = rest
            .split_once(" via ")
            .ok_or_else(|| Error::Parse(format!("move line missing path: {line:?}")))?;
        let destination = parse_site(dst.trim())?;
        let path = Path::from_compact(source, compact.trim())?;
        Ok(Move::transfer(source, destination, path, species))
    }
}

/// Checks one unit step from `from` under the rules. Returns the target
/// site when the step stays on the grid and every site it needs is empty.
fn step_clear(
    state: &ArrayState,
    from: SiteCoord,
    direction: Direction,
    rules: &MoveRules,
) -> Option<SiteCoord> {
    let geometry = state.geometry();
    let (dc, dr) = direction.delta();
    let col = from.col as i64 + dc;
    let row = from.row as i64 + dr;
    if col < 0 || row < 0 {
        return None;
    }
    let target = SiteCoord::new(col as usize, row as usize);
    if !geometry.contains(target) || !state.is_empty(target) {
        return None;
    }
    if rules.strict_diagonal && direction.is_diagonal() {
        let flank_a = SiteCoord::new(target.col, from.row);
        let flank_b = SiteCoord::new(from.col, target.row);
        if !state.is_empty(flank_a) || !state.is_empty(flank_b) {
            return None;
        }
    }
    Some(target)
}

/// True iff every site strictly between the segment's endpoints and the
/// endpoint itself are empty. The start site holds the atom being moved
/// and is exempt.
pub fn segment_clear(state: &ArrayState, segment: &Segment, rules: &MoveRules) -> Result<bool> {
    let geometry = state.geometry();
    if !geometry.contains(segment.from) || segment.endpoint(geometry).is_none() {
        return Err(Error::OutOfBounds {
            site: segment.from,
            width: geometry.width,
            height: geometry.height,
        });
    }
    let mut cursor = segment.from;
    for _ in 0..segment.length {
        match step_clear(state, cursor, segment.direction, rules) {
            Some(next) => cursor = next,
            None => return Ok(false),
        }
    }
    Ok(true)
}

/// Full comparison key for a candidate path: traversed sites, then segment
/// count, then the direction sequence.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct PathKey {
    steps: u32,
    segments: u32,
    dirs: Vec<u8>,
}

#[derive(PartialEq, Eq)]
struct HeapEntry {
    key: PathKey,
    site: SiteCoord,
    last_dir: u8,
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on the key; site/last_dir only disambiguate equal keys
        // so the heap order is total.
        other
            .key
            .cmp(&self.key)
            .then_with(|| (other.site.row, other.site.col).cmp(&(self.site.row, self.site.col)))
            .then_with(|| other.last_dir.cmp(&self.last_dir))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest admissible path from an occupied site to an empty one, or
/// `None` when every route is blocked (a potential logjam).
pub fn find_path(
    state: &ArrayState,
    from: SiteCoord,
    to: SiteCoord,
    rules: &MoveRules,
) -> Option<Path> {
    let geometry = state.geometry();
    if from == to || !geometry.contains(from) || !geometry.contains(to) || !state.is_empty(to) {
        return None;
    }
    let n_sites = geometry.n_sites();
    let n_dirs = 8usize;
    let max_segs = rules.max_segments.max(1);
    // Best key per (site, last_dir, segments_used); segments in 1..=max.
    let mut best: Vec<Option<PathKey>> = vec![None; n_sites * n_dirs * max_segs];
    let state_index = |site: SiteCoord, last_dir: u8, segs: u32| -> usize {
        (geometry.index(site) * n_dirs + last_dir as usize) * max_segs + (segs as usize - 1)
    };

    let mut heap = BinaryHeap::new();
    // Seed with the admissible first steps out of the source.
    for &dir in rules.directions.allowed() {
        if let Some(next) = step_clear(state, from, dir, rules) {
            let key = PathKey {
                steps: 1,
                segments: 1,
                dirs: vec![dir.index()],
            };
            let idx = state_index(next, dir.index(), 1);
            if best[idx].as_ref().is_none_or(|b| key < *b) {
                best[idx] = Some(key.clone());
                heap.push(HeapEntry {
                    key,
                    site: next,
                    last_dir: dir.index(),
                });
            }
        }
    }

    while let Some(entry) = heap.pop() {
        let segs = entry.key.segments;
        let idx = state_index(entry.site, entry.last_dir, segs);
        if best[idx].as_ref() != Some(&entry.key) {
            continue;
        }
        if entry.site == to {
            return Some(path_from_dirs(from, &entry.key.dirs));
        }
        for &dir in rules.directions.allowed() {
            let new_segs = if dir.index() == entry.last_dir {
                segs
            } else {
                segs + 1
            };
            if new_segs as usize > max_segs {
                continue;
            }
            let Some(next) = step_clear(state, entry.site, dir, rules) else {
                continue;
            };
            let mut dirs = entry.key.dirs.clone();
            dirs.push(dir.index());
            let key = PathKey {
                steps: entry.key.steps + 1,
                segments: new_segs,
                dirs,
            };
            let nidx = state_index(next, dir.index(), new_segs);
            if best[nidx].as_ref().is_none_or(|b| key < *b) {
                best[nidx] = Some(key.clone());
                heap.push(HeapEntry {
                    key,
                    site: next,
                    last_dir: dir.index(),
                });
            }
        }
    }
    None
}

fn path_from_dirs(from: SiteCoord, dirs: &[u8]) -> Path {
    let mut segments: Vec<Segment> = Vec::new();
    let mut cursor = from;
    for &d in dirs {
        let dir = ALL_DIRECTIONS[d as usize];
        let (dc, dr) = dir.delta();
        let next = SiteCoord::new(
            (cursor.col as i64 + dc) as usize,
            (cursor.row as i64 + dr) as usize,
        );
        match segments.last_mut() {
            Some(seg) if seg.direction == dir => seg.length += 1,
            _ => segments.push(Segment::new(cursor, dir, 1)),
        }
        cursor = next;
    }
    Path { segments }
}

/// Minimum traversed-site distances from an occupied source to every empty
/// site it can reach. Used to pick ejection and parking destinations.
pub(crate) fn reach_map(state: &ArrayState, from: SiteCoord, rules: &MoveRules) -> Vec<Option<u32>> {
    bfs_over_empty(state, from, rules, false)
}

/// Minimum traversed-site distances from an empty site (a void) backwards
/// to every occupied site that could source it. A recorded distance `k`
/// means an admissible forward path with `k` traversed sites exists from
/// that atom to the void.
pub(crate) fn source_scan(state: &ArrayState, void: SiteCoord, rules: &MoveRules) -> Vec<Option<u32>> {
    bfs_over_empty(state, void, rules, true)
}

fn bfs_over_empty(
    state: &ArrayState,
    origin: SiteCoord,
    rules: &MoveRules,
    record_occupied: bool,
) -> Vec<Option<u32>> {
    let geometry = state.geometry();
    let n_sites = geometry.n_sites();
    let max_segs = rules.max_segments.max(1);
    let mut dist: Vec<Option<u32>> = vec![None; n_sites];
    let mut seen = vec![false; n_sites * 8 * max_segs];
    let state_index = |site: SiteCoord, last_dir: u8, segs: u32| -> usize {
        (geometry.index(site) * 8 + last_dir as usize) * max_segs + (segs as usize - 1)
    };

    // FIFO queue gives nondecreasing step counts (all edges cost one).
    let mut queue = std::collections::VecDeque::new();
    queue.push_back((origin, u8::MAX, 0u32, 0u32));
    while let Some((site, last_dir, segs, steps)) = queue.pop_front() {
        for &dir in rules.directions.allowed() {
            let new_segs = if dir.index() == last_dir { segs } else { segs + 1 };
            if new_segs as usize > max_segs {
                continue;
            }
            let geometry_ok = {
                let (dc, dr) = dir.delta();
                let col = site.col as i64 + dc;
                let row = site.row as i64 + dr;
                (col >= 0 && row >= 0).then(|| SiteCoord::new(col as usize, row as usize))
            };
            let Some(next) = geometry_ok.filter(|s| geometry.contains(*s)) else {
                continue;
            };
            let next_idx = geometry.index(next);
            if !state.is_empty(next) {
                // Terminal hop into an atom: only meaningful for the
                // backward source scan, and the flanker rule still applies.
                if record_occupied && dist[next_idx].is_none() {
                    let strict_ok = !rules.strict_diagonal
                        || !dir.is_diagonal()
                        || (state.is_empty(SiteCoord::new(next.col, site.row))
                            && state.is_empty(SiteCoord::new(site.col, next.row)));
                    if strict_ok {
                        dist[next_idx] = Some(steps + 1);
                    }
                }
                continue;
            }
            if step_clear(state, site, dir, rules).is_none() {
                continue;
            }
            let sidx = state_index(next, dir.index(), new_segs);
            if seen[sidx] {
                continue;
            }
            seen[sidx] = true;
            if !record_occupied && dist[next_idx].is_none_or(|d| d > steps + 1) {
                dist[next_idx] = Some(steps + 1);
            }
            queue.push_back((next, dir.index(), new_segs, steps + 1));
        }
    }
    dist
}

/// Traversed sites, geometric length and wall-clock duration of one move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathMetrics {
    pub traversed_sites: usize,
    pub euclidean_um: f64,
    pub duration_ms: f64,
}

/// Movable-tweezer timing: adiabatic pick-up and release ramps around a
/// transport leg with a floor duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveTiming {
    pub t_pick_ms: f64,
    pub t_transport_floor_ms: f64,
    pub t_release_ms: f64,
    /// Transport speed; the default makes any move up to ten pitches long
    /// fit in the floor duration.
    pub speed_um_per_ms: f64,
}

impl Default for MoveTiming {
    fn default() -> Self {
        Self {
            t_pick_ms: 0.2,
            t_transport_floor_ms: 0.8,
            t_release_ms: 0.2,
            speed_um_per_ms: 10.0 * crate::lattice::DEFAULT_PITCH_UM / 0.8,
        }
    }
}

/// Metrics for a path under a given pitch and timing. An empty path is a
/// discard in place: no traversal, pick-up plus release only.
pub fn path_metrics(path: &Path, pitch_um: f64, timing: &MoveTiming) -> PathMetrics {
    let traversed_sites = path.traversed_sites();
    let euclidean_um = path.euclidean_um(pitch_um);
    let duration_ms = if path.is_empty() {
        timing.t_pick_ms + timing.t_release_ms
    } else {
        timing.t_pick_ms
            + (euclidean_um / timing.speed_um_per_ms).max(timing.t_transport_floor_ms)
            + timing.t_release_ms
    };
    PathMetrics {
        traversed_sites,
        euclidean_um,
        duration_ms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridio::state_from_ascii;
    use crate::lattice::DEFAULT_PITCH_UM;

    fn rules8() -> MoveRules {
        MoveRules::default()
    }

    fn rules4_single() -> MoveRules {
        MoveRules::four_direction_single_segment()
    }

    #[test]
    fn segment_clear_on_open_row() {
        let state = state_from_ascii("A....\n.....\n").unwrap();
        let seg = Segment::new(SiteCoord::new(0, 0), Direction::E, 4);
        assert!(segment_clear(&state, &seg, &rules8()).unwrap());
    }

    #[test]
    fn segment_clear_blocked_diagonal_interior() {
        let state = state_from_ascii("A...\n....\n..B.\n....\n").unwrap();
        // (0,0) -> SE x3 passes over the occupied (2,2).
        let seg = Segment::new(SiteCoord::new(0, 0), Direction::SE, 3);
        assert!(!segment_clear(&state, &seg, &rules8()).unwrap());
    }

    #[test]
    fn length_one_segment_has_no_interior() {
        let state = state_from_ascii("AB\nB.\n").unwrap();
        let seg = Segment::new(SiteCoord::new(0, 0), Direction::SE, 1);
        assert!(segment_clear(&state, &seg, &rules8()).unwrap());
    }

    #[test]
    fn segment_clear_rejects_out_of_bounds() {
        let state = state_from_ascii("A.\n..\n").unwrap();
        let seg = Segment::new(SiteCoord::new(0, 0), Direction::E, 5);
        assert!(segment_clear(&state, &seg, &rules8()).is_err());
    }

    #[test]
    fn strict_diagonal_requires_empty_flankers() {
        let state = state_from_ascii("AB\nB.\n").unwrap();
        let seg = Segment::new(SiteCoord::new(0, 0), Direction::SE, 1);
        let strict = MoveRules {
            strict_diagonal: true,
            ..rules8()
        };
        assert!(!segment_clear(&state, &seg, &strict).unwrap());
        // With empty flankers the same step is fine.
        let open = state_from_ascii("A.\n..\n").unwrap();
        assert!(segment_clear(&open, &seg, &strict).unwrap());
    }

    #[test]
    fn straight_row_is_one_segment() {
        let state = state_from_ascii("A.....\n......\n").unwrap();
        let path = find_path(&state, SiteCoord::new(0, 0), SiteCoord::new(5, 0), &rules8()).unwrap();
        assert_eq!(path.segments().len(), 1);
        assert_eq!(path.to_compact(), "E5");
        assert_eq!(path.traversed_sites(), 5);
    }

    #[test]
    fn blocked_row_detours_diagonally_but_not_axially_single_segment() {
        // Obstacle mid-row: the straight drag the single-segment
        // four-direction baseline would use is blocked, while the
        // eight-direction search dodges through the next row.
        let state = state_from_ascii("A..B..\n......\n").unwrap();
        let from = SiteCoord::new(0, 0);
        let to = SiteCoord::new(5, 0);
        let path = find_path(&state, from, to, &rules8()).expect("diagonal detour exists");
        assert!(path.segments().iter().any(|s| s.direction.is_diagonal()));
        assert_eq!(path.end(state.geometry()), Some(to));
        assert_eq!(path.traversed_sites(), 5);
        assert!(find_path(&state, from, to, &rules4_single()).is_none());
    }

    #[test]
    fn surrounded_atom_escapes_only_diagonally() {
        let state = state_from_ascii(".B.\nBAB\n.B.\n").unwrap();
        let from = SiteCoord::new(1, 1);
        let to = SiteCoord::new(0, 0);
        let path = find_path(&state, from, to, &rules8()).expect("diagonal escape");
        assert_eq!(path.to_compact(), "NW1");
        let four_any_segments = MoveRules {
            directions: DirectionMode::Four,
            max_segments: 5,
            strict_diagonal: false,
        };
        assert!(find_path(&state, from, to, &four_any_segments).is_none());
    }

    #[test]
    fn four_direction_paths_never_contain_diagonals() {
        let state = state_from_ascii("A....\n..B..\n.....\n").unwrap();
        let rules = MoveRules {
            directions: DirectionMode::Four,
            max_segments: 3,
            strict_diagonal: false,
        };
        let path = find_path(&state, SiteCoord::new(0, 0), SiteCoord::new(4, 2), &rules).unwrap();
        assert!(path.segments().iter().all(|s| !s.direction.is_diagonal()));
    }

    #[test]
    fn tie_break_prefers_earlier_directions() {
        // Two equal-length L routes to the SE corner: E then S, or S then
        // E. E sorts before S, so the E-first route must win.
        let state = state_from_ascii("A..\n...\n...\n").unwrap();
        let path = find_path(&state, SiteCoord::new(0, 0), SiteCoord::new(2, 2), &rules8()).unwrap();
        assert_eq!(path.to_compact(), "SE2");
        // Under four directions the diagonal is gone and E-first wins.
        let rules = MoveRules {
            directions: DirectionMode::Four,
            max_segments: 3,
            strict_diagonal: false,
        };
        let path = find_path(&state, SiteCoord::new(0, 0), SiteCoord::new(2, 2), &rules).unwrap();
        assert_eq!(path.to_compact(), "E2,S2");
    }

    #[test]
    fn segment_cap_trades_steps_and_can_forbid() {
        // Around a blocked centre, the 3-step route needs three segments
        // and the 4-step route two; one straight drag cannot get there.
        let state = state_from_ascii("A..\n.B.\n...\n").unwrap();
        let from = SiteCoord::new(0, 0);
        let to = SiteCoord::new(2, 2);
        let cap = |max_segments| MoveRules {
            max_segments,
            ..rules8()
        };
        let p3 = find_path(&state, from, to, &cap(3)).unwrap();
        assert_eq!(p3.to_compact(), "E1,SE1,S1");
        let p2 = find_path(&state, from, to, &cap(2)).unwrap();
        assert_eq!(p2.to_compact(), "E2,S2");
        assert!(find_path(&state, from, to, &cap(1)).is_none());
    }

    #[test]
    fn metrics_for_single_step_and_dog_leg() {
        let timing = MoveTiming::default();
        let one = Path::from_compact(SiteCoord::new(0, 0), "E1").unwrap();
        let m = path_metrics(&one, DEFAULT_PITCH_UM, &timing);
        assert_eq!(m.traversed_sites, 1);
        assert!((m.duration_ms - 1.2).abs() < 1e-12);

        let dog = Path::from_compact(SiteCoord::new(0, 5), "E3,NE2").unwrap();
        let m = path_metrics(&dog, DEFAULT_PITCH_UM, &timing);
        assert_eq!(m.traversed_sites, 5);
        let expect = (3.0 + 2.0 * std::f64::consts::SQRT_2) * DEFAULT_PITCH_UM;
        assert!((m.euclidean_um - expect).abs() < 1e-9);

        let none = path_metrics(&Path::empty(), DEFAULT_PITCH_UM, &timing);
        assert_eq!(none.traversed_sites, 0);
        assert!((none.duration_ms - 0.4).abs() < 1e-12);
    }

    #[test]
    fn long_moves_take_longer_than_the_floor() {
        let timing = MoveTiming::default();
        let long = Path::from_compact(SiteCoord::new(0, 0), "E15").unwrap();
        let m = path_metrics(&long, DEFAULT_PITCH_UM, &timing);
        assert!(m.duration_ms > 1.2);
    }

    #[test]
    fn move_line_round_trip() {
        let path = Path::from_compact(SiteCoord::new(3, 2), "E2,SE2").unwrap();
        let mv = Move::transfer(SiteCoord::new(3, 2), SiteCoord::new(7, 4), path, Species::A);
        let line = mv.to_line();
        assert_eq!(line, "3,2 -> 7,4 via E2,SE2 [A]");
        assert_eq!(Move::from_line(&line).unwrap(), mv);

        let discard = Move::discard(SiteCoord::new(1, 9), Species::B);
        assert_eq!(discard.to_line(), "1,9 -> DISCARD [B]");
        assert_eq!(Move::from_line(&discard.to_line()).unwrap(), discard);
    }

    #[test]
    fn source_scan_matches_forward_paths() {
        let state = state_from_ascii("..A..\n.B...\n.....\nA....\n").unwrap();
        let void = SiteCoord::new(3, 2);
        let dist = source_scan(&state, void, &rules8());
        let g = *state.geometry();
        for (site, _) in state.occupied_sites() {
            let scanned = dist[g.index(site)];
            let forward = find_path(&state, site, void, &rules8())
                .map(|p| p.traversed_sites() as u32);
            assert_eq!(scanned, forward, "mismatch at {site}");
        }
    }
}
