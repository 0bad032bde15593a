//! Grid geometry, species, occupancy state, target patterns and site
//! classification.
//!
//! The static tweezer array is a rectangular grid of sites. Each site is
//! either empty or holds a single atom of species A or B (A for ⁸⁷Rb,
//! B for ⁸⁵Rb by convention). A [`TargetPattern`] assigns a per-site
//! demand; classifying an [`ArrayState`] against a pattern partitions the
//! grid into finished, void, misplaced and reservoir sites, which is the
//! input every planner works from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::LossModel;
use crate::rng::RandomSource;

/// Atom species. Exactly two exist; every occupied site carries one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Species {
    A,
    B,
}

impl Species {
    pub fn other(self) -> Species {
        match self {
            Species::A => Species::B,
            Species::B => Species::A,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Species::A => 'A',
            Species::B => 'B',
        }
    }
}

/// Column/row index of one tweezer site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteCoord {
    pub col: usize,
    pub row: usize,
}

impl SiteCoord {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }

    /// Squared Euclidean distance in lattice units (exact integer, used
    /// as a deterministic tie-break key).
    pub fn dist2(self, other: SiteCoord) -> u64 {
        let dc = self.col as i64 - other.col as i64;
        let dr = self.row as i64 - other.row as i64;
        (dc * dc + dr * dr) as u64
    }

    /// Chebyshev distance: a lower bound on traversed sites for any path.
    pub fn chebyshev(self, other: SiteCoord) -> usize {
        let dc = self.col.abs_diff(other.col);
        let dr = self.row.abs_diff(other.row);
        dc.max(dr)
    }
}

impl std::fmt::Display for SiteCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.col, self.row)
    }
}

/// Rectangular grid of static tweezers with a physical pitch in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub pitch_um: f64,
}

/// Default pitch of the static array, in micrometers.
pub const DEFAULT_PITCH_UM: f64 = 5.4;

impl Default for GridGeometry {
    fn default() -> Self {
        Self::new(20, 20, DEFAULT_PITCH_UM).unwrap()
    }
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, pitch_um: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config("grid must be at least 1x1".into()));
        }
        if !(pitch_um > 0.0) {
            return Err(Error::InvalidParameter {
                name: "pitch_um",
                value: pitch_um,
                reason: "must be positive",
            });
        }
        Ok(Self {
            width,
            height,
            pitch_um,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.width * self.height
    }

    /// Nearest-neighbour spacing along a diagonal, pitch·√2.
    pub fn diagonal_pitch_um(&self) -> f64 {
        self.pitch_um * std::f64::consts::SQRT_2
    }

    pub fn contains(&self, site: SiteCoord) -> bool {
        site.col < self.width && site.row < self.height
    }

    pub fn index(&self, site: SiteCoord) -> usize {
        debug_assert!(self.contains(site));
        site.row * self.width + site.col
    }

    pub fn site_at(&self, index: usize) -> SiteCoord {
        SiteCoord::new(index % self.width, index / self.width)
    }

    /// All sites in row-major order.
    pub fn sites(&self) -> impl Iterator<Item = SiteCoord> + '_ {
        (0..self.n_sites()).map(|i| self.site_at(i))
    }

    pub fn check_matches(&self, other: &GridGeometry) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::GeometryMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Occupancy of one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Occupancy {
    Empty,
    Occupied(Species),
}

impl Occupancy {
    pub fn is_empty(self) -> bool {
        self == Occupancy::Empty
    }

    pub fn species(self) -> Option<Species> {
        match self {
            Occupancy::Empty => None,
            Occupancy::Occupied(s) => Some(s),
        }
    }
}

/// Occupancy of every site on the grid; the single mutable source of
/// truth driven by loading, move execution and loss application.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayState {
    geometry: GridGeometry,
    occupancy: Vec<Occupancy>,
}

impl ArrayState {
    /// All-empty state.
    pub fn empty(geometry: GridGeometry) -> Self {
        Self {
            occupancy: vec![Occupancy::Empty; geometry.n_sites()],
            geometry,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn occupancy(&self, site: SiteCoord) -> Occupancy {
        self.occupancy[self.geometry.index(site)]
    }

    pub fn is_empty(&self, site: SiteCoord) -> bool {
        self.occupancy(site).is_empty()
    }

    pub fn set(&mut self, site: SiteCoord, occ: Occupancy) {
        let idx = self.geometry.index(site);
        self.occupancy[idx] = occ;
    }

    /// Removes and returns the atom at `site`, if any.
    pub fn take(&mut self, site: SiteCoord) -> Option<Species> {
        let idx = self.geometry.index(site);
        let species = self.occupancy[idx].species();
        self.occupancy[idx] = Occupancy::Empty;
        species
    }

    pub fn atom_count(&self) -> usize {
        self.occupancy.iter().filter(|o| !o.is_empty()).count()
    }

    pub fn species_count(&self, species: Species) -> usize {
        self.occupancy
            .iter()
            .filter(|o| o.species() == Some(species))
            .count()
    }

    /// Occupied sites in row-major order.
    pub fn occupied_sites(&self) -> impl Iterator<Item = (SiteCoord, Species)> + '_ {
        self.occupancy.iter().enumerate().filter_map(|(i, o)| {
            o.species().map(|s| (self.geometry.site_at(i), s))
        })
    }
}

/// Per-site demand of a target pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Demand {
    TargetA,
    TargetB,
    NonTarget,
}

impl Demand {
    pub fn species(self) -> Option<Species> {
        match self {
            Demand::TargetA => Some(Species::A),
            Demand::TargetB => Some(Species::B),
            Demand::NonTarget => None,
        }
    }

    pub fn for_species(species: Species) -> Demand {
        match species {
            Species::A => Demand::TargetA,
            Species::B => Demand::TargetB,
        }
    }
}

/// Which species (if any) each site must end up holding.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPattern {
    geometry: GridGeometry,
    demand: Vec<Demand>,
}

impl TargetPattern {
    pub fn non_target(geometry: GridGeometry) -> Self {
        Self {
            demand: vec![Demand::NonTarget; geometry.n_sites()],
            geometry,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub(crate) fn geometry_mut(&mut self) -> &mut GridGeometry {
        &mut self.geometry
    }

    pub fn demand(&self, site: SiteCoord) -> Demand {
        self.demand[self.geometry.index(site)]
    }

    pub fn set_demand(&mut self, site: SiteCoord, demand: Demand) {
        let idx = self.geometry.index(site);
        self.demand[idx] = demand;
    }

    /// Target sites in row-major order.
    pub fn target_sites(&self) -> impl Iterator<Item = (SiteCoord, Species)> + '_ {
        self.demand.iter().enumerate().filter_map(|(i, d)| {
            d.species().map(|s| (self.geometry.site_at(i), s))
        })
    }

    pub fn count_targets(&self, species: Species) -> usize {
        self.demand
            .iter()
            .filter(|d| d.species() == Some(species))
            .count()
    }

    pub fn n_targets(&self) -> usize {
        self.demand.iter().filter(|d| **d != Demand::NonTarget).count()
    }

    /// True if the pattern demands both species somewhere (dual-species
    /// readout applies).
    pub fn is_dual_species(&self) -> bool {
        self.count_targets(Species::A) > 0 && self.count_targets(Species::B) > 0
    }
}

/// Classification of one site against a pattern. The five classes
/// partition the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteClass {
    /// Target site holding its demanded species.
    Finished,
    /// Target site that is empty.
    Void,
    /// Target site holding the wrong species.
    Misplaced,
    /// Non-target site holding an atom (a source candidate).
    ReservoirOccupied,
    /// Non-target site that is empty.
    ReservoirEmpty,
}

/// Classifies a single site; pure function of `(state, pattern)` there.
pub fn class_at(state: &ArrayState, pattern: &TargetPattern, site: SiteCoord) -> SiteClass {
    match (pattern.demand(site), state.occupancy(site)) {
        (Demand::NonTarget, Occupancy::Empty) => SiteClass::ReservoirEmpty,
        (Demand::NonTarget, Occupancy::Occupied(_)) => SiteClass::ReservoirOccupied,
        (d, Occupancy::Empty) => {
            debug_assert!(d.species().is_some());
            SiteClass::Void
        }
        (d, Occupancy::Occupied(s)) => {
            if d.species() == Some(s) {
                SiteClass::Finished
            } else {
                SiteClass::Misplaced
            }
        }
    }
}

/// Classifies every site, row-major.
pub fn classify(state: &ArrayState, pattern: &TargetPattern) -> Result<Vec<SiteClass>> {
    state.geometry().check_matches(pattern.geometry())?;
    Ok(state
        .geometry()
        .sites()
        .map(|site| class_at(state, pattern, site))
        .collect())
}

/// Summary of defects (voids + misplaced) in a classified state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DefectCount {
    pub voids: usize,
    pub misplaced: usize,
}

impl DefectCount {
    pub fn total(&self) -> usize {
        self.voids + self.misplaced
    }

    pub fn is_defect_free(&self) -> bool {
        self.total() == 0
    }
}

pub fn count_defects(state: &ArrayState, pattern: &TargetPattern) -> DefectCount {
    let mut count = DefectCount::default();
    for (site, _) in pattern.target_sites() {
        match class_at(state, pattern, site) {
            SiteClass::Void => count.voids += 1,
            SiteClass::Misplaced => count.misplaced += 1,
            _ => {}
        }
    }
    count
}

/// Fraction of target sites that are finished.
pub fn filling_fraction(state: &ArrayState, pattern: &TargetPattern) -> f64 {
    let total = pattern.n_targets();
    if total == 0 {
        return 1.0;
    }
    let finished = pattern
        .target_sites()
        .filter(|&(site, _)| class_at(state, pattern, site) == SiteClass::Finished)
        .count();
    finished as f64 / total as f64
}

/// Per-species atom supply versus demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Feasibility {
    pub available_a: usize,
    pub required_a: usize,
    pub available_b: usize,
    pub required_b: usize,
    pub solvable: bool,
}

/// Checks whether enough atoms of each species exist anywhere in the grid
/// to satisfy the pattern.
pub fn feasibility(state: &ArrayState, pattern: &TargetPattern) -> Result<Feasibility> {
    state.geometry().check_matches(pattern.geometry())?;
    let available_a = state.species_count(Species::A);
    let available_b = state.species_count(Species::B);
    let required_a = pattern.count_targets(Species::A);
    let required_b = pattern.count_targets(Species::B);
    Ok(Feasibility {
        available_a,
        required_a,
        available_b,
        required_b,
        solvable: available_a >= required_a && available_b >= required_b,
    })
}

/// Axis-aligned rectangle of sites, used to place pattern regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub col: usize,
    pub row: usize,
    pub width: usize,
    pub height: usize,
}

impl Region {
    pub fn new(col: usize, row: usize, width: usize, height: usize) -> Self {
        Self {
            col,
            row,
            width,
            height,
        }
    }

    /// Rectangle of the given size centered on the grid (rounding the
    /// offset down when the margins are odd).
    pub fn centered(geometry: &GridGeometry, width: usize, height: usize) -> Self {
        Self {
            col: geometry.width.saturating_sub(width) / 2,
            row: geometry.height.saturating_sub(height) / 2,
            width,
            height,
        }
    }

    pub fn fits(&self, geometry: &GridGeometry) -> bool {
        self.width >= 1
            && self.height >= 1
            && self.col + self.width <= geometry.width
            && self.row + self.height <= geometry.height
    }

    pub fn contains(&self, site: SiteCoord) -> bool {
        site.col >= self.col
            && site.col < self.col + self.width
            && site.row >= self.row
            && site.row < self.row + self.height
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}@({},{})", self.width, self.height, self.col, self.row)
    }
}

/// Boolean mask for arbitrary single-species patterns, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn is_set(&self, col: usize, row: usize) -> bool {
        self.cells[row * self.width + col]
    }
}

/// Pattern generators.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternKind {
    /// Species A where `(col + row)` is even (absolute grid parity),
    /// species B where odd, within the region.
    Checkerboard,
    /// Species A on even rows of the region, species B on odd rows.
    Zebra,
    /// Species A exactly on the set cells of the mask, anchored at the
    /// region origin; mask dimensions must equal the region's.
    SingleSpeciesMask(Mask),
}

/// Builds a target pattern from a generator over a region of the grid.
/// Everything outside the region (and unset mask cells) is non-target.
pub fn make_pattern(
    geometry: GridGeometry,
    kind: &PatternKind,
    region: Region,
) -> Result<TargetPattern> {
    if !region.fits(&geometry) {
        return Err(Error::RegionOutOfBounds(region.to_string()));
    }
    if let PatternKind::SingleSpeciesMask(mask) = kind {
        if mask.width != region.width || mask.height != region.height {
            return Err(Error::MaskMismatch(format!(
                "mask is {}x{}, region is {}x{}",
                mask.width, mask.height, region.width, region.height
            )));
        }
    }
    let mut pattern = TargetPattern::non_target(geometry);
    for r in 0..region.height {
        for c in 0..region.width {
            let site = SiteCoord::new(region.col + c, region.row + r);
            let demand = match kind {
                PatternKind::Checkerboard => {
                    if (site.col + site.row) % 2 == 0 {
                        Demand::TargetA
                    } else {
                        Demand::TargetB
                    }
                }
                PatternKind::Zebra => {
                    if r % 2 == 0 {
                        Demand::TargetA
                    } else {
                        Demand::TargetB
                    }
                }
                PatternKind::SingleSpeciesMask(mask) => {
                    if mask.is_set(c, r) {
                        Demand::TargetA
                    } else {
                        Demand::NonTarget
                    }
                }
            };
            pattern.set_demand(site, demand);
        }
    }
    Ok(pattern)
}

/// Loads every site independently: occupied with probability `p_load`,
/// species A with probability `r_a` given occupied. Deterministic for a
/// fixed random source.
pub fn load_random(
    geometry: GridGeometry,
    loss_model: &LossModel,
    rng: &mut RandomSource,
) -> Result<ArrayState> {
    for (name, value) in [("p_load", loss_model.p_load), ("r_a", loss_model.r_a)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidProbability { name, value });
        }
    }
    let mut state = ArrayState::empty(geometry);
    for site in geometry.sites() {
        if rng.chance(loss_model.p_load) {
            let species = if rng.chance(loss_model.r_a) {
                Species::A
            } else {
                Species::B
            };
            state.set(site, Occupancy::Occupied(species));
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(w: usize, h: usize) -> GridGeometry {
        GridGeometry::new(w, h, DEFAULT_PITCH_UM).unwrap()
    }

    #[test]
    fn diagonal_pitch_exceeds_clearance_bound() {
        let g = GridGeometry::default();
        assert!((g.diagonal_pitch_um() - 7.64).abs() < 0.01);
        assert!(g.diagonal_pitch_um() > 7.0);
    }

    #[test]
    fn checkerboard_parity_on_2x2() {
        let pattern =
            make_pattern(geo(2, 2), &PatternKind::Checkerboard, Region::new(0, 0, 2, 2)).unwrap();
        assert_eq!(pattern.demand(SiteCoord::new(0, 0)), Demand::TargetA);
        assert_eq!(pattern.demand(SiteCoord::new(1, 0)), Demand::TargetB);
        assert_eq!(pattern.demand(SiteCoord::new(0, 1)), Demand::TargetB);
        assert_eq!(pattern.demand(SiteCoord::new(1, 1)), Demand::TargetA);
    }

    #[test]
    fn zebra_12x10_has_60_of_each_species() {
        let g = geo(20, 20);
        let pattern =
            make_pattern(g, &PatternKind::Zebra, Region::centered(&g, 12, 10)).unwrap();
        assert_eq!(pattern.count_targets(Species::A), 60);
        assert_eq!(pattern.count_targets(Species::B), 60);
    }

    #[test]
    fn checkerboard_12x10_has_60_of_each_species() {
        let g = geo(20, 20);
        let pattern =
            make_pattern(g, &PatternKind::Checkerboard, Region::centered(&g, 12, 10)).unwrap();
        assert_eq!(pattern.count_targets(Species::A), 60);
        assert_eq!(pattern.count_targets(Species::B), 60);
    }

    #[test]
    fn plus_sign_mask_has_five_targets() {
        let mask = Mask {
            width: 3,
            height: 3,
            cells: vec![false, true, false, true, true, true, false, true, false],
        };
        let pattern = make_pattern(
            geo(5, 5),
            &PatternKind::SingleSpeciesMask(mask),
            Region::new(1, 1, 3, 3),
        )
        .unwrap();
        assert_eq!(pattern.count_targets(Species::A), 5);
        assert_eq!(pattern.count_targets(Species::B), 0);
        assert_eq!(pattern.demand(SiteCoord::new(2, 2)), Demand::TargetA);
        assert_eq!(pattern.demand(SiteCoord::new(1, 1)), Demand::NonTarget);
    }

    #[test]
    fn region_out_of_bounds_is_rejected() {
        let err = make_pattern(geo(4, 4), &PatternKind::Zebra, Region::new(2, 2, 4, 4));
        assert!(matches!(err, Err(Error::RegionOutOfBounds(_))));
    }

    #[test]
    fn mask_dimension_mismatch_is_rejected() {
        let mask = Mask {
            width: 2,
            height: 2,
            cells: vec![true; 4],
        };
        let err = make_pattern(
            geo(5, 5),
            &PatternKind::SingleSpeciesMask(mask),
            Region::new(0, 0, 3, 3),
        );
        assert!(matches!(err, Err(Error::MaskMismatch(_))));
    }

    #[test]
    fn classify_covers_all_five_classes() {
        let g = geo(2, 2);
        let mut pattern = TargetPattern::non_target(g);
        pattern.set_demand(SiteCoord::new(0, 0), Demand::TargetA);
        pattern.set_demand(SiteCoord::new(1, 0), Demand::TargetA);
        pattern.set_demand(SiteCoord::new(0, 1), Demand::TargetB);
        let mut state = ArrayState::empty(g);
        state.set(SiteCoord::new(0, 0), Occupancy::Occupied(Species::A));
        state.set(SiteCoord::new(0, 1), Occupancy::Occupied(Species::A));
        state.set(SiteCoord::new(1, 1), Occupancy::Occupied(Species::B));

        let classes = classify(&state, &pattern).unwrap();
        assert_eq!(classes[g.index(SiteCoord::new(0, 0))], SiteClass::Finished);
        assert_eq!(classes[g.index(SiteCoord::new(1, 0))], SiteClass::Void);
        assert_eq!(classes[g.index(SiteCoord::new(0, 1))], SiteClass::Misplaced);
        assert_eq!(
            classes[g.index(SiteCoord::new(1, 1))],
            SiteClass::ReservoirOccupied
        );

        // Re-running on an unchanged state yields identical output.
        assert_eq!(classes, classify(&state, &pattern).unwrap());
    }

    #[test]
    fn classify_rejects_geometry_mismatch() {
        let state = ArrayState::empty(geo(2, 2));
        let pattern = TargetPattern::non_target(geo(3, 3));
        assert!(matches!(
            classify(&state, &pattern),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn feasibility_boundary_cases() {
        let g = geo(10, 10);
        let pattern = make_pattern(g, &PatternKind::Zebra, Region::new(0, 0, 10, 10)).unwrap();
        assert_eq!(pattern.count_targets(Species::A), 50);

        let mut state = ArrayState::empty(g);
        let mut placed = 0;
        for site in g.sites() {
            if placed < 50 {
                state.set(site, Occupancy::Occupied(Species::A));
                placed += 1;
            }
        }
        // 50 A atoms, 50 A targets: solvable for A, not for B.
        let f = feasibility(&state, &pattern).unwrap();
        assert_eq!(f.available_a, 50);
        assert!(!f.solvable);

        // One less A atom than required.
        state.take(SiteCoord::new(0, 0));
        let f = feasibility(&state, &pattern).unwrap();
        assert_eq!(f.available_a, 49);
        assert!(f.available_a < f.required_a);
    }

    #[test]
    fn load_random_degenerate_probabilities() {
        let g = geo(3, 3);
        let mut model = LossModel::default();
        model.p_load = 1.0;
        model.r_a = 1.0;
        let state = load_random(g, &model, &mut RandomSource::new(0, 0)).unwrap();
        assert_eq!(state.species_count(Species::A), 9);
        assert_eq!(state.species_count(Species::B), 0);

        model.p_load = 0.0;
        let state = load_random(g, &model, &mut RandomSource::new(0, 0)).unwrap();
        assert_eq!(state.atom_count(), 0);
    }

    #[test]
    fn load_random_rejects_invalid_probability() {
        let mut model = LossModel::default();
        model.p_load = 1.5;
        assert!(matches!(
            load_random(geo(2, 2), &model, &mut RandomSource::new(0, 0)),
            Err(Error::InvalidProbability { .. })
        ));
    }

    #[test]
    fn load_random_is_seed_deterministic() {
        let g = geo(8, 8);
        let model = LossModel::default();
        let a = load_random(g, &model, &mut RandomSource::new(9, 3)).unwrap();
        let b = load_random(g, &model, &mut RandomSource::new(9, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn load_random_matches_binomial_mean() {
        // 20x20 grid at p_load = 0.6: mean occupied over many seeds must
        // sit within 3 standard errors of 240.
        let g = geo(20, 20);
        let model = LossModel::default();
        let n_seeds = 2000u64;
        let mut total = 0usize;
        for stream in 0..n_seeds {
            let state = load_random(g, &model, &mut RandomSource::new(77, stream)).unwrap();
            total += state.atom_count();
        }
        let mean = total as f64 / n_seeds as f64;
        let per_seed_sd = (400.0 * 0.6 * 0.4f64).sqrt();
        let se = per_seed_sd / (n_seeds as f64).sqrt();
        assert!(
            (mean - 240.0).abs() < 3.0 * se,
            "mean {mean} vs 240 +- {}",
            3.0 * se
        );
    }
}
