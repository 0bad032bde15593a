//! Text formats for states, patterns and masks.
//!
//! Two interchangeable encodings exist for states and patterns: a TOML
//! document carrying geometry plus packed row-strings, and a bare ASCII
//! grid for quick human diffing. Occupancy rows use `.`/`A`/`B`; pattern
//! rows use `.`/`a`/`b` (lowercase marks an unfilled target site). Mask
//! files are grids of `#` (target) and `.` (ignore).

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{
    class_at, ArrayState, Demand, GridGeometry, Mask, Occupancy, SiteClass, SiteCoord,
    Species, TargetPattern, DEFAULT_PITCH_UM,
};

/// Renders occupancy as one row-string per grid row.
pub fn state_to_ascii(state: &ArrayState) -> String {
    let g = state.geometry();
    let mut out = String::with_capacity((g.width + 1) * g.height);
    for row in 0..g.height {
        for col in 0..g.width {
            out.push(match state.occupancy(SiteCoord::new(col, row)) {
                Occupancy::Empty => '.',
                Occupancy::Occupied(s) => s.letter(),
            });
        }
        out.push('\n');
    }
    out
}

/// Parses an ASCII occupancy grid. Pitch is not part of the ASCII form,
/// so the default is assumed.
pub fn state_from_ascii(text: &str) -> Result<ArrayState> {
    let rows = non_empty_lines(text);
    let geometry = geometry_from_rows(&rows)?;
    let mut state = ArrayState::empty(geometry);
    fill_occupancy(&mut state, &rows)?;
    Ok(state)
}

/// Renders demand as one row-string per grid row.
pub fn pattern_to_ascii(pattern: &TargetPattern) -> String {
    let g = pattern.geometry();
    let mut out = String::with_capacity((g.width + 1) * g.height);
    for row in 0..g.height {
        for col in 0..g.width {
            out.push(match pattern.demand(SiteCoord::new(col, row)) {
                Demand::NonTarget => '.',
                Demand::TargetA => 'a',
                Demand::TargetB => 'b',
            });
        }
        out.push('\n');
    }
    out
}

/// Parses an ASCII demand grid (`.`/`a`/`b`; uppercase accepted).
pub fn pattern_from_ascii(text: &str) -> Result<TargetPattern> {
    let rows = non_empty_lines(text);
    let geometry = geometry_from_rows(&rows)?;
    let mut pattern = TargetPattern::non_target(geometry);
    for (row, line) in rows.iter().enumerate() {
        for (col, ch) in line.chars().enumerate() {
            let demand = match ch {
                '.' => Demand::NonTarget,
                'a' | 'A' => Demand::TargetA,
                'b' | 'B' => Demand::TargetB,
                other => {
                    return Err(Error::Parse(format!(
                        "unexpected character {other:?} at ({col},{row}) in pattern grid"
                    )))
                }
            };
            pattern.set_demand(SiteCoord::new(col, row), demand);
        }
    }
    Ok(pattern)
}

/// Human diff view of a state against its pattern: atoms print uppercase,
/// unfilled targets print the demanded species lowercase, empty reservoir
/// prints `.`.
pub fn render_overlay(state: &ArrayState, pattern: &TargetPattern) -> Result<String> {
    state.geometry().check_matches(pattern.geometry())?;
    let g = state.geometry();
    let mut out = String::with_capacity((g.width + 1) * g.height);
    for row in 0..g.height {
        for col in 0..g.width {
            let site = SiteCoord::new(col, row);
            out.push(match class_at(state, pattern, site) {
                SiteClass::Void => match pattern.demand(site) {
                    Demand::TargetA => 'a',
                    Demand::TargetB => 'b',
                    Demand::NonTarget => unreachable!(),
                },
                SiteClass::ReservoirEmpty => '.',
                _ => state
                    .occupancy(site)
                    .species()
                    .map(Species::letter)
                    .unwrap_or('.'),
            });
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a `#`/`.` mask grid.
pub fn mask_from_text(text: &str) -> Result<Mask> {
    let rows = non_empty_lines(text);
    if rows.is_empty() {
        return Err(Error::Parse("mask grid is empty".into()));
    }
    let width = rows[0].chars().count();
    let mut cells = Vec::with_capacity(width * rows.len());
    for (row, line) in rows.iter().enumerate() {
        if line.chars().count() != width {
            return Err(Error::MaskMismatch(format!(
                "row {row} has {} cells, expected {width}",
                line.chars().count()
            )));
        }
        for (col, ch) in line.chars().enumerate() {
            cells.push(match ch {
                '#' => true,
                '.' => false,
                other => {
                    return Err(Error::Parse(format!(
                        "unexpected character {other:?} at ({col},{row}) in mask grid"
                    )))
                }
            });
        }
    }
    Ok(Mask {
        width,
        height: rows.len(),
        cells,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    width: usize,
    height: usize,
    pitch_um: f64,
    rows: Vec<String>,
}

/// Serializes a state to its TOML document form.
pub fn state_to_toml(state: &ArrayState) -> String {
    let g = state.geometry();
    let doc = GridDoc {
        width: g.width,
        height: g.height,
        pitch_um: g.pitch_um,
        rows: state_to_ascii(state).lines().map(String::from).collect(),
    };
    toml::to_string(&doc).expect("grid document serializes")
}

/// Parses a state from its TOML document form.
pub fn state_from_toml(text: &str) -> Result<ArrayState> {
    let doc: GridDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let geometry = GridGeometry::new(doc.width, doc.height, doc.pitch_um)?;
    check_row_shape(&doc, &geometry)?;
    let mut state = ArrayState::empty(geometry);
    fill_occupancy(&mut state, &doc.rows)?;
    Ok(state)
}

/// Serializes a pattern to its TOML document form.
pub fn pattern_to_toml(pattern: &TargetPattern) -> String {
    let g = pattern.geometry();
    let doc = GridDoc {
        width: g.width,
        height: g.height,
        pitch_um: g.pitch_um,
        rows: pattern_to_ascii(pattern).lines().map(String::from).collect(),
    };
    toml::to_string(&doc).expect("grid document serializes")
}

/// Parses a pattern from its TOML document form.
pub fn pattern_from_toml(text: &str) -> Result<TargetPattern> {
    let doc: GridDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let geometry = GridGeometry::new(doc.width, doc.height, doc.pitch_um)?;
    check_row_shape(&doc, &geometry)?;
    pattern_from_ascii(&doc.rows.join("\n")).map(|mut p| {
        // Re-parse loses pitch; restore the documented one.
        *p.geometry_mut() = geometry;
        p
    })
}

/// SHA-256 over the canonical TOML form; identifies the state a plan was
/// computed for.
pub fn state_fingerprint(state: &ArrayState) -> String {
    let mut hasher = Sha256::new();
    hasher.update(state_to_toml(state).as_bytes());
    to_hex(&hasher.finalize())
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn non_empty_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

fn geometry_from_rows(rows: &[String]) -> Result<GridGeometry> {
    if rows.is_empty() {
        return Err(Error::Parse("grid is empty".into()));
    }
    let width = rows[0].chars().count();
    for (i, row) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(Error::Parse(format!(
                "row {i} has {} sites, expected {width}",
                row.chars().count()
            )));
        }
    }
    GridGeometry::new(width, rows.len(), DEFAULT_PITCH_UM)
}

fn check_row_shape(doc: &GridDoc, geometry: &GridGeometry) -> Result<()> {
    if doc.rows.len() != geometry.height
        || doc.rows.iter().any(|r| r.chars().count() != geometry.width)
    {
        return Err(Error::Parse(format!(
            "row strings do not match the declared {}x{} geometry",
            geometry.width, geometry.height
        )));
    }
    Ok(())
}

fn fill_occupancy(state: &mut ArrayState, rows: &[String]) -> Result<()> {
    for (row, line) in rows.iter().enumerate() {
        for (col, ch) in line.chars().enumerate() {
            let occ = match ch {
                '.' => Occupancy::Empty,
                'A' => Occupancy::Occupied(Species::A),
                'B' => Occupancy::Occupied(Species::B),
                other => {
                    return Err(Error::Parse(format!(
                        "unexpected character {other:?} at ({col},{row}) in occupancy grid"
                    )))
                }
            };
            state.set(SiteCoord::new(col, row), occ);
        }
    }
    Ok(())
}
