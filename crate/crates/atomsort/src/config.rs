//! Run configuration: one TOML document validated up front, with every
//! field defaulted to the flagship setup (20x20 grid at 5.4 µm pitch, a
//! centered 12x10 dual-species region, 29 s lifetime, 0.2/0.8/0.2 ms move
//! timing). Unknown keys are rejected, and every report embeds the
//! resolved config's hash so outputs are traceable to their inputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gridio::mask_from_text;
use crate::lattice::{make_pattern, GridGeometry, PatternKind, Region, TargetPattern};
use crate::pathing::{DirectionMode, MoveRules, MoveTiming};
use crate::physics::LossModel;
use crate::planner::Algorithm;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub pattern: PatternSection,
    pub rules: RulesSection,
    pub run: RunSection,
    pub loss: LossSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSection::default(),
            pattern: PatternSection::default(),
            rules: RulesSection::default(),
            run: RunSection::default(),
            loss: LossSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub width: usize,
    pub height: usize,
    pub pitch_um: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            pitch_um: crate::lattice::DEFAULT_PITCH_UM,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternSection {
    /// `checkerboard`, `zebra`, or `mask`.
    pub kind: String,
    pub region_width: usize,
    pub region_height: usize,
    /// Region origin; omitted means centered.
    pub region_col: Option<usize>,
    pub region_row: Option<usize>,
    /// Required when `kind = "mask"`; resolved relative to the config
    /// file's directory.
    pub mask_path: Option<String>,
}

impl Default for PatternSection {
    fn default() -> Self {
        Self {
            kind: "checkerboard".into(),
            region_width: 12,
            region_height: 10,
            region_col: None,
            region_row: None,
            mask_path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RulesSection {
    /// 4 or 8.
    pub directions: u8,
    pub max_segments: usize,
    pub strict_diagonal: bool,
}

impl Default for RulesSection {
    fn default() -> Self {
        Self {
            directions: 8,
            max_segments: 3,
            strict_diagonal: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub algorithm: Algorithm,
    pub n_cycles: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Hha8,
            n_cycles: 10,
            trials: 500,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub p_load: f64,
    pub r_a: f64,
    pub eta_pick: f64,
    pub eta_release: f64,
    pub eta_transit_per_site: f64,
    pub q_image_same: f64,
    /// Cross-talk survival applied to both species unless overridden.
    pub q_image_cross: f64,
    pub q_image_cross_a: Option<f64>,
    pub q_image_cross_b: Option<f64>,
    pub tau_vacuum_s: f64,
    pub t_image_ms: f64,
    pub t_pick_ms: f64,
    pub t_transport_floor_ms: f64,
    pub t_release_ms: f64,
    pub speed_um_per_ms: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        let model = LossModel::default();
        Self {
            p_load: model.p_load,
            r_a: model.r_a,
            eta_pick: model.eta_pick,
            eta_release: model.eta_release,
            eta_transit_per_site: model.eta_transit_per_site,
            q_image_same: model.q_image_same,
            q_image_cross: model.q_image_cross_a,
            q_image_cross_a: None,
            q_image_cross_b: None,
            tau_vacuum_s: model.tau_vacuum_s,
            t_image_ms: model.t_image_ms,
            t_pick_ms: model.timing.t_pick_ms,
            t_transport_floor_ms: model.timing.t_transport_floor_ms,
            t_release_ms: model.timing.t_release_ms,
            speed_um_per_ms: model.timing.speed_um_per_ms,
        }
    }
}

impl LossSection {
    pub fn to_loss_model(&self) -> LossModel {
        LossModel {
            p_load: self.p_load,
            r_a: self.r_a,
            eta_pick: self.eta_pick,
            eta_release: self.eta_release,
            eta_transit_per_site: self.eta_transit_per_site,
            q_image_same: self.q_image_same,
            q_image_cross_a: self.q_image_cross_a.unwrap_or(self.q_image_cross),
            q_image_cross_b: self.q_image_cross_b.unwrap_or(self.q_image_cross),
            tau_vacuum_s: self.tau_vacuum_s,
            t_image_ms: self.t_image_ms,
            timing: MoveTiming {
                t_pick_ms: self.t_pick_ms,
                t_transport_floor_ms: self.t_transport_floor_ms,
                t_release_ms: self.t_release_ms,
                speed_um_per_ms: self.speed_um_per_ms,
            },
        }
    }

    pub fn from_loss_model(model: &LossModel) -> Self {
        Self {
            p_load: model.p_load,
            r_a: model.r_a,
            eta_pick: model.eta_pick,
            eta_release: model.eta_release,
            eta_transit_per_site: model.eta_transit_per_site,
            q_image_same: model.q_image_same,
            q_image_cross: model.q_image_cross_a,
            q_image_cross_a: Some(model.q_image_cross_a),
            q_image_cross_b: Some(model.q_image_cross_b),
            tau_vacuum_s: model.tau_vacuum_s,
            t_image_ms: model.t_image_ms,
            t_pick_ms: model.timing.t_pick_ms,
            t_transport_floor_ms: model.timing.t_transport_floor_ms,
            t_release_ms: model.timing.t_release_ms,
            speed_um_per_ms: model.timing.speed_um_per_ms,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config file; mask paths resolve relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)?;
        let config = Self::from_toml_str(&text)?;
        let base = path.parent().map(PathBuf::from).unwrap_or_default();
        Ok((config, base))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the canonical serialized form of the resolved config.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        crate::gridio::to_hex(&hasher.finalize())
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        self.move_rules()?;
        self.loss.to_loss_model().validate()?;
        match self.pattern.kind.as_str() {
            "checkerboard" | "zebra" => {}
            "mask" => {
                if self.pattern.mask_path.is_none() {
                    return Err(Error::Config(
                        "pattern.kind = \"mask\" requires pattern.mask_path".into(),
                    ));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown pattern.kind {other:?}; expected checkerboard, zebra or mask"
                )))
            }
        }
        if self.run.n_cycles == 0 {
            return Err(Error::Config("run.n_cycles must be at least 1".into()));
        }
        if self.run.trials == 0 {
            return Err(Error::Config("run.trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.grid.width, self.grid.height, self.grid.pitch_um)
    }

    pub fn move_rules(&self) -> Result<MoveRules> {
        let directions = match self.rules.directions {
            4 => DirectionMode::Four,
            8 => DirectionMode::Eight,
            other => {
                return Err(Error::Config(format!(
                    "rules.directions must be 4 or 8, got {other}"
                )))
            }
        };
        if self.rules.max_segments == 0 {
            return Err(Error::Config("rules.max_segments must be at least 1".into()));
        }
        Ok(MoveRules {
            directions,
            max_segments: self.rules.max_segments,
            strict_diagonal: self.rules.strict_diagonal,
        })
    }

    pub fn region(&self) -> Result<Region> {
        let geometry = self.geometry()?;
        let mut region = Region::centered(&geometry, self.pattern.region_width, self.pattern.region_height);
        if let Some(col) = self.pattern.region_col {
            region.col = col;
        }
        if let Some(row) = self.pattern.region_row {
            region.row = row;
        }
        Ok(region)
    }

    /// Builds the target pattern, reading the mask file if one is named.
    pub fn resolve_pattern(&self, base_dir: &Path) -> Result<TargetPattern> {
        let geometry = self.geometry()?;
        let region = self.region()?;
        let kind = match self.pattern.kind.as_str() {
            "checkerboard" => PatternKind::Checkerboard,
            "zebra" => PatternKind::Zebra,
            "mask" => {
                let rel = self.pattern.mask_path.as_ref().ok_or_else(|| {
                    Error::Config("pattern.kind = \"mask\" requires pattern.mask_path".into())
                })?;
                let path = base_dir.join(rel);
                let mask = mask_from_text(&std::fs::read_to_string(&path)?)?;
                PatternKind::SingleSpeciesMask(mask)
            }
            other => {
                return Err(Error::Config(format!("unknown pattern.kind {other:?}")));
            }
        };
        make_pattern(geometry, &kind, region)
    }

    pub fn loss_model(&self) -> LossModel {
        self.loss.to_loss_model()
    }
}
