//! Geometry constants and problem-size presets, loadable from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub cover: CoverConfig,
    pub blocks: BlocksConfig,
    pub painting: PaintingConfig,
}

impl DomainConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        let count_ok = |r: [usize; 2]| r[0] >= 1 && r[0] <= r[1];
        let c = &self.cover;
        if c.allowed_regions.is_empty() || !c.allowed_regions.iter().all(|r| range_ok(*r)) {
            return bad("cover.allowed_regions must be non-empty ordered ranges");
        }
        if !range_ok(c.block_width)
            || !range_ok(c.target_width)
            || c.target_width[1] >= c.block_width[0]
        {
            return bad("cover widths must be ordered and targets narrower than blocks");
        }
        if !count_ok(c.train_objects) || !count_ok(c.eval_objects) {
            return bad("cover object counts must be ordered and positive");
        }
        let b = &self.blocks;
        if !(b.block_size > 0.0) || !count_ok(b.train_blocks) || !count_ok(b.eval_blocks) {
            return bad("blocks sizes must be positive");
        }
        let p = &self.painting;
        if !(p.object_size > 0.0) || !count_ok(p.train_objects) || !count_ok(p.eval_objects) {
            return bad("painting sizes must be positive");
        }
        for r in [&p.table, &p.shelf, &p.box_region] {
            if !range_ok(r.x) || !range_ok(r.y) {
                return bad("painting regions must be ordered ranges");
            }
        }
        if !(0.0..=1.0).contains(&p.p_clean) || !(0.0..=1.0).contains(&p.p_dry) {
            return bad("painting probabilities must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverConfig {
    /// Sub-intervals of `[0, 1]` where picks and places may happen.
    pub allowed_regions: Vec<[f64; 2]>,
    pub block_width: [f64; 2],
    pub target_width: [f64; 2],
    /// Interval where blocks start.
    pub block_zone: [f64; 2],
    /// Interval where targets lie.
    pub target_zone: [f64; 2],
    /// Inclusive range for the number of block/target pairs.
    pub train_objects: [usize; 2],
    pub eval_objects: [usize; 2],
}

impl Default for CoverConfig {
    fn default() -> Self {
        Self {
            allowed_regions: vec![[0.05, 0.45], [0.55, 0.95]],
            block_width: [0.10, 0.14],
            target_width: [0.04, 0.07],
            block_zone: [0.05, 0.45],
            target_zone: [0.55, 0.95],
            train_objects: [1, 2],
            eval_objects: [2, 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlocksConfig {
    pub block_size: f64,
    /// The table is the square `[0, workspace]^2`.
    pub workspace: f64,
    pub train_blocks: [usize; 2],
    pub eval_blocks: [usize; 2],
}

impl Default for BlocksConfig {
    fn default() -> Self {
        Self {
            block_size: 0.1,
            workspace: 1.0,
            train_blocks: [3, 4],
            eval_blocks: [5, 6],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaintingConfig {
    /// Side length of the square object footprint (also its height).
    pub object_size: f64,
    pub table: Region,
    pub shelf: Region,
    #[serde(rename = "box")]
    pub box_region: Region,
    pub shelf_color: f64,
    pub box_color: f64,
    /// Maximum horizontal distance between the gripper and the object
    /// center for a pick to succeed.
    pub grip_tolerance: f64,
    /// Maximum horizontal distance between base and gripper.
    pub reach: f64,
    pub p_clean: f64,
    pub p_dry: f64,
    pub train_objects: [usize; 2],
    pub eval_objects: [usize; 2],
}

impl Default for PaintingConfig {
    fn default() -> Self {
        Self {
            object_size: 0.08,
            table: Region {
                x: [0.0, 1.0],
                y: [0.0, 0.5],
            },
            shelf: Region {
                x: [1.2, 2.4],
                y: [0.55, 1.0],
            },
            box_region: Region {
                x: [1.2, 2.4],
                y: [0.0, 0.45],
            },
            shelf_color: 0.3,
            box_color: 0.7,
            grip_tolerance: 0.05,
            reach: 0.6,
            p_clean: 0.5,
            p_dry: 0.5,
            train_objects: [3, 4],
            eval_objects: [7, 8],
        }
    }
}
