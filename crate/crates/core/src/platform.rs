//! Platform configuration: mesh dimensions, clocking, memory sizes,
//! off-chip windows and link rates. Configs are loaded from a versioned
//! TOML file; the bundled presets mirror shipped Epiphany products.

use serde::{Deserialize, Serialize};

use crate::addr::{NodeAddress, MAX_COORD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    North,
    East,
    West,
    South,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::North, Side::East, Side::West, Side::South];

    pub fn index(self) -> usize {
        match self {
            Side::North => 0,
            Side::East => 1,
            Side::West => 2,
            Side::South => 3,
        }
    }
}

/// A rectangle of off-chip node coordinates backed by external memory.
/// Each coordinate in the rectangle owns a full 1 MiB local space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalWindow {
    pub name: String,
    /// Chip edge whose eLink bridges traffic to this window.
    pub side: Side,
    pub rows: [u8; 2],
    pub cols: [u8; 2],
}

impl ExternalWindow {
    pub fn contains(&self, node: NodeAddress) -> bool {
        node.row >= self.rows[0]
            && node.row <= self.rows[1]
            && node.col >= self.cols[0]
            && node.col <= self.cols[1]
    }

    pub fn node_count(&self) -> usize {
        (self.rows[1] - self.rows[0] + 1) as usize * (self.cols[1] - self.cols[0] + 1) as usize
    }

    /// Row-major index of `node` within the window's coordinate rectangle.
    pub fn node_index(&self, node: NodeAddress) -> u64 {
        debug_assert!(self.contains(node));
        let w = (self.cols[1] - self.cols[0] + 1) as u64;
        (node.row - self.rows[0]) as u64 * w + (node.col - self.cols[0]) as u64
    }
}

fn default_link_bytes() -> u32 {
    8
}
fn default_elink_rate() -> f64 {
    1.0
}
fn default_version() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElinkRates {
    #[serde(default = "default_elink_rate")]
    pub north: f64,
    #[serde(default = "default_elink_rate")]
    pub east: f64,
    #[serde(default = "default_elink_rate")]
    pub west: f64,
    #[serde(default = "default_elink_rate")]
    pub south: f64,
}

impl Default for ElinkRates {
    fn default() -> Self {
        ElinkRates { north: 1.0, east: 1.0, west: 1.0, south: 1.0 }
    }
}

impl ElinkRates {
    pub fn get(&self, side: Side) -> f64 {
        match side {
            Side::North => self.north,
            Side::East => self.east,
            Side::West => self.west,
            Side::South => self.south,
        }
    }

    pub fn sum(&self) -> f64 {
        self.north + self.east + self.west + self.south
    }
}

/// A simulated chip or board.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlatformConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub name: String,
    pub rows: u8,
    pub cols: u8,
    /// Coordinate of grid position (0,0).
    pub origin: [u8; 2],
    pub clock_hz: u64,
    pub core_mem_bytes: u32,
    #[serde(default = "default_link_bytes")]
    pub link_bytes_per_cycle: u32,
    /// Tile size of one physical chip; boundaries between tiles cross an
    /// eLink. Defaults to the whole grid (single chip).
    #[serde(default)]
    pub chip_rows: u8,
    #[serde(default)]
    pub chip_cols: u8,
    /// Bytes per cycle per direction across each chip edge.
    #[serde(default)]
    pub elink_rates: ElinkRates,
    #[serde(default, rename = "external_window")]
    pub external_windows: Vec<ExternalWindow>,
    /// Optional work-group partition for SYNC/MBKPT/WAND; each entry lists
    /// grid-relative (row, col) members. Default: all cores in one group.
    #[serde(default)]
    pub work_groups: Vec<Vec<[u8; 2]>>,
    /// Route host accesses through the xMesh bridge instead of touching
    /// memory out of band.
    #[serde(default)]
    pub host_via_mesh: bool,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

impl PlatformConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: PlatformConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.version != 1 {
            return Err(ConfigError::Invalid(format!("unsupported version {}", cfg.version)));
        }
        if cfg.chip_rows == 0 {
            cfg.chip_rows = cfg.rows;
        }
        if cfg.chip_cols == 0 {
            cfg.chip_cols = cfg.cols;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::Invalid(m));
        if self.rows == 0 || self.cols == 0 {
            return err("grid must have at least one core".into());
        }
        let max_row = self.origin[0] as u32 + self.rows as u32;
        let max_col = self.origin[1] as u32 + self.cols as u32;
        if max_row > MAX_COORD as u32 || max_col > MAX_COORD as u32 {
            return err(format!(
                "grid {}x{} at origin ({},{}) exceeds the 64x64 coordinate space",
                self.rows, self.cols, self.origin[0], self.origin[1]
            ));
        }
        if self.core_mem_bytes == 0 || self.core_mem_bytes > (1 << 20) {
            return err("core_mem_bytes must be in 1..=1MiB".into());
        }
        if self.rows % self.chip_rows != 0 || self.cols % self.chip_cols != 0 {
            return err("chip tile size must evenly divide the grid".into());
        }
        for w in &self.external_windows {
            if w.rows[0] > w.rows[1] || w.cols[0] > w.cols[1] {
                return err(format!("window {} has an empty rectangle", w.name));
            }
            if w.rows[1] >= MAX_COORD || w.cols[1] >= MAX_COORD {
                return err(format!("window {} exceeds the coordinate space", w.name));
            }
            for r in w.rows[0]..=w.rows[1] {
                for c in w.cols[0]..=w.cols[1] {
                    if self.contains_core(NodeAddress::new(r, c)) {
                        return err(format!("window {} overlaps core ({},{})", w.name, r, c));
                    }
                }
            }
        }
        for (rate, side) in Side::ALL.map(|s| (self.elink_rates.get(s), s)) {
            if rate < 0.0 {
                return err(format!("negative elink rate on {:?} side", side));
            }
        }
        for g in &self.work_groups {
            for m in g {
                if m[0] >= self.rows || m[1] >= self.cols {
                    return err("work group member outside grid".into());
                }
            }
        }
        Ok(())
    }

    pub fn origin_node(&self) -> NodeAddress {
        NodeAddress::new(self.origin[0], self.origin[1])
    }

    pub fn num_cores(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn contains_core(&self, node: NodeAddress) -> bool {
        node.row >= self.origin[0]
            && (node.row as u32) < self.origin[0] as u32 + self.rows as u32
            && node.col >= self.origin[1]
            && (node.col as u32) < self.origin[1] as u32 + self.cols as u32
    }

    pub fn window_containing(&self, node: NodeAddress) -> Option<usize> {
        self.external_windows.iter().position(|w| w.contains(node))
    }

    /// Grid-relative index of a core, row-major.
    pub fn core_index(&self, node: NodeAddress) -> Option<usize> {
        if !self.contains_core(node) {
            return None;
        }
        let r = (node.row - self.origin[0]) as usize;
        let c = (node.col - self.origin[1]) as usize;
        Some(r * self.cols as usize + c)
    }

    pub fn node_at(&self, index: usize) -> NodeAddress {
        let r = index / self.cols as usize;
        let c = index % self.cols as usize;
        NodeAddress::new(self.origin[0] + r as u8, self.origin[1] + c as u8)
    }

    /// Chip tile (row, col) a node belongs to.
    pub fn chip_of(&self, node: NodeAddress) -> (u8, u8) {
        (
            (node.row - self.origin[0]) / self.chip_rows,
            (node.col - self.origin[1]) / self.chip_cols,
        )
    }

    /// Side the host link attaches to: the first window's side, or east.
    pub fn host_side(&self) -> Side {
        self.external_windows.first().map(|w| w.side).unwrap_or(Side::East)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "parallella" => Some(Self::parallella()),
            "e16" => Some(Self::e16()),
            "e64" => Some(Self::e64()),
            _ => None,
        }
    }

    pub fn parallella() -> Self {
        Self::from_toml(include_str!("../configs/parallella.toml")).expect("bundled config")
    }

    pub fn e16() -> Self {
        Self::from_toml(include_str!("../configs/e16.toml")).expect("bundled config")
    }

    pub fn e64() -> Self {
        Self::from_toml(include_str!("../configs/e64.toml")).expect("bundled config")
    }
}
