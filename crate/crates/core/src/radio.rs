//! Obstruction-aware propagation, beacon RSSI sampling and the conversions
//! between the 1..=50 RSSI scale and the 1..=5 strength classes.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, CityGrid};

pub const RSSI_MIN: u8 = 1;
pub const RSSI_MAX: u8 = 50;
pub const MAX_STRENGTH: u8 = 5;

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("cell {0} lies outside the grid")]
    OutOfGrid(Cell),
    #[error("strength class {0} is outside 0..=5")]
    BadStrength(u8),
    #[error("rssi {0} is outside {RSSI_MIN}..={RSSI_MAX}")]
    BadRssi(i64),
    #[error("a beacon at strength 0 cannot be received")]
    NoBeacon,
    #[error("invalid propagation config: {0}")]
    Config(String),
}

/// Signal strength class, 0 meaning no coverage.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct SignalStrength(u8);

impl SignalStrength {
    pub const NONE: SignalStrength = SignalStrength(0);
    pub const MAX: SignalStrength = SignalStrength(MAX_STRENGTH);

    pub fn new(value: u8) -> Result<Self, RadioError> {
        if value > MAX_STRENGTH {
            return Err(RadioError::BadStrength(value));
        }
        Ok(SignalStrength(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_covered(self) -> bool {
        self.0 > 0
    }
}

impl fmt::Display for SignalStrength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Received signal strength indicator on the OBU reporting scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rssi(u8);

impl Rssi {
    pub fn new(value: i64) -> Result<Self, RadioError> {
        if !(i64::from(RSSI_MIN)..=i64::from(RSSI_MAX)).contains(&value) {
            return Err(RadioError::BadRssi(value));
        }
        Ok(Rssi(value as u8))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

/// Class `k` covers RSSI values in `((k-1)*10, k*10]`.
pub fn rssi_to_strength(rssi: Rssi) -> SignalStrength {
    SignalStrength(rssi.0.div_ceil(10))
}

/// Nominal RSSI of a strength class, `k * 10`.
pub fn strength_to_rssi_center(strength: SignalStrength) -> u8 {
    strength.0 * 10
}

/// Noisy RSSI of one beacon received at class `strength`.
pub fn sample_rssi<R: Rng + ?Sized>(
    strength: SignalStrength,
    noise_sd: f64,
    rng: &mut R,
) -> Result<Rssi, RadioError> {
    if !strength.is_covered() {
        return Err(RadioError::NoBeacon);
    }
    let z: f64 = StandardNormal.sample(rng);
    let raw = f64::from(strength_to_rssi_center(strength)) + noise_sd * z;
    let clamped = raw.round().clamp(f64::from(RSSI_MIN), f64::from(RSSI_MAX));
    Ok(Rssi(clamped as u8))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    /// Line-of-sight reach at multiplier 1.0.
    pub base_range_m: f64,
    pub range_multiplier: f64,
    /// Classes lost when the straight path crosses a building.
    pub nlos_penalty: u8,
    /// Upper distance of classes 5, 4, 3 and 2 at multiplier 1.0.
    pub band_edges_m: [f64; 4],
}

impl Default for PropagationConfig {
    fn default() -> Self {
        let base = 155.0;
        PropagationConfig {
            base_range_m: base,
            range_multiplier: 1.0,
            nlos_penalty: 4,
            band_edges_m: [0.25 * base, 0.5 * base, 0.75 * base, base],
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<(), RadioError> {
        let bad = |m: String| Err(RadioError::Config(m));
        if !(self.base_range_m.is_finite() && self.base_range_m > 0.0) {
            return bad(format!(
                "base_range_m must be positive, got {}",
                self.base_range_m
            ));
        }
        if !(self.range_multiplier.is_finite() && self.range_multiplier > 0.0) {
            return bad(format!(
                "range_multiplier must be positive, got {}",
                self.range_multiplier
            ));
        }
        if self.nlos_penalty > MAX_STRENGTH {
            return bad(format!(
                "nlos_penalty must be <= 5, got {}",
                self.nlos_penalty
            ));
        }
        let e = self.band_edges_m;
        if !(e[0] > 0.0 && e.windows(2).all(|w| w[0] < w[1])) {
            return bad(format!(
                "band_edges_m must be positive and strictly increasing: {e:?}"
            ));
        }
        if (e[3] - self.base_range_m).abs() > 1e-9 * self.base_range_m {
            return bad(format!(
                "last band edge {} must equal base_range_m {}",
                e[3], self.base_range_m
            ));
        }
        Ok(())
    }

    /// Band edges after applying the range multiplier.
    pub fn effective_edges(&self) -> [f64; 4] {
        self.band_edges_m.map(|e| e * self.range_multiplier)
    }

    pub fn max_range_m(&self) -> f64 {
        self.base_range_m * self.range_multiplier
    }

    /// Line-of-sight class at a given distance.
    pub fn los_class(&self, distance_m: f64) -> u8 {
        let edges = self.effective_edges();
        match edges.iter().position(|e| distance_m <= *e) {
            Some(band) => MAX_STRENGTH - band as u8,
            None => 0,
        }
    }
}

/// Cells strictly between `a` and `b` on the Bresenham line. The walk always
/// starts from the smaller endpoint so the path is symmetric.
pub fn line_cells(a: Cell, b: Cell) -> Vec<Cell> {
    let (from, to) = if a <= b { (a, b) } else { (b, a) };
    let (mut x, mut y) = (i64::from(from.x), i64::from(from.y));
    let (x1, y1) = (i64::from(to.x), i64::from(to.y));
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::new();
    loop {
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        if x == x1 && y == y1 {
            break;
        }
        out.push(Cell::new(x as i32, y as i32));
    }
    out
}

pub fn path_obstructed(a: Cell, b: Cell, grid: &CityGrid) -> bool {
    line_cells(a, b).into_iter().any(|c| grid.is_obstruction(c))
}

/// Deterministic strength class received at `rx` from a transmitter at `tx`.
pub fn strength(
    tx: Cell,
    rx: Cell,
    grid: &CityGrid,
    cfg: &PropagationConfig,
) -> Result<SignalStrength, RadioError> {
    for c in [tx, rx] {
        if !grid.contains(c) {
            return Err(RadioError::OutOfGrid(c));
        }
    }
    Ok(SignalStrength(class_between(tx, rx, grid, cfg)))
}

fn class_between(tx: Cell, rx: Cell, grid: &CityGrid, cfg: &PropagationConfig) -> u8 {
    if tx == rx {
        return MAX_STRENGTH;
    }
    let los = cfg.los_class(grid.center_distance(tx, rx));
    if los == 0 {
        return 0;
    }
    if path_obstructed(tx, rx, grid) {
        los.saturating_sub(cfg.nlos_penalty)
    } else {
        los
    }
}

/// Precomputed strengths between every pair of usable cells.
///
/// Vehicles only ever occupy usable cells, so the simulator resolves all
/// propagation queries against this table.
#[derive(Debug, Clone)]
pub struct CoverageTable {
    usable_cells: Vec<Cell>,
    usable_of: Vec<Option<u32>>,
    dense: Vec<u8>,
    reach: Vec<Vec<(u32, u8)>>,
}

impl CoverageTable {
    pub fn build(grid: &CityGrid, cfg: &PropagationConfig) -> Self {
        let usable_cells: Vec<Cell> = grid.usable_cells().collect();
        let mut usable_of = vec![None; grid.cell_count()];
        for (u, c) in usable_cells.iter().enumerate() {
            usable_of[grid.index(*c).unwrap()] = Some(u as u32);
        }
        let n = usable_cells.len();
        let mut dense = vec![0u8; n * n];
        let max_range = cfg.max_range_m();
        for i in 0..n {
            dense[i * n + i] = MAX_STRENGTH;
            for j in (i + 1)..n {
                let (a, b) = (usable_cells[i], usable_cells[j]);
                if grid.center_distance(a, b) > max_range {
                    continue;
                }
                let s = class_between(a, b, grid, cfg);
                dense[i * n + j] = s;
                dense[j * n + i] = s;
            }
        }
        let reach = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| dense[i * n + j] > 0)
                    .map(|j| (j as u32, dense[i * n + j]))
                    .collect()
            })
            .collect();
        CoverageTable {
            usable_cells,
            usable_of,
            dense,
            reach,
        }
    }

    pub fn usable_len(&self) -> usize {
        self.usable_cells.len()
    }

    pub fn usable_cell(&self, u: u32) -> Cell {
        self.usable_cells[u as usize]
    }

    pub fn usable_index(&self, grid: &CityGrid, cell: Cell) -> Option<u32> {
        grid.index(cell).and_then(|i| self.usable_of[i])
    }

    /// Strength between two usable cells, by usable index.
    pub fn between(&self, a: u32, b: u32) -> u8 {
        self.dense[a as usize * self.usable_cells.len() + b as usize]
    }

    /// Usable cells (and their class) covered by a transmitter at `u`.
    pub fn reach(&self, u: u32) -> &[(u32, u8)] {
        &self.reach[u as usize]
    }
}
