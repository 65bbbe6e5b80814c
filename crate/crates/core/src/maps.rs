//! Coverage maps learned from overheard beacons, and the local coverage and
//! saturation maps a decision maker derives from a set of them.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Cell;
use crate::radio::{rssi_to_strength, Rssi, SignalStrength, RSSI_MAX};
use crate::EntityId;

/// Minimum number of beacons before a cell is trusted.
pub const DEFAULT_MIN_SAMPLES: u32 = 5;

const BIMODAL_MIN_SHARE: f64 = 0.25;
const BIMODAL_MIN_SEPARATION: usize = 15;
const MODE_HALF_WINDOW: usize = 2;

#[derive(Debug, Error)]
pub enum MapsError {
    #[error("beacon log line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sparse self-observed coverage map; an absent cell has strength 0.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoverageMap {
    owner: EntityId,
    cells: BTreeMap<Cell, SignalStrength>,
}

impl CoverageMap {
    pub fn new(owner: EntityId) -> Self {
        CoverageMap {
            owner,
            cells: BTreeMap::new(),
        }
    }

    pub fn from_cells(
        owner: EntityId,
        cells: impl IntoIterator<Item = (Cell, SignalStrength)>,
    ) -> Self {
        let mut map = CoverageMap::new(owner);
        for (c, s) in cells {
            map.insert(c, s);
        }
        map
    }

    pub fn owner(&self) -> EntityId {
        self.owner
    }

    /// Stores `strength` at `cell`; strength 0 erases the cell.
    pub fn insert(&mut self, cell: Cell, strength: SignalStrength) {
        if strength.is_covered() {
            self.cells.insert(cell, strength);
        } else {
            self.cells.remove(&cell);
        }
    }

    pub fn get(&self, cell: Cell) -> SignalStrength {
        self.cells
            .get(&cell)
            .copied()
            .unwrap_or(SignalStrength::NONE)
    }

    pub fn covers(&self, cell: Cell) -> bool {
        self.cells.contains_key(&cell)
    }

    pub fn covered_count(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, SignalStrength)> + '_ {
        self.cells.iter().map(|(c, s)| (*c, *s))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "cell_x,cell_y,strength")?;
        for (c, s) in self.iter() {
            writeln!(out, "{},{},{}", c.x, c.y, s)?;
        }
        Ok(())
    }
}

/// Per-cell beacon statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub cell: Cell,
    pub count: u32,
    pub mean_rssi: f64,
    /// Population standard deviation.
    pub sd_rssi: f64,
    /// `histogram[i]` counts beacons with RSSI `i + 1`.
    pub histogram: Vec<u32>,
    pub bimodal: bool,
}

impl CellStats {
    fn from_histogram(cell: Cell, histogram: &[u32; RSSI_MAX as usize]) -> Self {
        let count: u32 = histogram.iter().sum();
        let n = f64::from(count);
        let weighted = |f: &dyn Fn(f64) -> f64| -> f64 {
            histogram
                .iter()
                .enumerate()
                .map(|(i, &c)| f64::from(c) * f((i + 1) as f64))
                .sum()
        };
        let mean = weighted(&|r| r) / n;
        let var = weighted(&|r| (r - mean) * (r - mean)) / n;
        CellStats {
            cell,
            count,
            mean_rssi: mean,
            sd_rssi: var.max(0.0).sqrt(),
            histogram: histogram.to_vec(),
            bimodal: is_bimodal(histogram),
        }
    }

    /// Class of the rounded mean RSSI.
    pub fn strength(&self) -> SignalStrength {
        let r = self.mean_rssi.round() as i64;
        rssi_to_strength(Rssi::new(r.clamp(1, i64::from(RSSI_MAX))).unwrap())
    }
}

/// Two windows each holding at least a quarter of the mass, at least 15
/// RSSI points apart, with a lighter window somewhere between them.
fn is_bimodal(histogram: &[u32]) -> bool {
    let total: u32 = histogram.iter().sum();
    if total == 0 {
        return false;
    }
    let n = histogram.len();
    let window: Vec<u32> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(MODE_HALF_WINDOW);
            let hi = (i + MODE_HALF_WINDOW).min(n - 1);
            histogram[lo..=hi].iter().sum()
        })
        .collect();
    let heavy = |i: usize| f64::from(window[i]) >= BIMODAL_MIN_SHARE * f64::from(total);
    for a in 0..n {
        if !heavy(a) {
            continue;
        }
        for b in (a + BIMODAL_MIN_SEPARATION)..n {
            if !heavy(b) {
                continue;
            }
            let floor = window[a].min(window[b]);
            if window[a + 1..b].iter().any(|&w| w < floor) {
                return true;
            }
        }
    }
    false
}

/// Accumulates beacons per cell. The end state depends only on the multiset
/// of recorded samples, never on their order.
#[derive(Debug, Clone, Default)]
pub struct MapBuilder {
    cells: BTreeMap<Cell, [u32; RSSI_MAX as usize]>,
}

impl MapBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_beacon(&mut self, cell: Cell, rssi: Rssi) {
        let hist = self.cells.entry(cell).or_insert([0; RSSI_MAX as usize]);
        hist[usize::from(rssi.value()) - 1] += 1;
    }

    pub fn observed_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn sample_count(&self, cell: Cell) -> u32 {
        self.cells.get(&cell).map_or(0, |h| h.iter().sum())
    }

    pub fn stats(&self) -> Vec<CellStats> {
        self.cells
            .iter()
            .map(|(c, h)| CellStats::from_histogram(*c, h))
            .collect()
    }

    /// Cells with at least `min_samples` beacons become map entries; stats
    /// are returned for every observed cell.
    pub fn finalize(&self, owner: EntityId, min_samples: u32) -> (CoverageMap, Vec<CellStats>) {
        let stats = self.stats();
        let map = CoverageMap::from_cells(
            owner,
            stats
                .iter()
                .filter(|s| s.count >= min_samples)
                .map(|s| (s.cell, s.strength())),
        );
        (map, stats)
    }
}

pub fn finalize_scm(
    builder: &MapBuilder,
    owner: EntityId,
    min_samples: u32,
) -> (CoverageMap, Vec<CellStats>) {
    builder.finalize(owner, min_samples)
}

/// Local map of coverage (best strength) and saturation (contributor count).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LocalMaps {
    pub lmc: BTreeMap<Cell, SignalStrength>,
    pub lms: BTreeMap<Cell, u32>,
}

impl LocalMaps {
    pub fn covered_count(&self) -> usize {
        self.lmc.len()
    }
}

pub fn merge_local_maps<'a>(scms: impl IntoIterator<Item = &'a CoverageMap>) -> LocalMaps {
    let mut out = LocalMaps::default();
    for scm in scms {
        for (cell, s) in scm.iter() {
            let best = out.lmc.entry(cell).or_insert(SignalStrength::NONE);
            if s > *best {
                *best = s;
            }
            *out.lms.entry(cell).or_insert(0) += 1;
        }
    }
    out
}

/// One overheard beacon: `time_s,tx_id,cell_x,cell_y,rssi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeaconRecord {
    pub time_s: f64,
    pub tx_id: u64,
    pub cell: Cell,
    pub rssi: Rssi,
}

impl BeaconRecord {
    pub fn write_line<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "{:.1},{},{},{},{}",
            self.time_s,
            self.tx_id,
            self.cell.x,
            self.cell.y,
            self.rssi.value()
        )
    }
}

pub const BEACON_LOG_HEADER: &str = "time_s,tx_id,cell_x,cell_y,rssi";

pub fn write_beacon_log<W: Write>(records: &[BeaconRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{BEACON_LOG_HEADER}")?;
    for r in records {
        r.write_line(&mut out)?;
    }
    Ok(())
}

/// Parses a beacon log. A leading header line is accepted; blank lines and
/// `#` comments are skipped.
pub fn read_beacon_log<R: BufRead>(input: R) -> Result<Vec<BeaconRecord>, MapsError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = n + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || (line_no == 1 && t.starts_with("time_s")) {
            continue;
        }
        let err = |msg: String| MapsError::Parse { line: line_no, msg };
        let f: Vec<&str> = t.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", f.len())));
        }
        let time_s: f64 = f[0]
            .parse()
            .map_err(|_| err(format!("bad time `{}`", f[0])))?;
        if !time_s.is_finite() {
            return Err(err(format!("bad time `{}`", f[0])));
        }
        let tx_id: u64 = f[1]
            .parse()
            .map_err(|_| err(format!("bad tx_id `{}`", f[1])))?;
        let x: i32 = f[2]
            .parse()
            .map_err(|_| err(format!("bad cell_x `{}`", f[2])))?;
        let y: i32 = f[3]
            .parse()
            .map_err(|_| err(format!("bad cell_y `{}`", f[3])))?;
        let raw: i64 = f[4]
            .parse()
            .map_err(|_| err(format!("bad rssi `{}`", f[4])))?;
        let rssi = Rssi::new(raw).map_err(|e| err(e.to_string()))?;
        out.push(BeaconRecord {
            time_s,
            tx_id,
            cell: Cell::new(x, y),
            rssi,
        });
    }
    Ok(out)
}

pub fn write_cell_stats<W: Write>(stats: &[CellStats], mut out: W) -> std::io::Result<()> {
    writeln!(out, "cell_x,cell_y,count,mean,sd,bimodal")?;
    for s in stats {
        writeln!(
            out,
            "{},{},{},{:.4},{:.4},{}",
            s.cell.x, s.cell.y, s.count, s.mean_rssi, s.sd_rssi, s.bimodal
        )?;
    }
    Ok(())
}
