//! Synthetic beacon surveys: a parked receiver listens to random-walk traffic
//! and logs every beacon it hears, with the true class of each cell known.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{Cell, CityGrid};
use crate::maps::{BeaconRecord, CoverageMap};
use crate::radio::{sample_rssi, strength, PropagationConfig, RadioError, SignalStrength};
use crate::traffic::{step_vehicle, Intent, Vehicle};
use crate::EntityId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyConfig {
    pub receiver: Cell,
    pub vehicles: usize,
    pub duration_s: u64,
    pub beacon_hz: u32,
    pub noise_sd: f64,
    pub speed_mps: f64,
}

impl SurveyConfig {
    pub fn new(receiver: Cell) -> Self {
        SurveyConfig {
            receiver,
            vehicles: 20,
            duration_s: 3600,
            beacon_hz: 10,
            noise_sd: 3.0,
            speed_mps: 8.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Survey {
    pub records: Vec<BeaconRecord>,
    /// True class of every usable cell the receiver can hear.
    pub truth: CoverageMap,
}

/// True coverage map of a receiver at `receiver`.
pub fn true_coverage(
    grid: &CityGrid,
    prop: &PropagationConfig,
    receiver: Cell,
    owner: EntityId,
) -> Result<CoverageMap, RadioError> {
    let mut map = CoverageMap::new(owner);
    for c in grid.usable_cells() {
        map.insert(c, strength(c, receiver, grid, prop)?);
    }
    Ok(map)
}

pub fn generate_survey(
    grid: &CityGrid,
    prop: &PropagationConfig,
    cfg: &SurveyConfig,
    seed: u64,
) -> Result<Survey, RadioError> {
    if !grid.contains(cfg.receiver) {
        return Err(RadioError::OutOfGrid(cfg.receiver));
    }
    let truth = true_coverage(grid, prop, cfg.receiver, EntityId(0))?;
    let mut mob = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(1);
    let usable: Vec<Cell> = grid.usable_cells().collect();
    let mut vehicles: Vec<Vehicle> = (0..cfg.vehicles)
        .map(|i| {
            let start = *usable.choose(&mut mob).expect("grid has usable cells");
            Vehicle::entering(
                EntityId(i as u32),
                start,
                cfg.speed_mps,
                Intent::Through,
                grid,
                &mut mob,
            )
        })
        .collect();
    let mut records = Vec::new();
    let hz = f64::from(cfg.beacon_hz.max(1));
    for t in 0..cfg.duration_s {
        for v in vehicles.iter_mut() {
            step_vehicle(v, grid, 1.0, &mut mob);
            let cell = v.current_cell(grid);
            let s: SignalStrength = truth.get(cell);
            if !s.is_covered() {
                continue;
            }
            for k in 0..cfg.beacon_hz {
                records.push(BeaconRecord {
                    time_s: t as f64 + f64::from(k) / hz,
                    tx_id: u64::from(v.id.0),
                    cell,
                    rssi: sample_rssi(s, cfg.noise_sd, &mut noise)?,
                });
            }
        }
    }
    Ok(Survey { records, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_manhattan_city;
    use crate::maps::MapBuilder;

    #[test]
    fn survey_is_reproducible_and_in_range() {
        let grid = build_manhattan_city(3, 3, 1, 3).unwrap();
        let prop = PropagationConfig::default();
        let mut cfg = SurveyConfig::new(Cell::new(4, 4));
        cfg.duration_s = 200;
        let a = generate_survey(&grid, &prop, &cfg, 5).unwrap();
        let b = generate_survey(&grid, &prop, &cfg, 5).unwrap();
        assert_eq!(a.records, b.records);
        assert!(!a.records.is_empty());
        for r in &a.records {
            assert!(a.truth.covers(r.cell));
        }
    }

    #[test]
    fn noiseless_survey_recovers_truth() {
        let grid = build_manhattan_city(3, 3, 1, 3).unwrap();
        let prop = PropagationConfig::default();
        let mut cfg = SurveyConfig::new(Cell::new(8, 4));
        cfg.noise_sd = 0.0;
        cfg.duration_s = 600;
        let s = generate_survey(&grid, &prop, &cfg, 6).unwrap();
        let mut b = MapBuilder::new();
        for r in &s.records {
            b.record_beacon(r.cell, r.rssi);
        }
        let (map, _) = b.finalize(EntityId(0), 1);
        for (c, st) in map.iter() {
            assert_eq!(st, s.truth.get(c), "{c}");
        }
    }
}
