//! Shared oracles for integration tests.

use std::collections::BTreeSet;

use parked_rsu::decision::{CandidatePool, CoverageSolution};
use parked_rsu::grid::Cell;
use parked_rsu::maps::CoverageMap;
use parked_rsu::radio::SignalStrength;
use parked_rsu::EntityId;
use rand::Rng;

pub fn strength(v: u8) -> SignalStrength {
    SignalStrength::new(v).unwrap()
}

pub fn random_map<R: Rng>(owner: u32, cells: &[Cell], rng: &mut R, min_len: usize) -> CoverageMap {
    let len = rng.random_range(min_len..=cells.len().min(12));
    let mut m = CoverageMap::new(EntityId(owner));
    for _ in 0..len {
        let c = cells[rng.random_range(0..cells.len())];
        m.insert(c, strength(rng.random_range(1..=5)));
    }
    m
}

pub fn random_pool<R: Rng>(rng: &mut R) -> CandidatePool {
    let n_cells = rng.random_range(1..=40);
    let cells: Vec<Cell> = (0..n_cells).map(|i| Cell::new(i % 7, i / 7)).collect();
    let entities = rng.random_range(1..=6);
    let mut pool = CandidatePool::new(EntityId(100), random_map(100, &cells, rng, 1));
    for k in 1..entities {
        let battery = rng.random_range(0.0..=1.0);
        pool = pool.with_neighbor(
            EntityId(100 + k),
            random_map(100 + k, &cells, rng, 0),
            battery,
        );
    }
    for k in 0..rng.random_range(0..=2) {
        pool = pool.with_second_hop(random_map(200 + k, &cells, rng, 0));
    }
    pool
}

/// Attributes straight from the definitions, one cell at a time.
pub fn oracle(sol: &CoverageSolution, pool: &CandidatePool) -> (f64, f64, f64, f64) {
    let active: BTreeSet<EntityId> = sol.active.iter().copied().collect();
    let mut maps: Vec<&CoverageMap> = Vec::new();
    if active.contains(&pool.decision_maker) {
        maps.push(&pool.maker_map);
    }
    for n in &pool.neighbors {
        if active.contains(&n.id) {
            maps.push(&n.map);
        }
    }
    maps.extend(pool.second_hop.iter());

    let dm_cells: Vec<Cell> = pool.maker_map.iter().map(|(c, _)| c).collect();
    let mut sig = 0.0;
    let mut sat = 0.0;
    let mut served = 0;
    for &c in &dm_cells {
        let best = maps.iter().map(|m| m.get(c).value()).max().unwrap_or(0);
        if best > 0 {
            served += 1;
            sig += f64::from(best);
            sat += maps.iter().filter(|m| m.covers(c)).count() as f64;
        }
    }
    let (a_sig, a_sat) = if served == 0 {
        (0.0, 1.0)
    } else {
        (sig / dm_cells.len() as f64, sat / dm_cells.len() as f64)
    };

    let mut all: Vec<&CoverageMap> = vec![&pool.maker_map];
    all.extend(pool.neighbors.iter().map(|n| &n.map));
    all.extend(pool.second_hop.iter());
    let union = |ms: &[&CoverageMap]| -> usize {
        ms.iter()
            .flat_map(|m| m.iter().map(|(c, _)| c))
            .collect::<BTreeSet<_>>()
            .len()
    };
    let a_cov = union(&maps) as f64 / union(&all) as f64;

    let mut bats = Vec::new();
    if active.contains(&pool.decision_maker) {
        bats.push(1.0);
    }
    for n in &pool.neighbors {
        if active.contains(&n.id) {
            bats.push(n.battery);
        }
    }
    let a_bat = if bats.is_empty() {
        1.0
    } else {
        bats.iter().sum::<f64>() / bats.len() as f64
    };
    (a_sig, a_sat, a_cov, a_bat)
}

pub fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}
