//! Random RSU assignments over a fully parked city, used to bound the
//! signal/saturation trade-off any assignment can reach.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::radio::CoverageTable;
use crate::sim::{CoverageState, MetricsSample, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsSample {
    pub active: usize,
    pub mean_signal: f64,
    pub mean_saturation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundsResult {
    pub samples: Vec<BoundsSample>,
    /// Draws that picked the empty set and produced no sample.
    pub skipped_empty: u64,
}

/// Citywide mean signal and saturation for RSUs at the given usable cells.
/// `None` when nothing is covered.
pub fn assignment_metrics(table: &CoverageTable, rsus: &[u32]) -> Option<BoundsSample> {
    if rsus.is_empty() {
        return None;
    }
    let m = CoverageState::from_rsus(table, rsus.iter().copied()).sample(0, 1.0);
    (m.coverage_pct > 0.0).then_some(BoundsSample {
        active: rsus.len(),
        mean_signal: m.mean_signal,
        mean_saturation: m.mean_saturation,
    })
}

/// Parked cars placed uniformly at random on usable cells.
pub fn parked_population<R: Rng + ?Sized>(
    table: &CoverageTable,
    count: usize,
    rng: &mut R,
) -> Vec<u32> {
    let n = table.usable_len() as u32;
    (0..count).map(|_| rng.random_range(0..n)).collect()
}

/// Draws `num_samples` random subsets of `population`: the cardinality is
/// uniform on `0..=N`, then members are chosen uniformly. Each draw has its
/// own seeded stream so results do not depend on scheduling.
pub fn sample_assignments(
    table: &CoverageTable,
    population: &[u32],
    num_samples: u64,
    seed: u64,
) -> Result<BoundsResult, SimError> {
    if population.is_empty() {
        return Err(SimError::EmptyPopulation);
    }
    let n = population.len();
    let drawn: Vec<Option<BoundsSample>> = (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i + 1);
            let k = rng.random_range(0..=n);
            if k == 0 {
                return None;
            }
            let chosen: Vec<u32> = index::sample(&mut rng, n, k)
                .into_iter()
                .map(|j| population[j])
                .collect();
            assignment_metrics(table, &chosen)
        })
        .collect();
    let mut out = BoundsResult::default();
    for d in drawn {
        match d {
            Some(s) => out.samples.push(s),
            None => out.skipped_empty += 1,
        }
    }
    Ok(out)
}

/// Random assignments over the configured parked population.
pub fn random_assignment_bounds(
    cfg: &RunConfig,
    num_samples: u64,
    seed: u64,
) -> Result<BoundsResult, SimError> {
    let grid = cfg.grid.build()?;
    let table = CoverageTable::build(&grid, &cfg.radio);
    let count = cfg
        .bounds
        .population
        .map_or(table.usable_len(), |p| p as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let population = parked_population(&table, count, &mut rng);
    sample_assignments(&table, &population, num_samples, seed)
}

pub fn write_bounds_csv<W: Write>(samples: &[BoundsSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "active,mean_signal,mean_saturation")?;
    for s in samples {
        writeln!(
            out,
            "{},{:.6},{:.6}",
            s.active, s.mean_signal, s.mean_saturation
        )?;
    }
    Ok(())
}

/// Lowest and highest saturation seen per mean-signal bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub bin_width: f64,
    pub bins: BTreeMap<i64, (f64, f64)>,
}

impl Envelope {
    pub fn from_samples(samples: &[BoundsSample], bin_width: f64) -> Self {
        let mut bins: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
        for s in samples {
            let b = (s.mean_signal / bin_width).floor() as i64;
            let e = bins
                .entry(b)
                .or_insert((s.mean_saturation, s.mean_saturation));
            e.0 = e.0.min(s.mean_saturation);
            e.1 = e.1.max(s.mean_saturation);
        }
        Envelope { bin_width, bins }
    }

    pub fn bin_of(&self, mean_signal: f64) -> i64 {
        (mean_signal / self.bin_width).floor() as i64
    }

    pub fn bounds_at(&self, mean_signal: f64) -> Option<(f64, f64)> {
        self.bins.get(&self.bin_of(mean_signal)).copied()
    }

    pub fn contains(&self, mean_signal: f64, mean_saturation: f64) -> bool {
        self.bounds_at(mean_signal)
            .is_some_and(|(lo, hi)| lo <= mean_saturation && mean_saturation <= hi)
    }

    /// Relative height of a point inside its bin: 0 at the lower envelope,
    /// 1 at the upper one.
    pub fn relative_height(&self, mean_signal: f64, mean_saturation: f64) -> Option<f64> {
        let (lo, hi) = self.bounds_at(mean_signal)?;
        if hi > lo {
            Some((mean_saturation - lo) / (hi - lo))
        } else {
            Some(0.0)
        }
    }
}

/// Decision-run points in the same signal/saturation plane.
pub fn overlay_points(series: &[MetricsSample], discard_s: f64) -> Vec<(u64, f64, f64)> {
    series
        .iter()
        .filter(|s| s.t as f64 >= discard_s && s.active_rsus > 0)
        .map(|s| (s.t, s.mean_signal, s.mean_saturation))
        .collect()
}

pub fn write_overlay_csv<W: Write>(points: &[(u64, f64, f64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,mean_signal,mean_saturation")?;
    for (t, sig, sat) in points {
        writeln!(out, "{t},{sig:.6},{sat:.6}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_manhattan_city;
    use crate::radio::PropagationConfig;

    fn table() -> CoverageTable {
        let grid = build_manhattan_city(3, 3, 1, 3).unwrap();
        CoverageTable::build(&grid, &PropagationConfig::default())
    }

    #[test]
    fn single_rsu_has_unit_saturation() {
        let t = table();
        for u in 0..t.usable_len() as u32 {
            assert_eq!(assignment_metrics(&t, &[u]).unwrap().mean_saturation, 1.0);
        }
        assert!(assignment_metrics(&t, &[]).is_none());
    }

    #[test]
    fn empty_population_errors() {
        assert!(matches!(
            sample_assignments(&table(), &[], 10, 1),
            Err(SimError::EmptyPopulation)
        ));
    }

    #[test]
    fn samples_are_reproducible_and_counted() {
        let t = table();
        let pop = [0u32, 3, 9, 20];
        let a = sample_assignments(&t, &pop, 500, 9).unwrap();
        let b = sample_assignments(&t, &pop, 500, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len() as u64 + a.skipped_empty, 500);
        assert!(a.skipped_empty > 0);
        assert!(sample_assignments(&t, &pop, 0, 9)
            .unwrap()
            .samples
            .is_empty());
    }

    #[test]
    fn envelope_bins() {
        let s = |sig, sat| BoundsSample {
            active: 1,
            mean_signal: sig,
            mean_saturation: sat,
        };
        let env = Envelope::from_samples(&[s(3.01, 1.2), s(3.05, 2.0), s(3.5, 1.0)], 0.1);
        assert_eq!(env.bounds_at(3.02), Some((1.2, 2.0)));
        assert!(env.contains(3.09, 1.5));
        assert!(!env.contains(3.09, 1.1));
        assert!(!env.contains(4.0, 1.5));
        let h = env.relative_height(3.0, 1.4).unwrap();
        assert!((h - 0.25).abs() < 1e-12, "{h}");
    }
}
