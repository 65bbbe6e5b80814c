//! Vehicle arrivals, road-constrained movement, parking and departures.
//!
//! Moving vehicles follow a random-turn walk over road cells. Each tick a
//! moving vehicle with parking intent parks with probability
//! `1 - exp(-dt / mean_moving_s)`, so in uniform mode the moving population
//! settles around `arrival_rate_vps * mean_moving_s`. Through traffic leaves
//! the city with the same hazard instead of parking.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, CityGrid, Direction, Point};
use crate::EntityId;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("invalid traffic configuration: {0}")]
    Config(String),
    #[error("{what} line {line}: {msg}")]
    Parse {
        what: &'static str,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Moving,
    ParkedSilent,
    ParkedRsu,
}

/// What a moving vehicle does when its trip ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intent {
    Park,
    Through,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: EntityId,
    pub role: Role,
    pub intent: Intent,
    /// Cell whose center the vehicle passed last.
    pub cell: Cell,
    pub heading: Direction,
    /// Meters traveled from the center of `cell` towards the next cell.
    pub progress_m: f64,
    pub speed_mps: f64,
    pub parked_at: Option<f64>,
    pub planned_duration_s: Option<f64>,
    pub rsu_active_since: Option<f64>,
}

impl Vehicle {
    /// A moving vehicle sitting on the center of `cell`, heading along a
    /// random open direction.
    pub fn entering<R: Rng + ?Sized>(
        id: EntityId,
        cell: Cell,
        speed_mps: f64,
        intent: Intent,
        grid: &CityGrid,
        rng: &mut R,
    ) -> Self {
        let open: Vec<Direction> = grid.open_directions(cell).collect();
        let heading = open.choose(rng).copied().unwrap_or(Direction::East);
        Vehicle {
            id,
            role: Role::Moving,
            intent,
            cell,
            heading,
            progress_m: 0.0,
            speed_mps,
            parked_at: None,
            planned_duration_s: None,
            rsu_active_since: None,
        }
    }

    pub fn position(&self, grid: &CityGrid) -> Point {
        let c = grid.center_of(self.cell);
        let (dx, dy) = self.heading.delta();
        Point::new(
            c.x + f64::from(dx) * self.progress_m,
            c.y + f64::from(dy) * self.progress_m,
        )
    }

    /// Cell the vehicle is currently in.
    pub fn current_cell(&self, grid: &CityGrid) -> Cell {
        if self.progress_m * 2.0 >= grid.cell_size_m() {
            self.heading.step(self.cell)
        } else {
            self.cell
        }
    }

    pub fn is_parked(&self) -> bool {
        self.role != Role::Moving
    }

    /// Parks the vehicle where it stands.
    pub fn park(&mut self, grid: &CityGrid, t: f64, duration_s: f64) {
        self.cell = self.current_cell(grid);
        self.progress_m = 0.0;
        self.role = Role::ParkedSilent;
        self.parked_at = Some(t);
        self.planned_duration_s = Some(duration_s.max(0.0));
    }

    pub fn departure_time(&self) -> Option<f64> {
        Some(self.parked_at? + self.planned_duration_s?)
    }

    pub fn should_depart(&self, t: f64) -> bool {
        self.departure_time().is_some_and(|d| t >= d)
    }
}

/// Advances a moving vehicle by `dt` seconds. At every cell center it picks a
/// uniformly random direction among the open ones, excluding a U-turn unless
/// the cell is a dead end.
pub fn step_vehicle<R: Rng + ?Sized>(v: &mut Vehicle, grid: &CityGrid, dt: f64, rng: &mut R) {
    if v.role != Role::Moving || grid.open_directions(v.cell).next().is_none() {
        return;
    }
    let size = grid.cell_size_m();
    let mut remaining = v.speed_mps * dt;
    loop {
        let to_next = size - v.progress_m;
        if remaining < to_next {
            v.progress_m += remaining;
            return;
        }
        remaining -= to_next;
        v.cell = v.heading.step(v.cell);
        v.progress_m = 0.0;
        v.heading = next_heading(v.cell, v.heading, grid, rng);
    }
}

fn next_heading<R: Rng + ?Sized>(
    cell: Cell,
    heading: Direction,
    grid: &CityGrid,
    rng: &mut R,
) -> Direction {
    let back = heading.reverse();
    let mut options = [Direction::East; 4];
    let mut n = 0;
    for d in grid.open_directions(cell) {
        if d != back {
            options[n] = d;
            n += 1;
        }
    }
    match n {
        0 => back,
        1 => options[0],
        _ => options[rng.random_range(0..n)],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ParkingMode {
    #[default]
    Uniform,
    DayProfile,
}

/// Arrival weight and log-normal parking duration for one hour of the day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HourSlot {
    pub weight: f64,
    pub median_s: f64,
    pub sigma: f64,
}

/// 24 hourly slots starting at midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DayProfile {
    pub slots: Vec<HourSlot>,
}

impl Default for DayProfile {
    /// Morning-heavy long stays, short midday churn, medium evening stays.
    fn default() -> Self {
        #[rustfmt::skip]
        let rows: [(f64, f64, f64); 24] = [
            (0.005, 21600.0, 0.5), (0.004, 21600.0, 0.5), (0.003, 21600.0, 0.5),
            (0.003, 21600.0, 0.5), (0.004, 21600.0, 0.5), (0.010, 28800.0, 0.4),
            (0.030, 30600.0, 0.3), (0.100, 30600.0, 0.3), (0.130, 28800.0, 0.3),
            (0.090, 25200.0, 0.4), (0.060, 5400.0, 0.7),  (0.055, 3600.0, 0.8),
            (0.065, 2700.0, 0.8),  (0.070, 2700.0, 0.8),  (0.060, 3600.0, 0.8),
            (0.055, 3600.0, 0.8),  (0.050, 4500.0, 0.8),  (0.059, 5400.0, 0.7),
            (0.050, 7200.0, 0.7),  (0.040, 9000.0, 0.6),  (0.025, 14400.0, 0.6),
            (0.015, 21600.0, 0.5), (0.010, 25200.0, 0.5), (0.007, 25200.0, 0.5),
        ];
        DayProfile {
            slots: rows
                .iter()
                .map(|&(w, m, s)| HourSlot {
                    weight: w,
                    median_s: m,
                    sigma: s,
                })
                .collect(),
        }
    }
}

impl DayProfile {
    /// All weight on one hour, fixed duration.
    pub fn single_hour(hour: usize, median_s: f64, sigma: f64) -> Self {
        let slots = (0..24)
            .map(|h| HourSlot {
                weight: if h == hour { 1.0 } else { 0.0 },
                median_s,
                sigma,
            })
            .collect();
        DayProfile { slots }
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.slots.len() != 24 {
            return Err(TrafficError::Config(format!(
                "day profile needs 24 hourly slots, got {}",
                self.slots.len()
            )));
        }
        for (h, s) in self.slots.iter().enumerate() {
            if !(s.weight.is_finite() && s.weight >= 0.0) {
                return Err(TrafficError::Config(format!(
                    "hour {h}: bad weight {}",
                    s.weight
                )));
            }
            if !(s.median_s.is_finite() && s.median_s >= 0.0) {
                return Err(TrafficError::Config(format!(
                    "hour {h}: bad median {}",
                    s.median_s
                )));
            }
            if !(s.sigma.is_finite() && s.sigma >= 0.0) {
                return Err(TrafficError::Config(format!(
                    "hour {h}: bad sigma {}",
                    s.sigma
                )));
            }
        }
        let total: f64 = self.slots.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(TrafficError::Config(format!(
                "day profile weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn slot_at(&self, t: f64) -> &HourSlot {
        let hour = ((t.rem_euclid(SECONDS_PER_DAY)) / 3600.0) as usize;
        &self.slots[hour.min(23)]
    }

    /// Reads 24 lines of `hour,weight,median_s,sigma`.
    pub fn read<R: BufRead>(input: R) -> Result<Self, TrafficError> {
        let mut slots: Vec<Option<HourSlot>> = vec![None; 24];
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') || (n == 0 && t.starts_with("hour")) {
                continue;
            }
            let err = |msg: String| TrafficError::Parse {
                what: "parking profile",
                line: n + 1,
                msg,
            };
            let f: Vec<&str> = t.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(err("expected `hour,weight,median_s,sigma`".into()));
            }
            let hour: usize = f[0]
                .parse()
                .map_err(|_| err(format!("bad hour `{}`", f[0])))?;
            if hour >= 24 {
                return Err(err(format!("hour {hour} out of range")));
            }
            let num = |s: &str, name: &str| -> Result<f64, TrafficError> {
                s.parse().map_err(|_| err(format!("bad {name} `{s}`")))
            };
            if slots[hour].is_some() {
                return Err(err(format!("hour {hour} listed twice")));
            }
            slots[hour] = Some(HourSlot {
                weight: num(f[1], "weight")?,
                median_s: num(f[2], "median_s")?,
                sigma: num(f[3], "sigma")?,
            });
        }
        let slots: Option<Vec<HourSlot>> = slots.into_iter().collect();
        let profile = DayProfile {
            slots: slots
                .ok_or_else(|| TrafficError::Config("profile must list all 24 hours".into()))?,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "hour,weight,median_s,sigma")?;
        for (h, s) in self.slots.iter().enumerate() {
            writeln!(out, "{h},{},{},{}", s.weight, s.median_s, s.sigma)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub mode: ParkingMode,
    /// Arrivals of vehicles that will park (uniform mode).
    pub arrival_rate_vps: f64,
    /// Parking events per day (day-profile mode).
    pub daily_total: u32,
    /// Vehicles that cross the city without parking.
    pub through_rate_vps: f64,
    pub mean_moving_s: f64,
    /// Mean of the exponential parking duration in uniform mode.
    pub mean_parking_s: f64,
    pub speed_mps: f64,
    pub profile_path: Option<PathBuf>,
    pub profile: DayProfile,
    /// Replaces synthetic mobility with recorded positions.
    pub trace_path: Option<PathBuf>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            mode: ParkingMode::Uniform,
            arrival_rate_vps: 0.5,
            daily_total: 4000,
            through_rate_vps: 0.0,
            mean_moving_s: 110.0,
            mean_parking_s: 3600.0,
            speed_mps: 8.0,
            profile_path: None,
            profile: DayProfile::default(),
            trace_path: None,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<(), TrafficError> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(TrafficError::Config(format!(
                    "traffic.{name} must be finite and non-negative, got {v}"
                )))
            }
        };
        nonneg("arrival_rate_vps", self.arrival_rate_vps)?;
        nonneg("through_rate_vps", self.through_rate_vps)?;
        nonneg("mean_parking_s", self.mean_parking_s)?;
        nonneg("speed_mps", self.speed_mps)?;
        if !(self.mean_moving_s > 0.0) {
            return Err(TrafficError::Config(format!(
                "traffic.mean_moving_s must be positive, got {}",
                self.mean_moving_s
            )));
        }
        if self.mode == ParkingMode::DayProfile {
            self.profile.validate()?;
        }
        Ok(())
    }

    /// Probability that a moving vehicle ends its trip during a step of `dt`.
    pub fn trip_end_probability(&self, dt: f64) -> f64 {
        if self.mean_moving_s.is_infinite() {
            0.0
        } else {
            1.0 - (-dt / self.mean_moving_s).exp()
        }
    }

    /// Arrival rate giving a steady moving density over `area_km2`.
    pub fn arrival_rate_for_density(&self, per_km2: f64, area_km2: f64) -> f64 {
        per_km2 * area_km2 / self.mean_moving_s
    }
}

/// Parking duration for a vehicle parking at time `t`.
pub fn parking_duration<R: Rng + ?Sized>(cfg: &TrafficConfig, t: f64, rng: &mut R) -> f64 {
    match cfg.mode {
        ParkingMode::Uniform => {
            if cfg.mean_parking_s == 0.0 {
                0.0
            } else {
                Exp::new(1.0 / cfg.mean_parking_s).unwrap().sample(rng)
            }
        }
        ParkingMode::DayProfile => {
            let slot = cfg.profile.slot_at(t);
            if slot.sigma == 0.0 {
                slot.median_s
            } else {
                let z: f64 = rng.sample(StandardNormal);
                slot.median_s * (slot.sigma * z).exp()
            }
        }
    }
}

/// Trip-end check for a moving vehicle with parking intent. Returns the
/// planned parking duration when the vehicle parks.
pub fn maybe_park<R: Rng + ?Sized>(
    v: &Vehicle,
    cfg: &TrafficConfig,
    t: f64,
    dt: f64,
    rng: &mut R,
) -> Option<f64> {
    if v.role != Role::Moving || v.intent != Intent::Park {
        return None;
    }
    if rng.random::<f64>() < cfg.trip_end_probability(dt) {
        Some(parking_duration(cfg, t, rng))
    } else {
        None
    }
}

/// Trip-end check for through traffic: true when the vehicle leaves.
pub fn maybe_exit<R: Rng + ?Sized>(v: &Vehicle, cfg: &TrafficConfig, dt: f64, rng: &mut R) -> bool {
    v.role == Role::Moving
        && v.intent == Intent::Through
        && rng.random::<f64>() < cfg.trip_end_probability(dt)
}

/// Day-profile arrival times for one day: exactly `total` times, hours drawn
/// from the profile weights, uniform within the hour, sorted.
pub fn day_arrival_times<R: Rng + ?Sized>(
    profile: &DayProfile,
    total: u32,
    day_start: f64,
    rng: &mut R,
) -> Result<Vec<f64>, TrafficError> {
    if total == 0 {
        return Ok(Vec::new());
    }
    let weights: Vec<f64> = profile.slots.iter().map(|s| s.weight).collect();
    let hours = WeightedIndex::new(&weights)
        .map_err(|e| TrafficError::Config(format!("day profile weights: {e}")))?;
    let mut times: Vec<f64> = (0..total)
        .map(|_| day_start + (hours.sample(rng) as f64 + rng.random::<f64>()) * 3600.0)
        .collect();
    times.sort_by(f64::total_cmp);
    Ok(times)
}

/// Generates new vehicles at usable border cells.
#[derive(Debug, Clone)]
pub struct Spawner {
    border: Vec<Cell>,
    scheduled: Vec<f64>,
    cursor: usize,
    day: i64,
    next_id: u32,
}

impl Spawner {
    pub fn new(grid: &CityGrid) -> Self {
        Spawner {
            border: grid.border_usable_cells(),
            scheduled: Vec::new(),
            cursor: 0,
            day: -1,
            next_id: 0,
        }
    }

    pub fn next_id(&self) -> u32 {
        self.next_id
    }

    fn allocate(&mut self) -> EntityId {
        let id = EntityId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Vehicles entering during `[t, t + dt)`.
    pub fn spawn<R: Rng + ?Sized>(
        &mut self,
        t: f64,
        dt: f64,
        cfg: &TrafficConfig,
        grid: &CityGrid,
        rng: &mut R,
    ) -> Result<Vec<Vehicle>, TrafficError> {
        let mut out = Vec::new();
        if self.border.is_empty() {
            return Ok(out);
        }
        let parking = match cfg.mode {
            ParkingMode::Uniform => poisson(cfg.arrival_rate_vps * dt, rng),
            ParkingMode::DayProfile => {
                let day = (t / SECONDS_PER_DAY).floor() as i64;
                if day != self.day {
                    self.day = day;
                    self.scheduled = day_arrival_times(
                        &cfg.profile,
                        cfg.daily_total,
                        day as f64 * SECONDS_PER_DAY,
                        rng,
                    )?;
                    self.cursor = self.scheduled.partition_point(|&a| a < t);
                }
                let end = self.scheduled.partition_point(|&a| a < t + dt);
                let n = end.saturating_sub(self.cursor);
                self.cursor = self.cursor.max(end);
                n as u64
            }
        };
        let through = poisson(cfg.through_rate_vps * dt, rng);
        for k in 0..parking + through {
            let intent = if k < parking {
                Intent::Park
            } else {
                Intent::Through
            };
            let cell = *self.border.choose(rng).unwrap();
            let id = self.allocate();
            out.push(Vehicle::entering(
                id,
                cell,
                cfg.speed_mps,
                intent,
                grid,
                rng,
            ));
        }
        Ok(out)
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).unwrap().sample(rng) as u64
}

/// One recorded vehicle position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub time_s: f64,
    pub vehicle_id: u64,
    pub position: Point,
}

/// Reads `time_s,vehicle_id,x,y` lines; positions are grid meters.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, TrafficError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || (n == 0 && t.starts_with("time_s")) {
            continue;
        }
        let err = |msg: String| TrafficError::Parse {
            what: "trace",
            line: n + 1,
            msg,
        };
        let f: Vec<&str> = t.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(err("expected `time_s,vehicle_id,x,y`".into()));
        }
        let num = |s: &str| -> Result<f64, TrafficError> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("bad number `{s}`")))
        };
        out.push(TraceRecord {
            time_s: num(f[0])?,
            vehicle_id: f[1]
                .parse()
                .map_err(|_| err(format!("bad vehicle id `{}`", f[1])))?,
            position: Point::new(num(f[2])?, num(f[3])?),
        });
    }
    Ok(out)
}

/// Recorded mobility, grouped per whole second. A vehicle appears at its first
/// record and parks where its last record places it.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    by_second: BTreeMap<i64, Vec<(u64, Point)>>,
    last_seen: BTreeMap<u64, i64>,
}

impl Trace {
    pub fn new(records: &[TraceRecord]) -> Self {
        let mut trace = Trace::default();
        for r in records {
            let s = r.time_s.floor() as i64;
            trace
                .by_second
                .entry(s)
                .or_default()
                .push((r.vehicle_id, r.position));
            let last = trace.last_seen.entry(r.vehicle_id).or_insert(s);
            *last = (*last).max(s);
        }
        for v in trace.by_second.values_mut() {
            // the latest record of a vehicle within a second wins
            let mut seen = BTreeMap::new();
            for (id, p) in v.drain(..) {
                seen.insert(id, p);
            }
            v.extend(seen);
        }
        trace
    }

    pub fn positions_at(&self, second: i64) -> &[(u64, Point)] {
        self.by_second
            .get(&second)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn last_second(&self, vehicle: u64) -> Option<i64> {
        self.last_seen.get(&vehicle).copied()
    }

    pub fn vehicle_count(&self) -> usize {
        self.last_seen.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_manhattan_city, CellKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corridor(len: u32) -> CityGrid {
        CityGrid::from_kinds(
            len,
            1,
            Cell::new(0, 0),
            30.9,
            vec![CellKind::Road; len as usize],
        )
        .unwrap()
    }

    #[test]
    fn straight_corridor_kinematics() {
        let grid = corridor(10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut v = Vehicle::entering(
            EntityId(0),
            Cell::new(2, 0),
            8.0,
            Intent::Park,
            &grid,
            &mut rng,
        );
        v.heading = Direction::East;
        let before = v.position(&grid);
        step_vehicle(&mut v, &grid, 1.0, &mut rng);
        let after = v.position(&grid);
        assert!((after.distance(&before) - 8.0).abs() < 1e-9);
        assert_eq!(after.y, before.y);
    }

    #[test]
    fn dead_end_reverses() {
        let grid = corridor(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut v = Vehicle::entering(
            EntityId(0),
            Cell::new(1, 0),
            30.9,
            Intent::Park,
            &grid,
            &mut rng,
        );
        v.heading = Direction::East;
        step_vehicle(&mut v, &grid, 1.0, &mut rng);
        assert_eq!(v.cell, Cell::new(2, 0));
        assert_eq!(v.heading, Direction::West);
    }

    #[test]
    fn walk_stays_on_roads() {
        let grid = build_manhattan_city(8, 8, 1, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let border = grid.border_usable_cells();
        let mut v = Vehicle::entering(EntityId(0), border[0], 8.0, Intent::Park, &grid, &mut rng);
        for _ in 0..10_000 {
            step_vehicle(&mut v, &grid, 1.0, &mut rng);
            let p = v.position(&grid);
            let c = grid.cell_of(p).unwrap();
            assert!(grid.is_usable(c), "{c}");
            assert_eq!(c, v.current_cell(&grid));
        }
    }

    #[test]
    fn zero_rate_spawns_nothing() {
        let grid = build_manhattan_city(2, 2, 1, 3).unwrap();
        let cfg = TrafficConfig {
            arrival_rate_vps: 0.0,
            ..TrafficConfig::default()
        };
        let mut sp = Spawner::new(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for t in 0..1000 {
            assert!(sp
                .spawn(t as f64, 1.0, &cfg, &grid, &mut rng)
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn spawns_on_border() {
        let grid = build_manhattan_city(3, 3, 1, 3).unwrap();
        let cfg = TrafficConfig {
            arrival_rate_vps: 5.0,
            ..TrafficConfig::default()
        };
        let mut sp = Spawner::new(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vs = sp.spawn(0.0, 10.0, &cfg, &grid, &mut rng).unwrap();
        assert!(!vs.is_empty());
        for v in vs {
            let c = v.cell;
            assert!(grid.is_usable(c));
            assert!(c.x == 0 || c.y == 0 || c.x == 12 || c.y == 12);
        }
    }

    #[test]
    fn degenerate_profile_hour() {
        let grid = build_manhattan_city(2, 2, 1, 3).unwrap();
        let cfg = TrafficConfig {
            mode: ParkingMode::DayProfile,
            daily_total: 300,
            profile: DayProfile::single_hour(8, 600.0, 0.0),
            ..TrafficConfig::default()
        };
        let mut sp = Spawner::new(&grid);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut count = 0;
        for t in 0..86_400 {
            let n = sp
                .spawn(t as f64, 1.0, &cfg, &grid, &mut rng)
                .unwrap()
                .len();
            if n > 0 {
                assert!((28_800..32_400).contains(&t), "arrival at {t}");
            }
            count += n;
        }
        assert_eq!(count, 300);
        assert_eq!(parking_duration(&cfg, 30_000.0, &mut rng), 600.0);
    }

    #[test]
    fn never_parks_without_hazard() {
        let grid = corridor(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = TrafficConfig {
            mean_moving_s: f64::INFINITY,
            ..TrafficConfig::default()
        };
        let v = Vehicle::entering(
            EntityId(0),
            Cell::new(0, 0),
            8.0,
            Intent::Park,
            &grid,
            &mut rng,
        );
        for t in 0..10_000 {
            assert!(maybe_park(&v, &cfg, t as f64, 1.0, &mut rng).is_none());
        }
    }

    #[test]
    fn parking_sets_departure() {
        let grid = corridor(4);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut v = Vehicle::entering(
            EntityId(0),
            Cell::new(0, 0),
            8.0,
            Intent::Park,
            &grid,
            &mut rng,
        );
        v.park(&grid, 100.0, 0.0);
        assert_eq!(v.role, Role::ParkedSilent);
        assert!(v.should_depart(100.0));
        v.planned_duration_s = Some(50.0);
        assert!(!v.should_depart(149.0));
        assert!(v.should_depart(150.0));
    }

    #[test]
    fn profile_round_trip_and_errors() {
        let p = DayProfile::default();
        p.validate().unwrap();
        let mut buf = Vec::new();
        p.write(&mut buf).unwrap();
        let back = DayProfile::read(&buf[..]).unwrap();
        for (a, b) in p.slots.iter().zip(&back.slots) {
            assert!((a.weight - b.weight).abs() < 1e-12);
            assert_eq!(a.median_s, b.median_s);
        }
        let err = DayProfile::read(&b"0,1.0,600,0\n1,x,600,0\n"[..]).unwrap_err();
        assert!(matches!(err, TrafficError::Parse { line: 2, .. }), "{err}");
        assert!(DayProfile::read(&b"0,1.0,600,0\n"[..]).is_err());
    }

    #[test]
    fn trace_groups_by_second() {
        let text = "time_s,vehicle_id,x,y\n0.0,7,10,10\n0.5,7,12,10\n1.0,8,40,15\n3.2,7,20,10\n";
        let recs = read_trace(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 4);
        let trace = Trace::new(&recs);
        assert_eq!(trace.positions_at(0), &[(7, Point::new(12.0, 10.0))]);
        assert_eq!(trace.last_second(7), Some(3));
        assert_eq!(trace.vehicle_count(), 2);
        assert!(matches!(
            read_trace("0,1,2\n".as_bytes()),
            Err(TrafficError::Parse { line: 1, .. })
        ));
    }
}
