//! Tick-driven simulation of parked cars forming an RSU network.
//!
//! Each one-second tick runs, in order: departures, forced revocation at
//! `tau_max`, arrivals, movement and parking, beaconing to learning cars, at
//! most one decision, and a metrics sample. Coverage metrics use the true
//! propagation table, never the learned maps.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, DecisionMode, RunConfig};
use crate::decision::{
    battery_indicator, decide, CandidatePool, DecisionError, RoleCommand, RoleVerb,
};
use crate::grid::{Cell, CityGrid};
use crate::maps::{CoverageMap, MapBuilder};
use crate::radio::{sample_rssi, CoverageTable, SignalStrength};
use crate::traffic::{
    maybe_exit, maybe_park, parking_duration, read_trace, step_vehicle, Intent, Spawner, Trace,
    TrafficError, Vehicle,
};
use crate::EntityId;

/// Stream id of the beacon RSSI generator; traffic uses stream 0.
const RSSI_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error("incremental metrics diverged from a full recount at t = {0}")]
    MetricMismatch(u64),
    #[error("series has no samples at or after {0} s")]
    SeriesTooShort(f64),
    #[error("no parked population to sample")]
    EmptyPopulation,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSample {
    pub t: u64,
    pub active_rsus: usize,
    /// Covered usable cells over usable cells, in [0, 1].
    pub coverage_pct: f64,
    pub mean_signal: f64,
    pub mean_saturation: f64,
    pub area_per_rsu_m2: f64,
}

pub const METRICS_HEADER: &str =
    "t,active_rsus,coverage_pct,mean_signal,mean_saturation,area_per_rsu";

impl MetricsSample {
    pub fn write_line<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.3}",
            self.t,
            self.active_rsus,
            self.coverage_pct,
            self.mean_signal,
            self.mean_saturation,
            self.area_per_rsu_m2
        )
    }
}

pub fn write_metrics_csv<W: Write>(series: &[MetricsSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for s in series {
        s.write_line(&mut out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RevocationCause {
    #[serde(rename = "decision")]
    Decision,
    #[serde(rename = "forced_tau_M")]
    ForcedTauMax,
    #[serde(rename = "departure")]
    Departure,
}

impl fmt::Display for RevocationCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RevocationCause::Decision => "decision",
            RevocationCause::ForcedTauMax => "forced_tau_M",
            RevocationCause::Departure => "departure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsuLifetimeRecord {
    pub id: EntityId,
    pub assigned_at: f64,
    pub revoked_at: f64,
    pub cause: RevocationCause,
}

impl RsuLifetimeRecord {
    pub fn lifetime_s(&self) -> f64 {
        self.revoked_at - self.assigned_at
    }
}

pub fn write_lifetimes_csv<W: Write>(
    records: &[RsuLifetimeRecord],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "id,assigned_at,revoked_at,lifetime_s,cause")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.id,
            r.assigned_at,
            r.revoked_at,
            r.lifetime_s(),
            r.cause
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedCommand {
    pub time_s: u64,
    pub command: RoleCommand,
}

pub fn write_commands_csv<W: Write>(commands: &[TimedCommand], mut out: W) -> std::io::Result<()> {
    writeln!(out, "time_s,maker_id,verb,target_id")?;
    for c in commands {
        writeln!(
            out,
            "{},{},{},{}",
            c.time_s, c.command.maker, c.command.verb, c.command.target
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Cam,
    MapRequest,
    MapResponse,
    RoleAssign,
    RoleRevoke,
}

/// Map response payload sent by a 1-hop RSU.
#[derive(Debug, Clone, PartialEq)]
pub struct MapResponse {
    pub src: EntityId,
    pub scm: CoverageMap,
    pub battery: f64,
    /// Maps of the responder's own RSU neighbors.
    pub forwarded: Vec<CoverageMap>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounts {
    pub cam: u64,
    pub map_request: u64,
    pub map_response: u64,
    pub role_assign: u64,
    pub role_revoke: u64,
}

impl MessageCounts {
    fn add(&mut self, kind: MessageKind, n: u64) {
        match kind {
            MessageKind::Cam => self.cam += n,
            MessageKind::MapRequest => self.map_request += n,
            MessageKind::MapResponse => self.map_response += n,
            MessageKind::RoleAssign => self.role_assign += n,
            MessageKind::RoleRevoke => self.role_revoke += n,
        }
    }
}

/// Per-cell coverage bookkeeping over usable cells.
#[derive(Debug, Clone)]
pub struct CoverageState {
    /// Number of RSUs covering each cell at each class.
    counts: Vec<[u32; 6]>,
    covered: u64,
    sum_best: u64,
    sum_sat: u64,
    active: usize,
}

impl CoverageState {
    pub fn new(usable: usize) -> Self {
        CoverageState {
            counts: vec![[0; 6]; usable],
            covered: 0,
            sum_best: 0,
            sum_sat: 0,
            active: 0,
        }
    }

    fn cell_terms(c: &[u32; 6]) -> (u64, u64) {
        let best = (1..6).rev().find(|&k| c[k] > 0).unwrap_or(0) as u64;
        let sat: u32 = c[1..].iter().sum();
        (best, u64::from(sat))
    }

    fn update(&mut self, table: &CoverageTable, u: u32, add: bool) {
        for &(v, s) in table.reach(u) {
            let c = &mut self.counts[v as usize];
            let (b0, n0) = Self::cell_terms(c);
            if add {
                c[s as usize] += 1;
            } else {
                c[s as usize] -= 1;
            }
            let (b1, n1) = Self::cell_terms(c);
            self.covered = self.covered + u64::from(n1 > 0) - u64::from(n0 > 0);
            self.sum_best = self.sum_best + b1 - b0;
            self.sum_sat = self.sum_sat + n1 - n0;
        }
        if add {
            self.active += 1;
        } else {
            self.active -= 1;
        }
    }

    pub fn add(&mut self, table: &CoverageTable, u: u32) {
        self.update(table, u, true);
    }

    pub fn remove(&mut self, table: &CoverageTable, u: u32) {
        self.update(table, u, false);
    }

    /// Recount from scratch for a set of RSU positions.
    pub fn from_rsus(table: &CoverageTable, rsus: impl IntoIterator<Item = u32>) -> Self {
        let mut st = CoverageState::new(table.usable_len());
        for u in rsus {
            for &(v, s) in table.reach(u) {
                st.counts[v as usize][s as usize] += 1;
            }
            st.active += 1;
        }
        for c in &st.counts {
            let (b, n) = Self::cell_terms(c);
            st.covered += u64::from(n > 0);
            st.sum_best += b;
            st.sum_sat += n;
        }
        st
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn covered_cells(&self) -> u64 {
        self.covered
    }

    /// Best class and RSU count at a usable cell.
    pub fn cell(&self, u: u32) -> (u8, u32) {
        let (b, n) = Self::cell_terms(&self.counts[u as usize]);
        (b as u8, n as u32)
    }

    pub fn sample(&self, t: u64, cell_area_m2: f64) -> MetricsSample {
        let usable = self.counts.len() as f64;
        let cov = self.covered as f64;
        let (mean_signal, mean_saturation) = if self.covered == 0 {
            (0.0, 0.0)
        } else {
            (self.sum_best as f64 / cov, self.sum_sat as f64 / cov)
        };
        MetricsSample {
            t,
            active_rsus: self.active,
            coverage_pct: if usable > 0.0 { cov / usable } else { 0.0 },
            mean_signal,
            mean_saturation,
            area_per_rsu_m2: if self.active == 0 {
                0.0
            } else {
                cov * cell_area_m2 / self.active as f64
            },
        }
    }

    fn same_totals(&self, other: &CoverageState) -> bool {
        (self.covered, self.sum_best, self.sum_sat, self.active)
            == (other.covered, other.sum_best, other.sum_sat, other.active)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CarState {
    Learning,
    Silent,
    Rsu,
}

#[derive(Debug, Clone)]
struct ParkedCar {
    cell: Cell,
    u: u32,
    state: CarState,
    builder: Option<MapBuilder>,
    scm: Option<CoverageMap>,
    rsu_since: Option<f64>,
}

/// Everything a finished run reports.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub metrics: Vec<MetricsSample>,
    pub lifetimes: Vec<RsuLifetimeRecord>,
    pub commands: Vec<TimedCommand>,
    pub messages: MessageCounts,
    pub spawned: u64,
    pub parking_events: u64,
    pub decisions: u64,
    /// RSU roles handed out, by decision or by default assignment.
    pub assignments: u64,
}

/// A live simulation that can be stepped tick by tick.
pub struct Simulation {
    cfg: RunConfig,
    grid: CityGrid,
    table: CoverageTable,
    cell_area_m2: f64,
    traffic_rng: ChaCha8Rng,
    rssi_rng: ChaCha8Rng,
    spawner: Spawner,
    trace: Option<Trace>,
    trace_ids: BTreeMap<u64, EntityId>,
    next_trace_id: u32,
    moving: Vec<Vehicle>,
    parked: BTreeMap<EntityId, ParkedCar>,
    learners: Vec<EntityId>,
    queue: VecDeque<(u64, EntityId)>,
    departures: BinaryHeap<Reverse<(u64, EntityId)>>,
    rsus: BTreeSet<EntityId>,
    coverage: CoverageState,
    tick: u64,
    out: RunOutput,
}

impl Simulation {
    pub fn new(cfg: &RunConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let grid = cfg.grid.build()?;
        let table = CoverageTable::build(&grid, &cfg.radio);
        let trace = match &cfg.traffic.trace_path {
            Some(path) => {
                let f = std::fs::File::open(path).map_err(TrafficError::Io)?;
                Some(Trace::new(&read_trace(std::io::BufReader::new(f))?))
            }
            None => None,
        };
        let traffic_rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
        let mut rssi_rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
        rssi_rng.set_stream(RSSI_STREAM);
        let usable = table.usable_len();
        Ok(Simulation {
            cell_area_m2: grid.cell_size_m() * grid.cell_size_m(),
            spawner: Spawner::new(&grid),
            cfg: cfg.clone(),
            grid,
            table,
            traffic_rng,
            rssi_rng,
            trace,
            trace_ids: BTreeMap::new(),
            next_trace_id: 0,
            moving: Vec::new(),
            parked: BTreeMap::new(),
            learners: Vec::new(),
            queue: VecDeque::new(),
            departures: BinaryHeap::new(),
            rsus: BTreeSet::new(),
            coverage: CoverageState::new(usable),
            tick: 0,
            out: RunOutput::default(),
        })
    }

    pub fn grid(&self) -> &CityGrid {
        &self.grid
    }

    pub fn table(&self) -> &CoverageTable {
        &self.table
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn moving_count(&self) -> usize {
        self.moving.len()
    }

    pub fn parked_count(&self) -> usize {
        self.parked.len()
    }

    pub fn rsu_cells(&self) -> Vec<Cell> {
        self.rsus.iter().map(|id| self.parked[id].cell).collect()
    }

    pub fn coverage(&self) -> &CoverageState {
        &self.coverage
    }

    pub fn output(&self) -> &RunOutput {
        &self.out
    }

    pub fn into_output(self) -> RunOutput {
        self.out
    }

    /// Runs until `sim.duration_s` ticks have elapsed.
    pub fn run_to_end(mut self) -> Result<RunOutput, SimError> {
        while self.tick < self.cfg.sim.duration_s {
            self.step()?;
        }
        Ok(self.out)
    }

    pub fn step(&mut self) -> Result<MetricsSample, SimError> {
        let t = self.tick;
        self.depart(t);
        if self.cfg.decision.enforce_tau_max {
            self.force_revocations(t);
        }
        if self.trace.is_some() {
            self.replay_trace(t);
        } else {
            self.spawn_and_move(t)?;
        }
        self.beacon();
        self.decide_next(t)?;
        let sample = self.coverage.sample(t, self.cell_area_m2);
        let every = self.cfg.sim.verify_every;
        if every > 0 && t % every == 0 {
            let recount =
                CoverageState::from_rsus(&self.table, self.rsus.iter().map(|id| self.parked[id].u));
            if !recount.same_totals(&self.coverage) {
                return Err(SimError::MetricMismatch(t));
            }
        }
        self.out.metrics.push(sample);
        self.tick += 1;
        Ok(sample)
    }

    fn end_rsu(&mut self, id: EntityId, t: u64, cause: RevocationCause) {
        let car = self.parked.get_mut(&id).expect("rsu is parked");
        let since = car.rsu_since.take().expect("rsu has a start time");
        car.state = CarState::Silent;
        let u = car.u;
        self.rsus.remove(&id);
        self.coverage.remove(&self.table, u);
        self.out.lifetimes.push(RsuLifetimeRecord {
            id,
            assigned_at: since,
            revoked_at: t as f64,
            cause,
        });
    }

    fn start_rsu(&mut self, id: EntityId, t: u64) {
        let car = self.parked.get_mut(&id).expect("assigned car is parked");
        car.state = CarState::Rsu;
        car.rsu_since = Some(t as f64);
        let u = car.u;
        self.rsus.insert(id);
        self.coverage.add(&self.table, u);
        self.out.assignments += 1;
    }

    fn depart(&mut self, t: u64) {
        while let Some(Reverse((at, id))) = self.departures.peek().copied() {
            if at > t {
                break;
            }
            self.departures.pop();
            if self
                .parked
                .get(&id)
                .is_some_and(|c| c.state == CarState::Rsu)
            {
                self.end_rsu(id, t, RevocationCause::Departure);
            }
            if let Some(car) = self.parked.remove(&id) {
                if car.state == CarState::Learning {
                    self.learners.retain(|l| *l != id);
                }
            }
        }
    }

    fn force_revocations(&mut self, t: u64) {
        let tau_max = self.cfg.decision.tau_max_s;
        let expired: Vec<EntityId> = self
            .rsus
            .iter()
            .filter(|id| {
                let since = self.parked[id].rsu_since.unwrap();
                t as f64 - since >= tau_max
            })
            .copied()
            .collect();
        for id in expired {
            self.end_rsu(id, t, RevocationCause::ForcedTauMax);
        }
    }

    fn park(&mut self, id: EntityId, cell: Cell, t: u64, duration_s: f64) {
        let Some(u) = self.table.usable_index(&self.grid, cell) else {
            return;
        };
        self.out.parking_events += 1;
        self.parked.insert(
            id,
            ParkedCar {
                cell,
                u,
                state: CarState::Learning,
                builder: Some(MapBuilder::new()),
                scm: None,
                rsu_since: None,
            },
        );
        self.learners.push(id);
        let ready = t + self.cfg.decision.learn_s.ceil() as u64;
        self.queue.push_back((ready, id));
        let leave = (t as f64 + duration_s).ceil().max(t as f64 + 1.0) as u64;
        self.departures.push(Reverse((leave, id)));
    }

    fn spawn_and_move(&mut self, t: u64) -> Result<(), SimError> {
        let now = t as f64;
        let fresh = self.spawner.spawn(
            now,
            1.0,
            &self.cfg.traffic,
            &self.grid,
            &mut self.traffic_rng,
        )?;
        self.out.spawned += fresh.len() as u64;
        self.moving.extend(fresh);
        let mut still = Vec::with_capacity(self.moving.len());
        let mut parking = Vec::new();
        for mut v in std::mem::take(&mut self.moving) {
            step_vehicle(&mut v, &self.grid, 1.0, &mut self.traffic_rng);
            if let Some(d) = maybe_park(&v, &self.cfg.traffic, now, 1.0, &mut self.traffic_rng) {
                v.park(&self.grid, now, d);
                parking.push((v.id, v.cell, d));
            } else if !maybe_exit(&v, &self.cfg.traffic, 1.0, &mut self.traffic_rng) {
                still.push(v);
            }
        }
        self.moving = still;
        for (id, cell, d) in parking {
            self.park(id, cell, t, d);
        }
        Ok(())
    }

    /// Recorded mobility: each traced vehicle sits where its latest record
    /// puts it and parks after its final record.
    fn replay_trace(&mut self, t: u64) {
        let trace = self.trace.as_ref().expect("trace mode");
        let now = t as f64;
        let mut parking = Vec::new();
        let mut positions = BTreeMap::new();
        for &(vid, p) in trace.positions_at(t as i64) {
            let Ok(cell) = self.grid.cell_of(p) else {
                continue;
            };
            if !self.grid.is_usable(cell) {
                continue;
            }
            positions.insert(vid, cell);
            if trace.last_second(vid) == Some(t as i64) {
                parking.push((vid, cell));
            }
        }
        for (&vid, &cell) in &positions {
            let id = match self.trace_ids.get(&vid) {
                Some(id) => *id,
                None => {
                    let id = EntityId(self.next_trace_id);
                    self.next_trace_id += 1;
                    self.trace_ids.insert(vid, id);
                    self.out.spawned += 1;
                    self.moving.push(Vehicle::entering(
                        id,
                        cell,
                        0.0,
                        Intent::Park,
                        &self.grid,
                        &mut self.traffic_rng,
                    ));
                    id
                }
            };
            if let Some(v) = self.moving.iter_mut().find(|v| v.id == id) {
                v.cell = cell;
                v.progress_m = 0.0;
            }
        }
        for (vid, cell) in parking {
            let id = self.trace_ids[&vid];
            self.moving.retain(|v| v.id != id);
            let d = parking_duration(&self.cfg.traffic, now, &mut self.traffic_rng);
            self.park(id, cell, t, d);
        }
    }

    /// CAMs from every moving vehicle, heard by learning cars in range.
    fn beacon(&mut self) {
        let rate = self.cfg.maps.cam_rate_hz;
        let noise = self.cfg.maps.noise_sd;
        self.out
            .messages
            .add(MessageKind::Cam, self.moving.len() as u64 * u64::from(rate));
        if self.learners.is_empty() || rate == 0 {
            return;
        }
        let senders: Vec<(Cell, u32)> = self
            .moving
            .iter()
            .filter_map(|v| {
                let c = v.current_cell(&self.grid);
                self.table.usable_index(&self.grid, c).map(|u| (c, u))
            })
            .collect();
        for id in &self.learners {
            let car = self.parked.get_mut(id).expect("learner is parked");
            let builder = car.builder.as_mut().expect("learner has a builder");
            for &(cell, u) in &senders {
                let s = self.table.between(u, car.u);
                if s == 0 {
                    continue;
                }
                let s = SignalStrength::new(s).expect("table class is valid");
                for _ in 0..rate {
                    let r = sample_rssi(s, noise, &mut self.rssi_rng).expect("covered");
                    builder.record_beacon(cell, r);
                }
            }
        }
    }

    fn decide_next(&mut self, t: u64) -> Result<(), SimError> {
        while let Some(&(ready, id)) = self.queue.front() {
            if ready > t {
                return Ok(());
            }
            self.queue.pop_front();
            if self
                .parked
                .get(&id)
                .is_some_and(|c| c.state == CarState::Learning)
            {
                return self.decide_for(id, t);
            }
        }
        Ok(())
    }

    fn responses(&self, maker: EntityId) -> Vec<MapResponse> {
        let maker_u = self.parked[&maker].u;
        let policy = self.cfg.decision.battery();
        let corrupt = self.cfg.sim.corrupt_undelivered;
        let mut out = Vec::new();
        for id in &self.rsus {
            let car = &self.parked[id];
            let delivered = self.table.between(maker_u, car.u) > 0;
            if !delivered && !corrupt {
                continue;
            }
            let mut resp = MapResponse {
                src: *id,
                scm: car.scm.clone().expect("rsu has a map"),
                battery: battery_indicator(self.tick as f64 - car.rsu_since.unwrap(), &policy),
                forwarded: self
                    .rsus
                    .iter()
                    .filter(|q| *q != id && self.table.between(car.u, self.parked[q].u) > 0)
                    .map(|q| self.parked[q].scm.clone().expect("rsu has a map"))
                    .collect(),
            };
            if !delivered {
                scramble(&mut resp, &self.grid);
                continue;
            }
            out.push(resp);
        }
        out
    }

    fn decide_for(&mut self, id: EntityId, t: u64) -> Result<(), SimError> {
        self.out.decisions += 1;
        self.learners.retain(|l| *l != id);
        let car = self.parked.get_mut(&id).expect("decision maker is parked");
        let builder = car.builder.take().expect("learner has a builder");
        let (mut scm, _) = builder.finalize(id, self.cfg.maps.min_samples);
        scm.insert(car.cell, SignalStrength::MAX);
        car.scm = Some(scm.clone());
        car.state = CarState::Silent;

        let commands = match self.cfg.decision.mode {
            DecisionMode::AlwaysAssign => vec![RoleCommand {
                maker: id,
                verb: RoleVerb::Assign,
                target: id,
            }],
            DecisionMode::Wpm => {
                self.out.messages.add(MessageKind::MapRequest, 1);
                let responses = self.responses(id);
                self.out
                    .messages
                    .add(MessageKind::MapResponse, responses.len() as u64);
                let mut pool = CandidatePool::new(id, scm);
                let mut seen: BTreeSet<EntityId> = responses.iter().map(|r| r.src).collect();
                seen.insert(id);
                for r in &responses {
                    for m in &r.forwarded {
                        if seen.insert(m.owner()) {
                            pool.second_hop.push(m.clone());
                        }
                    }
                }
                for r in responses {
                    pool = pool.with_neighbor(r.src, r.scm, r.battery);
                }
                decide(&pool, &self.cfg.decision.weights())?.commands
            }
        };
        for cmd in commands {
            match cmd.verb {
                RoleVerb::Assign => {
                    self.out.messages.add(MessageKind::RoleAssign, 1);
                    self.start_rsu(cmd.target, t);
                }
                RoleVerb::Revoke => {
                    self.out.messages.add(MessageKind::RoleRevoke, 1);
                    self.end_rsu(cmd.target, t, RevocationCause::Decision);
                }
            }
            self.out.commands.push(TimedCommand {
                time_s: t,
                command: cmd,
            });
        }
        Ok(())
    }
}

/// Overwrites a response with implausible content.
fn scramble(resp: &mut MapResponse, grid: &CityGrid) {
    let mut junk = CoverageMap::new(resp.src);
    for c in grid.usable_cells() {
        junk.insert(c, SignalStrength::MAX);
    }
    resp.scm = junk.clone();
    resp.battery = 0.0;
    resp.forwarded = vec![junk];
}

/// Runs a full simulation.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, SimError> {
    Simulation::new(cfg)?.run_to_end()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and population standard deviation.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return MeanSd::default();
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        MeanSd {
            mean,
            sd: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SteadyState {
    pub samples: usize,
    pub active_rsus: MeanSd,
    pub coverage_pct: MeanSd,
    pub mean_signal: MeanSd,
    pub mean_saturation: MeanSd,
    pub area_per_rsu_m2: MeanSd,
}

/// Per-metric mean and standard deviation after dropping `t < discard_s`.
pub fn steady_state_stats(
    series: &[MetricsSample],
    discard_s: f64,
) -> Result<SteadyState, SimError> {
    let kept: Vec<&MetricsSample> = series.iter().filter(|s| s.t as f64 >= discard_s).collect();
    if kept.is_empty() {
        return Err(SimError::SeriesTooShort(discard_s));
    }
    let of = |f: fn(&MetricsSample) -> f64| MeanSd::of(kept.iter().map(|s| f(s)));
    Ok(SteadyState {
        samples: kept.len(),
        active_rsus: of(|s| s.active_rsus as f64),
        coverage_pct: of(|s| s.coverage_pct),
        mean_signal: of(|s| s.mean_signal),
        mean_saturation: of(|s| s.mean_saturation),
        area_per_rsu_m2: of(|s| s.area_per_rsu_m2),
    })
}

pub const STEADY_HEADER: &str = "active_rsus,active_rsus_sd,coverage_pct,coverage_pct_sd,mean_signal,mean_signal_sd,mean_saturation,mean_saturation_sd,area_per_rsu,area_per_rsu_sd";

impl SteadyState {
    pub fn csv_fields(&self) -> String {
        let m = [
            self.active_rsus,
            self.coverage_pct,
            self.mean_signal,
            self.mean_saturation,
            self.area_per_rsu_m2,
        ];
        m.iter()
            .map(|x| format!("{:.6},{:.6}", x.mean, x.sd))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Pools several runs: means of the per-run means and sds.
    pub fn pooled(runs: &[SteadyState]) -> SteadyState {
        let avg = |f: fn(&SteadyState) -> MeanSd| MeanSd {
            mean: MeanSd::of(runs.iter().map(|r| f(r).mean)).mean,
            sd: MeanSd::of(runs.iter().map(|r| f(r).sd)).mean,
        };
        SteadyState {
            samples: runs.iter().map(|r| r.samples).sum(),
            active_rsus: avg(|r| r.active_rsus),
            coverage_pct: avg(|r| r.coverage_pct),
            mean_signal: avg(|r| r.mean_signal),
            mean_saturation: avg(|r| r.mean_saturation),
            area_per_rsu_m2: avg(|r| r.area_per_rsu_m2),
        }
    }
}
