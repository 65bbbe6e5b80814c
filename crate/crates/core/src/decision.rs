//! Local decision kernel run by a newly parked car.
//!
//! The decision maker collects the coverage maps of the RSUs it can hear,
//! enumerates every coverage solution that revokes at most two of the
//! toggleable entities (itself plus its 1-hop RSUs), rates each one with a
//! weighted product of four attributes and applies the best.
//!
//! Attributes of a solution `S`:
//!
//! * `a_sig`: sum of the best strength over cells that are covered in `S`
//!   and present in the decision maker's own map, divided by the decision
//!   maker's covered-cell count.
//! * `a_sat`: the same sum and denominator over the number of covering maps.
//! * `a_cov`: cells covered in `S` over cells covered when nothing is revoked.
//! * `a_bat`: mean battery indicator of the active entities.
//!
//! Second-hop maps always take part in the local maps but are never toggled.
//! Saturation is a cost criterion, so its weight enters the product with a
//! negative sign.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Cell;
use crate::maps::CoverageMap;
use crate::EntityId;

/// Relative score difference below which two solutions are considered tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("invalid candidate pool: {0}")]
    InvalidPool(String),
    #[error("attribute undefined: {0}")]
    UndefinedAttribute(&'static str),
    #[error("cannot score non-finite or negative attribute {name} = {value}")]
    BadAttribute { name: &'static str, value: f64 },
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("invalid battery policy: {0}")]
    BadPolicy(String),
    #[error("solution refers to entity {0} which is not toggleable in this pool")]
    UnknownEntity(EntityId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoringWeights {
    pub w_sig: f64,
    pub w_sat: f64,
    pub w_cov: f64,
    pub w_bat: f64,
}

impl Default for ScoringWeights {
    fn default() -> Self {
        ScoringWeights {
            w_sig: 1.0,
            w_sat: 0.2,
            w_cov: 0.3,
            w_bat: 0.0,
        }
    }
}

impl ScoringWeights {
    pub fn new(w_sig: f64, w_sat: f64, w_cov: f64, w_bat: f64) -> Self {
        ScoringWeights {
            w_sig,
            w_sat,
            w_cov,
            w_bat,
        }
    }

    pub fn validate(&self) -> Result<(), DecisionError> {
        for (name, w) in [
            ("w_sig", self.w_sig),
            ("w_sat", self.w_sat),
            ("w_cov", self.w_cov),
            ("w_bat", self.w_bat),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(DecisionError::BadWeights(format!(
                    "{name} must be finite and non-negative, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Standard and maximum RSU activity times, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryPolicy {
    pub tau_min_s: f64,
    pub tau_max_s: f64,
}

impl Default for BatteryPolicy {
    fn default() -> Self {
        BatteryPolicy {
            tau_min_s: 1800.0,
            tau_max_s: 3600.0,
        }
    }
}

impl BatteryPolicy {
    pub fn new(tau_min_s: f64, tau_max_s: f64) -> Result<Self, DecisionError> {
        let p = BatteryPolicy {
            tau_min_s,
            tau_max_s,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DecisionError> {
        if !(self.tau_min_s > 0.0 && self.tau_min_s < self.tau_max_s && self.tau_max_s.is_finite())
        {
            return Err(DecisionError::BadPolicy(format!(
                "need 0 < tau_min ({}) < tau_max ({})",
                self.tau_min_s, self.tau_max_s
            )));
        }
        Ok(())
    }
}

/// Battery indicator of an RSU that has been active for `tau_s` seconds:
/// 1 until `tau_min`, then falling linearly to 0 at `tau_max`.
pub fn battery_indicator(tau_s: f64, policy: &BatteryPolicy) -> f64 {
    if tau_s < policy.tau_min_s {
        return 1.0;
    }
    let frac = (tau_s - policy.tau_min_s) / (policy.tau_max_s - policy.tau_min_s);
    (1.0 - frac).clamp(0.0, 1.0)
}

/// A 1-hop RSU as reported in its map response.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: EntityId,
    pub map: CoverageMap,
    pub battery: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub decision_maker: EntityId,
    pub maker_map: CoverageMap,
    pub neighbors: Vec<Candidate>,
    /// Maps of 2-hop RSUs: context only, never toggled.
    pub second_hop: Vec<CoverageMap>,
}

impl CandidatePool {
    pub fn new(decision_maker: EntityId, maker_map: CoverageMap) -> Self {
        CandidatePool {
            decision_maker,
            maker_map,
            neighbors: Vec::new(),
            second_hop: Vec::new(),
        }
    }

    pub fn with_neighbor(mut self, id: EntityId, map: CoverageMap, battery: f64) -> Self {
        self.neighbors.push(Candidate { id, map, battery });
        self
    }

    pub fn with_second_hop(mut self, map: CoverageMap) -> Self {
        self.second_hop.push(map);
        self
    }

    /// Number of toggleable entities, the decision maker included.
    pub fn toggleable(&self) -> usize {
        1 + self.neighbors.len()
    }

    /// Toggleable ids: the decision maker first, then neighbors in pool order.
    pub fn entity_ids(&self) -> Vec<EntityId> {
        std::iter::once(self.decision_maker)
            .chain(self.neighbors.iter().map(|c| c.id))
            .collect()
    }

    pub fn validate(&self) -> Result<(), DecisionError> {
        let mut seen = BTreeSet::new();
        for id in self.entity_ids() {
            if !seen.insert(id) {
                return Err(DecisionError::InvalidPool(format!(
                    "entity {id} appears more than once"
                )));
            }
        }
        for c in &self.neighbors {
            if !(c.battery.is_finite() && (0.0..=1.0).contains(&c.battery)) {
                return Err(DecisionError::InvalidPool(format!(
                    "battery indicator {} of {} is outside [0, 1]",
                    c.battery, c.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attributes {
    pub a_sig: f64,
    pub a_sat: f64,
    pub a_cov: f64,
    pub a_bat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSolution {
    /// Active toggleable entities, sorted by id.
    pub active: Vec<EntityId>,
    /// Revoked toggleable entities, sorted by id.
    pub revoked: Vec<EntityId>,
    pub attrs: Option<Attributes>,
    pub score: Option<f64>,
}

impl CoverageSolution {
    pub fn revoked_count(&self) -> usize {
        self.revoked.len()
    }

    pub fn is_active(&self, id: EntityId) -> bool {
        self.active.binary_search(&id).is_ok()
    }

    /// The solution that revokes nothing.
    pub fn is_all_active(&self) -> bool {
        self.revoked.is_empty()
    }

    /// The no-action solution: only the decision maker stays inactive.
    pub fn is_no_action(&self, decision_maker: EntityId) -> bool {
        self.revoked == [decision_maker]
    }
}

/// Every solution revoking at most two entities, ordered by number of
/// revocations and then lexicographically by revoked ids.
pub fn enumerate_solutions(pool: &CandidatePool) -> Vec<CoverageSolution> {
    let mut ids = pool.entity_ids();
    ids.sort();
    let n = ids.len();
    let make = |revoked: Vec<EntityId>| CoverageSolution {
        active: ids
            .iter()
            .copied()
            .filter(|id| !revoked.contains(id))
            .collect(),
        revoked,
        attrs: None,
        score: None,
    };
    let mut out = Vec::with_capacity(1 + n + n * n.saturating_sub(1) / 2);
    out.push(make(Vec::new()));
    for &a in &ids {
        out.push(make(vec![a]));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(make(vec![ids[i], ids[j]]));
        }
    }
    out
}

/// Dense view of a pool: every cell mentioned by any map gets a local index.
struct PoolIndex {
    ids: Vec<EntityId>,
    maps: Vec<Vec<(u32, u8)>>,
    second_hop: Vec<Vec<(u32, u8)>>,
    batteries: Vec<f64>,
    in_maker_map: Vec<bool>,
    maker_count: usize,
    cell_count: usize,
    widest_coverage: usize,
}

impl PoolIndex {
    fn new(pool: &CandidatePool) -> Self {
        let mut local: BTreeMap<Cell, u32> = BTreeMap::new();
        let all_maps = std::iter::once(&pool.maker_map)
            .chain(pool.neighbors.iter().map(|c| &c.map))
            .chain(pool.second_hop.iter());
        for m in all_maps {
            for (c, _) in m.iter() {
                let next = local.len() as u32;
                local.entry(c).or_insert(next);
            }
        }
        let dense = |m: &CoverageMap| -> Vec<(u32, u8)> {
            m.iter().map(|(c, s)| (local[&c], s.value())).collect()
        };
        let mut maps = vec![dense(&pool.maker_map)];
        maps.extend(pool.neighbors.iter().map(|c| dense(&c.map)));
        let second_hop: Vec<_> = pool.second_hop.iter().map(dense).collect();
        let cell_count = local.len();
        let mut in_maker_map = vec![false; cell_count];
        for (i, _) in &maps[0] {
            in_maker_map[*i as usize] = true;
        }
        let mut batteries = vec![1.0];
        batteries.extend(pool.neighbors.iter().map(|c| c.battery));
        let mut index = PoolIndex {
            ids: pool.entity_ids(),
            maps,
            second_hop,
            batteries,
            maker_count: pool.maker_map.covered_count(),
            in_maker_map,
            cell_count,
            widest_coverage: 0,
        };
        index.widest_coverage = index.covered_cells(&vec![true; index.ids.len()]);
        index
    }

    fn mask(&self, solution: &CoverageSolution) -> Result<Vec<bool>, DecisionError> {
        let mut active = vec![false; self.ids.len()];
        for id in &solution.active {
            let k = self
                .ids
                .iter()
                .position(|x| x == id)
                .ok_or(DecisionError::UnknownEntity(*id))?;
            active[k] = true;
        }
        Ok(active)
    }

    fn contributing<'a>(&'a self, active: &'a [bool]) -> impl Iterator<Item = &'a Vec<(u32, u8)>> {
        self.maps
            .iter()
            .zip(active)
            .filter(|(_, on)| **on)
            .map(|(m, _)| m)
            .chain(self.second_hop.iter())
    }

    fn covered_cells(&self, active: &[bool]) -> usize {
        let mut covered = vec![false; self.cell_count];
        for m in self.contributing(active) {
            for (i, _) in m {
                covered[*i as usize] = true;
            }
        }
        covered.iter().filter(|c| **c).count()
    }

    /// (a_sig, a_sat) from the local coverage and saturation maps.
    fn signal_and_saturation(&self, active: &[bool]) -> Result<(f64, f64), DecisionError> {
        if self.maker_count == 0 {
            return Err(DecisionError::UndefinedAttribute(
                "decision maker's coverage map is empty",
            ));
        }
        let mut lmc = vec![0u8; self.cell_count];
        let mut lms = vec![0u32; self.cell_count];
        for m in self.contributing(active) {
            for &(i, s) in m {
                let i = i as usize;
                lmc[i] = lmc[i].max(s);
                lms[i] += 1;
            }
        }
        let (mut sig, mut sat, mut cells) = (0u64, 0u64, 0usize);
        for i in 0..self.cell_count {
            if lmc[i] > 0 && self.in_maker_map[i] {
                sig += u64::from(lmc[i]);
                sat += u64::from(lms[i]);
                cells += 1;
            }
        }
        if cells == 0 {
            // nothing the decision maker can hear is served: no signal, and
            // saturation takes its smallest meaningful value
            return Ok((0.0, 1.0));
        }
        let denom = self.maker_count as f64;
        Ok((sig as f64 / denom, sat as f64 / denom))
    }

    fn coverage(&self, active: &[bool]) -> Result<f64, DecisionError> {
        if self.widest_coverage == 0 {
            return Err(DecisionError::UndefinedAttribute(
                "no cell is covered when every entity is active",
            ));
        }
        Ok(self.covered_cells(active) as f64 / self.widest_coverage as f64)
    }

    fn battery(&self, active: &[bool]) -> f64 {
        let on: Vec<f64> = self
            .batteries
            .iter()
            .zip(active)
            .filter(|(_, a)| **a)
            .map(|(b, _)| *b)
            .collect();
        if on.is_empty() {
            1.0
        } else {
            on.iter().sum::<f64>() / on.len() as f64
        }
    }

    fn attributes(&self, active: &[bool]) -> Result<Attributes, DecisionError> {
        let (a_sig, a_sat) = self.signal_and_saturation(active)?;
        Ok(Attributes {
            a_sig,
            a_sat,
            a_cov: self.coverage(active)?,
            a_bat: self.battery(active),
        })
    }
}

pub fn attr_sig(solution: &CoverageSolution, pool: &CandidatePool) -> Result<f64, DecisionError> {
    let index = PoolIndex::new(pool);
    Ok(index.signal_and_saturation(&index.mask(solution)?)?.0)
}

pub fn attr_sat(solution: &CoverageSolution, pool: &CandidatePool) -> Result<f64, DecisionError> {
    let index = PoolIndex::new(pool);
    Ok(index.signal_and_saturation(&index.mask(solution)?)?.1)
}

pub fn attr_cov(solution: &CoverageSolution, pool: &CandidatePool) -> Result<f64, DecisionError> {
    let index = PoolIndex::new(pool);
    index.coverage(&index.mask(solution)?)
}

pub fn attr_bat(solution: &CoverageSolution, pool: &CandidatePool) -> Result<f64, DecisionError> {
    let index = PoolIndex::new(pool);
    Ok(index.battery(&index.mask(solution)?))
}

pub fn attributes(
    solution: &CoverageSolution,
    pool: &CandidatePool,
) -> Result<Attributes, DecisionError> {
    let index = PoolIndex::new(pool);
    index.attributes(&index.mask(solution)?)
}

/// `x^w` with `x^0 = 1` for every `x`, zero included.
fn weighted(x: f64, w: f64) -> f64 {
    if w == 0.0 {
        1.0
    } else {
        x.powf(w)
    }
}

/// Weighted product score: `a_sig^w_sig * a_sat^-w_sat * a_cov^w_cov * a_bat^w_bat`.
pub fn score(attrs: &Attributes, weights: &ScoringWeights) -> Result<f64, DecisionError> {
    for (name, value) in [
        ("a_sig", attrs.a_sig),
        ("a_sat", attrs.a_sat),
        ("a_cov", attrs.a_cov),
        ("a_bat", attrs.a_bat),
    ] {
        if !(value.is_finite() && value >= 0.0) {
            return Err(DecisionError::BadAttribute { name, value });
        }
    }
    let s = weighted(attrs.a_sig, weights.w_sig)
        * weighted(attrs.a_sat, -weights.w_sat)
        * weighted(attrs.a_cov, weights.w_cov)
        * weighted(attrs.a_bat, weights.w_bat);
    if !s.is_finite() {
        return Err(DecisionError::BadAttribute {
            name: "a_sat",
            value: attrs.a_sat,
        });
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoleVerb {
    Assign,
    Revoke,
}

impl fmt::Display for RoleVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoleVerb::Assign => "assign",
            RoleVerb::Revoke => "revoke",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoleCommand {
    pub maker: EntityId,
    pub verb: RoleVerb,
    pub target: EntityId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub chosen: CoverageSolution,
    pub commands: Vec<RoleCommand>,
    /// Solutions whose attributes could not be computed.
    pub failed: usize,
}

/// Is `a` preferred over the incumbent `b`?
fn preferred(a: &CoverageSolution, b: &CoverageSolution, maker: EntityId) -> bool {
    let (sa, sb) = (a.score.unwrap(), b.score.unwrap());
    let scale = sa.abs().max(sb.abs());
    if (sa - sb).abs() > TIE_TOLERANCE * scale {
        return sa > sb;
    }
    if a.revoked_count() != b.revoked_count() {
        return a.revoked_count() > b.revoked_count();
    }
    let (na, nb) = (a.is_no_action(maker), b.is_no_action(maker));
    if na != nb {
        return na;
    }
    a.active < b.active
}

fn no_action(pool: &CandidatePool) -> CoverageSolution {
    let mut active: Vec<EntityId> = pool.neighbors.iter().map(|c| c.id).collect();
    active.sort();
    CoverageSolution {
        active,
        revoked: vec![pool.decision_maker],
        attrs: None,
        score: None,
    }
}

/// Scores every constrained solution and returns the winner with the role
/// commands that apply it. If no solution can be scored the network is left
/// unchanged.
pub fn decide(pool: &CandidatePool, weights: &ScoringWeights) -> Result<Decision, DecisionError> {
    pool.validate()?;
    weights.validate()?;
    let index = PoolIndex::new(pool);
    let maker = pool.decision_maker;
    let mut best: Option<CoverageSolution> = None;
    let mut failed = 0;
    for mut sol in enumerate_solutions(pool) {
        let scored = index
            .mask(&sol)
            .and_then(|m| index.attributes(&m))
            .and_then(|a| score(&a, weights).map(|s| (a, s)));
        match scored {
            Ok((attrs, s)) => {
                sol.attrs = Some(attrs);
                sol.score = Some(s);
            }
            Err(_) => {
                failed += 1;
                continue;
            }
        }
        if best.as_ref().is_none_or(|b| preferred(&sol, b, maker)) {
            best = Some(sol);
        }
    }
    let Some(chosen) = best else {
        return Ok(Decision {
            chosen: no_action(pool),
            commands: Vec::new(),
            failed,
        });
    };
    let mut commands = Vec::new();
    if chosen.is_active(maker) {
        commands.push(RoleCommand {
            maker,
            verb: RoleVerb::Assign,
            target: maker,
        });
    }
    for &id in &chosen.revoked {
        if id != maker {
            commands.push(RoleCommand {
                maker,
                verb: RoleVerb::Revoke,
                target: id,
            });
        }
    }
    Ok(Decision {
        chosen,
        commands,
        failed,
    })
}
