//! Self-organizing roadside-unit networks formed by parked cars.
//!
//! Parked vehicles learn the coverage they could offer by listening to
//! beacons from moving traffic, and a newly parked car decides locally
//! whether it, or some of its RSU neighbors, should carry the RSU role.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod bounds;
pub mod cli;
pub mod config;
pub mod decision;
pub mod grid;
pub mod maps;
pub mod radio;
pub mod sim;
pub mod survey;
pub mod traffic;

/// Identifier of a vehicle or RSU.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct EntityId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
