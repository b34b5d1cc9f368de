//! Satellite step-track: beacon model, inclined-orbit and antenna
//! simulation, least-squares and RLS peak estimation, and the timed
//! tracking cycle that ties them together.

pub mod antenna_sim;
pub mod beacon_model;
pub mod error;
pub mod estimators;
pub mod orbit_sim;
pub mod scenario;
pub mod simulation;
pub mod telemetry;
pub mod tracker;

pub use error::{Error, Result};
