//! Deterministic multi-robot simulation: kinematics, collision and deadlock
//! checks, per-robot control loops and scenario execution.

mod robot;
mod runner;
pub mod suite;
mod world;

use std::path::PathBuf;

use thiserror::Error;

use crate::bus::BusError;
use crate::costmap::CostmapError;
use crate::map_io::MapIoError;
use crate::server::ServerError;

pub use robot::{ControlOutput, RobotAgent};
pub use runner::{render_log, run_scenario, validate_scenario, Outcome, RobotReport, RunOptions, RunOutput, RunReport, StepRecord};
pub use world::{check_collisions, detect_deadlock, step_world, EventKind, RobotState, SimEvent, Track, WorldState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    MapIo(#[from] MapIoError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error(transparent)]
    Costmap(#[from] CostmapError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    /// Whether the scenario itself is at fault rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            SimError::Config(_)
                | SimError::MapIo(_)
                | SimError::Server(ServerError::MapIo(_) | ServerError::Config(_))
        )
    }
}
