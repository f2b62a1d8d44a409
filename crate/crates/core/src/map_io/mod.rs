//! File formats: occupancy and prohibition masks, 16-bit lane masks, region
//! lists, scenarios and cost-map snapshots.

mod maps;
mod meta;
pub mod pgm;
mod regions;
mod scenario;

use std::path::PathBuf;

use thiserror::Error;

pub use maps::{
    load_lane_mask, load_occupancy_map, load_prohibition_mask, read_costmap_snapshot,
    write_costmap_snapshot, write_lane_mask, write_occupancy_image, LaneGrid, MaskGrid, Occupancy,
    OccupancyGrid, CENTIDEGREES_PER_DEGREE, NO_LANE,
};
pub use meta::{load_meta, parse_meta, write_meta, MapMeta};
pub use regions::{parse_regions, load_regions, write_regions, Region};
pub use scenario::{
    load_scenario, parse_scenario, CostmapSettings, DeadlockSettings, LayerToggles, MapFiles,
    MotionLimits, PlannerSettings, RobotSpec, Scenario, ServerSettings, SimConfig, Waypoint,
};

#[derive(Debug, Error)]
pub enum MapIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("validation error: {0}")]
    Validation(String),
}

impl MapIoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<Vec<u8>, MapIoError> {
    std::fs::read(path).map_err(|e| MapIoError::io(path, e))
}

pub(crate) fn read_text(path: &std::path::Path) -> Result<String, MapIoError> {
    std::fs::read_to_string(path).map_err(|e| MapIoError::io(path, e))
}
