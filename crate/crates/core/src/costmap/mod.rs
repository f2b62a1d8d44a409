//! Layered cost maps.
//!
//! Each layer turns one input (static map, prohibition mask, lane mask,
//! fleet poses, region reservations) into a [`CostGrid`]; the master grid is
//! their per-cell maximum followed by inflation.

mod inflation;
mod layers;
mod stack;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridMeta;

pub use inflation::{decay_cost, inflate, InflationConfig};
pub use layers::{
    fleet_layer, lane_cost, lane_layer, prohibition_layer, region_layer, static_layer,
    FleetConfig, LaneConfig, RegionHoldings,
};
pub use stack::{compose_layers, compose_master, LayerInputs, LayerStack, LayeredCostmap};

pub type Cost = u8;

pub const FREE: Cost = 0;
pub const NEUTRAL: Cost = 128;
/// Highest value produced by decaying costs.
pub const MAX_NON_OBSTACLE: Cost = 252;
pub const INSCRIBED: Cost = 253;
pub const LETHAL: Cost = 254;
pub const UNKNOWN: Cost = 255;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostmapError {
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("{0} layer is enabled but its input has not been received")]
    MissingInput(&'static str),
}

/// Row-major grid of costs sharing the static map's geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostGrid {
    pub meta: GridMeta,
    pub cells: Vec<Cost>,
}

impl CostGrid {
    /// All-free grid.
    pub fn new(meta: GridMeta) -> Self {
        Self::filled(meta, FREE)
    }

    pub fn filled(meta: GridMeta, value: Cost) -> Self {
        Self {
            cells: vec![value; meta.len()],
            meta,
        }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> Cost {
        self.cells[self.meta.index(col, row)]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, cost: Cost) {
        let i = self.meta.index(col, row);
        self.cells[i] = cost;
    }

    /// Cost of the cell containing a world point, `None` off the grid.
    pub fn at_world(&self, x: f64, y: f64) -> Option<Cost> {
        self.meta.world_to_cell(x, y).map(|(c, r)| self.get(c, r))
    }

    pub fn max_cost(&self) -> Cost {
        self.cells.iter().copied().max().unwrap_or(FREE)
    }

    pub(crate) fn check_geometry(&self, meta: &GridMeta, what: &str) -> Result<(), CostmapError> {
        if self.meta.same_geometry(meta) {
            Ok(())
        } else {
            Err(CostmapError::Consistency(format!("{what} geometry differs from the static map")))
        }
    }
}
