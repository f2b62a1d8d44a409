use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::inflation::decay_cost;
use super::{Cost, CostGrid, CostmapError, FREE, LETHAL, NEUTRAL, UNKNOWN};
use crate::grid::{wrap_angle, GridMeta, Pose2};
use crate::map_io::{LaneGrid, MaskGrid, Occupancy, OccupancyGrid, Region};

/// Occupied cells are lethal, free cells cost nothing, unknown stays unknown.
pub fn static_layer(occ: &OccupancyGrid) -> CostGrid {
    CostGrid {
        meta: occ.meta,
        cells: occ
            .cells
            .iter()
            .map(|c| match c {
                Occupancy::Free => FREE,
                Occupancy::Occupied => LETHAL,
                Occupancy::Unknown => UNKNOWN,
            })
            .collect(),
    }
}

/// Masked cells take `level` (at most lethal); everything else is free.
pub fn prohibition_layer(mask: &MaskGrid, level: Cost, meta: &GridMeta) -> Result<CostGrid, CostmapError> {
    if !mask.meta.same_geometry(meta) {
        return Err(CostmapError::Consistency("prohibition mask geometry differs from the static map".into()));
    }
    let level = level.min(LETHAL);
    Ok(CostGrid {
        meta: *meta,
        cells: mask.cells.iter().map(|&m| if m { level } else { FREE }).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaneConfig {
    pub pass_cost: Cost,
    pub block_cost: Cost,
    pub neutral_cost: Cost,
    pub pass_threshold: f64,
    pub block_threshold: f64,
    /// Yaw change (rad) that triggers recomputing a cached lane layer.
    pub yaw_epsilon: f64,
}

impl Default for LaneConfig {
    fn default() -> Self {
        Self {
            pass_cost: FREE,
            block_cost: LETHAL,
            neutral_cost: NEUTRAL,
            pass_threshold: 0.4,
            block_threshold: -0.4,
            yaw_epsilon: 0.01,
        }
    }
}

impl LaneConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(-1.0 <= self.block_threshold
            && self.block_threshold < self.pass_threshold
            && self.pass_threshold <= 1.0)
        {
            return Err("lane thresholds must satisfy -1 <= block < pass <= 1".into());
        }
        if [self.pass_cost, self.block_cost, self.neutral_cost].iter().any(|&c| c > LETHAL) {
            return Err("lane costs must be at most 254".into());
        }
        Ok(())
    }
}

/// Direction cost of travelling with heading `robot_yaw` through a lane
/// pointing at `lane_angle`: pass when the headings agree, block when they
/// oppose, neutral in between.
pub fn lane_cost(robot_yaw: f64, lane_angle: f64, cfg: &LaneConfig) -> Cost {
    let c = wrap_angle(robot_yaw - lane_angle).cos();
    if c >= cfg.pass_threshold {
        cfg.pass_cost
    } else if c <= cfg.block_threshold {
        cfg.block_cost
    } else {
        cfg.neutral_cost
    }
}

pub fn lane_layer(
    lanes: &LaneGrid,
    robot_yaw: f64,
    cfg: &LaneConfig,
    meta: &GridMeta,
) -> Result<CostGrid, CostmapError> {
    if !lanes.meta.same_geometry(meta) {
        return Err(CostmapError::Consistency("lane mask geometry differs from the static map".into()));
    }
    Ok(CostGrid {
        meta: *meta,
        cells: (0..lanes.cells.len())
            .map(|i| lanes.angle(i).map_or(FREE, |a| lane_cost(robot_yaw, a, cfg)))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    /// Radius of the lethal disc drawn for each other robot.
    pub robot_radius: f64,
    pub inflation_radius: f64,
    /// Decay rate, 1/m.
    pub scale: f64,
}

impl FleetConfig {
    pub fn for_radius(radius: f64) -> Self {
        Self {
            robot_radius: radius,
            inflation_radius: 3.0 * radius,
            scale: 3.0,
        }
    }
}

/// Draws every other robot as a lethal disc with a decaying skirt. The
/// robot named `own_name` is skipped; overlaps keep the larger cost.
pub fn fleet_layer(own_name: &str, poses: &[(String, Pose2)], cfg: &FleetConfig, meta: &GridMeta) -> CostGrid {
    let mut grid = CostGrid::new(*meta);
    for (_, pose) in poses.iter().filter(|(n, _)| n != own_name) {
        let (c0, r0) = meta.world_to_cell_unchecked(pose.x - cfg.inflation_radius, pose.y - cfg.inflation_radius);
        let (c1, r1) = meta.world_to_cell_unchecked(pose.x + cfg.inflation_radius, pose.y + cfg.inflation_radius);
        for r in r0.max(0)..=r1.min(meta.height as i64 - 1) {
            for c in c0.max(0)..=c1.min(meta.width as i64 - 1) {
                let (x, y) = meta.cell_center(c as usize, r as usize);
                let d = (x - pose.x).hypot(y - pose.y);
                let cost = if d <= cfg.robot_radius {
                    LETHAL
                } else if d <= cfg.inflation_radius {
                    decay_cost(cfg.scale, d - cfg.robot_radius)
                } else {
                    continue;
                };
                let i = meta.index(c as usize, r as usize);
                grid.cells[i] = grid.cells[i].max(cost);
            }
        }
    }
    grid
}

/// Region id to the robot that holds it, as known to the robot composing
/// its map.
pub type RegionHoldings = BTreeMap<String, String>;

/// Marks every region not held by `own_name` as lethal. A cell belongs to a
/// region when its center lies inside or on the polygon.
pub fn region_layer(regions: &[Region], holdings: &RegionHoldings, own_name: &str, meta: &GridMeta) -> CostGrid {
    let mut grid = CostGrid::new(*meta);
    for region in regions {
        if holdings.get(&region.id).is_some_and(|h| h == own_name) {
            continue;
        }
        let (x0, y0, x1, y1) = region.bounds();
        let (c0, r0) = meta.world_to_cell_unchecked(x0, y0);
        let (c1, r1) = meta.world_to_cell_unchecked(x1, y1);
        for r in r0.max(0)..=r1.min(meta.height as i64 - 1) {
            for c in c0.max(0)..=c1.min(meta.width as i64 - 1) {
                let (x, y) = meta.cell_center(c as usize, r as usize);
                if region.contains(x, y) {
                    grid.set(c as usize, r as usize, LETHAL);
                }
            }
        }
    }
    grid
}
