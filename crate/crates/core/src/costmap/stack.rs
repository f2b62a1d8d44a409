use serde::{Deserialize, Serialize};

use super::inflation::{inflate, InflationConfig};
use super::layers::{
    fleet_layer, lane_layer, prohibition_layer, region_layer, static_layer, FleetConfig,
    LaneConfig, RegionHoldings,
};
use super::{Cost, CostGrid, CostmapError, LETHAL, UNKNOWN};
use crate::grid::{wrap_angle, GridMeta, Pose2};
use crate::map_io::{LaneGrid, MaskGrid, OccupancyGrid, Region};

/// Enabled layers and their settings. Composition order is fixed: static
/// first, inflation last, whatever order a scenario lists them in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub static_map: bool,
    /// Cost written into prohibited cells.
    pub prohibition: Option<Cost>,
    pub lane: Option<LaneConfig>,
    pub fleet: Option<FleetConfig>,
    pub region: bool,
    pub inflation: Option<InflationConfig>,
}

impl LayerStack {
    /// Static map plus inflation only.
    pub fn basic(radius: f64) -> Self {
        Self {
            static_map: true,
            prohibition: None,
            lane: None,
            fleet: None,
            region: false,
            inflation: Some(InflationConfig::for_radius(radius)),
        }
    }
}

/// Everything the layers read, shared between robots.
#[derive(Debug, Clone, Copy)]
pub struct LayerInputs<'a> {
    pub occupancy: &'a OccupancyGrid,
    pub prohibition: Option<&'a MaskGrid>,
    pub lanes: Option<&'a LaneGrid>,
    pub fleet: &'a [(String, Pose2)],
    pub regions: &'a [Region],
    pub holdings: &'a RegionHoldings,
}

/// Per-cell maximum of the layer grids, then inflation. Static unknown
/// survives only where no other layer marks the cell.
pub fn compose_layers(
    meta: &GridMeta,
    static_grid: Option<&CostGrid>,
    others: &[&CostGrid],
    inflation: Option<&InflationConfig>,
) -> Result<CostGrid, CostmapError> {
    for g in static_grid.iter().chain(others.iter()) {
        g.check_geometry(meta, "layer")?;
    }
    let mut master = CostGrid::new(*meta);
    for g in others {
        for (m, &c) in master.cells.iter_mut().zip(&g.cells) {
            *m = (*m).max(c.min(LETHAL));
        }
    }
    if let Some(s) = static_grid {
        for (m, &c) in master.cells.iter_mut().zip(&s.cells) {
            if c == UNKNOWN {
                if *m == 0 {
                    *m = UNKNOWN;
                }
            } else {
                *m = (*m).max(c);
            }
        }
    }
    Ok(match inflation {
        Some(cfg) => inflate(&master, cfg),
        None => master,
    })
}

/// Builds a robot's master grid from scratch.
pub fn compose_master(
    stack: &LayerStack,
    own_name: &str,
    pose: &Pose2,
    inputs: &LayerInputs<'_>,
) -> Result<CostGrid, CostmapError> {
    let meta = inputs.occupancy.meta;
    let static_grid = stack.static_map.then(|| static_layer(inputs.occupancy));
    let mut others = Vec::new();
    if let Some(level) = stack.prohibition {
        let mask = inputs.prohibition.ok_or(CostmapError::MissingInput("prohibition"))?;
        others.push(prohibition_layer(mask, level, &meta)?);
    }
    if let Some(cfg) = &stack.lane {
        let lanes = inputs.lanes.ok_or(CostmapError::MissingInput("lane"))?;
        others.push(lane_layer(lanes, pose.yaw, cfg, &meta)?);
    }
    if let Some(cfg) = &stack.fleet {
        others.push(fleet_layer(own_name, inputs.fleet, cfg, &meta));
    }
    if stack.region {
        others.push(region_layer(inputs.regions, inputs.holdings, own_name, &meta));
    }
    let refs: Vec<&CostGrid> = others.iter().collect();
    compose_layers(&meta, static_grid.as_ref(), &refs, stack.inflation.as_ref())
}

/// A robot's layer stack with cached per-layer grids. Static and mask
/// layers are built once; the lane layer is rebuilt when the heading moves
/// by more than the configured epsilon; fleet and region layers are rebuilt
/// on every update.
#[derive(Debug, Clone)]
pub struct LayeredCostmap {
    stack: LayerStack,
    own_name: String,
    meta: GridMeta,
    static_grid: Option<CostGrid>,
    prohibition: Option<CostGrid>,
    lanes: Option<LaneGrid>,
    lane_grid: Option<(f64, CostGrid)>,
    fleet: Option<CostGrid>,
    region: Option<CostGrid>,
    master: CostGrid,
}

impl LayeredCostmap {
    pub fn new(stack: LayerStack, own_name: &str, occupancy: &OccupancyGrid) -> Self {
        let meta = occupancy.meta;
        Self {
            static_grid: stack.static_map.then(|| static_layer(occupancy)),
            stack,
            own_name: own_name.to_owned(),
            meta,
            prohibition: None,
            lanes: None,
            lane_grid: None,
            fleet: None,
            region: None,
            master: CostGrid::new(meta),
        }
    }

    pub fn stack(&self) -> &LayerStack {
        &self.stack
    }

    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    pub fn set_prohibition_mask(&mut self, mask: &MaskGrid) -> Result<(), CostmapError> {
        if let Some(level) = self.stack.prohibition {
            self.prohibition = Some(prohibition_layer(mask, level, &self.meta)?);
        }
        Ok(())
    }

    pub fn set_lane_mask(&mut self, lanes: &LaneGrid) -> Result<(), CostmapError> {
        if !lanes.meta.same_geometry(&self.meta) {
            return Err(CostmapError::Consistency("lane mask geometry differs from the static map".into()));
        }
        self.lanes = Some(lanes.clone());
        self.lane_grid = None;
        Ok(())
    }

    /// Whether every enabled mask layer has received its input.
    pub fn ready(&self) -> bool {
        (self.stack.prohibition.is_none() || self.prohibition.is_some())
            && (self.stack.lane.is_none() || self.lanes.is_some())
    }

    /// Refreshes the dynamic layers and recomposes the master grid.
    pub fn update(
        &mut self,
        yaw: f64,
        fleet: &[(String, Pose2)],
        regions: &[Region],
        holdings: &RegionHoldings,
    ) -> Result<&CostGrid, CostmapError> {
        if self.stack.prohibition.is_some() && self.prohibition.is_none() {
            return Err(CostmapError::MissingInput("prohibition"));
        }
        if let Some(cfg) = self.stack.lane {
            let lanes = self.lanes.as_ref().ok_or(CostmapError::MissingInput("lane"))?;
            let stale = self
                .lane_grid
                .as_ref()
                .is_none_or(|(y, _)| wrap_angle(yaw - y).abs() > cfg.yaw_epsilon);
            if stale {
                self.lane_grid = Some((yaw, lane_layer(lanes, yaw, &cfg, &self.meta)?));
            }
        }
        self.fleet = self
            .stack
            .fleet
            .map(|cfg| fleet_layer(&self.own_name, fleet, &cfg, &self.meta));
        self.region = self
            .stack
            .region
            .then(|| region_layer(regions, holdings, &self.own_name, &self.meta));
        self.master = self.compose(true)?;
        Ok(&self.master)
    }

    fn compose(&self, with_dynamic: bool) -> Result<CostGrid, CostmapError> {
        let mut others: Vec<&CostGrid> = Vec::new();
        others.extend(self.prohibition.as_ref());
        others.extend(self.lane_grid.as_ref().map(|(_, g)| g));
        if with_dynamic {
            others.extend(self.fleet.as_ref());
            others.extend(self.region.as_ref());
        }
        compose_layers(&self.meta, self.static_grid.as_ref(), &others, self.stack.inflation.as_ref())
    }

    /// Master grid from the last [`update`](Self::update).
    pub fn master(&self) -> &CostGrid {
        &self.master
    }

    /// Master grid without the fleet and region layers: where the robot
    /// could go if other robots and reservations did not stand in its way.
    pub fn relaxed_master(&self) -> Result<CostGrid, CostmapError> {
        self.compose(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmap::{INSCRIBED, NEUTRAL};
    use crate::map_io::Occupancy;

    fn meta() -> GridMeta {
        GridMeta::new(0.1, 0.0, 0.0, 10, 10)
    }

    #[test]
    fn max_of_layers() {
        let m = meta();
        let mut a = CostGrid::new(m);
        let mut b = CostGrid::new(m);
        b.cells[0] = NEUTRAL;
        a.cells[1] = LETHAL;
        b.cells[1] = NEUTRAL;
        let out = compose_layers(&m, None, &[&a, &b], None).unwrap();
        assert_eq!(out.cells[0], NEUTRAL);
        assert_eq!(out.cells[1], LETHAL);

        let cfg = InflationConfig::for_radius(0.2);
        let inflated = compose_layers(&m, None, &[&a, &b], Some(&cfg)).unwrap();
        assert_eq!(inflated, inflate(&out, &cfg));
        assert!(inflated.cells[2] >= INSCRIBED);
    }

    #[test]
    fn unknown_yields_to_other_layers() {
        let m = meta();
        let mut s = CostGrid::new(m);
        s.cells[0] = UNKNOWN;
        s.cells[1] = UNKNOWN;
        let mut lane = CostGrid::new(m);
        lane.cells[1] = NEUTRAL;
        let out = compose_layers(&m, Some(&s), &[&lane], None).unwrap();
        assert_eq!(out.cells[0], UNKNOWN);
        assert_eq!(out.cells[1], NEUTRAL);
    }

    #[test]
    fn degenerate_stack_is_inflated_static() {
        let mut occ = OccupancyGrid::filled(meta(), Occupancy::Free);
        occ.set(4, 4, Occupancy::Occupied);
        let stack = LayerStack::basic(0.2);
        let holdings = RegionHoldings::new();
        let inputs = LayerInputs {
            occupancy: &occ,
            prohibition: None,
            lanes: None,
            fleet: &[],
            regions: &[],
            holdings: &holdings,
        };
        let master = compose_master(&stack, "a", &Pose2::default(), &inputs).unwrap();
        assert_eq!(master, inflate(&static_layer(&occ), &stack.inflation.unwrap()));
    }

    #[test]
    fn missing_mask_input() {
        let occ = OccupancyGrid::filled(meta(), Occupancy::Free);
        let mut stack = LayerStack::basic(0.2);
        stack.prohibition = Some(LETHAL);
        let holdings = RegionHoldings::new();
        let inputs = LayerInputs {
            occupancy: &occ,
            prohibition: None,
            lanes: None,
            fleet: &[],
            regions: &[],
            holdings: &holdings,
        };
        assert_eq!(
            compose_master(&stack, "a", &Pose2::default(), &inputs),
            Err(CostmapError::MissingInput("prohibition"))
        );
        let mut cached = LayeredCostmap::new(stack, "a", &occ);
        assert!(!cached.ready());
        assert!(cached.update(0.0, &[], &[], &holdings).is_err());
    }

    #[test]
    fn geometry_mismatch() {
        let m = meta();
        let other = CostGrid::new(GridMeta::new(0.1, 0.0, 0.0, 9, 10));
        assert!(matches!(
            compose_layers(&m, None, &[&other], None),
            Err(CostmapError::Consistency(_))
        ));
    }

    #[test]
    fn lane_cache_refreshes_past_epsilon() {
        let m = meta();
        let occ = OccupancyGrid::filled(m, Occupancy::Free);
        let mut stack = LayerStack::basic(0.1);
        stack.inflation = None;
        stack.lane = Some(LaneConfig::default());
        let mut lanes = LaneGrid::empty(m);
        lanes.cells[0] = Some(0);
        let mut cm = LayeredCostmap::new(stack, "a", &occ);
        cm.set_lane_mask(&lanes).unwrap();
        let h = RegionHoldings::new();
        assert_eq!(cm.update(0.0, &[], &[], &h).unwrap().cells[0], 0);
        assert_eq!(cm.update(std::f64::consts::PI, &[], &[], &h).unwrap().cells[0], LETHAL);
        // within epsilon of the cached heading: cached grid reused
        assert_eq!(cm.update(std::f64::consts::PI - 0.005, &[], &[], &h).unwrap().cells[0], LETHAL);
    }
}
