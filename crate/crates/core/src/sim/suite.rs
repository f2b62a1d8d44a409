//! Reference scenarios: desk-scale versions of the prohibition, lane,
//! fleet, narrow-path and exclusive-area experiments, plus a trivial
//! single-robot run.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::grid::GridMeta;
use crate::map_io::{
    write_lane_mask, write_meta, write_occupancy_image, write_regions, LaneGrid, MapIoError, MapMeta,
    Occupancy, OccupancyGrid, Region,
};

pub const RESOLUTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteScenario {
    Trivial,
    Prohibition,
    Lane,
    Fleet,
    NarrowPath,
    ExclusiveArea,
}

impl SuiteScenario {
    pub const ALL: [SuiteScenario; 6] = [
        SuiteScenario::Trivial,
        SuiteScenario::Prohibition,
        SuiteScenario::Lane,
        SuiteScenario::Fleet,
        SuiteScenario::NarrowPath,
        SuiteScenario::ExclusiveArea,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuiteScenario::Trivial => "trivial",
            SuiteScenario::Prohibition => "prohibition",
            SuiteScenario::Lane => "lane",
            SuiteScenario::Fleet => "fleet",
            SuiteScenario::NarrowPath => "narrow_path",
            SuiteScenario::ExclusiveArea => "exclusive_area",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Occupancy and mask grids drawn with axis-aligned rectangles in meters.
/// A cell is covered when its center lies in the rectangle.
struct Canvas {
    occ: OccupancyGrid,
}

impl Canvas {
    fn new(width_m: f64, height_m: f64) -> Self {
        let meta = GridMeta::new(
            RESOLUTION,
            0.0,
            0.0,
            (width_m / RESOLUTION).round() as usize,
            (height_m / RESOLUTION).round() as usize,
        );
        let mut c = Self { occ: OccupancyGrid::filled(meta, Occupancy::Free) };
        let m = meta;
        for col in 0..m.width {
            c.occ.set(col, 0, Occupancy::Occupied);
            c.occ.set(col, m.height - 1, Occupancy::Occupied);
        }
        for row in 0..m.height {
            c.occ.set(0, row, Occupancy::Occupied);
            c.occ.set(m.width - 1, row, Occupancy::Occupied);
        }
        c
    }

    fn meta(&self) -> GridMeta {
        self.occ.meta
    }

    fn wall(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        for (col, row) in cells_in(&self.meta(), x0, y0, x1, y1) {
            self.occ.set(col, row, Occupancy::Occupied);
        }
    }
}

fn cells_in(m: &GridMeta, x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for row in 0..m.height {
        for col in 0..m.width {
            let (x, y) = m.cell_center(col, row);
            if x >= x0 && x <= x1 && y >= y0 && y <= y1 {
                out.push((col, row));
            }
        }
    }
    out
}

fn write_map(dir: &Path, stem: &str, occ: &OccupancyGrid) -> Result<(), MapIoError> {
    write_occupancy_image(occ, &dir.join(format!("{stem}.pgm")))?;
    let mut meta = MapMeta::new(RESOLUTION, 0.0, 0.0);
    meta.image = Some(format!("{stem}.pgm"));
    write_meta(&meta, &dir.join(format!("{stem}.yaml")))
}

fn write_text(path: &Path, text: &str) -> Result<(), MapIoError> {
    std::fs::write(path, text).map_err(|e| MapIoError::io(path, e))
}

fn pose(x: f64, y: f64, yaw: f64) -> String {
    format!("[{x}, {y}, {yaw}]")
}

/// Writes the scenario and its maps into `dir` and returns the scenario file path.
pub fn write_scenario(kind: SuiteScenario, dir: &Path) -> Result<PathBuf, MapIoError> {
    std::fs::create_dir_all(dir).map_err(|e| MapIoError::io(dir, e))?;
    let text = match kind {
        SuiteScenario::Trivial => {
            let canvas = Canvas::new(8.0, 6.0);
            write_map(dir, "map", &canvas.occ)?;
            format!(
                "name: trivial
maps:
  static: {{image: map.pgm, meta: map.yaml}}
sim: {{max_steps: 400}}
robots:
  - name: amr
    start: {}
    goal: {}
",
                pose(2.0, 3.0, 0.0),
                pose(4.0, 3.0, 0.0)
            )
        }
        SuiteScenario::Prohibition => {
            let mut canvas = Canvas::new(20.0, 20.0);
            // four desk legs, one cell each
            for (x, y) in [(9.05, 9.05), (10.95, 9.05), (9.05, 10.95), (10.95, 10.95)] {
                canvas.wall(x - 0.01, y - 0.01, x + 0.01, y + 0.01);
            }
            write_map(dir, "map", &canvas.occ)?;
            let mut mask = OccupancyGrid::filled(canvas.meta(), Occupancy::Free);
            for (col, row) in cells_in(&canvas.meta(), 9.0, 9.0, 11.0, 11.0) {
                mask.set(col, row, Occupancy::Occupied);
            }
            write_map(dir, "prohibition", &mask)?;
            format!(
                "name: prohibition
maps:
  static: {{image: map.pgm, meta: map.yaml}}
  prohibition: {{image: prohibition.pgm, meta: prohibition.yaml}}
sim: {{max_steps: 2500}}
robots:
  - name: amr
    start: {}
    goal: {}
",
                pose(5.0, 10.0, 0.0),
                pose(15.0, 10.0, 0.0)
            )
        }
        SuiteScenario::Lane => {
            let mut canvas = Canvas::new(16.0, 10.0);
            // three boxes side by side
            canvas.wall(6.0, 4.0, 7.3, 6.0);
            canvas.wall(7.3, 4.0, 8.7, 6.0);
            canvas.wall(8.7, 4.0, 10.0, 6.0);
            write_map(dir, "map", &canvas.occ)?;
            let mut lanes = LaneGrid::empty(canvas.meta());
            for (col, row) in cells_in(&canvas.meta(), 5.0, 0.0, 11.0, 3.99) {
                lanes.set(col, row, Some(0));
            }
            for (col, row) in cells_in(&canvas.meta(), 5.0, 6.01, 11.0, 10.0) {
                lanes.set(col, row, Some(18000));
            }
            write_lane_mask(&lanes, &dir.join("lanes.pgm"))?;
            write_meta(&MapMeta::new(RESOLUTION, 0.0, 0.0), &dir.join("lanes.yaml"))?;
            format!(
                "name: lane
maps:
  static: {{image: map.pgm, meta: map.yaml}}
  lane: {{image: lanes.pgm, meta: lanes.yaml}}
sim: {{max_steps: 3000}}
robots:
  - name: amr_a
    start: {}
    goal: {}
  - name: amr_b
    start: {}
    goal: {}
",
                pose(1.5, 4.0, 0.0),
                pose(14.5, 6.0, 0.0),
                pose(14.5, 4.0, PI),
                pose(1.5, 6.0, PI)
            )
        }
        SuiteScenario::Fleet => {
            let canvas = Canvas::new(14.0, 3.6);
            write_map(dir, "map", &canvas.occ)?;
            format!(
                "name: fleet
maps:
  static: {{image: map.pgm, meta: map.yaml}}
sim: {{max_steps: 3000}}
robots:
  - name: amr_a
    start: {}
    goal: {}
  - name: amr_b
    start: {}
    goal: {}
",
                pose(1.5, 1.5, 0.0),
                pose(12.5, 1.5, 0.0),
                pose(12.5, 2.1, PI),
                pose(1.5, 2.1, PI)
            )
        }
        SuiteScenario::NarrowPath => {
            let mut canvas = Canvas::new(12.0, 6.0);
            canvas.wall(4.5, 0.0, 7.5, 2.4);
            canvas.wall(4.5, 3.6, 7.5, 6.0);
            write_map(dir, "map", &canvas.occ)?;
            let region = Region::new("corridor", vec![(3.5, 2.0), (8.5, 2.0), (8.5, 4.0), (3.5, 4.0)])?;
            write_regions(&[region], &dir.join("regions.yaml"))?;
            format!(
                "name: narrow_path
maps:
  static: {{image: map.pgm, meta: map.yaml}}
regions: regions.yaml
region: {{margin: 1.0, retry_period: 1.0}}
# A wider skirt keeps the corridor mouth from looking like a cost step.
costmap: {{inflation_radius_factor: 6.0}}
sim: {{max_steps: 3000}}
robots:
  - name: amr_a
    priority: 2
    start: {}
    goal: {}
  - name: amr_b
    priority: 1
    start: {}
    goal: {}
",
                pose(9.3, 1.8, PI - 0.5),
                pose(1.5, 4.5, PI),
                pose(2.7, 1.8, 0.5),
                pose(10.5, 4.5, 0.0)
            )
        }
        SuiteScenario::ExclusiveArea => {
            let canvas = Canvas::new(12.0, 9.0);
            write_map(dir, "map", &canvas.occ)?;
            let region = Region::new("work_area", vec![(5.0, 5.5), (7.0, 5.5), (7.0, 7.5), (5.0, 7.5)])?;
            write_regions(&[region], &dir.join("regions.yaml"))?;
            format!(
                "name: exclusive_area
maps:
  static: {{image: map.pgm, meta: map.yaml}}
regions: regions.yaml
region: {{margin: 1.0, retry_period: 1.0}}
sim: {{max_steps: 3000}}
robots:
  - name: amr_a
    priority: 2
    start: {}
    waypoints:
      - {{pose: {}, dwell: 3.0}}
    goal: {}
  - name: amr_b
    priority: 1
    start: {}
    waypoints:
      - {{pose: {}, dwell: 3.0}}
    goal: {}
",
                pose(10.5, 2.0, PI),
                pose(6.0, 6.5, PI / 2.0),
                pose(10.5, 7.0, 0.0),
                pose(1.5, 2.0, 0.0),
                pose(6.0, 6.5, PI / 2.0),
                pose(1.5, 7.0, PI)
            )
        }
    };
    let path = dir.join("scenario.yaml");
    write_text(&path, &text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_io::load_scenario;

    #[test]
    fn every_scenario_loads() {
        let root = tempfile::tempdir().unwrap();
        for kind in SuiteScenario::ALL {
            let path = write_scenario(kind, &root.path().join(kind.name())).unwrap();
            let s = load_scenario(&path).unwrap();
            assert_eq!(s.name, kind.name());
            assert_eq!(SuiteScenario::from_name(kind.name()), Some(kind));
        }
    }
}
