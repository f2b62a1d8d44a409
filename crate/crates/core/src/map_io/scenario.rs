use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_text, MapIoError};
use crate::costmap::{FleetConfig, InflationConfig, LaneConfig, LayerStack, LETHAL};
use crate::grid::Pose2;
pub use crate::planning::MotionLimits;
use crate::planning::DwaConfig;
use crate::region_protocol::ClientConfig;

/// An image and its metadata file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFiles {
    pub image: PathBuf,
    pub meta: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapsSection {
    #[serde(rename = "static")]
    static_map: MapFiles,
    #[serde(default)]
    prohibition: Option<MapFiles>,
    #[serde(default)]
    lane: Option<MapFiles>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerSection {
    #[serde(rename = "static")]
    static_map: Option<bool>,
    inflation: Option<bool>,
    fleet: Option<bool>,
    prohibition: Option<bool>,
    lane: Option<bool>,
    region: Option<bool>,
}

/// Resolved per-robot layer switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerToggles {
    pub static_map: bool,
    pub inflation: bool,
    pub fleet: bool,
    pub prohibition: bool,
    pub lane: bool,
    pub region: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub pose: [f64; 3],
    /// Seconds spent at the waypoint once reached.
    #[serde(default)]
    pub dwell: f64,
}

fn default_radius() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotEntry {
    name: String,
    start: [f64; 3],
    goal: [f64; 3],
    #[serde(default)]
    waypoints: Vec<Waypoint>,
    #[serde(default = "default_radius")]
    radius: f64,
    #[serde(default)]
    priority: i64,
    #[serde(default)]
    limits: MotionLimits,
    #[serde(default)]
    layers: LayerSection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    pub name: String,
    pub start: Pose2,
    pub goal: Pose2,
    pub waypoints: Vec<Waypoint>,
    pub radius: f64,
    /// Lower numbers are served first.
    pub priority: i64,
    pub limits: MotionLimits,
    pub layers: LayerToggles,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostmapSettings {
    pub inflation_scale: f64,
    /// Inflation radius as a multiple of the robot radius.
    pub inflation_radius_factor: f64,
    pub prohibition_level: u8,
    pub lane: LaneConfig,
    /// Fleet entries older than this many steps are ignored by robots.
    pub fleet_stale_steps: u64,
}

impl Default for CostmapSettings {
    fn default() -> Self {
        Self {
            inflation_scale: 3.0,
            inflation_radius_factor: 3.0,
            prohibition_level: LETHAL,
            lane: LaneConfig::default(),
            fleet_stale_steps: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSettings {
    pub dwa: DwaConfig,
    /// Global replanning period in control steps.
    pub replan_every: u64,
    /// Distance along the global path of the local planner's target, meters.
    pub lookahead: f64,
    /// Heading error to the local target, radians, above which the robot
    /// turns in place before handing over to the local planner.
    pub align_threshold: f64,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            dwa: DwaConfig::default(),
            replan_every: 10,
            lookahead: 1.0,
            align_threshold: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSettings {
    pub domain_id: u32,
    pub aggregation_period: u64,
    pub stale_steps: u64,
}

impl Default for ServerSettings {
    fn default() -> Self {
        Self {
            domain_id: 0,
            aggregation_period: 1,
            stale_steps: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeadlockSettings {
    pub window: usize,
    pub epsilon: f64,
}

impl Default for DeadlockSettings {
    fn default() -> Self {
        Self {
            window: 200,
            epsilon: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub max_steps: u64,
    pub seed: u64,
    /// Message delivery delay in steps.
    pub latency: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            max_steps: 3000,
            seed: 0,
            latency: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: Option<String>,
    maps: MapsSection,
    #[serde(default)]
    regions: Option<PathBuf>,
    robots: Vec<RobotEntry>,
    #[serde(default)]
    sim: SimConfig,
    #[serde(default)]
    costmap: CostmapSettings,
    #[serde(default)]
    planner: PlannerSettings,
    #[serde(default)]
    region: ClientConfig,
    #[serde(default)]
    server: ServerSettings,
    #[serde(default)]
    deadlock: DeadlockSettings,
}

/// A fully resolved scenario: file paths are absolute and every default
/// has been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub static_map: MapFiles,
    pub prohibition: Option<MapFiles>,
    pub lane: Option<MapFiles>,
    pub regions: Option<PathBuf>,
    pub robots: Vec<RobotSpec>,
    pub sim: SimConfig,
    pub costmap: CostmapSettings,
    pub planner: PlannerSettings,
    pub region: ClientConfig,
    pub server: ServerSettings,
    pub deadlock: DeadlockSettings,
}

impl Scenario {
    /// Largest robot radius; the fleet layer draws every robot this size.
    pub fn fleet_radius(&self) -> f64 {
        self.robots.iter().map(|r| r.radius).fold(0.0, f64::max)
    }

    pub fn layer_stack(&self, robot: &RobotSpec) -> LayerStack {
        let t = robot.layers;
        let c = &self.costmap;
        let fleet_r = self.fleet_radius();
        LayerStack {
            static_map: t.static_map,
            prohibition: t.prohibition.then_some(c.prohibition_level),
            lane: t.lane.then_some(c.lane),
            fleet: t.fleet.then_some(FleetConfig {
                robot_radius: fleet_r,
                inflation_radius: c.inflation_radius_factor * fleet_r,
                scale: c.inflation_scale,
            }),
            region: t.region,
            inflation: t.inflation.then_some(InflationConfig {
                inscribed_radius: robot.radius,
                inflation_radius: c.inflation_radius_factor * robot.radius,
                scale: c.inflation_scale,
            }),
        }
    }
}

fn config(msg: impl Into<String>) -> MapIoError {
    MapIoError::Config(msg.into())
}

fn pose(v: [f64; 3]) -> Pose2 {
    Pose2::new(v[0], v[1], v[2])
}

fn resolve(base: &Path, p: &Path) -> Result<PathBuf, MapIoError> {
    let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    if !full.is_file() {
        return Err(config(format!("referenced file {} does not exist", full.display())));
    }
    Ok(full)
}

fn resolve_map(base: &Path, m: &MapFiles) -> Result<MapFiles, MapIoError> {
    Ok(MapFiles {
        image: resolve(base, &m.image)?,
        meta: resolve(base, &m.meta)?,
    })
}

fn toggle(name: &str, robot: &str, asked: Option<bool>, available: bool) -> Result<bool, MapIoError> {
    match asked {
        Some(true) if !available => Err(config(format!(
            "robot {robot:?} enables the {name} layer but the scenario has no {name} file"
        ))),
        Some(v) => Ok(v),
        None => Ok(available),
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.contains('/') && name != "*" && !name.chars().any(char::is_whitespace)
}

/// Parses scenario text; relative paths resolve against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario, MapIoError> {
    let file: ScenarioFile = serde_yaml::from_str(text).map_err(|e| config(format!("scenario: {e}")))?;
    let sim = file.sim;
    if !(sim.dt > 0.0 && sim.dt.is_finite()) {
        return Err(config("sim.dt must be positive"));
    }
    if file.server.aggregation_period == 0 {
        return Err(config("server.aggregation_period must be at least 1"));
    }
    if file.deadlock.window < 2 {
        return Err(config("deadlock.window must be at least 2"));
    }
    if !(file.region.margin > 0.0 && file.region.retry_period > 0.0) {
        return Err(config("region margin and retry period must be positive"));
    }
    file.costmap.lane.validate().map_err(config)?;
    if file.robots.is_empty() {
        return Err(config("scenario has no robots"));
    }

    let static_map = resolve_map(base_dir, &file.maps.static_map)?;
    let prohibition = file.maps.prohibition.as_ref().map(|m| resolve_map(base_dir, m)).transpose()?;
    let lane = file.maps.lane.as_ref().map(|m| resolve_map(base_dir, m)).transpose()?;
    let regions = file.regions.as_ref().map(|p| resolve(base_dir, p)).transpose()?;

    let mut names = HashSet::new();
    let mut robots = Vec::with_capacity(file.robots.len());
    for r in file.robots {
        if !valid_name(&r.name) {
            return Err(config(format!("invalid robot name {:?}", r.name)));
        }
        if !names.insert(r.name.clone()) {
            return Err(config(format!("duplicate robot name {:?}", r.name)));
        }
        if r.radius.is_nan() || r.radius <= 0.0 {
            return Err(config(format!("robot {:?}: radius must be positive", r.name)));
        }
        let l = r.limits;
        if [l.v_max, l.w_max, l.a_v, l.a_w].iter().any(|v| v.is_nan() || *v <= 0.0) {
            return Err(config(format!("robot {:?}: motion limits must be positive", r.name)));
        }
        if r.waypoints.iter().any(|w| w.dwell.is_nan() || w.dwell < 0.0) {
            return Err(config(format!("robot {:?}: negative dwell", r.name)));
        }
        let layers = LayerToggles {
            static_map: r.layers.static_map.unwrap_or(true),
            inflation: r.layers.inflation.unwrap_or(true),
            fleet: r.layers.fleet.unwrap_or(true),
            prohibition: toggle("prohibition", &r.name, r.layers.prohibition, prohibition.is_some())?,
            lane: toggle("lane", &r.name, r.layers.lane, lane.is_some())?,
            region: toggle("region", &r.name, r.layers.region, regions.is_some())?,
        };
        robots.push(RobotSpec {
            name: r.name,
            start: pose(r.start),
            goal: pose(r.goal),
            waypoints: r.waypoints,
            radius: r.radius,
            priority: r.priority,
            limits: r.limits,
            layers,
        });
    }
    robots.sort_by(|a, b| a.name.cmp(&b.name));

    Ok(Scenario {
        name: file.name.unwrap_or_else(|| "scenario".to_owned()),
        static_map,
        prohibition,
        lane,
        regions,
        robots,
        sim,
        costmap: file.costmap,
        planner: file.planner,
        region: file.region,
        server: file.server,
        deadlock: file.deadlock,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, MapIoError> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir_with(files: &[&str]) -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        for f in files {
            std::fs::write(d.path().join(f), b"x").unwrap();
        }
        d
    }

    const MINIMAL: &str = "
maps:
  static: {image: map.pgm, meta: map.yaml}
robots:
  - name: a
    start: [1, 1, 0]
    goal: [3, 1, 0]
";

    #[test]
    fn minimal_defaults() {
        let d = dir_with(&["map.pgm", "map.yaml"]);
        let s = parse_scenario(MINIMAL, d.path()).unwrap();
        assert_eq!(s.sim.dt, 0.1);
        let t = s.robots[0].layers;
        assert!(t.static_map && t.inflation && t.fleet);
        assert!(!t.lane && !t.prohibition && !t.region);
        assert_eq!(s.robots[0].radius, 0.25);
        assert!(s.static_map.image.is_absolute() || s.static_map.image.starts_with(d.path()));
    }

    #[test]
    fn lane_without_file() {
        let d = dir_with(&["map.pgm", "map.yaml"]);
        let text = format!("{MINIMAL}    layers: {{lane: true}}\n");
        let e = parse_scenario(&text, d.path()).unwrap_err();
        assert!(matches!(e, MapIoError::Config(ref m) if m.contains("lane")));
    }

    #[test]
    fn unknown_key_and_missing_fields() {
        let d = dir_with(&["map.pgm", "map.yaml"]);
        let typo = MINIMAL.replace("goal:", "gaol:");
        assert!(matches!(parse_scenario(&typo, d.path()), Err(MapIoError::Config(_))));
        let no_name = MINIMAL.replace("name: a\n    ", "");
        assert!(matches!(parse_scenario(&no_name, d.path()), Err(MapIoError::Config(_))));
        let no_start = MINIMAL.replace("    start: [1, 1, 0]\n", "");
        assert!(matches!(parse_scenario(&no_start, d.path()), Err(MapIoError::Config(_))));
        let extra = format!("{MINIMAL}sim: {{dt: 0.1, speed: 2}}\n");
        assert!(matches!(parse_scenario(&extra, d.path()), Err(MapIoError::Config(_))));
    }

    #[test]
    fn missing_file_and_duplicates() {
        let d = dir_with(&["map.pgm"]);
        assert!(matches!(parse_scenario(MINIMAL, d.path()), Err(MapIoError::Config(_))));
        let d = dir_with(&["map.pgm", "map.yaml"]);
        let two = format!("{MINIMAL}  - name: a\n    start: [1, 2, 0]\n    goal: [3, 2, 0]\n");
        assert!(matches!(parse_scenario(&two, d.path()), Err(MapIoError::Config(_))));
    }

    #[test]
    fn robots_sorted_and_fleet_radius() {
        let d = dir_with(&["map.pgm", "map.yaml"]);
        let text = format!("{MINIMAL}  - name: Z\n    start: [1, 2, 0]\n    goal: [3, 2, 0]\n    radius: 0.3\n")
            .replace("name: a", "name: b");
        let s = parse_scenario(&text, d.path()).unwrap();
        let names: Vec<_> = s.robots.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["Z", "b"]);
        assert_eq!(s.fleet_radius(), 0.3);
        let stack = s.layer_stack(&s.robots[1]);
        assert_eq!(stack.fleet.unwrap().robot_radius, 0.3);
        assert_eq!(stack.inflation.unwrap().inscribed_radius, 0.25);
    }
}
