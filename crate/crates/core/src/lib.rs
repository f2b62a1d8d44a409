//! Multi-robot traffic management on layered cost maps.
//!
//! Robots compose a per-robot master cost map from static, prohibition,
//! lane, fleet, region and inflation layers, plan on it with a grid
//! planner and a dynamic-window local planner, and reserve convex regions
//! through a ticket protocol served by a central traffic server. All
//! components talk over an in-process publish/subscribe bus.

pub mod bus;
pub mod costmap;
pub mod grid;
pub mod map_io;
pub mod messages;
pub mod planning;
pub mod region_protocol;
pub mod server;
pub mod sim;

pub use costmap::{Cost, CostGrid, LayerStack, LayeredCostmap};
pub use grid::{wrap_angle, GridMeta, Pose2};
pub use map_io::{load_scenario, MapIoError, Region, Scenario};
pub use planning::{dwa_step, plan_global, Path};
pub use region_protocol::{RegionTable, Ticket, TicketKind, TicketResult};
pub use sim::{run_scenario, RunOptions, RunReport};
