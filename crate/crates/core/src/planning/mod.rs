//! Global grid planning and dynamic-window local planning.

mod dwa;
mod global;

pub use dwa::{
    dwa_step, dynamic_window, footprint_admissible, integrate, rollout, score_trajectory,
    Command, CommandKind, DwaConfig, MotionLimits, ScoreContext, ScoreWeights, TrajectoryScore,
    VelocityWindow,
};
pub use global::{plan_global, step_cost, Path, PlanError};
