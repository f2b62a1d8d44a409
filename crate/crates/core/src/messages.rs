//! Payloads carried on the shared bus and the topic names they use.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bus::Payload;
use crate::grid::Pose2;
use crate::map_io::{LaneGrid, MaskGrid};
use crate::region_protocol::Ticket;

pub const PROHIBITION_MASK_TOPIC: &str = "/prohibition_mask";
pub const LANE_MASK_TOPIC: &str = "/lane_mask";
pub const MULTI_ROBOT_TOPIC: &str = "/multi_robot";
pub const TICKET_TOPIC: &str = "/ticket";
pub const TICKET_RESPONSE_TOPIC: &str = "/ticket_response";
/// Base name of each robot's `/<robot>/pose` topic.
pub const POSE_BASE: &str = "pose";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseStamped {
    pub pose: Pose2,
    /// Step at which the pose was measured.
    pub stamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetEntry {
    pub robot: String,
    pub pose: Pose2,
    pub stamp: u64,
}

/// Latest known pose of every robot, published by the server.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FleetSnapshot {
    pub entries: Vec<FleetEntry>,
    pub step: u64,
}

impl FleetSnapshot {
    /// Entries no older than `max_age` steps at `now`, as (name, pose) pairs.
    pub fn fresh_poses(&self, now: u64, max_age: u64) -> Vec<(String, Pose2)> {
        self.entries
            .iter()
            .filter(|e| now.saturating_sub(e.stamp) <= max_age)
            .map(|e| (e.robot.clone(), e.pose))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Pose(PoseStamped),
    ProhibitionMask(Arc<MaskGrid>),
    LaneMask(Arc<LaneGrid>),
    Fleet(Arc<FleetSnapshot>),
    Ticket(Ticket),
}

impl Payload for Message {
    fn kind(&self) -> &'static str {
        match self {
            Message::Pose(_) => "pose",
            Message::ProhibitionMask(_) => "prohibition_mask",
            Message::LaneMask(_) => "lane_mask",
            Message::Fleet(_) => "fleet_snapshot",
            Message::Ticket(_) => "ticket",
        }
    }
}
