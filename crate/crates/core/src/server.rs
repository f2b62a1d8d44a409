//! The centralized traffic server: latched mask topics, fleet pose
//! aggregation and the region reservation table.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::bus::{BusError, Domain, Durability, Publisher, Subscription, TopicName};
use crate::map_io::{load_lane_mask, load_prohibition_mask, load_regions, LaneGrid, MapFiles, MapIoError, MaskGrid, Region};
use crate::messages::{
    FleetEntry, FleetSnapshot, Message, PoseStamped, LANE_MASK_TOPIC, MULTI_ROBOT_TOPIC, POSE_BASE,
    PROHIBITION_MASK_TOPIC, TICKET_RESPONSE_TOPIC, TICKET_TOPIC,
};
use crate::region_protocol::{server_step, RegionTable, ServerStepOutput, Ticket};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    MapIo(#[from] MapIoError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("server config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ServerConfig {
    pub domain_id: u32,
    pub prohibition_mask: Option<MapFiles>,
    pub lane_mask: Option<MapFiles>,
    pub regions: Option<PathBuf>,
    /// Steps between fleet snapshots.
    pub aggregation_period: u64,
    /// Entries older than this many steps are left out of snapshots.
    pub stale_steps: u64,
    /// Ticket ordering key per robot; lower goes first, unknown robots last.
    pub priorities: BTreeMap<String, i64>,
}

/// Masks as published at startup.
#[derive(Debug, Clone, Default)]
pub struct ServedMasks {
    pub prohibition: Option<Arc<MaskGrid>>,
    pub lane: Option<Arc<LaneGrid>>,
}

/// Loads both configured masks, then publishes each once on its latched
/// topic. Nothing is published unless every configured mask loads.
pub fn serve_masks(
    domain: &Domain<Message>,
    publisher: &Publisher,
    config: &ServerConfig,
) -> Result<ServedMasks, ServerError> {
    let prohibition = config
        .prohibition_mask
        .as_ref()
        .map(|m| load_prohibition_mask(&m.image, &m.meta).map(Arc::new))
        .transpose()?;
    let lane = config
        .lane_mask
        .as_ref()
        .map(|m| load_lane_mask(&m.image, &m.meta).map(Arc::new))
        .transpose()?;
    if let Some(mask) = &prohibition {
        domain.declare_topic(PROHIBITION_MASK_TOPIC, Durability::LastValue)?;
        domain.publish(publisher, PROHIBITION_MASK_TOPIC, Message::ProhibitionMask(Arc::clone(mask)))?;
    }
    if let Some(lanes) = &lane {
        domain.declare_topic(LANE_MASK_TOPIC, Durability::LastValue)?;
        domain.publish(publisher, LANE_MASK_TOPIC, Message::LaneMask(Arc::clone(lanes)))?;
    }
    Ok(ServedMasks { prohibition, lane })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ServerDiagnostics {
    pub dropped_tickets: u64,
    pub unknown_region_tickets: u64,
    /// Samples on a server input topic carrying the wrong payload.
    pub foreign_payloads: u64,
    pub snapshots: u64,
}

pub struct TrafficServer {
    config: ServerConfig,
    publisher: Publisher,
    poses: Subscription<Message>,
    tickets: Subscription<Message>,
    latest: BTreeMap<String, PoseStamped>,
    table: RegionTable,
    regions: Vec<Region>,
    masks: ServedMasks,
    diagnostics: ServerDiagnostics,
}

impl TrafficServer {
    /// Loads regions and masks, subscribes to robot poses and tickets and
    /// publishes the masks.
    pub fn start(domain: &Domain<Message>, config: ServerConfig) -> Result<Self, ServerError> {
        if config.aggregation_period == 0 {
            return Err(ServerError::Config("aggregation period must be at least 1 step".into()));
        }
        let regions = config.regions.as_ref().map(|p| load_regions(p)).transpose()?.unwrap_or_default();
        let publisher = domain.create_publisher("traffic_server");
        let poses = domain.subscribe(&format!("/*/{POSE_BASE}"))?;
        let tickets = domain.subscribe(TICKET_TOPIC)?;
        let masks = serve_masks(domain, &publisher, &config)?;
        Ok(Self {
            table: RegionTable::new(regions.iter().map(|r| r.id.clone())),
            regions,
            config,
            publisher,
            poses,
            tickets,
            latest: BTreeMap::new(),
            masks,
            diagnostics: ServerDiagnostics::default(),
        })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn table(&self) -> &RegionTable {
        &self.table
    }

    pub fn masks(&self) -> &ServedMasks {
        &self.masks
    }

    pub fn diagnostics(&self) -> ServerDiagnostics {
        self.diagnostics
    }

    /// Folds pending pose samples into the newest-per-robot table and, on
    /// aggregation steps, publishes the fresh entries on `/multi_robot`.
    pub fn aggregate_poses(&mut self, domain: &Domain<Message>, step: u64) -> Result<Option<FleetSnapshot>, ServerError> {
        if !step.is_multiple_of(self.config.aggregation_period) {
            return Ok(None);
        }
        for sample in self.poses.take_all() {
            let Message::Pose(p) = sample.payload else {
                self.diagnostics.foreign_payloads += 1;
                continue;
            };
            let Ok(topic) = TopicName::parse(&sample.topic) else { continue };
            let robot = topic.namespace().to_owned();
            if self.latest.get(&robot).is_none_or(|old| p.stamp >= old.stamp) {
                self.latest.insert(robot, p);
            }
        }
        let stale = self.config.stale_steps;
        self.latest.retain(|_, p| p.stamp <= step && step - p.stamp <= stale);
        let snapshot = FleetSnapshot {
            entries: self
                .latest
                .iter()
                .map(|(robot, p)| FleetEntry {
                    robot: robot.clone(),
                    pose: p.pose,
                    stamp: p.stamp,
                })
                .collect(),
            step,
        };
        domain.publish(&self.publisher, MULTI_ROBOT_TOPIC, Message::Fleet(Arc::new(snapshot.clone())))?;
        self.diagnostics.snapshots += 1;
        Ok(Some(snapshot))
    }

    /// Serves pending tickets by robot priority, then arrival order, and
    /// publishes one response per well-formed request.
    pub fn run_region_server(&mut self, domain: &Domain<Message>) -> Result<ServerStepOutput, ServerError> {
        let mut inbox: Vec<Ticket> = Vec::new();
        for sample in self.tickets.take_all() {
            match sample.payload {
                Message::Ticket(t) => inbox.push(t),
                _ => self.diagnostics.foreign_payloads += 1,
            }
        }
        let priorities = &self.config.priorities;
        inbox.sort_by_key(|t| priorities.get(&t.robot_id).copied().unwrap_or(i64::MAX));
        let out = server_step(&mut self.table, &inbox);
        self.diagnostics.dropped_tickets += out.dropped;
        self.diagnostics.unknown_region_tickets += out.unknown_region;
        for r in &out.responses {
            domain.publish(&self.publisher, TICKET_RESPONSE_TOPIC, Message::Ticket(r.clone()))?;
        }
        Ok(out)
    }

    pub fn step(&mut self, domain: &Domain<Message>, step: u64) -> Result<(), ServerError> {
        self.aggregate_poses(domain, step)?;
        self.run_region_server(domain)?;
        Ok(())
    }
}
