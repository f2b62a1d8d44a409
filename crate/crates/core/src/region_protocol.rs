//! Exclusive region reservation.
//!
//! Robots exchange [`Ticket`]s with a server that owns a [`RegionTable`].
//! A robot asks for a region when it enters the region's [`InflationZone`]
//! and gives it back once it has left the zone. The table admits at most one
//! holder per region.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costmap::RegionHoldings;
use crate::grid::Pose2;
use crate::map_io::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TicketKind {
    ReserveRequest,
    ReleaseRequest,
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TicketResult {
    Success,
    Failure,
    None,
}

/// Reservation message. Requests carry `result = None`; responses echo the
/// request's robot, region and sequence number.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ticket {
    pub robot_id: String,
    pub region_id: String,
    pub kind: TicketKind,
    pub result: TicketResult,
    pub seq: u64,
}

impl Ticket {
    pub fn reserve(robot_id: &str, region_id: &str, seq: u64) -> Self {
        Self::request(robot_id, region_id, TicketKind::ReserveRequest, seq)
    }

    pub fn release(robot_id: &str, region_id: &str, seq: u64) -> Self {
        Self::request(robot_id, region_id, TicketKind::ReleaseRequest, seq)
    }

    fn request(robot_id: &str, region_id: &str, kind: TicketKind, seq: u64) -> Self {
        Self {
            robot_id: robot_id.to_owned(),
            region_id: region_id.to_owned(),
            kind,
            result: TicketResult::None,
            seq,
        }
    }

    pub fn respond(&self, result: TicketResult) -> Self {
        Self {
            kind: TicketKind::Response,
            result,
            ..self.clone()
        }
    }

    fn is_well_formed_request(&self) -> bool {
        !self.robot_id.is_empty()
            && !self.region_id.is_empty()
            && self.kind != TicketKind::Response
            && self.result == TicketResult::None
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("unknown region {0:?}")]
    UnknownRegion(String),
}

/// Server-side allocation table: region id to current holder.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegionTable {
    holders: BTreeMap<String, Option<String>>,
}

impl RegionTable {
    pub fn new<I, S>(region_ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            holders: region_ids.into_iter().map(|id| (id.into(), None)).collect(),
        }
    }

    pub fn holder(&self, region_id: &str) -> Option<&str> {
        self.holders.get(region_id).and_then(|h| h.as_deref())
    }

    pub fn regions(&self) -> impl Iterator<Item = (&str, Option<&str>)> {
        self.holders.iter().map(|(r, h)| (r.as_str(), h.as_deref()))
    }

    fn slot(&mut self, region_id: &str) -> Result<&mut Option<String>, ProtocolError> {
        self.holders
            .get_mut(region_id)
            .ok_or_else(|| ProtocolError::UnknownRegion(region_id.to_owned()))
    }
}

/// Grants the region when it is free or already held by the same robot.
pub fn reserve_region(table: &mut RegionTable, robot_id: &str, region_id: &str) -> Result<TicketResult, ProtocolError> {
    let slot = table.slot(region_id)?;
    Ok(match slot {
        None => {
            *slot = Some(robot_id.to_owned());
            TicketResult::Success
        }
        Some(h) if h == robot_id => TicketResult::Success,
        Some(_) => TicketResult::Failure,
    })
}

/// Frees the region only when `robot_id` is its holder.
pub fn release_region(table: &mut RegionTable, robot_id: &str, region_id: &str) -> Result<TicketResult, ProtocolError> {
    let slot = table.slot(region_id)?;
    Ok(match slot {
        Some(h) if h == robot_id => {
            *slot = None;
            TicketResult::Success
        }
        _ => TicketResult::Failure,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServerStepOutput {
    pub responses: Vec<Ticket>,
    /// Requests discarded as malformed.
    pub dropped: u64,
    /// Requests naming a region the table does not know (answered with failure).
    pub unknown_region: u64,
}

/// Applies requests in the order given and answers each well-formed one.
pub fn server_step(table: &mut RegionTable, inbox: &[Ticket]) -> ServerStepOutput {
    let mut out = ServerStepOutput::default();
    for t in inbox {
        if !t.is_well_formed_request() {
            out.dropped += 1;
            continue;
        }
        let applied = match t.kind {
            TicketKind::ReserveRequest => reserve_region(table, &t.robot_id, &t.region_id),
            _ => release_region(table, &t.robot_id, &t.region_id),
        };
        let result = applied.unwrap_or_else(|ProtocolError::UnknownRegion(_)| {
            out.unknown_region += 1;
            TicketResult::Failure
        });
        out.responses.push(t.respond(result));
    }
    out
}

/// The region a robot must hold before entering, grown by a margin. A robot
/// requests the region when its center enters the zone and releases it after
/// leaving the zone.
#[derive(Debug, Clone, PartialEq)]
pub struct InflationZone {
    pub region: Region,
    pub margin: f64,
    polygon: Region,
}

impl InflationZone {
    pub fn new(region: Region, margin: f64) -> Self {
        assert!(margin > 0.0, "zone margin must be positive");
        let polygon = region.offset(margin);
        Self {
            region,
            margin,
            polygon,
        }
    }

    pub fn polygon(&self) -> &Region {
        &self.polygon
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.polygon.contains(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientMode {
    #[default]
    Outside,
    Requesting,
    Holding,
    Releasing,
}

/// Client view of one region.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClientState {
    pub mode: ClientMode,
    /// Sequence number of the request awaiting an answer.
    pub outstanding: Option<u64>,
    /// Simulated time at which a refused request is sent again.
    pub retry_at: Option<f64>,
    /// Responses ignored because their sequence number matched nothing.
    pub mismatched: u64,
    pub grants: u64,
    pub releases: u64,
}

impl ClientState {
    /// Whether the robot treats the region as its own (holding it or
    /// still waiting for its release to be confirmed).
    pub fn owns(&self) -> bool {
        matches!(self.mode, ClientMode::Holding | ClientMode::Releasing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    /// Seconds between a refusal and the next request.
    pub retry_period: f64,
    /// Outward zone offset, meters.
    pub margin: f64,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self {
            retry_period: 1.0,
            margin: 0.5,
        }
    }
}

/// One client tick for one region. `inbox` holds responses addressed to
/// this robot and region; `next_seq` is the robot's request counter.
#[allow(clippy::too_many_arguments)]
pub fn client_step(
    state: &ClientState,
    robot_id: &str,
    pose: &Pose2,
    zone: &InflationZone,
    now: f64,
    inbox: &[Ticket],
    retry_period: f64,
    next_seq: &mut u64,
) -> (ClientState, Vec<Ticket>) {
    let mut s = *state;
    let mut out = Vec::new();
    let region_id = zone.region.id.as_str();

    for t in inbox {
        if t.kind != TicketKind::Response || t.robot_id != robot_id || t.region_id != region_id {
            continue;
        }
        if s.outstanding != Some(t.seq) {
            s.mismatched += 1;
            continue;
        }
        s.outstanding = None;
        match (s.mode, t.result) {
            (ClientMode::Requesting, TicketResult::Success) => {
                s.mode = ClientMode::Holding;
                s.retry_at = None;
                s.grants += 1;
            }
            (ClientMode::Releasing, TicketResult::Success) => {
                s.mode = ClientMode::Outside;
                s.retry_at = None;
                s.releases += 1;
            }
            (ClientMode::Requesting | ClientMode::Releasing, _) => {
                s.retry_at = Some(now + retry_period);
            }
            _ => {}
        }
    }

    let mut send = |kind: TicketKind, s: &mut ClientState| {
        *next_seq += 1;
        let seq = *next_seq;
        out.push(match kind {
            TicketKind::ReserveRequest => Ticket::reserve(robot_id, region_id, seq),
            _ => Ticket::release(robot_id, region_id, seq),
        });
        s.outstanding = Some(seq);
        s.retry_at = None;
    };

    let inside = zone.contains(pose.x, pose.y);
    match s.mode {
        ClientMode::Outside if inside => {
            s.mode = ClientMode::Requesting;
            send(TicketKind::ReserveRequest, &mut s);
        }
        ClientMode::Holding if !inside => {
            s.mode = ClientMode::Releasing;
            send(TicketKind::ReleaseRequest, &mut s);
        }
        ClientMode::Requesting | ClientMode::Releasing
            if s.outstanding.is_none() && s.retry_at.is_some_and(|t| now >= t - 1e-9) =>
        {
            let kind = if s.mode == ClientMode::Requesting {
                TicketKind::ReserveRequest
            } else {
                TicketKind::ReleaseRequest
            };
            send(kind, &mut s);
        }
        _ => {}
    }
    (s, out)
}

/// All of one robot's region clients.
#[derive(Debug, Clone)]
pub struct RegionClient {
    robot_id: String,
    retry_period: f64,
    next_seq: u64,
    slots: Vec<(InflationZone, ClientState)>,
}

impl RegionClient {
    pub fn new(robot_id: &str, regions: &[Region], cfg: &ClientConfig) -> Self {
        Self {
            robot_id: robot_id.to_owned(),
            retry_period: cfg.retry_period,
            next_seq: 0,
            slots: regions
                .iter()
                .map(|r| (InflationZone::new(r.clone(), cfg.margin), ClientState::default()))
                .collect(),
        }
    }

    /// Advances every region client and returns the requests to send.
    pub fn step(&mut self, pose: &Pose2, now: f64, inbox: &[Ticket]) -> Vec<Ticket> {
        let mut out = Vec::new();
        for (zone, state) in &mut self.slots {
            let (next, sent) = client_step(
                state,
                &self.robot_id,
                pose,
                zone,
                now,
                inbox,
                self.retry_period,
                &mut self.next_seq,
            );
            *state = next;
            out.extend(sent);
        }
        out
    }

    pub fn state(&self, region_id: &str) -> Option<&ClientState> {
        self.slots.iter().find(|(z, _)| z.region.id == region_id).map(|(_, s)| s)
    }

    pub fn states(&self) -> impl Iterator<Item = (&str, &ClientState)> {
        self.slots.iter().map(|(z, s)| (z.region.id.as_str(), s))
    }

    /// Regions this robot currently owns, in declaration order.
    pub fn held(&self) -> Vec<&str> {
        self.states().filter(|(_, s)| s.owns()).map(|(r, _)| r).collect()
    }

    pub fn holdings(&self) -> RegionHoldings {
        self.held()
            .into_iter()
            .map(|r| (r.to_owned(), self.robot_id.clone()))
            .collect()
    }

    pub fn mismatched(&self) -> u64 {
        self.slots.iter().map(|(_, s)| s.mismatched).sum()
    }
}
