//! In-process publish/subscribe data space.
//!
//! A [`Domain`] is a global data space of named topics. Participants publish
//! samples to rendered topic names (`/namespace/base` or `/base`) and
//! subscribe either to an exact name or to the single-level wildcard
//! `/*/base`. Topics declared with [`Durability::LastValue`] retain their most
//! recent sample and hand it to late subscribers.
//!
//! Delivery is stepped: a domain created with a latency of `k` steps makes a
//! sample published while the domain clock reads `t` takeable once the clock
//! reaches `t + k`. The simulation driver uses `k = 1`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("invalid topic name {0:?}")]
    Name(String),
    #[error("topic {topic} carries {established} samples, got {offered}")]
    Type {
        topic: String,
        established: &'static str,
        offered: &'static str,
    },
    #[error("topic {topic} already declared with {existing:?} durability")]
    Durability { topic: String, existing: Durability },
}

/// Values carried on the bus. `kind` identifies the payload type so a topic
/// can reject samples of a different type than the one it was created with.
pub trait Payload: Clone + Send + 'static {
    fn kind(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    #[default]
    Volatile,
    LastValue,
}

/// A validated, rendered topic name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TopicName {
    namespace: String,
    base: String,
}

fn valid_segment(s: &str) -> bool {
    !s.is_empty() && !s.contains('/') && s != "*"
}

impl TopicName {
    pub fn new(namespace: &str, base: &str) -> Result<Self, BusError> {
        if !valid_segment(base) || (!namespace.is_empty() && !valid_segment(namespace)) {
            return Err(BusError::Name(format!("{namespace}/{base}")));
        }
        Ok(Self {
            namespace: namespace.to_owned(),
            base: base.to_owned(),
        })
    }

    /// Parses a rendered name: `/base` or `/namespace/base`.
    pub fn parse(rendered: &str) -> Result<Self, BusError> {
        let err = || BusError::Name(rendered.to_owned());
        let rest = rendered.strip_prefix('/').ok_or_else(err)?;
        let parts: Vec<&str> = rest.split('/').collect();
        match parts.as_slice() {
            [base] => Self::new("", base).map_err(|_| err()),
            [ns, base] if !ns.is_empty() => Self::new(ns, base).map_err(|_| err()),
            _ => Err(err()),
        }
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn base(&self) -> &str {
        &self.base
    }
}

impl fmt::Display for TopicName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.namespace.is_empty() {
            write!(f, "/{}", self.base)
        } else {
            write!(f, "/{}/{}", self.namespace, self.base)
        }
    }
}

/// Renders `/namespace/base`, or `/base` when the namespace is empty.
pub fn resolve_name(namespace: &str, base: &str) -> Result<String, BusError> {
    TopicName::new(namespace, base).map(|t| t.to_string())
}

/// Subscription filter: an exact topic or `/*/base`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopicPattern {
    Exact(TopicName),
    AnyNamespace(String),
}

impl TopicPattern {
    pub fn parse(pattern: &str) -> Result<Self, BusError> {
        if let Some(base) = pattern.strip_prefix("/*/") {
            if valid_segment(base) {
                return Ok(Self::AnyNamespace(base.to_owned()));
            }
            return Err(BusError::Name(pattern.to_owned()));
        }
        TopicName::parse(pattern).map(Self::Exact)
    }

    pub fn matches(&self, topic: &TopicName) -> bool {
        match self {
            Self::Exact(t) => t == topic,
            Self::AnyNamespace(base) => !topic.namespace.is_empty() && topic.base == *base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublisherId(pub u32);

/// Handle identifying one data writer in a domain.
#[derive(Debug, Clone)]
pub struct Publisher {
    id: PublisherId,
    name: String,
}

impl Publisher {
    pub fn id(&self) -> PublisherId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<M> {
    pub topic: String,
    pub payload: M,
    /// Per-publisher counter, starting at 1, without gaps.
    pub sequence: u64,
    pub source: PublisherId,
    /// Domain step at which the sample becomes takeable.
    pub visible_at: u64,
}

struct TopicState<M> {
    durability: Durability,
    kind: Option<&'static str>,
    latest: Option<Sample<M>>,
}

struct SubState<M> {
    pattern: TopicPattern,
    queue: VecDeque<Sample<M>>,
}

struct Inner<M> {
    step: u64,
    topics: BTreeMap<TopicName, TopicState<M>>,
    subs: BTreeMap<u64, SubState<M>>,
    next_sub: u64,
    publishers: Vec<(String, u64)>,
}

/// A DDS-style domain. Cloning yields another handle to the same data space.
pub struct Domain<M> {
    id: u32,
    latency: u64,
    inner: Arc<Mutex<Inner<M>>>,
}

impl<M> Clone for Domain<M> {
    fn clone(&self) -> Self {
        Self {
            id: self.id,
            latency: self.latency,
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<M: Payload> Domain<M> {
    /// Domain with immediate delivery.
    pub fn new(id: u32) -> Self {
        Self::with_latency(id, 0)
    }

    pub fn with_latency(id: u32, latency_steps: u64) -> Self {
        Self {
            id,
            latency: latency_steps,
            inner: Arc::new(Mutex::new(Inner {
                step: 0,
                topics: BTreeMap::new(),
                subs: BTreeMap::new(),
                next_sub: 0,
                publishers: Vec::new(),
            })),
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    fn lock(&self) -> MutexGuard<'_, Inner<M>> {
        // A panic while holding the lock leaves the queues consistent, so keep going.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Current domain clock.
    pub fn step(&self) -> u64 {
        self.lock().step
    }

    /// Moves the domain clock forward. Samples whose visibility step has been
    /// reached become takeable.
    pub fn advance_to(&self, step: u64) {
        let mut inner = self.lock();
        inner.step = inner.step.max(step);
    }

    pub fn create_publisher(&self, name: &str) -> Publisher {
        let mut inner = self.lock();
        let id = PublisherId(inner.publishers.len() as u32);
        inner.publishers.push((name.to_owned(), 0));
        Publisher {
            id,
            name: name.to_owned(),
        }
    }

    /// Declares a topic's durability ahead of the first publish. Redeclaring
    /// with the same durability is a no-op.
    pub fn declare_topic(&self, topic: &str, durability: Durability) -> Result<(), BusError> {
        let name = TopicName::parse(topic)?;
        let mut inner = self.lock();
        let state = inner.topics.entry(name).or_insert_with(|| TopicState {
            durability,
            kind: None,
            latest: None,
        });
        if state.durability != durability {
            return Err(BusError::Durability {
                topic: topic.to_owned(),
                existing: state.durability,
            });
        }
        Ok(())
    }

    /// Topics that exist in this domain, rendered, in name order.
    pub fn topics(&self) -> Vec<String> {
        self.lock().topics.keys().map(|t| t.to_string()).collect()
    }

    pub fn has_topic(&self, topic: &str) -> bool {
        TopicName::parse(topic)
            .map(|t| self.lock().topics.contains_key(&t))
            .unwrap_or(false)
    }

    /// Publishes a sample and returns its sequence number. Unknown topics are
    /// created volatile.
    pub fn publish(&self, publisher: &Publisher, topic: &str, payload: M) -> Result<u64, BusError> {
        let name = TopicName::parse(topic)?;
        let mut inner = self.lock();
        let visible_at = inner.step + self.latency;
        let offered = payload.kind();
        let state = inner.topics.entry(name.clone()).or_insert_with(|| TopicState {
            durability: Durability::Volatile,
            kind: None,
            latest: None,
        });
        match state.kind {
            Some(established) if established != offered => {
                return Err(BusError::Type {
                    topic: topic.to_owned(),
                    established,
                    offered,
                })
            }
            _ => state.kind = Some(offered),
        }
        let durability = state.durability;

        let counter = &mut inner.publishers[publisher.id.0 as usize].1;
        *counter += 1;
        let sample = Sample {
            topic: name.to_string(),
            payload,
            sequence: *counter,
            source: publisher.id,
            visible_at,
        };
        for sub in inner.subs.values_mut() {
            if sub.pattern.matches(&name) {
                sub.queue.push_back(sample.clone());
            }
        }
        if durability == Durability::LastValue {
            if let Some(state) = inner.topics.get_mut(&name) {
                state.latest = Some(sample.clone());
            }
        }
        Ok(sample.sequence)
    }

    /// Subscribes to an exact topic or a `/*/base` pattern. Retained samples
    /// of matching last-value topics are queued first, in topic-name order.
    pub fn subscribe(&self, pattern: &str) -> Result<Subscription<M>, BusError> {
        let pattern = TopicPattern::parse(pattern)?;
        let mut inner = self.lock();
        let queue: VecDeque<Sample<M>> = inner
            .topics
            .iter()
            .filter(|(name, _)| pattern.matches(name))
            .filter_map(|(_, state)| state.latest.clone())
            .collect();
        let id = inner.next_sub;
        inner.next_sub += 1;
        inner.subs.insert(id, SubState { pattern, queue });
        Ok(Subscription {
            id,
            domain: self.clone(),
        })
    }

    fn take_for(&self, sub: u64, max_count: usize) -> Vec<Sample<M>> {
        let mut inner = self.lock();
        let now = inner.step;
        let Some(state) = inner.subs.get_mut(&sub) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        while out.len() < max_count {
            match state.queue.front() {
                Some(s) if s.visible_at <= now => out.extend(state.queue.pop_front()),
                _ => break,
            }
        }
        out
    }

    fn pending_for(&self, sub: u64) -> usize {
        let inner = self.lock();
        let now = inner.step;
        inner
            .subs
            .get(&sub)
            .map(|s| s.queue.iter().take_while(|x| x.visible_at <= now).count())
            .unwrap_or(0)
    }
}

/// A data reader. Dropping it removes its queue from the domain.
pub struct Subscription<M: Payload> {
    id: u64,
    domain: Domain<M>,
}

impl<M: Payload> Subscription<M> {
    /// Removes and returns up to `max_count` deliverable samples in arrival order.
    pub fn take(&self, max_count: usize) -> Vec<Sample<M>> {
        self.domain.take_for(self.id, max_count)
    }

    pub fn take_all(&self) -> Vec<Sample<M>> {
        self.take(usize::MAX)
    }

    pub fn pending(&self) -> usize {
        self.domain.pending_for(self.id)
    }
}

impl<M: Payload> Drop for Subscription<M> {
    fn drop(&mut self) {
        self.domain.lock().subs.remove(&self.id);
    }
}

impl<M: Payload> fmt::Debug for Subscription<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Subscription")
            .field("id", &self.id)
            .field("domain", &self.domain.id)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    enum Msg {
        Text(&'static str),
        Num(i64),
    }

    impl Payload for Msg {
        fn kind(&self) -> &'static str {
            match self {
                Msg::Text(_) => "text",
                Msg::Num(_) => "num",
            }
        }
    }

    fn payloads(samples: &[Sample<Msg>]) -> Vec<Msg> {
        samples.iter().map(|s| s.payload.clone()).collect()
    }

    #[test]
    fn resolve_examples() {
        assert_eq!(resolve_name("robotA", "pose").unwrap(), "/robotA/pose");
        assert_eq!(resolve_name("", "ticket").unwrap(), "/ticket");
        assert!(matches!(resolve_name("robotA", "po/se"), Err(BusError::Name(_))));
        assert!(resolve_name("robotA", "").is_err());
        assert!(resolve_name("a/b", "pose").is_err());
    }

    #[test]
    fn parse_rejects_malformed() {
        for bad in ["", "pose", "//pose", "/a//b", "/a/b/c", "/a/", "/"] {
            assert!(TopicName::parse(bad).is_err(), "{bad}");
        }
        assert_eq!(TopicName::parse("/a/b").unwrap().to_string(), "/a/b");
    }

    #[test]
    fn fifo_order() {
        let d = Domain::new(0);
        let p = d.create_publisher("p");
        let sub = d.subscribe("/chatter").unwrap();
        for m in ["a", "b", "c"] {
            d.publish(&p, "/chatter", Msg::Text(m)).unwrap();
        }
        assert_eq!(
            payloads(&sub.take(10)),
            vec![Msg::Text("a"), Msg::Text("b"), Msg::Text("c")]
        );
    }

    #[test]
    fn latched_and_volatile() {
        let d = Domain::new(0);
        let p = d.create_publisher("p");
        d.declare_topic("/latched", Durability::LastValue).unwrap();
        d.publish(&p, "/latched", Msg::Text("m1")).unwrap();
        d.publish(&p, "/volatile", Msg::Text("m1")).unwrap();
        assert_eq!(payloads(&d.subscribe("/latched").unwrap().take(10)), vec![Msg::Text("m1")]);
        assert!(d.subscribe("/volatile").unwrap().take(10).is_empty());
    }

    #[test]
    fn latch_keeps_only_latest() {
        let d = Domain::new(0);
        let p = d.create_publisher("p");
        d.declare_topic("/m", Durability::LastValue).unwrap();
        for k in 1..=5 {
            d.publish(&p, "/m", Msg::Num(k)).unwrap();
        }
        let got = d.subscribe("/m").unwrap().take_all();
        assert_eq!(payloads(&got), vec![Msg::Num(5)]);
        assert_eq!(got[0].sequence, 5);
    }

    #[test]
    fn wildcard_subscription() {
        let d = Domain::new(0);
        let p = d.create_publisher("p");
        let sub = d.subscribe("/*/pose").unwrap();
        let exact = d.subscribe("/ticket").unwrap();
        for t in ["/robotA/pose", "/robotB/pose", "/pose", "/robotA/other", "/ticket"] {
            d.publish(&p, t, Msg::Num(0)).unwrap();
        }
        let topics: Vec<String> = sub.take_all().into_iter().map(|s| s.topic).collect();
        assert_eq!(topics, vec!["/robotA/pose", "/robotB/pose"]);
        let topics: Vec<String> = exact.take_all().into_iter().map(|s| s.topic).collect();
        assert_eq!(topics, vec!["/ticket"]);
        assert!(matches!(d.subscribe("/*/"), Err(BusError::Name(_))));
        assert!(d.subscribe("/*/*").is_err());
    }

    #[test]
    fn take_queue_semantics() {
        let d = Domain::new(0);
        let p = d.create_publisher("p");
        let sub = d.subscribe("/q").unwrap();
        assert!(sub.take(3).is_empty());
        for k in 0..5 {
            d.publish(&p, "/q", Msg::Num(k)).unwrap();
        }
        assert_eq!(sub.take(3).len(), 3);
        assert_eq!(payloads(&sub.take(3)), vec![Msg::Num(3), Msg::Num(4)]);
        assert!(sub.take(3).is_empty());
    }

    #[test]
    fn type_mismatch_rejected() {
        let d = Domain::new(0);
        let p = d.create_publisher("p");
        d.publish(&p, "/t", Msg::Num(1)).unwrap();
        let err = d.publish(&p, "/t", Msg::Text("x")).unwrap_err();
        assert!(matches!(err, BusError::Type { established: "num", .. }));
    }

    #[test]
    fn stepped_delivery() {
        let d = Domain::with_latency(0, 1);
        let p = d.create_publisher("p");
        let sub = d.subscribe("/x").unwrap();
        d.publish(&p, "/x", Msg::Num(1)).unwrap();
        assert!(sub.take_all().is_empty());
        assert_eq!(sub.pending(), 0);
        d.advance_to(1);
        assert_eq!(payloads(&sub.take_all()), vec![Msg::Num(1)]);
    }

    #[test]
    fn domains_are_isolated() {
        let d0: Domain<Msg> = Domain::new(0);
        let d1: Domain<Msg> = Domain::new(1);
        let s1 = d1.subscribe("/x").unwrap();
        let p = d0.create_publisher("p");
        d0.publish(&p, "/x", Msg::Num(1)).unwrap();
        assert!(s1.take_all().is_empty());
        assert!(!d1.has_topic("/x"));
    }

    #[test]
    fn dropped_subscription_stops_queueing() {
        let d = Domain::new(0);
        let p = d.create_publisher("p");
        let sub = d.subscribe("/x").unwrap();
        drop(sub);
        d.publish(&p, "/x", Msg::Num(1)).unwrap();
        assert!(d.lock().subs.is_empty());
    }
}
