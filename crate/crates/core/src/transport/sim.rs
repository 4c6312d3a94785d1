// SPDX-License-Identifier: Apache-2.0

//! Deterministic in-process network.
//!
//! Events run in `(virtual time, sequence)` order. Each directed link is
//! FIFO. A component busy computing (see [`Env::charge_compute`]) holds
//! its deliveries until it is free again. Every message goes through the
//! real codec, so catalog violations surface here exactly as on TCP.

use std::any::Any;
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ports::PortPlan;
use crate::profile::HostProfile;
use crate::protocol::{decode_message, encode_message, ComponentRole, Endpoint, MessageEnvelope};
use crate::runtime::{Component, Env, Factory, SpawnError, Timer, TransportError};
use crate::scheduler::model::formula_estimate;

/// Wall-clock origin of virtual time, so stamped timestamps look like
/// real epoch milliseconds and are always positive.
pub const EPOCH_MS: f64 = 1_600_000_000_000.0;

pub const DEFAULT_EVENT_BUDGET: u64 = 100_000;

fn pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Latency and partitions between hosts. Links are symmetric.
#[derive(Debug, Clone, Default)]
pub struct SimNetConfig {
    pub seed: u64,
    /// Between distinct hosts with no explicit entry.
    pub default_latency_ms: f64,
    /// Between components on the same host.
    pub local_latency_ms: f64,
    /// Uniform extra delay in `[0, jitter_ms)`.
    pub jitter_ms: f64,
    latency: BTreeMap<(String, String), f64>,
    partitions: BTreeSet<(String, String)>,
}

impl SimNetConfig {
    pub fn new(seed: u64, default_latency_ms: f64) -> Self {
        SimNetConfig {
            seed,
            default_latency_ms,
            ..Default::default()
        }
    }

    pub fn set_latency(&mut self, a: &str, b: &str, ms: f64) {
        self.latency.insert(pair(a, b), ms);
    }

    pub fn latency(&self, a: &str, b: &str) -> f64 {
        if let Some(ms) = self.latency.get(&pair(a, b)) {
            return *ms;
        }
        if a == b {
            self.local_latency_ms
        } else {
            self.default_latency_ms
        }
    }

    pub fn partition(&mut self, a: &str, b: &str) {
        self.partitions.insert(pair(a, b));
    }

    pub fn heal(&mut self, a: &str, b: &str) {
        self.partitions.remove(&pair(a, b));
    }

    pub fn is_partitioned(&self, a: &str, b: &str) -> bool {
        self.partitions.contains(&pair(a, b))
    }
}

/// One delivered message, as seen at dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEntry {
    /// Virtual milliseconds since the run began.
    pub time: f64,
    pub seq: u64,
    pub source: String,
    pub destination: String,
    #[serde(rename = "type")]
    pub msg_type: String,
    pub sub_type: String,
    pub sub_sub_type: String,
}

impl TraceEntry {
    /// `type/subType[/subSubType]`.
    pub fn kind_label(&self) -> String {
        if self.sub_sub_type.is_empty() {
            format!("{}/{}", self.msg_type, self.sub_type)
        } else {
            format!("{}/{}/{}", self.msg_type, self.sub_type, self.sub_sub_type)
        }
    }
}

fn label(role: ComponentRole, ep: &Endpoint) -> String {
    format!("{role}@{}:{}", ep.ip(), ep.port())
}

enum Payload {
    Start,
    Deliver(MessageEnvelope),
    Timer(Timer),
}

struct Scheduled {
    time: f64,
    seq: u64,
    to: Endpoint,
    /// Timers die with the incarnation that set them.
    incarnation: Option<u64>,
    background: bool,
    payload: Payload,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

struct Node {
    component: Option<Box<dyn Component>>,
    role: ComponentRole,
    host: String,
    busy_until: f64,
    incarnation: u64,
}

/// Counters for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimStats {
    pub delivered: u64,
    pub dropped: u64,
    pub send_failures: u64,
    pub events: u64,
}

pub struct SimWorld {
    net: SimNetConfig,
    rng: ChaCha8Rng,
    plan: PortPlan,
    hosts: BTreeMap<String, HostProfile>,
    now: f64,
    seq: u64,
    queue: BinaryHeap<Reverse<Scheduled>>,
    foreground: usize,
    nodes: BTreeMap<Endpoint, Node>,
    next_incarnation: u64,
    link_clock: BTreeMap<(Endpoint, Endpoint), f64>,
    trace: Vec<TraceEntry>,
    violations: Vec<String>,
    stats: SimStats,
    budget: u64,
    budget_exhausted: bool,
}

impl SimWorld {
    pub fn new(net: SimNetConfig) -> Self {
        SimWorld {
            rng: ChaCha8Rng::seed_from_u64(net.seed),
            net,
            plan: PortPlan::default(),
            hosts: BTreeMap::new(),
            now: 0.0,
            seq: 0,
            queue: BinaryHeap::new(),
            foreground: 0,
            nodes: BTreeMap::new(),
            next_incarnation: 0,
            link_clock: BTreeMap::new(),
            trace: Vec::new(),
            violations: Vec::new(),
            stats: SimStats::default(),
            budget: DEFAULT_EVENT_BUDGET,
            budget_exhausted: false,
        }
    }

    pub fn with_port_plan(mut self, plan: PortPlan) -> Self {
        self.plan = plan;
        self
    }

    pub fn set_event_budget(&mut self, budget: u64) {
        self.budget = budget;
    }

    pub fn budget_exhausted(&self) -> bool {
        self.budget_exhausted
    }

    pub fn add_host(&mut self, ip: impl Into<String>, profile: HostProfile) {
        self.hosts.insert(ip.into(), profile);
    }

    pub fn set_host_profile(&mut self, ip: &str, profile: HostProfile) {
        self.hosts.insert(ip.to_string(), profile);
    }

    pub fn net(&self) -> &SimNetConfig {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut SimNetConfig {
        &mut self.net
    }

    pub fn port_plan(&self) -> &PortPlan {
        &self.plan
    }

    /// Virtual milliseconds since the run began.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    /// Messages the codec refused to send.
    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn stats(&self) -> SimStats {
        self.stats
    }

    /// Places a component on `ip`, at `port` or the lowest free port of the
    /// role's range. It starts at the current virtual time.
    pub fn add_component(
        &mut self,
        ip: &str,
        role: ComponentRole,
        port: Option<u16>,
        factory: Factory,
    ) -> Result<Endpoint, SpawnError> {
        let ep = match port {
            Some(p) => {
                let ep = Endpoint::new(ip, p).map_err(|e| SpawnError::Failed(e.to_string()))?;
                if self.nodes.contains_key(&ep) {
                    return Err(SpawnError::Failed(format!("{ip}:{p} is taken")));
                }
                ep
            }
            None => self.free_port(ip, role)?,
        };
        self.install(ep.clone(), role, self.now, factory);
        Ok(ep)
    }

    fn free_port(&self, ip: &str, role: ComponentRole) -> Result<Endpoint, SpawnError> {
        let range = self.plan.range(role);
        range
            .iter()
            .filter_map(|p| Endpoint::new(ip, p).ok())
            .find(|ep| !self.nodes.contains_key(ep))
            .ok_or(SpawnError::PortsExhausted { role, range })
    }

    fn install(&mut self, ep: Endpoint, role: ComponentRole, at: f64, factory: Factory) {
        self.next_incarnation += 1;
        let incarnation = self.next_incarnation;
        let component = factory(ep.clone());
        self.nodes.insert(
            ep.clone(),
            Node {
                component: Some(component),
                role,
                host: ep.ip().to_string(),
                busy_until: at,
                incarnation,
            },
        );
        self.push(at, ep, Some(incarnation), false, Payload::Start);
    }

    fn push(&mut self, time: f64, to: Endpoint, incarnation: Option<u64>, background: bool, payload: Payload) {
        self.seq += 1;
        let seq = self.seq;
        self.requeue(Scheduled {
            time,
            seq,
            to,
            incarnation,
            background,
            payload,
        });
    }

    fn requeue(&mut self, ev: Scheduled) {
        if !ev.background {
            self.foreground += 1;
        }
        self.queue.push(Reverse(ev));
    }

    pub fn endpoints(&self) -> impl Iterator<Item = (&Endpoint, ComponentRole)> {
        self.nodes.iter().map(|(ep, n)| (ep, n.role))
    }

    pub fn is_running(&self, ep: &Endpoint) -> bool {
        self.nodes.contains_key(ep)
    }

    pub fn component(&self, ep: &Endpoint) -> Option<&dyn Component> {
        self.nodes.get(ep).and_then(|n| n.component.as_deref())
    }

    pub fn get<T: Any>(&self, ep: &Endpoint) -> Option<&T> {
        self.component(ep).and_then(|c| c.as_any().downcast_ref::<T>())
    }

    /// Every live component of type `T`, in endpoint order.
    pub fn all<T: Any>(&self) -> Vec<(&Endpoint, &T)> {
        self.nodes
            .iter()
            .filter_map(|(ep, n)| n.component.as_deref()?.as_any().downcast_ref::<T>().map(|c| (ep, c)))
            .collect()
    }

    /// Processes one event. `false` when the queue is empty or the budget
    /// is spent.
    pub fn step(&mut self) -> bool {
        if self.stats.events >= self.budget {
            self.budget_exhausted = true;
            return false;
        }
        let Some(Reverse(ev)) = self.queue.pop() else {
            return false;
        };
        if !ev.background {
            self.foreground -= 1;
        }
        self.stats.events += 1;
        if ev.time > self.now {
            self.now = ev.time;
        }
        let Some(node) = self.nodes.get_mut(&ev.to) else {
            if matches!(ev.payload, Payload::Deliver(_)) {
                self.stats.dropped += 1;
            }
            return true;
        };
        if ev.incarnation.is_some_and(|i| i != node.incarnation) {
            return true;
        }
        if node.busy_until > self.now && !matches!(ev.payload, Payload::Start) {
            let busy_until = node.busy_until;
            self.requeue(Scheduled { time: busy_until, ..ev });
            return true;
        }
        let incarnation = node.incarnation;
        let mut component = node.component.take().expect("component present between events");
        let mut ctx = SimEnv {
            world: self,
            me: ev.to.clone(),
            incarnation,
            terminated: false,
        };
        match ev.payload {
            Payload::Start => component.start(&mut ctx),
            Payload::Timer(t) => component.on_timer(t, &mut ctx),
            Payload::Deliver(mut msg) => {
                msg.received_at_local_timestamp = EPOCH_MS + ctx.world.now;
                ctx.world.record(&msg, ev.seq);
                ctx.world.stats.delivered += 1;
                component.handle(msg, &mut ctx);
            }
        }
        let terminated = ctx.terminated;
        if terminated {
            self.nodes.remove(&ev.to);
        } else if let Some(node) = self.nodes.get_mut(&ev.to) {
            node.component = Some(component);
        }
        true
    }

    /// Sends `msg` as if from `from` at virtual time `at`.
    fn transmit(&mut self, from: &Endpoint, at: f64, mut msg: MessageEnvelope) -> Result<(), TransportError> {
        msg.sent_at_source_timestamp = EPOCH_MS + at;
        let msg = match encode_message(&msg).and_then(|raw| decode_message(&raw)) {
            Ok(m) => m,
            Err(e) => {
                self.violations.push(format!("{}: {e}", label(msg.source.role, from)));
                self.stats.send_failures += 1;
                return Err(e.into());
            }
        };
        let dest = msg.destination.addr.clone();
        if !self.nodes.contains_key(&dest) || self.net.is_partitioned(from.ip(), dest.ip()) {
            self.stats.send_failures += 1;
            return Err(TransportError::Unreachable(dest));
        }
        let mut latency = self.net.latency(from.ip(), dest.ip());
        if self.net.jitter_ms > 0.0 {
            latency += self.rng.gen::<f64>() * self.net.jitter_ms;
        }
        let link = (from.clone(), dest.clone());
        let last = self.link_clock.get(&link).copied().unwrap_or(f64::NEG_INFINITY);
        let time = (at + latency).max(last);
        self.link_clock.insert(link, time);
        self.push(time, dest, None, false, Payload::Deliver(msg));
        Ok(())
    }

    /// Sends `msg` from outside the world, as if its source were a live
    /// component. For tests that script one side of a conversation.
    pub fn inject(&mut self, msg: MessageEnvelope) -> Result<(), TransportError> {
        let from = msg.source.addr.clone();
        self.transmit(&from, self.now, msg)
    }

    fn record(&mut self, msg: &MessageEnvelope, seq: u64) {
        self.trace.push(TraceEntry {
            time: self.now,
            seq,
            source: label(msg.source.role, &msg.source.addr),
            destination: label(msg.destination.role, &msg.destination.addr),
            msg_type: msg.msg_type.clone(),
            sub_type: msg.sub_type.clone(),
            sub_sub_type: msg.sub_sub_type.clone(),
        });
    }

    /// Runs until nothing but recurring background timers remains; returns
    /// the number of messages delivered.
    pub fn deliver_until_quiescent(&mut self) -> u64 {
        let before = self.stats.delivered;
        while self.foreground > 0 && self.step() {}
        self.stats.delivered - before
    }

    /// Runs every event due at or before `t` (background included), then
    /// advances the clock to `t`.
    pub fn run_until(&mut self, t: f64) -> u64 {
        let before = self.stats.delivered;
        while self.queue.peek().is_some_and(|Reverse(ev)| ev.time <= t) {
            if !self.step() {
                break;
            }
        }
        if !self.budget_exhausted && t > self.now {
            self.now = t;
        }
        self.stats.delivered - before
    }
}

/// The [`Env`] handed to a component while one of its events runs.
struct SimEnv<'a> {
    world: &'a mut SimWorld,
    me: Endpoint,
    incarnation: u64,
    terminated: bool,
}

impl SimEnv<'_> {
    fn node(&self) -> &Node {
        &self.world.nodes[&self.me]
    }

    /// Virtual time as this component sees it, after any compute charged
    /// during the current handler.
    fn local_now(&self) -> f64 {
        self.world.now.max(self.node().busy_until)
    }
}

impl Env for SimEnv<'_> {
    fn now_ms(&self) -> f64 {
        EPOCH_MS + self.local_now()
    }

    fn send(&mut self, msg: MessageEnvelope) -> Result<(), TransportError> {
        let at = self.local_now();
        let from = self.me.clone();
        self.world.transmit(&from, at, msg)
    }

    fn set_timer(&mut self, after_ms: f64, timer: Timer) {
        let at = self.local_now() + after_ms.max(0.0);
        let background = timer.is_background();
        let me = self.me.clone();
        self.world.push(at, me, Some(self.incarnation), background, Payload::Timer(timer));
    }

    fn spawn(&mut self, role: ComponentRole, factory: Factory) -> Result<Endpoint, SpawnError> {
        let host = self.node().host.clone();
        let ep = self.world.free_port(&host, role)?;
        let at = self.local_now();
        self.world.install(ep.clone(), role, at, factory);
        Ok(ep)
    }

    fn host_profile(&mut self) -> HostProfile {
        let host = &self.node().host;
        self.world.hosts.get(host).cloned().unwrap_or_else(HostProfile::reference)
    }

    fn charge_compute(&mut self, work: f64, _wall_ms: f64) -> f64 {
        let profile = self.host_profile();
        let cost = formula_estimate(work, &profile).unwrap_or(work.max(0.0));
        let until = self.local_now() + cost;
        if let Some(n) = self.world.nodes.get_mut(&self.me) {
            n.busy_until = until;
        }
        cost
    }

    fn terminate(&mut self) {
        self.terminated = true;
    }
}
