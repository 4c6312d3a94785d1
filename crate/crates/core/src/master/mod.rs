// SPDX-License-Identifier: Apache-2.0

//! The master: registry of actors, users and executors; placement with
//! executor reuse; routing of sensory data and results; scaling out when
//! saturated; discovery of actors and peer masters.

mod discovery;
mod placement;
mod scaling;

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::appmodel::{ApplicationCatalog, TaskRegistry};
use crate::ports::{PortPlan, PortRange};
use crate::profile::HostProfile;
use crate::protocol::{kinds, ComponentIdentity, ComponentRole, Endpoint, MessageEnvelope};
use crate::runtime::{answer_probe, post, Component, Env, Timer};
use crate::scheduler::{init_scheduler_by_name, Decision, ExecTimeModel, PolicyLookup, SchedulerConfig, SchedulerPolicy};
use crate::taskexecutor::DEFAULT_COOL_OFF_MS;

pub const DEFAULT_QUEUE_CAPACITY: usize = 8;
pub const DEFAULT_CPU_THRESHOLD: f64 = 0.9;
pub const DEFAULT_PROFILE_INTERVAL_MS: f64 = 5_000.0;
pub const DEFAULT_DISCOVERY_INTERVAL_MS: f64 = 5_000.0;

/// An address range to probe during discovery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeTarget {
    pub ip: String,
    pub ports: PortRange,
}

#[derive(Clone)]
pub struct MasterConfig {
    pub scheduler_name: String,
    pub scheduler: SchedulerConfig,
    /// Placements in progress before new requests overflow.
    pub queue_capacity: usize,
    /// Own cpu utilization at which new requests overflow.
    pub cpu_threshold: f64,
    /// Sent to executors in `wait`; 0 stops them instead.
    pub cool_off_ms: f64,
    pub profile_interval_ms: f64,
    pub discovery_interval_ms: f64,
    pub discovery_targets: Vec<ProbeTarget>,
    pub remote_logger: Option<Endpoint>,
    /// Link latency assumed between distinct hosts when estimating cost.
    pub link_latency_ms: f64,
    pub port_plan: PortPlan,
    /// The master that asked for this one to be started, if any.
    pub creator: Option<ComponentIdentity>,
    pub peers: Vec<Endpoint>,
    pub apps: Arc<ApplicationCatalog>,
    pub tasks: Arc<TaskRegistry>,
}

impl Default for MasterConfig {
    fn default() -> Self {
        MasterConfig {
            scheduler_name: "RankingBased".into(),
            scheduler: SchedulerConfig::default(),
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            cpu_threshold: DEFAULT_CPU_THRESHOLD,
            cool_off_ms: DEFAULT_COOL_OFF_MS,
            profile_interval_ms: DEFAULT_PROFILE_INTERVAL_MS,
            discovery_interval_ms: DEFAULT_DISCOVERY_INTERVAL_MS,
            discovery_targets: Vec::new(),
            remote_logger: None,
            link_latency_ms: 1.0,
            port_plan: PortPlan::default(),
            creator: None,
            peers: Vec::new(),
            apps: Arc::new(ApplicationCatalog::default()),
            tasks: Arc::new(TaskRegistry::builtin()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MasterError {
    #[error("unknown scheduler `{0}`")]
    UnknownScheduler(String),
    #[error("scheduler `{0}` is not implemented")]
    NotImplemented(String),
}

/// What the master remembers about a registered component.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationRecord {
    pub identity: ComponentIdentity,
    pub registered_at: f64,
    pub last_profile: Option<HostProfile>,
    /// Component ids of executors on this actor's host.
    pub hosted_executors: Vec<String>,
}

/// A user's request waiting for, or going through, placement.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementQueueEntry {
    pub user: ComponentIdentity,
    pub application_name: String,
    pub label: String,
    pub enqueued_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Slot {
    host_id: String,
    executor: Option<String>,
    reused: bool,
    ready: bool,
}

#[derive(Debug, Clone)]
struct Placement {
    entry: PlacementQueueEntry,
    slots: BTreeMap<String, Slot>,
    waiting_lookups: BTreeSet<String>,
    service_ready: bool,
    sensory_at: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
struct ExecRecord {
    identity: ComponentIdentity,
    task: String,
    app: String,
    host_id: String,
    user: Option<String>,
    cooling: bool,
}

pub struct Master {
    me: ComponentIdentity,
    cfg: MasterConfig,
    policy: Box<dyn SchedulerPolicy>,
    model: ExecTimeModel,
    next_id: u64,
    records: BTreeMap<u64, RegistrationRecord>,
    placements: BTreeMap<String, Placement>,
    executors: BTreeMap<String, ExecRecord>,
    known_masters: Vec<ComponentIdentity>,
    parked: Vec<PlacementQueueEntry>,
    scaling_in_flight: bool,
    seeding: bool,
    held: Vec<MessageEnvelope>,
    decisions: Vec<Decision>,
    remote_logger: Option<ComponentIdentity>,
}

impl Master {
    pub fn new(host_id: impl Into<String>, addr: Endpoint, cfg: MasterConfig) -> Result<Self, MasterError> {
        let policy = match init_scheduler_by_name(&cfg.scheduler_name, &cfg.scheduler) {
            Some(PolicyLookup::Ready(p)) => p,
            Some(PolicyLookup::NotImplemented(n)) => return Err(MasterError::NotImplemented(n.into())),
            None => return Err(MasterError::UnknownScheduler(cfg.scheduler_name.clone())),
        };
        let remote_logger = cfg
            .remote_logger
            .clone()
            .map(|ep| ComponentIdentity::unknown_peer(ComponentRole::RemoteLogger, ep));
        let known_masters = cfg
            .peers
            .iter()
            .filter(|p| **p != addr)
            .map(|ep| ComponentIdentity::unknown_peer(ComponentRole::Master, ep.clone()))
            .collect();
        Ok(Master {
            me: ComponentIdentity::new(ComponentRole::Master, host_id, addr),
            seeding: cfg.creator.is_some(),
            cfg,
            policy,
            model: ExecTimeModel::new(),
            next_id: 1,
            records: BTreeMap::new(),
            placements: BTreeMap::new(),
            executors: BTreeMap::new(),
            known_masters,
            parked: Vec::new(),
            scaling_in_flight: false,
            held: Vec::new(),
            decisions: Vec::new(),
            remote_logger,
        })
    }

    pub fn config(&self) -> &MasterConfig {
        &self.cfg
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn records(&self) -> impl Iterator<Item = (u64, &RegistrationRecord)> {
        self.records.iter().map(|(id, r)| (*id, r))
    }

    pub fn actors(&self) -> Vec<&ComponentIdentity> {
        self.records
            .values()
            .filter(|r| r.identity.role == ComponentRole::Actor)
            .map(|r| &r.identity)
            .collect()
    }

    /// Addresses of registered actors, sorted.
    pub fn actor_addrs(&self) -> BTreeSet<Endpoint> {
        self.actors().into_iter().map(|a| a.addr.clone()).collect()
    }

    pub fn known_masters(&self) -> &[ComponentIdentity] {
        &self.known_masters
    }

    /// Executor ids hosted on the actor registered under `actor_id`.
    pub fn hosted_executors(&self, actor_id: u64) -> &[String] {
        self.records.get(&actor_id).map(|r| r.hosted_executors.as_slice()).unwrap_or(&[])
    }

    /// Placements started but not yet service-ready.
    pub fn in_progress(&self) -> usize {
        self.placements.values().filter(|p| !p.service_ready).count()
    }

    pub fn execution_model(&self) -> &ExecTimeModel {
        &self.model
    }

    fn find_record(&self, role: ComponentRole, addr: &Endpoint) -> Option<u64> {
        self.records
            .iter()
            .find(|(_, r)| r.identity.role == role && r.identity.addr == *addr)
            .map(|(id, _)| *id)
    }

    fn actor_on(&self, host_id: &str) -> Option<&RegistrationRecord> {
        self.records
            .values()
            .find(|r| r.identity.role == ComponentRole::Actor && r.identity.host_id == host_id)
    }

    /// Stores a record and returns the assigned id. A live record for the
    /// same role and address is refreshed in place instead.
    fn register(&mut self, identity: &ComponentIdentity, profile: Option<HostProfile>, now: f64) -> u64 {
        if let Some(id) = self.find_record(identity.role, &identity.addr) {
            log::warn!("{}: {} registered again; keeping id {id}", self.me.name, identity.name);
            let rec = self.records.get_mut(&id).expect("found above");
            if profile.is_some() {
                rec.last_profile = profile;
            }
            return id;
        }
        let id = self.next_id;
        self.next_id += 1;
        self.records.insert(
            id,
            RegistrationRecord {
                identity: identity.with_component_id(id.to_string()),
                registered_at: now,
                last_profile: profile,
                hosted_executors: Vec::new(),
            },
        );
        id
    }

    fn reply_registered(&self, env: &mut dyn Env, to: &ComponentIdentity, id: u64) {
        let data = json!({ "componentID": id.to_string(), "identity": to.with_component_id(id.to_string()) });
        post(env, &self.me, to, kinds::REGISTERED, data);
    }

    fn log_event(&self, env: &mut dyn Env, event: &str, detail: serde_json::Value) {
        if let Some(rl) = &self.remote_logger {
            post(env, &self.me, rl, kinds::EVENT, json!({ "event": event, "detail": detail }));
        }
    }

    fn send_error(&self, env: &mut dyn Env, to: &ComponentIdentity, reason: &str, detail: serde_json::Value) {
        post(env, &self.me, to, kinds::ERROR, json!({ "reason": reason, "detail": detail }));
    }

    fn on_register(&mut self, msg: MessageEnvelope, env: &mut dyn Env) {
        let now = env.now_ms();
        match msg.source.role {
            ComponentRole::User => self.on_user_request(msg, env),
            ComponentRole::Actor => {
                let profile = msg
                    .data
                    .get("resources")
                    .cloned()
                    .and_then(|v| serde_json::from_value::<HostProfile>(v).ok())
                    .map(HostProfile::clamped);
                let id = self.register(&msg.source, profile, now);
                self.reply_registered(env, &msg.source, id);
            }
            ComponentRole::TaskExecutor => self.on_executor_register(msg, env),
            other => log::warn!("{}: {other} cannot register", self.me.name),
        }
    }

    fn profile_tick(&mut self, env: &mut dyn Env) {
        if let Some(rl) = self.remote_logger.clone() {
            let resources = env.host_profile();
            post(env, &self.me, &rl, kinds::HOST_RESOURCES, json!({ "resources": resources }));
            post(env, &self.me, &rl, kinds::REQUEST_PROFILES, json!({}));
            env.set_timer(self.cfg.profile_interval_ms, Timer::ProfileTick);
        }
    }

    fn on_profiles(&mut self, msg: &MessageEnvelope) {
        let profiles: BTreeMap<String, HostProfile> = msg
            .data
            .get("profiles")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .unwrap_or_default();
        for rec in self.records.values_mut() {
            if rec.identity.role == ComponentRole::Actor {
                if let Some(p) = profiles.get(&rec.identity.host_id) {
                    rec.last_profile = Some(p.clone().clamped());
                }
            }
        }
    }
}

impl Component for Master {
    fn identity(&self) -> &ComponentIdentity {
        &self.me
    }

    fn start(&mut self, env: &mut dyn Env) {
        if let Some(creator) = self.cfg.creator.clone() {
            if !self.known_masters.iter().any(|m| m.addr == creator.addr) {
                self.known_masters.push(creator.clone());
            }
            if !post(env, &self.me, &creator, kinds::GET_PROFILES, json!({})) {
                self.seeding = false;
            }
        }
        if self.remote_logger.is_some() {
            self.profile_tick(env);
        }
        if !self.cfg.discovery_targets.is_empty() || !self.known_masters.is_empty() {
            env.set_timer(self.cfg.discovery_interval_ms, Timer::DiscoveryTick);
        }
    }

    fn handle(&mut self, msg: MessageEnvelope, env: &mut dyn Env) {
        if self.seeding && msg.is_kind(kinds::REGISTER) && msg.source.role == ComponentRole::User {
            self.held.push(msg);
            return;
        }
        if msg.is_kind(kinds::PROBE_TRY) {
            answer_probe(env, &self.me, &msg);
        } else if msg.is_kind(kinds::PROBE_RESULT) {
            self.on_probe_result(&msg, env);
        } else if msg.is_kind(kinds::REGISTER) {
            self.on_register(msg, env);
        } else if msg.is_kind(kinds::LOOKUP) {
            self.on_lookup(&msg, env);
        } else if msg.is_kind(kinds::READY) {
            self.on_ready(&msg, env);
        } else if msg.is_kind(kinds::SENSORY_DATA) {
            self.on_sensory_data(&msg, env);
        } else if msg.is_kind(kinds::FINAL_RESULT) {
            self.on_final_result(&msg, env);
        } else if msg.is_kind(kinds::ERROR) {
            self.on_error(&msg, env);
        } else if msg.is_kind(kinds::WAITING) {
            self.on_waiting(&msg, env);
        } else if msg.is_kind(kinds::EXECUTOR_EXIT) {
            self.on_executor_exit(&msg, env);
        } else if msg.is_kind(kinds::USER_EXIT) {
            self.on_user_exit(&msg, env);
        } else if msg.is_kind(kinds::GET_PROFILES) {
            self.on_get_profiles(&msg, env);
        } else if msg.is_kind(kinds::PROFILES_INFO) {
            self.on_profiles_info(&msg, env);
        } else if msg.is_kind(kinds::REQUEST_ACTORS_INFO) {
            self.on_request_actors_info(&msg, env);
        } else if msg.is_kind(kinds::ACTORS_INFO) {
            self.on_actors_info(&msg, env);
        } else if msg.is_kind(kinds::ALL_RESOURCES_PROFILES) {
            self.on_profiles(&msg);
        } else {
            log::debug!("{}: ignoring {}", self.me.name, msg.kind());
        }
    }

    fn on_timer(&mut self, timer: Timer, env: &mut dyn Env) {
        match timer {
            Timer::ProfileTick => self.profile_tick(env),
            Timer::DiscoveryTick => {
                self.discovery_tick(env);
                env.set_timer(self.cfg.discovery_interval_ms, Timer::DiscoveryTick);
            }
            _ => {}
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
