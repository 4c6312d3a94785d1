// SPDX-License-Identifier: Apache-2.0

//! Scripted clusters on the simulated network: build one from a
//! [`Scenario`], run it to quiescence, and check the message trace.

mod mailbox;
pub mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::actor::{Actor, ActorConfig};
use crate::appmodel::{ApplicationCatalog, DataRecord, TaskRegistry, DEFAULT_GAME_OF_LIFE_TASKS};
use crate::master::{Master, MasterConfig, ProbeTarget};
use crate::ports::PortPlan;
use crate::profile::HostProfile;
use crate::protocol::{ComponentRole, Endpoint};
use crate::remotelogger::{MemoryStore, RemoteLogger};
use crate::runtime::{Component, Factory};
use crate::scheduler::{Decision, SchedulerConfig};
use crate::transport::sim::{SimStats, DEFAULT_EVENT_BUDGET};
use crate::transport::{SimNetConfig, SimWorld, TraceEntry};
use crate::user::{ResponseTimeStats, User, UserConfig, UserError, UserPhase};

pub use mailbox::Mailbox;
pub use trace::{assert_sequence, count, kind_counts, placement_flow_pattern};

/// A host, either as a full profile or by its headline figures.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum HostSpec {
    Full(HostProfile),
    #[serde(rename_all = "camelCase")]
    Short {
        cores: u32,
        /// MHz.
        frequency: f64,
        #[serde(default)]
        utilization: f64,
        #[serde(default = "default_memory")]
        memory_bytes: u64,
    },
}

fn default_memory() -> u64 {
    8 << 30
}

impl HostSpec {
    pub fn profile(&self) -> HostProfile {
        match self {
            HostSpec::Full(p) => p.clone(),
            HostSpec::Short {
                cores,
                frequency,
                utilization,
                memory_bytes,
            } => HostProfile::new(*cores, *frequency, *utilization, *memory_bytes, 0.2),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub latency_ms: f64,
}

/// One component placement. Fields that do not apply to the role are
/// ignored.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ComponentSpec {
    pub name: String,
    pub role: Option<ComponentRole>,
    pub host: String,
    pub port: Option<u16>,
    /// Name of the master to register with.
    pub master: Option<String>,
    /// Name of the remote logger to report to.
    pub remote_logger: Option<String>,
    pub scheduler: Option<String>,
    pub queue_capacity: Option<usize>,
    pub cpu_threshold: Option<f64>,
    pub cool_off_ms: Option<f64>,
    pub profile_interval_ms: Option<f64>,
    pub discovery_interval_ms: Option<f64>,
    #[serde(default)]
    pub discovery_targets: Vec<ProbeTarget>,
    /// Names of peer masters.
    #[serde(default)]
    pub peers: Vec<String>,
    pub application_name: Option<String>,
    pub label: Option<String>,
    #[serde(default)]
    pub inputs: Vec<DataRecord>,
    pub timeout_ms: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", tag = "action", deny_unknown_fields)]
pub enum WorkloadStep {
    /// Starts a component; `role` defaults to User.
    #[serde(rename_all = "camelCase")]
    Start { at_ms: f64, component: ComponentSpec },
    #[serde(rename_all = "camelCase")]
    Partition { at_ms: f64, a: String, b: String },
    #[serde(rename_all = "camelCase")]
    Heal { at_ms: f64, a: String, b: String },
    #[serde(rename_all = "camelCase")]
    SetHost { at_ms: f64, host: String, profile: HostSpec },
}

impl WorkloadStep {
    pub fn at_ms(&self) -> f64 {
        match self {
            WorkloadStep::Start { at_ms, .. }
            | WorkloadStep::Partition { at_ms, .. }
            | WorkloadStep::Heal { at_ms, .. }
            | WorkloadStep::SetHost { at_ms, .. } => *at_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", deny_unknown_fields)]
pub enum Assertion {
    /// The pattern embeds in the trace; see [`trace::matches`].
    Sequence { pattern: Vec<String> },
    /// Deliveries matching `pattern` number exactly `equals`, or fall in
    /// `[min, max]`.
    Count {
        pattern: String,
        equals: Option<usize>,
        min: Option<usize>,
        max: Option<usize>,
    },
    /// A user's result value, numerically within `tolerance`.
    #[serde(rename_all = "camelCase")]
    Result {
        user: String,
        #[serde(default)]
        index: usize,
        key: String,
        equals: Value,
        #[serde(default)]
        tolerance: f64,
    },
    /// `done`, `failed`, or a specific error such as `placementTimeout`.
    UserOutcome { user: String, outcome: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub default_latency_ms: f64,
    #[serde(default)]
    pub local_latency_ms: f64,
    #[serde(default)]
    pub jitter_ms: f64,
    pub game_of_life_tasks: Option<usize>,
    #[serde(default)]
    pub hosts: BTreeMap<String, HostSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub partitions: Vec<(String, String)>,
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub workload: Vec<WorkloadStep>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
    /// Keep running (background timers included) at least this long.
    pub run_until_ms: Option<f64>,
    pub event_budget: Option<u64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("component `{0}` is on undefined host `{1}`")]
    UnknownHost(String, String),
    #[error("`{0}` refers to unknown component `{1}`")]
    UnknownComponent(String, String),
    #[error("component name `{0}` is used twice")]
    DuplicateName(String),
    #[error("negative latency {0}")]
    NegativeLatency(f64),
    #[error("component `{0}` has no role")]
    MissingRole(String),
    #[error("cannot start `{0}`: {1}")]
    Start(String, String),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    fn all_components(&self) -> impl Iterator<Item = (&ComponentSpec, ComponentRole)> {
        let initial = self.components.iter().map(|c| (c, c.role));
        let later = self.workload.iter().filter_map(|w| match w {
            WorkloadStep::Start { component, .. } => Some((component, Some(component.role.unwrap_or(ComponentRole::User)))),
            _ => None,
        });
        initial
            .chain(later)
            .map(|(c, r)| (c, r.unwrap_or(ComponentRole::User)))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for c in &self.components {
            if c.role.is_none() {
                return Err(ScenarioError::MissingRole(c.name.clone()));
            }
        }
        let mut names = BTreeSet::new();
        for (c, _) in self.all_components() {
            if !names.insert(c.name.as_str()) {
                return Err(ScenarioError::DuplicateName(c.name.clone()));
            }
            if !self.hosts.contains_key(&c.host) {
                return Err(ScenarioError::UnknownHost(c.name.clone(), c.host.clone()));
            }
        }
        for (c, _) in self.all_components() {
            let refs = c.master.iter().chain(&c.remote_logger).chain(&c.peers);
            for r in refs {
                if !names.contains(r.as_str()) {
                    return Err(ScenarioError::UnknownComponent(c.name.clone(), r.clone()));
                }
            }
        }
        let host_refs = self
            .links
            .iter()
            .map(|l| (&l.a, &l.b))
            .chain(self.partitions.iter().map(|(a, b)| (a, b)))
            .chain(self.workload.iter().filter_map(|w| match w {
                WorkloadStep::Partition { a, b, .. } | WorkloadStep::Heal { a, b, .. } => Some((a, b)),
                _ => None,
            }));
        for (a, b) in host_refs {
            for h in [a, b] {
                if !self.hosts.contains_key(h) {
                    return Err(ScenarioError::UnknownHost("link".into(), h.clone()));
                }
            }
        }
        for w in &self.workload {
            if let WorkloadStep::SetHost { host, .. } = w {
                if !self.hosts.contains_key(host) {
                    return Err(ScenarioError::UnknownHost("setHost".into(), host.clone()));
                }
            }
        }
        let latencies = self.links.iter().map(|l| l.latency_ms);
        for l in latencies.chain([self.default_latency_ms, self.local_latency_ms, self.jitter_ms]) {
            if !(l >= 0.0) {
                return Err(ScenarioError::NegativeLatency(l));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AssertionResult {
    pub assertion: Assertion,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct UserReport {
    pub name: String,
    pub phase: UserPhase,
    pub error: Option<UserError>,
    pub redirects: u32,
    pub results: Vec<DataRecord>,
    pub response_time: ResponseTimeStats,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MasterReport {
    pub name: String,
    pub endpoint: Endpoint,
    pub actors: Vec<Endpoint>,
    pub decisions: Vec<Decision>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub passed: bool,
    pub virtual_time_ms: f64,
    pub stats: SimStats,
    pub budget_exhausted: bool,
    pub violations: Vec<String>,
    pub message_counts: BTreeMap<String, usize>,
    pub masters: Vec<MasterReport>,
    pub users: Vec<UserReport>,
    pub assertions: Vec<AssertionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEntry>>,
}

/// A scenario's world after it ran, for further inspection.
pub struct Outcome {
    pub world: SimWorld,
    pub report: Report,
    /// Component name to endpoint.
    pub endpoints: BTreeMap<String, Endpoint>,
}

impl Outcome {
    pub fn trace(&self) -> &[TraceEntry] {
        self.world.trace()
    }

    pub fn get<T: Component + 'static>(&self, name: &str) -> Option<&T> {
        self.world.get::<T>(self.endpoints.get(name)?)
    }

    pub fn user(&self, name: &str) -> Option<&UserReport> {
        self.report.users.iter().find(|u| u.name == name)
    }
}

struct Builder<'a> {
    scenario: &'a Scenario,
    apps: Arc<ApplicationCatalog>,
    tasks: Arc<TaskRegistry>,
    plan: PortPlan,
    endpoints: BTreeMap<String, Endpoint>,
    roles: BTreeMap<String, ComponentRole>,
}

impl Builder<'_> {
    /// Picks an endpoint without starting anything, so components can refer
    /// to each other regardless of order.
    fn reserve(&mut self, world: &SimWorld, c: &ComponentSpec, role: ComponentRole) -> Result<Endpoint, ScenarioError> {
        let taken: BTreeSet<&Endpoint> = self.endpoints.values().collect();
        let ep = match c.port {
            Some(p) => Endpoint::new(c.host.as_str(), p).ok(),
            None => self
                .plan
                .range(role)
                .iter()
                .filter_map(|p| Endpoint::new(c.host.as_str(), p).ok())
                .find(|ep| !taken.contains(ep) && !world.is_running(ep)),
        };
        let ep = ep
            .filter(|ep| !taken.contains(ep))
            .ok_or_else(|| ScenarioError::Start(c.name.clone(), "no free port".into()))?;
        self.endpoints.insert(c.name.clone(), ep.clone());
        self.roles.insert(c.name.clone(), role);
        Ok(ep)
    }

    fn endpoint(&self, name: &Option<String>) -> Option<Endpoint> {
        name.as_ref().and_then(|n| self.endpoints.get(n).cloned())
    }

    fn master_config(&self, c: &ComponentSpec) -> MasterConfig {
        let d = MasterConfig::default();
        MasterConfig {
            scheduler_name: c.scheduler.clone().unwrap_or(d.scheduler_name),
            scheduler: SchedulerConfig {
                seed: self.scenario.seed,
                ..SchedulerConfig::default()
            },
            queue_capacity: c.queue_capacity.unwrap_or(d.queue_capacity),
            cpu_threshold: c.cpu_threshold.unwrap_or(d.cpu_threshold),
            cool_off_ms: c.cool_off_ms.unwrap_or(d.cool_off_ms),
            profile_interval_ms: c.profile_interval_ms.unwrap_or(d.profile_interval_ms),
            discovery_interval_ms: c.discovery_interval_ms.unwrap_or(d.discovery_interval_ms),
            discovery_targets: c.discovery_targets.clone(),
            remote_logger: self.endpoint(&c.remote_logger),
            link_latency_ms: self.scenario.default_latency_ms,
            port_plan: self.plan.clone(),
            creator: None,
            peers: c.peers.iter().filter_map(|p| self.endpoints.get(p).cloned()).collect(),
            apps: self.apps.clone(),
            tasks: self.tasks.clone(),
        }
    }

    fn factory(&self, c: &ComponentSpec, role: ComponentRole) -> Result<Factory, ScenarioError> {
        let host = c.host.clone();
        Ok(match role {
            ComponentRole::RemoteLogger => Box::new(move |ep| Box::new(RemoteLogger::new(host, ep, Box::new(MemoryStore::new())))),
            ComponentRole::Master => {
                let cfg = self.master_config(c);
                // Fail now rather than inside the world.
                Master::new(host.clone(), Endpoint::new("0.0.0.0", 1).unwrap(), cfg.clone())
                    .map_err(|e| ScenarioError::Start(c.name.clone(), e.to_string()))?;
                Box::new(move |ep| Box::new(Master::new(host, ep, cfg).expect("validated above")))
            }
            ComponentRole::Actor => {
                let d = ActorConfig::default();
                let mut new_master = self.master_config(c);
                new_master.discovery_targets.clear();
                let cfg = ActorConfig {
                    master: self.endpoint(&c.master),
                    remote_logger: self.endpoint(&c.remote_logger),
                    profile_interval_ms: c.profile_interval_ms.unwrap_or(d.profile_interval_ms),
                    cool_off_ms: c.cool_off_ms.unwrap_or(d.cool_off_ms),
                    new_master,
                    apps: self.apps.clone(),
                    tasks: self.tasks.clone(),
                    ..d
                };
                Box::new(move |ep| Box::new(Actor::new(host, ep, cfg)))
            }
            ComponentRole::User => {
                let master = self
                    .endpoint(&c.master)
                    .ok_or_else(|| ScenarioError::Start(c.name.clone(), "a user needs a master".into()))?;
                let mut cfg = UserConfig::new(master, c.application_name.clone().unwrap_or_default());
                cfg.label = c.label.clone().unwrap_or_default();
                cfg.inputs = c.inputs.clone();
                if let Some(t) = c.timeout_ms {
                    cfg.timeout_ms = t;
                }
                cfg.apps = self.apps.clone();
                Box::new(move |ep| Box::new(User::new(host, ep, cfg)))
            }
            ComponentRole::TaskExecutor => {
                return Err(ScenarioError::Start(c.name.clone(), "task executors are started by actors".into()))
            }
        })
    }
}

/// Builds the cluster, replays the workload, runs to quiescence and
/// evaluates the assertions.
pub fn run(scenario: &Scenario) -> Result<Outcome, ScenarioError> {
    scenario.validate()?;
    let mut net = SimNetConfig::new(scenario.seed, scenario.default_latency_ms);
    net.local_latency_ms = scenario.local_latency_ms;
    net.jitter_ms = scenario.jitter_ms;
    for l in &scenario.links {
        net.set_latency(&l.a, &l.b, l.latency_ms);
    }
    for (a, b) in &scenario.partitions {
        net.partition(a, b);
    }
    let plan = PortPlan::default();
    let mut world = SimWorld::new(net).with_port_plan(plan.clone());
    world.set_event_budget(scenario.event_budget.unwrap_or(DEFAULT_EVENT_BUDGET));
    for (name, h) in &scenario.hosts {
        world.add_host(name.clone(), h.profile());
    }
    let apps = match scenario.game_of_life_tasks {
        Some(n) => ApplicationCatalog::builtin(n),
        None => ApplicationCatalog::builtin(DEFAULT_GAME_OF_LIFE_TASKS),
    };
    let mut b = Builder {
        scenario,
        apps: Arc::new(apps),
        tasks: Arc::new(TaskRegistry::builtin()),
        plan,
        endpoints: BTreeMap::new(),
        roles: BTreeMap::new(),
    };

    let mut initial = Vec::new();
    for c in &scenario.components {
        let role = c.role.expect("validated");
        let ep = b.reserve(&world, c, role)?;
        initial.push((c, role, ep));
    }
    for (c, role, ep) in initial {
        let factory = b.factory(c, role)?;
        world
            .add_component(&c.host, role, Some(ep.port()), factory)
            .map_err(|e| ScenarioError::Start(c.name.clone(), e.to_string()))?;
    }

    let mut steps: Vec<&WorkloadStep> = scenario.workload.iter().collect();
    steps.sort_by(|x, y| x.at_ms().total_cmp(&y.at_ms()));
    for step in steps {
        world.run_until(step.at_ms());
        match step {
            WorkloadStep::Start { component, .. } => {
                let role = component.role.unwrap_or(ComponentRole::User);
                let ep = b.reserve(&world, component, role)?;
                let factory = b.factory(component, role)?;
                world
                    .add_component(&component.host, role, Some(ep.port()), factory)
                    .map_err(|e| ScenarioError::Start(component.name.clone(), e.to_string()))?;
            }
            WorkloadStep::Partition { a, b, .. } => world.net_mut().partition(a, b),
            WorkloadStep::Heal { a, b, .. } => world.net_mut().heal(a, b),
            WorkloadStep::SetHost { host, profile, .. } => world.set_host_profile(host, profile.profile()),
        }
    }
    world.deliver_until_quiescent();
    if let Some(t) = scenario.run_until_ms {
        world.run_until(t);
        world.deliver_until_quiescent();
    }

    let report = build_report(scenario, &world, &b.endpoints, &b.roles);
    Ok(Outcome {
        world,
        report,
        endpoints: b.endpoints,
    })
}

/// Parses and runs a scenario; the report's `trace` is filled in when
/// `with_trace` is set.
pub fn run_json(text: &str, with_trace: bool) -> Result<Report, ScenarioError> {
    let scenario = Scenario::from_json(text)?;
    let mut out = run(&scenario)?;
    if with_trace {
        out.report.trace = Some(out.world.trace().to_vec());
    }
    Ok(out.report)
}

fn user_report(name: &str, u: &User) -> UserReport {
    UserReport {
        name: name.to_string(),
        phase: u.phase(),
        error: u.error().cloned(),
        redirects: u.redirects(),
        results: u.results().to_vec(),
        response_time: u.stats().clone(),
    }
}

fn build_report(
    scenario: &Scenario,
    world: &SimWorld,
    endpoints: &BTreeMap<String, Endpoint>,
    roles: &BTreeMap<String, ComponentRole>,
) -> Report {
    let mut users = Vec::new();
    let mut masters = Vec::new();
    for (name, ep) in endpoints {
        match roles[name] {
            ComponentRole::User => {
                if let Some(u) = world.get::<User>(ep) {
                    users.push(user_report(name, u));
                }
            }
            ComponentRole::Master => {
                if let Some(m) = world.get::<Master>(ep) {
                    masters.push(MasterReport {
                        name: name.clone(),
                        endpoint: ep.clone(),
                        actors: m.actor_addrs().into_iter().collect(),
                        decisions: m.decisions().to_vec(),
                    });
                }
            }
            _ => {}
        }
    }
    // Masters started by actors during the run.
    for (ep, m) in world.all::<Master>() {
        if !endpoints.values().any(|e| e == ep) {
            masters.push(MasterReport {
                name: format!("spawned@{}:{}", ep.ip(), ep.port()),
                endpoint: ep.clone(),
                actors: m.actor_addrs().into_iter().collect(),
                decisions: m.decisions().to_vec(),
            });
        }
    }
    let assertions: Vec<AssertionResult> = scenario
        .assertions
        .iter()
        .map(|a| evaluate(a, world.trace(), &users))
        .collect();
    let passed = assertions.iter().all(|a| a.passed) && !world.budget_exhausted() && world.violations().is_empty();
    Report {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        passed,
        virtual_time_ms: world.now(),
        stats: world.stats(),
        budget_exhausted: world.budget_exhausted(),
        violations: world.violations().to_vec(),
        message_counts: kind_counts(world.trace()),
        masters,
        users,
        assertions,
        trace: None,
    }
}

fn outcome_label(u: &UserReport) -> String {
    match (&u.phase, &u.error) {
        (UserPhase::Done, _) => "done".into(),
        (_, Some(e)) => {
            let v = serde_json::to_value(e).unwrap_or_default();
            v.get("error").and_then(Value::as_str).unwrap_or("failed").to_string()
        }
        (p, None) => format!("{p:?}").to_lowercase(),
    }
}

pub fn evaluate(a: &Assertion, trace: &[TraceEntry], users: &[UserReport]) -> AssertionResult {
    let (passed, detail) = match a {
        Assertion::Sequence { pattern } => {
            let ok = assert_sequence(trace, pattern);
            (ok, if ok { "pattern found".into() } else { "pattern not found in trace".into() })
        }
        Assertion::Count { pattern, equals, min, max } => {
            let n = count(trace, pattern);
            let ok = equals.is_none_or(|e| n == e) && min.is_none_or(|m| n >= m) && max.is_none_or(|m| n <= m);
            (ok, format!("{n} deliveries"))
        }
        Assertion::Result {
            user,
            index,
            key,
            equals,
            tolerance,
        } => match users.iter().find(|u| &u.name == user) {
            None => (false, format!("no user `{user}`")),
            Some(u) => match u.results.get(*index).and_then(|r| r.get(key)) {
                None => (false, format!("no `{key}` in result {index}")),
                Some(got) => {
                    let ok = match (got.as_f64(), equals.as_f64()) {
                        (Some(g), Some(e)) => (g - e).abs() <= *tolerance,
                        _ => got == equals,
                    };
                    (ok, format!("got {got}"))
                }
            },
        },
        Assertion::UserOutcome { user, outcome } => match users.iter().find(|u| &u.name == user) {
            None => (false, format!("no user `{user}`")),
            Some(u) => {
                let label = outcome_label(u);
                let ok = &label == outcome || (outcome == "failed" && u.phase == UserPhase::Failed);
                (ok, label)
            }
        },
    };
    AssertionResult {
        assertion: a.clone(),
        passed,
        detail,
    }
}

/// Scenarios shipped with the crate.
pub const BUNDLED: [(&str, &str); 7] = [
    ("empty", include_str!("../../scenarios/empty.json")),
    ("parallel-naive-formula", include_str!("../../scenarios/parallel-naive-formula.json")),
    ("reuse", include_str!("../../scenarios/reuse.json")),
    ("scaling", include_str!("../../scenarios/scaling.json")),
    ("discovery", include_str!("../../scenarios/discovery.json")),
    ("nine-host-cluster", include_str!("../../scenarios/nine-host-cluster.json")),
    ("partition", include_str!("../../scenarios/partition.json")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[cfg(test)]
mod tests;
