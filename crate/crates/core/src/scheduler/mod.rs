// SPDX-License-Identifier: Apache-2.0

//! Placement policies behind one interface: the ranking-based greedy policy
//! and an NSGA-II search, plus master selection and scaler preparation.

mod cost;
pub(crate) mod model;
mod nsga2;
pub mod pareto;
mod ranking;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::appmodel::{ApplicationSpec, TaskRegistry};
use crate::profile::HostProfile;
use crate::protocol::ComponentIdentity;

pub use cost::{estimate_cost, Decision, LinkLatency};
pub use model::{estimate_exec_time, ExecTimeModel};
pub use nsga2::{schedule_nsga2, Nsga2Params};
pub use pareto::{crowding_distance, dominates, non_dominated_sort};
pub use ranking::{rank_application_tasks, schedule_ranking_based, tasks_assignment};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchedulerError {
    #[error("no actors available")]
    NoActors,
    #[error("host is saturated (utilization {utilization})")]
    SaturatedHost { utilization: f64 },
    #[error("invalid host profile: {0}")]
    InvalidProfile(String),
    #[error("task `{0}` is not registered")]
    UnknownTask(String),
    #[error("application graph has a cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("objective vectors differ in dimension: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// What a policy knows about one actor.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorView {
    pub host_id: String,
    pub profile: HostProfile,
}

/// Inputs to one scheduling call.
pub struct ScheduleContext<'a> {
    pub user_id: &'a str,
    pub app: &'a ApplicationSpec,
    pub tasks: &'a TaskRegistry,
    pub actors: &'a [ActorView],
    pub model: &'a ExecTimeModel,
    pub links: &'a LinkLatency,
    /// Milliseconds; used only to fill `Decision::scheduling_time`.
    pub clock: &'a dyn Fn() -> f64,
}

impl ScheduleContext<'_> {
    pub(crate) fn now(&self) -> f64 {
        (self.clock)()
    }
}

/// Estimated execution time of every task on every usable host. Hosts are
/// sorted by id; saturated hosts are dropped.
#[derive(Debug, Clone)]
pub struct EstimateTable {
    hosts: Vec<String>,
    by_task: BTreeMap<String, Vec<Option<f64>>>,
}

impl EstimateTable {
    pub fn build(ctx: &ScheduleContext<'_>) -> Result<Self, SchedulerError> {
        let mut actors: Vec<&ActorView> = ctx.actors.iter().collect();
        actors.sort_by(|a, b| a.host_id.cmp(&b.host_id));
        actors.dedup_by(|a, b| a.host_id == b.host_id);
        let mut by_task = BTreeMap::new();
        for name in ctx.app.task_names() {
            let def = ctx.tasks.get(name).ok_or_else(|| SchedulerError::UnknownTask(name.to_string()))?;
            let row = actors
                .iter()
                .map(|a| match ctx.model.estimate(def, &a.host_id, &a.profile) {
                    Ok(v) => Ok(Some(v)),
                    Err(SchedulerError::SaturatedHost { .. }) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>, _>>()?;
            by_task.insert(name.to_string(), row);
        }
        let usable: Vec<usize> = (0..actors.len())
            .filter(|&h| by_task.values().all(|row: &Vec<Option<f64>>| row[h].is_some()))
            .collect();
        if usable.is_empty() {
            return Err(SchedulerError::NoActors);
        }
        Ok(EstimateTable {
            hosts: usable.iter().map(|&h| actors[h].host_id.clone()).collect(),
            by_task: by_task
                .into_iter()
                .map(|(t, row)| (t, usable.iter().map(|&h| row[h]).collect()))
                .collect(),
        })
    }

    /// Builds a table from explicit estimates (`by_task[t][h]` for `hosts[h]`).
    pub fn from_estimates(hosts: Vec<String>, by_task: BTreeMap<String, Vec<f64>>) -> Self {
        EstimateTable {
            hosts,
            by_task: by_task
                .into_iter()
                .map(|(t, row)| (t, row.into_iter().map(Some).collect()))
                .collect(),
        }
    }

    pub fn hosts(&self) -> &[String] {
        &self.hosts
    }

    pub fn get(&self, task: &str, host: usize) -> Option<f64> {
        self.by_task.get(task).and_then(|row| row.get(host).copied().flatten())
    }

    pub fn get_by_host(&self, task: &str, host_id: &str) -> Option<f64> {
        let h = self.hosts.iter().position(|x| x == host_id)?;
        self.get(task, h)
    }

    /// Mean estimate over all usable hosts.
    pub fn mean(&self, task: &str) -> f64 {
        let vals: Vec<f64> = self.by_task.get(task).into_iter().flatten().flatten().copied().collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }

    pub fn cost(&self, placement: &BTreeMap<String, String>, spec: &ApplicationSpec, links: &LinkLatency) -> f64 {
        estimate_cost(
            placement,
            spec,
            |t, h| self.get_by_host(t, h).unwrap_or(f64::INFINITY),
            links,
        )
    }
}

/// Picks where a new master should start.
pub trait Scaler: Send {
    fn choose_host(&mut self, actors: &[ActorView]) -> Option<String>;
}

/// Chooses the actor with the lowest cpu utilization, ties by host id.
#[derive(Debug, Default, Clone)]
pub struct LeastUtilizedScaler;

impl Scaler for LeastUtilizedScaler {
    fn choose_host(&mut self, actors: &[ActorView]) -> Option<String> {
        actors
            .iter()
            .min_by(|a, b| {
                a.profile
                    .cpu
                    .utilization
                    .total_cmp(&b.profile.cpu.utilization)
                    .then_with(|| a.host_id.cmp(&b.host_id))
            })
            .map(|a| a.host_id.clone())
    }
}

/// A placement policy.
pub trait SchedulerPolicy: Send {
    fn policy_name(&self) -> &str;

    fn schedule(&mut self, ctx: &ScheduleContext<'_>) -> Result<Decision, SchedulerError>;

    /// A master the user should be sent to when this one is busy.
    fn get_best_master(&mut self, known_masters: &[ComponentIdentity]) -> Option<ComponentIdentity>;

    fn prepare_scaler(&self) -> Box<dyn Scaler> {
        Box::new(LeastUtilizedScaler)
    }
}

/// Uniform choice over `known` with the given generator; `None` when empty.
pub fn get_best_master<R: Rng>(known: &[ComponentIdentity], rng: &mut R) -> Option<ComponentIdentity> {
    if known.is_empty() {
        return None;
    }
    Some(known[rng.gen_range(0..known.len())].clone())
}

pub struct RankingBased {
    rng: ChaCha8Rng,
}

impl RankingBased {
    pub fn new(seed: u64) -> Self {
        RankingBased {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SchedulerPolicy for RankingBased {
    fn policy_name(&self) -> &str {
        "RankingBased"
    }

    fn schedule(&mut self, ctx: &ScheduleContext<'_>) -> Result<Decision, SchedulerError> {
        schedule_ranking_based(ctx)
    }

    fn get_best_master(&mut self, known_masters: &[ComponentIdentity]) -> Option<ComponentIdentity> {
        get_best_master(known_masters, &mut self.rng)
    }
}

pub struct Nsga2 {
    params: Nsga2Params,
    rng: ChaCha8Rng,
}

impl Nsga2 {
    pub fn new(params: Nsga2Params) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed);
        Nsga2 { params, rng }
    }

    pub fn params(&self) -> &Nsga2Params {
        &self.params
    }
}

impl SchedulerPolicy for Nsga2 {
    fn policy_name(&self) -> &str {
        "NSGA2"
    }

    fn schedule(&mut self, ctx: &ScheduleContext<'_>) -> Result<Decision, SchedulerError> {
        schedule_nsga2(ctx, &self.params)
    }

    fn get_best_master(&mut self, known_masters: &[ComponentIdentity]) -> Option<ComponentIdentity> {
        get_best_master(known_masters, &mut self.rng)
    }
}

/// Names accepted by [`init_scheduler_by_name`].
pub const POLICY_NAMES: [&str; 4] = ["OHNSGA", "NSGA2", "NSGA3", "RankingBased"];

pub enum PolicyLookup {
    Ready(Box<dyn SchedulerPolicy>),
    /// A recognised policy name without an implementation here.
    NotImplemented(&'static str),
}

impl std::fmt::Debug for PolicyLookup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyLookup::Ready(p) => write!(f, "Ready({})", p.policy_name()),
            PolicyLookup::NotImplemented(n) => write!(f, "NotImplemented({n})"),
        }
    }
}

/// Scheduler configuration shared by all policies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchedulerConfig {
    pub seed: u64,
    pub nsga2: Nsga2Params,
}

/// Resolves a policy by name. Unknown names give `None`.
pub fn init_scheduler_by_name(name: &str, config: &SchedulerConfig) -> Option<PolicyLookup> {
    match name {
        "OHNSGA" => Some(PolicyLookup::NotImplemented("OHNSGA")),
        "NSGA2" => Some(PolicyLookup::Ready(Box::new(Nsga2::new(config.nsga2.clone())))),
        "NSGA3" => Some(PolicyLookup::NotImplemented("NSGA3")),
        "RankingBased" => Some(PolicyLookup::Ready(Box::new(RankingBased::new(config.seed)))),
        _ => None,
    }
}

#[cfg(test)]
mod tests;
