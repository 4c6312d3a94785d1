// SPDX-License-Identifier: Apache-2.0

//! The actor: registers its host with masters, reports resources, starts
//! task executors on command, and can start a new master for scaling.

use std::any::Any;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::json;

use crate::appmodel::{ApplicationCatalog, TaskRegistry};
use crate::master::{Master, MasterConfig};
use crate::protocol::{kinds, ComponentIdentity, ComponentRole, Endpoint, MessageEnvelope};
use crate::runtime::{answer_probe, post, Component, Env, Timer};
use crate::taskexecutor::{ExecutorSetup, TaskExecutor, DEFAULT_COOL_OFF_MS};

pub const FIRST_RETRY_MS: f64 = 500.0;
pub const MAX_RETRY_MS: f64 = 8_000.0;

/// Backoff before registration attempt `attempt + 1` (attempts count from 1).
pub fn retry_delay_ms(attempt: u32) -> f64 {
    (FIRST_RETRY_MS * 2f64.powi(attempt.saturating_sub(1).min(16) as i32)).min(MAX_RETRY_MS)
}

#[derive(Clone)]
pub struct ActorConfig {
    pub master: Option<Endpoint>,
    pub remote_logger: Option<Endpoint>,
    pub profile_interval_ms: f64,
    pub cool_off_ms: f64,
    pub lookup_retry_ms: f64,
    pub lookup_attempts: u32,
    /// Template for masters started through `initNewMaster`.
    pub new_master: MasterConfig,
    pub apps: Arc<ApplicationCatalog>,
    pub tasks: Arc<TaskRegistry>,
}

impl Default for ActorConfig {
    fn default() -> Self {
        let new_master = MasterConfig::default();
        ActorConfig {
            master: None,
            remote_logger: None,
            profile_interval_ms: crate::master::DEFAULT_PROFILE_INTERVAL_MS,
            cool_off_ms: DEFAULT_COOL_OFF_MS,
            lookup_retry_ms: 5_000.0,
            lookup_attempts: 3,
            apps: new_master.apps.clone(),
            tasks: new_master.tasks.clone(),
            new_master,
        }
    }
}

pub struct Actor {
    me: ComponentIdentity,
    cfg: ActorConfig,
    primary: Option<ComponentIdentity>,
    masters: Vec<ComponentIdentity>,
    attempts: u32,
    profiling: bool,
    executors: BTreeMap<Endpoint, String>,
    started_masters: Vec<Endpoint>,
    remote_logger: Option<ComponentIdentity>,
}

impl Actor {
    pub fn new(host_id: impl Into<String>, addr: Endpoint, cfg: ActorConfig) -> Self {
        Actor {
            me: ComponentIdentity::new(ComponentRole::Actor, host_id, addr),
            remote_logger: cfg
                .remote_logger
                .clone()
                .map(|ep| ComponentIdentity::unknown_peer(ComponentRole::RemoteLogger, ep)),
            cfg,
            primary: None,
            masters: Vec::new(),
            attempts: 0,
            profiling: false,
            executors: BTreeMap::new(),
            started_masters: Vec::new(),
        }
    }

    pub fn is_registered(&self) -> bool {
        self.primary.is_some()
    }

    pub fn primary_master(&self) -> Option<&ComponentIdentity> {
        self.primary.as_ref()
    }

    /// Every master this actor is registered with.
    pub fn masters(&self) -> &[ComponentIdentity] {
        &self.masters
    }

    /// Live executors: endpoint → task name.
    pub fn executors(&self) -> &BTreeMap<Endpoint, String> {
        &self.executors
    }

    pub fn started_masters(&self) -> &[Endpoint] {
        &self.started_masters
    }

    pub fn registration_attempts(&self) -> u32 {
        self.attempts
    }

    fn register_with(&mut self, master: &ComponentIdentity, env: &mut dyn Env) -> bool {
        let resources = env.host_profile().clamped();
        post(env, &self.me, master, kinds::REGISTER, json!({ "resources": resources }))
    }

    fn try_primary(&mut self, env: &mut dyn Env) {
        let Some(ep) = self.cfg.master.clone() else { return };
        self.attempts += 1;
        let master = ComponentIdentity::unknown_peer(ComponentRole::Master, ep);
        self.register_with(&master, env);
        // Re-sent on the timer until `registered` arrives.
        env.set_timer(retry_delay_ms(self.attempts), Timer::RegisterRetry { attempt: self.attempts });
    }

    fn profile_tick(&mut self, env: &mut dyn Env) {
        if let Some(rl) = self.remote_logger.clone() {
            let resources = env.host_profile().clamped();
            post(env, &self.me, &rl, kinds::HOST_RESOURCES, json!({ "resources": resources }));
        }
        env.set_timer(self.cfg.profile_interval_ms, Timer::ProfileTick);
    }

    fn reply_error(&self, env: &mut dyn Env, to: &ComponentIdentity, reason: &str, msg: &MessageEnvelope) {
        let data = json!({
            "reason": reason,
            "userID": msg.data.get("userID"),
            "taskName": msg.data.get("taskName"),
        });
        post(env, &self.me, to, kinds::ERROR, data);
    }

    fn run_task_executor(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        if !self.is_registered() {
            self.reply_error(env, &msg.source, "notRegistered", msg);
            return;
        }
        let task_name = msg.data_str("taskName").unwrap_or_default();
        let app_name = msg.data_str("applicationName").unwrap_or_default();
        let (Some(task), Some(app)) = (self.cfg.tasks.init_task(task_name), self.cfg.apps.get(app_name)) else {
            self.reply_error(env, &msg.source, "unknownTask", msg);
            return;
        };
        if !app.spec.contains(task_name) {
            self.reply_error(env, &msg.source, "unknownTask", msg);
            return;
        }
        let setup = ExecutorSetup {
            task,
            app: app.spec.clone(),
            user_id: msg.data_str("userID").unwrap_or_default().to_string(),
            master: msg.source.clone(),
            actor: self.me.clone(),
            host_id: self.me.host_id.clone(),
            remote_logger: self.remote_logger.clone(),
            cool_off_ms: self.cfg.cool_off_ms,
            lookup_retry_ms: self.cfg.lookup_retry_ms,
            lookup_attempts: self.cfg.lookup_attempts,
        };
        let factory = Box::new(move |addr: Endpoint| Box::new(TaskExecutor::new(setup, addr)) as Box<dyn Component>);
        match env.spawn(ComponentRole::TaskExecutor, factory) {
            Ok(ep) => {
                self.executors.insert(ep, task_name.to_string());
            }
            Err(e) => {
                log::warn!("{}: {e}", self.me.name);
                self.reply_error(env, &msg.source, "portsExhausted", msg);
            }
        }
    }

    fn init_new_master(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        if !self.is_registered() {
            self.reply_error(env, &msg.source, "notRegistered", msg);
            return;
        }
        let mut cfg = self.cfg.new_master.clone();
        cfg.creator = Some(msg.source.clone());
        let host_id = self.me.host_id.clone();
        let factory = Box::new(move |addr: Endpoint| match Master::new(host_id, addr, cfg) {
            Ok(m) => Box::new(m) as Box<dyn Component>,
            Err(e) => panic!("master template is invalid: {e}"),
        });
        match env.spawn(ComponentRole::Master, factory) {
            Ok(ep) => self.started_masters.push(ep),
            Err(e) => {
                log::warn!("{}: {e}", self.me.name);
                self.reply_error(env, &msg.source, "masterSpawnFailed", msg);
            }
        }
    }
}

impl Component for Actor {
    fn identity(&self) -> &ComponentIdentity {
        &self.me
    }

    fn start(&mut self, env: &mut dyn Env) {
        self.try_primary(env);
    }

    fn handle(&mut self, msg: MessageEnvelope, env: &mut dyn Env) {
        if msg.is_kind(kinds::PROBE_TRY) {
            answer_probe(env, &self.me, &msg);
        } else if msg.is_kind(kinds::REGISTERED) {
            if self.masters.iter().any(|m| m.addr == msg.source.addr) {
                return;
            }
            self.masters.push(msg.source.clone());
            if self.primary.is_none() {
                if let Some(id) = msg.data_str("componentID") {
                    self.me = self.me.with_component_id(id).attached_to(&msg.source);
                }
                self.primary = Some(msg.source.clone());
            }
            if !self.profiling {
                self.profiling = true;
                self.profile_tick(env);
            }
        } else if msg.is_kind(kinds::ADVERTISE_MASTER) {
            if !self.masters.iter().any(|m| m.addr == msg.source.addr) {
                self.register_with(&msg.source, env);
            }
        } else if msg.is_kind(kinds::RUN_TASK_EXECUTOR) {
            self.run_task_executor(&msg, env);
        } else if msg.is_kind(kinds::INIT_NEW_MASTER) {
            self.init_new_master(&msg, env);
        } else if msg.is_kind(kinds::EXECUTOR_EXIT) {
            self.executors.remove(&msg.source.addr);
        }
    }

    fn on_timer(&mut self, timer: Timer, env: &mut dyn Env) {
        match timer {
            Timer::RegisterRetry { attempt } if attempt == self.attempts && !self.is_registered() => self.try_primary(env),
            Timer::ProfileTick => self.profile_tick(env),
            _ => {}
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_to_cap() {
        let d: Vec<f64> = (1..=7).map(retry_delay_ms).collect();
        assert_eq!(d, [500.0, 1000.0, 2000.0, 4000.0, 8000.0, 8000.0, 8000.0]);
    }
}
