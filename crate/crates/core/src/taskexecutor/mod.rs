// SPDX-License-Identifier: Apache-2.0

//! One task of one application: registers, resolves where its children
//! live, runs the task on every complete input and passes results on.

mod lifecycle;

pub use lifecycle::{is_legal, ExecState, Lifecycle, LifecycleEvent, Rejected, LEGAL};

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde_json::{json, Value};

use crate::appmodel::{ApplicationSpec, DataRecord, TaskDefinition, SENSOR};
use crate::protocol::{kinds, ComponentIdentity, ComponentRole, Endpoint, MessageEnvelope};
use crate::runtime::{answer_probe, post, Component, Env, Timer};

pub const DEFAULT_COOL_OFF_MS: f64 = 10_000.0;

/// Everything an actor hands a new executor.
#[derive(Debug, Clone)]
pub struct ExecutorSetup {
    pub task: TaskDefinition,
    pub app: ApplicationSpec,
    pub user_id: String,
    pub master: ComponentIdentity,
    pub actor: ComponentIdentity,
    pub host_id: String,
    pub remote_logger: Option<ComponentIdentity>,
    /// Used when the master's wait message names no duration.
    pub cool_off_ms: f64,
    pub lookup_retry_ms: f64,
    pub lookup_attempts: u32,
}

#[derive(Debug, Default)]
struct Pending {
    from: BTreeSet<String>,
    record: DataRecord,
    trace: Vec<Value>,
}

pub struct TaskExecutor {
    me: ComponentIdentity,
    setup: ExecutorSetup,
    life: Lifecycle,
    children: BTreeMap<String, ComponentIdentity>,
    awaiting_lookup: bool,
    lookup_epoch: u64,
    inputs: BTreeMap<String, Pending>,
    durations: Vec<f64>,
    transitions: Vec<(ExecState, ExecState)>,
    users_served: Vec<String>,
}

impl TaskExecutor {
    pub fn new(setup: ExecutorSetup, addr: Endpoint) -> Self {
        let me = ComponentIdentity::new(ComponentRole::TaskExecutor, setup.host_id.clone(), addr);
        TaskExecutor {
            life: Lifecycle::new(setup.user_id.clone()),
            users_served: vec![setup.user_id.clone()],
            me,
            setup,
            children: BTreeMap::new(),
            awaiting_lookup: false,
            lookup_epoch: 0,
            inputs: BTreeMap::new(),
            durations: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn task_name(&self) -> &str {
        &self.setup.task.task_name
    }

    pub fn state(&self) -> ExecState {
        self.life.state()
    }

    pub fn served_user(&self) -> Option<&str> {
        self.life.served_user()
    }

    /// Every user this executor has been bound to, in order.
    pub fn users_served(&self) -> &[String] {
        &self.users_served
    }

    pub fn transitions(&self) -> &[(ExecState, ExecState)] {
        &self.transitions
    }

    fn step(&mut self, event: LifecycleEvent) -> bool {
        match self.life.apply(event) {
            Ok(steps) => {
                self.transitions.extend(steps);
                true
            }
            Err(e) => {
                log::debug!("{}: {e}", self.me.name);
                false
            }
        }
    }

    fn task_children(&self) -> Vec<String> {
        self.setup
            .app
            .task_children(&self.setup.task.task_name)
            .into_iter()
            .map(String::from)
            .collect()
    }

    fn resolve_children(&mut self, env: &mut dyn Env) {
        if self.task_children().is_empty() {
            self.step(LifecycleEvent::ChildrenResolved);
            self.send_ready(env);
        } else {
            self.awaiting_lookup = true;
            self.lookup_epoch += 1;
            self.send_lookup(env, 1);
        }
    }

    fn send_lookup(&mut self, env: &mut dyn Env, attempt: u32) {
        let data = json!({ "taskName": self.task_name(), "userID": self.served_user() });
        post(env, &self.me, &self.setup.master, kinds::LOOKUP, data);
        env.set_timer(
            self.setup.lookup_retry_ms,
            Timer::LookupRetry {
                epoch: self.lookup_epoch,
                attempt,
            },
        );
    }

    fn send_ready(&self, env: &mut dyn Env) {
        let data = json!({ "taskName": self.task_name(), "userID": self.served_user() });
        post(env, &self.me, &self.setup.master, kinds::READY, data);
    }

    fn report_error(&self, env: &mut dyn Env, data_id: Option<&Value>, reason: String) {
        let data = json!({
            "userID": self.served_user(),
            "taskName": self.task_name(),
            "dataID": data_id,
            "reason": reason,
        });
        post(env, &self.me, &self.setup.master, kinds::ERROR, data);
    }

    fn exit(&mut self, env: &mut dyn Env) {
        let data = json!({
            "taskName": self.task_name(),
            "applicationName": self.setup.app.name,
            "hostID": self.setup.host_id,
        });
        let actor = self.setup.actor.clone();
        post(env, &self.me, &actor, kinds::EXECUTOR_EXIT, data.clone());
        post(env, &self.me, &self.setup.master, kinds::EXECUTOR_EXIT, data);
        env.terminate();
    }

    fn flush_durations(&mut self, env: &mut dyn Env) {
        let Some(rl) = self.setup.remote_logger.clone() else {
            self.durations.clear();
            return;
        };
        if self.durations.is_empty() {
            return;
        }
        let data = json!({
            "taskName": self.task_name(),
            "applicationName": self.setup.app.name,
            "hostID": self.setup.host_id,
            "durations": std::mem::take(&mut self.durations),
        });
        post(env, &self.me, &rl, kinds::EXECUTION_DURATION, data);
    }

    fn on_input(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        let user = msg.data_str("userID").unwrap_or_default().to_string();
        let data_id = msg.data.get("dataID").cloned().unwrap_or(Value::Null);
        if !self.step(LifecycleEvent::Data { user_id: user }) {
            self.report_error(env, Some(&data_id), format!("input rejected in state {:?}", self.state()));
            return;
        }
        let source = msg.data_str("sourceTask").unwrap_or(SENSOR).to_string();
        let payload: DataRecord = msg
            .data
            .get("payload")
            .and_then(Value::as_object)
            .cloned()
            .map(DataRecord::from)
            .unwrap_or_default();
        let key = data_id.to_string();
        let pending = self.inputs.entry(key.clone()).or_default();
        if let Err(e) = pending.record.merge(&payload) {
            self.inputs.remove(&key);
            self.report_error(env, Some(&data_id), e.to_string());
            return;
        }
        if let Some(Value::Array(steps)) = msg.data.get("trace") {
            for s in steps {
                if !pending.trace.contains(s) {
                    pending.trace.push(s.clone());
                }
            }
        }
        pending.from.insert(source);
        let parents = self
            .setup
            .app
            .dependency(&self.setup.task.task_name)
            .map(|d| d.parents.clone())
            .unwrap_or_default();
        if !parents.iter().all(|p| pending.from.contains(p)) {
            return;
        }
        let pending = self.inputs.remove(&key).unwrap_or_default();
        self.run(data_id, pending, env);
    }

    fn run(&mut self, data_id: Value, input: Pending, env: &mut dyn Env) {
        let started = Instant::now();
        let result = self.setup.task.exec(input.record);
        let wall_ms = started.elapsed().as_secs_f64() * 1000.0;
        let took = env.charge_compute(self.setup.task.work, wall_ms);
        self.durations.push(took);
        let output = match result {
            Ok(Some(out)) => out,
            Ok(None) => return,
            Err(e) => {
                self.report_error(env, Some(&data_id), e.to_string());
                return;
            }
        };
        let mut trace = input.trace;
        trace.push(json!([self.task_name(), self.setup.host_id, took]));
        let user_id = self.served_user().map(String::from);
        for child in self.task_children() {
            let Some(dst) = self.children.get(&child).cloned() else {
                self.report_error(env, Some(&data_id), format!("no address for child {child}"));
                continue;
            };
            let data = json!({
                "dataID": data_id,
                "userID": user_id,
                "sourceTask": self.task_name(),
                "payload": output,
                "trace": trace,
            });
            post(env, &self.me, &dst, kinds::INTERMEDIATE_DATA, data);
        }
        if self.setup.app.feeds_actuator(&self.setup.task.task_name) {
            let data = json!({
                "dataID": data_id,
                "userID": user_id,
                "taskName": self.task_name(),
                "payload": output,
                "trace": trace,
            });
            post(env, &self.me, &self.setup.master, kinds::FINAL_RESULT, data);
        }
    }
}

impl Component for TaskExecutor {
    fn identity(&self) -> &ComponentIdentity {
        &self.me
    }

    fn start(&mut self, env: &mut dyn Env) {
        let data = json!({
            "taskName": self.task_name(),
            "userID": self.setup.user_id,
            "applicationName": self.setup.app.name,
            "hostID": self.setup.host_id,
        });
        if !post(env, &self.me, &self.setup.master, kinds::REGISTER, data) {
            log::warn!("{}: master unreachable, exiting", self.me.name);
            self.exit(env);
        }
    }

    fn handle(&mut self, msg: MessageEnvelope, env: &mut dyn Env) {
        if msg.is_kind(kinds::PROBE_TRY) {
            answer_probe(env, &self.me, &msg);
        } else if msg.is_kind(kinds::REGISTERED) {
            if let Some(id) = msg.data_str("componentID") {
                self.me = self.me.with_component_id(id).attached_to(&msg.source);
            }
            self.setup.master = msg.source.clone();
            if self.step(LifecycleEvent::Registered) {
                self.resolve_children(env);
            }
        } else if msg.is_kind(kinds::LOOKUP) {
            if !self.awaiting_lookup {
                return;
            }
            let found: BTreeMap<String, ComponentIdentity> = msg
                .data
                .get("children")
                .cloned()
                .and_then(|v| serde_json::from_value(v).ok())
                .unwrap_or_default();
            self.children = found;
            self.awaiting_lookup = false;
            self.lookup_epoch += 1;
            self.step(LifecycleEvent::ChildrenResolved);
            self.send_ready(env);
        } else if msg.is_kind(kinds::INTERMEDIATE_DATA) {
            self.on_input(&msg, env);
        } else if msg.is_kind(kinds::STOP) {
            if !self.step(LifecycleEvent::Stop) {
                return;
            }
            self.inputs.clear();
            self.flush_durations(env);
            match self.state() {
                ExecState::AskingToWait => {
                    let data = json!({ "taskName": self.task_name(), "userID": self.served_user() });
                    post(env, &self.me, &self.setup.master, kinds::WAITING, data);
                }
                ExecState::Terminated => self.exit(env),
                _ => {}
            }
        } else if msg.is_kind(kinds::WAIT) {
            let cool_off = msg
                .data
                .get("coolOffMs")
                .and_then(Value::as_f64)
                .unwrap_or(self.setup.cool_off_ms);
            let deadline = env.now_ms() + cool_off;
            if self.step(LifecycleEvent::WaitGranted { deadline }) {
                env.set_timer(cool_off, Timer::CoolOffDeadline { epoch: self.life.epoch() });
            }
        } else if msg.is_kind(kinds::REUSE) {
            let user = msg.data_str("userID").unwrap_or_default().to_string();
            if self.step(LifecycleEvent::Reuse { user_id: user.clone() }) {
                self.users_served.push(user);
                self.setup.master = msg.source.clone();
                self.inputs.clear();
                self.children.clear();
                self.resolve_children(env);
            }
        }
    }

    fn on_timer(&mut self, timer: Timer, env: &mut dyn Env) {
        match timer {
            Timer::CoolOffDeadline { epoch } => {
                self.step(LifecycleEvent::Deadline { epoch });
                if self.state() == ExecState::Terminated {
                    self.exit(env);
                }
            }
            Timer::LookupRetry { epoch, attempt } if epoch == self.lookup_epoch && self.awaiting_lookup => {
                if attempt >= self.setup.lookup_attempts {
                    self.awaiting_lookup = false;
                    self.report_error(env, None, "children lookup timed out".into());
                } else {
                    self.send_lookup(env, attempt + 1);
                }
            }
            _ => {}
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
