// SPDX-License-Identifier: Apache-2.0

//! The user: asks a master to place an application, feeds it sensory data
//! and gathers results until each submission is complete.

use std::any::Any;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::appmodel::{Application, ApplicationCatalog, DataRecord};
use crate::protocol::{kinds, ComponentIdentity, ComponentRole, Endpoint, MessageEnvelope};
use crate::runtime::{answer_probe, post, Component, Env, Timer};

pub const DEFAULT_TIMEOUT_MS: f64 = 30_000.0;

/// Running response-time statistics, in milliseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResponseTimeStats {
    pub count: u64,
    pub mean: f64,
    pub last: f64,
    #[serde(skip)]
    sum: f64,
}

impl ResponseTimeStats {
    pub fn update(&mut self, millis: f64) {
        self.count += 1;
        self.sum += millis;
        self.last = millis;
        self.mean = self.sum / self.count as f64;
    }

    pub fn total(&self) -> f64 {
        self.sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[serde(rename_all = "camelCase", tag = "error")]
pub enum UserError {
    #[error("unknown application `{0}`")]
    UnknownApplication(String),
    #[error("no service-ready acknowledgement before the deadline")]
    PlacementTimeout,
    #[error("redirected more than once")]
    TooManyRedirects,
    #[error("master refused: {reason}")]
    Rejected { reason: String },
    #[error("submission {data_id} incomplete; missing {missing:?}; errors {errors:?}")]
    PartialResults {
        data_id: u64,
        missing: Vec<String>,
        errors: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UserPhase {
    Registering,
    AwaitingService,
    Collecting,
    Done,
    Failed,
}

#[derive(Clone)]
pub struct UserConfig {
    pub master: Endpoint,
    pub application_name: String,
    pub label: String,
    /// Submitted one after another, each once the previous completes.
    pub inputs: Vec<DataRecord>,
    pub timeout_ms: f64,
    pub exit_when_done: bool,
    pub apps: Arc<ApplicationCatalog>,
}

impl UserConfig {
    pub fn new(master: Endpoint, application_name: impl Into<String>) -> Self {
        UserConfig {
            master,
            application_name: application_name.into(),
            label: String::new(),
            inputs: Vec::new(),
            timeout_ms: DEFAULT_TIMEOUT_MS,
            exit_when_done: true,
            apps: Arc::new(ApplicationCatalog::default()),
        }
    }
}

pub struct User {
    me: ComponentIdentity,
    cfg: UserConfig,
    app: Option<Application>,
    master: ComponentIdentity,
    phase: UserPhase,
    error: Option<UserError>,
    redirects: u32,
    token: u64,
    current: usize,
    last_sent: f64,
    aggregate: DataRecord,
    arrivals: usize,
    errors: Vec<String>,
    results: Vec<DataRecord>,
    stats: ResponseTimeStats,
}

impl User {
    pub fn new(host_id: impl Into<String>, addr: Endpoint, cfg: UserConfig) -> Self {
        User {
            me: ComponentIdentity::new(ComponentRole::User, host_id, addr),
            app: cfg.apps.get(&cfg.application_name).cloned(),
            master: ComponentIdentity::unknown_peer(ComponentRole::Master, cfg.master.clone()),
            cfg,
            phase: UserPhase::Registering,
            error: None,
            redirects: 0,
            token: 0,
            current: 0,
            last_sent: 0.0,
            aggregate: DataRecord::new(),
            arrivals: 0,
            errors: Vec::new(),
            results: Vec::new(),
            stats: ResponseTimeStats::default(),
        }
    }

    pub fn phase(&self) -> UserPhase {
        self.phase
    }

    pub fn error(&self) -> Option<&UserError> {
        self.error.as_ref()
    }

    /// One aggregated record per completed submission.
    pub fn results(&self) -> &[DataRecord] {
        &self.results
    }

    pub fn stats(&self) -> &ResponseTimeStats {
        &self.stats
    }

    pub fn redirects(&self) -> u32 {
        self.redirects
    }

    pub fn master(&self) -> &ComponentIdentity {
        &self.master
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.phase, UserPhase::Done | UserPhase::Failed)
    }

    fn arm(&mut self, env: &mut dyn Env) {
        self.token += 1;
        env.set_timer(self.cfg.timeout_ms, Timer::Timeout { token: self.token });
    }

    fn request_placement(&mut self, env: &mut dyn Env) {
        let data = json!({ "applicationName": self.cfg.application_name, "label": self.cfg.label });
        post(env, &self.me, &self.master, kinds::REGISTER, data);
        self.arm(env);
    }

    fn fail(&mut self, error: UserError, env: &mut dyn Env) {
        log::warn!("{}: {error}", self.me.name);
        let placed = matches!(self.phase, UserPhase::Collecting);
        self.phase = UserPhase::Failed;
        self.error = Some(error);
        self.token += 1;
        if placed && self.cfg.exit_when_done {
            post(env, &self.me, &self.master, kinds::USER_EXIT, json!({}));
        }
    }

    fn submit_next(&mut self, env: &mut dyn Env) {
        let Some(input) = self.cfg.inputs.get(self.current).cloned() else {
            self.phase = UserPhase::Done;
            self.token += 1;
            if self.cfg.exit_when_done {
                post(env, &self.me, &self.master, kinds::USER_EXIT, json!({}));
            }
            return;
        };
        self.aggregate = DataRecord::new();
        self.arrivals = 0;
        self.errors.clear();
        self.last_sent = env.now_ms();
        let data = json!({ "dataID": self.data_id(), "payload": input });
        post(env, &self.me, &self.master, kinds::SENSORY_DATA, data);
        self.arm(env);
    }

    fn data_id(&self) -> u64 {
        self.current as u64 + 1
    }

    /// Results and errors expected per submission: one per task feeding
    /// the actuator.
    fn expected_arrivals(&self) -> usize {
        self.app
            .as_ref()
            .map(|a| a.spec.task_names().filter(|t| a.spec.feeds_actuator(t)).count())
            .unwrap_or(1)
    }

    fn for_current(&self, msg: &MessageEnvelope) -> bool {
        msg.data.get("dataID").and_then(Value::as_u64) == Some(self.data_id())
    }

    fn after_arrival(&mut self, env: &mut dyn Env) {
        let app = self.app.as_ref().expect("known before placement");
        if app.completion.is_complete(&self.aggregate) {
            self.results.push(std::mem::take(&mut self.aggregate));
            self.current += 1;
            self.submit_next(env);
        } else if self.arrivals >= self.expected_arrivals() && !self.errors.is_empty() {
            let missing = app.completion.missing(&self.aggregate);
            let error = UserError::PartialResults {
                data_id: self.data_id(),
                missing,
                errors: self.errors.clone(),
            };
            self.fail(error, env);
        }
    }
}

impl Component for User {
    fn identity(&self) -> &ComponentIdentity {
        &self.me
    }

    fn start(&mut self, env: &mut dyn Env) {
        if self.app.is_none() {
            let name = self.cfg.application_name.clone();
            self.fail(UserError::UnknownApplication(name), env);
            return;
        }
        self.request_placement(env);
    }

    fn handle(&mut self, msg: MessageEnvelope, env: &mut dyn Env) {
        if msg.is_kind(kinds::PROBE_TRY) {
            answer_probe(env, &self.me, &msg);
            return;
        }
        if self.is_finished() {
            return;
        }
        if msg.is_kind(kinds::REGISTERED) {
            if let Some(id) = msg.data_str("componentID") {
                self.me = self.me.with_component_id(id).attached_to(&msg.source);
            }
            self.master = msg.source.clone();
            self.phase = UserPhase::AwaitingService;
        } else if msg.is_kind(kinds::REDIRECT) {
            let target = msg
                .data
                .get("master")
                .cloned()
                .and_then(|v| serde_json::from_value::<ComponentIdentity>(v).ok());
            match target {
                Some(m) if self.redirects == 0 => {
                    self.redirects += 1;
                    self.master = m;
                    self.request_placement(env);
                }
                _ => self.fail(UserError::TooManyRedirects, env),
            }
        } else if msg.is_kind(kinds::SERVICE_READY) {
            if self.phase != UserPhase::Collecting {
                self.phase = UserPhase::Collecting;
                self.submit_next(env);
            }
        } else if msg.is_kind(kinds::FINAL_RESULT) {
            if self.phase != UserPhase::Collecting || !self.for_current(&msg) {
                return;
            }
            self.stats.update(env.now_ms() - self.last_sent);
            self.arrivals += 1;
            let payload: DataRecord = msg
                .data
                .get("payload")
                .and_then(Value::as_object)
                .cloned()
                .map(DataRecord::from)
                .unwrap_or_default();
            if let Err(e) = self.aggregate.merge(&payload) {
                self.errors.push(e.to_string());
            }
            self.after_arrival(env);
        } else if msg.is_kind(kinds::ERROR) {
            let reason = msg.data_str("reason").unwrap_or("error").to_string();
            if self.phase == UserPhase::Collecting {
                if self.for_current(&msg) {
                    self.arrivals += 1;
                    self.errors.push(reason);
                    self.after_arrival(env);
                } else {
                    self.errors.push(reason);
                }
            } else {
                self.fail(UserError::Rejected { reason }, env);
            }
        }
    }

    fn on_timer(&mut self, timer: Timer, env: &mut dyn Env) {
        let Timer::Timeout { token } = timer else { return };
        if token != self.token || self.is_finished() {
            return;
        }
        match self.phase {
            UserPhase::Registering | UserPhase::AwaitingService => self.fail(UserError::PlacementTimeout, env),
            UserPhase::Collecting => {
                let missing = self
                    .app
                    .as_ref()
                    .map(|a| a.completion.missing(&self.aggregate))
                    .unwrap_or_default();
                let error = UserError::PartialResults {
                    data_id: self.data_id(),
                    missing,
                    errors: self.errors.clone(),
                };
                self.fail(error, env);
            }
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
    fn stats_mean_and_count() {
        let mut s = ResponseTimeStats::default();
        for x in [3.0, 5.0, 10.0] {
            s.update(x);
        }
        assert_eq!(s.count, 3);
        assert_eq!(s.last, 10.0);
        assert!((s.mean * s.count as f64 - s.total()).abs() < 1e-9);
        assert!((s.mean - 6.0).abs() < 1e-12);
    }
}
