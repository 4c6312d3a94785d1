// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::{ExecRecord, Master, Placement, PlacementQueueEntry, Slot};
use crate::profile::HostProfile;
use crate::protocol::{kinds, ComponentIdentity, ComponentRole, MessageEnvelope};
use crate::runtime::{post, Env};
use crate::scheduler::{ActorView, LinkLatency, ScheduleContext};

impl Master {
    pub(super) fn on_user_request(&mut self, msg: MessageEnvelope, env: &mut dyn Env) {
        let app = msg.data_str("applicationName").unwrap_or_default().to_string();
        if self.cfg.apps.get(&app).is_none() {
            self.send_error(env, &msg.source, "unknownApplication", json!({ "applicationName": app }));
            return;
        }
        let entry = PlacementQueueEntry {
            user: msg.source.clone(),
            application_name: app,
            label: msg.data_str("label").unwrap_or_default().to_string(),
            enqueued_at: env.now_ms(),
        };
        let busy = env.host_profile().cpu.utilization >= self.cfg.cpu_threshold;
        if busy || self.in_progress() >= self.cfg.queue_capacity {
            self.overflow(entry, env);
        } else {
            self.accept(entry, env);
        }
    }

    pub(super) fn actor_views(&self) -> Vec<ActorView> {
        self.records
            .values()
            .filter(|r| r.identity.role == ComponentRole::Actor)
            .map(|r| ActorView {
                host_id: r.identity.host_id.clone(),
                profile: r.last_profile.clone().unwrap_or_else(HostProfile::reference),
            })
            .collect()
    }

    fn accept(&mut self, mut entry: PlacementQueueEntry, env: &mut dyn Env) {
        let id = self.register(&entry.user, None, env.now_ms());
        self.reply_registered(env, &entry.user, id);
        let user_id = id.to_string();
        entry.user = entry.user.with_component_id(user_id.clone());
        let spec = self.cfg.apps.get(&entry.application_name).expect("checked").spec.clone();

        let actors = self.actor_views();
        let links = LinkLatency::uniform(self.me.host_id.clone(), self.cfg.link_latency_ms);
        let view: &dyn Env = &*env;
        let started = view.now_ms();
        let clock = move || view.now_ms() - started;
        let ctx = ScheduleContext {
            user_id: &user_id,
            app: &spec,
            tasks: &self.cfg.tasks,
            actors: &actors,
            model: &self.model,
            links: &links,
            clock: &clock,
        };
        let decision = match self.policy.schedule(&ctx) {
            Ok(d) => d,
            Err(e) => {
                self.send_error(env, &entry.user, "schedulingFailed", json!(e.to_string()));
                return;
            }
        };
        let slots = decision
            .index_to_host_id
            .iter()
            .map(|(task, host)| {
                let slot = Slot {
                    host_id: host.clone(),
                    executor: None,
                    reused: false,
                    ready: false,
                };
                (task.clone(), slot)
            })
            .collect();
        self.placements.insert(
            user_id.clone(),
            Placement {
                entry,
                slots,
                waiting_lookups: Default::default(),
                service_ready: false,
                sensory_at: BTreeMap::new(),
            },
        );
        let order = decision.index_sequence.clone();
        self.decisions.push(decision);
        for task in order {
            self.place_task(&user_id, &task, true, env);
        }
    }

    /// Binds one task, preferring a cooling executor of the same task and
    /// application (on the decided host if possible).
    fn place_task(&mut self, user_id: &str, task: &str, allow_reuse: bool, env: &mut dyn Env) {
        let Some(p) = self.placements.get(user_id) else { return };
        let app = p.entry.application_name.clone();
        let Some(host) = p.slots.get(task).map(|s| s.host_id.clone()) else { return };

        if allow_reuse {
            let candidate = self
                .executors
                .iter()
                .filter(|(_, e)| e.cooling && e.task == task && e.app == app)
                .min_by_key(|(id, e)| (e.host_id != host, id.parse::<u64>().unwrap_or(u64::MAX)))
                .map(|(id, e)| (id.clone(), e.identity.clone()));
            if let Some((eid, identity)) = candidate {
                let data = json!({ "userID": user_id, "applicationName": app, "taskName": task });
                if post(env, &self.me, &identity, kinds::REUSE, data) {
                    let exec = self.executors.get_mut(&eid).expect("listed above");
                    exec.cooling = false;
                    exec.user = Some(user_id.to_string());
                    let slot = self.slot_mut(user_id, task).expect("present above");
                    slot.executor = Some(eid);
                    slot.reused = true;
                    self.flush_lookups(user_id, env);
                    return;
                }
                self.forget_executor(&eid);
            }
        }

        let Some(actor) = self.actor_on(&host).map(|r| r.identity.clone()) else {
            let user = self.placements[user_id].entry.user.clone();
            self.send_error(env, &user, "noActor", json!({ "hostID": host, "taskName": task }));
            return;
        };
        let data = json!({ "taskName": task, "userID": user_id, "applicationName": app });
        if !post(env, &self.me, &actor, kinds::RUN_TASK_EXECUTOR, data) {
            let user = self.placements[user_id].entry.user.clone();
            self.send_error(env, &user, "actorUnreachable", json!({ "hostID": host, "taskName": task }));
        }
    }

    fn slot_mut(&mut self, user_id: &str, task: &str) -> Option<&mut Slot> {
        self.placements.get_mut(user_id)?.slots.get_mut(task)
    }

    fn forget_executor(&mut self, eid: &str) {
        self.executors.remove(eid);
        for rec in self.records.values_mut() {
            rec.hosted_executors.retain(|e| e != eid);
        }
    }

    pub(super) fn on_executor_register(&mut self, msg: MessageEnvelope, env: &mut dyn Env) {
        let task = msg.data_str("taskName").unwrap_or_default().to_string();
        let user_id = msg.data_str("userID").unwrap_or_default().to_string();
        let app = msg.data_str("applicationName").unwrap_or_default().to_string();
        let host_id = msg.data_str("hostID").unwrap_or(&msg.source.host_id).to_string();
        let id = self.register(&msg.source, None, env.now_ms());
        let eid = id.to_string();
        self.reply_registered(env, &msg.source, id);

        let bound = match self.slot_mut(&user_id, &task) {
            Some(slot) if slot.executor.is_none() => {
                slot.executor = Some(eid.clone());
                true
            }
            _ => false,
        };
        if let Some(actor_id) = self
            .records
            .iter()
            .find(|(_, r)| r.identity.role == ComponentRole::Actor && r.identity.host_id == host_id)
            .map(|(id, _)| *id)
        {
            self.records.get_mut(&actor_id).expect("found").hosted_executors.push(eid.clone());
        }
        self.executors.insert(
            eid,
            ExecRecord {
                identity: msg.source.with_component_id(id.to_string()),
                task,
                app,
                host_id,
                user: bound.then(|| user_id.clone()),
                cooling: false,
            },
        );
        if bound {
            self.flush_lookups(&user_id, env);
        }
    }

    pub(super) fn on_lookup(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        let eid = msg.source.component_id.clone();
        let Some(user) = self.executors.get(&eid).and_then(|e| e.user.clone()) else { return };
        if let Some(p) = self.placements.get_mut(&user) {
            p.waiting_lookups.insert(eid);
        }
        self.flush_lookups(&user, env);
    }

    /// Answers every deferred lookup whose children are all bound.
    fn flush_lookups(&mut self, user_id: &str, env: &mut dyn Env) {
        let Some(p) = self.placements.get(user_id) else { return };
        let spec = &self.cfg.apps.get(&p.entry.application_name).expect("known app").spec;
        let mut answered = Vec::new();
        for eid in &p.waiting_lookups {
            let Some(exec) = self.executors.get(eid) else {
                answered.push((eid.clone(), None));
                continue;
            };
            let mut children = BTreeMap::new();
            let mut complete = true;
            for child in spec.task_children(&exec.task) {
                match p.slots.get(child).and_then(|s| s.executor.as_ref()).and_then(|c| self.executors.get(c)) {
                    Some(c) => {
                        children.insert(child.to_string(), c.identity.clone());
                    }
                    None => complete = false,
                }
            }
            if complete {
                answered.push((eid.clone(), Some((exec.identity.clone(), children))));
            }
        }
        for (eid, reply) in answered {
            if let Some((to, children)) = reply {
                post(env, &self.me, &to, kinds::LOOKUP, json!({ "children": children }));
            }
            if let Some(p) = self.placements.get_mut(user_id) {
                p.waiting_lookups.remove(&eid);
            }
        }
    }

    pub(super) fn on_ready(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        let eid = msg.source.component_id.clone();
        let Some(exec) = self.executors.get(&eid) else {
            log::warn!("{}: ready from unknown executor {}", self.me.name, msg.source.name);
            return;
        };
        let identity = exec.identity.clone();
        let task = exec.task.clone();
        let Some(user_id) = exec.user.clone().filter(|u| self.placements.contains_key(u)) else {
            // Nobody to serve: let it cool off.
            post(env, &self.me, &identity, kinds::STOP, json!({}));
            return;
        };
        let p = self.placements.get_mut(&user_id).expect("filtered above");
        match p.slots.get_mut(&task) {
            Some(slot) if slot.executor.as_deref() == Some(eid.as_str()) => slot.ready = true,
            _ => return,
        }
        if !p.service_ready && p.slots.values().all(|s| s.ready) {
            p.service_ready = true;
            let user = p.entry.user.clone();
            let data = json!({ "userID": user_id, "applicationName": p.entry.application_name });
            post(env, &self.me, &user, kinds::SERVICE_READY, data);
        }
    }

    pub(super) fn on_sensory_data(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        let user_id = msg.source.component_id.clone();
        let ready = self.placements.get(&user_id).is_some_and(|p| p.service_ready);
        if !ready {
            self.send_error(env, &msg.source, "notReady", json!({ "dataID": msg.data.get("dataID") }));
            return;
        }
        let data_id = msg.data.get("dataID").cloned().unwrap_or(Value::Null);
        let now = env.now_ms();
        let p = self.placements.get_mut(&user_id).expect("checked");
        p.sensory_at.insert(data_id.to_string(), now);
        let spec = &self.cfg.apps.get(&p.entry.application_name).expect("known app").spec;
        let targets: Vec<ComponentIdentity> = spec
            .entry_tasks
            .iter()
            .filter_map(|t| p.slots.get(t)?.executor.as_ref())
            .filter_map(|e| self.executors.get(e))
            .map(|e| e.identity.clone())
            .collect();
        let payload = msg.data.get("payload").cloned().unwrap_or_else(|| json!({}));
        for to in targets {
            let data = json!({
                "dataID": data_id,
                "userID": user_id,
                "sourceTask": crate::appmodel::SENSOR,
                "payload": payload,
                "trace": [],
            });
            post(env, &self.me, &to, kinds::INTERMEDIATE_DATA, data);
        }
    }

    pub(super) fn on_final_result(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        let user_id = msg.data_str("userID").unwrap_or_default().to_string();
        let Some(p) = self.placements.get(&user_id) else {
            log::info!("{}: dropping result for departed user {user_id}", self.me.name);
            self.log_event(env, "orphanResult", json!({ "userID": user_id, "from": msg.source.name }));
            return;
        };
        let user = p.entry.user.clone();
        let app = p.entry.application_name.clone();
        let data_id = msg.data.get("dataID").cloned().unwrap_or(Value::Null);
        let sent = p.sensory_at.get(&data_id.to_string()).copied();
        post(env, &self.me, &user, kinds::FINAL_RESULT, Value::Object(msg.data.clone()));

        if let Some(Value::Array(steps)) = msg.data.get("trace") {
            for s in steps {
                if let (Some(t), Some(h), Some(ms)) = (s[0].as_str(), s[1].as_str(), s[2].as_f64()) {
                    self.model.record(t, h, ms);
                }
            }
        }
        if let Some(rl) = self.remote_logger.clone() {
            let data = json!({
                "userID": user_id,
                "applicationName": app,
                "taskName": msg.data_str("taskName"),
                "dataID": data_id,
                "responseTime": sent.map(|t| env.now_ms() - t),
            });
            post(env, &self.me, &rl, kinds::RESPONSE_TIME, data);
        }
    }

    pub(super) fn on_error(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        if msg.source.role == ComponentRole::Actor && msg.data_str("reason") == Some("masterSpawnFailed") {
            self.scaling_in_flight = false;
            for entry in std::mem::take(&mut self.parked) {
                self.send_error(env, &entry.user, "saturated", json!({}));
            }
            return;
        }
        let user_id = msg
            .data_str("userID")
            .map(String::from)
            .or_else(|| self.executors.get(&msg.source.component_id).and_then(|e| e.user.clone()));
        let Some(p) = user_id.and_then(|u| self.placements.get(&u)) else { return };
        let mut data = msg.data.clone();
        data.insert("from".into(), json!(msg.source.name));
        let user = p.entry.user.clone();
        post(env, &self.me, &user, kinds::ERROR, Value::Object(data));
    }

    pub(super) fn on_waiting(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        let eid = msg.source.component_id.clone();
        let Some(exec) = self.executors.get_mut(&eid) else { return };
        exec.user = None;
        let to = exec.identity.clone();
        if self.cfg.cool_off_ms > 0.0 {
            exec.cooling = true;
            post(env, &self.me, &to, kinds::WAIT, json!({ "coolOffMs": self.cfg.cool_off_ms }));
        } else {
            post(env, &self.me, &to, kinds::STOP, json!({}));
        }
    }

    pub(super) fn on_executor_exit(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        let eid = msg.source.component_id.clone();
        self.forget_executor(&eid);
        // A reuse that lost the race against the executor's deadline.
        let orphaned: Vec<(String, String)> = self
            .placements
            .iter()
            .flat_map(|(u, p)| {
                p.slots
                    .iter()
                    .filter(|(_, s)| s.executor.as_deref() == Some(eid.as_str()) && !s.ready)
                    .map(move |(t, _)| (u.clone(), t.clone()))
            })
            .collect();
        for (user, task) in orphaned {
            if let Some(slot) = self.slot_mut(&user, &task) {
                slot.executor = None;
                slot.reused = false;
            }
            self.place_task(&user, &task, false, env);
        }
    }

    pub(super) fn on_user_exit(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        let user_id = msg.source.component_id.clone();
        self.parked.retain(|e| e.user.addr != msg.source.addr);
        let Some(p) = self.placements.remove(&user_id) else { return };
        for slot in p.slots.values() {
            if let Some(exec) = slot.executor.as_ref().and_then(|e| self.executors.get(e)) {
                post(env, &self.me, &exec.identity, kinds::STOP, json!({}));
            }
        }
    }
}
