// SPDX-License-Identifier: Apache-2.0

use serde_json::{json, Value};

use super::Master;
use crate::protocol::{kinds, ComponentIdentity, ComponentRole, Endpoint, MessageEnvelope};
use crate::runtime::{post, Env};

impl Master {
    /// Probes every configured address that is not already known, and asks
    /// known peers for their actors.
    pub(super) fn discovery_tick(&mut self, env: &mut dyn Env) {
        let known = self.actor_addrs();
        let masters: Vec<Endpoint> = self.known_masters.iter().map(|m| m.addr.clone()).collect();
        for target in self.cfg.discovery_targets.clone() {
            for port in target.ports.iter() {
                let Ok(ep) = Endpoint::new(target.ip.clone(), port) else { continue };
                if ep == self.me.addr || known.contains(&ep) || masters.contains(&ep) {
                    continue;
                }
                let Some(role) = self.cfg.port_plan.role_for_port(port) else { continue };
                let to = ComponentIdentity::unknown_peer(role, ep);
                post(env, &self.me, &to, kinds::PROBE_TRY, json!({}));
            }
        }
        for peer in self.known_masters.clone() {
            post(env, &self.me, &peer, kinds::REQUEST_ACTORS_INFO, json!({}));
        }
    }

    pub(super) fn on_probe_result(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        let identity = msg
            .data
            .get("identity")
            .cloned()
            .and_then(|v| serde_json::from_value::<ComponentIdentity>(v).ok())
            .unwrap_or_else(|| msg.source.clone());
        match identity.role {
            ComponentRole::Actor => self.advertise_to(&identity, env),
            ComponentRole::Master
                if self.add_known_master(&identity) => {
                    post(env, &self.me, &identity, kinds::REQUEST_ACTORS_INFO, json!({}));
                }
            _ => {}
        }
    }

    fn advertise_to(&mut self, actor: &ComponentIdentity, env: &mut dyn Env) {
        if self.find_record(ComponentRole::Actor, &actor.addr).is_none() {
            post(env, &self.me, actor, kinds::ADVERTISE_MASTER, json!({}));
        }
    }

    pub(super) fn on_request_actors_info(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        if self.add_known_master(&msg.source) {
            post(env, &self.me, &msg.source, kinds::REQUEST_ACTORS_INFO, json!({}));
        }
        let actors: Vec<&ComponentIdentity> = self.actors();
        let data = json!({ "actors": actors });
        post(env, &self.me, &msg.source, kinds::ACTORS_INFO, data);
    }

    pub(super) fn on_actors_info(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        self.add_known_master(&msg.source);
        let actors = msg.data.get("actors").and_then(Value::as_array).cloned().unwrap_or_default();
        for a in actors {
            if let Ok(identity) = serde_json::from_value::<ComponentIdentity>(a) {
                self.advertise_to(&identity, env);
            }
        }
    }
}
