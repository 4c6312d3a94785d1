// SPDX-License-Identifier: Apache-2.0

use serde_json::{json, Value};

use super::{Master, PlacementQueueEntry};
use crate::profile::HostProfile;
use crate::protocol::{kinds, ComponentIdentity, ComponentRole, MessageEnvelope};
use crate::runtime::{post, Env};

impl Master {
    /// Capacity is exhausted: send the user to a peer, or start a new
    /// master on the least-utilized actor and hold the user until it is up.
    pub(super) fn overflow(&mut self, entry: PlacementQueueEntry, env: &mut dyn Env) {
        if let Some(peer) = self.policy.get_best_master(&self.known_masters) {
            post(env, &self.me, &entry.user, kinds::REDIRECT, json!({ "master": peer }));
            return;
        }
        if self.scaling_in_flight {
            self.parked.push(entry);
            return;
        }
        let actors = self.actor_views();
        let host = self.policy.prepare_scaler().choose_host(&actors);
        let target = host.and_then(|h| self.actor_on(&h)).map(|r| r.identity.clone());
        match target {
            Some(actor) if post(env, &self.me, &actor, kinds::INIT_NEW_MASTER, json!({ "creator": self.me })) => {
                self.scaling_in_flight = true;
                self.parked.push(entry);
            }
            _ => self.send_error(env, &entry.user, "saturated", json!({})),
        }
    }

    pub(super) fn add_known_master(&mut self, peer: &ComponentIdentity) -> bool {
        if peer.addr == self.me.addr || self.known_masters.iter().any(|m| m.addr == peer.addr) {
            return false;
        }
        self.known_masters.push(peer.clone());
        true
    }

    /// A master started on our request wants our actors.
    pub(super) fn on_get_profiles(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        self.add_known_master(&msg.source);
        let actors: Vec<Value> = self
            .records
            .values()
            .filter(|r| r.identity.role == ComponentRole::Actor)
            .map(|r| json!({ "identity": r.identity, "resources": r.last_profile }))
            .collect();
        post(env, &self.me, &msg.source, kinds::PROFILES_INFO, json!({ "actors": actors }));
        self.scaling_in_flight = false;
        for entry in std::mem::take(&mut self.parked) {
            post(env, &self.me, &entry.user, kinds::REDIRECT, json!({ "master": msg.source }));
        }
    }

    /// Seeds a freshly started master with its creator's actors.
    pub(super) fn on_profiles_info(&mut self, msg: &MessageEnvelope, env: &mut dyn Env) {
        let now = env.now_ms();
        let actors = msg.data.get("actors").and_then(Value::as_array).cloned().unwrap_or_default();
        for a in actors {
            let Ok(identity) = serde_json::from_value::<ComponentIdentity>(a["identity"].clone()) else {
                continue;
            };
            let profile = serde_json::from_value::<HostProfile>(a["resources"].clone()).ok();
            self.register(&identity, profile, now);
            post(env, &self.me, &identity, kinds::ADVERTISE_MASTER, json!({}));
        }
        self.seeding = false;
        for held in std::mem::take(&mut self.held) {
            crate::runtime::Component::handle(self, held, env);
        }
    }
}
