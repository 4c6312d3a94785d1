// SPDX-License-Identifier: Apache-2.0

//! Collects log messages from every other component into a [`LogStore`]
//! and answers masters' requests for the latest host profiles.

mod store;

pub use store::{FileStore, LogKind, LogRecord, LogStore, MemoryStore, StoreError};

use std::any::Any;
use std::collections::BTreeMap;

use serde_json::json;

use crate::profile::{HostProfile, ProfileError};
use crate::protocol::{kinds, ComponentIdentity, ComponentRole, Endpoint, MessageEnvelope};
use crate::runtime::{answer_probe, post, Component, Env, Timer};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{0}/{1} is not a loggable message")]
    NotLog(String, String),
    #[error("hostResources payload has no valid `resources`: {0}")]
    Malformed(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Validates one log envelope and appends it.
pub fn ingest(store: &mut dyn LogStore, msg: &MessageEnvelope) -> Result<LogRecord, IngestError> {
    let kind = (msg.msg_type == "log")
        .then(|| LogKind::from_sub_type(&msg.sub_type))
        .flatten()
        .ok_or_else(|| IngestError::NotLog(msg.msg_type.clone(), msg.sub_type.clone()))?;
    if kind == LogKind::HostResources {
        let profile: HostProfile = msg
            .data
            .get("resources")
            .cloned()
            .ok_or_else(|| IngestError::Malformed("missing".into()))
            .and_then(|v| serde_json::from_value(v).map_err(|e| IngestError::Malformed(e.to_string())))?;
        profile.validate()?;
    }
    let record = LogRecord {
        kind,
        source: msg.source.clone(),
        timestamp: msg.sent_at_source_timestamp,
        payload: msg.data.clone(),
    };
    store.append(record.clone())?;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("profiles are only served to masters, not to {0}")]
pub struct Refused(pub ComponentRole);

/// Latest logged profile per host id.
pub fn answer_profiles_request(
    store: &dyn LogStore,
    requester: ComponentRole,
) -> Result<BTreeMap<String, HostProfile>, Refused> {
    if requester != ComponentRole::Master {
        return Err(Refused(requester));
    }
    let mut latest = BTreeMap::new();
    let records = store.query(Some(LogKind::HostResources), &|_| true).unwrap_or_else(|e| {
        log::warn!("profile query failed: {e}");
        Vec::new()
    });
    for r in records {
        if let Some(Ok(p)) = r.payload.get("resources").cloned().map(serde_json::from_value::<HostProfile>) {
            latest.insert(r.source.host_id.clone(), p);
        }
    }
    Ok(latest)
}

pub struct RemoteLogger {
    me: ComponentIdentity,
    store: Box<dyn LogStore>,
    rejected: usize,
}

impl RemoteLogger {
    pub fn new(host_id: impl Into<String>, addr: Endpoint, store: Box<dyn LogStore>) -> Self {
        RemoteLogger {
            me: ComponentIdentity::new(ComponentRole::RemoteLogger, host_id, addr),
            store,
            rejected: 0,
        }
    }

    pub fn store(&self) -> &dyn LogStore {
        self.store.as_ref()
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }
}

impl Component for RemoteLogger {
    fn identity(&self) -> &ComponentIdentity {
        &self.me
    }

    fn start(&mut self, _env: &mut dyn Env) {}

    fn handle(&mut self, msg: MessageEnvelope, env: &mut dyn Env) {
        if msg.is_kind(kinds::PROBE_TRY) {
            answer_probe(env, &self.me, &msg);
        } else if msg.is_kind(kinds::REQUEST_PROFILES) {
            match answer_profiles_request(self.store.as_ref(), msg.source.role) {
                Ok(profiles) => {
                    post(env, &self.me, &msg.source, kinds::ALL_RESOURCES_PROFILES, json!({ "profiles": profiles }));
                }
                Err(e) => log::warn!("{e}"),
            }
        } else if msg.msg_type == "log" {
            if let Err(e) = ingest(self.store.as_mut(), &msg) {
                self.rejected += 1;
                log::warn!("rejected log from {}: {e}", msg.source.name);
            }
        }
    }

    fn on_timer(&mut self, _timer: Timer, _env: &mut dyn Env) {}

    fn as_any(&self) -> &dyn Any {
        self
    }
}
