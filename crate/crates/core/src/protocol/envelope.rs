// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::catalog::{Kind, MessageKind};
use super::identity::ComponentIdentity;

/// The eight top-level element names, in canonical (sorted) order.
pub const ELEMENTS: [&str; 8] = [
    "data",
    "destination",
    "receivedAtLocalTimestamp",
    "sentAtSourceTimestamp",
    "source",
    "subSubType",
    "subType",
    "type",
];

/// One message on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MessageEnvelope {
    pub source: ComponentIdentity,
    pub destination: ComponentIdentity,
    #[serde(rename = "type")]
    pub msg_type: String,
    pub sub_type: String,
    pub sub_sub_type: String,
    pub data: Map<String, Value>,
    /// Milliseconds since the Unix epoch, stamped by the sender.
    pub sent_at_source_timestamp: f64,
    /// Milliseconds since the Unix epoch, stamped on receipt; `0.0` before.
    pub received_at_local_timestamp: f64,
}

impl MessageEnvelope {
    pub fn new(source: ComponentIdentity, destination: ComponentIdentity, kind: &MessageKind, data: Map<String, Value>) -> Self {
        MessageEnvelope {
            source,
            destination,
            msg_type: kind.msg_type.clone(),
            sub_type: kind.sub_type.clone(),
            sub_sub_type: kind.sub_sub_type.clone(),
            data,
            sent_at_source_timestamp: 0.0,
            received_at_local_timestamp: 0.0,
        }
    }

    pub fn kind(&self) -> MessageKind {
        MessageKind::new(&self.msg_type, &self.sub_type, &self.sub_sub_type)
    }

    pub fn is(&self, msg_type: &str, sub_type: &str) -> bool {
        self.msg_type == msg_type && self.sub_type == sub_type
    }

    pub fn is_kind(&self, (t, s, ss): Kind) -> bool {
        self.msg_type == t && self.sub_type == s && self.sub_sub_type == ss
    }

    pub fn data_str(&self, key: &str) -> Option<&str> {
        self.data.get(key).and_then(Value::as_str)
    }
}

/// Network delay of one delivered envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkDelay {
    pub millis: f64,
    /// Set when the receiver's clock reads earlier than the sender's.
    pub skewed: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("envelope has no receive timestamp")]
pub struct Unstamped;

/// `received − sent`. Negative values are returned as-is and flagged.
pub fn measure_network_delay(envelope: &MessageEnvelope) -> Result<NetworkDelay, Unstamped> {
    if envelope.received_at_local_timestamp == 0.0 {
        return Err(Unstamped);
    }
    let millis = envelope.received_at_local_timestamp - envelope.sent_at_source_timestamp;
    Ok(NetworkDelay {
        millis,
        skewed: millis < 0.0,
    })
}
