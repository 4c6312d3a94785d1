// SPDX-License-Identifier: Apache-2.0

use serde_json::Value;

use super::catalog::{self, CatalogViolation};
use super::envelope::{MessageEnvelope, ELEMENTS};
use super::identity::IdentityError;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("malformed message: {0}")]
    Parse(String),
    #[error("message is missing elements {missing:?}")]
    Missing { missing: Vec<&'static str> },
    #[error("message has unexpected top-level elements {0:?}")]
    Unexpected(Vec<String>),
    #[error("invalid element: {0}")]
    Schema(String),
    #[error("invalid identity: {0}")]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Catalog(#[from] CatalogViolation),
}

/// Encodes an envelope as one JSON document with sorted keys.
pub fn encode_message(envelope: &MessageEnvelope) -> Result<Vec<u8>, CodecError> {
    catalog::check(&envelope.kind(), envelope.source.role, envelope.destination.role)?;
    // `Value` objects are BTreeMap-backed, which yields canonical key order.
    let value = serde_json::to_value(envelope).map_err(|e| CodecError::Schema(e.to_string()))?;
    serde_json::to_vec(&value).map_err(|e| CodecError::Schema(e.to_string()))
}

pub fn decode_message(raw: &[u8]) -> Result<MessageEnvelope, CodecError> {
    let text = std::str::from_utf8(raw).map_err(|e| CodecError::Parse(e.to_string()))?;
    let value: Value = serde_json::from_str(text).map_err(|e| CodecError::Parse(e.to_string()))?;
    let Value::Object(map) = &value else {
        return Err(CodecError::Parse("top level is not an object".into()));
    };
    let missing: Vec<&'static str> = ELEMENTS.iter().copied().filter(|k| !map.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(CodecError::Missing { missing });
    }
    let unexpected: Vec<String> = map
        .keys()
        .filter(|k| !ELEMENTS.contains(&k.as_str()))
        .cloned()
        .collect();
    if !unexpected.is_empty() {
        return Err(CodecError::Unexpected(unexpected));
    }
    let envelope: MessageEnvelope = serde_json::from_value(value).map_err(|e| CodecError::Schema(e.to_string()))?;
    envelope.source.validate()?;
    envelope.destination.validate()?;
    catalog::check(&envelope.kind(), envelope.source.role, envelope.destination.role)?;
    Ok(envelope)
}
