// SPDX-License-Identifier: Apache-2.0

//! Wire envelope, message catalog, component identity and the JSON codec.

pub mod catalog;
mod codec;
mod envelope;
mod identity;

pub use catalog::{classify, kinds, CatalogEntry, CatalogViolation, Kind, MessageKind};
pub use codec::{decode_message, encode_message, CodecError};
pub use envelope::{measure_network_delay, MessageEnvelope, NetworkDelay, Unstamped, ELEMENTS};
pub use identity::{ComponentIdentity, ComponentRole, Endpoint, IdentityError, InvalidPort, UNASSIGNED_ID};
