// SPDX-License-Identifier: Apache-2.0

//! Builds a host-resources report, frames it the way it goes on the wire,
//! reads it back and checks it against the message catalog.

use fogbus::profile::HostProfile;
use fogbus::protocol::{catalog, kinds, ComponentIdentity, ComponentRole, Endpoint, MessageEnvelope, MessageKind};
use fogbus::transport::frame::{encode_frame, read_frame};

fn main() {
    let actor = ComponentIdentity::new(ComponentRole::Actor, "127.0.0.1", Endpoint::new("127.0.0.1", 50000).unwrap());
    let logger = ComponentIdentity::unknown_peer(ComponentRole::RemoteLogger, Endpoint::new("127.0.0.1", 5000).unwrap());
    let resources = serde_json::to_value(HostProfile::new(8, 2400.0, 0.052, 17_179_869_184, 0.075)).unwrap();
    let mut data = serde_json::Map::new();
    data.insert("resources".into(), resources);
    let mut msg = MessageEnvelope::new(actor, logger, &MessageKind::from(kinds::HOST_RESOURCES), data);
    msg.sent_at_source_timestamp = 1625572932123.89;

    let frame = encode_frame(&msg).unwrap();
    let len = u32::from_be_bytes(frame[..4].try_into().unwrap());
    println!("frame: 4-byte length prefix ({len}) + {} bytes of JSON", frame.len() - 4);
    println!("{}", std::str::from_utf8(&frame[4..]).unwrap());

    let payload = read_frame(&mut frame.as_slice()).unwrap().expect("one frame");
    let back = fogbus::protocol::decode_message(&payload).unwrap();
    assert_eq!(back, msg);
    let entry = catalog::check(&back.kind(), back.source.role, back.destination.role).unwrap();
    println!("decoded {} ({} -> {}): {}", back.kind(), back.source.role, back.destination.role, entry.description);
}
