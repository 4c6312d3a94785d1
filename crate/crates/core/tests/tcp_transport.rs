// SPDX-License-Identifier: Apache-2.0

use std::sync::mpsc;
use std::time::Duration;

use fogbus::ports::PortRange;
use fogbus::profile::HostProfile;
use fogbus::protocol::{kinds, ComponentIdentity, ComponentRole, Endpoint, MessageEnvelope, MessageKind};
use fogbus::runtime::TransportError;
use fogbus::transport::frame::{encode_frame, read_frame};
use fogbus::transport::{listen, send, send_raw};
use serde_json::{json, Map, Value};

const RANGE: PortRange = PortRange::new(42000, 42099);

fn ep(port: u16) -> Endpoint {
    Endpoint::new("127.0.0.1", port).unwrap()
}

fn log_message(to: &Endpoint, i: u64) -> MessageEnvelope {
    let src = ComponentIdentity::new(ComponentRole::Actor, "127.0.0.1", ep(50000));
    let dst = ComponentIdentity::unknown_peer(ComponentRole::RemoteLogger, to.clone());
    let mut data = Map::new();
    data.insert("resources".into(), serde_json::to_value(HostProfile::reference()).unwrap());
    data.insert("i".into(), json!(i));
    MessageEnvelope::new(src, dst, &MessageKind::from(kinds::HOST_RESOURCES), data)
}

#[test]
fn one_send_one_delivery_with_stamps() {
    let (tx, rx) = mpsc::channel();
    let l = listen(&ep(42001), RANGE, move |m| tx.send(m).unwrap()).unwrap();
    send(log_message(l.endpoint(), 0)).unwrap();
    let got = rx.recv_timeout(Duration::from_secs(5)).unwrap();
    assert!(got.sent_at_source_timestamp > 0.0);
    assert!(got.received_at_local_timestamp > 0.0);
    assert!(rx.recv_timeout(Duration::from_millis(200)).is_err(), "exactly one");
}

#[test]
fn sends_arrive_in_order() {
    let (tx, rx) = mpsc::channel();
    let l = listen(&ep(42002), RANGE, move |m| tx.send(m).unwrap()).unwrap();
    for i in 0..50 {
        send(log_message(l.endpoint(), i)).unwrap();
    }
    let order: Vec<u64> = (0..50)
        .map(|_| rx.recv_timeout(Duration::from_secs(5)).unwrap().data["i"].as_u64().unwrap())
        .collect();
    assert_eq!(order, (0..50).collect::<Vec<_>>());
}

#[test]
fn bind_errors() {
    let _l = listen(&ep(42003), RANGE, |_| {}).unwrap();
    assert!(matches!(listen(&ep(42003), RANGE, |_| {}), Err(TransportError::Bind(..))));
    assert!(matches!(
        listen(&ep(42200), RANGE, |_| {}),
        Err(TransportError::OutOfRange { port: 42200, .. })
    ));
    // port 0 cannot even be named as an endpoint
    assert!(Endpoint::new("127.0.0.1", 0).is_err());
}

#[test]
fn unreachable_destination() {
    let err = send(log_message(&ep(42098), 0)).unwrap_err();
    assert!(matches!(err, TransportError::Unreachable(_)));
}

#[test]
fn wire_is_a_length_prefix_and_one_json_document() {
    let msg = log_message(&ep(42004), 7);
    let frame = encode_frame(&msg).unwrap();
    let len = u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize;
    assert_eq!(len, frame.len() - 4);
    let doc: Value = serde_json::from_slice(&frame[4..]).unwrap();
    assert_eq!(doc["type"], "log");
    assert_eq!(doc["subType"], "hostResources");
    let mut r = std::io::Cursor::new(frame.clone());
    assert_eq!(read_frame(&mut r).unwrap().unwrap(), frame[4..].to_vec());
}

#[test]
fn malformed_frames_are_dropped_and_the_listener_survives() {
    let (tx, rx) = mpsc::channel();
    let l = listen(&ep(42005), RANGE, move |m| tx.send(m).unwrap()).unwrap();
    send_raw(l.endpoint(), b"{not json").unwrap();
    send_raw(l.endpoint(), br#"{"type":"log"}"#).unwrap();
    send(log_message(l.endpoint(), 3)).unwrap();
    let got = rx.recv_timeout(Duration::from_secs(5)).unwrap();
    assert_eq!(got.data["i"], 3);
}
