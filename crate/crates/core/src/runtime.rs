// SPDX-License-Identifier: Apache-2.0

//! The contract between components and whatever drives them.
//!
//! Components are plain state machines. They never touch sockets or clocks
//! directly; everything goes through [`Env`], which the TCP runtime and the
//! simulated world both implement.

use std::any::Any;

use serde_json::{Map, Value};

use crate::ports::PortRange;
use crate::profile::HostProfile;
use crate::protocol::{CodecError, ComponentIdentity, ComponentRole, Endpoint, Kind, MessageEnvelope, MessageKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Timer {
    /// Periodic resource report.
    ProfileTick,
    /// Periodic probe of the configured discovery targets.
    DiscoveryTick,
    RegisterRetry { attempt: u32 },
    CoolOffDeadline { epoch: u64 },
    LookupRetry { epoch: u64, attempt: u32 },
    /// A user's per-phase deadline.
    Timeout { token: u64 },
}

impl Timer {
    /// Background timers recur forever; the simulator does not wait for them
    /// when deciding that a run has gone quiet.
    pub fn is_background(&self) -> bool {
        matches!(self, Timer::ProfileTick | Timer::DiscoveryTick)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("{0} is unreachable")]
    Unreachable(Endpoint),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("frame of {0} bytes exceeds the limit")]
    FrameTooLarge(usize),
    #[error("port {port} is outside {range}")]
    OutOfRange { port: u16, range: PortRange },
    #[error("cannot bind {0}: {1}")]
    Bind(Endpoint, String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpawnError {
    #[error("no free port in {range} for {role}")]
    PortsExhausted { role: ComponentRole, range: PortRange },
    #[error("spawn failed: {0}")]
    Failed(String),
}

pub type Factory = Box<dyn FnOnce(Endpoint) -> Box<dyn Component> + Send>;

/// What a component can ask of its runtime.
pub trait Env {
    /// Milliseconds since the epoch (virtual in simulation).
    fn now_ms(&self) -> f64;

    /// Stamps `sentAtSourceTimestamp` and delivers to `msg.destination.addr`.
    fn send(&mut self, msg: MessageEnvelope) -> Result<(), TransportError>;

    fn set_timer(&mut self, after_ms: f64, timer: Timer);

    /// Starts another component on this host, on the lowest free port of
    /// the role's range.
    fn spawn(&mut self, role: ComponentRole, factory: Factory) -> Result<Endpoint, SpawnError>;

    fn host_profile(&mut self) -> HostProfile;

    /// Accounts for `work` units of computation that took `wall_ms` of real
    /// time; returns the duration to report. The simulator charges a
    /// profile-derived cost and delays this component's later sends.
    fn charge_compute(&mut self, work: f64, wall_ms: f64) -> f64;

    /// Stops this component once the current handler returns.
    fn terminate(&mut self);
}

pub trait Component: Send {
    fn identity(&self) -> &ComponentIdentity;

    fn start(&mut self, env: &mut dyn Env);

    fn handle(&mut self, msg: MessageEnvelope, env: &mut dyn Env);

    fn on_timer(&mut self, timer: Timer, env: &mut dyn Env);

    fn as_any(&self) -> &dyn Any;
}

/// Builds and sends one message; failures are logged and reported as `false`.
pub fn post(env: &mut dyn Env, from: &ComponentIdentity, to: &ComponentIdentity, kind: Kind, data: Value) -> bool {
    let data = match data {
        Value::Object(m) => m,
        Value::Null => Map::new(),
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    };
    let msg = MessageEnvelope::new(from.clone(), to.clone(), &MessageKind::from(kind), data);
    match env.send(msg) {
        Ok(()) => true,
        Err(e) => {
            log::debug!("{} -> {} {}/{}: {e}", from.name, to.name, kind.0, kind.1);
            false
        }
    }
}

/// Standard answer to `probe/try`.
pub fn answer_probe(env: &mut dyn Env, me: &ComponentIdentity, msg: &MessageEnvelope) {
    post(
        env,
        me,
        &msg.source,
        crate::protocol::kinds::PROBE_RESULT,
        serde_json::json!({ "role": me.role, "identity": me }),
    );
}
