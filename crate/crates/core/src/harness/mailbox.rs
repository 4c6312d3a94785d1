// SPDX-License-Identifier: Apache-2.0

use std::any::Any;

use crate::protocol::{kinds, ComponentIdentity, ComponentRole, Endpoint, Kind, MessageEnvelope};
use crate::runtime::{answer_probe, Component, Env, Factory, Timer};

/// A stand-in for any role that records everything it receives. Pair it
/// with [`SimWorld::inject`](crate::transport::SimWorld::inject) to play
/// one side of a conversation by hand.
pub struct Mailbox {
    me: ComponentIdentity,
    inbox: Vec<MessageEnvelope>,
}

impl Mailbox {
    pub fn new(role: ComponentRole, addr: Endpoint) -> Self {
        Mailbox {
            me: ComponentIdentity::new(role, addr.ip().to_string(), addr),
            inbox: Vec::new(),
        }
    }

    pub fn factory(role: ComponentRole) -> Factory {
        Box::new(move |ep| Box::new(Mailbox::new(role, ep)))
    }

    pub fn inbox(&self) -> &[MessageEnvelope] {
        &self.inbox
    }

    pub fn received(&self, kind: Kind) -> Vec<&MessageEnvelope> {
        self.inbox.iter().filter(|m| m.is_kind(kind)).collect()
    }
}

impl Component for Mailbox {
    fn identity(&self) -> &ComponentIdentity {
        &self.me
    }

    fn start(&mut self, _: &mut dyn Env) {}

    fn handle(&mut self, msg: MessageEnvelope, env: &mut dyn Env) {
        if msg.is_kind(kinds::PROBE_TRY) {
            answer_probe(env, &self.me, &msg);
        }
        self.inbox.push(msg);
    }

    fn on_timer(&mut self, _: Timer, _: &mut dyn Env) {}

    fn as_any(&self) -> &dyn Any {
        self
    }
}
