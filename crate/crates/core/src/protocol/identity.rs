// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::net::SocketAddr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The five component roles that exchange envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComponentRole {
    User,
    Master,
    Actor,
    TaskExecutor,
    RemoteLogger,
}

impl ComponentRole {
    pub const ALL: [ComponentRole; 5] = [
        ComponentRole::User,
        ComponentRole::Master,
        ComponentRole::Actor,
        ComponentRole::TaskExecutor,
        ComponentRole::RemoteLogger,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentRole::User => "User",
            ComponentRole::Master => "Master",
            ComponentRole::Actor => "Actor",
            ComponentRole::TaskExecutor => "TaskExecutor",
            ComponentRole::RemoteLogger => "RemoteLogger",
        }
    }
}

impl fmt::Display for ComponentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComponentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ComponentRole::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown component role `{s}`"))
    }
}

/// An `(ip, port)` pair. Serialized as a two-element array, `["127.0.0.1", 5000]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(String, u32)", into = "(String, u32)")]
pub struct Endpoint {
    ip: String,
    port: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("port {0} outside 1-65535")]
pub struct InvalidPort(pub u32);

impl Endpoint {
    pub fn new(ip: impl Into<String>, port: u16) -> Result<Self, InvalidPort> {
        if port == 0 {
            return Err(InvalidPort(0));
        }
        Ok(Endpoint { ip: ip.into(), port })
    }

    pub fn ip(&self) -> &str {
        &self.ip
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn socket_addr(&self) -> std::io::Result<SocketAddr> {
        use std::net::ToSocketAddrs;
        (self.ip.as_str(), self.port)
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "unresolvable address"))
    }
}

impl TryFrom<(String, u32)> for Endpoint {
    type Error = InvalidPort;

    fn try_from((ip, port): (String, u32)) -> Result<Self, Self::Error> {
        if port == 0 || port > u16::MAX as u32 {
            return Err(InvalidPort(port));
        }
        Ok(Endpoint { ip, port: port as u16 })
    }
}

impl From<Endpoint> for (String, u32) {
    fn from(e: Endpoint) -> Self {
        (e.ip, e.port as u32)
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.ip, self.port)
    }
}

/// Placeholder component id carried until a master assigns one.
pub const UNASSIGNED_ID: &str = "?";

/// Who a message comes from or goes to, with the three naming forms the
/// wire format carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentIdentity {
    pub role: ComponentRole,
    #[serde(rename = "componentID")]
    pub component_id: String,
    #[serde(rename = "hostID")]
    pub host_id: String,
    pub addr: Endpoint,
    pub name: String,
    pub name_consistent: String,
    pub name_log_printing: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IdentityError {
    #[error("nameConsistent `{found}` should be `{expected}`")]
    NameConsistent { expected: String, found: String },
    #[error("componentID `{0}` is neither `?` nor a positive integer")]
    ComponentId(String),
}

impl ComponentIdentity {
    pub fn new(role: ComponentRole, host_id: impl Into<String>, addr: Endpoint) -> Self {
        let host_id = host_id.into();
        let name = short_name(role, UNASSIGNED_ID, &addr);
        ComponentIdentity {
            role,
            component_id: UNASSIGNED_ID.to_string(),
            name_consistent: format!("{role}_{host_id}"),
            name_log_printing: name.clone(),
            name,
            host_id,
            addr,
        }
    }

    /// Identity for a peer known only by address, e.g. a probe target.
    pub fn unknown_peer(role: ComponentRole, addr: Endpoint) -> Self {
        let host = addr.ip().to_string();
        Self::new(role, host, addr)
    }

    pub fn is_registered(&self) -> bool {
        self.component_id != UNASSIGNED_ID
    }

    /// Returns a copy carrying the id a master assigned.
    pub fn with_component_id(&self, id: impl Into<String>) -> Self {
        let mut out = self.clone();
        out.component_id = id.into();
        out.name = short_name(out.role, &out.component_id, &out.addr);
        out.name_log_printing = out.name.clone();
        out
    }

    /// Appends the master's printable name, as in
    /// `Actor-2_127.0.0.1-50000_Master-?_127.0.0.1-5001`.
    pub fn attached_to(&self, master: &ComponentIdentity) -> Self {
        let mut out = self.clone();
        out.name_log_printing = format!("{}_{}", out.name, master.name);
        out
    }

    pub fn validate(&self) -> Result<(), IdentityError> {
        let expected = format!("{}_{}", self.role, self.host_id);
        if self.name_consistent != expected {
            return Err(IdentityError::NameConsistent {
                expected,
                found: self.name_consistent.clone(),
            });
        }
        if self.component_id != UNASSIGNED_ID {
            match self.component_id.parse::<u64>() {
                Ok(n) if n > 0 && !self.component_id.starts_with('0') => {}
                _ => return Err(IdentityError::ComponentId(self.component_id.clone())),
            }
        }
        Ok(())
    }
}

fn short_name(role: ComponentRole, id: &str, addr: &Endpoint) -> String {
    format!("{role}-{id}_{}-{}", addr.ip(), addr.port())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_identity_names() {
        let id = ComponentIdentity::new(
            ComponentRole::RemoteLogger,
            "HostID",
            Endpoint::new("127.0.0.1", 5000).unwrap(),
        );
        assert_eq!(id.name, "RemoteLogger-?_127.0.0.1-5000");
        assert_eq!(id.name_consistent, "RemoteLogger_HostID");
        assert!(!id.is_registered());
        id.validate().unwrap();
    }

    #[test]
    fn log_printing_name_includes_master() {
        let master = ComponentIdentity::new(ComponentRole::Master, "127.0.0.1", Endpoint::new("127.0.0.1", 5001).unwrap());
        let actor = ComponentIdentity::new(ComponentRole::Actor, "127.0.0.1", Endpoint::new("127.0.0.1", 50000).unwrap())
            .with_component_id("2")
            .attached_to(&master);
        assert_eq!(actor.name_log_printing, "Actor-2_127.0.0.1-50000_Master-?_127.0.0.1-5001");
        assert_eq!(actor.name_consistent, "Actor_127.0.0.1");
    }

    #[test]
    fn rejects_bad_ids() {
        let base = ComponentIdentity::new(ComponentRole::Actor, "h", Endpoint::new("1.2.3.4", 50000).unwrap());
        assert!(base.with_component_id("0").validate().is_err());
        assert!(base.with_component_id("abc").validate().is_err());
        assert!(base.with_component_id("12").validate().is_ok());
        let mut wrong = base.clone();
        wrong.name_consistent = "Master_h".into();
        assert!(wrong.validate().is_err());
    }

    #[test]
    fn port_zero_is_rejected() {
        assert_eq!(Endpoint::new("1.2.3.4", 0), Err(InvalidPort(0)));
        let parsed: Result<Endpoint, _> = serde_json::from_str(r#"["1.2.3.4", 70000]"#);
        assert!(parsed.is_err());
        let ok: Endpoint = serde_json::from_str(r#"["1.2.3.4", 5000]"#).unwrap();
        assert_eq!(ok.port(), 5000);
    }
}
