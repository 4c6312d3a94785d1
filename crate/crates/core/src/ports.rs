// SPDX-License-Identifier: Apache-2.0

//! Per-role port ranges.

use std::fmt;
use std::str::FromStr;

use crate::protocol::ComponentRole;

/// Inclusive range, written `FIRST-LAST` in text and JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PortRange {
    pub first: u16,
    pub last: u16,
}

impl PortRange {
    pub const fn new(first: u16, last: u16) -> Self {
        PortRange { first, last }
    }

    pub fn contains(&self, port: u16) -> bool {
        port != 0 && (self.first..=self.last).contains(&port)
    }

    pub fn iter(&self) -> impl Iterator<Item = u16> {
        self.first.max(1)..=self.last
    }
}

impl fmt::Display for PortRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.last)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid port range `{0}`, expected FIRST-LAST with 1 <= FIRST <= LAST <= 65535")]
pub struct PortRangeParseError(pub String);

impl FromStr for PortRange {
    type Err = PortRangeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || PortRangeParseError(s.to_string());
        let (a, b) = s.trim().split_once('-').ok_or_else(err)?;
        let first: u16 = a.trim().parse().map_err(|_| err())?;
        let last: u16 = b.trim().parse().map_err(|_| err())?;
        if first == 0 || first > last {
            return Err(err());
        }
        Ok(PortRange { first, last })
    }
}

impl TryFrom<String> for PortRange {
    type Error = PortRangeParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PortRange> for String {
    fn from(r: PortRange) -> String {
        r.to_string()
    }
}

/// The port range every role binds within.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortPlan {
    pub remote_logger: PortRange,
    pub master: PortRange,
    pub actor: PortRange,
    pub user: PortRange,
    pub task_executor: PortRange,
}

impl Default for PortPlan {
    fn default() -> Self {
        PortPlan {
            remote_logger: PortRange::new(5000, 5000),
            master: PortRange::new(5001, 5010),
            actor: PortRange::new(50000, 50100),
            user: PortRange::new(50101, 50200),
            task_executor: PortRange::new(50201, 60000),
        }
    }
}

impl PortPlan {
    /// Environment variable names, one per role.
    pub const ENV_VARS: [(&'static str, ComponentRole); 5] = [
        ("REMOTE_LOGGER_PORT_RANGE", ComponentRole::RemoteLogger),
        ("MASTER_PORT_RANGE", ComponentRole::Master),
        ("ACTOR_PORT_RANGE", ComponentRole::Actor),
        ("USER_PORT_RANGE", ComponentRole::User),
        ("TASK_EXECUTOR_PORT_RANGE", ComponentRole::TaskExecutor),
    ];

    pub fn range(&self, role: ComponentRole) -> PortRange {
        match role {
            ComponentRole::RemoteLogger => self.remote_logger,
            ComponentRole::Master => self.master,
            ComponentRole::Actor => self.actor,
            ComponentRole::User => self.user,
            ComponentRole::TaskExecutor => self.task_executor,
        }
    }

    pub fn range_mut(&mut self, role: ComponentRole) -> &mut PortRange {
        match role {
            ComponentRole::RemoteLogger => &mut self.remote_logger,
            ComponentRole::Master => &mut self.master,
            ComponentRole::Actor => &mut self.actor,
            ComponentRole::User => &mut self.user,
            ComponentRole::TaskExecutor => &mut self.task_executor,
        }
    }

    /// The role whose range holds `port`, if exactly one does.
    pub fn role_for_port(&self, port: u16) -> Option<ComponentRole> {
        let mut hits = ComponentRole::ALL.into_iter().filter(|r| self.range(*r).contains(port));
        let first = hits.next()?;
        hits.next().is_none().then_some(first)
    }

    /// Applies `*_PORT_RANGE` overrides read through `lookup`.
    pub fn with_overrides(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, PortRangeParseError> {
        for (var, role) in Self::ENV_VARS {
            if let Some(value) = lookup(var) {
                *self.range_mut(role) = value.parse()?;
            }
        }
        Ok(self)
    }

    pub fn from_env() -> Result<Self, PortRangeParseError> {
        Self::default().with_overrides(|k| std::env::var(k).ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plan() {
        let plan = PortPlan::default();
        assert_eq!(plan.remote_logger.to_string(), "5000-5000");
        assert_eq!(plan.master.to_string(), "5001-5010");
        assert_eq!(plan.actor.to_string(), "50000-50100");
        assert_eq!(plan.user.to_string(), "50101-50200");
        assert_eq!(plan.task_executor.to_string(), "50201-60000");
        assert_eq!(plan.role_for_port(5000), Some(ComponentRole::RemoteLogger));
        assert_eq!(plan.role_for_port(5005), Some(ComponentRole::Master));
        assert_eq!(plan.role_for_port(50150), Some(ComponentRole::User));
        assert_eq!(plan.role_for_port(4999), None);
        assert_eq!(plan.role_for_port(0), None);
    }

    #[test]
    fn overrides() {
        let plan = PortPlan::default()
            .with_overrides(|k| (k == "MASTER_PORT_RANGE").then(|| "6001-6002".to_string()))
            .unwrap();
        assert_eq!(plan.master, PortRange::new(6001, 6002));
        assert!(PortPlan::default().with_overrides(|_| Some("9-3".into())).is_err());
        assert!("0-3".parse::<PortRange>().is_err());
        assert!("abc".parse::<PortRange>().is_err());
    }
}
