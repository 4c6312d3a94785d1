// SPDX-License-Identifier: Apache-2.0

//! The message-kind catalog.
//!
//! Every envelope is categorised by a `(type, subType, subSubType)` triple.
//! The catalog lists each known triple together with the sender/receiver
//! role pairs allowed to use it. Kinds outside the catalog are rejected by
//! the codec.

use std::fmt;

use super::identity::ComponentRole;
use ComponentRole::*;

/// A `(type, subType, subSubType)` triple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageKind {
    pub msg_type: String,
    pub sub_type: String,
    pub sub_sub_type: String,
}

impl MessageKind {
    pub fn new(msg_type: &str, sub_type: &str, sub_sub_type: &str) -> Self {
        MessageKind {
            msg_type: msg_type.to_string(),
            sub_type: sub_type.to_string(),
            sub_sub_type: sub_sub_type.to_string(),
        }
    }

    pub fn is(&self, msg_type: &str, sub_type: &str) -> bool {
        self.msg_type == msg_type && self.sub_type == sub_type
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sub_sub_type.is_empty() {
            write!(f, "{}/{}", self.msg_type, self.sub_type)
        } else {
            write!(f, "{}/{}/{}", self.msg_type, self.sub_type, self.sub_sub_type)
        }
    }
}

/// Roles permitted at one end of a route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoleSet {
    Any,
    Only(&'static [ComponentRole]),
}

impl RoleSet {
    pub fn contains(&self, role: ComponentRole) -> bool {
        match self {
            RoleSet::Any => true,
            RoleSet::Only(roles) => roles.contains(&role),
        }
    }
}

/// Where an entry comes from: the documented message table, or kinds this
/// implementation adds for workflows the table does not spell out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Documented,
    Added,
}

#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub msg_type: &'static str,
    pub sub_type: &'static str,
    pub sub_sub_type: &'static str,
    pub routes: &'static [(RoleSet, RoleSet)],
    pub description: &'static str,
    pub provenance: Provenance,
}

impl CatalogEntry {
    pub fn permits(&self, sender: ComponentRole, receiver: ComponentRole) -> bool {
        self.routes
            .iter()
            .any(|(s, r)| s.contains(sender) && r.contains(receiver))
    }

    pub fn kind(&self) -> MessageKind {
        MessageKind::new(self.msg_type, self.sub_type, self.sub_sub_type)
    }
}

const fn one(role: &'static [ComponentRole]) -> RoleSet {
    RoleSet::Only(role)
}

const M: RoleSet = one(&[Master]);
const A: RoleSet = one(&[Actor]);
const TE: RoleSet = one(&[TaskExecutor]);
const U: RoleSet = one(&[User]);
const RL: RoleSet = one(&[RemoteLogger]);

macro_rules! entry {
    ($t:literal, $s:literal, $ss:literal, [$($route:expr),+], $p:ident, $d:literal) => {
        CatalogEntry {
            msg_type: $t,
            sub_type: $s,
            sub_sub_type: $ss,
            routes: &[$($route),+],
            description: $d,
            provenance: Provenance::$p,
        }
    };
}

static CATALOG: &[CatalogEntry] = &[
    // placement
    entry!("placement", "runTaskExecutor", "", [(M, A)], Documented,
        "scheduling finished; actor starts a new task executor (no-reuse path)"),
    entry!("placement", "lookup", "", [(TE, M), (M, TE)], Documented,
        "task executor asks for, and master answers with, its children's addresses"),
    entry!("placement", "reuse", "", [(M, TE)], Documented,
        "scheduling finished; a cooling-off task executor is rebound (reuse path)"),
    entry!("placement", "redirect", "", [(M, U)], Added,
        "master is saturated; user should re-request at the named master"),
    // acknowledgement
    entry!("acknowledgement", "ready", "", [(TE, M)], Documented,
        "task executor has its children's addresses and is ready"),
    entry!("acknowledgement", "serviceReady", "", [(M, U)], Documented,
        "every task executor is ready; user may send sensory data"),
    entry!("acknowledgement", "waiting", "", [(TE, M)], Documented,
        "task executor asks whether it may enter the cool-off period"),
    entry!("acknowledgement", "wait", "", [(M, TE)], Documented,
        "task executor should start its cool-off period now"),
    entry!("acknowledgement", "error", "", [(M, U), (TE, M), (A, M)], Added,
        "a request failed; data carries the reason"),
    // data
    entry!("data", "sensoryData", "", [(U, M)], Documented,
        "sensory data from the user"),
    entry!("data", "intermediateData", "", [(M, TE), (TE, TE)], Documented,
        "input for a task executor, from the master or a parent executor"),
    entry!("data", "finalResult", "", [(TE, M), (M, U)], Documented,
        "final results, executor to master and master to user"),
    // scaling
    entry!("scaling", "getProfiles", "", [(M, M)], Documented,
        "one master asks another for its profiles"),
    entry!("scaling", "profilesInfo", "", [(M, M)], Documented,
        "profiles sent in answer to getProfiles"),
    entry!("scaling", "initNewMaster", "", [(M, A)], Documented,
        "master asks an actor to start a new master"),
    // log
    entry!("log", "hostResources", "", [(one(&[Actor, Master]), RL)], Documented,
        "host cpu and memory profile"),
    entry!("log", "allResourcesProfiles", "", [(RL, M)], Documented,
        "latest host profiles, in answer to requestProfiles"),
    entry!("log", "requestProfiles", "", [(M, RL)], Added,
        "master asks the remote logger for the latest host profiles"),
    entry!("log", "responseTime", "", [(M, RL)], Added,
        "response time of one sensory-data round"),
    entry!("log", "executionDuration", "", [(TE, RL)], Added,
        "buffered per-input execution durations of a task executor"),
    entry!("log", "event", "", [(one(&[Master, Actor, TaskExecutor, User]), RL)], Added,
        "free-form lifecycle event"),
    // resourcesDiscovery
    entry!("resourcesDiscovery", "requestActorsInfo", "", [(M, M)], Documented,
        "master asks a peer for its registered actors"),
    entry!("resourcesDiscovery", "actorsInfo", "", [(M, M)], Documented,
        "registered actors sent to a peer master"),
    entry!("resourcesDiscovery", "advertiseMaster", "", [(M, A)], Documented,
        "master advertises itself to an actor"),
    entry!("resourcesDiscovery", "probe", "try", [(RoleSet::Any, RoleSet::Any)], Documented,
        "receiver should answer with its component role"),
    entry!("resourcesDiscovery", "probe", "result", [(RoleSet::Any, RoleSet::Any)], Documented,
        "answer to a probe"),
    // registration
    entry!("registration", "register", "", [(one(&[User, Actor, TaskExecutor]), M)], Added,
        "component asks a master for an identifier"),
    entry!("registration", "registered", "", [(M, one(&[User, Actor, TaskExecutor]))], Added,
        "master returns the assigned identity"),
    // termination
    entry!("termination", "userExit", "", [(U, M)], Added,
        "user has finished with its application"),
    entry!("termination", "stop", "", [(M, TE)], Added,
        "executor's user is gone; executor should stop serving"),
    entry!("termination", "executorExit", "", [(TE, one(&[Actor, Master]))], Added,
        "executor has terminated"),
];

/// A `(type, subType, subSubType)` triple as static strings.
pub type Kind = (&'static str, &'static str, &'static str);

/// The kinds components emit, named for use at call sites.
pub mod kinds {
    use super::Kind;

    pub const RUN_TASK_EXECUTOR: Kind = ("placement", "runTaskExecutor", "");
    pub const LOOKUP: Kind = ("placement", "lookup", "");
    pub const REUSE: Kind = ("placement", "reuse", "");
    pub const REDIRECT: Kind = ("placement", "redirect", "");
    pub const READY: Kind = ("acknowledgement", "ready", "");
    pub const SERVICE_READY: Kind = ("acknowledgement", "serviceReady", "");
    pub const WAITING: Kind = ("acknowledgement", "waiting", "");
    pub const WAIT: Kind = ("acknowledgement", "wait", "");
    pub const ERROR: Kind = ("acknowledgement", "error", "");
    pub const SENSORY_DATA: Kind = ("data", "sensoryData", "");
    pub const INTERMEDIATE_DATA: Kind = ("data", "intermediateData", "");
    pub const FINAL_RESULT: Kind = ("data", "finalResult", "");
    pub const GET_PROFILES: Kind = ("scaling", "getProfiles", "");
    pub const PROFILES_INFO: Kind = ("scaling", "profilesInfo", "");
    pub const INIT_NEW_MASTER: Kind = ("scaling", "initNewMaster", "");
    pub const HOST_RESOURCES: Kind = ("log", "hostResources", "");
    pub const ALL_RESOURCES_PROFILES: Kind = ("log", "allResourcesProfiles", "");
    pub const REQUEST_PROFILES: Kind = ("log", "requestProfiles", "");
    pub const RESPONSE_TIME: Kind = ("log", "responseTime", "");
    pub const EXECUTION_DURATION: Kind = ("log", "executionDuration", "");
    pub const EVENT: Kind = ("log", "event", "");
    pub const REQUEST_ACTORS_INFO: Kind = ("resourcesDiscovery", "requestActorsInfo", "");
    pub const ACTORS_INFO: Kind = ("resourcesDiscovery", "actorsInfo", "");
    pub const ADVERTISE_MASTER: Kind = ("resourcesDiscovery", "advertiseMaster", "");
    pub const PROBE_TRY: Kind = ("resourcesDiscovery", "probe", "try");
    pub const PROBE_RESULT: Kind = ("resourcesDiscovery", "probe", "result");
    pub const REGISTER: Kind = ("registration", "register", "");
    pub const REGISTERED: Kind = ("registration", "registered", "");
    pub const USER_EXIT: Kind = ("termination", "userExit", "");
    pub const STOP: Kind = ("termination", "stop", "");
    pub const EXECUTOR_EXIT: Kind = ("termination", "executorExit", "");

    pub const ALL: [Kind; 31] = [
        RUN_TASK_EXECUTOR, LOOKUP, REUSE, REDIRECT, READY, SERVICE_READY, WAITING, WAIT, ERROR,
        SENSORY_DATA, INTERMEDIATE_DATA, FINAL_RESULT, GET_PROFILES, PROFILES_INFO, INIT_NEW_MASTER,
        HOST_RESOURCES, ALL_RESOURCES_PROFILES, REQUEST_PROFILES, RESPONSE_TIME, EXECUTION_DURATION,
        EVENT, REQUEST_ACTORS_INFO, ACTORS_INFO, ADVERTISE_MASTER, PROBE_TRY, PROBE_RESULT, REGISTER,
        REGISTERED, USER_EXIT, STOP, EXECUTOR_EXIT,
    ];
}

impl From<Kind> for MessageKind {
    fn from((t, s, ss): Kind) -> Self {
        MessageKind::new(t, s, ss)
    }
}

/// All catalog entries, in declaration order.
pub fn entries() -> &'static [CatalogEntry] {
    CATALOG
}

/// Looks up a kind. Not-found is `None`.
pub fn classify(msg_type: &str, sub_type: &str, sub_sub_type: &str) -> Option<&'static CatalogEntry> {
    CATALOG
        .iter()
        .find(|e| e.msg_type == msg_type && e.sub_type == sub_type && e.sub_sub_type == sub_sub_type)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogViolation {
    #[error("unknown message kind {0}")]
    UnknownKind(MessageKind),
    #[error("{kind} may not be sent from {sender} to {receiver}")]
    RouteNotPermitted {
        kind: MessageKind,
        sender: ComponentRole,
        receiver: ComponentRole,
    },
}

/// Checks that a kind exists and that the route is permitted for it.
pub fn check(kind: &MessageKind, sender: ComponentRole, receiver: ComponentRole) -> Result<&'static CatalogEntry, CatalogViolation> {
    let entry = classify(&kind.msg_type, &kind.sub_type, &kind.sub_sub_type)
        .ok_or_else(|| CatalogViolation::UnknownKind(kind.clone()))?;
    if !entry.permits(sender, receiver) {
        return Err(CatalogViolation::RouteNotPermitted {
            kind: kind.clone(),
            sender,
            receiver,
        });
    }
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    #[test]
    fn run_task_executor_is_master_to_actor() {
        let e = classify("placement", "runTaskExecutor", "").unwrap();
        assert!(e.permits(Master, Actor));
        assert!(!e.permits(Actor, Master));
    }

    #[test]
    fn probe_try_is_any_to_any() {
        let e = classify("resourcesDiscovery", "probe", "try").unwrap();
        for s in ComponentRole::ALL {
            for r in ComponentRole::ALL {
                assert!(e.permits(s, r));
            }
        }
    }

    #[test]
    fn absent_kind_is_not_found() {
        assert!(classify("data", "bogus", "").is_none());
        assert!(classify("resourcesDiscovery", "probe", "").is_none());
    }

    #[test]
    fn sub_types_belong_to_one_type() {
        let mut owner: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for e in entries() {
            owner.entry(e.sub_type).or_default().insert(e.msg_type);
        }
        for (sub, types) in owner {
            assert_eq!(types.len(), 1, "{sub} appears under {types:?}");
        }
    }

    #[test]
    fn triples_are_unique() {
        let set: BTreeSet<_> = entries().iter().map(|e| e.kind()).collect();
        assert_eq!(set.len(), entries().len());
    }

    #[test]
    fn named_kinds_cover_the_catalog() {
        let named: BTreeSet<MessageKind> = kinds::ALL.iter().map(|k| MessageKind::from(*k)).collect();
        let listed: BTreeSet<MessageKind> = entries().iter().map(|e| e.kind()).collect();
        assert_eq!(named, listed);
    }

    #[test]
    fn route_check_reports_violation() {
        let kind = MessageKind::new("data", "sensoryData", "");
        assert!(check(&kind, User, Master).is_ok());
        assert!(matches!(
            check(&kind, Actor, Master),
            Err(CatalogViolation::RouteNotPermitted { .. })
        ));
        let bogus = MessageKind::new("log", "noSuchSubType", "");
        assert!(matches!(check(&bogus, Actor, RemoteLogger), Err(CatalogViolation::UnknownKind(_))));
    }
}
