// SPDX-License-Identifier: Apache-2.0

//! Executor lifecycle: the states an executor moves through and the only
//! transitions it may take between them.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ExecState {
    Starting,
    AwaitingChildren,
    Ready,
    Serving,
    AskingToWait,
    CoolingOff,
    Terminated,
}

use ExecState::*;

/// Every permitted `(from, to)` pair.
pub const LEGAL: [(ExecState, ExecState); 8] = [
    (Starting, AwaitingChildren),
    (AwaitingChildren, Ready),
    (Ready, Serving),
    (Serving, AskingToWait),
    (AskingToWait, CoolingOff),
    (AskingToWait, Terminated),
    (CoolingOff, Serving),
    (CoolingOff, Terminated),
];

pub fn is_legal(from: ExecState, to: ExecState) -> bool {
    LEGAL.contains(&(from, to))
}

#[derive(Debug, Clone, PartialEq)]
pub enum LifecycleEvent {
    /// The master assigned an id.
    Registered,
    /// Children's addresses are known (or there are none).
    ChildrenResolved,
    /// Input for the bound user.
    Data { user_id: String },
    /// The bound user has gone.
    Stop,
    /// The master granted a cool-off period ending at `deadline`.
    WaitGranted { deadline: f64 },
    /// A new user takes over a cooling executor.
    Reuse { user_id: String },
    /// The cool-off timer of generation `epoch` fired.
    Deadline { epoch: u64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Rejected {
    #[error("{event:?} is not accepted in state {state:?}")]
    NotNow { state: ExecState, event: LifecycleEvent },
    #[error("payload for user {got} reached an executor bound to {bound:?}")]
    ForeignPayload { bound: Option<String>, got: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lifecycle {
    state: ExecState,
    served_user: Option<String>,
    epoch: u64,
    deadline: Option<f64>,
}

impl Lifecycle {
    pub fn new(user_id: impl Into<String>) -> Self {
        Lifecycle {
            state: Starting,
            served_user: Some(user_id.into()),
            epoch: 0,
            deadline: None,
        }
    }

    pub fn state(&self) -> ExecState {
        self.state
    }

    pub fn served_user(&self) -> Option<&str> {
        self.served_user.as_deref()
    }

    /// Generation of the current cool-off period; stale deadline timers
    /// carry an older value.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn cool_off_deadline(&self) -> Option<f64> {
        self.deadline
    }

    /// Applies one event. On success returns the transitions taken (possibly
    /// none, e.g. for a stale deadline); on rejection nothing changes.
    pub fn apply(&mut self, event: LifecycleEvent) -> Result<Vec<(ExecState, ExecState)>, Rejected> {
        let path: Vec<ExecState> = match (&event, self.state) {
            (LifecycleEvent::Registered, Starting) => vec![AwaitingChildren],
            (LifecycleEvent::ChildrenResolved, AwaitingChildren) => vec![Ready],
            // After a reuse the executor re-resolves children while serving.
            (LifecycleEvent::ChildrenResolved, Serving) => vec![],
            (LifecycleEvent::Data { user_id }, Ready | Serving) => {
                if self.served_user.as_deref() != Some(user_id.as_str()) {
                    return Err(Rejected::ForeignPayload {
                        bound: self.served_user.clone(),
                        got: user_id.clone(),
                    });
                }
                if self.state == Ready {
                    vec![Serving]
                } else {
                    vec![]
                }
            }
            (LifecycleEvent::Stop, Ready) => vec![Serving, AskingToWait],
            (LifecycleEvent::Stop, Serving) => vec![AskingToWait],
            (LifecycleEvent::Stop, AskingToWait | CoolingOff) => vec![Terminated],
            (LifecycleEvent::WaitGranted { .. }, AskingToWait) => vec![CoolingOff],
            (LifecycleEvent::Reuse { .. }, CoolingOff) => vec![Serving],
            (LifecycleEvent::Deadline { epoch }, CoolingOff) if *epoch == self.epoch => vec![Terminated],
            (LifecycleEvent::Deadline { .. }, _) => vec![],
            _ => {
                return Err(Rejected::NotNow {
                    state: self.state,
                    event,
                })
            }
        };
        match &event {
            LifecycleEvent::WaitGranted { deadline } => {
                self.epoch += 1;
                self.deadline = Some(*deadline);
            }
            LifecycleEvent::Reuse { user_id } => {
                self.epoch += 1;
                self.deadline = None;
                self.served_user = Some(user_id.clone());
            }
            _ => {}
        }
        let mut steps = Vec::with_capacity(path.len());
        for next in path {
            debug_assert!(is_legal(self.state, next));
            steps.push((self.state, next));
            self.state = next;
        }
        Ok(steps)
    }
}
