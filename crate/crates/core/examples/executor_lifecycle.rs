// SPDX-License-Identifier: Apache-2.0

//! Walks one executor through a full serve, cool-off and reuse cycle and
//! shows what gets refused along the way.

use fogbus::taskexecutor::{Lifecycle, LifecycleEvent};

fn main() {
    let mut lc = Lifecycle::new("alice");
    let script = [
        LifecycleEvent::Registered,
        LifecycleEvent::ChildrenResolved,
        LifecycleEvent::Data { user_id: "alice".into() },
        LifecycleEvent::Data { user_id: "bob".into() },
        LifecycleEvent::Stop,
        LifecycleEvent::WaitGranted { deadline: 10_000.0 },
        LifecycleEvent::Reuse { user_id: "bob".into() },
        LifecycleEvent::Data { user_id: "bob".into() },
        // The deadline of the first cool-off has gone stale.
        LifecycleEvent::Deadline { epoch: 1 },
        LifecycleEvent::Stop,
        LifecycleEvent::WaitGranted { deadline: 20_000.0 },
        LifecycleEvent::Deadline { epoch: 2 },
    ];
    for ev in script {
        let label = format!("{ev:?}");
        match lc.apply(ev) {
            Ok(steps) => println!("{label:<45} ok   {steps:?}  serving {:?}", lc.served_user()),
            Err(e) => println!("{label:<45} refused: {e}"),
        }
    }
    println!("final state {:?}", lc.state());
}
