// SPDX-License-Identifier: Apache-2.0

//! Two masters and two actors on the simulated network: one actor starts
//! without a master and is found by probing; the masters then swap actor
//! lists until they agree.

use fogbus::harness::{self, Scenario};
use fogbus::master::Master;

fn main() {
    let scenario = Scenario::from_json(harness::bundled("discovery").unwrap()).unwrap();
    let out = harness::run(&scenario).unwrap();
    for e in out.trace() {
        if e.msg_type == "resourcesDiscovery" || e.msg_type == "registration" {
            println!("{:>7.1} ms  {:<45} {} -> {}", e.time, e.kind_label(), e.source, e.destination);
        }
    }
    for name in ["east", "west"] {
        let m = out.get::<Master>(name).unwrap();
        println!("{name} knows {:?}", m.actor_addrs());
    }
}
