// SPDX-License-Identifier: Apache-2.0

//! A scenario written inline: the actor is cut off from the master at
//! start-up, keeps retrying its registration, and gets in once the link
//! heals. A user then runs the parallel formula on it.

use fogbus::harness;

const SCENARIO: &str = r#"{
  "name": "partition-recovery",
  "seed": 5,
  "defaultLatencyMs": 3.0,
  "jitterMs": 1.0,
  "hosts": {
    "10.0.0.1": { "cores": 4, "frequency": 2400.0 },
    "10.0.0.2": { "cores": 8, "frequency": 3000.0 },
    "10.0.0.9": { "cores": 2, "frequency": 1800.0 }
  },
  "partitions": [["10.0.0.1", "10.0.0.2"]],
  "components": [
    { "name": "master", "role": "Master", "host": "10.0.0.1" },
    { "name": "actor", "role": "Actor", "host": "10.0.0.2", "master": "master" }
  ],
  "workload": [
    { "atMs": 2500, "action": "heal", "a": "10.0.0.1", "b": "10.0.0.2" },
    { "atMs": 8000, "action": "start", "component": {
        "name": "user", "host": "10.0.0.9", "master": "master",
        "applicationName": "NaiveFormulaParallelized", "inputs": [{ "a": 3, "b": 1, "c": 4 }] } }
  ],
  "assertions": [
    { "kind": "userOutcome", "user": "user", "outcome": "done" },
    { "kind": "result", "user": "user", "key": "resultPart0", "equals": 8 }
  ]
}"#;

fn main() {
    let report = harness::run_json(SCENARIO, false).unwrap();
    println!("passed: {}", report.passed);
    for a in &report.assertions {
        println!("  {} {}", if a.passed { "ok  " } else { "FAIL" }, a.detail);
    }
    for (kind, n) in &report.message_counts {
        println!("  {n:>3} {kind}");
    }
}
