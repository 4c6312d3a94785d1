// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use approx::assert_relative_eq;

use super::*;
use crate::appmodel::{ApplicationCatalog, TaskDefinition, NAIVE_FORMULA_PARALLELIZED};

fn table(hosts: &[&str], rows: &[(&str, &[f64])]) -> EstimateTable {
    EstimateTable::from_estimates(
        hosts.iter().map(|h| h.to_string()).collect(),
        rows.iter().map(|(t, r)| (t.to_string(), r.to_vec())).collect(),
    )
}

fn parallel(names: &[&str]) -> ApplicationSpec {
    let deps: Vec<(&str, &[&str], &[&str])> = names.iter().map(|n| (*n, &["Sensor"][..], &["Actuator"][..])).collect();
    ApplicationSpec::new("P", names, &deps)
}

fn actor(id: &str, cores: u32, mhz: f64, util: f64) -> ActorView {
    ActorView {
        host_id: id.into(),
        profile: HostProfile::new(cores, mhz, util, 1 << 30, 0.1),
    }
}

fn registry(works: &[(&str, f64)]) -> TaskRegistry {
    TaskRegistry::new(
        works
            .iter()
            .enumerate()
            .map(|(i, (n, w))| TaskDefinition::new(i as u32 + 1, *n, *w, |r| Ok(Some(r)))),
    )
    .unwrap()
}

fn zero() -> f64 {
    0.0
}

#[test]
fn ranking_by_descending_mean() {
    let spec = parallel(&["T1", "T2", "T3"]);
    let t = table(&["A"], &[("T1", &[5.0]), ("T2", &[10.0]), ("T3", &[2.0])]);
    assert_eq!(rank_application_tasks(&spec, &t).unwrap(), ["T2", "T1", "T3"]);
}

#[test]
fn ranking_respects_precedence() {
    let spec = ApplicationSpec::new("C", &["A"], &[("A", &["Sensor"], &["B"]), ("B", &["A"], &["Actuator"])]);
    let t = table(&["H"], &[("A", &[1.0]), ("B", &[100.0])]);
    assert_eq!(rank_application_tasks(&spec, &t).unwrap(), ["A", "B"]);
}

#[test]
fn ranking_ties_by_name() {
    let spec = parallel(&["X", "M"]);
    let t = table(&["H"], &[("X", &[3.0]), ("M", &[3.0])]);
    assert_eq!(rank_application_tasks(&spec, &t).unwrap(), ["M", "X"]);
}

#[test]
fn assignment_tie_goes_to_lower_host() {
    // A: 50 per task, B: 100 per task. Task 2 finishes at 100 on either host.
    let spec = parallel(&["T1", "T2"]);
    let t = table(&["A", "B"], &[("T1", &[50.0, 100.0]), ("T2", &[50.0, 100.0])]);
    let ranked = rank_application_tasks(&spec, &t).unwrap();
    let got = tasks_assignment(&ranked, &spec, &t).unwrap();
    assert_eq!(got["T1"], "A");
    assert_eq!(got["T2"], "A");

    // Brute force over all four assignments: the greedy makespan is optimal.
    let mut best = f64::INFINITY;
    for mask in 0..4u32 {
        let mut busy = [0.0; 2];
        for (i, task) in ["T1", "T2"].iter().enumerate() {
            let h = ((mask >> i) & 1) as usize;
            busy[h] += t.get(task, h).unwrap();
        }
        best = best.min(busy[0].max(busy[1]));
    }
    assert_eq!(best, 100.0);
}

#[test]
fn assignment_single_and_spread() {
    let spec = parallel(&["T"]);
    let t = table(&["only"], &[("T", &[7.0])]);
    assert_eq!(tasks_assignment(&["T".into()], &spec, &t).unwrap()["T"], "only");

    let spec = parallel(&["T1", "T2", "T3"]);
    let t = table(&["A", "B", "C"], &[("T1", &[5.0; 3]), ("T2", &[5.0; 3]), ("T3", &[5.0; 3])]);
    let ranked = rank_application_tasks(&spec, &t).unwrap();
    let got = tasks_assignment(&ranked, &spec, &t).unwrap();
    let hosts: std::collections::BTreeSet<_> = got.values().collect();
    assert_eq!(hosts.len(), 3);
}

#[test]
fn assignment_without_hosts() {
    let spec = parallel(&["T"]);
    let t = table(&[], &[("T", &[])]);
    assert_eq!(tasks_assignment(&["T".into()], &spec, &t), Err(SchedulerError::NoActors));
}

#[test]
fn ranking_policy_on_naive_formula() {
    let catalog = ApplicationCatalog::default();
    let app = &catalog.get(NAIVE_FORMULA_PARALLELIZED).unwrap().spec;
    let tasks = TaskRegistry::builtin();
    let actors = [actor("fast", 8, 2400.0, 0.1), actor("slow", 2, 1200.0, 0.5)];
    let model = ExecTimeModel::new();
    let links = LinkLatency::uniform("gw", 1.0);
    let ctx = ScheduleContext {
        user_id: "1",
        app,
        tasks: &tasks,
        actors: &actors,
        model: &model,
        links: &links,
        clock: &zero,
    };
    let d = RankingBased::new(0).schedule(&ctx).unwrap();
    // Work 150 > 120 > 100.
    assert_eq!(d.index_sequence, ["NaiveFormula1", "NaiveFormula2", "NaiveFormula0"]);
    let t = EstimateTable::build(&ctx).unwrap();
    assert_relative_eq!(d.cost, t.cost(&d.index_to_host_id, app, &links));
    assert!(d.precedence_violations(app).is_empty());

    let single = [actor("solo", 4, 2000.0, 0.0)];
    let ctx = ScheduleContext { actors: &single, ..ctx };
    let d = RankingBased::new(0).schedule(&ctx).unwrap();
    assert!(d.index_to_host_id.values().all(|h| h == "solo"));
}

#[test]
fn saturated_hosts_are_skipped() {
    let spec = parallel(&["T"]);
    let tasks = registry(&[("T", 100.0)]);
    let model = ExecTimeModel::new();
    let links = LinkLatency::uniform("gw", 0.0);
    let actors = [actor("a", 1, 1000.0, 1.0), actor("b", 1, 1000.0, 0.5)];
    let ctx = ScheduleContext {
        user_id: "1",
        app: &spec,
        tasks: &tasks,
        actors: &actors,
        model: &model,
        links: &links,
        clock: &zero,
    };
    assert_eq!(EstimateTable::build(&ctx).unwrap().hosts(), ["b"]);
    let d = schedule_ranking_based(&ctx).unwrap();
    assert_eq!(d.index_to_host_id["T"], "b");

    let all_busy = [actor("a", 1, 1000.0, 1.0)];
    let ctx = ScheduleContext { actors: &all_busy, ..ctx };
    assert_eq!(schedule_ranking_based(&ctx), Err(SchedulerError::NoActors));
    let ctx = ScheduleContext { actors: &[], ..ctx };
    assert_eq!(schedule_nsga2(&ctx, &Nsga2Params::default()), Err(SchedulerError::NoActors));
}

fn brute_force_best(t: &EstimateTable, spec: &ApplicationSpec, links: &LinkLatency) -> f64 {
    let tasks: Vec<&str> = spec.task_names().collect();
    let h = t.hosts().len();
    let mut best = f64::INFINITY;
    for code in 0..h.pow(tasks.len() as u32) {
        let mut c = code;
        let mut placement = BTreeMap::new();
        for task in &tasks {
            placement.insert(task.to_string(), t.hosts()[c % h].clone());
            c /= h;
        }
        best = best.min(t.cost(&placement, spec, links));
    }
    best
}

#[test]
fn nsga2_matches_brute_force_on_small_instance() {
    let spec = ApplicationSpec::new(
        "S",
        &["A", "B"],
        &[
            ("A", &["Sensor"], &["C"]),
            ("B", &["Sensor"], &["C"]),
            ("C", &["A", "B"], &["Actuator"]),
        ],
    );
    let tasks = registry(&[("A", 100.0), ("B", 300.0), ("C", 50.0)]);
    let actors = [actor("h1", 2, 2000.0, 0.2), actor("h2", 1, 3000.0, 0.0)];
    let model = ExecTimeModel::new();
    let links = LinkLatency::uniform("h1", 2.0);
    let ctx = ScheduleContext {
        user_id: "7",
        app: &spec,
        tasks: &tasks,
        actors: &actors,
        model: &model,
        links: &links,
        clock: &zero,
    };
    let params = Nsga2Params {
        population_size: 8,
        generations: 20,
        ..Nsga2Params::default()
    };
    let d = schedule_nsga2(&ctx, &params).unwrap();
    let t = EstimateTable::build(&ctx).unwrap();
    assert_relative_eq!(d.cost, brute_force_best(&t, &spec, &links));
    assert!(d.precedence_violations(&spec).is_empty());
    assert_eq!(d, schedule_nsga2(&ctx, &params).unwrap());
}

#[test]
fn nsga2_single_actor_is_serial_path() {
    let spec = ApplicationSpec::new("C", &["A"], &[("A", &["Sensor"], &["B"]), ("B", &["A"], &["Actuator"])]);
    let tasks = registry(&[("A", 100.0), ("B", 200.0)]);
    let actors = [actor("h", 1, 1000.0, 0.0)];
    let model = ExecTimeModel::new();
    let links = LinkLatency::uniform("h", 5.0);
    let ctx = ScheduleContext {
        user_id: "1",
        app: &spec,
        tasks: &tasks,
        actors: &actors,
        model: &model,
        links: &links,
        clock: &zero,
    };
    let d = schedule_nsga2(&ctx, &Nsga2Params::default()).unwrap();
    assert_relative_eq!(d.cost, 300.0);
}

fn masters(n: usize) -> Vec<ComponentIdentity> {
    (0..n)
        .map(|i| {
            let ep = crate::protocol::Endpoint::new("10.0.0.1", 5001 + i as u16).unwrap();
            ComponentIdentity::new(crate::protocol::ComponentRole::Master, "10.0.0.1", ep)
        })
        .collect()
}

#[test]
fn best_master_selection() {
    let mut p = RankingBased::new(3);
    assert_eq!(p.get_best_master(&[]), None);
    let one = masters(1);
    assert_eq!(p.get_best_master(&one), Some(one[0].clone()));

    let three = masters(3);
    let mut counts = [0usize; 3];
    for _ in 0..1000 {
        let m = p.get_best_master(&three).unwrap();
        counts[three.iter().position(|x| *x == m).unwrap()] += 1;
    }
    assert!(counts.iter().all(|&c| c >= 250), "{counts:?}");

    let mut a = RankingBased::new(9);
    let mut b = RankingBased::new(9);
    for _ in 0..20 {
        assert_eq!(a.get_best_master(&three), b.get_best_master(&three));
    }
}

#[test]
fn least_utilized_scaler() {
    let mut s = RankingBased::new(0).prepare_scaler();
    assert_eq!(s.choose_host(&[]), None);
    let actors = [actor("b", 1, 1000.0, 0.2), actor("a", 1, 1000.0, 0.2), actor("c", 1, 1000.0, 0.5)];
    assert_eq!(s.choose_host(&actors).as_deref(), Some("a"));
}

#[test]
fn policies_by_name() {
    let cfg = SchedulerConfig::default();
    match init_scheduler_by_name("RankingBased", &cfg) {
        Some(PolicyLookup::Ready(p)) => assert_eq!(p.policy_name(), "RankingBased"),
        other => panic!("{other:?}"),
    }
    match init_scheduler_by_name("NSGA2", &cfg) {
        Some(PolicyLookup::Ready(p)) => assert_eq!(p.policy_name(), "NSGA2"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(init_scheduler_by_name("OHNSGA", &cfg), Some(PolicyLookup::NotImplemented(_))));
    assert!(matches!(init_scheduler_by_name("NSGA3", &cfg), Some(PolicyLookup::NotImplemented(_))));
    assert!(init_scheduler_by_name("Bogus", &cfg).is_none());
}
