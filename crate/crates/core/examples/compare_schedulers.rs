// SPDX-License-Identifier: Apache-2.0

//! Places the bundled applications on a small heterogeneous cluster with
//! both policies and prints the decisions side by side.
//!
//!     cargo run --example compare_schedulers

use fogbus::appmodel::{ApplicationCatalog, TaskRegistry};
use fogbus::profile::HostProfile;
use fogbus::scheduler::{
    schedule_nsga2, schedule_ranking_based, ActorView, ExecTimeModel, LinkLatency, Nsga2Params, ScheduleContext,
};

fn main() {
    let actors = vec![
        ActorView { host_id: "edge-a".into(), profile: HostProfile::new(2, 1500.0, 0.30, 2 << 30, 0.4) },
        ActorView { host_id: "edge-b".into(), profile: HostProfile::new(4, 2000.0, 0.10, 4 << 30, 0.2) },
        ActorView { host_id: "cloud".into(), profile: HostProfile::new(16, 3200.0, 0.05, 64 << 30, 0.1) },
    ];
    // The gateway sits next to the edge nodes; the cloud is far away.
    let mut links = LinkLatency::uniform("gateway", 5.0);
    links.set("gateway", "cloud", 40.0);
    links.set("edge-a", "cloud", 40.0);
    links.set("edge-b", "cloud", 40.0);

    let apps = ApplicationCatalog::default();
    let tasks = TaskRegistry::builtin();
    let model = ExecTimeModel::new();
    let clock = || 0.0;
    for name in apps.names() {
        let app = apps.get(name).unwrap();
        let ctx = ScheduleContext {
            user_id: "1",
            app: &app.spec,
            tasks: &tasks,
            actors: &actors,
            model: &model,
            links: &links,
            clock: &clock,
        };
        let ranked = schedule_ranking_based(&ctx).unwrap();
        let nsga = schedule_nsga2(&ctx, &Nsga2Params::default()).unwrap();
        println!("{name}");
        println!("  RankingBased  {:>8.2} ms  {:?}", ranked.cost, ranked.index_to_host_id);
        println!("  NSGA2         {:>8.2} ms  {:?}", nsga.cost, nsga.index_to_host_id);
    }
}
