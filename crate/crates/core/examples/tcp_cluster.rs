// SPDX-License-Identifier: Apache-2.0

//! A remote logger, a master, two actors and a user over loopback TCP,
//! all in this process. Uses port ranges well away from the defaults.
//!
//!     RUST_LOG=info cargo run --example tcp_cluster

use std::time::Duration;

use clap::Parser;
use fogbus::cli::{launch, prepare, Cli, Command};
use fogbus::protocol::ComponentRole;
use fogbus::transport::NodeHandle;
use fogbus::user::User;

fn ranges(var: &str) -> Option<String> {
    let r = match var {
        "REMOTE_LOGGER_PORT_RANGE" => "45000-45000",
        "MASTER_PORT_RANGE" => "45001-45010",
        "ACTOR_PORT_RANGE" => "45100-45199",
        "USER_PORT_RANGE" => "45200-45299",
        "TASK_EXECUTOR_PORT_RANGE" => "45300-45999",
        _ => return None,
    };
    Some(r.into())
}

fn start(role: ComponentRole, args: &[&str]) -> NodeHandle {
    let cfg = match Cli::parse_from(std::iter::once("fogbus").chain(args.iter().copied())).command {
        Command::RemoteLogger(c) | Command::Master(c) | Command::Actor(c) | Command::User(c) => c,
        Command::Scenario(_) => unreachable!(),
    };
    let node = launch(prepare(role, &cfg, ranges).unwrap()).unwrap();
    println!("{role} listening on {}", node.endpoint());
    node
}

fn main() {
    env_logger::init();
    let logger = ["--remoteLoggerIP", "127.0.0.1", "--remoteLoggerPort", "45000"];
    let with = |head: &[&'static str]| -> Vec<&'static str> { head.iter().chain(logger.iter()).copied().collect() };

    let _logger = start(ComponentRole::RemoteLogger, &["remote-logger"]);
    let _master = start(ComponentRole::Master, &with(&["master", "--bindPort", "45001"]));
    let _a = start(ComponentRole::Actor, &with(&["actor", "--bindIP", "127.0.0.2", "--masterIP", "127.0.0.1", "--masterPort", "45001"]));
    let _b = start(ComponentRole::Actor, &with(&["actor", "--bindIP", "127.0.0.3", "--masterIP", "127.0.0.1", "--masterPort", "45001"]));
    std::thread::sleep(Duration::from_millis(300));

    let user = start(
        ComponentRole::User,
        &[
            "user", "--masterIP", "127.0.0.1", "--masterPort", "45001",
            "--applicationName", "NaiveFormulaSerialized", "--input", "a=1,b=2,c=3", "--input", "a=5,b=1,c=2",
        ],
    );
    let user = user.join_timeout(Duration::from_secs(20)).unwrap();
    let user = user.as_any().downcast_ref::<User>().unwrap();
    println!("user {:?}, mean response {:.2} ms", user.phase(), user.stats().mean);
    if let Some(e) = user.error() {
        println!("  error: {e}");
    }
    for r in user.results() {
        println!("  {}", serde_json::to_string(r).unwrap());
    }
}
