// SPDX-License-Identifier: Apache-2.0

//! The `fogbus` command line: one subcommand per component role plus
//! `scenario` for the simulation harness.

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::Value;

use crate::actor::{Actor, ActorConfig};
use crate::appmodel::{ApplicationCatalog, DataRecord};
use crate::harness;
use crate::master::{Master, MasterConfig, ProbeTarget};
use crate::ports::PortPlan;
use crate::profile::HostProfile;
use crate::protocol::{ComponentRole, Endpoint};
use crate::remotelogger::{FileStore, LogStore, MemoryStore, RemoteLogger};
use crate::runtime::{Component, Factory, TransportError};
use crate::scheduler::{init_scheduler_by_name, PolicyLookup, POLICY_NAMES};
use crate::transport::{start_node, NodeHandle, NodeOptions};
use crate::user::{User, UserConfig};

#[derive(Debug, Parser)]
#[command(name = "fogbus", version, about = "Run a component, or a simulated cluster scenario")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collects logs and serves host profiles to masters.
    RemoteLogger(LaunchConfig),
    /// Registers components, schedules placements, scales and discovers.
    Master(LaunchConfig),
    /// Reports host resources and starts task executors for a master.
    Actor(LaunchConfig),
    /// Requests an application, submits inputs, prints the results.
    User(LaunchConfig),
    /// Runs a scenario file (or a bundled scenario by name) and prints the
    /// JSON report.
    Scenario(ScenarioArgs),
}

impl Command {
    fn role(&self) -> Option<ComponentRole> {
        match self {
            Command::RemoteLogger(_) => Some(ComponentRole::RemoteLogger),
            Command::Master(_) => Some(ComponentRole::Master),
            Command::Actor(_) => Some(ComponentRole::Actor),
            Command::User(_) => Some(ComponentRole::User),
            Command::Scenario(_) => None,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct LaunchConfig {
    #[arg(long = "bindIP", default_value = "127.0.0.1")]
    pub bind_ip: String,
    /// Defaults to the lowest free port of the role's range.
    #[arg(long = "bindPort")]
    pub bind_port: Option<u16>,
    #[arg(long = "masterIP")]
    pub master_ip: Option<String>,
    #[arg(long = "masterPort")]
    pub master_port: Option<u16>,
    #[arg(long = "remoteLoggerIP")]
    pub remote_logger_ip: Option<String>,
    #[arg(long = "remoteLoggerPort")]
    pub remote_logger_port: Option<u16>,
    #[arg(long = "schedulerName", default_value = "RankingBased")]
    pub scheduler_name: String,
    #[arg(long = "applicationName")]
    pub application_name: Option<String>,
    #[arg(long = "applicationLabel")]
    pub application_label: Option<String>,
    /// Only labels the component; there is no container runtime.
    #[arg(long = "containerName")]
    pub container_name: Option<String>,
    /// Remote logger: append-only log file. Other roles: diagnostics file.
    #[arg(long = "logPath")]
    pub log_path: Option<PathBuf>,
    /// JSON file with further settings; see [`FileConfig`].
    #[arg(long = "configPath")]
    pub config_path: Option<PathBuf>,
    #[arg(long = "videoPath", hide = true)]
    pub video_path: Option<PathBuf>,
    /// One submission, e.g. `a=1,b=2,c=3`. Repeat for several.
    #[arg(long = "input")]
    pub input: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// A scenario file, or the name of a bundled scenario.
    pub scenario: Option<String>,
    /// Include the full message trace in the report.
    #[arg(long)]
    pub trace: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// List the bundled scenarios.
    #[arg(long)]
    pub list: bool,
}

/// Settings read from `--configPath`. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FileConfig {
    /// Per-role overrides, e.g. `{"Master": "6001-6005"}`; these win over
    /// the `*_PORT_RANGE` environment variables.
    #[serde(default)]
    pub port_ranges: std::collections::BTreeMap<ComponentRole, crate::ports::PortRange>,
    pub queue_capacity: Option<usize>,
    pub cpu_threshold: Option<f64>,
    pub cool_off_ms: Option<f64>,
    pub profile_interval_ms: Option<f64>,
    pub discovery_interval_ms: Option<f64>,
    #[serde(default)]
    pub discovery_targets: Vec<ProbeTarget>,
    #[serde(default)]
    pub peers: Vec<Endpoint>,
    /// Reported instead of sampling the host.
    pub host_profile: Option<HostProfile>,
    #[serde(default)]
    pub inputs: Vec<DataRecord>,
    pub timeout_ms: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Bind(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Bind(_) | CliError::Failed(_) => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `a=1,b=2,c=3`. Values that read as JSON (numbers, booleans) keep
/// that type; anything else is a string.
pub fn parse_input(text: &str) -> Result<DataRecord, CliError> {
    let mut rec = DataRecord::new();
    for pair in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| usage(format!("--input expects key=value pairs, got `{pair}`")))?;
        let value = serde_json::from_str::<Value>(v.trim()).unwrap_or_else(|_| Value::String(v.trim().into()));
        rec.set(k.trim(), value).map_err(|e| usage(e.to_string()))?;
    }
    Ok(rec)
}

fn endpoint(ip: &Option<String>, port: Option<u16>, what: &str, default_port: Option<u16>) -> Result<Option<Endpoint>, CliError> {
    match (ip, port.or(default_port)) {
        (None, None) => Ok(None),
        (Some(ip), Some(p)) => Endpoint::new(ip.clone(), p).map(Some).map_err(|e| usage(format!("--{what}Port: {e}"))),
        (None, Some(_)) if port.is_none() => Ok(None),
        _ => Err(usage(format!("--{what}IP and --{what}Port go together"))),
    }
}

/// Everything a launch needs, resolved and validated.
pub struct Prepared {
    pub role: ComponentRole,
    pub bind_ip: String,
    pub bind_port: Option<u16>,
    pub plan: PortPlan,
    pub profile: Option<HostProfile>,
    factory: Factory,
}

/// Validates flags for `role` and builds the component factory. Reads the
/// `*_PORT_RANGE` variables through `env`.
pub fn prepare(role: ComponentRole, cfg: &LaunchConfig, env: impl Fn(&str) -> Option<String>) -> Result<Prepared, CliError> {
    if cfg.video_path.is_some() {
        return Err(usage(
            "--videoPath belongs to the video applications, which are out of scope for this implementation",
        ));
    }
    let file: FileConfig = match &cfg.config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("--configPath {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("--configPath {}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let mut plan = PortPlan::default().with_overrides(env).map_err(|e| usage(e.to_string()))?;
    for (r, range) in &file.port_ranges {
        *plan.range_mut(*r) = *range;
    }
    if let Some(p) = cfg.bind_port {
        let range = plan.range(role);
        if !range.contains(p) {
            return Err(usage(format!("--bindPort {p} is outside the {role} range {range}")));
        }
    }
    let master = endpoint(&cfg.master_ip, cfg.master_port, "master", Some(plan.master.first))?;
    let logger = endpoint(&cfg.remote_logger_ip, cfg.remote_logger_port, "remoteLogger", Some(plan.remote_logger.first))?;
    let host = cfg.bind_ip.clone();
    let apps = Arc::new(ApplicationCatalog::default());

    let master_cfg = || -> Result<MasterConfig, CliError> {
        match init_scheduler_by_name(&cfg.scheduler_name, &Default::default()) {
            None => {
                return Err(usage(format!(
                    "unknown --schedulerName `{}`; expected one of {}",
                    cfg.scheduler_name,
                    POLICY_NAMES.join(", ")
                )))
            }
            Some(PolicyLookup::NotImplemented(n)) => {
                return Err(usage(format!("--schedulerName {n} is recognised but not implemented; use RankingBased or NSGA2")))
            }
            Some(PolicyLookup::Ready(_)) => {}
        }
        let d = MasterConfig::default();
        let mut scheduler = d.scheduler.clone();
        if let Some(seed) = file.seed {
            scheduler.seed = seed;
            scheduler.nsga2.seed = seed;
        }
        Ok(MasterConfig {
            scheduler_name: cfg.scheduler_name.clone(),
            scheduler,
            queue_capacity: file.queue_capacity.unwrap_or(d.queue_capacity),
            cpu_threshold: file.cpu_threshold.unwrap_or(d.cpu_threshold),
            cool_off_ms: file.cool_off_ms.unwrap_or(d.cool_off_ms),
            profile_interval_ms: file.profile_interval_ms.unwrap_or(d.profile_interval_ms),
            discovery_interval_ms: file.discovery_interval_ms.unwrap_or(d.discovery_interval_ms),
            discovery_targets: file.discovery_targets.clone(),
            remote_logger: logger.clone(),
            port_plan: plan.clone(),
            peers: file.peers.clone(),
            apps: apps.clone(),
            ..d
        })
    };

    let factory: Factory = match role {
        ComponentRole::RemoteLogger => {
            let store: Box<dyn LogStore> = match &cfg.log_path {
                Some(p) => Box::new(FileStore::open(p).map_err(|e| CliError::Failed(format!("--logPath: {e}")))?),
                None => Box::new(MemoryStore::new()),
            };
            Box::new(move |ep| Box::new(RemoteLogger::new(host, ep, store)))
        }
        ComponentRole::Master => {
            let mc = master_cfg()?;
            Box::new(move |ep| Box::new(Master::new(host, ep, mc).expect("scheduler checked")))
        }
        ComponentRole::Actor => {
            let mut new_master = master_cfg()?;
            new_master.discovery_targets.clear();
            let d = ActorConfig::default();
            let ac = ActorConfig {
                master,
                remote_logger: logger,
                profile_interval_ms: file.profile_interval_ms.unwrap_or(d.profile_interval_ms),
                cool_off_ms: file.cool_off_ms.unwrap_or(d.cool_off_ms),
                new_master,
                apps: apps.clone(),
                ..d
            };
            Box::new(move |ep| Box::new(Actor::new(host, ep, ac)))
        }
        ComponentRole::User => {
            let name = cfg
                .application_name
                .clone()
                .ok_or_else(|| usage("user needs --applicationName"))?;
            if apps.get(&name).is_none() {
                let known: Vec<&str> = apps.names().collect();
                return Err(usage(format!("unknown --applicationName `{name}`; known: {}", known.join(", "))));
            }
            let master = master.ok_or_else(|| usage("user needs --masterIP"))?;
            let mut uc = UserConfig::new(master, name);
            uc.label = cfg.application_label.clone().unwrap_or_default();
            uc.inputs = cfg.input.iter().map(|s| parse_input(s)).collect::<Result<_, _>>()?;
            if uc.inputs.is_empty() {
                uc.inputs = file.inputs.clone();
            }
            if uc.inputs.is_empty() {
                return Err(usage("user needs at least one --input"));
            }
            if let Some(t) = file.timeout_ms {
                uc.timeout_ms = t;
            }
            uc.apps = apps;
            Box::new(move |ep| Box::new(User::new(host, ep, uc)))
        }
        ComponentRole::TaskExecutor => return Err(usage("task executors are started by actors")),
    };
    Ok(Prepared {
        role,
        bind_ip: cfg.bind_ip.clone(),
        bind_port: cfg.bind_port,
        plan,
        profile: file.host_profile,
        factory,
    })
}

/// Binds and starts a prepared component. Without `--bindPort`, takes the
/// lowest free port of the role's range.
pub fn launch(p: Prepared) -> Result<NodeHandle, CliError> {
    let range = p.plan.range(p.role);
    let ports: Vec<u16> = match p.bind_port {
        Some(port) => vec![port],
        None => range.iter().collect(),
    };
    let mut stop_when: Option<Box<dyn Fn(&dyn Component) -> bool + Send>> = match p.role {
        ComponentRole::User => Some(Box::new(|c: &dyn Component| {
            c.as_any().downcast_ref::<User>().is_some_and(User::is_finished)
        })),
        _ => None,
    };
    let mut factory = Some(p.factory);
    let mut last = String::new();
    for port in ports {
        let ep = Endpoint::new(p.bind_ip.clone(), port).map_err(|e| usage(e.to_string()))?;
        // Probe the port first so a failed bind does not consume the factory.
        match std::net::TcpListener::bind(ep.socket_addr().map_err(|e| usage(e.to_string()))?) {
            Ok(probe) => drop(probe),
            Err(e) => {
                last = format!("cannot bind {ep}: {e}");
                continue;
            }
        }
        let opts = NodeOptions {
            plan: p.plan.clone(),
            profile: p.profile.clone(),
            stop_when: stop_when.take(),
        };
        match start_node(ep.clone(), opts, factory.take().expect("used once")) {
            Ok(h) => return Ok(h),
            Err(TransportError::Bind(_, e)) => return Err(CliError::Bind(format!("cannot bind {ep}: {e}"))),
            Err(e) => return Err(CliError::Failed(e.to_string())),
        }
    }
    Err(CliError::Bind(if last.is_empty() {
        format!("no free port in {range}")
    } else {
        format!("{last} (range {range})")
    }))
}

fn interrupted() -> &'static AtomicBool {
    static FLAG: OnceLock<Arc<AtomicBool>> = OnceLock::new();
    FLAG.get_or_init(|| {
        let flag = Arc::new(AtomicBool::new(false));
        let f = flag.clone();
        if let Err(e) = ctrlc::set_handler(move || f.store(true, Ordering::SeqCst)) {
            log::debug!("no interrupt handler: {e}");
        }
        flag
    })
}

fn init_logging(path: Option<&PathBuf>, role: ComponentRole) {
    let mut b = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if role != ComponentRole::RemoteLogger {
        if let Some(p) = path {
            if let Ok(f) = std::fs::OpenOptions::new().create(true).append(true).open(p) {
                b.target(env_logger::Target::Pipe(Box::new(f)));
            }
        }
    }
    let _ = b.try_init();
}

fn run_scenario(args: &ScenarioArgs) -> Result<i32, CliError> {
    if args.list {
        for (name, _) in harness::BUNDLED {
            println!("{name}");
        }
        return Ok(0);
    }
    let what = args.scenario.as_deref().ok_or_else(|| usage("scenario: give a file or a bundled name (see --list)"))?;
    let text = match std::fs::read_to_string(what) {
        Ok(t) => t,
        Err(e) => harness::bundled(what)
            .map(str::to_string)
            .ok_or_else(|| usage(format!("{what}: {e}, and no bundled scenario has that name")))?,
    };
    let report = harness::run_json(&text, args.trace).map_err(|e| match e {
        harness::ScenarioError::Start(..) => CliError::Failed(e.to_string()),
        _ => usage(e.to_string()),
    })?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Failed(e.to_string()))?;
    match &args.out {
        Some(p) => std::fs::write(p, json + "\n").map_err(|e| CliError::Failed(e.to_string()))?,
        None => println!("{json}"),
    }
    Ok(if report.passed { 0 } else { 1 })
}

fn run_role(role: ComponentRole, cfg: &LaunchConfig) -> Result<i32, CliError> {
    init_logging(cfg.log_path.as_ref(), role);
    let prepared = prepare(role, cfg, |k| std::env::var(k).ok())?;
    let flag = interrupted();
    let handle = launch(prepared)?;
    let name = cfg.container_name.as_deref().unwrap_or(role.as_str());
    log::info!("{name} listening on {}", handle.endpoint());
    while !handle.is_finished() && !flag.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(100));
    }
    handle.stop();
    let component = handle.join();
    if role != ComponentRole::User {
        return Ok(0);
    }
    let Some(user) = component.as_ref().and_then(|c| c.as_any().downcast_ref::<User>()) else {
        return Ok(1);
    };
    let out = serde_json::json!({
        "phase": user.phase(),
        "error": user.error(),
        "results": user.results(),
        "responseTime": user.stats(),
    });
    println!("{}", serde_json::to_string_pretty(&out).unwrap_or_default());
    Ok(if user.error().is_none() && user.is_finished() { 0 } else { 1 })
}

/// Runs the command line; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match (&cli.command, cli.command.role()) {
        (Command::Scenario(a), _) => run_scenario(a),
        (Command::RemoteLogger(c) | Command::Master(c) | Command::Actor(c) | Command::User(c), Some(role)) => run_role(role, c),
        _ => unreachable!("every launch command has a role"),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fogbus: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("fogbus").chain(args.iter().copied())).unwrap()
    }

    fn config(args: &[&str]) -> LaunchConfig {
        match parse(args).command {
            Command::Master(c) | Command::Actor(c) | Command::User(c) | Command::RemoteLogger(c) => c,
            Command::Scenario(_) => unreachable!(),
        }
    }

    #[test]
    fn documented_command_lines_parse() {
        let c = config(&[
            "master", "--bindIP", "192.0.0.8", "--bindPort", "5001", "--remoteLoggerIP", "192.0.0.1",
            "--remoteLoggerPort", "5000", "--schedulerName", "OHNSGA", "--containerName", "TempContainerName",
        ]);
        assert_eq!(c.bind_ip, "192.0.0.8");
        assert_eq!(c.bind_port, Some(5001));
        assert_eq!(c.scheduler_name, "OHNSGA");
        let c = config(&[
            "user", "--bindIP", "192.0.0.9", "--masterIP", "192.0.0.8", "--masterPort", "5001", "--remoteLoggerIP",
            "192.0.0.1", "--remoteLoggerPort", "5000", "--applicationName", "GameOfLifeParallelized",
            "--applicationLabel", "480",
        ]);
        assert_eq!(c.application_label.as_deref(), Some("480"));
        config(&["remote-logger", "--bindIP", "192.0.0.1", "--containerName", "TempContainerName"]);
        config(&["actor", "--bindIP", "192.0.0.1", "--masterIP", "192.0.0.8", "--masterPort", "5001"]);
    }

    #[test]
    fn scheduler_names_are_checked() {
        let no_env = |_: &str| None;
        let ok = prepare(ComponentRole::Master, &config(&["master", "--schedulerName", "NSGA2"]), no_env);
        assert!(ok.is_ok());
        for bad in ["Bogus", "OHNSGA", "NSGA3"] {
            let err = prepare(ComponentRole::Master, &config(&["master", "--schedulerName", bad]), no_env).err().unwrap();
            assert_eq!(err.exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn out_of_range_bind_port_is_a_usage_error() {
        let err = prepare(ComponentRole::Master, &config(&["master", "--bindPort", "6000"]), |_| None).err().unwrap();
        assert!(matches!(err, CliError::Usage(_)));
        let ok = prepare(ComponentRole::Master, &config(&["master", "--bindPort", "6000"]), |k| {
            (k == "MASTER_PORT_RANGE").then(|| "6000-6001".into())
        });
        assert!(ok.is_ok());
    }

    #[test]
    fn video_path_is_out_of_scope() {
        let c = config(&["user", "--applicationName", "VideoOCR", "--videoPath", "/v.mp4"]);
        let err = prepare(ComponentRole::User, &c, |_| None).err().unwrap();
        assert!(err.to_string().contains("out of scope"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn user_flags() {
        let base = ["user", "--applicationName", "NaiveFormulaParallelized", "--input", "a=1,b=2,c=3"];
        let err = prepare(ComponentRole::User, &config(&base), |_| None).err().unwrap();
        assert!(err.to_string().contains("--masterIP"));
        let with_master: Vec<&str> = base.iter().copied().chain(["--masterIP", "127.0.0.1"]).collect();
        assert!(prepare(ComponentRole::User, &config(&with_master), |_| None).is_ok());
        let unknown = config(&["user", "--applicationName", "Nope", "--masterIP", "127.0.0.1", "--input", "a=1"]);
        assert_eq!(prepare(ComponentRole::User, &unknown, |_| None).err().unwrap().exit_code(), 2);
    }

    #[test]
    fn inputs_parse() {
        let r = parse_input("a=1, b=2.5,name=x,flag=true").unwrap();
        assert_eq!(r.get("a"), Some(&Value::from(1)));
        assert_eq!(r.get("b"), Some(&Value::from(2.5)));
        assert_eq!(r.get("name"), Some(&Value::from("x")));
        assert_eq!(r.get("flag"), Some(&Value::from(true)));
        assert!(parse_input("a").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["fogbus", "master", "--nonsense"]), 2);
        assert_eq!(run(["fogbus", "master", "--schedulerName", "Bogus"]), 2);
        assert_eq!(run(["fogbus", "scenario", "empty"]), 0);
        assert_eq!(run(["fogbus", "scenario", "/no/such/file.json"]), 2);
    }
}
