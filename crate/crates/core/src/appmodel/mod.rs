// SPDX-License-Identifier: Apache-2.0

//! Application DAGs, the task registry and the built-in applications.

mod record;
mod spec;
pub mod tasks;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use record::DataRecord;
pub use spec::{is_virtual, ApplicationSpec, CycleError, Dependency, Violation, ACTUATOR, SENSOR};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("input is missing key `{0}`")]
    MissingKey(String),
    #[error("input key `{0}` is not numeric")]
    NotNumeric(String),
    #[error("division by zero in {0}")]
    DivisionByZero(String),
    #[error("key `{key}` holds a {existing}, refusing to overwrite it with a {incoming}")]
    TypeConflict {
        key: String,
        existing: &'static str,
        incoming: &'static str,
    },
    #[error("grid rows have different lengths")]
    RaggedGrid,
    #[error("value is not a boolean matrix")]
    NotAGrid,
}

type ExecFn = dyn Fn(DataRecord) -> Result<Option<DataRecord>, TaskError> + Send + Sync;

/// A named unit of application logic.
#[derive(Clone)]
pub struct TaskDefinition {
    pub task_id: u32,
    pub task_name: String,
    /// Abstract work units; execution-time estimates divide this by host capacity.
    pub work: f64,
    exec: Arc<ExecFn>,
}

impl fmt::Debug for TaskDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskDefinition")
            .field("task_id", &self.task_id)
            .field("task_name", &self.task_name)
            .field("work", &self.work)
            .finish_non_exhaustive()
    }
}

impl TaskDefinition {
    pub fn new<F>(task_id: u32, task_name: impl Into<String>, work: f64, exec: F) -> Self
    where
        F: Fn(DataRecord) -> Result<Option<DataRecord>, TaskError> + Send + Sync + 'static,
    {
        TaskDefinition {
            task_id,
            task_name: task_name.into(),
            work,
            exec: Arc::new(exec),
        }
    }

    /// Runs the task. `Ok(None)` means the output is dropped rather than forwarded.
    pub fn exec(&self, input: DataRecord) -> Result<Option<DataRecord>, TaskError> {
        (self.exec)(input)
    }
}

/// Number of Game of Life tasks the registry defines (`GameOfLife0..62`).
pub const GAME_OF_LIFE_TASKS: usize = 63;
/// Default task count for the Game of Life applications.
pub const DEFAULT_GAME_OF_LIFE_TASKS: usize = 8;

const FIRST_GAME_OF_LIFE_ID: u32 = 112;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("task id {0} is registered twice")]
    DuplicateId(u32),
    #[error("task name `{0}` is registered twice")]
    DuplicateName(String),
}

/// Immutable lookup from task name to definition.
#[derive(Debug, Clone, Default)]
pub struct TaskRegistry {
    by_name: BTreeMap<String, TaskDefinition>,
}

impl TaskRegistry {
    pub fn new(defs: impl IntoIterator<Item = TaskDefinition>) -> Result<Self, RegistryError> {
        let mut by_name = BTreeMap::new();
        let mut ids = std::collections::BTreeSet::new();
        for def in defs {
            if !ids.insert(def.task_id) {
                return Err(RegistryError::DuplicateId(def.task_id));
            }
            if by_name.contains_key(&def.task_name) {
                return Err(RegistryError::DuplicateName(def.task_name));
            }
            by_name.insert(def.task_name.clone(), def);
        }
        Ok(TaskRegistry { by_name })
    }

    pub fn builtin() -> Self {
        let mut defs = vec![
            TaskDefinition::new(108, "NaiveFormula0", 100.0, |r| tasks::naive_formula0(r).map(Some)),
            TaskDefinition::new(109, "NaiveFormula1", 150.0, |r| tasks::naive_formula1(r).map(Some)),
            TaskDefinition::new(110, "NaiveFormula2", 120.0, |r| tasks::naive_formula2(r).map(Some)),
            TaskDefinition::new(111, "NaiveFormula3", 60.0, |r| tasks::naive_formula3(r).map(Some)),
        ];
        for k in 0..GAME_OF_LIFE_TASKS {
            let side = tasks::grid_side(k) as f64;
            defs.push(TaskDefinition::new(
                FIRST_GAME_OF_LIFE_ID + k as u32,
                format!("GameOfLife{k}"),
                side * side,
                move |r| tasks::game_of_life_task(k, r).map(Some),
            ));
        }
        Self::new(defs).expect("built-in tasks have unique ids and names")
    }

    /// Looks a task up by name.
    pub fn init_task(&self, task_name: &str) -> Option<TaskDefinition> {
        self.by_name.get(task_name).cloned()
    }

    pub fn get(&self, task_name: &str) -> Option<&TaskDefinition> {
        self.by_name.get(task_name)
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }
}

/// When a user considers one submission complete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completion {
    /// The aggregate carries `finalResult`.
    FinalResult,
    /// The aggregate carries every listed key.
    AllKeys(Vec<String>),
}

impl Completion {
    pub fn is_complete(&self, aggregate: &DataRecord) -> bool {
        match self {
            Completion::FinalResult => aggregate.contains_key("finalResult"),
            Completion::AllKeys(keys) => !keys.is_empty() && keys.iter().all(|k| aggregate.contains_key(k)),
        }
    }

    pub fn missing(&self, aggregate: &DataRecord) -> Vec<String> {
        let keys = match self {
            Completion::FinalResult => vec!["finalResult".to_string()],
            Completion::AllKeys(keys) => keys.clone(),
        };
        keys.into_iter().filter(|k| !aggregate.contains_key(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Application {
    pub spec: ApplicationSpec,
    pub completion: Completion,
}

pub const NAIVE_FORMULA_PARALLELIZED: &str = "NaiveFormulaParallelized";
pub const NAIVE_FORMULA_SERIALIZED: &str = "NaiveFormulaSerialized";
pub const GAME_OF_LIFE_SERIALIZED: &str = "GameOfLifeSerialized";
pub const GAME_OF_LIFE_PARALLELIZED: &str = "GameOfLifeParallelized";
pub const GAME_OF_LIFE_PYRAMID: &str = "GameOfLifePyramid";

/// Name of the `k`-th Game of Life task.
pub fn game_of_life_task_name(k: usize) -> String {
    format!("GameOfLife{k}")
}

fn naive_formula_parallelized() -> ApplicationSpec {
    ApplicationSpec::new(
        NAIVE_FORMULA_PARALLELIZED,
        &["NaiveFormula0", "NaiveFormula1", "NaiveFormula2"],
        &[
            ("NaiveFormula0", &[SENSOR], &[ACTUATOR]),
            ("NaiveFormula1", &[SENSOR], &[ACTUATOR]),
            ("NaiveFormula2", &[SENSOR], &[ACTUATOR]),
        ],
    )
}

fn naive_formula_serialized() -> ApplicationSpec {
    ApplicationSpec::new(
        NAIVE_FORMULA_SERIALIZED,
        &["NaiveFormula0"],
        &[
            ("NaiveFormula0", &[SENSOR], &["NaiveFormula1"]),
            ("NaiveFormula1", &["NaiveFormula0"], &["NaiveFormula2"]),
            ("NaiveFormula2", &["NaiveFormula1"], &["NaiveFormula3"]),
            ("NaiveFormula3", &["NaiveFormula2"], &[ACTUATOR]),
        ],
    )
}

fn from_edges(name: &str, n: usize, parents_of: impl Fn(usize) -> Vec<usize>) -> ApplicationSpec {
    let mut deps: BTreeMap<String, Dependency> = (0..n).map(|k| (game_of_life_task_name(k), Dependency::default())).collect();
    for k in 0..n {
        let parents = parents_of(k);
        for &p in &parents {
            deps.get_mut(&game_of_life_task_name(p)).unwrap().children.push(game_of_life_task_name(k));
        }
        let dep = deps.get_mut(&game_of_life_task_name(k)).unwrap();
        if parents.is_empty() {
            dep.parents.push(SENSOR.into());
        }
        dep.parents.extend(parents.iter().map(|p| game_of_life_task_name(*p)));
    }
    for dep in deps.values_mut() {
        if dep.children.is_empty() {
            dep.children.push(ACTUATOR.into());
        }
    }
    let entry_tasks = deps
        .iter()
        .filter(|(_, d)| d.parents.iter().any(|p| p == SENSOR))
        .map(|(t, _)| t.clone())
        .collect();
    ApplicationSpec {
        name: name.to_string(),
        entry_tasks,
        tasks_with_dependency: deps,
    }
}

fn game_of_life_serialized(n: usize) -> ApplicationSpec {
    from_edges(GAME_OF_LIFE_SERIALIZED, n, |k| if k == 0 { vec![] } else { vec![k - 1] })
}

fn game_of_life_parallelized(n: usize) -> ApplicationSpec {
    from_edges(GAME_OF_LIFE_PARALLELIZED, n, |_| vec![])
}

/// Binary-tree reduction in heap order: task `k` receives from tasks
/// `2k+1` and `2k+2`; task 0 is the root that reports to the actuator.
fn game_of_life_pyramid(n: usize) -> ApplicationSpec {
    from_edges(GAME_OF_LIFE_PYRAMID, n, |k| [2 * k + 1, 2 * k + 2].into_iter().filter(|c| *c < n).collect())
}

/// The built-in application specs, with `game_of_life_tasks` tasks in each
/// Game of Life variant (clamped to `1..=63`).
pub fn builtin_applications(game_of_life_tasks: usize) -> Vec<ApplicationSpec> {
    let n = game_of_life_tasks.clamp(1, GAME_OF_LIFE_TASKS);
    vec![
        naive_formula_parallelized(),
        naive_formula_serialized(),
        game_of_life_serialized(n),
        game_of_life_parallelized(n),
        game_of_life_pyramid(n),
    ]
}

/// Applications known to a component, with their completion predicates.
#[derive(Debug, Clone)]
pub struct ApplicationCatalog {
    apps: BTreeMap<String, Application>,
}

impl Default for ApplicationCatalog {
    fn default() -> Self {
        Self::builtin(DEFAULT_GAME_OF_LIFE_TASKS)
    }
}

impl ApplicationCatalog {
    pub fn builtin(game_of_life_tasks: usize) -> Self {
        let mut catalog = ApplicationCatalog { apps: BTreeMap::new() };
        for spec in builtin_applications(game_of_life_tasks) {
            let completion = completion_for(&spec);
            catalog.apps.insert(spec.name.clone(), Application { spec, completion });
        }
        catalog
    }

    /// Adds an application; returns its violations instead if it is invalid.
    pub fn insert(&mut self, spec: ApplicationSpec, completion: Completion) -> Result<(), Vec<Violation>> {
        let violations = spec.validate();
        if !violations.is_empty() {
            return Err(violations);
        }
        self.apps.insert(spec.name.clone(), Application { spec, completion });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Application> {
        self.apps.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.apps.keys().map(String::as_str)
    }
}

fn completion_for(spec: &ApplicationSpec) -> Completion {
    match spec.name.as_str() {
        NAIVE_FORMULA_PARALLELIZED => Completion::AllKeys((0..3).map(|k| format!("resultPart{k}")).collect()),
        GAME_OF_LIFE_SERIALIZED | GAME_OF_LIFE_PARALLELIZED | GAME_OF_LIFE_PYRAMID => {
            Completion::AllKeys((0..spec.task_count()).map(tasks::grid_key).collect())
        }
        _ => Completion::FinalResult,
    }
}

/// Whether `aggregate` completes one submission of `app`.
pub fn completion_predicate(app: &Application, aggregate: &DataRecord) -> bool {
    app.completion.is_complete(aggregate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use std::collections::BTreeSet;

    #[test]
    fn init_task_ids() {
        let reg = TaskRegistry::builtin();
        assert_eq!(reg.init_task("NaiveFormula0").unwrap().task_id, 108);
        assert_eq!(reg.init_task("NaiveFormula1").unwrap().task_id, 109);
        assert_eq!(reg.init_task("NaiveFormula2").unwrap().task_id, 110);
        assert_eq!(reg.init_task("NaiveFormula3").unwrap().task_id, 111);
        assert!(reg.init_task("NoSuchTask").is_none());
        assert_eq!(reg.init_task("GameOfLife62").unwrap().task_id, 174);
        assert_eq!(reg.len(), 4 + 63);
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let a = TaskDefinition::new(1, "A", 1.0, |r| Ok(Some(r)));
        let b = TaskDefinition::new(1, "B", 1.0, |r| Ok(Some(r)));
        assert_eq!(TaskRegistry::new([a.clone(), b]).unwrap_err(), RegistryError::DuplicateId(1));
        let c = TaskDefinition::new(2, "A", 1.0, |r| Ok(Some(r)));
        assert!(matches!(TaskRegistry::new([a, c]), Err(RegistryError::DuplicateName(_))));
    }

    #[test]
    fn builtin_specs_are_valid() {
        for n in [1, 2, 5, 8, 63] {
            for spec in builtin_applications(n) {
                assert!(spec.validate().is_empty(), "{} (n={n}): {:?}", spec.name, spec.validate());
                let reg = TaskRegistry::builtin();
                for t in spec.task_names() {
                    assert!(reg.get(t).is_some(), "{t}");
                }
            }
        }
    }

    #[test]
    fn naive_formula_shapes() {
        let apps = builtin_applications(8);
        let par = &apps[0];
        assert_eq!(par.entry_tasks, ["NaiveFormula0", "NaiveFormula1", "NaiveFormula2"]);
        let layers = par.topological_layers().unwrap();
        assert_eq!(layers.len(), 1);
        assert_eq!(layers[0].len(), 3);
        let ser = &apps[1];
        assert_eq!(ser.task_count(), 4);
        assert_eq!(ser.entry_tasks, ["NaiveFormula0"]);
        assert_eq!(ser.topological_layers().unwrap().len(), 4);
    }

    #[test]
    fn pyramid_is_a_reduction_tree() {
        let spec = game_of_life_pyramid(7);
        let layers = spec.topological_layers().unwrap();
        let sizes: Vec<usize> = layers.iter().map(BTreeSet::len).collect();
        assert_eq!(sizes, [4, 2, 1]);
        assert!(spec.feeds_actuator("GameOfLife0"));
        assert_eq!(spec.task_parents("GameOfLife0"), ["GameOfLife1", "GameOfLife2"]);
    }

    #[test]
    fn completion_predicates() {
        let catalog = ApplicationCatalog::default();
        let ser = catalog.get(NAIVE_FORMULA_SERIALIZED).unwrap();
        let with_final: DataRecord = [("finalResult", json!(9.0))].into_iter().collect();
        assert!(completion_predicate(ser, &with_final));
        assert!(!completion_predicate(ser, &DataRecord::new()));
        let par = catalog.get(NAIVE_FORMULA_PARALLELIZED).unwrap();
        let partial: DataRecord = [("resultPart0", json!(6)), ("resultPart2", json!(3.0))].into_iter().collect();
        assert!(!completion_predicate(par, &partial));
        assert_eq!(par.completion.missing(&partial), ["resultPart1"]);
        assert!(!completion_predicate(par, &DataRecord::new()));
        let gol = catalog.get(GAME_OF_LIFE_PARALLELIZED).unwrap();
        assert_eq!(gol.completion, Completion::AllKeys((0..8).map(tasks::grid_key).collect()));
    }
}
