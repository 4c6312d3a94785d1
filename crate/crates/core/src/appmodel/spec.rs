// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

/// Virtual parent standing for user-side data injection.
pub const SENSOR: &str = "Sensor";
/// Virtual child standing for result delivery back to the user.
pub const ACTUATOR: &str = "Actuator";

pub fn is_virtual(name: &str) -> bool {
    name == SENSOR || name == ACTUATOR
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub parents: Vec<String>,
    pub children: Vec<String>,
}

/// An application DAG. The JSON form uses the keys `entryTasks` and
/// `tasksWithDependency`, with `parents`/`children` lists per task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApplicationSpec {
    #[serde(default)]
    pub name: String,
    pub entry_tasks: Vec<String>,
    pub tasks_with_dependency: BTreeMap<String, Dependency>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    Cycle { tasks: Vec<String> },
    UndefinedTask { name: String, referenced_by: String },
    EntryWithoutSensor { task: String },
    SensorParentNotEntry { task: String },
    ActuatorUnreachable { task: String },
    AsymmetricEdge { parent: String, child: String },
    NoTasks,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("application graph has a cycle through {0:?}")]
pub struct CycleError(pub Vec<String>);

impl ApplicationSpec {
    pub fn new(name: impl Into<String>, entry_tasks: &[&str], deps: &[(&str, &[&str], &[&str])]) -> Self {
        ApplicationSpec {
            name: name.into(),
            entry_tasks: entry_tasks.iter().map(|s| s.to_string()).collect(),
            tasks_with_dependency: deps
                .iter()
                .map(|(task, parents, children)| {
                    (
                        task.to_string(),
                        Dependency {
                            parents: parents.iter().map(|s| s.to_string()).collect(),
                            children: children.iter().map(|s| s.to_string()).collect(),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn task_names(&self) -> impl Iterator<Item = &str> {
        self.tasks_with_dependency.keys().map(String::as_str)
    }

    pub fn task_count(&self) -> usize {
        self.tasks_with_dependency.len()
    }

    pub fn contains(&self, task: &str) -> bool {
        self.tasks_with_dependency.contains_key(task)
    }

    pub fn dependency(&self, task: &str) -> Option<&Dependency> {
        self.tasks_with_dependency.get(task)
    }

    /// Parents that are real tasks (the virtual `Sensor` excluded).
    pub fn task_parents(&self, task: &str) -> Vec<&str> {
        self.dependency(task)
            .map(|d| d.parents.iter().map(String::as_str).filter(|p| !is_virtual(p)).collect())
            .unwrap_or_default()
    }

    /// Children that are real tasks (the virtual `Actuator` excluded).
    pub fn task_children(&self, task: &str) -> Vec<&str> {
        self.dependency(task)
            .map(|d| d.children.iter().map(String::as_str).filter(|c| !is_virtual(c)).collect())
            .unwrap_or_default()
    }

    pub fn feeds_actuator(&self, task: &str) -> bool {
        self.dependency(task).is_some_and(|d| d.children.iter().any(|c| c == ACTUATOR))
    }

    /// Task-to-task edges `(parent, child)`, gathered from both sides of the
    /// dependency lists.
    pub fn edges(&self) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for (task, dep) in &self.tasks_with_dependency {
            for c in dep.children.iter().filter(|c| !is_virtual(c) && self.contains(c)) {
                out.insert((task.clone(), c.clone()));
            }
            for p in dep.parents.iter().filter(|p| !is_virtual(p) && self.contains(p)) {
                out.insert((p.clone(), task.clone()));
            }
        }
        out
    }

    /// Every invariant violation; an empty list means the spec is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = BTreeSet::new();
        if self.tasks_with_dependency.is_empty() {
            out.insert(Violation::NoTasks);
        }
        for entry in &self.entry_tasks {
            match self.dependency(entry) {
                None => {
                    out.insert(Violation::UndefinedTask {
                        name: entry.clone(),
                        referenced_by: "entryTasks".into(),
                    });
                }
                Some(dep) if !dep.parents.iter().any(|p| p == SENSOR) => {
                    out.insert(Violation::EntryWithoutSensor { task: entry.clone() });
                }
                Some(_) => {}
            }
        }
        for (task, dep) in &self.tasks_with_dependency {
            if dep.parents.iter().any(|p| p == SENSOR) && !self.entry_tasks.contains(task) {
                out.insert(Violation::SensorParentNotEntry { task: task.clone() });
            }
            for name in dep.parents.iter().chain(&dep.children) {
                if !is_virtual(name) && !self.contains(name) {
                    out.insert(Violation::UndefinedTask {
                        name: name.clone(),
                        referenced_by: task.clone(),
                    });
                }
            }
            for c in dep.children.iter().filter(|c| !is_virtual(c)) {
                if let Some(cd) = self.dependency(c) {
                    if !cd.parents.contains(task) {
                        out.insert(Violation::AsymmetricEdge {
                            parent: task.clone(),
                            child: c.clone(),
                        });
                    }
                }
            }
            for p in dep.parents.iter().filter(|p| !is_virtual(p)) {
                if let Some(pd) = self.dependency(p) {
                    if !pd.children.contains(task) {
                        out.insert(Violation::AsymmetricEdge {
                            parent: p.clone(),
                            child: task.clone(),
                        });
                    }
                }
            }
        }
        if let Err(CycleError(tasks)) = self.topological_layers() {
            out.insert(Violation::Cycle { tasks });
        }
        // Reverse reachability from Actuator.
        let edges = self.edges();
        let mut reaches: BTreeSet<&str> = self
            .tasks_with_dependency
            .keys()
            .filter(|t| self.feeds_actuator(t))
            .map(String::as_str)
            .collect();
        let mut frontier: VecDeque<&str> = reaches.iter().copied().collect();
        while let Some(t) = frontier.pop_front() {
            for (p, c) in &edges {
                if c == t && reaches.insert(p.as_str()) {
                    frontier.push_back(p.as_str());
                }
            }
        }
        for task in self.tasks_with_dependency.keys() {
            if !reaches.contains(task.as_str()) {
                out.insert(Violation::ActuatorUnreachable { task: task.clone() });
            }
        }
        out.into_iter().collect()
    }

    /// Kahn-style levelling: layer `k` holds the tasks whose task-parents all
    /// sit in earlier layers.
    pub fn topological_layers(&self) -> Result<Vec<BTreeSet<String>>, CycleError> {
        let edges = self.edges();
        let mut indegree: BTreeMap<&str, usize> = self.task_names().map(|t| (t, 0)).collect();
        for (_, c) in &edges {
            *indegree.get_mut(c.as_str()).expect("edge endpoints are defined tasks") += 1;
        }
        let mut layers = Vec::new();
        let mut current: BTreeSet<String> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(t, _)| t.to_string())
            .collect();
        let mut placed = 0;
        while !current.is_empty() {
            placed += current.len();
            let mut next = BTreeSet::new();
            for (p, c) in &edges {
                if current.contains(p) {
                    let d = indegree.get_mut(c.as_str()).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        next.insert(c.clone());
                    }
                }
            }
            layers.push(current);
            current = next;
        }
        if placed != indegree.len() {
            let stuck = indegree.into_iter().filter(|(_, d)| *d > 0).map(|(t, _)| t.to_string()).collect();
            return Err(CycleError(stuck));
        }
        Ok(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ApplicationSpec {
        ApplicationSpec::new(
            "chain",
            &["A"],
            &[
                ("A", &["Sensor"], &["B"]),
                ("B", &["A"], &["C"]),
                ("C", &["B"], &["Actuator"]),
            ],
        )
    }

    fn diamond() -> ApplicationSpec {
        ApplicationSpec::new(
            "diamond",
            &["A"],
            &[
                ("A", &["Sensor"], &["B", "C"]),
                ("B", &["A"], &["D"]),
                ("C", &["A"], &["D"]),
                ("D", &["B", "C"], &["Actuator"]),
            ],
        )
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn chain_layers() {
        assert!(chain().validate().is_empty());
        assert_eq!(chain().topological_layers().unwrap(), vec![set(&["A"]), set(&["B"]), set(&["C"])]);
    }

    #[test]
    fn diamond_layers() {
        assert!(diamond().validate().is_empty());
        assert_eq!(
            diamond().topological_layers().unwrap(),
            vec![set(&["A"]), set(&["B", "C"]), set(&["D"])]
        );
    }

    #[test]
    fn two_cycle_is_reported() {
        let spec = ApplicationSpec::new(
            "cyc",
            &["T0"],
            &[
                ("T0", &["Sensor"], &["T1", "Actuator"]),
                ("T1", &["T0", "T2"], &["T2"]),
                ("T2", &["T1"], &["T1"]),
            ],
        );
        let v = spec.validate();
        assert!(v.iter().any(|v| matches!(v, Violation::Cycle { tasks } if tasks == &["T1", "T2"])), "{v:?}");
        assert!(spec.topological_layers().is_err());
    }

    #[test]
    fn undefined_child_is_reported() {
        let spec = ApplicationSpec::new("ghost", &["A"], &[("A", &["Sensor"], &["Ghost", "Actuator"])]);
        assert_eq!(
            spec.validate(),
            vec![Violation::UndefinedTask {
                name: "Ghost".into(),
                referenced_by: "A".into()
            }]
        );
    }

    #[test]
    fn entry_without_sensor_and_dead_end() {
        let spec = ApplicationSpec::new("bad", &["A"], &[("A", &[], &[])]);
        let v = spec.validate();
        assert!(v.contains(&Violation::EntryWithoutSensor { task: "A".into() }));
        assert!(v.contains(&Violation::ActuatorUnreachable { task: "A".into() }));
    }

    #[test]
    fn json_shape() {
        let text = r#"{
            "entryTasks": ["NaiveFormula0"],
            "tasksWithDependency": {
                "NaiveFormula0": {"parents": ["Sensor"], "children": ["Actuator"]}
            }
        }"#;
        let spec = ApplicationSpec::from_json(text).unwrap();
        assert!(spec.validate().is_empty());
        let back = serde_json::to_value(&spec).unwrap();
        assert!(back.get("tasksWithDependency").is_some());
        assert!(back.get("entryTasks").is_some());
    }
}
