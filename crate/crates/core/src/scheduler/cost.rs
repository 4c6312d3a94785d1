// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::appmodel::{ApplicationSpec, SENSOR};

/// Scheduler output: task order, task → host placement, and its cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Decision {
    #[serde(rename = "userID")]
    pub user_id: String,
    pub index_sequence: Vec<String>,
    #[serde(rename = "indexToHostID")]
    pub index_to_host_id: BTreeMap<String, String>,
    /// Milliseconds.
    pub scheduling_time: f64,
    /// Estimated end-to-end response time, milliseconds.
    pub cost: f64,
}

impl Decision {
    /// Edges `(parent, child)` whose parent does not precede the child.
    pub fn precedence_violations(&self, spec: &ApplicationSpec) -> Vec<(String, String)> {
        let pos: BTreeMap<&str, usize> = self
            .index_sequence
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        spec.edges()
            .into_iter()
            .filter(|(p, c)| match (pos.get(p.as_str()), pos.get(c.as_str())) {
                (Some(a), Some(b)) => a >= b,
                _ => true,
            })
            .collect()
    }
}

/// Scalar link latencies between hosts. `Sensor` and `Actuator` live on the
/// gateway host (the master's).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkLatency {
    pub gateway: String,
    pub default_ms: f64,
    pub pairs: BTreeMap<(String, String), f64>,
}

impl LinkLatency {
    pub fn uniform(gateway: impl Into<String>, default_ms: f64) -> Self {
        LinkLatency {
            gateway: gateway.into(),
            default_ms,
            pairs: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, a: &str, b: &str, ms: f64) {
        self.pairs.insert(ordered(a, b), ms);
    }

    pub fn latency(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 0.0;
        }
        self.pairs.get(&ordered(a, b)).copied().unwrap_or(self.default_ms)
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Longest path through the placed DAG: per-task estimates plus link latency
/// on every edge whose endpoints sit on different hosts, including the
/// sensor and actuator edges to the gateway.
pub fn estimate_cost(
    placement: &BTreeMap<String, String>,
    spec: &ApplicationSpec,
    estimate: impl Fn(&str, &str) -> f64,
    links: &LinkLatency,
) -> f64 {
    let Ok(layers) = spec.topological_layers() else {
        return f64::INFINITY;
    };
    let mut finish: BTreeMap<&str, f64> = BTreeMap::new();
    let mut total: f64 = 0.0;
    for task in layers.iter().flatten() {
        let Some(host) = placement.get(task) else { continue };
        let dep = spec.dependency(task).expect("layered tasks are defined");
        let mut start: f64 = 0.0;
        for parent in &dep.parents {
            let ready = if parent == SENSOR {
                links.latency(&links.gateway, host)
            } else {
                match (finish.get(parent.as_str()), placement.get(parent)) {
                    (Some(f), Some(ph)) => f + links.latency(ph, host),
                    _ => 0.0,
                }
            };
            start = start.max(ready);
        }
        let done = start + estimate(task, host);
        finish.insert(task.as_str(), done);
        if spec.feeds_actuator(task) {
            total = total.max(done + links.latency(host, &links.gateway));
        }
    }
    total
}
