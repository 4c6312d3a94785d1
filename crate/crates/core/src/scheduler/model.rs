// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use crate::appmodel::TaskDefinition;
use crate::profile::HostProfile;

use super::SchedulerError;

/// Execution-time estimate for one task on one host.
///
/// With recorded history the estimate is the mean of the observations;
/// otherwise it is `work / (cores × GHz × (1 − utilization))`.
pub fn estimate_exec_time(task: &TaskDefinition, host: &HostProfile, history: &[f64]) -> Result<f64, SchedulerError> {
    if !history.is_empty() {
        return Ok(history.iter().sum::<f64>() / history.len() as f64);
    }
    formula_estimate(task.work, host)
}

pub(crate) fn formula_estimate(work: f64, host: &HostProfile) -> Result<f64, SchedulerError> {
    let util = host.cpu.utilization;
    if util >= 1.0 {
        return Err(SchedulerError::SaturatedHost { utilization: util });
    }
    let cores = host.cpu.cores.max(1) as f64;
    let ghz = host.cpu.frequency / 1000.0;
    if !(ghz > 0.0) {
        return Err(SchedulerError::InvalidProfile(format!("frequency {}", host.cpu.frequency)));
    }
    Ok(work / (cores * ghz * (1.0 - util.max(0.0))))
}

/// Observed execution times, keyed by `(taskName, hostID)`.
#[derive(Debug, Clone, Default)]
pub struct ExecTimeModel {
    history: BTreeMap<(String, String), Vec<f64>>,
}

impl ExecTimeModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, task_name: &str, host_id: &str, millis: f64) {
        if millis > 0.0 && millis.is_finite() {
            self.history
                .entry((task_name.to_string(), host_id.to_string()))
                .or_default()
                .push(millis);
        }
    }

    pub fn history(&self, task_name: &str, host_id: &str) -> &[f64] {
        self.history
            .get(&(task_name.to_string(), host_id.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn estimate(&self, task: &TaskDefinition, host_id: &str, profile: &HostProfile) -> Result<f64, SchedulerError> {
        estimate_exec_time(task, profile, self.history(&task.task_name, host_id))
    }
}
