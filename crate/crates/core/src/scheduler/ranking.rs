// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use crate::appmodel::ApplicationSpec;

use super::{Decision, EstimateTable, ScheduleContext, SchedulerError};

/// Precedence-respecting order: layer by layer, and within a layer by
/// descending mean estimate over all hosts, ties by task name.
pub fn rank_application_tasks(spec: &ApplicationSpec, table: &EstimateTable) -> Result<Vec<String>, SchedulerError> {
    let layers = spec.topological_layers().map_err(|e| SchedulerError::Cycle(e.0))?;
    let mut out = Vec::with_capacity(spec.task_count());
    for layer in layers {
        let mut tasks: Vec<(f64, String)> = layer.into_iter().map(|t| (table.mean(&t), t)).collect();
        tasks.sort_by(|(ma, ta), (mb, tb)| mb.total_cmp(ma).then_with(|| ta.cmp(tb)));
        out.extend(tasks.into_iter().map(|(_, t)| t));
    }
    Ok(out)
}

/// Greedy list scheduling in rank order: each task goes to the host that
/// finishes it first, where a host can start once it is idle and every
/// parent has finished. Ties go to the lower host id.
pub fn tasks_assignment(
    ranked: &[String],
    spec: &ApplicationSpec,
    table: &EstimateTable,
) -> Result<BTreeMap<String, String>, SchedulerError> {
    if table.hosts().is_empty() {
        return Err(SchedulerError::NoActors);
    }
    let mut busy = vec![0.0f64; table.hosts().len()];
    let mut finish: BTreeMap<&str, f64> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for task in ranked {
        let ready = spec
            .task_parents(task)
            .iter()
            .filter_map(|p| finish.get(p))
            .fold(0.0f64, |a, b| a.max(*b));
        let mut best: Option<(f64, usize)> = None;
        for (h, host_busy) in busy.iter().enumerate() {
            let Some(est) = table.get(task, h) else { continue };
            let done = host_busy.max(ready) + est;
            // Hosts are sorted by id, so strict `<` keeps the lower id on ties.
            if best.is_none_or(|(b, _)| done < b) {
                best = Some((done, h));
            }
        }
        let (done, h) = best.ok_or(SchedulerError::NoActors)?;
        busy[h] = done;
        finish.insert(task.as_str(), done);
        out.insert(task.clone(), table.hosts()[h].clone());
    }
    Ok(out)
}

pub fn schedule_ranking_based(ctx: &ScheduleContext<'_>) -> Result<Decision, SchedulerError> {
    let start = ctx.now();
    let table = EstimateTable::build(ctx)?;
    let ranked = rank_application_tasks(ctx.app, &table)?;
    let placement = tasks_assignment(&ranked, ctx.app, &table)?;
    let scheduling_time = ctx.now() - start;
    let cost = table.cost(&placement, ctx.app, ctx.links);
    Ok(Decision {
        user_id: ctx.user_id.to_string(),
        index_sequence: ranked,
        index_to_host_id: placement,
        scheduling_time,
        cost,
    })
}
