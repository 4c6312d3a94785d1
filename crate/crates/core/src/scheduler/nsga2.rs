// SPDX-License-Identifier: Apache-2.0

//! NSGA-II placement search.
//!
//! An individual is one host index per task. Both objectives are minimised:
//! estimated response time and load imbalance (max − min accumulated busy
//! time across hosts). Survivors are picked by front rank, then by crowding
//! distance.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::appmodel::ApplicationSpec;

use super::pareto::{crowding_distance, non_dominated_sort};
use super::ranking::rank_application_tasks;
use super::{Decision, EstimateTable, LinkLatency, ScheduleContext, SchedulerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Nsga2Params {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene probability of a uniform reset.
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Default for Nsga2Params {
    fn default() -> Self {
        Nsga2Params {
            population_size: 32,
            generations: 50,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Individual {
    genes: Vec<usize>,
    objectives: [f64; 2],
    rank: usize,
    crowding: f64,
}

struct Problem<'a> {
    tasks: Vec<String>,
    spec: &'a ApplicationSpec,
    table: &'a EstimateTable,
    links: &'a LinkLatency,
}

impl Problem<'_> {
    fn placement(&self, genes: &[usize]) -> BTreeMap<String, String> {
        self.tasks
            .iter()
            .zip(genes)
            .map(|(t, &h)| (t.clone(), self.table.hosts()[h].clone()))
            .collect()
    }

    fn evaluate(&self, genes: Vec<usize>) -> Individual {
        let placement = self.placement(&genes);
        let response = self.table.cost(&placement, self.spec, self.links);
        let mut busy = vec![0.0f64; self.table.hosts().len()];
        for (t, &h) in self.tasks.iter().zip(&genes) {
            busy[h] += self.table.get(t, h).unwrap_or(f64::INFINITY);
        }
        let max = busy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = busy.iter().copied().fold(f64::INFINITY, f64::min);
        Individual {
            genes,
            objectives: [response, max - min],
            rank: 0,
            crowding: 0.0,
        }
    }
}

fn assign_rank_and_crowding(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let points: Vec<Vec<f64>> = pop.iter().map(|i| i.objectives.to_vec()).collect();
    let fronts = non_dominated_sort(&points).expect("objective vectors share a dimension");
    for (rank, front) in fronts.iter().enumerate() {
        let objs: Vec<Vec<f64>> = front.iter().map(|&i| points[i].clone()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&objs)) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
    fronts
}

fn better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

fn tournament<'p>(pop: &'p [Individual], rng: &mut ChaCha8Rng) -> &'p Individual {
    let a = &pop[rng.gen_range(0..pop.len())];
    let b = &pop[rng.gen_range(0..pop.len())];
    if better(b, a) {
        b
    } else {
        a
    }
}

/// Runs the search and returns the front-0 placement with the lowest
/// response time (ties broken by gene vector).
pub fn schedule_nsga2(ctx: &ScheduleContext<'_>, params: &Nsga2Params) -> Result<Decision, SchedulerError> {
    let start = ctx.now();
    let table = EstimateTable::build(ctx)?;
    let hosts = table.hosts().len();
    if hosts == 0 {
        return Err(SchedulerError::NoActors);
    }
    let ranked = rank_application_tasks(ctx.app, &table)?;
    let problem = Problem {
        tasks: ranked.clone(),
        spec: ctx.app,
        table: &table,
        links: ctx.links,
    };
    let genes_len = problem.tasks.len();
    let pop_size = params.population_size.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut pop: Vec<Individual> = (0..pop_size)
        .map(|_| problem.evaluate((0..genes_len).map(|_| rng.gen_range(0..hosts)).collect()))
        .collect();
    assign_rank_and_crowding(&mut pop);

    for _ in 0..params.generations {
        let mut offspring = Vec::with_capacity(pop_size);
        while offspring.len() < pop_size {
            let mut a = tournament(&pop, &mut rng).genes.clone();
            let mut b = tournament(&pop, &mut rng).genes.clone();
            if genes_len > 1 && rng.gen_bool(params.crossover_rate.clamp(0.0, 1.0)) {
                let cut = rng.gen_range(1..genes_len);
                for g in cut..genes_len {
                    std::mem::swap(&mut a[g], &mut b[g]);
                }
            }
            for child in [&mut a, &mut b] {
                for gene in child.iter_mut() {
                    if rng.gen_bool(params.mutation_rate.clamp(0.0, 1.0)) {
                        *gene = rng.gen_range(0..hosts);
                    }
                }
            }
            offspring.push(problem.evaluate(a));
            if offspring.len() < pop_size {
                offspring.push(problem.evaluate(b));
            }
        }
        let mut merged = pop;
        merged.extend(offspring);
        let fronts = assign_rank_and_crowding(&mut merged);
        let mut next: Vec<Individual> = Vec::with_capacity(pop_size);
        for front in fronts {
            if next.len() + front.len() <= pop_size {
                next.extend(front.iter().map(|&i| merged[i].clone()));
            } else {
                let mut rest: Vec<&Individual> = front.iter().map(|&i| &merged[i]).collect();
                rest.sort_by(|x, y| y.crowding.total_cmp(&x.crowding).then_with(|| x.genes.cmp(&y.genes)));
                let room = pop_size - next.len();
                next.extend(rest.into_iter().take(room).cloned());
                break;
            }
        }
        pop = next;
        assign_rank_and_crowding(&mut pop);
    }

    let best = pop
        .iter()
        .filter(|i| i.rank == 0 && i.objectives[0].is_finite())
        .min_by(|x, y| {
            x.objectives[0]
                .total_cmp(&y.objectives[0])
                .then_with(|| x.genes.cmp(&y.genes))
        })
        .ok_or(SchedulerError::NoActors)?;
    let placement = problem.placement(&best.genes);
    Ok(Decision {
        user_id: ctx.user_id.to_string(),
        index_sequence: ranked,
        index_to_host_id: placement,
        scheduling_time: ctx.now() - start,
        cost: best.objectives[0],
    })
}
