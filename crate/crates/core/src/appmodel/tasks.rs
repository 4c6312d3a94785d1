// SPDX-License-Identifier: Apache-2.0

//! Logic of the built-in tasks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{DataRecord, TaskError};

fn abc(input: &DataRecord) -> Result<(f64, f64, f64), TaskError> {
    Ok((input.f64("a")?, input.f64("b")?, input.f64("c")?))
}

/// `resultPart0 = a + b + c`. Integer inputs give an integer result.
pub fn naive_formula0(mut input: DataRecord) -> Result<DataRecord, TaskError> {
    let ints = ["a", "b", "c"]
        .iter()
        .map(|k| input.number(k).map(|n| n.as_i64()))
        .collect::<Result<Vec<_>, _>>()?;
    let result = match ints.as_slice() {
        [Some(a), Some(b), Some(c)] => match a.checked_add(*b).and_then(|s| s.checked_add(*c)) {
            Some(sum) => json!(sum),
            None => json!(*a as f64 + *b as f64 + *c as f64),
        },
        _ => {
            let (a, b, c) = abc(&input)?;
            json!(a + b + c)
        }
    };
    input.set("resultPart0", result)?;
    Ok(input)
}

/// `resultPart1 = a² / (b² + c²)`.
pub fn naive_formula1(mut input: DataRecord) -> Result<DataRecord, TaskError> {
    let (a, b, c) = abc(&input)?;
    let denominator = b * b + c * c;
    if denominator == 0.0 {
        return Err(TaskError::DivisionByZero("b * b + c * c".into()));
    }
    input.set("resultPart1", a * a / denominator)?;
    Ok(input)
}

/// `resultPart2 = 1/a + 2/b + 3/c`.
pub fn naive_formula2(mut input: DataRecord) -> Result<DataRecord, TaskError> {
    let (a, b, c) = abc(&input)?;
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        if v == 0.0 {
            return Err(TaskError::DivisionByZero(name.into()));
        }
    }
    input.set("resultPart2", 1.0 / a + 2.0 / b + 3.0 / c)?;
    Ok(input)
}

/// Terminal step of the serialized formula: `finalResult` is the sum of the
/// three partial results.
pub fn naive_formula3(mut input: DataRecord) -> Result<DataRecord, TaskError> {
    let total = input.f64("resultPart0")? + input.f64("resultPart1")? + input.f64("resultPart2")?;
    input.set("finalResult", total)?;
    Ok(input)
}

pub type Grid = Vec<Vec<bool>>;

/// One Conway generation with a dead boundary.
pub fn game_of_life_step(grid: &[Vec<bool>]) -> Result<Grid, TaskError> {
    let rows = grid.len();
    let cols = grid.first().map_or(0, Vec::len);
    if grid.iter().any(|r| r.len() != cols) {
        return Err(TaskError::RaggedGrid);
    }
    let alive = |r: isize, c: isize| -> usize {
        if r < 0 || c < 0 || r as usize >= rows || c as usize >= cols {
            0
        } else {
            grid[r as usize][c as usize] as usize
        }
    };
    let mut next = vec![vec![false; cols]; rows];
    for (r, row) in next.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            let (ri, ci) = (r as isize, c as isize);
            let n: usize = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
                .iter()
                .map(|(dr, dc)| alive(ri + dr, ci + dc))
                .sum();
            *cell = matches!((grid[r][c], n), (true, 2) | (_, 3));
        }
    }
    Ok(next)
}

pub fn grid_from_value(value: &Value) -> Result<Grid, TaskError> {
    serde_json::from_value(value.clone()).map_err(|_| TaskError::NotAGrid)
}

/// Steps the record's `grid` entry by one generation.
pub fn exec_game_of_life_step(mut input: DataRecord) -> Result<DataRecord, TaskError> {
    let grid = grid_from_value(input.get("grid").ok_or_else(|| TaskError::MissingKey("grid".into()))?)?;
    let next = game_of_life_step(&grid)?;
    input.set("grid", serde_json::to_value(next).expect("grid serializes"))?;
    Ok(input)
}

/// Side length of the grid owned by the `index`-th Game of Life task.
pub fn grid_side(index: usize) -> usize {
    8 + 4 * index
}

pub fn grid_key(index: usize) -> String {
    format!("grid{index}")
}

/// Initial grid for task `index`, filled from `seed` at roughly 30% density.
pub fn seeded_grid(index: usize, seed: u64) -> Grid {
    let side = grid_side(index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(index as u64));
    (0..side).map(|_| (0..side).map(|_| rng.gen_bool(0.3)).collect()).collect()
}

/// Task `index` of the Game of Life applications: steps its own grid
/// (`grid<index>`), seeding it from the record's `seed` the first time.
pub fn game_of_life_task(index: usize, mut input: DataRecord) -> Result<DataRecord, TaskError> {
    let key = grid_key(index);
    let grid = match input.get(&key) {
        Some(v) => grid_from_value(v)?,
        None => {
            let seed = match input.get("seed") {
                None => 0,
                Some(v) => v.as_u64().ok_or_else(|| TaskError::NotNumeric("seed".into()))?,
            };
            seeded_grid(index, seed)
        }
    };
    let next = game_of_life_step(&grid)?;
    input.set(&key, serde_json::to_value(next).expect("grid serializes"))?;
    Ok(input)
}
