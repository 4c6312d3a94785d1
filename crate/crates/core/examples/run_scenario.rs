// SPDX-License-Identifier: Apache-2.0

//! Runs a bundled scenario (or a scenario file) on the simulated network
//! and prints the JSON report.
//!
//!     cargo run --example run_scenario -- reuse

use fogbus::harness;

fn main() {
    let arg = std::env::args().nth(1).unwrap_or_else(|| "parallel-naive-formula".into());
    let text = match harness::bundled(&arg) {
        Some(s) => s.to_string(),
        None => std::fs::read_to_string(&arg).unwrap_or_else(|e| panic!("{arg}: {e}")),
    };
    let report = harness::run_json(&text, std::env::var_os("TRACE").is_some()).expect("scenario runs");
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    std::process::exit(if report.passed { 0 } else { 1 });
}
