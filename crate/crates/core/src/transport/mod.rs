// SPDX-License-Identifier: Apache-2.0

//! Moving envelopes between components: TCP for real deployments, an
//! in-process simulated network for the harness.

pub mod frame;
pub mod sim;
pub mod tcp;

pub use sim::{SimNetConfig, SimWorld, TraceEntry};
pub use tcp::{listen, send, send_raw, start_node, wall_clock_ms, Listener, NodeHandle, NodeOptions};
