// SPDX-License-Identifier: Apache-2.0

pub mod actor;
pub mod appmodel;
pub mod cli;
pub mod harness;
pub mod master;
pub mod ports;
pub mod profile;
pub mod protocol;
pub mod remotelogger;
pub mod runtime;
pub mod scheduler;
pub mod taskexecutor;
pub mod transport;
pub mod user;
