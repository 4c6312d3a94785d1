// SPDX-License-Identifier: Apache-2.0

//! Appends a few records to the file-backed log store, reopens it and
//! queries by kind.
//!
//!     cargo run --example log_store -- /tmp/fogbus.log

use fogbus::protocol::{ComponentIdentity, ComponentRole, Endpoint};
use fogbus::remotelogger::{FileStore, LogKind, LogRecord, LogStore};
use serde_json::json;

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fogbus-example.log"));
    let master = ComponentIdentity::new(ComponentRole::Master, "10.0.0.1", Endpoint::new("10.0.0.1", 5001).unwrap());
    {
        let mut store = FileStore::open(&path).unwrap();
        for (i, ms) in [41.5, 38.0, 44.25].iter().enumerate() {
            let payload = json!({ "applicationName": "NaiveFormulaParallelized", "responseTime": ms });
            store
                .append(LogRecord {
                    kind: LogKind::ResponseTime,
                    source: master.clone(),
                    timestamp: 1.6e12 + i as f64 * 1000.0,
                    payload: payload.as_object().unwrap().clone(),
                })
                .unwrap();
        }
    }
    let store = FileStore::open(&path).unwrap();
    let slow = store
        .query(Some(LogKind::ResponseTime), &|r| r.payload["responseTime"].as_f64() > Some(40.0))
        .unwrap();
    println!("{} records in {}, {} above 40 ms", store.all().unwrap().len(), path.display(), slow.len());
}
