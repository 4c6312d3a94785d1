// SPDX-License-Identifier: Apache-2.0

//! Prints every message kind with the routes it may travel.

use fogbus::protocol::catalog::{self, Provenance, RoleSet};

fn roles(set: &RoleSet) -> String {
    match set {
        RoleSet::Any => "any".into(),
        RoleSet::Only(r) => r.iter().map(|x| x.as_str()).collect::<Vec<_>>().join("|"),
    }
}

fn main() {
    for e in catalog::entries() {
        let routes: Vec<String> = e.routes.iter().map(|(s, r)| format!("{} -> {}", roles(s), roles(r))).collect();
        let mark = if e.provenance == Provenance::Added { "+" } else { " " };
        println!("{mark} {:<40} {:<40} {}", e.kind().to_string(), routes.join(", "), e.description);
    }
    println!("\n+ kinds added for workflows the documented table leaves implicit");
}
