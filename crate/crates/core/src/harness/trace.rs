// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use crate::transport::TraceEntry;

/// Whether one pattern element matches an entry. Elements are
/// `type/subType` or `type/subType/subSubType`; any part may be `*`.
/// Without a third part the subSubType is not checked.
pub fn matches(pattern: &str, e: &TraceEntry) -> bool {
    let mut parts = pattern.split('/');
    let part = |p: Option<&str>, v: &str| p.is_none_or(|p| p == "*" || p == v);
    part(parts.next(), &e.msg_type) && part(parts.next(), &e.sub_type) && part(parts.next(), &e.sub_sub_type)
}

/// True iff `pattern` embeds in `trace` as a subsequence.
pub fn assert_sequence<S: AsRef<str>>(trace: &[TraceEntry], pattern: &[S]) -> bool {
    let mut it = trace.iter();
    pattern.iter().all(|p| it.any(|e| matches(p.as_ref(), e)))
}

pub fn count(trace: &[TraceEntry], pattern: &str) -> usize {
    trace.iter().filter(|e| matches(pattern, e)).count()
}

/// Deliveries per `type/subType[/subSubType]`.
pub fn kind_counts(trace: &[TraceEntry]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for e in trace {
        *out.entry(e.kind_label()).or_insert(0) += 1;
    }
    out
}

/// The request/response pattern of one healthy three-task placement.
pub fn placement_flow_pattern(tasks: usize) -> Vec<String> {
    let mut p = vec!["registration/register".to_string()];
    p.extend(std::iter::repeat_n("placement/runTaskExecutor".to_string(), tasks));
    p.extend(std::iter::repeat_n("acknowledgement/ready".to_string(), tasks));
    p.push("acknowledgement/serviceReady".into());
    p.push("data/sensoryData".into());
    p.extend(std::iter::repeat_n("data/finalResult".to_string(), tasks));
    p
}
