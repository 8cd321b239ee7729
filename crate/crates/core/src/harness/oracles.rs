//! Global correctness checks. Each one is a pure function of the final
//! snapshot and/or the committed history.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::model::{parse_sort_key, tables, EXTERNAL_SENDER};
use crate::txkv::{CommitRecord, ItemKey, Snapshot, WriteOp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }

    /// Passes iff `violations` is empty; the detail lists the first few.
    pub fn from_violations(name: &str, checked: usize, violations: &[String]) -> Self {
        if violations.is_empty() {
            Verdict::new(name, true, format!("{checked} checked"))
        } else {
            let shown: Vec<&str> = violations.iter().take(5).map(String::as_str).collect();
            Verdict::new(
                name,
                false,
                format!("{} of {checked} violated: {}", violations.len(), shown.join("; ")),
            )
        }
    }
}

pub const OUTBOX_EXACTLY_ONCE: &str = "outbox-exactly-once";
pub const CONSUMED_EXACTLY_ONCE: &str = "consumed-exactly-once";
pub const QUIESCENCE: &str = "quiescence";
pub const FIFO_PER_CHANNEL: &str = "fifo-per-channel";

fn key_text(key: &ItemKey) -> String {
    match &key.sort_key {
        Some(sk) => format!("{}|{}", text_of(&key.partition_key), text_of(sk)),
        None => text_of(&key.partition_key),
    }
}

fn text_of(v: &crate::txkv::AttributeValue) -> String {
    v.as_text().map(str::to_string).unwrap_or_else(|| format!("{v:?}"))
}

/// Every expected correlation id got exactly one outbox write over the whole
/// history and nothing else was written.
pub fn outbox_exactly_once(history: &[CommitRecord], expected: &BTreeSet<String>) -> Verdict {
    let mut writes: BTreeMap<String, usize> = BTreeMap::new();
    for w in history.iter().flat_map(|c| &c.writes) {
        if w.table == tables::OUTBOX && matches!(w.op, WriteOp::Put) {
            *writes.entry(text_of(&w.key.partition_key)).or_default() += 1;
        }
    }
    let mut violations = Vec::new();
    for cid in expected {
        match writes.get(cid).copied().unwrap_or(0) {
            1 => {}
            n => violations.push(format!("{cid} written {n} times")),
        }
    }
    for cid in writes.keys().filter(|c| !expected.contains(*c)) {
        violations.push(format!("unexpected response {cid}"));
    }
    Verdict::from_violations(OUTBOX_EXACTLY_ONCE, expected.len(), &violations)
}

/// Every envelope put into an inbox is removed by exactly one committed
/// transaction, and none is inserted twice.
pub fn consumed_exactly_once(history: &[CommitRecord]) -> Verdict {
    let mut puts: BTreeMap<String, usize> = BTreeMap::new();
    let mut deletes: BTreeMap<String, usize> = BTreeMap::new();
    for w in history.iter().flat_map(|c| &c.writes) {
        if w.table != tables::ACTOR_INBOX {
            continue;
        }
        let k = key_text(&w.key);
        match w.op {
            WriteOp::Put if w.before.is_none() => *puts.entry(k).or_default() += 1,
            WriteOp::Put => *puts.entry(k).or_default() += 2,
            WriteOp::Delete if w.before.is_some() => *deletes.entry(k).or_default() += 1,
            _ => {}
        }
    }
    let mut violations = Vec::new();
    for (k, n) in &puts {
        if *n != 1 {
            violations.push(format!("{k} inserted {n} times"));
        }
        match deletes.get(k).copied().unwrap_or(0) {
            1 => {}
            d => violations.push(format!("{k} consumed {d} times")),
        }
    }
    for k in deletes.keys().filter(|k| !puts.contains_key(*k)) {
        violations.push(format!("{k} consumed but never inserted"));
    }
    Verdict::from_violations(CONSUMED_EXACTLY_ONCE, puts.len(), &violations)
}

/// All inboxes drained and every shard passivated.
pub fn quiescent(snapshot: &Snapshot) -> Verdict {
    let inbox = snapshot.count(tables::ACTOR_INBOX);
    let tasks = snapshot.count(tables::ACTOR_TASK);
    Verdict::new(
        QUIESCENCE,
        inbox == 0 && tasks == 0,
        format!("{inbox} envelopes and {tasks} task records remain"),
    )
}

/// Consumption order per (sender actor, receiver) pair follows send order.
pub fn fifo_per_channel(history: &[CommitRecord]) -> Verdict {
    let mut last: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut checked = 0;
    let mut violations = Vec::new();
    for w in history.iter().flat_map(|c| &c.writes) {
        if w.table != tables::ACTOR_INBOX || !matches!(w.op, WriteOp::Delete) {
            continue;
        }
        let Some(before) = &w.before else { continue };
        let sender = before.get("sender_id").map(text_of).unwrap_or_default();
        if sender == EXTERNAL_SENDER {
            continue;
        }
        let receiver = before.get("receiver_id").map(text_of).unwrap_or_default();
        let Some(ts) = w
            .key
            .sort_key
            .as_ref()
            .and_then(|v| v.as_text())
            .and_then(|sk| parse_sort_key(sk).ok())
            .map(|(ts, _)| ts)
        else {
            violations.push(format!("unparsable inbox key {}", key_text(&w.key)));
            continue;
        };
        checked += 1;
        let prev = last.entry((sender.clone(), receiver.clone())).or_insert(0);
        if ts <= *prev {
            violations.push(format!("{sender} -> {receiver}: {ts} consumed after {prev}"));
        }
        *prev = ts.max(*prev);
    }
    Verdict::from_violations(FIFO_PER_CHANNEL, checked, &violations)
}

/// The oracles every scenario shares.
pub fn standard(history: &[CommitRecord], snapshot: &Snapshot, expected: &BTreeSet<String>) -> Vec<Verdict> {
    vec![
        outbox_exactly_once(history, expected),
        consumed_exactly_once(history),
        quiescent(snapshot),
        fifo_per_channel(history),
    ]
}
