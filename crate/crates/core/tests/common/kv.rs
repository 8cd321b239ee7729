//! Concurrency checks on the store, shared by the store suite and the
//! acceptance run.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Barrier};
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serverless_actors::clock::Clock;
use serverless_actors::txkv::{Condition, FaultPlan, Item, ItemKey, KvError, Query, Store, TableSchema, WriteAction};

pub fn store() -> Store {
    let s = Store::new(Clock::real());
    s.create_table(TableSchema::new("Cells", "id")).unwrap();
    s.create_table(TableSchema::new("Groups", "group").sort_key("member")).unwrap();
    s.create_table(TableSchema::new("Tagged", "owner").sort_key("item").index("ByColor", "color"))
        .unwrap();
    s
}

#[derive(Debug, Clone, Copy)]
struct Op {
    write: bool,
    value: i64,
    invoked: u64,
    returned: u64,
}

/// Counters on a few keys, hammered by several threads with increments and
/// reads. Operations are stamped with a shared logical clock before the
/// call and after it returns; the history must admit a sequential order
/// that respects those stamps.
pub fn linearizability(seed: u64, ops: usize) -> (usize, Vec<String>) {
    const KEYS: usize = 3;
    const THREADS: usize = 4;
    let s = Arc::new(store());
    let stamp = Arc::new(AtomicU64::new(0));
    let per = ops / THREADS;
    let handles: Vec<_> = (0..THREADS)
        .map(|t| {
            let (s, stamp) = (s.clone(), stamp.clone());
            thread::spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t as u64) << 32);
                let mut log = Vec::with_capacity(per);
                for _ in 0..per {
                    let k = rng.gen_range(0..KEYS);
                    let key = ItemKey::partition(format!("k{k}"));
                    let write = rng.gen_bool(0.6);
                    let invoked = stamp.fetch_add(1, Ordering::SeqCst);
                    let value = if write {
                        let after = s
                            .write(WriteAction::update("Cells", key).increment("v", 1))
                            .unwrap()
                            .unwrap();
                        after.int("v").unwrap()
                    } else {
                        s.get("Cells", &key).unwrap().and_then(|i| i.int("v")).unwrap_or(0)
                    };
                    let returned = stamp.fetch_add(1, Ordering::SeqCst);
                    log.push((k, Op { write, value, invoked, returned }));
                }
                log
            })
        })
        .collect();
    let mut by_key: BTreeMap<usize, Vec<Op>> = BTreeMap::new();
    for h in handles {
        for (k, op) in h.join().unwrap() {
            by_key.entry(k).or_default().push(op);
        }
    }
    let mut violations = Vec::new();
    let mut checked = 0;
    for (k, log) in by_key {
        checked += log.len();
        let writes: Vec<&Op> = log.iter().filter(|o| o.write).collect();
        let mut values: Vec<i64> = writes.iter().map(|o| o.value).collect();
        values.sort_unstable();
        if values != (1..=writes.len() as i64).collect::<Vec<_>>() {
            violations.push(format!("k{k}: increments returned {} values that are not 1..n", values.len()));
        }
        for a in &log {
            // Everything finished before `a` started is visible to it.
            let floor = log
                .iter()
                .filter(|b| b.returned < a.invoked)
                .map(|b| b.value)
                .max()
                .unwrap_or(0);
            // It cannot see writes that started after it returned.
            let ceiling = writes.iter().filter(|b| b.invoked < a.returned).count() as i64;
            let too_low = if a.write { a.value <= floor } else { a.value < floor };
            if too_low || a.value > ceiling {
                violations.push(format!("k{k}: {a:?} outside [{floor}, {ceiling}]"));
            }
        }
    }
    (checked, violations)
}

/// A writer moves a group of items forward together in one transaction,
/// with transient failures injected; readers see the group through one
/// query and must never see it half-written.
pub fn atomic_visibility(seed: u64, reads: usize) -> (usize, Vec<String>) {
    const MEMBERS: [&str; 4] = ["a", "b", "c", "d"];
    let s = Arc::new(store());
    let group = |m: &str| ItemKey::composite("g", m);
    s.transact_write(MEMBERS.iter().map(|m| WriteAction::put("Groups", Item::new(group(m)).with("v", 0i64))).collect())
        .unwrap();
    s.set_fault_plan(FaultPlan::failures(seed, 0.3));
    let done = Arc::new(AtomicU64::new(0));
    let writer = {
        let (s, done) = (s.clone(), done.clone());
        thread::spawn(move || {
            let mut committed = 0u64;
            while done.load(Ordering::SeqCst) == 0 {
                let txn = MEMBERS
                    .iter()
                    .map(|m| WriteAction::update("Groups", group(m)).increment("v", 1))
                    .collect();
                match s.transact_write(txn) {
                    Ok(()) => committed += 1,
                    Err(KvError::TransientFailure) => {}
                    Err(e) => panic!("{e}"),
                }
                thread::yield_now();
            }
            committed
        })
    };
    let mut violations = Vec::new();
    for i in 0..reads {
        let values: Vec<i64> = if i % 10 == 0 {
            let snap = s.snapshot();
            snap.items("Groups").iter().map(|it| it.int("v").unwrap()).collect()
        } else {
            match s.query(&Query::partition("Groups", "g")) {
                Ok(items) => items.iter().map(|it| it.int("v").unwrap()).collect(),
                Err(KvError::TransientFailure) => continue,
                Err(e) => panic!("{e}"),
            }
        };
        if values.len() != MEMBERS.len() || values.windows(2).any(|w| w[0] != w[1]) {
            violations.push(format!("read {i} saw {values:?}"));
        }
        if i % 16 == 0 {
            thread::yield_now();
        }
    }
    done.store(1, Ordering::SeqCst);
    let committed = writer.join().unwrap();
    s.set_fault_plan(FaultPlan::disabled());
    let last: Vec<i64> = s.query(&Query::partition("Groups", "g")).unwrap().iter().map(|i| i.int("v").unwrap()).collect();
    if last != vec![committed as i64; MEMBERS.len()] {
        violations.push(format!("final {last:?} after {committed} commits"));
    }
    (reads, violations)
}

/// Several threads race the same conditional write per trial: create if
/// absent, or compare-and-set on a version. Exactly one must win.
pub fn single_winner(trials: usize, threads: usize) -> (usize, Vec<String>) {
    let s = Arc::new(store());
    let barrier = Arc::new(Barrier::new(threads));
    let wins: Vec<Vec<usize>> = (0..threads)
        .map(|t| {
            let (s, barrier) = (s.clone(), barrier.clone());
            thread::spawn(move || {
                let mut won = Vec::new();
                for trial in 0..trials {
                    let key = ItemKey::partition(format!("t{trial}"));
                    let action = if trial % 2 == 0 {
                        WriteAction::put("Cells", Item::new(key).with("owner", t as i64)).when(Condition::NotExists)
                    } else {
                        if t == 0 {
                            s.write(WriteAction::put("Cells", Item::new(key.clone()).with("version", 0i64)))
                                .unwrap();
                        }
                        barrier.wait();
                        WriteAction::update("Cells", key)
                            .set("owner", t as i64)
                            .increment("version", 1)
                            .when(Condition::equals("version", 0i64))
                    };
                    barrier.wait();
                    match s.write(action) {
                        Ok(_) => won.push(trial),
                        Err(KvError::ConditionFailed { .. }) => {}
                        Err(e) => panic!("{e}"),
                    }
                }
                won
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    let mut count = vec![0usize; trials];
    for w in wins.iter().flatten() {
        count[*w] += 1;
    }
    let violations = count
        .iter()
        .enumerate()
        .filter(|(_, &n)| n != 1)
        .map(|(t, n)| format!("trial {t}: {n} winners"))
        .collect();
    (trials, violations)
}

#[derive(Debug, Clone)]
pub enum Mutation {
    Put { owner: u8, item: u8, color: Option<u8> },
    Recolor { owner: u8, item: u8, color: u8 },
    Delete { owner: u8, item: u8 },
}

pub const COLORS: [&str; 4] = ["red", "green", "blue", "grey"];

fn tagged_key(owner: u8, item: u8) -> ItemKey {
    ItemKey::composite(format!("o{owner}"), format!("i{item:03}"))
}

/// Applies `muts` to a fresh store and compares every index query, with and
/// without a partition restriction, against a filtered scan.
pub fn index_matches_scan(muts: &[Mutation]) -> Result<(), String> {
    let s = store();
    for m in muts {
        let action = match *m {
            Mutation::Put { owner, item, color } => {
                let mut it = Item::new(tagged_key(owner, item)).with("n", i64::from(item));
                if let Some(c) = color {
                    it = it.with("color", COLORS[c as usize]);
                }
                WriteAction::put("Tagged", it)
            }
            Mutation::Recolor { owner, item, color } => {
                WriteAction::update("Tagged", tagged_key(owner, item)).set("color", COLORS[color as usize])
            }
            Mutation::Delete { owner, item } => WriteAction::delete("Tagged", tagged_key(owner, item)),
        };
        s.write(action).map_err(|e| e.to_string())?;
    }
    let all = s.scan("Tagged").map_err(|e| e.to_string())?;
    let keys = |items: &[Item]| {
        let mut k: Vec<String> = items.iter().map(|i| format!("{:?}", i.key)).collect();
        k.sort();
        k
    };
    for color in COLORS {
        let want: Vec<Item> = all.iter().filter(|i| i.text("color") == Some(color)).cloned().collect();
        let got = s.query(&Query::index("Tagged", "ByColor", color)).map_err(|e| e.to_string())?;
        if keys(&got) != keys(&want) {
            return Err(format!("{color}: index {:?} scan {:?}", keys(&got), keys(&want)));
        }
        for owner in 0..3u8 {
            let pk = format!("o{owner}");
            let got = s
                .query(&Query::index("Tagged", "ByColor", color).within(pk.as_str()))
                .map_err(|e| e.to_string())?;
            let want: Vec<Item> = want
                .iter()
                .filter(|i| i.key.partition_key.as_text() == Some(pk.as_str()))
                .cloned()
                .collect();
            if keys(&got) != keys(&want) {
                return Err(format!("{color} within {pk}: index {:?} scan {:?}", keys(&got), keys(&want)));
            }
        }
    }
    Ok(())
}

/// A random mutation sequence for the plain-rng variant of the check.
pub fn random_mutations(rng: &mut ChaCha8Rng, len: usize) -> Vec<Mutation> {
    (0..len)
        .map(|_| {
            let (owner, item) = (rng.gen_range(0..3), rng.gen_range(0..8));
            match rng.gen_range(0..4) {
                0 | 1 => Mutation::Put {
                    owner,
                    item,
                    color: rng.gen_bool(0.8).then(|| rng.gen_range(0..4)),
                },
                2 => Mutation::Recolor {
                    owner,
                    item,
                    color: rng.gen_range(0..4),
                },
                _ => Mutation::Delete { owner, item },
            }
        })
        .collect()
}
