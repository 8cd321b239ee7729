use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, RwLockWriteGuard};

use serde::{Deserialize, Serialize};

use super::action::{Assign, WriteAction};
use super::fault::{FaultInjector, FaultPlan};
use super::schema::TableSchema;
use super::value::{AttributeValue, Attributes, Item, ItemKey, OrdKey};
use super::KvError;
use crate::clock::Clock;

pub const DEFAULT_TRANSACTION_ITEM_LIMIT: usize = 100;

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub transaction_item_limit: usize,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            transaction_item_limit: DEFAULT_TRANSACTION_ITEM_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableHandle(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WriteOp {
    Put,
    Update,
    Delete,
    Check,
}

/// One action of a committed transaction with the item state around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedWrite {
    pub table: String,
    pub key: ItemKey,
    pub op: WriteOp,
    pub before: Option<Attributes>,
    pub after: Option<Attributes>,
}

/// A committed transaction, in serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub seq: u64,
    pub at_millis: u64,
    pub writes: Vec<AppliedWrite>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StoreStats {
    pub reads: u64,
    pub writes: u64,
    pub commits: u64,
    pub injected_failures: u64,
}

/// Equality query over a base table partition or a secondary index.
#[derive(Debug, Clone)]
pub struct Query {
    pub table: String,
    pub index: Option<String>,
    pub partition: Option<AttributeValue>,
    pub index_value: Option<AttributeValue>,
    pub ascending: bool,
    pub limit: Option<usize>,
}

impl Query {
    pub fn partition(table: &str, pk: impl Into<AttributeValue>) -> Self {
        Query {
            table: table.to_string(),
            index: None,
            partition: Some(pk.into()),
            index_value: None,
            ascending: true,
            limit: None,
        }
    }

    pub fn index(table: &str, index: &str, value: impl Into<AttributeValue>) -> Self {
        Query {
            table: table.to_string(),
            index: Some(index.to_string()),
            partition: None,
            index_value: Some(value.into()),
            ascending: true,
            limit: None,
        }
    }

    /// Restricts an index query to one base-table partition.
    pub fn within(mut self, pk: impl Into<AttributeValue>) -> Self {
        self.partition = Some(pk.into());
        self
    }

    pub fn descending(mut self) -> Self {
        self.ascending = false;
        self
    }

    pub fn limit(mut self, n: usize) -> Self {
        self.limit = Some(n);
        self
    }
}

struct Table {
    schema: TableSchema,
    data: RwLock<TableData>,
}

#[derive(Default)]
struct TableData {
    items: BTreeMap<OrdKey, Attributes>,
    /// index name -> indexed text value -> keys
    indexes: BTreeMap<String, BTreeMap<String, BTreeSet<OrdKey>>>,
}

impl TableData {
    fn unindex(&mut self, schema: &TableSchema, key: &OrdKey, attrs: &Attributes) {
        for spec in &schema.indexes {
            if let Some(AttributeValue::Text(v)) = attrs.get(&spec.attribute) {
                if let Some(idx) = self.indexes.get_mut(&spec.name) {
                    if let Some(set) = idx.get_mut(v) {
                        set.remove(key);
                        if set.is_empty() {
                            idx.remove(v);
                        }
                    }
                }
            }
        }
    }

    fn index(&mut self, schema: &TableSchema, key: &OrdKey, attrs: &Attributes) {
        for spec in &schema.indexes {
            if let Some(AttributeValue::Text(v)) = attrs.get(&spec.attribute) {
                self.indexes
                    .entry(spec.name.clone())
                    .or_default()
                    .entry(v.clone())
                    .or_default()
                    .insert(key.clone());
            }
        }
    }

    fn set(&mut self, schema: &TableSchema, key: OrdKey, after: Option<Attributes>) {
        if let Some(old) = self.items.remove(&key) {
            self.unindex(schema, &key, &old);
        }
        if let Some(attrs) = after {
            self.index(schema, &key, &attrs);
            self.items.insert(key, attrs);
        }
    }
}

/// Strongly consistent in-memory store with conditional writes and
/// all-or-nothing multi-item transactions.
///
/// Transactions lock every table they touch for writing, acquiring the locks
/// in table-name order and holding them until all effects are applied (strict
/// two-phase locking at table granularity). Reads take a single table read
/// lock, so a reader observes either none or all of a transaction's effects on
/// that table.
pub struct Store {
    clock: Clock,
    config: StoreConfig,
    tables: RwLock<BTreeMap<String, Arc<Table>>>,
    faults: Mutex<FaultInjector>,
    history: Mutex<Option<Vec<CommitRecord>>>,
    commit_seq: AtomicU64,
    reads: AtomicU64,
    writes: AtomicU64,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("tables", &self.table_names())
            .finish()
    }
}

impl Store {
    pub fn new(clock: Clock) -> Self {
        Store::with_config(clock, StoreConfig::default())
    }

    pub fn with_config(clock: Clock, config: StoreConfig) -> Self {
        Store {
            clock,
            config,
            tables: RwLock::new(BTreeMap::new()),
            faults: Mutex::new(FaultInjector::new(FaultPlan::disabled())),
            history: Mutex::new(None),
            commit_seq: AtomicU64::new(0),
            reads: AtomicU64::new(0),
            writes: AtomicU64::new(0),
        }
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    pub fn transaction_item_limit(&self) -> usize {
        self.config.transaction_item_limit
    }

    pub fn set_fault_plan(&self, plan: FaultPlan) {
        *self.faults.lock().unwrap_or_else(|e| e.into_inner()) = FaultInjector::new(plan);
    }

    pub fn fault_plan(&self) -> FaultPlan {
        self.faults
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .plan()
            .clone()
    }

    /// Starts (or restarts) recording committed transactions.
    pub fn record_history(&self, on: bool) {
        *self.history.lock().unwrap_or_else(|e| e.into_inner()) = on.then(Vec::new);
    }

    pub fn history(&self) -> Vec<CommitRecord> {
        self.history
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
            .unwrap_or_default()
    }

    pub fn stats(&self) -> StoreStats {
        StoreStats {
            reads: self.reads.load(Ordering::Relaxed),
            writes: self.writes.load(Ordering::Relaxed),
            commits: self.commit_seq.load(Ordering::Relaxed),
            injected_failures: self
                .faults
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .injected_failures(),
        }
    }

    pub fn table_names(&self) -> Vec<String> {
        self.tables
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    pub fn schema(&self, table: &str) -> Result<TableSchema, KvError> {
        Ok(self.table(table)?.schema.clone())
    }

    pub fn create_table(&self, schema: TableSchema) -> Result<TableHandle, KvError> {
        let mut seen = HashSet::new();
        for idx in &schema.indexes {
            if !seen.insert(idx.name.as_str()) {
                return Err(KvError::InvalidSchema(format!(
                    "duplicate index {} on {}",
                    idx.name, schema.name
                )));
            }
        }
        let mut tables = self.tables.write().unwrap_or_else(|e| e.into_inner());
        if tables.contains_key(&schema.name) {
            return Err(KvError::DuplicateTable(schema.name));
        }
        let name = schema.name.clone();
        tables.insert(
            name.clone(),
            Arc::new(Table {
                schema,
                data: RwLock::new(TableData::default()),
            }),
        );
        Ok(TableHandle(name))
    }

    fn table(&self, name: &str) -> Result<Arc<Table>, KvError> {
        self.tables
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(name)
            .cloned()
            .ok_or_else(|| KvError::UnknownTable(name.to_string()))
    }

    fn check_key(schema: &TableSchema, key: &ItemKey) -> Result<(), KvError> {
        if key.sort_key.is_some() != schema.sort_key_name.is_some() {
            return Err(KvError::KeySchema(format!(
                "key {key} does not match schema of {}",
                schema.name
            )));
        }
        Ok(())
    }

    fn before_read(&self) {
        self.reads.fetch_add(1, Ordering::Relaxed);
        let d = self
            .faults
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .on_read();
        self.clock.sleep(d.latency);
    }

    fn before_write(&self) -> Result<(), KvError> {
        self.writes.fetch_add(1, Ordering::Relaxed);
        let d = self
            .faults
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .on_write();
        self.clock.sleep(d.latency);
        if d.fail {
            Err(KvError::TransientFailure)
        } else {
            Ok(())
        }
    }

    pub fn get(&self, table: &str, key: &ItemKey) -> Result<Option<Item>, KvError> {
        let t = self.table(table)?;
        Self::check_key(&t.schema, key)?;
        self.before_read();
        let data = t.data.read().unwrap_or_else(|e| e.into_inner());
        Ok(data.items.get(&OrdKey(key.clone())).map(|attrs| Item {
            key: key.clone(),
            attributes: attrs.clone(),
        }))
    }

    pub fn query(&self, q: &Query) -> Result<Vec<Item>, KvError> {
        let t = self.table(&q.table)?;
        self.before_read();
        let data = t.data.read().unwrap_or_else(|e| e.into_inner());
        let to_item = |k: &OrdKey, a: &Attributes| Item {
            key: k.0.clone(),
            attributes: a.clone(),
        };
        let mut out: Vec<Item> = match &q.index {
            None => {
                let pk = q.partition.as_ref().ok_or_else(|| {
                    KvError::InvalidQuery("base table query needs a partition value".into())
                })?;
                data.items
                    .iter()
                    .filter(|(k, _)| &k.0.partition_key == pk)
                    .map(|(k, a)| to_item(k, a))
                    .collect()
            }
            Some(index) => {
                let spec = t.schema.index_spec(index).ok_or_else(|| KvError::UnknownIndex {
                    table: q.table.clone(),
                    index: index.clone(),
                })?;
                let value = match &q.index_value {
                    Some(AttributeValue::Text(v)) => v,
                    Some(other) => {
                        return Err(KvError::TypeMismatch(format!(
                            "index {} holds text, got {}",
                            spec.name,
                            other.kind()
                        )))
                    }
                    None => {
                        return Err(KvError::InvalidQuery(
                            "index query needs an equality value".into(),
                        ))
                    }
                };
                data.indexes
                    .get(&spec.name)
                    .and_then(|m| m.get(value))
                    .into_iter()
                    .flatten()
                    .filter(|k| q.partition.as_ref().is_none_or(|pk| &k.0.partition_key == pk))
                    .filter_map(|k| data.items.get(k).map(|a| to_item(k, a)))
                    .collect()
            }
        };
        if !q.ascending {
            out.reverse();
        }
        if let Some(n) = q.limit {
            out.truncate(n);
        }
        Ok(out)
    }

    pub fn scan(&self, table: &str) -> Result<Vec<Item>, KvError> {
        let t = self.table(table)?;
        self.before_read();
        let data = t.data.read().unwrap_or_else(|e| e.into_inner());
        Ok(data
            .items
            .iter()
            .map(|(k, a)| Item {
                key: k.0.clone(),
                attributes: a.clone(),
            })
            .collect())
    }

    /// Single conditional write. Returns the resulting item (`None` after a
    /// delete).
    pub fn write(&self, action: WriteAction) -> Result<Option<Item>, KvError> {
        if matches!(action, WriteAction::ConditionCheck { .. }) {
            return Err(KvError::InvalidAction(
                "a standalone condition check has no effect".into(),
            ));
        }
        let key = action.key().clone();
        let mut after = self.commit(vec![action])?;
        Ok(after.pop().flatten().map(|attributes| Item { key, attributes }))
    }

    /// Serializable all-or-nothing batch. On a failed condition nothing is
    /// applied and the index of the first failing action is reported.
    pub fn transact_write(&self, actions: Vec<WriteAction>) -> Result<(), KvError> {
        self.commit(actions).map(|_| ())
    }

    fn commit(&self, actions: Vec<WriteAction>) -> Result<Vec<Option<Attributes>>, KvError> {
        let limit = self.config.transaction_item_limit;
        if actions.is_empty() {
            return Err(KvError::EmptyTransaction);
        }
        if actions.len() > limit {
            return Err(KvError::LimitExceeded {
                len: actions.len(),
                limit,
            });
        }
        let mut seen = HashSet::new();
        for (i, a) in actions.iter().enumerate() {
            if !seen.insert((a.table(), a.key())) {
                return Err(KvError::DuplicateKeyInTransaction { index: i });
            }
        }

        // Resolve tables and validate shapes before any fault or lock.
        let mut handles: BTreeMap<&str, Arc<Table>> = BTreeMap::new();
        for a in &actions {
            if !handles.contains_key(a.table()) {
                handles.insert(a.table(), self.table(a.table())?);
            }
            let schema = &handles[a.table()].schema;
            Self::check_key(schema, a.key())?;
            if let WriteAction::Put { item, .. } = a {
                validate_attributes(schema, &item.attributes)?;
            }
        }

        self.before_write()?;

        // Ordered acquisition; BTreeMap iteration is sorted by table name.
        let mut guards: Vec<(&str, RwLockWriteGuard<'_, TableData>)> = handles
            .iter()
            .map(|(name, t)| (*name, t.data.write().unwrap_or_else(|e| e.into_inner())))
            .collect();
        let slot = |name: &str| guards.iter().position(|(n, _)| *n == name).expect("locked");

        let mut planned: Vec<(usize, OrdKey, Option<Attributes>, Option<Attributes>)> =
            Vec::with_capacity(actions.len());
        for (i, a) in actions.iter().enumerate() {
            let g = slot(a.table());
            let key = OrdKey(a.key().clone());
            let current = guards[g].1.items.get(&key);
            if let Some(cond) = a.condition() {
                if !cond.holds(current) {
                    return Err(KvError::ConditionFailed { index: i });
                }
            }
            let schema = &handles[a.table()].schema;
            let after = match a {
                WriteAction::Put { item, .. } => Some(item.attributes.clone()),
                WriteAction::Delete { .. } => None,
                WriteAction::ConditionCheck { .. } => current.cloned(),
                WriteAction::Update { assignments, .. } => {
                    let mut attrs = current.cloned().unwrap_or_default();
                    for (name, assign) in assignments {
                        if name.is_empty() || schema.is_key_attribute(name) {
                            return Err(KvError::InvalidItem(format!(
                                "cannot assign attribute {name:?}"
                            )));
                        }
                        match assign {
                            Assign::Set(v) => {
                                attrs.insert(name.clone(), v.clone());
                            }
                            Assign::SetIfAbsent(v) => {
                                attrs.entry(name.clone()).or_insert_with(|| v.clone());
                            }
                            Assign::Increment(by) => {
                                let cur = match attrs.get(name) {
                                    None => 0,
                                    Some(AttributeValue::Int(n)) => *n,
                                    Some(other) => {
                                        return Err(KvError::TypeMismatch(format!(
                                            "increment of {} attribute {name}",
                                            other.kind()
                                        )))
                                    }
                                };
                                attrs.insert(name.clone(), AttributeValue::Int(cur + by));
                            }
                        }
                    }
                    validate_attributes(schema, &attrs)?;
                    Some(attrs)
                }
            };
            planned.push((g, key, current.cloned(), after));
        }

        let mut history = self.history.lock().unwrap_or_else(|e| e.into_inner());
        let seq = self.commit_seq.fetch_add(1, Ordering::SeqCst) + 1;
        let mut applied = Vec::new();
        let mut results = Vec::with_capacity(planned.len());
        for ((g, key, before, after), action) in planned.into_iter().zip(&actions) {
            let op = match action {
                WriteAction::Put { .. } => WriteOp::Put,
                WriteAction::Update { .. } => WriteOp::Update,
                WriteAction::Delete { .. } => WriteOp::Delete,
                WriteAction::ConditionCheck { .. } => WriteOp::Check,
            };
            if op != WriteOp::Check {
                let schema = &handles[action.table()].schema;
                guards[g].1.set(schema, key.clone(), after.clone());
            }
            if history.is_some() {
                applied.push(AppliedWrite {
                    table: action.table().to_string(),
                    key: key.0,
                    op,
                    before,
                    after: after.clone(),
                });
            }
            results.push(after);
        }
        if let Some(h) = history.as_mut() {
            h.push(CommitRecord {
                seq,
                at_millis: self.clock.now_millis(),
                writes: applied,
            });
        }
        Ok(results)
    }

    /// Consistent copy of every table.
    pub fn snapshot(&self) -> Snapshot {
        let tables: Vec<Arc<Table>> = self
            .tables
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        let guards: Vec<_> = tables
            .iter()
            .map(|t| (t, t.data.read().unwrap_or_else(|e| e.into_inner())))
            .collect();
        let mut out = BTreeMap::new();
        for (t, data) in &guards {
            out.insert(
                t.schema.name.clone(),
                data.items
                    .iter()
                    .map(|(k, a)| Item {
                        key: k.0.clone(),
                        attributes: a.clone(),
                    })
                    .collect(),
            );
        }
        Snapshot { tables: out }
    }
}

fn validate_attributes(schema: &TableSchema, attrs: &Attributes) -> Result<(), KvError> {
    for name in attrs.keys() {
        if name.is_empty() {
            return Err(KvError::InvalidItem("empty attribute name".into()));
        }
        if schema.is_key_attribute(name) {
            return Err(KvError::InvalidItem(format!(
                "key attribute {name} duplicated in attribute map"
            )));
        }
    }
    for spec in &schema.indexes {
        if let Some(v) = attrs.get(&spec.attribute) {
            if v.as_text().is_none() {
                return Err(KvError::TypeMismatch(format!(
                    "indexed attribute {} must be text, got {}",
                    spec.attribute,
                    v.kind()
                )));
            }
        }
    }
    Ok(())
}

/// Point-in-time copy of the store contents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub tables: BTreeMap<String, Vec<Item>>,
}

impl Snapshot {
    pub fn items(&self, table: &str) -> &[Item] {
        self.tables.get(table).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn get(&self, table: &str, key: &ItemKey) -> Option<&Item> {
        self.items(table).iter().find(|i| &i.key == key)
    }

    pub fn count(&self, table: &str) -> usize {
        self.items(table).len()
    }

    /// Full-scan filter used as an oracle for index queries.
    pub fn filter_eq(&self, table: &str, attr: &str, value: &AttributeValue) -> Vec<&Item> {
        self.items(table)
            .iter()
            .filter(|i| i.attributes.get(attr) == Some(value))
            .collect()
    }
}
