use std::any::Any;
use std::collections::BTreeMap;

use super::QueryableItem;
use crate::model::{codec, ModelError};

type EncodeFn = fn(&dyn Any) -> Result<Vec<u8>, ModelError>;
type AttrsFn = fn(&dyn Any) -> BTreeMap<String, String>;

fn encode_as<I: QueryableItem>(v: &dyn Any) -> Result<Vec<u8>, ModelError> {
    codec::encode(v.downcast_ref::<I>().expect("cache entry holds its declared type"))
}

fn attrs_as<I: QueryableItem>(v: &dyn Any) -> BTreeMap<String, String> {
    let item = v.downcast_ref::<I>().expect("cache entry holds its declared type");
    let mut attrs = item.attributes();
    attrs.retain(|k, _| I::QUERYABLE.contains(&k.as_str()));
    attrs
}

pub(crate) struct CacheEntry {
    /// `None` once deleted by the actor.
    pub value: Option<Box<dyn Any + Send>>,
    /// Bytes as last loaded or committed; `None` when absent from storage.
    pub committed: Option<Vec<u8>>,
    encode: EncodeFn,
    attrs: AttrsFn,
}

impl CacheEntry {
    pub fn new<I: QueryableItem>(value: Option<I>, committed: Option<Vec<u8>>) -> Self {
        CacheEntry {
            value: value.map(|v| Box::new(v) as Box<dyn Any + Send>),
            committed,
            encode: encode_as::<I>,
            attrs: attrs_as::<I>,
        }
    }

    pub fn current_bytes(&self) -> Result<Option<Vec<u8>>, ModelError> {
        self.value.as_deref().map(|v| (self.encode)(v)).transpose()
    }

    pub fn attributes(&self) -> Option<BTreeMap<String, String>> {
        self.value.as_deref().map(|v| (self.attrs)(v))
    }

    pub fn is_dirty(&self) -> Result<bool, ModelError> {
        Ok(self.current_bytes()? != self.committed)
    }
}

pub(crate) struct FieldCache {
    pub table: String,
    pub collection_id: String,
    pub entries: BTreeMap<String, CacheEntry>,
}

/// Per-actor cache of collection items. Lives as long as the actor is loaded;
/// entries are compared byte-wise against their committed form to find what
/// a handler changed.
#[derive(Default)]
pub struct CollectionCache {
    pub(crate) fields: BTreeMap<String, FieldCache>,
}

/// Changes of one field, derived at the end of a processing call.
pub(crate) struct FieldChanges {
    pub table: String,
    pub collection_id: String,
    pub puts: Vec<(String, Vec<u8>, BTreeMap<String, String>)>,
    pub deletes: Vec<String>,
}

impl CollectionCache {
    pub fn len(&self) -> usize {
        self.fields.values().map(|f| f.entries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn changes(&self) -> Result<Vec<FieldChanges>, ModelError> {
        let mut out = Vec::new();
        for f in self.fields.values() {
            let mut ch = FieldChanges {
                table: f.table.clone(),
                collection_id: f.collection_id.clone(),
                puts: Vec::new(),
                deletes: Vec::new(),
            };
            for (id, e) in &f.entries {
                match e.current_bytes()? {
                    Some(bytes) if Some(&bytes) != e.committed.as_ref() => {
                        let attrs = e.attributes().unwrap_or_default();
                        ch.puts.push((id.clone(), bytes, attrs));
                    }
                    None if e.committed.is_some() => ch.deletes.push(id.clone()),
                    _ => {}
                }
            }
            if !ch.puts.is_empty() || !ch.deletes.is_empty() {
                out.push(ch);
            }
        }
        Ok(out)
    }

    /// Adopts the current values as committed.
    pub(crate) fn mark_committed(&mut self) -> Result<(), ModelError> {
        for f in self.fields.values_mut() {
            let mut gone = Vec::new();
            for (id, e) in f.entries.iter_mut() {
                e.committed = e.current_bytes()?;
                if e.value.is_none() {
                    gone.push(id.clone());
                }
            }
            for id in gone {
                f.entries.remove(&id);
            }
        }
        Ok(())
    }

    /// Drops every entry that differs from storage so it is reloaded on use.
    pub(crate) fn rollback(&mut self) {
        for f in self.fields.values_mut() {
            f.entries.retain(|_, e| matches!(e.is_dirty(), Ok(false)));
        }
    }
}
