use crate::txkv::{KvError, Store, TableSchema};

use super::records::ATTR_PREFIX;

pub mod tables {
    pub const ACTOR_TASK: &str = "ActorTask";
    pub const ACTOR_TASK_BY_WORKER: &str = "ActorTaskByWorker";
    pub const ACTOR_INBOX: &str = "ActorInbox";
    pub const ACTOR_STATE: &str = "ActorState";
    pub const OUTBOX: &str = "Outbox";
    pub const WORKER_LEASE: &str = "WorkerLease";
    pub const DEAD_LETTER: &str = "DeadLetter";
}

/// A queryable collection field declared by an actor type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CollectionDecl {
    pub actor_type: String,
    pub field: String,
    pub attributes: Vec<String>,
}

impl CollectionDecl {
    pub fn table_name(&self) -> String {
        collection_table(&self.actor_type, &self.field)
    }

    pub fn schema(&self) -> TableSchema {
        self.attributes.iter().fold(
            TableSchema::new(&self.table_name(), "collection_id").sort_key("item_id"),
            |s, a| s.index(a, &format!("{ATTR_PREFIX}{a}")),
        )
    }
}

pub fn collection_table(actor_type: &str, field: &str) -> String {
    format!("QueryableCollection.{actor_type}.{field}")
}

/// Fixed runtime tables followed by one table per declared collection.
pub fn schemas(collections: &[CollectionDecl]) -> Vec<TableSchema> {
    let mut out = vec![
        TableSchema::new(tables::ACTOR_TASK, "shard_ref")
            .index(tables::ACTOR_TASK_BY_WORKER, "worker_id"),
        TableSchema::new(tables::ACTOR_INBOX, "shard_ref").sort_key("timestamp"),
        TableSchema::new(tables::ACTOR_STATE, "actor_id"),
        TableSchema::new(tables::OUTBOX, "correlation_id"),
        TableSchema::new(tables::WORKER_LEASE, "worker_id"),
        TableSchema::new(tables::DEAD_LETTER, "shard_ref").sort_key("timestamp"),
    ];
    out.extend(collections.iter().map(CollectionDecl::schema));
    out
}

/// Creates every table of [`schemas`] in `store`.
pub fn create_tables(store: &Store, collections: &[CollectionDecl]) -> Result<(), KvError> {
    for s in schemas(collections) {
        store.create_table(s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_tables() {
        let all = schemas(&[]);
        let names: Vec<_> = all.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            ["ActorTask", "ActorInbox", "ActorState", "Outbox", "WorkerLease", "DeadLetter"]
        );
        let task = &all[0];
        assert_eq!(task.indexes[0].name, "ActorTaskByWorker");
        assert_eq!(task.indexes[0].attribute, "worker_id");
        assert_eq!(all[1].sort_key_name.as_deref(), Some("timestamp"));
    }

    #[test]
    fn collection_tables_get_attribute_indexes() {
        let decl = CollectionDecl {
            actor_type: "TravelAgent".into(),
            field: "journeys".into(),
            attributes: vec!["Destination".into()],
        };
        let all = schemas(std::slice::from_ref(&decl));
        let s = all.last().unwrap();
        assert_eq!(s.name, "QueryableCollection.TravelAgent.journeys");
        assert_eq!(s.indexes[0].name, "Destination");
        assert_eq!(s.indexes[0].attribute, "attr.Destination");
    }
}
