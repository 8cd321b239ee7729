//! Line-oriented text dump of a snapshot, for debugging.
//!
//! One item per line: `table=<name> pk=<value> [sk=<value>] <attr>=<value>...`
//! where values render as `s:"text"`, `n:42`, `b:true` or `x:<hex>`.

use std::fmt::Write;

use super::store::Snapshot;

pub fn dump(snapshot: &Snapshot) -> String {
    let mut out = String::new();
    for (table, items) in &snapshot.tables {
        for item in items {
            let _ = write!(out, "table={table} {}", item.key);
            for (name, value) in &item.attributes {
                let _ = write!(out, " {name}={value}");
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::Clock;
    use crate::txkv::{Item, ItemKey, Store, TableSchema, WriteAction};

    #[test]
    fn one_line_per_item() {
        let store = Store::new(Clock::real());
        store.create_table(TableSchema::new("T", "id")).unwrap();
        for (k, v) in [("a", 1i64), ("b", 2)] {
            store
                .write(WriteAction::put("T", Item::new(ItemKey::partition(k)).with("v", v)))
                .unwrap();
        }
        let text = dump(&store.snapshot());
        assert_eq!(text, "table=T pk=s:\"a\" v=n:1\ntable=T pk=s:\"b\" v=n:2\n");
    }
}
