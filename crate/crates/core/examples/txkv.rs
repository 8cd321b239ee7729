//! The embedded store on its own: conditional writes, a transaction that
//! aborts as a whole, an index query and injected failures.

use serverless_actors::clock::Clock;
use serverless_actors::txkv::{Condition, FaultPlan, Item, ItemKey, KvError, Query, Store, TableSchema, WriteAction};

fn main() -> Result<(), KvError> {
    let store = Store::new(Clock::real());
    store.create_table(TableSchema::new("Seats", "flight").sort_key("seat").index("ByClass", "class"))?;

    let seat = |n: &str, class: &str| Item::new(ItemKey::composite("LX318", n)).with("class", class).with("holder", "");
    store.transact_write(vec![
        WriteAction::put("Seats", seat("1A", "business")),
        WriteAction::put("Seats", seat("1B", "business")),
        WriteAction::put("Seats", seat("23C", "economy")),
    ])?;

    // Hold a seat only if nobody holds it yet.
    let hold = |who: &str| {
        WriteAction::update("Seats", ItemKey::composite("LX318", "1A"))
            .set("holder", who)
            .when(Condition::equals("holder", ""))
    };
    store.write(hold("ada"))?;
    println!("second hold: {:?}", store.write(hold("bob")).unwrap_err());

    // One failing condition rolls back the whole transaction.
    let err = store
        .transact_write(vec![
            WriteAction::delete("Seats", ItemKey::composite("LX318", "23C")),
            WriteAction::check("Seats", ItemKey::composite("LX318", "1B"), Condition::equals("class", "economy")),
        ])
        .unwrap_err();
    println!("transaction: {err}, 23C still there: {}", store.get("Seats", &ItemKey::composite("LX318", "23C"))?.is_some());

    let business = store.query(&Query::index("Seats", "ByClass", "business"))?;
    println!("business seats: {:?}", business.iter().map(|i| i.key.sort_key.clone()).collect::<Vec<_>>());

    store.set_fault_plan(FaultPlan::failures(1, 0.5));
    let failed = (0..100)
        .filter(|i| {
            let item = Item::new(ItemKey::composite("LX999", format!("{i}"))).with("class", "economy");
            matches!(store.write(WriteAction::put("Seats", item)), Err(KvError::TransientFailure))
        })
        .count();
    store.set_fault_plan(FaultPlan::disabled());
    println!("{failed} of 100 writes failed transiently; {} landed", store.query(&Query::partition("Seats", "LX999"))?.len());
    Ok(())
}
