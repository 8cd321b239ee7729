mod common;

use common::kv::{self, Mutation};
use proptest::prelude::*;

fn mutation() -> impl Strategy<Value = Mutation> {
    let owner = 0u8..3;
    let item = 0u8..8;
    prop_oneof![
        2 => (owner.clone(), item.clone(), proptest::option::weighted(0.8, 0u8..4))
            .prop_map(|(owner, item, color)| Mutation::Put { owner, item, color }),
        1 => (owner.clone(), item.clone(), 0u8..4)
            .prop_map(|(owner, item, color)| Mutation::Recolor { owner, item, color }),
        1 => (owner, item).prop_map(|(owner, item)| Mutation::Delete { owner, item }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn index_queries_equal_filtered_scans(muts in proptest::collection::vec(mutation(), 0..60)) {
        prop_assert_eq!(kv::index_matches_scan(&muts), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn counters_are_linearizable(seed in any::<u64>()) {
        let (checked, v) = kv::linearizability(seed, 400);
        prop_assert_eq!(checked, 400);
        prop_assert!(v.is_empty(), "{:?}", v);
    }

    #[test]
    fn transactions_are_never_seen_half_applied(seed in any::<u64>()) {
        let (_, v) = kv::atomic_visibility(seed, 300);
        prop_assert!(v.is_empty(), "{:?}", v);
    }
}

#[test]
fn conditional_races_have_one_winner() {
    let (trials, v) = kv::single_winner(500, 4);
    assert_eq!(trials, 500);
    assert!(v.is_empty(), "{v:?}");
}
