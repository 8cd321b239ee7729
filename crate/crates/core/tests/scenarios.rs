use std::time::Duration;

use serverless_actors::clock::Clock;
use serverless_actors::harness::{decode_response, Client, ClientRequest, Cluster};
use serverless_actors::scenarios::{
    run, BookRoom, BookingReply, Banking, BankingParams, HotelParams, HotelScenario, ScenarioSpec, Transfer, TransferResult,
    Workload,
};
use serverless_actors::txkv::Store;
use serverless_actors::worker::{Hooks, Runtime, WorkerConfig};

fn quick() -> ScenarioSpec {
    ScenarioSpec {
        worker: WorkerConfig {
            polling_interval: Duration::from_millis(100),
            ..WorkerConfig::default()
        },
        ..ScenarioSpec::default()
    }
}

#[test]
fn single_zero_transfer_leaves_balances_alone() {
    let spec = ScenarioSpec { requests: 1, ..quick() };
    let mut w = Banking::new(BankingParams {
        accounts: 1,
        banks: 1,
        max_amount: 0,
        ..BankingParams::default()
    });
    let r = run(&spec, &mut w).unwrap();
    assert!(r.all_passed(), "{}", r.summary_table());
    assert_eq!(r.samples.len(), 1);
    assert!(r.verdict("conservation").unwrap().detail.starts_with("total 100,"));
}

#[test]
fn zero_requests_is_an_empty_passing_report() {
    let r = run(&ScenarioSpec { requests: 0, ..quick() }, &mut HotelScenario::new(HotelParams::default())).unwrap();
    assert!(r.all_passed());
    assert!(r.samples.is_empty());
    assert_eq!(r.summary().completed, 0);
}

#[test]
fn default_scales_pass_every_oracle() {
    let r = run(&ScenarioSpec { requests: 600, ..quick() }, &mut Banking::new(BankingParams::default())).unwrap();
    assert!(r.all_passed(), "{}", r.summary_table());
    let accepted = r.samples.len();
    assert_eq!(accepted, 600);
    let r = run(&ScenarioSpec { requests: 500, ..quick() }, &mut HotelScenario::new(HotelParams::default())).unwrap();
    assert!(r.all_passed(), "{}", r.summary_table());
}

#[test]
fn same_seed_gives_same_verdicts() {
    let verdicts = |seed| {
        let spec = ScenarioSpec {
            requests: 200,
            workers: 3,
            seed,
            chaos: serverless_actors::harness::ChaosSchedule::random_kills(seed, 2, Duration::from_secs(3), Duration::from_secs(1)),
            ..quick()
        };
        run(&spec, &mut Banking::new(BankingParams::default()))
            .unwrap()
            .verdicts
            .into_iter()
            .map(|v| (v.name, v.passed))
            .collect::<Vec<_>>()
    };
    assert_eq!(verdicts(9), verdicts(9));
}

#[test]
fn two_bookings_for_the_last_room_one_wins() {
    let clock = Clock::simulated();
    let _me = clock.participate();
    let mut w = HotelScenario::new(HotelParams {
        users: 2,
        hotels: 1,
        days: 1,
        capacity: 1,
        max_nights: 1,
        buckets: 1,
    });
    let rt = Runtime::new(Store::new(clock.clone()), w.registry(), w.policies()).unwrap();
    w.bootstrap(&rt).unwrap();
    let client = Client::new(rt.store.clone());
    let hotel = w.hotels()[0].clone();
    for (i, user) in w.users().to_vec().into_iter().enumerate() {
        let b = BookRoom {
            request_id: format!("b{i}"),
            hotel: hotel.clone(),
            room_type: "double".into(),
            from_day: 0,
            nights: 1,
        };
        client.inject(&ClientRequest::new(b.request_id.clone(), user, &b).unwrap()).unwrap();
    }
    let mut cluster = Cluster::new(rt.clone(), quick().worker, Hooks::default());
    cluster.start(2).unwrap();
    assert!(cluster.await_quiescence(Duration::from_secs(60)));
    cluster.shutdown();
    let accepted: Vec<bool> = ["b0", "b1"]
        .iter()
        .map(|id| decode_response::<BookingReply>(&client.response(id).unwrap().unwrap()).unwrap().accepted)
        .collect();
    assert_eq!(accepted.iter().filter(|a| **a).count(), 1, "{accepted:?}");
}

#[test]
fn overdraft_is_rejected_with_a_reply() {
    let clock = Clock::simulated();
    let _me = clock.participate();
    let mut w = Banking::new(BankingParams {
        accounts: 2,
        banks: 2,
        initial_balance: 10,
        ..BankingParams::default()
    });
    let rt = Runtime::new(Store::new(clock.clone()), w.registry(), w.policies()).unwrap();
    w.bootstrap(&rt).unwrap();
    let client = Client::new(rt.store.clone());
    let banks = w.banks().to_vec();
    for (id, amount) in [("t-big", 11), ("t-ok", 10)] {
        let t = Transfer {
            request_id: id.into(),
            from: Banking::account_name(0),
            to: Banking::account_name(1),
            to_bank: banks[1].clone(),
            amount,
        };
        client.inject(&ClientRequest::new(id, banks[0].clone(), &t).unwrap()).unwrap();
    }
    let mut cluster = Cluster::new(rt.clone(), quick().worker, Hooks::default());
    cluster.start(1).unwrap();
    assert!(cluster.await_quiescence(Duration::from_secs(60)));
    cluster.shutdown();
    let reply = |id| decode_response::<TransferResult>(&client.response(id).unwrap().unwrap()).unwrap();
    assert_eq!(reply("t-big").reason.as_deref(), Some("insufficient funds"));
    assert!(reply("t-ok").accepted);
}
