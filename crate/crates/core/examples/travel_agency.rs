//! An agency actor with a queryable collection of journeys. Bookings look
//! journeys up by destination, take a seat, and spawn a traveler actor that
//! answers the client.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serverless_actors::api::{Actor, ActorError, Context, FeatureSet, MessageType, QueryableItem, Registry};
use serverless_actors::clock::Clock;
use serverless_actors::harness::{decode_response, Client, ClientRequest, Cluster};
use serverless_actors::model::{MessageEnvelope, ShardPolicies, ShardPolicy};
use serverless_actors::txkv::Store;
use serverless_actors::worker::{Hooks, Runtime, WorkerConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Journey {
    id: String,
    destination: String,
    seats: u32,
}

impl QueryableItem for Journey {
    const TYPE_TAG: &'static str = "Journey";
    const QUERYABLE: &'static [&'static str] = &["Destination"];

    fn item_id(&self) -> String {
        self.id.clone()
    }

    fn attributes(&self) -> BTreeMap<String, String> {
        [("Destination".to_string(), self.destination.clone())].into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Book {
    request_id: String,
    traveler: String,
    destination: String,
}

impl MessageType for Book {
    const TYPE_TAG: &'static str = "Book";
}

#[derive(Debug, Serialize, Deserialize)]
struct Ticket {
    request_id: String,
    journey: String,
}

impl MessageType for Ticket {
    const TYPE_TAG: &'static str = "Ticket";
}

#[derive(Debug, Serialize, Deserialize)]
struct Itinerary {
    traveler: String,
    journey: Option<String>,
}

impl MessageType for Itinerary {
    const TYPE_TAG: &'static str = "Itinerary";
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Agency {
    booked: u32,
}

impl Actor for Agency {
    const TYPE_TAG: &'static str = "Agency";

    fn features() -> FeatureSet {
        FeatureSet::none().sender().spawner().collection::<Journey>("journeys")
    }

    fn receive(&mut self, msg: &MessageEnvelope, cx: &mut Context<'_>) -> Result<(), ActorError> {
        let b: Book = msg.decode()?;
        let mut journeys = cx.collection::<Journey>("journeys")?;
        let open = journeys
            .find("Destination", &b.destination)?
            .into_iter()
            .find(|j| j.seats > 0);
        let Some(j) = open else {
            drop(journeys);
            let none = Itinerary {
                traveler: b.traveler,
                journey: None,
            };
            return cx.sender()?.tell_external(&b.request_id, &none);
        };
        journeys.get(&j.id)?.seats -= 1;
        drop(journeys);
        self.booked += 1;
        let traveler = cx.spawner()?.spawn(&Traveler { name: b.traveler.clone(), trips: 0 }, "traveler", &b.request_id)?;
        let ticket = Ticket {
            request_id: b.request_id,
            journey: j.id,
        };
        cx.sender()?.tell(&traveler, &ticket)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Traveler {
    name: String,
    trips: u32,
}

impl Actor for Traveler {
    const TYPE_TAG: &'static str = "Traveler";

    fn features() -> FeatureSet {
        FeatureSet::none().sender()
    }

    fn receive(&mut self, msg: &MessageEnvelope, cx: &mut Context<'_>) -> Result<(), ActorError> {
        let t: Ticket = msg.decode()?;
        self.trips += 1;
        let it = Itinerary {
            traveler: self.name.clone(),
            journey: Some(t.journey),
        };
        cx.sender()?.tell_external(&t.request_id, &it)
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clock = Clock::simulated();
    let _me = clock.participate();
    let registry = Registry::new()
        .actor::<Agency>()
        .actor::<Traveler>()
        .message::<Book>()
        .message::<Ticket>()
        .message::<Itinerary>();
    let rt = Runtime::new(Store::new(clock.clone()), registry, ShardPolicies::new(ShardPolicy::buckets(4)))?;
    let agency = rt.create_actor("agency", "alpine-tours", &Agency::default())?;
    for (id, dest, seats) in [("zrh-gva-0800", "Geneva", 1), ("zrh-gva-1200", "Geneva", 1), ("zrh-lug-0900", "Lugano", 2)] {
        let j = Journey {
            id: id.into(),
            destination: dest.into(),
            seats,
        };
        rt.put_item::<Agency, _>(&agency, "journeys", &j)?;
    }

    let mut cluster = Cluster::new(rt.clone(), WorkerConfig::default(), Hooks::default());
    cluster.start(2)?;
    let client = Client::new(rt.store.clone());
    let who = ["mara", "jonas", "lea", "nico"];
    for (i, name) in who.iter().enumerate() {
        let b = Book {
            request_id: format!("req-{i}"),
            traveler: name.to_string(),
            destination: "Geneva".into(),
        };
        client.inject(&ClientRequest::new(b.request_id.clone(), agency.clone(), &b)?)?;
    }
    for i in 0..who.len() {
        let rec = client.await_response(&format!("req-{i}"), Duration::from_secs(30), Duration::from_millis(50))?;
        let it: Itinerary = decode_response(&rec)?;
        println!("{} -> {:?}", it.traveler, it.journey);
    }
    cluster.await_quiescence(Duration::from_secs(60));
    cluster.shutdown();
    Ok(())
}
