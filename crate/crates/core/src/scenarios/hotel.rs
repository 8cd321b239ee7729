use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{snapshot_actors, snapshot_items, Workload};
use crate::api::{Actor, ActorError, Context, FeatureSet, MessageType, QueryableItem, Registry};
use crate::harness::{decode_response, ClientRequest, HarnessError, Verdict};
use crate::model::{collection_id, collection_table, ActorId, MessageEnvelope, OutboxRecord, ShardPolicies, ShardPolicy};
use crate::txkv::Snapshot;
use crate::worker::Runtime;

pub const USER_PARTITION: &str = "user";
pub const HOTEL_PARTITION: &str = "hotel";
const ROOMS: &str = "rooms";
pub const ROOM_TYPES: &[&str] = &["single", "double", "suite"];

/// Capacity and bookings of one room type on one day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomDay {
    pub room_type: String,
    pub day: u32,
    pub capacity: u32,
    pub booked: u32,
}

impl RoomDay {
    pub fn id_for(room_type: &str, day: u32) -> String {
        format!("{room_type}#{day:04}")
    }
}

impl QueryableItem for RoomDay {
    const TYPE_TAG: &'static str = "RoomDay";
    const QUERYABLE: &'static [&'static str] = &["RoomType"];

    fn item_id(&self) -> String {
        RoomDay::id_for(&self.room_type, self.day)
    }

    fn attributes(&self) -> BTreeMap<String, String> {
        [("RoomType".to_string(), self.room_type.clone())].into()
    }
}

/// Client request to a user: book `nights` nights from `from_day`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookRoom {
    pub request_id: String,
    pub hotel: ActorId,
    pub room_type: String,
    pub from_day: u32,
    pub nights: u32,
}

impl MessageType for BookRoom {
    const TYPE_TAG: &'static str = "BookRoom";
}

/// User to hotel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reservation {
    pub request_id: String,
    pub user: ActorId,
    pub room_type: String,
    pub from_day: u32,
    pub nights: u32,
}

impl MessageType for Reservation {
    const TYPE_TAG: &'static str = "Reservation";
}

/// Hotel back to user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservationResult {
    pub request_id: String,
    pub accepted: bool,
}

impl MessageType for ReservationResult {
    const TYPE_TAG: &'static str = "ReservationResult";
}

/// User to the outside.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookingReply {
    pub request_id: String,
    pub hotel: ActorId,
    pub accepted: bool,
}

impl MessageType for BookingReply {
    const TYPE_TAG: &'static str = "BookingReply";
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub name: String,
    /// Requests sent to a hotel and not answered yet, with their hotel.
    pub pending: BTreeMap<String, ActorId>,
    /// Accepted request ids.
    pub confirmed: Vec<String>,
    pub rejected: u32,
}

impl Actor for User {
    const TYPE_TAG: &'static str = "User";

    fn features() -> FeatureSet {
        FeatureSet::none().sender()
    }

    fn receive(&mut self, msg: &MessageEnvelope, cx: &mut Context<'_>) -> Result<(), ActorError> {
        if msg.is::<BookRoom>() {
            let b: BookRoom = msg.decode()?;
            let r = Reservation {
                request_id: b.request_id.clone(),
                user: cx.id().clone(),
                room_type: b.room_type,
                from_day: b.from_day,
                nights: b.nights,
            };
            self.pending.insert(b.request_id, b.hotel.clone());
            cx.sender()?.tell(&b.hotel, &r)
        } else if msg.is::<ReservationResult>() {
            let r: ReservationResult = msg.decode()?;
            let hotel = self
                .pending
                .remove(&r.request_id)
                .ok_or_else(|| ActorError::app(format!("no pending request {}", r.request_id)))?;
            if r.accepted {
                self.confirmed.push(r.request_id.clone());
            } else {
                self.rejected += 1;
            }
            let reply = BookingReply {
                request_id: r.request_id.clone(),
                hotel,
                accepted: r.accepted,
            };
            cx.sender()?.tell_external(&r.request_id, &reply)
        } else {
            Err(ActorError::UnregisteredMessageType(msg.type_tag.clone()))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hotel {
    pub name: String,
}

impl Actor for Hotel {
    const TYPE_TAG: &'static str = "Hotel";

    fn features() -> FeatureSet {
        FeatureSet::none().sender().collection::<RoomDay>(ROOMS)
    }

    fn receive(&mut self, msg: &MessageEnvelope, cx: &mut Context<'_>) -> Result<(), ActorError> {
        let r: Reservation = msg.decode()?;
        let mut rooms = cx.collection::<RoomDay>(ROOMS)?;
        let ids: Vec<String> = (r.from_day..r.from_day + r.nights)
            .map(|d| RoomDay::id_for(&r.room_type, d))
            .collect();
        let mut free = r.nights > 0;
        for id in &ids {
            if !rooms.contains(id)? {
                free = false;
                break;
            }
            let day = rooms.get(id)?;
            if day.booked >= day.capacity {
                free = false;
                break;
            }
        }
        if free {
            for id in &ids {
                rooms.get(id)?.booked += 1;
            }
        }
        drop(rooms);
        let result = ReservationResult {
            request_id: r.request_id,
            accepted: free,
        };
        cx.sender()?.tell(&r.user, &result)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotelParams {
    pub users: usize,
    pub hotels: usize,
    pub days: u32,
    pub capacity: u32,
    pub max_nights: u32,
    pub buckets: u32,
}

impl Default for HotelParams {
    fn default() -> Self {
        HotelParams {
            users: 20,
            hotels: 10,
            days: 30,
            capacity: 3,
            max_nights: 3,
            buckets: 8,
        }
    }
}

/// Users booking hotel rooms through a three-message flow. Checks that no
/// room-day is overbooked and that stored bookings match the replies.
pub struct HotelScenario {
    pub params: HotelParams,
    users: Vec<ActorId>,
    hotels: Vec<ActorId>,
    issued: Vec<BookRoom>,
}

impl HotelScenario {
    pub fn new(params: HotelParams) -> Self {
        HotelScenario {
            params,
            users: Vec::new(),
            hotels: Vec::new(),
            issued: Vec::new(),
        }
    }

    pub fn hotels(&self) -> &[ActorId] {
        &self.hotels
    }

    pub fn users(&self) -> &[ActorId] {
        &self.users
    }
}

impl Workload for HotelScenario {
    fn name(&self) -> &'static str {
        "hotel"
    }

    fn registry(&self) -> Registry {
        Registry::new()
            .actor::<User>()
            .actor::<Hotel>()
            .message::<BookRoom>()
            .message::<Reservation>()
            .message::<ReservationResult>()
            .message::<BookingReply>()
    }

    fn policies(&self) -> ShardPolicies {
        let p = ShardPolicy::buckets(self.params.buckets);
        ShardPolicies::default()
            .with(USER_PARTITION, p)
            .with(HOTEL_PARTITION, p)
    }

    fn bootstrap(&mut self, rt: &Runtime) -> Result<(), HarnessError> {
        let p = &self.params;
        if p.users == 0 || p.hotels == 0 || p.days == 0 || p.max_nights == 0 {
            return Err(HarnessError::Config("hotel needs users, hotels, days and nights".into()));
        }
        self.users = (0..p.users)
            .map(|u| {
                let name = format!("user-{u:03}");
                let user = User {
                    name: name.clone(),
                    ..User::default()
                };
                rt.create_actor(USER_PARTITION, &name, &user)
            })
            .collect::<Result<_, _>>()?;
        self.hotels.clear();
        for h in 0..p.hotels {
            let name = format!("hotel-{h:03}");
            let id = rt.create_actor(HOTEL_PARTITION, &name, &Hotel { name: name.clone() })?;
            for t in ROOM_TYPES {
                for day in 0..p.days {
                    let rd = RoomDay {
                        room_type: t.to_string(),
                        day,
                        capacity: p.capacity,
                        booked: 0,
                    };
                    rt.put_item::<Hotel, _>(&id, ROOMS, &rd)?;
                }
            }
            self.hotels.push(id);
        }
        Ok(())
    }

    fn requests(&mut self, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<ClientRequest>, HarnessError> {
        let p = &self.params;
        self.issued.clear();
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let user = &self.users[rng.gen_range(0..self.users.len())];
            let nights = rng.gen_range(1..=p.max_nights);
            let b = BookRoom {
                request_id: format!("bk-{k:06}"),
                hotel: self.hotels[rng.gen_range(0..self.hotels.len())].clone(),
                room_type: ROOM_TYPES[rng.gen_range(0..ROOM_TYPES.len())].to_string(),
                from_day: rng.gen_range(0..p.days),
                nights,
            };
            out.push(ClientRequest::new(b.request_id.clone(), user.clone(), &b)?);
            self.issued.push(b);
        }
        Ok(out)
    }

    fn verdicts(&self, snapshot: &Snapshot, responses: &BTreeMap<String, OutboxRecord>) -> Vec<Verdict> {
        // Bookings per (collection, room day) implied by the accepted replies.
        let mut implied: BTreeMap<(String, String), u32> = BTreeMap::new();
        let mut accepted = Vec::new();
        let mut violations = Vec::new();
        for b in &self.issued {
            let Some(rec) = responses.get(&b.request_id) else { continue };
            match decode_response::<BookingReply>(rec) {
                Ok(r) if r.accepted => {
                    for d in b.from_day..b.from_day + b.nights {
                        *implied
                            .entry((collection_id(&b.hotel, ROOMS), RoomDay::id_for(&b.room_type, d)))
                            .or_default() += 1;
                    }
                    accepted.push(b.request_id.clone());
                }
                Ok(_) => {}
                Err(e) => violations.push(format!("{}: {e}", b.request_id)),
            }
        }
        let table = collection_table(Hotel::TYPE_TAG, ROOMS);
        let days = snapshot_items::<RoomDay>(snapshot, &table);
        for (cid, day) in &days {
            let want = implied.remove(&(cid.clone(), day.item_id())).unwrap_or(0);
            if day.booked > day.capacity {
                violations.push(format!("{cid}/{} overbooked {}/{}", day.item_id(), day.booked, day.capacity));
            }
            if day.booked != want {
                violations.push(format!("{cid}/{} booked {} but {want} accepted", day.item_id(), day.booked));
            }
        }
        for (k, n) in implied {
            violations.push(format!("{}/{} accepted {n} times but does not exist", k.0, k.1));
        }
        let capacity = Verdict::from_violations("room-capacity", days.len(), &violations);

        let mut user_violations = Vec::new();
        let mut confirmed: Vec<String> = Vec::new();
        for (id, u) in snapshot_actors::<User>(snapshot) {
            if !u.pending.is_empty() {
                user_violations.push(format!("{id} still waits for {} replies", u.pending.len()));
            }
            confirmed.extend(u.confirmed);
        }
        confirmed.sort();
        accepted.sort();
        if confirmed != accepted {
            user_violations.push(format!(
                "users hold {} confirmations, replies accepted {}",
                confirmed.len(),
                accepted.len()
            ));
        }
        let users = Verdict::from_violations("user-bookings", self.users.len(), &user_violations);
        vec![capacity, users]
    }
}
