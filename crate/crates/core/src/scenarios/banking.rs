use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{snapshot_items, Workload};
use crate::api::{Actor, ActorError, Context, FeatureSet, MessageType, QueryableItem, Registry};
use crate::harness::{decode_response, ClientRequest, HarnessError, Verdict};
use crate::model::{collection_table, ActorId, MessageEnvelope, OutboxRecord, ShardPolicies, ShardPolicy};
use crate::txkv::Snapshot;
use crate::worker::Runtime;

pub const BANK_PARTITION: &str = "bank";
const ACCOUNTS: &str = "accounts";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub id: String,
    pub holder: String,
    pub balance: i64,
}

impl QueryableItem for Account {
    const TYPE_TAG: &'static str = "Account";
    const QUERYABLE: &'static [&'static str] = &["Holder"];

    fn item_id(&self) -> String {
        self.id.clone()
    }

    fn attributes(&self) -> BTreeMap<String, String> {
        [("Holder".to_string(), self.holder.clone())].into()
    }
}

/// Client request: move `amount` from one account to another.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub request_id: String,
    pub from: String,
    pub to: String,
    /// Bank holding `to`.
    pub to_bank: ActorId,
    pub amount: i64,
}

impl MessageType for Transfer {
    const TYPE_TAG: &'static str = "Transfer";
}

/// Second leg of a transfer between banks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credit {
    pub request_id: String,
    pub to: String,
    pub amount: i64,
}

impl MessageType for Credit {
    const TYPE_TAG: &'static str = "Credit";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferResult {
    pub request_id: String,
    pub accepted: bool,
    pub reason: Option<String>,
}

impl MessageType for TransferResult {
    const TYPE_TAG: &'static str = "TransferResult";
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bank {
    pub name: String,
    pub transfers: u64,
}

impl Bank {
    fn reply(cx: &mut Context<'_>, request_id: &str, reason: Option<&str>) -> Result<(), ActorError> {
        let r = TransferResult {
            request_id: request_id.to_string(),
            accepted: reason.is_none(),
            reason: reason.map(str::to_string),
        };
        cx.sender()?.tell_external(request_id, &r)
    }

    fn transfer(&mut self, t: Transfer, cx: &mut Context<'_>) -> Result<(), ActorError> {
        let local = t.to_bank == *cx.id();
        let mut accounts = cx.collection::<Account>(ACCOUNTS)?;
        if t.amount < 0 {
            drop(accounts);
            return Bank::reply(cx, &t.request_id, Some("negative amount"));
        }
        if !accounts.contains(&t.from)? || (local && !accounts.contains(&t.to)?) {
            drop(accounts);
            return Bank::reply(cx, &t.request_id, Some("unknown account"));
        }
        let from = accounts.get(&t.from)?;
        if from.balance < t.amount {
            drop(accounts);
            return Bank::reply(cx, &t.request_id, Some("insufficient funds"));
        }
        from.balance -= t.amount;
        self.transfers += 1;
        if local {
            accounts.get(&t.to)?.balance += t.amount;
            drop(accounts);
            return Bank::reply(cx, &t.request_id, None);
        }
        drop(accounts);
        let credit = Credit {
            request_id: t.request_id,
            to: t.to,
            amount: t.amount,
        };
        cx.sender()?.tell(&t.to_bank, &credit)
    }

    fn credit(&mut self, c: Credit, cx: &mut Context<'_>) -> Result<(), ActorError> {
        let mut accounts = cx.collection::<Account>(ACCOUNTS)?;
        // The source bank validated the account; a missing one is a bug.
        accounts.get(&c.to)?.balance += c.amount;
        drop(accounts);
        self.transfers += 1;
        Bank::reply(cx, &c.request_id, None)
    }
}

impl Actor for Bank {
    const TYPE_TAG: &'static str = "Bank";

    fn features() -> FeatureSet {
        FeatureSet::none().sender().collection::<Account>(ACCOUNTS)
    }

    fn receive(&mut self, msg: &MessageEnvelope, cx: &mut Context<'_>) -> Result<(), ActorError> {
        if msg.is::<Transfer>() {
            self.transfer(msg.decode()?, cx)
        } else if msg.is::<Credit>() {
            self.credit(msg.decode()?, cx)
        } else {
            Err(ActorError::UnregisteredMessageType(msg.type_tag.clone()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankingParams {
    pub accounts: usize,
    pub banks: usize,
    pub initial_balance: i64,
    /// Transfers draw amounts from `0..=max_amount`.
    pub max_amount: i64,
    /// Shard buckets of the bank partition.
    pub buckets: u32,
}

impl Default for BankingParams {
    fn default() -> Self {
        BankingParams {
            accounts: 300,
            banks: 10,
            initial_balance: 100,
            max_amount: 120,
            buckets: 8,
        }
    }
}

/// Transfers between accounts held by bank actors. Checks that money is
/// conserved and that final balances equal a replay of the accepted
/// transfers.
pub struct Banking {
    pub params: BankingParams,
    banks: Vec<ActorId>,
    issued: Vec<Transfer>,
}

impl Banking {
    pub fn new(params: BankingParams) -> Self {
        Banking {
            params,
            banks: Vec::new(),
            issued: Vec::new(),
        }
    }

    pub fn account_name(i: usize) -> String {
        format!("acct-{i:05}")
    }

    fn bank_of(&self, account: usize) -> &ActorId {
        &self.banks[account % self.banks.len()]
    }

    pub fn banks(&self) -> &[ActorId] {
        &self.banks
    }

    fn policy(&self) -> ShardPolicy {
        ShardPolicy::buckets(self.params.buckets)
    }
}

impl Workload for Banking {
    fn name(&self) -> &'static str {
        "banking"
    }

    fn registry(&self) -> Registry {
        Registry::new()
            .actor::<Bank>()
            .message::<Transfer>()
            .message::<Credit>()
            .message::<TransferResult>()
    }

    fn policies(&self) -> ShardPolicies {
        ShardPolicies::default().with(BANK_PARTITION, self.policy())
    }

    fn bootstrap(&mut self, rt: &Runtime) -> Result<(), HarnessError> {
        let p = &self.params;
        if p.accounts == 0 || p.banks == 0 || p.initial_balance < 0 || p.max_amount < 0 {
            return Err(HarnessError::Config("banking needs accounts, banks and non-negative amounts".into()));
        }
        self.banks.clear();
        for b in 0..p.banks.min(p.accounts) {
            let name = format!("bank-{b:03}");
            let bank = Bank {
                name: name.clone(),
                transfers: 0,
            };
            self.banks.push(rt.create_actor(BANK_PARTITION, &name, &bank)?);
        }
        for i in 0..p.accounts {
            let acct = Account {
                id: Banking::account_name(i),
                holder: format!("holder-{}", i % 17),
                balance: p.initial_balance,
            };
            rt.put_item::<Bank, _>(self.bank_of(i), ACCOUNTS, &acct)?;
        }
        Ok(())
    }

    fn requests(&mut self, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<ClientRequest>, HarnessError> {
        let n = self.params.accounts;
        self.issued.clear();
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let t = Transfer {
                request_id: format!("tx-{k:06}"),
                from: Banking::account_name(a),
                to: Banking::account_name(b),
                to_bank: self.bank_of(b).clone(),
                amount: rng.gen_range(0..=self.params.max_amount),
            };
            out.push(ClientRequest::new(t.request_id.clone(), self.bank_of(a).clone(), &t)?);
            self.issued.push(t);
        }
        Ok(out)
    }

    fn verdicts(&self, snapshot: &Snapshot, responses: &BTreeMap<String, OutboxRecord>) -> Vec<Verdict> {
        let table = collection_table(Bank::TYPE_TAG, ACCOUNTS);
        let finals: BTreeMap<String, i64> = snapshot_items::<Account>(snapshot, &table)
            .into_iter()
            .map(|(_, a)| (a.id, a.balance))
            .collect();
        let initial = self.params.initial_balance * self.params.accounts as i64;
        let total: i64 = finals.values().sum();
        let conservation = Verdict::new(
            "conservation",
            total == initial && finals.len() == self.params.accounts,
            format!("total {total}, expected {initial} over {} accounts", finals.len()),
        );

        let mut replay: BTreeMap<String, i64> = (0..self.params.accounts)
            .map(|i| (Banking::account_name(i), self.params.initial_balance))
            .collect();
        let mut accepted = BTreeSet::new();
        let mut violations = Vec::new();
        for t in &self.issued {
            let Some(rec) = responses.get(&t.request_id) else { continue };
            match decode_response::<TransferResult>(rec) {
                Ok(r) if r.accepted => {
                    *replay.entry(t.from.clone()).or_default() -= t.amount;
                    *replay.entry(t.to.clone()).or_default() += t.amount;
                    accepted.insert(t.request_id.clone());
                }
                Ok(_) => {}
                Err(e) => violations.push(format!("{}: {e}", t.request_id)),
            }
        }
        for (acct, want) in &replay {
            let got = finals.get(acct).copied();
            if got != Some(*want) {
                violations.push(format!("{acct}: balance {got:?}, replay {want}"));
            }
            if *want < 0 {
                violations.push(format!("{acct}: replay overdrawn to {want}"));
            }
        }
        let ledger = Verdict::from_violations("ledger-replay", replay.len(), &violations);
        vec![conservation, ledger]
    }
}
