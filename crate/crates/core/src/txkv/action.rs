use serde::{Deserialize, Serialize};

use super::value::{AttributeValue, Attributes, Item, ItemKey};

/// Condition attached to a write. `Exists`/`NotExists` refer to the whole
/// item; `Equals` is false when the item or the attribute is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Condition {
    Exists,
    NotExists,
    Equals(String, AttributeValue),
    And(Vec<Condition>),
}

impl Condition {
    pub fn equals(name: &str, value: impl Into<AttributeValue>) -> Self {
        Condition::Equals(name.to_string(), value.into())
    }

    /// Evaluates against the current item's attributes (`None` when absent).
    pub fn holds(&self, current: Option<&Attributes>) -> bool {
        match self {
            Condition::Exists => current.is_some(),
            Condition::NotExists => current.is_none(),
            Condition::Equals(name, value) => current
                .and_then(|attrs| attrs.get(name))
                .is_some_and(|v| v == value),
            Condition::And(parts) => parts.iter().all(|c| c.holds(current)),
        }
    }
}

/// How an `Update` changes one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Assign {
    Set(AttributeValue),
    /// Set only when the attribute is currently absent.
    SetIfAbsent(AttributeValue),
    /// Integer addition; an absent attribute counts as 0.
    Increment(i64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WriteAction {
    Put {
        table: String,
        item: Item,
        condition: Option<Condition>,
    },
    /// Creates the item when absent (subject to the condition).
    Update {
        table: String,
        key: ItemKey,
        assignments: Vec<(String, Assign)>,
        condition: Option<Condition>,
    },
    Delete {
        table: String,
        key: ItemKey,
        condition: Option<Condition>,
    },
    ConditionCheck {
        table: String,
        key: ItemKey,
        condition: Condition,
    },
}

impl WriteAction {
    pub fn put(table: &str, item: Item) -> Self {
        WriteAction::Put {
            table: table.to_string(),
            item,
            condition: None,
        }
    }

    pub fn delete(table: &str, key: ItemKey) -> Self {
        WriteAction::Delete {
            table: table.to_string(),
            key,
            condition: None,
        }
    }

    pub fn update(table: &str, key: ItemKey) -> Self {
        WriteAction::Update {
            table: table.to_string(),
            key,
            assignments: Vec::new(),
            condition: None,
        }
    }

    pub fn check(table: &str, key: ItemKey, condition: Condition) -> Self {
        WriteAction::ConditionCheck {
            table: table.to_string(),
            key,
            condition,
        }
    }

    /// Adds a condition (or replaces the existing one). No-op for checks.
    pub fn when(mut self, cond: Condition) -> Self {
        match &mut self {
            WriteAction::Put { condition, .. }
            | WriteAction::Update { condition, .. }
            | WriteAction::Delete { condition, .. } => *condition = Some(cond),
            WriteAction::ConditionCheck { .. } => {}
        }
        self
    }

    pub fn set(self, name: &str, value: impl Into<AttributeValue>) -> Self {
        self.assign(name, Assign::Set(value.into()))
    }

    pub fn set_if_absent(self, name: &str, value: impl Into<AttributeValue>) -> Self {
        self.assign(name, Assign::SetIfAbsent(value.into()))
    }

    pub fn increment(self, name: &str, by: i64) -> Self {
        self.assign(name, Assign::Increment(by))
    }

    fn assign(mut self, name: &str, a: Assign) -> Self {
        if let WriteAction::Update { assignments, .. } = &mut self {
            assignments.push((name.to_string(), a));
        }
        self
    }

    pub fn table(&self) -> &str {
        match self {
            WriteAction::Put { table, .. }
            | WriteAction::Update { table, .. }
            | WriteAction::Delete { table, .. }
            | WriteAction::ConditionCheck { table, .. } => table,
        }
    }

    pub fn key(&self) -> &ItemKey {
        match self {
            WriteAction::Put { item, .. } => &item.key,
            WriteAction::Update { key, .. }
            | WriteAction::Delete { key, .. }
            | WriteAction::ConditionCheck { key, .. } => key,
        }
    }

    pub fn condition(&self) -> Option<&Condition> {
        match self {
            WriteAction::Put { condition, .. }
            | WriteAction::Update { condition, .. }
            | WriteAction::Delete { condition, .. } => condition.as_ref(),
            WriteAction::ConditionCheck { condition, .. } => Some(condition),
        }
    }
}
