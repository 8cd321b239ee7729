use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::KvError;

/// A stored attribute value.
///
/// Values of the same variant are totally ordered (text and blob
/// lexicographically, integers numerically). Ordering across variants is an
/// error; equality across variants is simply `false`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttributeValue {
    Text(String),
    Int(i64),
    Bool(bool),
    Blob(Vec<u8>),
}

impl AttributeValue {
    pub fn text(s: impl Into<String>) -> Self {
        AttributeValue::Text(s.into())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AttributeValue::Text(_) => "text",
            AttributeValue::Int(_) => "integer",
            AttributeValue::Bool(_) => "boolean",
            AttributeValue::Blob(_) => "blob",
        }
    }

    pub fn try_cmp(&self, other: &AttributeValue) -> Result<Ordering, KvError> {
        use AttributeValue::*;
        match (self, other) {
            (Text(a), Text(b)) => Ok(a.cmp(b)),
            (Int(a), Int(b)) => Ok(a.cmp(b)),
            (Bool(a), Bool(b)) => Ok(a.cmp(b)),
            (Blob(a), Blob(b)) => Ok(a.cmp(b)),
            _ => Err(KvError::TypeMismatch(format!(
                "cannot compare {} with {}",
                self.kind(),
                other.kind()
            ))),
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttributeValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            AttributeValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            AttributeValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_blob(&self) -> Option<&[u8]> {
        match self {
            AttributeValue::Blob(b) => Some(b),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            AttributeValue::Text(_) => 0,
            AttributeValue::Int(_) => 1,
            AttributeValue::Bool(_) => 2,
            AttributeValue::Blob(_) => 3,
        }
    }

    /// Internal total order used for physical layout only.
    pub(crate) fn layout_cmp(&self, other: &AttributeValue) -> Ordering {
        self.try_cmp(other)
            .unwrap_or_else(|_| self.rank().cmp(&other.rank()))
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Text(s) => write!(f, "s:{}", serde_json::to_string(s).unwrap_or_default()),
            AttributeValue::Int(i) => write!(f, "n:{i}"),
            AttributeValue::Bool(b) => write!(f, "b:{b}"),
            AttributeValue::Blob(bytes) => {
                f.write_str("x:")?;
                for b in bytes {
                    write!(f, "{b:02x}")?;
                }
                Ok(())
            }
        }
    }
}

impl From<&str> for AttributeValue {
    fn from(s: &str) -> Self {
        AttributeValue::Text(s.to_string())
    }
}

impl From<String> for AttributeValue {
    fn from(s: String) -> Self {
        AttributeValue::Text(s)
    }
}

impl From<i64> for AttributeValue {
    fn from(i: i64) -> Self {
        AttributeValue::Int(i)
    }
}

impl From<bool> for AttributeValue {
    fn from(b: bool) -> Self {
        AttributeValue::Bool(b)
    }
}

impl From<Vec<u8>> for AttributeValue {
    fn from(b: Vec<u8>) -> Self {
        AttributeValue::Blob(b)
    }
}

pub type Attributes = BTreeMap<String, AttributeValue>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemKey {
    pub partition_key: AttributeValue,
    pub sort_key: Option<AttributeValue>,
}

impl ItemKey {
    pub fn partition(pk: impl Into<AttributeValue>) -> Self {
        ItemKey {
            partition_key: pk.into(),
            sort_key: None,
        }
    }

    pub fn composite(pk: impl Into<AttributeValue>, sk: impl Into<AttributeValue>) -> Self {
        ItemKey {
            partition_key: pk.into(),
            sort_key: Some(sk.into()),
        }
    }

    pub(crate) fn layout_cmp(&self, other: &ItemKey) -> Ordering {
        self.partition_key
            .layout_cmp(&other.partition_key)
            .then_with(|| match (&self.sort_key, &other.sort_key) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (Some(a), Some(b)) => a.layout_cmp(b),
            })
    }
}

impl fmt::Display for ItemKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pk={}", self.partition_key)?;
        if let Some(sk) = &self.sort_key {
            write!(f, " sk={sk}")?;
        }
        Ok(())
    }
}

/// `ItemKey` wrapper with the physical layout ordering, for use in ordered maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct OrdKey(pub ItemKey);

impl Ord for OrdKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.layout_cmp(&other.0)
    }
}

impl PartialOrd for OrdKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub key: ItemKey,
    pub attributes: Attributes,
}

impl Item {
    pub fn new(key: ItemKey) -> Self {
        Item {
            key,
            attributes: Attributes::new(),
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<AttributeValue>) -> Self {
        self.attributes.insert(name.to_string(), value.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<&AttributeValue> {
        self.attributes.get(name)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.get(name).and_then(AttributeValue::as_text)
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        self.get(name).and_then(AttributeValue::as_int)
    }

    pub fn bool(&self, name: &str) -> Option<bool> {
        self.get(name).and_then(AttributeValue::as_bool)
    }

    pub fn blob(&self, name: &str) -> Option<&[u8]> {
        self.get(name).and_then(AttributeValue::as_blob)
    }
}
