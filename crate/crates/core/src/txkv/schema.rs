use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSpec {
    pub name: String,
    /// Attribute the index is keyed on. Must hold text values.
    pub attribute: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub name: String,
    pub partition_key_name: String,
    pub sort_key_name: Option<String>,
    pub indexes: Vec<IndexSpec>,
}

impl TableSchema {
    pub fn new(name: &str, partition_key_name: &str) -> Self {
        TableSchema {
            name: name.to_string(),
            partition_key_name: partition_key_name.to_string(),
            sort_key_name: None,
            indexes: Vec::new(),
        }
    }

    pub fn sort_key(mut self, name: &str) -> Self {
        self.sort_key_name = Some(name.to_string());
        self
    }

    pub fn index(mut self, name: &str, attribute: &str) -> Self {
        self.indexes.push(IndexSpec {
            name: name.to_string(),
            attribute: attribute.to_string(),
        });
        self
    }

    pub fn index_spec(&self, name: &str) -> Option<&IndexSpec> {
        self.indexes.iter().find(|i| i.name == name)
    }

    pub fn is_key_attribute(&self, name: &str) -> bool {
        name == self.partition_key_name || self.sort_key_name.as_deref() == Some(name)
    }
}
