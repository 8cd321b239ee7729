//! Versioned wire format for states, messages and collection items.
//!
//! Layout: one format byte followed by a JSON document.

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::ModelError;

pub const WIRE_VERSION: u8 = 1;

pub fn encode<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, ModelError> {
    let mut out = vec![WIRE_VERSION];
    serde_json::to_writer(&mut out, value).map_err(|e| ModelError::Codec(e.to_string()))?;
    Ok(out)
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ModelError> {
    match bytes.split_first() {
        Some((&WIRE_VERSION, body)) => {
            serde_json::from_slice(body).map_err(|e| ModelError::Codec(e.to_string()))
        }
        Some((v, _)) => Err(ModelError::Codec(format!("unsupported wire version {v}"))),
        None => Err(ModelError::Codec("empty payload".into())),
    }
}
