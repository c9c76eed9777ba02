//! Versioned binary container: magic, format version, JSON header, payload.
//!
//! ```text
//! b"NAUDMDL\0" | u32 LE version | u32 LE header length | header JSON | payload
//! ```
//! The header records what the payload is and its SHA-256 digest.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"NAUDMDL\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub kind: String,
    pub config: serde_json::Value,
    /// Hex id of the vocabulary the model was trained against.
    pub vocabulary_hash: String,
    /// Hex id of the full feature space (vocabulary plus appended blocks).
    pub feature_space: String,
    pub payload_sha256: String,
    pub payload_len: u64,
}

pub fn hex_id(id: u64) -> String {
    format!("{id:016x}")
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode<T: Serialize>(kind: &str, config: serde_json::Value, vocabulary: u64, space: u64, payload: &T) -> Result<Vec<u8>> {
    let body = serde_json::to_vec(payload)?;
    let header = ArtifactHeader {
        kind: kind.to_string(),
        config,
        vocabulary_hash: hex_id(vocabulary),
        feature_space: hex_id(space),
        payload_sha256: sha_hex(&body),
        payload_len: body.len() as u64,
    };
    let head = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + head.len() + body.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(head.len() as u32).to_le_bytes());
    out.extend_from_slice(&head);
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn read_header(bytes: &[u8]) -> Result<(ArtifactHeader, &[u8])> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a model artifact".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported artifact version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let rest = &bytes[16..];
    if rest.len() < hlen {
        return Err(Error::Format("truncated header".into()));
    }
    let header: ArtifactHeader = serde_json::from_slice(&rest[..hlen])?;
    let body = &rest[hlen..];
    if body.len() as u64 != header.payload_len || sha_hex(body) != header.payload_sha256 {
        return Err(Error::Format("payload digest mismatch".into()));
    }
    Ok((header, body))
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<(ArtifactHeader, T)> {
    let (header, body) = read_header(bytes)?;
    Ok((header, serde_json::from_slice(body)?))
}
