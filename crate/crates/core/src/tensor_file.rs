//! Header + payload container shared by model checkpoints and prompt
//! snapshots.
//!
//! Layout: a UTF-8 JSON header, the two bytes `\n\0`, then every tensor as
//! little-endian `f32` values, concatenated in manifest order. Offsets in the
//! manifest are byte offsets from the start of the payload. The content hash
//! is SHA-256 over the payload region only, so re-serializing the header
//! (for example with different metadata) does not change it.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SEPARATOR: &[u8; 2] = b"\n\0";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

impl TensorEntry {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub kind: String,
    pub config: Value,
    #[serde(default)]
    pub metadata: Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentHash(pub [u8; 32]);

impl ContentHash {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        ContentHash(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        NamedTensor {
            name: name.into(),
            shape,
            data,
        }
    }
}

/// A decoded container: header fields plus owned tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub kind: String,
    pub config: Value,
    pub metadata: Value,
    pub tensors: Vec<NamedTensor>,
}

pub fn encode_payload(tensors: &[NamedTensor]) -> Vec<u8> {
    let total: usize = tensors.iter().map(|t| t.data.len()).sum();
    let mut out = Vec::with_capacity(total * 4);
    for t in tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

impl TensorFile {
    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn content_hash(&self) -> ContentHash {
        ContentHash::of_bytes(&encode_payload(&self.tensors))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = Vec::with_capacity(self.tensors.len());
        let mut offset = 0u64;
        for t in &self.tensors {
            let numel: usize = t.shape.iter().product();
            if numel != t.data.len() {
                return Err(Error::Integrity(format!(
                    "tensor {} has shape {:?} but {} values",
                    t.name,
                    t.shape,
                    t.data.len()
                )));
            }
            entries.push(TensorEntry {
                name: t.name.clone(),
                shape: t.shape.clone(),
                offset,
            });
            offset += 4 * numel as u64;
        }
        let header = Header {
            kind: self.kind.clone(),
            config: self.config.clone(),
            metadata: self.metadata.clone(),
            tensors: entries,
        };
        let mut out = serde_json::to_vec(&header)
            .map_err(|e| Error::Format(format!("cannot encode header: {e}")))?;
        out.extend_from_slice(SEPARATOR);
        out.extend_from_slice(&encode_payload(&self.tensors));
        Ok(out)
    }

    /// Decodes a container, returning it together with the payload hash.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, ContentHash)> {
        let split = bytes
            .windows(2)
            .position(|w| w == SEPARATOR)
            .ok_or_else(|| Error::Format("missing header separator".into()))?;
        let header: Header = serde_json::from_slice(&bytes[..split])
            .map_err(|e| Error::Format(format!("malformed header: {e}")))?;
        let payload = &bytes[split + SEPARATOR.len()..];

        let mut expected = 0u64;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in &header.tensors {
            if entry.offset != expected {
                return Err(Error::Integrity(format!(
                    "tensor {} starts at byte {} but the previous tensor ends at {}",
                    entry.name, entry.offset, expected
                )));
            }
            let len = 4 * entry.numel() as u64;
            let end = expected + len;
            if end > payload.len() as u64 {
                return Err(Error::Integrity(format!(
                    "payload truncated: tensor {} needs bytes {}..{} but only {} are present",
                    entry.name,
                    expected,
                    end,
                    payload.len()
                )));
            }
            let raw = &payload[expected as usize..end as usize];
            let data: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::Integrity(format!(
                    "tensor {} holds a non-finite value at flat index {pos}",
                    entry.name
                )));
            }
            tensors.push(NamedTensor::new(entry.name.clone(), entry.shape.clone(), data));
            expected = end;
        }
        if expected != payload.len() as u64 {
            return Err(Error::Integrity(format!(
                "payload has {} trailing bytes",
                payload.len() as u64 - expected
            )));
        }
        let hash = ContentHash::of_bytes(payload);
        Ok((
            TensorFile {
                kind: header.kind,
                config: header.config,
                metadata: header.metadata,
                tensors,
            },
            hash,
        ))
    }

    pub fn write(&self, path: &Path) -> Result<ContentHash> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        Ok(self.content_hash())
    }

    pub fn read(path: &Path) -> Result<(Self, ContentHash)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorFile {
        TensorFile {
            kind: "test".into(),
            config: serde_json::json!({"a": 1}),
            metadata: Value::Null,
            tensors: vec![
                NamedTensor::new("x", vec![2, 2], vec![1.0, -2.0, 0.5, 3.25]),
                NamedTensor::new("y", vec![3], vec![0.0, 1e-7, -0.0]),
            ],
        }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let file = sample();
        let bytes = file.to_bytes().unwrap();
        let (back, hash) = TensorFile::from_bytes(&bytes).unwrap();
        assert_eq!(hash, file.content_hash());
        for (a, b) in file.tensors.iter().zip(&back.tensors) {
            let a: Vec<u32> = a.data.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = b.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn truncated_payload_is_an_integrity_error() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            TensorFile::from_bytes(&bytes),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn missing_separator_is_a_format_error() {
        assert!(matches!(
            TensorFile::from_bytes(b"{\"kind\": \"x\"}"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            TensorFile::from_bytes(b"not json\n\0"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut file = sample();
        file.tensors[1].data[1] = f32::NAN;
        let bytes = file.to_bytes().unwrap();
        assert!(matches!(
            TensorFile::from_bytes(&bytes),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn hash_ignores_metadata() {
        let a = sample();
        let mut b = sample();
        b.metadata = serde_json::json!({"note": "changed"});
        assert_eq!(a.content_hash(), b.content_hash());
    }
}
