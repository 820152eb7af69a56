//! Self-describing binary container shared by dataset and checkpoint files.
//!
//! ```text
//! magic        8 bytes
//! header_len   u64 little-endian
//! header       UTF-8 JSON, header_len bytes
//! value_count  u64 little-endian
//! values       value_count × f64 little-endian
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn encode<H: Serialize>(magic: &[u8; 8], header: &H, values: &[f64]) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(header).map_err(|e| Error::Format {
        what: "container header",
        detail: e.to_string(),
    })?;
    let mut out = Vec::with_capacity(8 + 8 + header.len() + 8 + values.len() * 8);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode<H: DeserializeOwned>(magic: &[u8; 8], bytes: &[u8]) -> Result<(H, Vec<f64>)> {
    let bad = |detail: &str| Error::Format {
        what: "container",
        detail: detail.to_string(),
    };
    let mut r = bytes;
    let mut m = [0u8; 8];
    r.read_exact(&mut m).map_err(|_| bad("truncated magic"))?;
    if &m != magic {
        return Err(bad(&format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&m)
        )));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(|_| bad("truncated header length"))?;
    let header_len = u64::from_le_bytes(len) as usize;
    if r.len() < header_len {
        return Err(bad("truncated header"));
    }
    let (header_bytes, mut r) = r.split_at(header_len);
    let header = serde_json::from_slice(header_bytes).map_err(|e| Error::Format {
        what: "container header",
        detail: e.to_string(),
    })?;
    r.read_exact(&mut len).map_err(|_| bad("truncated value count"))?;
    let count = u64::from_le_bytes(len) as usize;
    if r.len() != count * 8 {
        return Err(bad(&format!("expected {count} values, found {} bytes", r.len())));
    }
    let values = r
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, values))
}

pub fn write<H: Serialize>(path: &Path, magic: &[u8; 8], header: &H, values: &[f64]) -> Result<()> {
    let bytes = encode(magic, header, values)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read<H: DeserializeOwned>(path: &Path, magic: &[u8; 8]) -> Result<(H, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(magic, &bytes)
}
