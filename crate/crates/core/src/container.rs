//! Shared layout of the binary files: a magic line, one line of compact JSON,
//! then a little-endian payload.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn encode<H: Serialize>(magic: &[u8], header: &H, payload: &[u8]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| Error::arg(format!("header encoding: {e}")))?;
    let mut out = Vec::with_capacity(magic.len() + json.len() + 1 + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&json);
    out.push(b'\n');
    out.extend_from_slice(payload);
    Ok(out)
}

/// Splits a container into its parsed header and the payload offset.
pub(crate) fn decode<H: DeserializeOwned>(bytes: &[u8], magic: &[u8]) -> Result<(H, usize)> {
    if bytes.len() < magic.len() {
        return Err(Error::format(bytes.len() as u64, "file shorter than magic prefix"));
    }
    if &bytes[..magic.len()] != magic {
        return Err(Error::format(
            0,
            format!("bad magic, expected {:?}", String::from_utf8_lossy(magic)),
        ));
    }
    let start = magic.len();
    let end = bytes[start..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|p| start + p)
        .ok_or_else(|| Error::format(bytes.len() as u64, "unterminated header"))?;
    let header = serde_json::from_slice(&bytes[start..end])
        .map_err(|e| Error::format(start as u64 + e.column() as u64, format!("header: {e}")))?;
    Ok((header, end + 1))
}

pub(crate) fn read_f64s(bytes: &[u8], offset: usize, count: usize) -> Result<Vec<f64>> {
    let need = count * 8;
    if bytes.len() < offset + need {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload: need {need} bytes at offset {offset}"),
        ));
    }
    Ok(bytes[offset..offset + need]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}
