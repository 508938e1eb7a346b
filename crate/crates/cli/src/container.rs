//! Binary container shared by dataset, chain and summary files.
//!
//! ```text
//! MDGDP-BIN 1\n
//! {"kind":...,"meta":{...},"blocks":[{"name":...,"dims":[...]},...]}\n
//! <f64 little-endian payload, blocks back to back in header order>
//! ```
//!
//! Each block's values are laid out with the first dimension fastest, matching
//! the tensor layout, so a `[n, V]` block holds sample-major rows when written
//! as `dims = [V, n]`. Headers are serialized from structs with a fixed field
//! order, so encoding is deterministic.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const MAGIC: &[u8] = b"MDGDP-BIN 1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: Value,
    pub blocks: Vec<Block>,
}

#[derive(Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    dims: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: String,
    meta: Value,
    blocks: Vec<BlockHeader>,
}

impl Container {
    pub fn new(kind: &str, meta: Value) -> Self {
        Self { kind: kind.into(), meta, blocks: Vec::new() }
    }

    pub fn push(&mut self, name: &str, dims: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        self.blocks.push(Block { name: name.into(), dims, data });
    }

    pub fn block(&self, name: &str) -> Result<&Block, String> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .ok_or_else(|| format!("missing block '{name}'"))
    }

    pub fn encode(&self) -> Vec<u8> {
        let header = Header {
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            blocks: self.blocks.iter().map(|b| BlockHeader { name: b.name.clone(), dims: b.dims.clone() }).collect(),
        };
        let mut out = MAGIC.to_vec();
        out.extend(serde_json::to_vec(&header).expect("header serializes"));
        out.push(b'\n');
        for b in &self.blocks {
            for v in &b.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Errors name the byte offset where decoding failed.
    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        if !bytes.starts_with(MAGIC) {
            return Err("byte 0: not an mdgdp container (bad magic)".into());
        }
        let start = MAGIC.len();
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| start + p)
            .ok_or_else(|| format!("byte {start}: header line is not terminated"))?;
        let header: Header = serde_json::from_slice(&bytes[start..end])
            .map_err(|e| format!("byte {start}: malformed header ({e})"))?;
        let mut pos = end + 1;
        let mut blocks = Vec::with_capacity(header.blocks.len());
        for h in header.blocks {
            let len = h
                .dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| format!("byte {start}: block '{}' is too large", h.name))?;
            let need = len * 8;
            if bytes.len() - pos < need {
                return Err(format!("byte {}: block '{}' truncated, need {need} bytes", bytes.len(), h.name));
            }
            let data = bytes[pos..pos + need]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            pos += need;
            blocks.push(Block { name: h.name, dims: h.dims, data });
        }
        if pos != bytes.len() {
            return Err(format!("byte {pos}: {} trailing bytes after the last block", bytes.len() - pos));
        }
        Ok(Self { kind: header.kind, meta: header.meta, blocks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn sample() -> Container {
        let mut c = Container::new("test", json!({"n": 3, "note": "x", "s": 0.1}));
        c.push("a", vec![3], vec![1.0, -0.0, f64::MIN_POSITIVE]);
        c.push("b", vec![2, 0], vec![]);
        c.push("c", vec![1, 2], vec![1e300, -2.5]);
        c
    }

    #[test]
    fn round_trip_bytes() {
        let c = sample();
        let bytes = c.encode();
        let back = Container::decode(&bytes).unwrap();
        assert_eq!(back.encode(), bytes);
        assert_eq!(back.block("c").unwrap().data, vec![1e300, -2.5]);
        assert!(back.block("zzz").is_err());
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = sample().encode();
        assert!(Container::decode(b"nope").unwrap_err().starts_with("byte 0"));
        let e = Container::decode(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(e.contains("truncated"), "{e}");
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Container::decode(&extra).unwrap_err().contains("trailing"));
        let mut bad = bytes.clone();
        bad[MAGIC.len()] = b'[';
        assert!(Container::decode(&bad).unwrap_err().contains("malformed header"));
    }

    proptest! {
        #[test]
        fn encode_decode_encode(vals in prop::collection::vec(any::<f64>(), 0..50), x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let mut c = Container::new("p", json!({"x": x}));
            c.push("v", vec![vals.len()], vals.clone());
            let bytes = c.encode();
            let back = Container::decode(&bytes).unwrap();
            prop_assert_eq!(back.encode(), bytes);
            prop_assert_eq!(back.meta["x"].as_f64().unwrap().to_bits(), x.to_bits());
        }
    }
}
