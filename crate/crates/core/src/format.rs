//! Tensor file formats and small flag parsers.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! "TNSR" | u32 version (1) | u8 rank | u32 dims[rank] | f64 data[prod(dims)]
//! ```
//!
//! The text alternative is JSON lines: a `{"shape": [...]}` header, then
//! numbers or arrays of numbers whose concatenation is the row-major data.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor, MAX_CELLS};

pub const MAGIC: &[u8; 4] = b"TNSR";
pub const VERSION: u32 = 1;

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let dims = t.shape().dims();
    let mut out = Vec::with_capacity(9 + 4 * dims.len() + 8 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Format(format!(
                "truncated tensor file while reading {what}"
            )));
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format("missing TNSR magic".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported tensor version {version}"
        )));
    }
    let rank = r.take(1, "rank")?[0] as usize;
    if rank == 0 {
        return Err(Error::Format("tensor rank must be at least 1".into()));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut cells: usize = 1;
    for _ in 0..rank {
        let d = r.u32("dims")? as usize;
        cells = cells.saturating_mul(d);
        dims.push(d);
    }
    if cells > MAX_CELLS {
        return Err(Error::Format(format!(
            "tensor of {cells} cells exceeds the {MAX_CELLS} limit"
        )));
    }
    let shape = Shape::new(dims).map_err(|e| Error::Format(e.to_string()))?;
    let raw = r.take(8 * shape.len(), "data")?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after tensor data",
            bytes.len() - r.pos
        )));
    }
    let data = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    shape: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    One(f64),
    Many(Vec<f64>),
}

pub fn encode_jsonl(t: &Tensor) -> String {
    let dims = t.shape().dims();
    let mut out = serde_json::json!({ "shape": dims }).to_string();
    out.push('\n');
    let row = *dims.last().expect("rank >= 1");
    for chunk in t.data().chunks(row) {
        out.push_str(&serde_json::to_string(chunk).expect("finite floats serialize"));
        out.push('\n');
    }
    out
}

pub fn decode_jsonl(text: &str) -> Result<Tensor> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let head = lines
        .next()
        .ok_or_else(|| Error::Format("empty tensor text".into()))?;
    let header: Header =
        serde_json::from_str(head).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let shape = Shape::new(header.shape).map_err(|e| Error::Format(e.to_string()))?;
    let mut data = Vec::with_capacity(shape.len());
    for (i, line) in lines.enumerate() {
        let parsed: Line = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("data line {}: {e}", i + 2)))?;
        match parsed {
            Line::One(v) => data.push(v),
            Line::Many(vs) => data.extend(vs),
        }
        if data.len() > shape.len() {
            return Err(Error::Format(format!(
                "more values than shape {shape} holds"
            )));
        }
    }
    if data.len() != shape.len() {
        return Err(Error::Format(format!(
            "shape {shape} needs {} values, got {}",
            shape.len(),
            data.len()
        )));
    }
    Tensor::new(shape, data).map_err(|e| Error::Format(e.to_string()))
}

/// Binary if the bytes start with the magic, JSON lines otherwise.
pub fn decode_any(bytes: &[u8]) -> Result<Tensor> {
    if bytes.starts_with(MAGIC) {
        decode_tensor(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| Error::Format("tensor text is not UTF-8".into()))?;
        decode_jsonl(text)
    }
}

/// `"3"` or `"3,2"`: one extent broadcast to every axis, or one per axis.
pub fn parse_block(s: &str, rank: usize) -> Result<Vec<usize>> {
    let parts = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| {
                    Error::Config(format!("block extent {p:?} is not a positive integer"))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; rank]),
        n if n == rank => Ok(parts),
        n => Err(Error::Config(format!(
            "block has {n} extents for a rank-{rank} input"
        ))),
    }
}
