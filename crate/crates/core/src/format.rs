//! Binary graph file format and text edge-list export.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      4 bytes   "KSWG"
//! version    u16       1
//! side       u32       L
//! m          u32
//! gamma      u64       IEEE-754 bits
//! variant    u8        'W' | 'I'
//! rng_seed   u64
//! rng_id_len u16
//! rng_id     rng_id_len bytes of UTF-8
//! ties       L*L*m x u32, node order row-major, m targets per node
//! ```

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::graph::{GraphParams, SmallWorldGraph, Variant};
use crate::seeding::RNG_ALGORITHM;

pub const MAGIC: &[u8; 4] = b"KSWG";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphHeader {
    pub version: u16,
    pub params: GraphParams,
    pub rng_algorithm: String,
}

pub fn serialize(graph: &SmallWorldGraph) -> Vec<u8> {
    let p = graph.params();
    let ties = graph.all_weak_ties();
    let mut out = Vec::with_capacity(40 + RNG_ALGORITHM.len() + 4 * ties.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&p.side.to_le_bytes());
    out.extend_from_slice(&p.m.to_le_bytes());
    out.extend_from_slice(&p.gamma.to_bits().to_le_bytes());
    out.push(p.variant.as_byte());
    out.extend_from_slice(&p.rng_seed.to_le_bytes());
    out.extend_from_slice(&(RNG_ALGORITHM.len() as u16).to_le_bytes());
    out.extend_from_slice(RNG_ALGORITHM.as_bytes());
    for &t in ties {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Format(format!("truncated header at {what}"))),
        }
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("slice length checked"))
    }
}

pub fn read_header(bytes: &[u8]) -> Result<(GraphHeader, usize)> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(c.array("version")?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let side = u32::from_le_bytes(c.array("side")?);
    let m = u32::from_le_bytes(c.array("m")?);
    let gamma = f64::from_bits(u64::from_le_bytes(c.array("gamma")?));
    let vb = c.take(1, "variant")?[0];
    let variant = Variant::from_byte(vb)
        .ok_or_else(|| Error::Format(format!("variant byte {vb:#04x} is neither 'W' nor 'I'")))?;
    let rng_seed = u64::from_le_bytes(c.array("rng_seed")?);
    let id_len = u16::from_le_bytes(c.array("rng_id_len")?) as usize;
    let rng_algorithm = std::str::from_utf8(c.take(id_len, "rng_id")?)
        .map_err(|_| Error::Format("rng id is not UTF-8".into()))?
        .to_string();
    let params = GraphParams { side, m, gamma, variant, rng_seed };
    Ok((GraphHeader { version, params, rng_algorithm }, c.pos))
}

pub fn deserialize(bytes: &[u8]) -> Result<SmallWorldGraph> {
    let (header, body_start) = read_header(bytes)?;
    let p = header.params;
    p.validate().map_err(|e| Error::Format(e.to_string()))?;
    let n = (p.side as usize).pow(2);
    let expected = n * p.m as usize;
    let body = &bytes[body_start..];
    if !body.len().is_multiple_of(4) || body.len() / 4 != expected {
        return Err(Error::LengthMismatch { expected, found: body.len() / 4 });
    }
    let ties: Vec<u32> = body
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("chunk of 4")))
        .collect();
    SmallWorldGraph::from_parts(p, ties)
}

/// One `"owner target"` line per weak tie.
pub fn write_edge_list<W: Write>(graph: &SmallWorldGraph, mut out: W) -> io::Result<()> {
    let m = graph.m() as usize;
    for (i, &t) in graph.all_weak_ties().iter().enumerate() {
        writeln!(out, "{} {}", i / m, t)?;
    }
    Ok(())
}
