//! Trace file I/O.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "CQEDTRC\0"
//! 8       4     u32 format version (1)
//! 12      4     u32 header length L
//! 16      L     UTF-8 JSON header
//! 16+L    4N    N interleaved i16 pairs (x1, x2)
//! ```

use std::io::{Read, Write};

use super::synth::{QuadratureTrace, TraceHeader};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CQEDTRC\0";
pub const VERSION: u32 = 1;
const MAX_HEADER: u32 = 1 << 20;

pub fn write_trace<W: Write>(t: &QuadratureTrace, mut w: W) -> Result<()> {
    t.validate()?;
    let header = serde_json::to_vec(&t.header)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(4 * t.len());
    for (a, b) in t.x1.iter().zip(&t.x2) {
        buf.extend_from_slice(&a.to_le_bytes());
        buf.extend_from_slice(&b.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn encode_trace(t: &QuadratureTrace) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_trace(t, &mut out)?;
    Ok(out)
}

/// Decodes and validates a complete trace file held in memory.
pub fn decode_trace(bytes: &[u8]) -> Result<QuadratureTrace> {
    let fail = |m: &str| Error::Format(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(fail("not a cqed trace file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported trace version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap());
    if hlen > MAX_HEADER {
        return Err(fail("header too long"));
    }
    let body_start = 16 + hlen as usize;
    if bytes.len() < body_start {
        return Err(fail("truncated header"));
    }
    let header: TraceHeader =
        serde_json::from_slice(&bytes[16..body_start]).map_err(|e| Error::Format(format!("header: {e}")))?;
    let body = &bytes[body_start..];
    if body.len() % 4 != 0 || body.len() / 4 != header.n_samples {
        return Err(Error::Format(format!(
            "sample block holds {} bytes, header promises {} samples",
            body.len(),
            header.n_samples
        )));
    }
    let mut x1 = Vec::with_capacity(header.n_samples);
    let mut x2 = Vec::with_capacity(header.n_samples);
    for pair in body.chunks_exact(4) {
        x1.push(i16::from_le_bytes([pair[0], pair[1]]));
        x2.push(i16::from_le_bytes([pair[2], pair[3]]));
    }
    let t = QuadratureTrace { header, x1, x2 };
    t.validate()?;
    Ok(t)
}

pub fn read_trace<R: Read>(mut r: R) -> Result<QuadratureTrace> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_trace(&bytes)
}

/// CSV export: `t_s,x1_counts,x2_counts`.
pub fn write_trace_csv<W: Write>(t: &QuadratureTrace, mut w: W) -> Result<()> {
    writeln!(w, "t_s,x1_counts,x2_counts")?;
    for i in 0..t.len() {
        writeln!(w, "{:e},{},{}", t.time(i), t.x1[i], t.x2[i])?;
    }
    Ok(())
}
