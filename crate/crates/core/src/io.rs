//! Binary pattern files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                                         |
//! |--------|------|-----------------------------------------------|
//! | 0      | 4    | magic `BCDI`                                  |
//! | 4      | 2    | format version, currently 1                   |
//! | 6      | 2    | flags, written as 0                           |
//! | 8      | 4    | width                                         |
//! | 12     | 4    | height                                        |
//! | 16     | 1    | domain: 0 pattern, 1 object, 2 autocorrelation|
//! | 17     | 7    | reserved, zero                                |
//! | 24     | 8·W·L| `f64` samples, row-major, DC-centered         |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Domain, RealGrid};

pub const MAGIC: [u8; 4] = *b"BCDI";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

fn domain_tag(d: Domain) -> u8 {
    match d {
        Domain::Pattern => 0,
        Domain::Object => 1,
        Domain::Autocorrelation => 2,
    }
}

fn tag_domain(t: u8) -> Result<Domain> {
    match t {
        0 => Ok(Domain::Pattern),
        1 => Ok(Domain::Object),
        2 => Ok(Domain::Autocorrelation),
        _ => Err(Error::Format(format!("unknown domain tag {t}"))),
    }
}

pub fn encode_pattern(g: &RealGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(g.width() as u32).to_le_bytes());
    out.extend_from_slice(&(g.height() as u32).to_le_bytes());
    out.push(domain_tag(g.domain()));
    out.extend_from_slice(&[0u8; 7]);
    for v in g.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_pattern(bytes: &[u8]) -> Result<RealGrid> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Format("missing BCDI magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (w, h) = (u32_at(8), u32_at(12));
    let domain = tag_domain(bytes[16])?;
    let want = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("dimensions {w}x{h} overflow")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != want {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {want} for {w}x{h}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(RealGrid::from_vec(w, h, data)
        .map_err(|e| Error::Format(e.to_string()))?
        .with_domain(domain))
}

pub fn write_pattern(path: &Path, g: &RealGrid) -> Result<()> {
    fs::write(path, encode_pattern(g)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_pattern(path: &Path) -> Result<RealGrid> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pattern(&bytes)
}
