//! Flat file formats for lattice excursions.
//!
//! CSV: a header record `step,<h>` followed by one height (in lattice units)
//! per record.
//!
//! Binary, all little-endian:
//!
//! | bytes | content                 |
//! |-------|-------------------------|
//! | 4     | magic `LEXC`            |
//! | 4     | format version (`u32`)  |
//! | 8     | step `h` (`f64`)        |
//! | 8     | point count `n` (`u64`) |
//! | 4·n   | heights (`u32`)         |
//!
//! Both decoders validate the path before returning it.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::excursion::LatticeExcursion;

pub const MAGIC: &[u8; 4] = b"LEXC";
pub const BINARY_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

pub fn write_csv<W: Write>(exc: &LatticeExcursion, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["step".to_string(), format!("{:?}", exc.step())])?;
    for &x in exc.heights() {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<LatticeExcursion> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Malformed("empty input".into()))??;
    if header.len() != 2 || &header[0] != "step" {
        return Err(Error::Malformed("first record must be `step,<h>`".into()));
    }
    let h: f64 = header[1]
        .parse()
        .map_err(|_| Error::Malformed(format!("step `{}` is not a number", &header[1])))?;
    let mut heights = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != 1 {
            return Err(Error::Malformed(format!(
                "record {line}: expected one field"
            )));
        }
        let x = rec[0].parse::<u32>().map_err(|_| {
            Error::Malformed(format!("record {line}: `{}` is not a level", &rec[0]))
        })?;
        heights.push(x);
    }
    LatticeExcursion::new(heights, h)
}

pub fn encode_binary(exc: &LatticeExcursion) -> Vec<u8> {
    let hs = exc.heights();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * hs.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&exc.step().to_le_bytes());
    out.extend_from_slice(&(hs.len() as u64).to_le_bytes());
    for &x in hs {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> Result<LatticeExcursion> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Malformed(format!(
            "{} bytes is shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    let (header, body) = bytes.split_at(HEADER_LEN);
    if &header[..4] != MAGIC {
        return Err(Error::Malformed("bad magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes"));
    if version != BINARY_VERSION {
        return Err(Error::Malformed(format!("unsupported version {version}")));
    }
    let h = f64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
    let n = u64::from_le_bytes(header[16..24].try_into().expect("8 bytes"));
    if body.len() % 4 != 0 || (body.len() / 4) as u64 != n {
        return Err(Error::Malformed(format!(
            "header announces {n} points but the body holds {} bytes",
            body.len()
        )));
    }
    let heights = body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    LatticeExcursion::new(heights, h)
}
