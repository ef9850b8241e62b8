//! Slot traces as CSV or a fixed-width little-endian binary format.

use std::io::{self, Read, Write};

use super::SlotRecord;

pub const TRACE_CSV_HEADER: [&str; 10] = [
    "slot",
    "theta",
    "true_index",
    "bit",
    "bob_sample",
    "eve_re",
    "eve_im",
    "bob_decision",
    "eve_phase_decision",
    "eve_bit_decision",
];

const MAGIC: &[u8; 4] = b"QSCT";
const VERSION: u32 = 1;
const RECORD_BYTES: usize = 8 + 8 + 4 + 1 + 8 + 8 + 8 + 1 + 4 + 1;

pub fn write_trace_csv<W: Write>(records: &[SlotRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_CSV_HEADER)?;
    for r in records {
        w.write_record(&[
            r.slot_index.to_string(),
            format!("{:?}", r.true_phase),
            r.true_index.to_string(),
            r.plaintext_bit.to_string(),
            format!("{:?}", r.bob_sample),
            format!("{:?}", r.eve_re),
            format!("{:?}", r.eve_im),
            r.bob_decision.to_string(),
            r.eve_phase_decision.to_string(),
            r.eve_bit_decision.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Header `QSCT`, `u32` version, `u64` count, then one fixed-width record
/// per slot in the CSV column order.
pub fn write_trace_binary<W: Write>(records: &[SlotRecord], mut out: W) -> io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(records.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(RECORD_BYTES);
    for r in records {
        buf.clear();
        buf.extend_from_slice(&r.slot_index.to_le_bytes());
        buf.extend_from_slice(&r.true_phase.to_le_bytes());
        buf.extend_from_slice(&r.true_index.to_le_bytes());
        buf.push(r.plaintext_bit);
        buf.extend_from_slice(&r.bob_sample.to_le_bytes());
        buf.extend_from_slice(&r.eve_re.to_le_bytes());
        buf.extend_from_slice(&r.eve_im.to_le_bytes());
        buf.push(r.bob_decision);
        buf.extend_from_slice(&r.eve_phase_decision.to_le_bytes());
        buf.push(r.eve_bit_decision);
        out.write_all(&buf)?;
    }
    out.flush()
}

pub fn read_trace_binary<R: Read>(mut input: R) -> io::Result<Vec<SlotRecord>> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut head = [0u8; 16];
    input.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(bad("not a trace file"));
    }
    if u32::from_le_bytes(head[4..8].try_into().unwrap()) != VERSION {
        return Err(bad("unsupported trace version"));
    }
    let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let mut out = Vec::with_capacity(n.min(1 << 24));
    let mut rec = [0u8; RECORD_BYTES];
    for _ in 0..n {
        input.read_exact(&mut rec)?;
        let mut at = 0usize;
        let mut take = |k: usize| {
            let s = &rec[at..at + k];
            at += k;
            s.to_vec()
        };
        let u64_ = |b: Vec<u8>| u64::from_le_bytes(b.try_into().unwrap());
        let f64_ = |b: Vec<u8>| f64::from_le_bytes(b.try_into().unwrap());
        let u32_ = |b: Vec<u8>| u32::from_le_bytes(b.try_into().unwrap());
        out.push(SlotRecord {
            slot_index: u64_(take(8)),
            true_phase: f64_(take(8)),
            true_index: u32_(take(4)),
            plaintext_bit: take(1)[0],
            bob_sample: f64_(take(8)),
            eve_re: f64_(take(8)),
            eve_im: f64_(take(8)),
            bob_decision: take(1)[0],
            eve_phase_decision: u32_(take(4)),
            eve_bit_decision: take(1)[0],
        });
    }
    Ok(out)
}
