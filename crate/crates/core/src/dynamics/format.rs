//! Versioned binary trajectory container and CSV export.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic      b"NVRT"
//! version    u32
//! header_len u32
//! header     header_len bytes of JSON (DatasetManifest)
//! n_traces   u64
//! per trace:
//!   label    u8    (m_I + 1)
//!   seed     u64
//!   n_flips  u32
//!   flips    n_flips × (repetition u32, from i8, to i8)
//!   n_counts u32
//!   counts   n_counts × u16
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::dataset::{Dataset, DatasetManifest, FlipRecord, Label, Trajectory, FORMAT_VERSION};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NVRT";

pub fn encode_dataset(dataset: &Dataset) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&dataset.manifest)?;
    let mut out = Vec::with_capacity(
        16 + header.len() + dataset.traces.iter().map(|t| 17 + 6 * t.flips.len() + 2 * t.counts.len()).sum::<usize>(),
    );
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(dataset.traces.len() as u64).to_le_bytes());
    for t in &dataset.traces {
        out.push((t.label.m_i() + 1) as u8);
        out.extend_from_slice(&t.seed.to_le_bytes());
        out.extend_from_slice(&(t.flips.len() as u32).to_le_bytes());
        for f in &t.flips {
            out.extend_from_slice(&f.repetition.to_le_bytes());
            out.push(f.from as u8);
            out.push(f.to as u8);
        }
        out.extend_from_slice(&(t.counts.len() as u32).to_le_bytes());
        for &c in &t.counts {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Format(format!("unexpected end of data at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("not a trajectory file (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported trajectory format version {version}")));
    }
    let header_len = c.u32()? as usize;
    let manifest: DatasetManifest = serde_json::from_slice(c.take(header_len)?)?;
    let n = c.u64()? as usize;
    if n != manifest.n_traces {
        return Err(Error::Format(format!("manifest lists {} traces, body has {n}", manifest.n_traces)));
    }
    let mut traces = Vec::with_capacity(n);
    for _ in 0..n {
        let raw = c.u8()?;
        let label = Label::from_m_i(raw as i8 - 1).ok_or_else(|| Error::Format(format!("bad label byte {raw}")))?;
        let seed = c.u64()?;
        let n_flips = c.u32()? as usize;
        let mut flips = Vec::with_capacity(n_flips.min(1 << 16));
        for _ in 0..n_flips {
            let repetition = c.u32()?;
            let from = c.u8()? as i8;
            let to = c.u8()? as i8;
            flips.push(FlipRecord { repetition, from, to });
        }
        let n_counts = c.u32()? as usize;
        if n_counts != manifest.repetitions {
            return Err(Error::Format(format!(
                "trace has {n_counts} counts, manifest says {}",
                manifest.repetitions
            )));
        }
        let counts = (0..n_counts).map(|_| c.u16()).collect::<Result<Vec<_>>>()?;
        traces.push(Trajectory { counts, label, flips, seed });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(Dataset { manifest, traces })
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_dataset(dataset)?)?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_dataset(&bytes)
}

/// Lowercase hex SHA-256 of the binary encoding.
pub fn dataset_hash(dataset: &Dataset) -> Result<String> {
    Ok(sha256_hex(&encode_dataset(dataset)?))
}

/// Lowercase hex SHA-256 of the manifest JSON. Identifies a dataset by how
/// it was generated, without encoding the traces.
pub fn manifest_hash(manifest: &DatasetManifest) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(manifest)?.as_bytes()))
}

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// One row per trace: `label,c0,c1,...` with labels `dark`, `bright0`, `bright_m1`.
pub fn write_dataset_csv<W: Write>(mut w: W, dataset: &Dataset) -> Result<()> {
    write!(w, "label")?;
    for i in 0..dataset.repetitions() {
        write!(w, ",c{i}")?;
    }
    writeln!(w)?;
    for t in &dataset.traces {
        let name = match t.label {
            Label::Dark => "dark",
            Label::Bright0 => "bright0",
            Label::BrightM1 => "bright_m1",
        };
        write!(w, "{name}")?;
        for c in &t.counts {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
