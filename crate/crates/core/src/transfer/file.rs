//! Binary container: magic, version, modality, dimensions, conductor
//! checksum and solver tolerance, then `f64` little endian row-major data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Modality, TransferMatrix};
use crate::{Error, Result};

pub const MAGIC: [u8; 8] = *b"NFXFER\0\x01";
pub(crate) const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 8 + 8 + 32 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferHeader {
    pub version: u32,
    pub modality: Modality,
    pub rows: usize,
    pub cols: usize,
    pub checksum: [u8; 32],
    pub tolerance: f64,
}

impl std::fmt::Display for TransferHeader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "version    {}", self.version)?;
        writeln!(f, "modality   {}", self.modality)?;
        writeln!(f, "sensors    {}", self.rows)?;
        writeln!(f, "dofs       {}", self.cols)?;
        writeln!(f, "tolerance  {:e}", self.tolerance)?;
        write!(f, "checksum   ")?;
        for b in self.checksum {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl TransferHeader {
    fn encode(&self) -> Vec<u8> {
        let mut h = Vec::with_capacity(HEADER_LEN);
        h.extend_from_slice(&MAGIC);
        h.extend_from_slice(&self.version.to_le_bytes());
        let m: u32 = match self.modality {
            Modality::Eeg => 0,
            Modality::Meg => 1,
        };
        h.extend_from_slice(&m.to_le_bytes());
        h.extend_from_slice(&(self.rows as u64).to_le_bytes());
        h.extend_from_slice(&(self.cols as u64).to_le_bytes());
        h.extend_from_slice(&self.checksum);
        h.extend_from_slice(&self.tolerance.to_le_bytes());
        h
    }

    fn decode(b: &[u8; HEADER_LEN]) -> Result<Self> {
        if b[..8] != MAGIC {
            return Err(Error::Format("not a transfer matrix file (bad magic)".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(8);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported transfer file version {version}")));
        }
        let modality = match u32_at(12) {
            0 => Modality::Eeg,
            1 => Modality::Meg,
            m => return Err(Error::Format(format!("unknown modality code {m}"))),
        };
        let mut checksum = [0u8; 32];
        checksum.copy_from_slice(&b[32..64]);
        Ok(Self {
            version,
            modality,
            rows: u64_at(16) as usize,
            cols: u64_at(24) as usize,
            checksum,
            tolerance: f64::from_le_bytes(b[64..72].try_into().expect("8 bytes")),
        })
    }
}

fn read_header_from(r: &mut impl Read, path: &Path) -> Result<TransferHeader> {
    let mut b = [0u8; HEADER_LEN];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    TransferHeader::decode(&b)
}

/// Header of a transfer file without reading the matrix.
pub fn read_header(path: impl AsRef<Path>) -> Result<TransferHeader> {
    let path = path.as_ref();
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_header_from(&mut f, path)
}

impl TransferMatrix {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        w.write_all(&self.header().encode()).map_err(io)?;
        for v in self.data() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(f);
        let h = read_header_from(&mut r, path)?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        if bytes.len() != h.rows * h.cols * 8 {
            return Err(Error::Format(format!(
                "expected {} data bytes, found {}",
                h.rows * h.cols * 8,
                bytes.len()
            )));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let rows = data.chunks(h.cols.max(1)).take(h.rows).map(<[f64]>::to_vec).collect();
        TransferMatrix::from_rows(h.modality, rows, h.cols, h.checksum, h.tolerance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let t = TransferMatrix::from_rows(Modality::Meg, vec![vec![1.0, -2.5, 3.0], vec![0.1, 0.2, f64::MIN_POSITIVE]], 3, [7; 32], 1e-9).unwrap();
        t.save(&path).unwrap();
        assert_eq!(TransferMatrix::load(&path).unwrap(), t);
        let h = read_header(&path).unwrap();
        assert_eq!(h, t.header());
        assert!(h.to_string().contains("meg"));
        std::fs::write(&path, b"garbage that is long enough to hold a header.............................").unwrap();
        assert!(matches!(TransferMatrix::load(&path), Err(Error::Format(_))));
    }
}
