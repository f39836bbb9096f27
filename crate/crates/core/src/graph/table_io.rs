//! On-disk forms of a [`NeighborTable`].
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! "GNBT" | version u32 | n_nodes u64 | p u32 | k u32 | variant u8 (1 = conv1, 2 = conv2)
//! | tie_break u8 (0 = deterministic, 1 = seeded) [| seed u64 when seeded]
//! | indices u64 x (n_nodes * p)
//! [| weights f64 x (n_nodes * p) when conv2]
//! | pad mask, one bit per cell, LSB first, ceil(n_nodes * p / 8) bytes
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ConvVariant, NeighborTable, TieBreak};
use crate::codec::ByteReader;
use crate::error::{Error, Result};

pub const TABLE_MAGIC: &[u8; 4] = b"GNBT";
pub const TABLE_FORMAT_VERSION: u32 = 1;

impl NeighborTable {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cells = self.indices.len();
        let mut out = Vec::with_capacity(40 + cells * 17);
        out.extend_from_slice(TABLE_MAGIC);
        out.extend_from_slice(&TABLE_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_nodes as u64).to_le_bytes());
        out.extend_from_slice(&(self.p as u32).to_le_bytes());
        out.extend_from_slice(&self.k.to_le_bytes());
        out.push(match self.variant {
            ConvVariant::Conv1 => 1,
            ConvVariant::Conv2 => 2,
        });
        match self.tie_break {
            TieBreak::Deterministic => out.push(0),
            TieBreak::Seeded(seed) => {
                out.push(1);
                out.extend_from_slice(&seed.to_le_bytes());
            }
        }
        for &j in &self.indices {
            out.extend_from_slice(&(j as u64).to_le_bytes());
        }
        if let Some(w) = &self.weights {
            for v in w {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut bits = vec![0u8; cells.div_ceil(8)];
        for (cell, &pad) in self.pad_mask.iter().enumerate() {
            if pad {
                bits[cell / 8] |= 1 << (cell % 8);
            }
        }
        out.extend_from_slice(&bits);
        out
    }

    /// Parses the binary form. `origin` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = ByteReader::new(bytes, origin);
        if r.take(4, "magic")? != TABLE_MAGIC {
            r.pos = 0;
            return Err(r.fail("bad magic, expected GNBT"));
        }
        let version = r.u32("version")?;
        if version != TABLE_FORMAT_VERSION {
            return Err(r.fail(format!("unsupported format version {version}")));
        }
        let n_nodes = r.usize("n_nodes")?;
        let p = r.u32("p")? as usize;
        let k = r.u32("k")?;
        let variant = match r.u8("variant")? {
            1 => ConvVariant::Conv1,
            2 => ConvVariant::Conv2,
            other => return Err(r.fail(format!("unknown variant tag {other}"))),
        };
        let tie_break = match r.u8("tie_break")? {
            0 => TieBreak::Deterministic,
            1 => TieBreak::Seeded(r.u64("seed")?),
            other => return Err(r.fail(format!("unknown tie-break tag {other}"))),
        };
        let cells = n_nodes
            .checked_mul(p)
            .filter(|c| c.checked_mul(8).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| r.fail("table shape exceeds file size"))?;
        let mut indices = Vec::with_capacity(cells);
        for _ in 0..cells {
            let at = r.pos;
            let j = r.u64("indices")?;
            if j >= n_nodes as u64 {
                r.pos = at;
                return Err(r.fail(format!("neighbor index {j} out of range")));
            }
            indices.push(j as usize);
        }
        let weights = match variant {
            ConvVariant::Conv1 => None,
            ConvVariant::Conv2 => {
                let mut w = Vec::with_capacity(cells);
                for _ in 0..cells {
                    w.push(f64::from_bits(r.u64("weights")?));
                }
                Some(w)
            }
        };
        let bits = r.take(cells.div_ceil(8), "pad mask")?;
        let pad_mask = (0..cells)
            .map(|c| bits[c / 8] >> (c % 8) & 1 == 1)
            .collect();
        if r.remaining() != 0 {
            return Err(r.fail("trailing bytes after pad mask"));
        }
        NeighborTable::from_parts(
            n_nodes, p, k, variant, tie_break, indices, weights, pad_mask,
        )
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Hex SHA-256 of the binary encoding.
    pub fn content_hash(&self) -> String {
        crate::digest::sha256_hex(&self.to_bytes())
    }

    pub fn to_json(&self) -> TableJson {
        let rows = |v: &[usize]| v.chunks(self.p.max(1)).map(<[usize]>::to_vec).collect();
        TableJson {
            format_version: TABLE_FORMAT_VERSION,
            n_nodes: self.n_nodes,
            p: self.p,
            k: self.k,
            variant: self.variant,
            tie_break: self.tie_break,
            indices: rows(&self.indices),
            weights: self
                .weights
                .as_ref()
                .map(|w| w.chunks(self.p.max(1)).map(<[f64]>::to_vec).collect()),
            pad_mask: self
                .pad_mask
                .chunks(self.p.max(1))
                .map(<[bool]>::to_vec)
                .collect(),
        }
    }
}

/// Human-readable debug export with the same fields as the binary format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableJson {
    pub format_version: u32,
    pub n_nodes: usize,
    pub p: usize,
    pub k: u32,
    pub variant: ConvVariant,
    pub tie_break: TieBreak,
    pub indices: Vec<Vec<usize>>,
    pub weights: Option<Vec<Vec<f64>>>,
    pub pad_mask: Vec<Vec<bool>>,
}

impl TryFrom<TableJson> for NeighborTable {
    type Error = Error;

    fn try_from(j: TableJson) -> Result<Self> {
        NeighborTable::from_parts(
            j.n_nodes,
            j.p,
            j.k,
            j.variant,
            j.tie_break,
            j.indices.into_iter().flatten().collect(),
            j.weights.map(|w| w.into_iter().flatten().collect()),
            j.pad_mask.into_iter().flatten().collect(),
        )
    }
}
