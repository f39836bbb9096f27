//! Versioned binary checkpoints.
//!
//! ```text
//! "GNCK" | version u32 | architecture (u32 length + UTF-8)
//! | n_nodes u64 | d_input u64 | task u8 (0 = classification, 1 = regression) | classes u64
//! | dropout f64 | seed u64 | has_table u8 [| table SHA-256, 32 bytes]
//! | tensor count u32 | per tensor: rank u32, dims u64 x rank, values f32 x len
//! ```
//!
//! Parameters are stored in single precision.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use super::network::{parse_architecture, Network, NetworkConfig, Task};
use crate::codec::ByteReader;
use crate::error::{Error, Result};
use crate::graph::NeighborTable;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GNCK";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub architecture: String,
    pub config: NetworkConfig,
    pub table_hash: Option<String>,
}

pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    let cfg = net.config();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.architecture().len() as u32).to_le_bytes());
    out.extend_from_slice(net.architecture().as_bytes());
    out.extend_from_slice(&(cfg.n_nodes as u64).to_le_bytes());
    out.extend_from_slice(&(cfg.d_input as u64).to_le_bytes());
    let (tag, classes) = match cfg.task {
        Task::Classification { classes } => (0u8, classes as u64),
        Task::Regression => (1u8, 0),
    };
    out.push(tag);
    out.extend_from_slice(&classes.to_le_bytes());
    out.extend_from_slice(&cfg.dropout_rate.to_le_bytes());
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    match net.table() {
        Some(table) => {
            out.push(1);
            out.extend_from_slice(&hex::decode(table.content_hash()).expect("hex digest"));
        }
        None => out.push(0),
    }
    let params = net.parameters();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for t in params {
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Rebuilds the network and restores its parameters. A checkpoint trained
/// against a neighbor table only loads with a table of identical content.
pub fn load_checkpoint(
    path: &Path,
    table: Option<Arc<NeighborTable>>,
) -> Result<(Network, CheckpointMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = ByteReader::new(&bytes, path);
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        r.pos = 0;
        return Err(r.fail("bad magic, expected GNCK"));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(r.fail(format!("unsupported checkpoint version {version}")));
    }
    let arch_len = r.u32("architecture length")? as usize;
    let architecture = std::str::from_utf8(r.take(arch_len, "architecture")?)
        .map_err(|_| r.fail("architecture is not UTF-8"))?
        .to_string();
    let n_nodes = r.usize("n_nodes")?;
    let d_input = r.usize("d_input")?;
    let task = match (r.u8("task")?, r.usize("classes")?) {
        (0, classes) => Task::Classification { classes },
        (1, _) => Task::Regression,
        (other, _) => return Err(r.fail(format!("unknown task tag {other}"))),
    };
    let dropout_rate = r.f64("dropout")?;
    let seed = r.u64("seed")?;
    let table_hash = match r.u8("table flag")? {
        0 => None,
        1 => Some(hex::encode(r.take(32, "table hash")?)),
        other => return Err(r.fail(format!("unknown table flag {other}"))),
    };

    let table = match (&table_hash, table) {
        (Some(expected), Some(t)) => {
            let actual = t.content_hash();
            if &actual != expected {
                return Err(Error::TableMismatch {
                    expected: expected.clone(),
                    actual,
                });
            }
            Some(t)
        }
        (Some(_), None) => {
            return Err(Error::Config(
                "checkpoint was trained with a neighbor table; supply the same table".into(),
            ))
        }
        (None, _) => None,
    };

    let config = NetworkConfig {
        n_nodes,
        d_input,
        task,
        dropout_rate,
        seed,
    };
    let mut net = parse_architecture(&architecture, &config, table)?;
    let count = r.u32("tensor count")? as usize;
    let mut params = net.parameters_mut();
    if count != params.len() {
        return Err(r.fail(format!(
            "checkpoint holds {count} tensors, architecture needs {}",
            params.len()
        )));
    }
    for target in params.iter_mut() {
        let rank = r.u32("rank")? as usize;
        let shape = (0..rank)
            .map(|_| r.usize("dimension"))
            .collect::<Result<Vec<_>>>()?;
        if shape != target.shape() {
            return Err(r.fail(format!(
                "tensor shape {shape:?} does not match architecture {:?}",
                target.shape()
            )));
        }
        let data = (0..target.len())
            .map(|_| r.f32("values").map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        **target = Tensor::new(&shape, data)?;
    }
    if r.remaining() != 0 {
        return Err(r.fail("trailing bytes after parameters"));
    }
    Ok((
        net,
        CheckpointMeta {
            architecture,
            config,
            table_hash,
        },
    ))
}
