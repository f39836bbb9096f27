//! MNIST-style IDX files: big-endian magic, dimension sizes, then raw `u8` data.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use super::{Dataset, Normalization, TargetValues};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn format_error(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

struct IdxFile {
    path: std::path::PathBuf,
    reader: BufReader<File>,
    offset: u64,
}

impl IdxFile {
    fn open(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            reader: BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?),
            offset: 0,
        })
    }

    fn read_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.reader.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => format_error(
                &self.path,
                self.offset,
                format!("truncated while reading {what}"),
            ),
            _ => Error::io(&self.path, e),
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u32_be(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b, what)?;
        Ok(u32::from_be_bytes(b))
    }

    fn expect_magic(&mut self, magic: u32) -> Result<()> {
        let found = self.u32_be("magic")?;
        if found != magic {
            return Err(format_error(
                &self.path,
                0,
                format!("magic {found:#010x}, expected {magic:#010x}"),
            ));
        }
        Ok(())
    }
}

pub fn read_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    read_idx_limited(images_path, labels_path, None)
}

/// Reads at most `limit` leading images. Pixels are scaled to `[0, 1]`.
pub fn read_idx_limited(
    images_path: &Path,
    labels_path: &Path,
    limit: Option<usize>,
) -> Result<Dataset> {
    let mut images = IdxFile::open(images_path)?;
    images.expect_magic(IDX_IMAGES_MAGIC)?;
    let count = images.u32_be("image count")? as usize;
    let rows = images.u32_be("row count")? as usize;
    let cols = images.u32_be("column count")? as usize;

    let mut labels = IdxFile::open(labels_path)?;
    labels.expect_magic(IDX_LABELS_MAGIC)?;
    let label_count = labels.u32_be("label count")? as usize;
    if label_count != count {
        return Err(format_error(
            labels_path,
            4,
            format!("{label_count} labels for {count} images"),
        ));
    }

    let n = limit.map_or(count, |l| l.min(count));
    let width = rows * cols;
    let mut raw = vec![0u8; n * width];
    images.read_exact(&mut raw, "pixel data")?;
    let mut raw_labels = vec![0u8; n];
    labels.read_exact(&mut raw_labels, "label data")?;
    if limit.is_none() {
        let mut rest = [0u8; 1];
        if images
            .reader
            .read(&mut rest)
            .map_err(|e| Error::io(images_path, e))?
            != 0
        {
            return Err(format_error(
                images_path,
                images.offset,
                "trailing bytes after pixel data",
            ));
        }
    }
    if let Some(pos) = raw_labels.iter().position(|&l| l > 9) {
        return Err(format_error(
            labels_path,
            8 + pos as u64,
            format!("label {} outside 0..=9", raw_labels[pos]),
        ));
    }

    let features = raw.iter().map(|&b| f64::from(b) / 255.0).collect();
    let targets = TargetValues::Classes(raw_labels.iter().map(|&l| usize::from(l)).collect());
    let data = Dataset::new(features, n, width, targets)?;
    Ok(data.with_meta((0..width).collect(), Normalization::Scaled255))
}
