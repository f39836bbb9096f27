//! Run manifests: the resolved configuration plus hashes of every input and
//! output, enough to repeat a run exactly.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use graphconv::digest::sha256_file;
use graphconv::graph::TABLE_FORMAT_VERSION;
use graphconv::Result;
use serde::Serialize;

use crate::inputs::write_json;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub workers: usize,
    pub versions: BTreeMap<&'static str, String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl<'a, C: Serialize> Manifest<'a, C> {
    pub fn new(command: &'a str, config: &'a C, workers: usize) -> Self {
        let versions = BTreeMap::from([
            ("graphconv", env!("CARGO_PKG_VERSION").to_string()),
            ("table_format", TABLE_FORMAT_VERSION.to_string()),
        ]);
        Self {
            command,
            config,
            workers,
            versions,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn inputs(&mut self, paths: &[PathBuf]) -> Result<()> {
        paths.iter().try_for_each(|p| self.input(p))
    }

    /// Records a file in the output directory by its file name.
    pub fn output(&mut self, path: &Path) -> Result<()> {
        let name = path.file_name().map_or_else(
            || path.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        );
        self.outputs.insert(name, sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }
}
