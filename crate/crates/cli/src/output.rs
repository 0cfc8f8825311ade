//! File emission shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use fsopoint::plant::AugmentedPlant;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

/// Version of every JSON document and of the CSV column layouts.
pub const SCHEMA_VERSION: u32 = 1;

pub struct OutDir {
    pub root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.text(name, &text)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?;
        self.written.push(p);
        Ok(())
    }

    pub fn csv(&mut self, name: &str) -> Result<csv::Writer<fs::File>, CliError> {
        let p = self.path(name);
        let w = csv::Writer::from_path(&p)?;
        self.written.push(p);
        Ok(w)
    }

    /// Writes the resolved configuration next to the outputs of `command`.
    pub fn echo_config(&mut self, command: &str, cfg: &RunConfig) -> Result<(), CliError> {
        self.text(&format!("{command}.config.toml"), &cfg.to_toml())
    }
}

/// SHA-256 of the plant's JSON record.
pub fn plant_hash(plant: &AugmentedPlant) -> String {
    let json = serde_json::to_string(&plant.record()).expect("plant record serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// A pass/fail line of a command's own acceptance thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            passed: value <= limit,
        }
    }

    pub fn below(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            passed: value < limit,
        }
    }

    pub fn at_least(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            passed: value >= limit,
        }
    }
}

pub fn matrix2(m: &nalgebra::Matrix2<f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

pub fn row2(r: &nalgebra::RowVector2<f64>) -> [f64; 2] {
    [r[0], r[1]]
}
