//! Sidecar written next to every command's outputs: enough to re-run it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use bcdi_core::spectrum::BoundSpectrum;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileRecord {
    pub fn new(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: path.to_path_buf(),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ChannelRow {
    pub requested_ratio: f64,
    pub realized_ratio: [f64; 2],
    pub padded: [usize; 2],
    pub weight: f64,
    /// Requested wavelengths merged into this geometry.
    pub members: usize,
}

#[derive(Debug, Serialize)]
pub struct SpectrumTable {
    pub shape: [usize; 2],
    pub requested_channels: usize,
    pub realized_channels: usize,
    pub channels: Vec<ChannelRow>,
}

impl SpectrumTable {
    pub fn new(spec: &BoundSpectrum) -> Self {
        let (w, h) = spec.shape();
        Self {
            shape: [w, h],
            requested_channels: spec.requested_channels(),
            realized_channels: spec.channels().len(),
            channels: spec
                .channels()
                .iter()
                .map(|c| {
                    let (rx, ry) = c.geometry.realized_ratio();
                    let (bx, by) = c.geometry.padded();
                    ChannelRow {
                        requested_ratio: c.geometry.requested_ratio(),
                        realized_ratio: [rx, ry],
                        padded: [bx, by],
                        weight: c.weight,
                        members: c.members,
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub command: String,
    pub version: String,
    pub config_path: PathBuf,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    /// The config exactly as read.
    pub config: String,
    pub summary: BTreeMap<String, toml::Value>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub spectrum: Option<SpectrumTable>,
}
