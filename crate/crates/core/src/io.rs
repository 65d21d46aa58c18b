//! Artifact encodings: CSV with 17 significant digits, PGM (P2) label
//! images, raw little-endian `f64` grids with JSON sidecars, JSON reports.
//! Every artifact is hashed with SHA-256 as it is emitted.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Header line plus one row per record, every float as `{:.16e}`.
pub fn csv_bytes(header: &[&str], rows: &[Vec<f64>]) -> Vec<u8> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out.into_bytes()
}

pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::InvalidArgument(format!("CSV field {f:?}: {e}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

/// Plain PGM with gray level equal to the label, `maxval = max(label, 1)`.
pub fn pgm_bytes(width: usize, height: usize, labels: &[u32]) -> Result<Vec<u8>> {
    if width * height != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} labels for a {width}x{height} image",
            labels.len()
        )));
    }
    let maxval = labels.iter().copied().max().unwrap_or(0).max(1);
    if maxval > u32::from(u16::MAX) {
        return Err(Error::InvalidArgument(format!("{maxval} labels exceed the PGM range")));
    }
    let mut out = format!("P2\n{width} {height}\n{maxval}\n");
    for row in labels.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(|l| l.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out.into_bytes())
}

pub fn parse_pgm(text: &str) -> Result<(usize, usize, Vec<u32>)> {
    let bad = || Error::InvalidArgument("malformed PGM".into());
    let mut tokens = text.split_whitespace();
    if tokens.next() != Some("P2") {
        return Err(bad());
    }
    let mut num = || -> Result<u32> { tokens.next().ok_or_else(bad)?.parse().map_err(|_| bad()) };
    let (w, h, _) = (num()? as usize, num()? as usize, num()?);
    let labels = (0..w * h).map(|_| num()).collect::<Result<_>>()?;
    Ok((w, h, labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub dtype: String,
    pub shape: Vec<usize>,
    pub bytes: usize,
}

/// Row-major little-endian `f64` bytes and their JSON sidecar.
pub fn raw_grid(shape: &[usize], values: &[f64]) -> Result<(Vec<u8>, Vec<u8>)> {
    if shape.iter().product::<usize>() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "shape {shape:?} does not hold {} values",
            values.len()
        )));
    }
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    let sidecar = RawSidecar {
        dtype: "f64le".into(),
        shape: shape.to_vec(),
        bytes: bytes.len(),
    };
    Ok((bytes, json_bytes(&sidecar)?))
}

pub fn read_raw(bytes: &[u8]) -> Vec<f64> {
    bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Collects artifacts in emission order, writing them under `dir` when set.
#[derive(Debug, Clone, Default)]
pub struct ArtifactSink {
    dir: Option<PathBuf>,
    records: Vec<ArtifactRecord>,
}

impl ArtifactSink {
    pub fn to_dir(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            records: Vec::new(),
        })
    }

    /// Hashes only; nothing touches the filesystem.
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = &self.dir {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        self.records.push(ArtifactRecord {
            name: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn put_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.put(name, &json_bytes(value)?)
    }

    /// Raw grid `name.f64` with sidecar `name.json`.
    pub fn put_raw(&mut self, name: &str, shape: &[usize], values: &[f64]) -> Result<()> {
        let (raw, side) = raw_grid(shape, values)?;
        self.put(&format!("{name}.f64"), &raw)?;
        self.put(&format!("{name}.json"), &side)
    }

    pub fn records(&self) -> &[ArtifactRecord] {
        &self.records
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }
}
