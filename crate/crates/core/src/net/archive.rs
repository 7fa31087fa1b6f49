//! The `NNW1` named-tensor weight archive.
//!
//! ```text
//! "NNW1" | version u32 LE (= 1) | tensor_count u32 LE
//! per tensor: name_len u16 LE | name UTF-8 | dtype u8 (0 = f32) | ndim u8
//!             | ndim x u32 LE dims | payload f32 LE, last dim fastest
//! ```
//!
//! `meta.mean` and `meta.std` carry the per-channel input normalization
//! constants (0-1 pixel scale) the weights were trained with.

use std::path::Path;

use indexmap::IndexMap;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::image::NormalizationStats;

pub const MAGIC: &[u8; 4] = b"NNW1";
pub const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("bad magic {0:?}, expected \"NNW1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u32),
    #[error("archive truncated while reading {0}")]
    Truncated(String),
    #[error("tensor name is not valid UTF-8")]
    InvalidName,
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("tensor `{name}` has unsupported dtype {dtype}")]
    UnsupportedDtype { name: String, dtype: u8 },
    #[error("tensor `{name}`: dims {dims:?} do not multiply to data length {len}")]
    DimsMismatch { name: String, dims: Vec<usize>, len: usize },
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("missing metadata tensor `{0}`")]
    MissingMeta(&'static str),
    #[error("metadata tensor `{name}` invalid: {reason}")]
    BadMeta { name: &'static str, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ArchiveError>;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightArchive {
    entries: IndexMap<String, ArchiveTensor>,
}

impl WeightArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Result<()> {
        let name = name.into();
        if dims.iter().product::<usize>() != data.len() {
            return Err(ArchiveError::DimsMismatch { name, dims, len: data.len() });
        }
        if self.entries.contains_key(&name) {
            return Err(ArchiveError::DuplicateName(name));
        }
        self.entries.insert(name, ArchiveTensor { dims, data });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ArchiveTensor> {
        self.entries.get(name)
    }

    pub fn remove(&mut self, name: &str) -> Option<ArchiveTensor> {
        self.entries.shift_remove(name)
    }

    /// Replaces the entry in place, keeping its position in the archive order.
    pub fn replace(&mut self, name: &str, dims: Vec<usize>, data: Vec<f32>) -> Result<()> {
        if dims.iter().product::<usize>() != data.len() {
            return Err(ArchiveError::DimsMismatch { name: name.to_string(), dims, len: data.len() });
        }
        match self.entries.get_mut(name) {
            Some(slot) => {
                *slot = ArchiveTensor { dims, data };
                Ok(())
            }
            None => {
                self.entries.insert(name.to_string(), ArchiveTensor { dims, data });
                Ok(())
            }
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Learnable tensors: names ending in `weight`, `bias`, `gamma` or `beta`.
    /// Running statistics and `meta.*` are excluded.
    pub fn parameter_group_count(&self) -> usize {
        self.names()
            .filter(|n| !n.starts_with("meta."))
            .filter(|n| matches!(n.rsplit('.').next(), Some("weight" | "bias" | "gamma" | "beta")))
            .count()
    }

    pub fn normalization_stats(&self) -> Result<NormalizationStats> {
        let read = |name: &'static str| -> Result<[f32; 3]> {
            let t = self.get(name).ok_or(ArchiveError::MissingMeta(name))?;
            <[f32; 3]>::try_from(t.data.as_slice())
                .map_err(|_| ArchiveError::BadMeta { name, reason: format!("length {}, expected 3", t.data.len()) })
        };
        let mean = read("meta.mean")?;
        let std = read("meta.std")?;
        NormalizationStats::new(mean, std)
            .map_err(|e| ArchiveError::BadMeta { name: "meta.std", reason: e.to_string() })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.entries.values().map(|t| t.data.len() * 4 + t.dims.len() * 4).sum();
        let mut out = Vec::with_capacity(12 + payload + self.entries.len() * 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.dims.len() as u8);
            for &d in &t.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn sha256_hex(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        load_archive(&std::fs::read(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), &self.to_bytes())?;
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: impl Fn() -> String) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(ArchiveError::Truncated(what()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: impl Fn() -> String) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: impl Fn() -> String) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: impl Fn() -> String) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses and validates an archive, including the normalization metadata.
pub fn load_archive(bytes: &[u8]) -> Result<WeightArchive> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, || "magic".into())?;
    if magic != MAGIC {
        return Err(ArchiveError::BadMagic(magic.try_into().unwrap()));
    }
    let version = r.u32(|| "version".into())?;
    if version != VERSION {
        return Err(ArchiveError::UnsupportedVersion(version));
    }
    let count = r.u32(|| "tensor count".into())?;
    let mut archive = WeightArchive::new();
    for i in 0..count {
        let name_len = r.u16(|| format!("name length of tensor {i}"))? as usize;
        let raw = r.take(name_len, || format!("name of tensor {i}"))?;
        let name = std::str::from_utf8(raw).map_err(|_| ArchiveError::InvalidName)?.to_string();
        let dtype = r.u8(|| format!("dtype of `{name}`"))?;
        if dtype != DTYPE_F32 {
            return Err(ArchiveError::UnsupportedDtype { name, dtype });
        }
        let ndim = r.u8(|| format!("ndim of `{name}`"))? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32(|| format!("dims of `{name}`"))? as usize);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|c| c.checked_mul(4))
            .ok_or_else(|| ArchiveError::Truncated(format!("payload of `{name}`")))?;
        let payload = r.take(count, || format!("payload of `{name}`"))?;
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        archive.insert(name, dims, data)?;
    }
    if r.pos != bytes.len() {
        return Err(ArchiveError::TrailingBytes(bytes.len() - r.pos));
    }
    archive.normalization_stats()?;
    Ok(archive)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta_only() -> WeightArchive {
        let mut a = WeightArchive::new();
        a.insert("meta.mean", vec![3], vec![0.485, 0.456, 0.406]).unwrap();
        a.insert("meta.std", vec![3], vec![0.229, 0.224, 0.225]).unwrap();
        a
    }

    #[test]
    fn metadata_only_archive_loads() {
        let bytes = meta_only().to_bytes();
        let loaded = load_archive(&bytes).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded.to_bytes(), bytes);
        assert_eq!(loaded.normalization_stats().unwrap().mean, [0.485, 0.456, 0.406]);
    }

    #[test]
    fn rejects_malformed_input() {
        let mut bytes = meta_only().to_bytes();
        let good = bytes.clone();

        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(load_archive(&bytes), Err(ArchiveError::BadMagic(m)) if &m == b"XXXX"));

        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(matches!(load_archive(&v2), Err(ArchiveError::UnsupportedVersion(2))));

        assert!(matches!(load_archive(&good[..good.len() - 1]), Err(ArchiveError::Truncated(_))));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(load_archive(&trailing), Err(ArchiveError::TrailingBytes(1))));
    }

    #[test]
    fn rejects_duplicates_and_missing_meta() {
        let mut a = meta_only();
        assert!(matches!(a.insert("meta.std", vec![3], vec![1.0; 3]), Err(ArchiveError::DuplicateName(_))));

        // Forge a duplicate entry directly in the byte stream.
        let mut bytes = a.to_bytes();
        bytes[8..12].copy_from_slice(&3u32.to_le_bytes());
        let tail = bytes[12..].to_vec();
        let first_len = 2 + 9 + 2 + 4 + 12;
        bytes.extend_from_slice(&tail[..first_len]);
        assert!(matches!(load_archive(&bytes), Err(ArchiveError::DuplicateName(n)) if n == "meta.mean"));

        let mut no_std = WeightArchive::new();
        no_std.insert("meta.mean", vec![3], vec![0.5; 3]).unwrap();
        assert!(matches!(load_archive(&no_std.to_bytes()), Err(ArchiveError::MissingMeta("meta.std"))));

        let mut bad_std = meta_only();
        bad_std.replace("meta.std", vec![3], vec![0.2, 0.0, 0.2]).unwrap();
        assert!(matches!(load_archive(&bad_std.to_bytes()), Err(ArchiveError::BadMeta { .. })));
    }

    #[test]
    fn counts_parameter_groups() {
        let mut a = meta_only();
        a.insert("conv1.weight", vec![1], vec![0.0]).unwrap();
        a.insert("bn1.gamma", vec![1], vec![1.0]).unwrap();
        a.insert("bn1.mean", vec![1], vec![0.0]).unwrap();
        a.insert("fc.bias", vec![1], vec![0.0]).unwrap();
        assert_eq!(a.parameter_group_count(), 3);
    }
}
