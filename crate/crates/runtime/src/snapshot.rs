//! Per-parameter snapshot files (`<name>.ddt`).
//!
//! Layout: `DDSL` | version u32 | rank u32 | dims u32 × rank | f32 payload,
//! all little-endian.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Result, RuntimeError};
use crate::tensor::{numel, Element, Tensor};

const MAGIC: &[u8; 4] = b"DDSL";
const VERSION: u32 = 1;

pub fn file_for(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.ddt"))
}

pub fn encode<T: Element>(t: &Tensor<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * t.rank() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

pub fn decode<T: Element>(path: &Path, bytes: &[u8]) -> Result<Tensor<T>> {
    let bad = |d: &str| RuntimeError::format(path, d.to_string());
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(i..i + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| bad("truncated header"))
    };
    let version = word(4)?;
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let rank = word(8)? as usize;
    let dims = (0..rank)
        .map(|i| word(12 + 4 * i).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 12 + 4 * rank;
    let n = numel(&dims);
    if bytes.len() != start + 4 * n {
        return Err(bad(&format!("payload holds {} bytes, dims {dims:?} need {}", bytes.len() - start, 4 * n)));
    }
    let data = bytes[start..]
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
        .collect();
    Tensor::from_vec(&dims, data)
}

pub fn save_tensor<T: Element>(dir: &Path, name: &str, t: &Tensor<T>) -> Result<()> {
    let path = file_for(dir, name);
    fs::write(&path, encode(t)).map_err(|e| RuntimeError::io(path, e))
}

pub fn load_tensor<T: Element>(path: &Path) -> Result<Tensor<T>> {
    let bytes = fs::read(path).map_err(|e| RuntimeError::io(path, e))?;
    decode(path, &bytes)
}

pub fn save_snapshot<T: Element>(dir: &Path, params: &[(&str, &Tensor<T>)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| RuntimeError::io(dir, e))?;
    for (name, t) in params {
        save_tensor(dir, name, t)?;
    }
    Ok(())
}

/// What a snapshot load did.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub loaded: Vec<String>,
    pub missing: Vec<String>,
}

/// Loads every parameter that has a file in `dir`. Parameters without a
/// file keep their current value; files without a parameter are ignored.
pub fn load_snapshot<T: Element>(dir: &Path, params: &mut [(&str, &mut Tensor<T>)]) -> Result<LoadReport> {
    let mut report = LoadReport::default();
    for (name, t) in params.iter_mut() {
        let path = file_for(dir, name);
        if !path.exists() {
            eprintln!("warning: no snapshot for `{name}` in {}, keeping initial value", dir.display());
            report.missing.push(name.to_string());
            continue;
        }
        let loaded: Tensor<T> = load_tensor(&path)?;
        if loaded.shape() != t.shape() {
            return Err(RuntimeError::format(
                &path,
                format!("dims {:?} do not match parameter dims {:?}", loaded.shape(), t.shape()),
            ));
        }
        t.data_mut().copy_from_slice(loaded.data());
        report.loaded.push(name.to_string());
    }
    Ok(report)
}

/// True when `dir` exists and holds at least one snapshot file.
pub fn has_snapshot(dir: &Path) -> bool {
    fs::read_dir(dir)
        .map(|rd| {
            rd.flatten()
                .any(|e| e.path().extension().is_some_and(|x| x == "ddt"))
        })
        .unwrap_or(false)
}
