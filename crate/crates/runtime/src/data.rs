//! Dataset ingestion: MNIST IDX files and seeded synthetic blobs.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, RuntimeError};

const IDX_LABELS: u32 = 0x0000_0801;
const IDX_IMAGES: u32 = 0x0000_0803;
const BLOB_SIGMA: f64 = 0.1;
const BLOB_DENSITY: f64 = 0.2;

/// Samples stored as f32 in `[N, C, H, W]` order.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub images: Vec<f32>,
    pub labels: Vec<u8>,
    pub sample_shape: Vec<usize>,
    pub classes: usize,
}

/// One mini-batch, images flattened like [`Dataset::images`].
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub images: Vec<f32>,
    pub labels: Vec<u8>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

fn be_u32(path: &Path, bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| RuntimeError::format(path, "truncated IDX header"))
}

/// Raw IDX image file: `(count, rows, cols, pixels)`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| RuntimeError::io(path, e))?;
    parse_idx_images(path, &bytes)
}

pub fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(path, bytes, 0)?;
    if magic != IDX_IMAGES {
        return Err(RuntimeError::format(path, format!("bad IDX image magic {magic:#010x}")));
    }
    let n = be_u32(path, bytes, 4)? as usize;
    let rows = be_u32(path, bytes, 8)? as usize;
    let cols = be_u32(path, bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != n * rows * cols {
        return Err(RuntimeError::format(path, format!("expected {} pixel bytes, found {}", n * rows * cols, body.len())));
    }
    Ok((n, rows, cols, body.to_vec()))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| RuntimeError::io(path, e))?;
    parse_idx_labels(path, &bytes)
}

pub fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(path, bytes, 0)?;
    if magic != IDX_LABELS {
        return Err(RuntimeError::format(path, format!("bad IDX label magic {magic:#010x}")));
    }
    let n = be_u32(path, bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(RuntimeError::format(path, format!("expected {n} labels, found {}", body.len())));
    }
    Ok(body.to_vec())
}

fn idx_file(dir: &Path, stem: &str, what: &str, idx: &str) -> PathBuf {
    let dashed = dir.join(format!("{stem}-{what}-{idx}-ubyte"));
    let dotted = dir.join(format!("{stem}-{what}.{idx}-ubyte"));
    if !dashed.exists() && dotted.exists() {
        dotted
    } else {
        dashed
    }
}

impl Dataset {
    /// Reads the MNIST IDX pair of `split` from `dir`, keeping at most
    /// `limit` samples.
    pub fn load_mnist(dir: &Path, split: Split, sample_shape: &[usize], classes: usize, limit: Option<usize>) -> Result<Self> {
        let stem = match split {
            Split::Train => "train",
            Split::Test => "t10k",
        };
        let img_path = idx_file(dir, stem, "images", "idx3");
        let lbl_path = idx_file(dir, stem, "labels", "idx1");
        let (n, rows, cols, pixels) = read_idx_images(&img_path)?;
        let labels = read_idx_labels(&lbl_path)?;
        if labels.len() != n {
            return Err(RuntimeError::format(&lbl_path, format!("{} labels for {n} images", labels.len())));
        }
        Self::from_idx(&lbl_path, rows, cols, pixels, labels, sample_shape, classes, limit)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_idx(
        label_path: &Path,
        rows: usize,
        cols: usize,
        pixels: Vec<u8>,
        mut labels: Vec<u8>,
        sample_shape: &[usize],
        classes: usize,
        limit: Option<usize>,
    ) -> Result<Self> {
        let found = vec![1, rows, cols];
        if sample_shape != found.as_slice() {
            return Err(RuntimeError::DimensionMismatch {
                declared: sample_shape.to_vec(),
                found,
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(RuntimeError::format(label_path, format!("label {bad} out of range for {classes} classes")));
        }
        let n = limit.map_or(labels.len(), |l| l.min(labels.len()));
        labels.truncate(n);
        let images = pixels[..n * rows * cols].iter().map(|&p| p as f32 / 255.0).collect();
        Ok(Dataset {
            images,
            labels,
            sample_shape: sample_shape.to_vec(),
            classes,
        })
    }

    /// `n` samples drawn from `classes` Gaussian blobs (σ = 0.1) around
    /// sparse binary prototypes. Prototypes depend only on `seed`; `split`
    /// selects an independent draw of samples around them.
    pub fn synthetic(seed: u64, split: Split, n: usize, sample_shape: &[usize], classes: usize) -> Self {
        let dim: usize = sample_shape.iter().product();
        let mut proto_rng = ChaCha8Rng::seed_from_u64(seed);
        let protos: Vec<f32> = (0..classes * dim)
            .map(|_| if proto_rng.random::<f64>() < BLOB_DENSITY { 1.0 } else { 0.0 })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(match split {
            Split::Train => 1,
            Split::Test => 2,
        });
        let noise = Normal::new(0.0, BLOB_SIGMA).expect("valid sigma");
        let mut images = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let k = rng.random_range(0..classes);
            labels.push(k as u8);
            let p = &protos[k * dim..(k + 1) * dim];
            images.extend(p.iter().map(|&c| c + noise.sample(&mut rng) as f32));
        }
        Dataset {
            images,
            labels,
            sample_shape: sample_shape.to_vec(),
            classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    /// Batch `index` of size `size`, wrapping around the dataset.
    pub fn batch(&self, index: usize, size: usize) -> Batch {
        let d = self.sample_len();
        let n = self.len();
        let mut images = Vec::with_capacity(size * d);
        let mut labels = Vec::with_capacity(size);
        for t in 0..size {
            let j = (index * size + t) % n;
            images.extend_from_slice(&self.images[j * d..(j + 1) * d]);
            labels.push(self.labels[j]);
        }
        Batch { images, labels }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_images(n: u32, r: u32, c: u32) -> Vec<u8> {
        let mut b = Vec::new();
        for w in [IDX_IMAGES, n, r, c] {
            b.extend_from_slice(&w.to_be_bytes());
        }
        b.extend((0..n * r * c).map(|v| (v % 256) as u8));
        b
    }

    fn idx_labels(ls: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for w in [IDX_LABELS, ls.len() as u32] {
            b.extend_from_slice(&w.to_be_bytes());
        }
        b.extend_from_slice(ls);
        b
    }

    #[test]
    fn idx_header_fields() {
        let p = Path::new("t10k-images-idx3-ubyte");
        let (n, r, c, px) = parse_idx_images(p, &idx_images(3, 28, 28)).unwrap();
        assert_eq!((n, r, c, px.len()), (3, 28, 28, 3 * 784));
        assert!(parse_idx_images(p, &idx_labels(&[1])).is_err());
    }

    #[test]
    fn mnist_dir_loads_scaled_and_limited() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("t10k-images-idx3-ubyte"), idx_images(4, 2, 2)).unwrap();
        fs::write(dir.path().join("t10k-labels-idx1-ubyte"), idx_labels(&[0, 1, 2, 1])).unwrap();
        let d = Dataset::load_mnist(dir.path(), Split::Test, &[1, 2, 2], 3, Some(3)).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.images[1], 1.0 / 255.0);
        assert!(d.images.iter().all(|v| (0.0..=1.0).contains(v)));
        let err = Dataset::load_mnist(dir.path(), Split::Test, &[1, 3, 3], 3, None).unwrap_err();
        assert!(matches!(err, RuntimeError::DimensionMismatch { .. }));
    }

    #[test]
    fn label_out_of_range_is_format_error() {
        let err = Dataset::from_idx(Path::new("l"), 1, 1, vec![0, 0], vec![0, 10], &[1, 1, 1], 10, None).unwrap_err();
        assert!(matches!(err, RuntimeError::Format { .. }));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = Dataset::synthetic(7, Split::Train, 50, &[1, 28, 28], 10);
        let b = Dataset::synthetic(7, Split::Train, 50, &[1, 28, 28], 10);
        assert_eq!(a, b);
        let t = Dataset::synthetic(7, Split::Test, 50, &[1, 28, 28], 10);
        assert_ne!(a.images, t.images);
    }

    #[test]
    fn synthetic_blobs_nearest_prototype_separable() {
        let d = Dataset::synthetic(3, Split::Train, 200, &[1, 8, 8], 4);
        let dim = 64;
        // class means recovered from the data classify every sample
        let mut means = vec![0.0f64; 4 * dim];
        let mut counts = [0usize; 4];
        for (i, &l) in d.labels.iter().enumerate() {
            counts[l as usize] += 1;
            for j in 0..dim {
                means[l as usize * dim + j] += d.images[i * dim + j] as f64;
            }
        }
        for k in 0..4 {
            for j in 0..dim {
                means[k * dim + j] /= counts[k].max(1) as f64;
            }
        }
        for (i, &l) in d.labels.iter().enumerate() {
            let dist = |k: usize| (0..dim).map(|j| (d.images[i * dim + j] as f64 - means[k * dim + j]).powi(2)).sum::<f64>();
            let best = (0..4).min_by(|&a, &b| dist(a).total_cmp(&dist(b))).unwrap();
            assert_eq!(best, l as usize);
        }
    }

    #[test]
    fn batches_cycle() {
        let d = Dataset::synthetic(1, Split::Train, 5, &[1, 1, 2], 2);
        let b = d.batch(1, 3);
        assert_eq!(b.labels, vec![d.labels[3], d.labels[4], d.labels[0]]);
        assert_eq!(&b.images[4..6], &d.images[0..2]);
    }
}
