//! Seeded synthetic 2-D datasets and the IDX image format.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use slrprune_core::data::Dataset;
use slrprune_core::rng::Rng;
use slrprune_core::Tensor;
use thiserror::Error;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown synthetic dataset {0:?} (expected two_moons or spirals)")]
    UnknownKind(String),
    #[error("synthetic dataset needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("noise must be finite and nonnegative, got {0}")]
    BadNoise(f64),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },
    #[error("{path}: truncated, expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("image file holds {images} images but label file holds {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("{0}")]
    Core(#[from] slrprune_core::Error),
}

type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    TwoMoons,
    Spirals,
}

impl FromStr for SyntheticKind {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_moons" => Ok(SyntheticKind::TwoMoons),
            "spirals" => Ok(SyntheticKind::Spirals),
            other => Err(DatasetError::UnknownKind(other.to_string())),
        }
    }
}

/// Two interleaved classes in the plane. Rows alternate between class 0
/// and class 1, so the class counts differ by at most one.
///
/// Two moons: `(cos t, sin t)` and `(1 − cos t, ½ − sin t)` with
/// `t ~ U(0, π)`. Spirals: two arms of `r = t`, angle `3πt + cπ`, with
/// `t ~ U(0.1, 1)`. Both add `N(0, noise²)` to each coordinate.
pub fn generate_synthetic(kind: SyntheticKind, n_samples: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n_samples < 2 {
        return Err(DatasetError::TooFewSamples(n_samples));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(DatasetError::BadNoise(noise));
    }
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(n_samples * 2);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let class = i % 2;
        let (x, y) = match kind {
            SyntheticKind::TwoMoons => {
                let t = rng.uniform(0.0, PI);
                if class == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                }
            }
            SyntheticKind::Spirals => {
                let t = rng.uniform(0.1, 1.0);
                let angle = 3.0 * PI * t + class as f64 * PI;
                (t * angle.cos(), t * angle.sin())
            }
        };
        data.push(x + noise * rng.normal());
        data.push(y + noise * rng.normal());
        labels.push(class);
    }
    Ok(Dataset::new(Tensor::from_vec(&[n_samples, 2], data)?, labels, 2)?)
}

/// Raw contents of an IDX image file: `count × rows × cols` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len().checked_div(self.rows * self.cols).unwrap_or(0)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn header(path: &Path, bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>> {
    let truncated = |need: usize| DatasetError::Truncated {
        path: path.to_path_buf(),
        expected: need,
        found: bytes.len(),
    };
    if bytes.len() < 4 {
        return Err(truncated(4));
    }
    let word = |i: usize| u32::from_be_bytes([bytes[4 * i], bytes[4 * i + 1], bytes[4 * i + 2], bytes[4 * i + 3]]);
    if word(0) != magic {
        return Err(DatasetError::BadMagic {
            path: path.to_path_buf(),
            expected: magic,
            found: word(0),
        });
    }
    let need = 4 * (1 + dims);
    if bytes.len() < need {
        return Err(truncated(need));
    }
    Ok((1..=dims).map(|i| word(i) as usize).collect())
}

fn payload<'a>(path: &Path, bytes: &'a [u8], offset: usize, len: usize) -> Result<&'a [u8]> {
    if bytes.len() != offset + len {
        return Err(DatasetError::Truncated {
            path: path.to_path_buf(),
            expected: offset + len,
            found: bytes.len(),
        });
    }
    Ok(&bytes[offset..])
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = read_file(path)?;
    let dims = header(path, &bytes, IDX_IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (dims[0], dims[1], dims[2]);
    let pixels = payload(path, &bytes, 16, count * rows * cols)?.to_vec();
    Ok(IdxImages { rows, cols, pixels })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_file(path)?;
    let count = header(path, &bytes, IDX_LABELS_MAGIC, 1)?[0];
    Ok(payload(path, &bytes, 8, count)?.to_vec())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_idx_images(path: &Path, images: &IdxImages) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + images.pixels.len());
    for word in [IDX_IMAGES_MAGIC, images.count() as u32, images.rows as u32, images.cols as u32] {
        bytes.extend_from_slice(&word.to_be_bytes());
    }
    bytes.extend_from_slice(&images.pixels);
    write_file(path, &bytes)
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    write_file(path, &bytes)
}

/// An IDX image dataset: pixels scaled to `[0, 1]`, one channel, flattened
/// row-major so that row `i` of the inputs is image `i` of shape
/// `[1, rows, cols]`.
#[derive(Debug, Clone)]
pub struct ImageDataset {
    pub dataset: Dataset,
    pub rows: usize,
    pub cols: usize,
}

/// Loads an image/label file pair. `num_classes` defaults to the largest
/// label plus one.
pub fn load_idx(images_path: &Path, labels_path: &Path, num_classes: Option<usize>) -> Result<ImageDataset> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.count() != labels.len() {
        return Err(DatasetError::CountMismatch {
            images: images.count(),
            labels: labels.len(),
        });
    }
    let n = labels.len();
    let features = images.rows * images.cols;
    let data = images.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    let dataset = Dataset::new(Tensor::from_vec(&[n, features], data)?, labels, classes)?;
    Ok(ImageDataset {
        dataset,
        rows: images.rows,
        cols: images.cols,
    })
}
