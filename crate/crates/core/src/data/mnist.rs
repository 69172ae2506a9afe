//! Reader for the IDX files MNIST ships in.

use std::fs;
use std::path::Path;

use super::{DataError, Dataset};
use crate::model::LabeledSample;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(b: &[u8], at: usize) -> Result<u32, DataError> {
    b.get(at..at + 4)
        .map(|s| u32::from_be_bytes(s.try_into().expect("4 bytes")))
        .ok_or_else(|| DataError::Invalid("truncated idx header".into()))
}

/// Parses an idx3 image file; pixels are scaled to `[0, 1]`.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, Vec<Vec<f64>>), DataError> {
    if be_u32(bytes, 0)? != IMAGES_MAGIC {
        return Err(DataError::Invalid("bad idx image magic".into()));
    }
    let n = be_u32(bytes, 4)? as usize;
    let dim = be_u32(bytes, 8)? as usize * be_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    if body.len() != n * dim {
        return Err(DataError::Invalid(format!(
            "idx image body is {} bytes, expected {}",
            body.len(),
            n * dim
        )));
    }
    let images = body
        .chunks_exact(dim.max(1))
        .take(n)
        .map(|px| px.iter().map(|&p| f64::from(p) / 255.0).collect())
        .collect();
    Ok((dim, images))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<usize>, DataError> {
    if be_u32(bytes, 0)? != LABELS_MAGIC {
        return Err(DataError::Invalid("bad idx label magic".into()));
    }
    let n = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != n {
        return Err(DataError::Invalid(format!(
            "idx label body is {} bytes, expected {n}",
            body.len()
        )));
    }
    Ok(body.iter().map(|&l| l as usize).collect())
}

fn read(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|e| DataError::Invalid(format!("{}: {e}", path.display())))
}

pub fn load_pair(images: &Path, labels: &Path, classes: usize) -> Result<Dataset, DataError> {
    let (dim, x) = parse_images(&read(images)?)?;
    let y = parse_labels(&read(labels)?)?;
    if x.len() != y.len() {
        return Err(DataError::Invalid(format!(
            "{} images but {} labels",
            x.len(),
            y.len()
        )));
    }
    let samples = x.into_iter().zip(y).map(|(f, l)| LabeledSample::new(f, l)).collect();
    Dataset::new(dim, classes, samples)
}

/// Loads `(train, test)` from a directory holding the four standard
/// uncompressed MNIST files.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset), DataError> {
    let train = load_pair(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
        10,
    )?;
    let test = load_pair(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
        10,
    )?;
    Ok((train, test))
}
