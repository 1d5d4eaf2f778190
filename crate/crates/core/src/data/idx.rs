//! IDX (MNIST/QMNIST) images and labels.

use std::fs;
use std::path::Path;

use super::ExampleRecord;
use crate::error::{IdxError, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Result<u32, IdxError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            expected: at + 4,
            found: bytes.len(),
        })
}

/// Parses an unsigned-byte IDX file, returning its dimensions and payload.
pub fn parse_idx(bytes: &[u8], expected_magic: u32) -> Result<(Vec<usize>, &[u8]), IdxError> {
    let magic = be_u32(bytes, 0)?;
    if magic != expected_magic {
        return Err(IdxError::BadMagic {
            expected: expected_magic,
            found: magic,
        });
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (0..ndim)
        .map(|d| be_u32(bytes, 4 + 4 * d).map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let header = 4 + 4 * ndim;
    let len = dims.iter().product::<usize>();
    let payload = bytes.get(header..header + len).ok_or(IdxError::Truncated {
        expected: header + len,
        found: bytes.len(),
    })?;
    Ok((dims, payload))
}

fn records_from(images: &[u8], labels: &[u8]) -> Result<Vec<ExampleRecord>> {
    let (idims, pixels) = parse_idx(images, IMAGES_MAGIC)?;
    let (ldims, classes) = parse_idx(labels, LABELS_MAGIC)?;
    if idims[0] != ldims[0] {
        return Err(IdxError::CountMismatch {
            images: idims[0],
            labels: ldims[0],
        }
        .into());
    }
    let dim = idims[1] * idims[2];
    Ok(pixels
        .chunks_exact(dim.max(1))
        .take(idims[0])
        .zip(classes)
        .enumerate()
        .map(|(i, (px, &y))| {
            ExampleRecord::clean(
                i as u32,
                px.iter().map(|&b| f64::from(b) / 255.0).collect(),
                y as usize,
            )
        })
        .collect())
}

/// Loads an IDX image/label pair. Pixels are scaled by 1/255 and flattened row-major.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Vec<ExampleRecord>> {
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;
    records_from(&images, &labels)
}

pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = pixels.len() / (rows * cols).max(1);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn three_images_of_28x28() {
        let mut px = vec![0u8; 3 * 784];
        px[784] = 255;
        let recs = records_from(
            &encode_idx_images(28, 28, &px),
            &encode_idx_labels(&[4, 1, 9]),
        )
        .unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.features.len() == 784));
        assert!(recs[0].features.iter().all(|&f| f == 0.0));
        assert_eq!(recs[1].features[0], 1.0);
        assert_eq!(
            recs.iter().map(|r| r.label).collect::<Vec<_>>(),
            vec![4, 1, 9]
        );
        assert!(recs.iter().all(|r| r.true_label == r.label && !r.corrupted));
    }

    #[test]
    fn swapped_files_fail_on_magic() {
        let images = encode_idx_images(2, 2, &[0; 4]);
        let labels = encode_idx_labels(&[0]);
        let err = records_from(&labels, &images).unwrap_err();
        assert!(matches!(
            err,
            Error::Idx(IdxError::BadMagic {
                expected: IMAGES_MAGIC,
                ..
            })
        ));
    }

    #[test]
    fn truncated_payload() {
        let mut images = encode_idx_images(2, 2, &[1; 8]);
        images.truncate(images.len() - 1);
        let err = records_from(&images, &encode_idx_labels(&[0, 1])).unwrap_err();
        assert!(matches!(err, Error::Idx(IdxError::Truncated { .. })));
        assert!(matches!(
            parse_idx(&[0, 0], LABELS_MAGIC),
            Err(IdxError::Truncated { .. })
        ));
    }

    #[test]
    fn count_mismatch() {
        let err = records_from(
            &encode_idx_images(2, 2, &[1; 8]),
            &encode_idx_labels(&[0, 1, 2]),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Idx(IdxError::CountMismatch {
                images: 2,
                labels: 3
            })
        ));
    }

    #[test]
    fn loads_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lbl");
        fs::write(&ip, encode_idx_images(1, 2, &[51, 102])).unwrap();
        fs::write(&lp, encode_idx_labels(&[3])).unwrap();
        let recs = load_idx(&ip, &lp).unwrap();
        assert_eq!(recs[0].features, vec![0.2, 0.4]);
    }
}
