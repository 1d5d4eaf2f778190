//! Binary sequence files: the ordered list of selected batches.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset size field
//!      0    4 magic "GPSQ"
//!      4    4 format version (u32, currently 1)
//!      8    8 dataset fingerprint (u64)
//!     16    4 batch size |b| (u32, >= 1)
//!     20    4 number of batches (u32)
//!     24    1 acquisition kind tag (u8)
//!     25    8 seed of the recording run (u64)
//!     33  4·n example ids (u32), batch after batch
//! ```
//!
//! A header-only file is 33 bytes. Two batches of three ids add 24 bytes:
//!
//! ```text
//! 47 50 53 51 01 00 00 00  ef cd ab 89 67 45 23 01
//! 03 00 00 00 02 00 00 00  03 07 00 00 00 00 00 00
//! 00 05 00 00 00 01 00 00  00 02 00 00 00 09 00 00
//! 00 08 00 00 00 07 00 00  00                     
//! ```
//!
//! (fingerprint `0x0123456789abcdef`, kind `reducible`, seed 7, batches
//! `[5, 1, 2]` and `[9, 8, 7]`.)

use std::fs;
use std::path::Path;

use crate::acquisition::AcquisitionKind;
use crate::error::{Result, SequenceError};
use crate::fsutil::atomic_write;

pub const MAGIC: [u8; 4] = *b"GPSQ";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 33;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SequenceHeader {
    pub format_version: u32,
    pub dataset_fingerprint: u64,
    pub batch_size: u32,
    pub num_batches: u32,
    pub kind: AcquisitionKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sequence {
    dataset_fingerprint: u64,
    batch_size: u32,
    kind: AcquisitionKind,
    seed: u64,
    batches: Vec<Vec<u32>>,
}

impl Sequence {
    pub fn new(
        dataset_fingerprint: u64,
        batch_size: u32,
        kind: AcquisitionKind,
        seed: u64,
    ) -> Result<Self, SequenceError> {
        if batch_size == 0 {
            return Err(SequenceError::ZeroBatchSize);
        }
        Ok(Sequence {
            dataset_fingerprint,
            batch_size,
            kind,
            seed,
            batches: Vec::new(),
        })
    }

    pub fn from_batches(
        header: SequenceHeader,
        batches: Vec<Vec<u32>>,
    ) -> Result<Self, SequenceError> {
        let mut s = Sequence::new(
            header.dataset_fingerprint,
            header.batch_size,
            header.kind,
            header.seed,
        )?;
        for b in batches {
            s.push(b)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, batch: Vec<u32>) -> Result<(), SequenceError> {
        if batch.len() != self.batch_size as usize {
            return Err(SequenceError::RaggedBatch {
                index: self.batches.len(),
                len: batch.len(),
                expected: self.batch_size as usize,
            });
        }
        self.batches.push(batch);
        Ok(())
    }

    pub fn header(&self) -> SequenceHeader {
        SequenceHeader {
            format_version: FORMAT_VERSION,
            dataset_fingerprint: self.dataset_fingerprint,
            batch_size: self.batch_size,
            num_batches: self.batches.len() as u32,
            kind: self.kind,
            seed: self.seed,
        }
    }

    pub fn batches(&self) -> &[Vec<u32>] {
        &self.batches
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn encode(&self) -> Vec<u8> {
        let h = self.header();
        let mut out =
            Vec::with_capacity(HEADER_LEN + 4 * self.batches.len() * self.batch_size as usize);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&h.format_version.to_le_bytes());
        out.extend_from_slice(&h.dataset_fingerprint.to_le_bytes());
        out.extend_from_slice(&h.batch_size.to_le_bytes());
        out.extend_from_slice(&h.num_batches.to_le_bytes());
        out.push(h.kind.tag());
        out.extend_from_slice(&h.seed.to_le_bytes());
        for id in self.batches.iter().flatten() {
            out.extend_from_slice(&id.to_le_bytes());
        }
        out
    }

    /// Exact inverse of [`Sequence::encode`]; never returns partial data.
    pub fn decode(bytes: &[u8]) -> Result<Self, SequenceError> {
        if bytes.len() < HEADER_LEN {
            return Err(SequenceError::LengthMismatch {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(SequenceError::BadMagic(magic));
        }
        let version = u32_at(4);
        if version != FORMAT_VERSION {
            return Err(SequenceError::UnknownVersion(version));
        }
        let fingerprint = u64_at(8);
        let batch_size = u32_at(16);
        let num_batches = u32_at(20);
        let kind =
            AcquisitionKind::from_tag(bytes[24]).ok_or(SequenceError::UnknownKind(bytes[24]))?;
        let seed = u64_at(25);
        if batch_size == 0 {
            return Err(SequenceError::ZeroBatchSize);
        }
        let expected = HEADER_LEN as u64 + 4 * u64::from(batch_size) * u64::from(num_batches);
        if bytes.len() as u64 != expected {
            return Err(SequenceError::LengthMismatch {
                expected,
                actual: bytes.len() as u64,
            });
        }
        let ids: Vec<u32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let batches = ids
            .chunks_exact(batch_size as usize)
            .map(<[u32]>::to_vec)
            .collect();
        Ok(Sequence {
            dataset_fingerprint: fingerprint,
            batch_size,
            kind,
            seed,
            batches,
        })
    }
}

/// Atomically writes a sequence file (temp file + rename).
pub fn write(path: impl AsRef<Path>, sequence: &Sequence) -> Result<()> {
    atomic_write(path.as_ref(), &sequence.encode())
}

pub fn read(path: impl AsRef<Path>) -> Result<Sequence> {
    let bytes = fs::read(path)?;
    Ok(Sequence::decode(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Sequence {
        let mut s = Sequence::new(0x0123_4567_89ab_cdef, 3, AcquisitionKind::Reducible, 7).unwrap();
        s.push(vec![5, 1, 2]).unwrap();
        s.push(vec![9, 8, 7]).unwrap();
        s
    }

    #[test]
    fn header_only_is_33_bytes() {
        let s = Sequence::new(1, 4, AcquisitionKind::Uniform, 0).unwrap();
        assert_eq!(s.encode().len(), 33);
        assert_eq!(sample().encode().len(), 33 + 24);
    }

    #[test]
    fn documented_hex_example() {
        let bytes = sample().encode();
        let expected: Vec<u8> = vec![
            0x47, 0x50, 0x53, 0x51, 0x01, 0x00, 0x00, 0x00, 0xef, 0xcd, 0xab, 0x89, 0x67, 0x45,
            0x23, 0x01, //
            0x03, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x03, 0x07, 0x00, 0x00, 0x00, 0x00,
            0x00, 0x00, //
            0x00, 0x05, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x09,
            0x00, 0x00, //
            0x00, 0x08, 0x00, 0x00, 0x00, 0x07, 0x00, 0x00, 0x00,
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("seq.gpsq");
        write(&p, &sample()).unwrap();
        assert_eq!(read(&p).unwrap(), sample());
        assert_eq!(
            fs::read_dir(dir.path()).unwrap().count(),
            1,
            "temp file left behind"
        );
    }

    #[test]
    fn truncated_body_is_length_mismatch() {
        let mut bytes = sample().encode();
        bytes.pop();
        assert!(matches!(
            Sequence::decode(&bytes),
            Err(SequenceError::LengthMismatch { .. })
        ));
        assert!(matches!(
            Sequence::decode(&bytes[..10]),
            Err(SequenceError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn distinct_error_kinds() {
        let good = sample().encode();
        let mut b = good.clone();
        b[0] = b'X';
        assert!(matches!(
            Sequence::decode(&b),
            Err(SequenceError::BadMagic(_))
        ));
        let mut b = good.clone();
        b[4] = 2;
        assert_eq!(Sequence::decode(&b), Err(SequenceError::UnknownVersion(2)));
        let mut b = good.clone();
        b[24] = 200;
        assert_eq!(Sequence::decode(&b), Err(SequenceError::UnknownKind(200)));
        let mut b = good;
        b[16..20].copy_from_slice(&0u32.to_le_bytes());
        assert_eq!(Sequence::decode(&b), Err(SequenceError::ZeroBatchSize));
    }

    #[test]
    fn ragged_batches_rejected() {
        let mut s = Sequence::new(0, 3, AcquisitionKind::Uniform, 0).unwrap();
        assert_eq!(
            s.push(vec![1, 2]),
            Err(SequenceError::RaggedBatch {
                index: 0,
                len: 2,
                expected: 3
            })
        );
        assert!(Sequence::new(0, 0, AcquisitionKind::Uniform, 0).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_identity(
            fp in any::<u64>(),
            seed in any::<u64>(),
            b in 1u32..6,
            n in 0usize..8,
            tag in 0u8..5,
            ids in proptest::collection::vec(any::<u32>(), 40),
        ) {
            let mut s = Sequence::new(fp, b, AcquisitionKind::from_tag(tag).unwrap(), seed).unwrap();
            for i in 0..n {
                s.push((0..b as usize).map(|j| ids[(i * b as usize + j) % ids.len()]).collect()).unwrap();
            }
            prop_assert_eq!(Sequence::decode(&s.encode()).unwrap(), s);
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..80)) {
            let _ = Sequence::decode(&bytes);
        }
    }
}
