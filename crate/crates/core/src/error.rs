use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Idx(#[from] IdxError),

    #[error(transparent)]
    Sequence(#[from] SequenceError),

    /// Every hypothesis assigns probability zero to the conditioning data.
    #[error("zero evidence: observations have probability 0 under every hypothesis")]
    ZeroEvidence,

    #[error("enumeration of {outcomes} joint outcomes exceeds the cap of {cap}")]
    EnumerationTooLarge { outcomes: u128, cap: u128 },

    #[error(
        "dataset fingerprint mismatch: sequence was recorded on {expected:016x}, \
         dataset is {actual:016x}"
    )]
    FingerprintMismatch { expected: u64, actual: u64 },

    /// The sequence file is well formed but was not recorded by the run the
    /// config describes.
    #[error("sequence does not match the config: {0}")]
    SequenceMismatch(String),

    #[error("unknown example id {0}")]
    UnknownId(u32),

    #[error("no irreducible loss recorded for example id {0}")]
    MissingIrreducible(u32),

    #[error("config: {0}")]
    Config(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdxError {
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated IDX payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },
}

/// Failures while decoding a sequence file. Each malformation has its own kind.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SequenceError {
    #[error("bad magic {0:?}, expected \"GPSQ\"")]
    BadMagic([u8; 4]),

    #[error("unknown format version {0}")]
    UnknownVersion(u32),

    #[error("unknown acquisition kind tag {0}")]
    UnknownKind(u8),

    #[error("batch size must be at least 1")]
    ZeroBatchSize,

    #[error("file is {actual} bytes but the header implies {expected}")]
    LengthMismatch { expected: u64, actual: u64 },

    #[error("batch {index} has {len} ids, expected {expected}")]
    RaggedBatch {
        index: usize,
        len: usize,
        expected: usize,
    },
}
