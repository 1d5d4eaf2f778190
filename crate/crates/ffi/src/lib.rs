//! C ABI over the goldiprox library.
//!
//! Every function returns a [`GpxStatus`]; on failure a message for the
//! calling thread is available from [`gpx_last_error`]. Objects cross the
//! boundary as opaque pointers that the caller releases with the matching
//! `*_free` function. Panics never unwind into C: they become
//! `GPX_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use goldiprox::experiment::{cmd_replay, cmd_run, spearman, ExperimentConfig, RunSummary};
use goldiprox::{Error, Sequence};

/// Outcome of a call. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GpxStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Config file unreadable, malformed or inconsistent.
    Config = 3,
    Io = 4,
    /// Sequence bytes are malformed.
    Sequence = 5,
    /// Sequence and dataset fingerprints differ.
    FingerprintMismatch = 6,
    /// Sequence is well formed but was not recorded by the configured run.
    SequenceMismatch = 7,
    /// Bad numeric input, e.g. lengths or constant score lists.
    InvalidInput = 8,
    /// Index past the end of a result.
    OutOfRange = 9,
    /// Caller buffer too small; the needed length is reported.
    BufferTooSmall = 10,
    Internal = 11,
    Panic = 12,
}

impl From<&Error> for GpxStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Idx(_) => GpxStatus::Config,
            Error::Io(_) => GpxStatus::Io,
            Error::Sequence(_) => GpxStatus::Sequence,
            Error::FingerprintMismatch { .. } => GpxStatus::FingerprintMismatch,
            Error::SequenceMismatch(_) | Error::UnknownId(_) => GpxStatus::SequenceMismatch,
            Error::Input(_) | Error::Shape(_) => GpxStatus::InvalidInput,
            _ => GpxStatus::Internal,
        }
    }
}

/// Parsed experiment config.
pub struct GpxConfig(ExperimentConfig);

/// Outcome of a run or replay: metric rows and the final weight fingerprint.
pub struct GpxRun(RunSummary);

/// Decoded sequence file.
pub struct GpxSequence(Sequence);

/// One evaluation row. Score fields are NaN for replays.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct GpxMetricsRow {
    pub step: u64,
    pub test_accuracy: f64,
    pub corrupted_frac: f64,
    pub whitenoise_frac: f64,
    pub mean_score: f64,
    pub max_score: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct GpxSequenceHeader {
    pub format_version: u32,
    pub dataset_fingerprint: u64,
    pub batch_size: u32,
    pub num_batches: u32,
    /// 0 uniform, 1 high_loss, 2 neg_irreducible, 3 reducible, 4 bald.
    pub kind: u8,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(GpxStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(GpxStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GpxStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GpxStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            GpxStatus::Panic
        }
    }
}

fn null(name: &str) -> Fail {
    Fail(GpxStatus::NullArgument, format!("{name} is null"))
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Fail(GpxStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn obj<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

/// Message for the most recent failure on this thread, or null. Valid until
/// the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn gpx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gpx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Reads and validates a TOML experiment config.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpx_config_load(
    path: *const c_char,
    out: *mut *mut GpxConfig,
) -> GpxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = ExperimentConfig::load(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(GpxConfig(cfg)));
        Ok(())
    })
}

/// Overrides the run seed.
///
/// # Safety
/// `cfg` must come from [`gpx_config_load`] and not be freed.
#[no_mangle]
pub unsafe extern "C" fn gpx_config_set_seed(cfg: *mut GpxConfig, seed: u64) -> GpxStatus {
    guard(|| {
        out_arg(cfg, "cfg")?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or come from [`gpx_config_load`], and is freed once.
#[no_mangle]
pub unsafe extern "C" fn gpx_config_free(cfg: *mut GpxConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Selection run; writes the sequence, metrics and manifest under `out_dir`.
///
/// # Safety
/// Pointers must be valid as documented on [`gpx_config_load`].
#[no_mangle]
pub unsafe extern "C" fn gpx_run(
    cfg: *const GpxConfig,
    out_dir: *const c_char,
    out: *mut *mut GpxRun,
) -> GpxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let summary = cmd_run(&obj(cfg, "cfg")?.0, &path_arg(out_dir, "out_dir")?)?;
        *out = Box::into_raw(Box::new(GpxRun(summary)));
        Ok(())
    })
}

/// Trains the config's replay model on a sequence recorded with the same config.
///
/// # Safety
/// Pointers must be valid as documented on [`gpx_config_load`].
#[no_mangle]
pub unsafe extern "C" fn gpx_replay(
    cfg: *const GpxConfig,
    sequence_path: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut GpxRun,
) -> GpxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let summary = cmd_replay(
            &obj(cfg, "cfg")?.0,
            &path_arg(sequence_path, "sequence_path")?,
            &path_arg(out_dir, "out_dir")?,
        )?;
        *out = Box::into_raw(Box::new(GpxRun(summary)));
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpx_run_fingerprint(run: *const GpxRun, out: *mut u64) -> GpxStatus {
    guard(|| {
        *out_arg(out, "out")? = obj(run, "run")?.0.result.final_fingerprint;
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpx_run_num_rows(run: *const GpxRun, out: *mut usize) -> GpxStatus {
    guard(|| {
        *out_arg(out, "out")? = obj(run, "run")?.0.result.rows.len();
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpx_run_row(
    run: *const GpxRun,
    index: usize,
    out: *mut GpxMetricsRow,
) -> GpxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let rows = &obj(run, "run")?.0.result.rows;
        let r = rows.get(index).ok_or_else(|| {
            Fail(
                GpxStatus::OutOfRange,
                format!("row {index} of {}", rows.len()),
            )
        })?;
        *out = GpxMetricsRow {
            step: r.step,
            test_accuracy: r.test_accuracy,
            corrupted_frac: r.corrupted_frac,
            whitenoise_frac: r.whitenoise_frac,
            mean_score: r.mean_score,
            max_score: r.max_score,
        };
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a live handle, and is freed once.
#[no_mangle]
pub unsafe extern "C" fn gpx_run_free(run: *mut GpxRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Decodes sequence bytes.
///
/// # Safety
/// `bytes` must point to `len` readable bytes (it may be null when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn gpx_sequence_decode(
    bytes: *const u8,
    len: usize,
    out: *mut *mut GpxSequence,
) -> GpxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let data = if len == 0 {
            &[][..]
        } else if bytes.is_null() {
            return Err(null("bytes"));
        } else {
            std::slice::from_raw_parts(bytes, len)
        };
        let seq = Sequence::decode(data).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(GpxSequence(seq)));
        Ok(())
    })
}

/// Reads and decodes a sequence file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpx_sequence_read(
    path: *const c_char,
    out: *mut *mut GpxSequence,
) -> GpxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let seq = goldiprox::sequence::read(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(GpxSequence(seq)));
        Ok(())
    })
}

/// # Safety
/// `seq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpx_sequence_header(
    seq: *const GpxSequence,
    out: *mut GpxSequenceHeader,
) -> GpxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let h = obj(seq, "seq")?.0.header();
        *out = GpxSequenceHeader {
            format_version: h.format_version,
            dataset_fingerprint: h.dataset_fingerprint,
            batch_size: h.batch_size,
            num_batches: h.num_batches,
            kind: h.kind.tag(),
            seed: h.seed,
        };
        Ok(())
    })
}

/// Copies batch `index` into `ids`. With `capacity` below the batch size
/// nothing is copied, `*len` is set to the size needed and
/// `GPX_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `ids` must have room for `capacity` values (or be null when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn gpx_sequence_batch(
    seq: *const GpxSequence,
    index: usize,
    ids: *mut u32,
    capacity: usize,
    len: *mut usize,
) -> GpxStatus {
    guard(|| {
        let len = out_arg(len, "len")?;
        let batches = obj(seq, "seq")?.0.batches();
        let batch = batches.get(index).ok_or_else(|| {
            Fail(
                GpxStatus::OutOfRange,
                format!("batch {index} of {}", batches.len()),
            )
        })?;
        *len = batch.len();
        if capacity < batch.len() {
            return Err(Fail(
                GpxStatus::BufferTooSmall,
                format!("batch needs {} slots", batch.len()),
            ));
        }
        if ids.is_null() {
            return Err(null("ids"));
        }
        std::slice::from_raw_parts_mut(ids, batch.len()).copy_from_slice(batch);
        Ok(())
    })
}

/// # Safety
/// `seq` must be null or a live handle, and is freed once.
#[no_mangle]
pub unsafe extern "C" fn gpx_sequence_free(seq: *mut GpxSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Spearman rank correlation with average ranks for ties.
///
/// # Safety
/// `a` and `b` must each point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gpx_spearman(
    a: *const f64,
    b: *const f64,
    n: usize,
    out: *mut f64,
) -> GpxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if a.is_null() || b.is_null() {
            return Err(null("a or b"));
        }
        *out = spearman(
            std::slice::from_raw_parts(a, n),
            std::slice::from_raw_parts(b, n),
        )?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use goldiprox::AcquisitionKind;

    #[test]
    fn null_arguments_are_reported() {
        let mut out = ptr::null_mut();
        assert_eq!(
            unsafe { gpx_config_load(ptr::null(), &mut out) },
            GpxStatus::NullArgument
        );
        assert!(out.is_null());
        assert!(!gpx_last_error().is_null());
        assert_eq!(
            unsafe { gpx_run_fingerprint(ptr::null(), ptr::null_mut()) },
            GpxStatus::NullArgument
        );
    }

    #[test]
    fn sequence_round_trip_and_errors() {
        let mut s = Sequence::new(5, 2, AcquisitionKind::Bald, 9).unwrap();
        s.push(vec![4, 1]).unwrap();
        let bytes = s.encode();
        let mut h = ptr::null_mut();
        assert_eq!(
            unsafe { gpx_sequence_decode(bytes.as_ptr(), bytes.len(), &mut h) },
            GpxStatus::Ok
        );
        let mut header = GpxSequenceHeader::default();
        assert_eq!(
            unsafe { gpx_sequence_header(h, &mut header) },
            GpxStatus::Ok
        );
        assert_eq!((header.kind, header.seed, header.num_batches), (4, 9, 1));

        let mut len = 0;
        assert_eq!(
            unsafe { gpx_sequence_batch(h, 0, ptr::null_mut(), 0, &mut len) },
            GpxStatus::BufferTooSmall
        );
        assert_eq!(len, 2);
        let mut ids = [0u32; 2];
        assert_eq!(
            unsafe { gpx_sequence_batch(h, 0, ids.as_mut_ptr(), 2, &mut len) },
            GpxStatus::Ok
        );
        assert_eq!(ids, [4, 1]);
        assert_eq!(
            unsafe { gpx_sequence_batch(h, 1, ids.as_mut_ptr(), 2, &mut len) },
            GpxStatus::OutOfRange
        );
        unsafe { gpx_sequence_free(h) };

        let mut bad = bytes.clone();
        bad[0] = 0;
        let mut h = ptr::null_mut();
        assert_eq!(
            unsafe { gpx_sequence_decode(bad.as_ptr(), bad.len(), &mut h) },
            GpxStatus::Sequence
        );
        assert!(h.is_null());
        let msg = unsafe { CStr::from_ptr(gpx_last_error()) }
            .to_str()
            .unwrap();
        assert!(msg.contains("magic"), "{msg}");
    }

    #[test]
    fn spearman_textbook() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [1.0, 3.0, 2.0, 4.0];
        let mut rho = 0.0;
        assert_eq!(
            unsafe { gpx_spearman(a.as_ptr(), b.as_ptr(), 4, &mut rho) },
            GpxStatus::Ok
        );
        assert!((rho - 0.8).abs() < 1e-12);
        assert_eq!(
            unsafe { gpx_spearman(a.as_ptr(), a.as_ptr(), 1, &mut rho) },
            GpxStatus::InvalidInput
        );
    }
}
