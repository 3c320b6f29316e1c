//! C ABI for `ifclass`.
//!
//! Objects cross the boundary as opaque pointers. The caller owns every
//! handle it receives and releases it with the matching `*_free` function;
//! freeing `NULL` is a no-op. Fallible functions return an [`IfcStatus`] and
//! write their outputs only on success. The message for the most recent
//! failure on the calling thread is available from [`ifc_last_error`].
//!
//! Enumerated arguments (`measure`, `algorithm`) are passed as `int32_t`
//! using the values of [`IfcMeasure`] and [`IfcAlgorithm`], so an
//! out-of-range value is reported instead of being undefined behaviour.
//!
//! # Safety
//!
//! Shared by every `unsafe` function here. Handles must be NULL or come
//! from this library and not yet be freed. Array arguments must point to
//! at least the stated number of readable (or writable) elements. Strings
//! must be NUL-terminated UTF-8. Handles are not synchronised, so do not
//! use one handle from several threads while any of them frees it.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ifclass::benchmark::{inject_label_noise, make_blobs, precision_at_q, recall_at_q, sample_reference, NoiseSpec};
use ifclass::data::{CorruptionMask, LabeledDataset};
use ifclass::detection::{detect, Algorithm, DetectOptions, RankedDataset, ReferencePoint, ReferenceSet};
use ifclass::influence::{MeasureKind, ModelArtifacts, SimilarityMeasure};
use ifclass::model::{load_model_dir, save_model_dir, train, MlpConfig, SavedModel};
use ifclass::numerics::Matrix;
use ifclass::theory::{cross_class_product, same_class_product};
use ifclass::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IfcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    OutOfRange = 4,
    InvalidConfig = 5,
    /// Not enough points: empty inputs, too few clean points per class, or
    /// an empty reference group.
    InsufficientData = 6,
    /// Non-finite values or a diverged training run.
    NumericalFailure = 7,
    Unsupported = 8,
    Io = 9,
    /// Malformed CSV or JSON.
    Format = 10,
    /// A Rust panic was caught at the boundary. This indicates a bug.
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IfcAlgorithm {
    Plain = 0,
    ClassBased = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IfcMeasure {
    If = 0,
    Gd = 1,
    Gc = 2,
    GcPartial = 3,
    Tracin = 4,
}

/// A labeled dataset, optionally carrying its corruption ground truth.
pub struct IfcDataset(LabeledDataset);

/// A trained classifier with its training checkpoints.
pub struct IfcModel(SavedModel);

/// Clean reference points grouped by class.
pub struct IfcReference(ReferenceSet);

/// Dataset points sorted ascending by score.
pub struct IfcRanking(RankedDataset);

struct Failure {
    status: IfcStatus,
    message: String,
}

impl Failure {
    fn new(status: IfcStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } => IfcStatus::DimensionMismatch,
            Error::NonFinite(_) | Error::Diverged { .. } => IfcStatus::NumericalFailure,
            Error::LabelOutOfRange { .. } | Error::IndexOutOfRange { .. } => IfcStatus::OutOfRange,
            Error::InvalidConfig(_) => IfcStatus::InvalidConfig,
            Error::Empty(_) | Error::InsufficientClean { .. } | Error::MissingClassGroup(_) => {
                IfcStatus::InsufficientData
            }
            Error::Unsupported(_) => IfcStatus::Unsupported,
            Error::Io(_) => IfcStatus::Io,
            Error::Format { .. } | Error::Json(_) | Error::Csv(_) => IfcStatus::Format,
        };
        Self::new(status, e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Outcome<()>>(f: F) -> IfcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            IfcStatus::Ok
        }
        Ok(Err(fail)) => {
            set_last_error(fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            IfcStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref()
        .ok_or_else(|| Failure::new(IfcStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Outcome<()> {
    if p.is_null() {
        return Err(Failure::new(IfcStatus::NullPointer, format!("{what} is NULL")));
    }
    p.write(value);
    Ok(())
}

unsafe fn check_out<T>(p: *mut T, what: &str) -> Outcome<()> {
    if p.is_null() {
        Err(Failure::new(IfcStatus::NullPointer, format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

unsafe fn boxed<T>(p: *mut *mut T, value: T, what: &str) -> Outcome<()> {
    write_out(p, Box::into_raw(Box::new(value)), what)
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Outcome<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(IfcStatus::NullPointer, format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Outcome<PathBuf> {
    let s = string_arg(p, what)?;
    Ok(PathBuf::from(s))
}

unsafe fn string_arg<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return Err(Failure::new(IfcStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(IfcStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn measure_arg(v: i32) -> Outcome<MeasureKind> {
    Ok(match v {
        0 => MeasureKind::If,
        1 => MeasureKind::Gd,
        2 => MeasureKind::Gc,
        3 => MeasureKind::GcPartial,
        4 => MeasureKind::TracIn,
        _ => return Err(Failure::new(IfcStatus::InvalidArgument, format!("unknown measure {v}"))),
    })
}

fn algorithm_arg(v: i32) -> Outcome<Algorithm> {
    Ok(match v {
        0 => Algorithm::Plain,
        1 => Algorithm::ClassBased,
        _ => {
            return Err(Failure::new(
                IfcStatus::InvalidArgument,
                format!("unknown algorithm {v}"),
            ))
        }
    })
}

fn mask_of(ds: &LabeledDataset) -> Outcome<&CorruptionMask> {
    ds.mask()
        .ok_or_else(|| Failure::new(IfcStatus::InvalidArgument, "dataset has no corruption ground truth"))
}

fn index_in(i: usize, len: usize) -> Outcome<()> {
    if i < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index: i, len }.into())
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ifc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated and
/// always NUL-terminated when `len > 0`). Returns the full message length in
/// bytes, excluding the terminator; 0 means the last call succeeded.
#[no_mangle]
pub unsafe extern "C" fn ifc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
            let bytes = c.as_bytes();
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

// ---- datasets ----

/// Builds a dataset from `n × dim` row-major features and `n` labels in
/// `[0, num_classes)`.
#[no_mangle]
pub unsafe extern "C" fn ifc_dataset_new(
    features: *const f64,
    n: usize,
    dim: usize,
    labels: *const usize,
    num_classes: usize,
    out: *mut *mut IfcDataset,
) -> IfcStatus {
    guard(|| {
        check_out(out, "out")?;
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| Failure::new(IfcStatus::InvalidArgument, "n * dim overflows"))?;
        let x = slice(features, len, "features")?.to_vec();
        let y = slice(labels, n, "labels")?.to_vec();
        let ds = LabeledDataset::new(Matrix::from_row_major(n, dim, x)?, y, num_classes)?;
        boxed(out, IfcDataset(ds), "out")
    })
}

/// Gaussian blobs with `classes` centers; point `i` has label `i % classes`.
#[no_mangle]
pub unsafe extern "C" fn ifc_dataset_make_blobs(
    n: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
    out: *mut *mut IfcDataset,
) -> IfcStatus {
    guard(|| {
        check_out(out, "out")?;
        let ds = make_blobs(n, classes, dim, separation, seed)?;
        boxed(out, IfcDataset(ds), "out")
    })
}

/// Reads a dataset CSV. `num_classes = 0` infers the class count from the
/// largest label.
#[no_mangle]
pub unsafe extern "C" fn ifc_dataset_load_csv(
    path: *const c_char,
    num_classes: usize,
    out: *mut *mut IfcDataset,
) -> IfcStatus {
    guard(|| {
        check_out(out, "out")?;
        let path = path_arg(path, "path")?;
        let ds = LabeledDataset::load_csv(&path, (num_classes > 0).then_some(num_classes))?;
        boxed(out, IfcDataset(ds), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ifc_dataset_save_csv(ds: *const IfcDataset, path: *const c_char) -> IfcStatus {
    guard(|| {
        let ds = handle(ds, "dataset")?;
        ds.0.save_csv(&path_arg(path, "path")?, None)?;
        Ok(())
    })
}

/// Point count, feature dimension and class count. Any output may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ifc_dataset_shape(
    ds: *const IfcDataset,
    n: *mut usize,
    dim: *mut usize,
    num_classes: *mut usize,
) -> IfcStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        if !n.is_null() {
            n.write(ds.len());
        }
        if !dim.is_null() {
            dim.write(ds.dim());
        }
        if !num_classes.is_null() {
            num_classes.write(ds.num_classes());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ifc_dataset_label(ds: *const IfcDataset, i: usize, out: *mut usize) -> IfcStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        index_in(i, ds.len())?;
        write_out(out, ds.label(i), "out")
    })
}

/// Copies the features of point `i` into `out`, which must hold `len >= dim`
/// values.
#[no_mangle]
pub unsafe extern "C" fn ifc_dataset_features(ds: *const IfcDataset, i: usize, out: *mut f64, len: usize) -> IfcStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        index_in(i, ds.len())?;
        check_out(out, "out")?;
        if len < ds.dim() {
            return Err(Error::DimensionMismatch {
                context: "output buffer",
                expected: ds.dim(),
                found: len,
            }
            .into());
        }
        std::ptr::copy_nonoverlapping(ds.x(i).as_ptr(), out, ds.dim());
        Ok(())
    })
}

/// Writes 1 if point `i` is known corrupted, 0 if known clean and -1 when
/// the dataset carries no ground truth.
#[no_mangle]
pub unsafe extern "C" fn ifc_dataset_is_corrupted(ds: *const IfcDataset, i: usize, out: *mut i32) -> IfcStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        index_in(i, ds.len())?;
        let v = ds.mask().map_or(-1, |m| i32::from(m.is_corrupted(i)));
        write_out(out, v, "out")
    })
}

/// Flips `floor(p·n + 0.5)` labels uniformly at random to a different class.
/// The returned dataset records which points were flipped.
#[no_mangle]
pub unsafe extern "C" fn ifc_dataset_inject_noise(
    ds: *const IfcDataset,
    p: f64,
    seed: u64,
    out: *mut *mut IfcDataset,
) -> IfcStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        check_out(out, "out")?;
        let (noisy, _) = inject_label_noise(ds, &NoiseSpec::new(p, seed))?;
        boxed(out, IfcDataset(noisy), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ifc_dataset_free(ds: *mut IfcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

// ---- models ----

/// Trains a classifier. `config_json` is a JSON object with at least
/// `input_dim`, `output_dim`, `learning_rate` and `epochs`; optional keys are
/// `hidden`, `leaky_slope`, `bias`, `batch_size`, `optimizer`, `l2`, `seed`
/// and `checkpoints`.
#[no_mangle]
pub unsafe extern "C" fn ifc_model_train(
    ds: *const IfcDataset,
    config_json: *const c_char,
    out: *mut *mut IfcModel,
) -> IfcStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        check_out(out, "out")?;
        let config: MlpConfig = serde_json::from_str(string_arg(config_json, "config_json")?)
            .map_err(|e| Failure::new(IfcStatus::InvalidConfig, e.to_string()))?;
        let trained = train(ds, &config)?;
        let model = SavedModel {
            params: trained.params,
            checkpoints: trained.checkpoints,
            config,
        };
        boxed(out, IfcModel(model), "out")
    })
}

/// Writes `dir/model.json` and `dir/checkpoints/`, creating `dir` if needed.
#[no_mangle]
pub unsafe extern "C" fn ifc_model_save(model: *const IfcModel, dir: *const c_char) -> IfcStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        save_model_dir(&path_arg(dir, "dir")?, &m.params, &m.checkpoints, &m.config, None)?;
        Ok(())
    })
}

/// Loads a model saved by [`ifc_model_save`] or the command-line tool.
/// `path` may name the directory or its `model.json`.
#[no_mangle]
pub unsafe extern "C" fn ifc_model_load(path: *const c_char, out: *mut *mut IfcModel) -> IfcStatus {
    guard(|| {
        check_out(out, "out")?;
        let saved = load_model_dir(&path_arg(path, "path")?)?;
        boxed(out, IfcModel(saved), "out")
    })
}

/// Input and output widths. Either output may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ifc_model_dims(
    model: *const IfcModel,
    input_dim: *mut usize,
    output_dim: *mut usize,
) -> IfcStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        if !input_dim.is_null() {
            input_dim.write(m.params.input_dim());
        }
        if !output_dim.is_null() {
            output_dim.write(m.params.output_dim());
        }
        Ok(())
    })
}

/// Number of checkpoints available to TracIn.
#[no_mangle]
pub unsafe extern "C" fn ifc_model_num_checkpoints(model: *const IfcModel, out: *mut usize) -> IfcStatus {
    guard(|| write_out(out, handle(model, "model")?.0.checkpoints.len(), "out"))
}

/// Softmax probabilities for one input of length `dim`, written to `out`
/// (capacity `len >= output_dim`).
#[no_mangle]
pub unsafe extern "C" fn ifc_model_predict_proba(
    model: *const IfcModel,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    len: usize,
) -> IfcStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        let x = slice(x, dim, "x")?;
        check_out(out, "out")?;
        let probs = m.params.forward(x)?.probs;
        if len < probs.len() {
            return Err(Error::DimensionMismatch {
                context: "output buffer",
                expected: probs.len(),
                found: len,
            }
            .into());
        }
        std::ptr::copy_nonoverlapping(probs.as_ptr(), out, probs.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ifc_model_free(model: *mut IfcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---- reference sets ----

/// Draws `m_k` clean points per class from `ds`. Without ground truth every
/// point counts as clean. Sampled points are excluded from rankings of `ds`
/// unless detection is asked to include them.
#[no_mangle]
pub unsafe extern "C" fn ifc_reference_sample(
    ds: *const IfcDataset,
    m_k: usize,
    seed: u64,
    out: *mut *mut IfcReference,
) -> IfcStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        check_out(out, "out")?;
        let clean;
        let mask = match ds.mask() {
            Some(m) => m,
            None => {
                clean = CorruptionMask::clean(ds.labels());
                &clean
            }
        };
        let r = sample_reference(ds, mask, m_k, seed)?;
        boxed(out, IfcReference(r), "out")
    })
}

/// Uses every point of `ds` as a trusted reference point. The points are
/// treated as external, so they never shorten a ranking.
#[no_mangle]
pub unsafe extern "C" fn ifc_reference_from_dataset(ds: *const IfcDataset, out: *mut *mut IfcReference) -> IfcStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        check_out(out, "out")?;
        let points = (0..ds.len())
            .map(|i| ReferencePoint {
                features: ds.x(i).to_vec(),
                label: ds.label(i),
                source_index: None,
            })
            .collect();
        let r = ReferenceSet::from_points(points, ds.num_classes())?;
        boxed(out, IfcReference(r), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ifc_reference_len(reference: *const IfcReference, out: *mut usize) -> IfcStatus {
    guard(|| write_out(out, handle(reference, "reference")?.0.len(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn ifc_reference_free(reference: *mut IfcReference) {
    if !reference.is_null() {
        drop(Box::from_raw(reference));
    }
}

// ---- detection ----

/// Scores every point of `ds` against `reference` and sorts ascending, most
/// suspicious first. `model` must have been trained on `ds`.
#[no_mangle]
pub unsafe extern "C" fn ifc_detect(
    ds: *const IfcDataset,
    reference: *const IfcReference,
    model: *const IfcModel,
    measure: i32,
    algorithm: i32,
    include_reference: bool,
    out: *mut *mut IfcRanking,
) -> IfcStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.0;
        let reference = &handle(reference, "reference")?.0;
        let m = &handle(model, "model")?.0;
        check_out(out, "out")?;
        let kind = measure_arg(measure)?;
        let alg = algorithm_arg(algorithm)?;
        let art = ModelArtifacts::new(m.params.clone(), m.checkpoints.clone());
        let opts = DetectOptions {
            include_reference,
            class_scores: false,
        };
        let ranked = detect(alg, ds, reference, SimilarityMeasure::new(kind), &art, opts)?;
        boxed(out, IfcRanking(ranked), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ifc_ranking_len(ranking: *const IfcRanking, out: *mut usize) -> IfcStatus {
    guard(|| write_out(out, handle(ranking, "ranking")?.0.len(), "out"))
}

/// Dataset index and score at rank `pos` (0 is the lowest score). Either
/// output may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ifc_ranking_get(
    ranking: *const IfcRanking,
    pos: usize,
    index: *mut usize,
    score: *mut f64,
) -> IfcStatus {
    guard(|| {
        let r = &handle(ranking, "ranking")?.0;
        index_in(pos, r.len())?;
        let e = &r.entries[pos];
        if !index.is_null() {
            index.write(e.index);
        }
        if !score.is_null() {
            score.write(e.score);
        }
        Ok(())
    })
}

/// Number of pairwise similarity evaluations the run performed.
#[no_mangle]
pub unsafe extern "C" fn ifc_ranking_sim_calls(ranking: *const IfcRanking, out: *mut u64) -> IfcStatus {
    guard(|| write_out(out, handle(ranking, "ranking")?.0.sim_calls, "out"))
}

/// Fraction of corrupted points among the lowest `ceil(q·len/100)` ranks.
/// `ds` must carry corruption ground truth.
#[no_mangle]
pub unsafe extern "C" fn ifc_ranking_precision(
    ranking: *const IfcRanking,
    ds: *const IfcDataset,
    q: f64,
    out: *mut f64,
) -> IfcStatus {
    guard(|| {
        let r = &handle(ranking, "ranking")?.0;
        let mask = mask_of(&handle(ds, "dataset")?.0)?;
        write_out(out, precision_at_q(r, mask, q)?, "out")
    })
}

/// Fraction of all corrupted points found in the lowest `ceil(q·len/100)`
/// ranks; 0 when nothing is corrupted.
#[no_mangle]
pub unsafe extern "C" fn ifc_ranking_recall(
    ranking: *const IfcRanking,
    ds: *const IfcDataset,
    q: f64,
    out: *mut f64,
) -> IfcStatus {
    guard(|| {
        let r = &handle(ranking, "ranking")?.0;
        let mask = mask_of(&handle(ds, "dataset")?.0)?;
        write_out(out, recall_at_q(r, mask, q)?, "out")
    })
}

/// Writes the ranking in the command-line tool's CSV format.
#[no_mangle]
pub unsafe extern "C" fn ifc_ranking_write_csv(ranking: *const IfcRanking, path: *const c_char) -> IfcStatus {
    guard(|| {
        let r = &handle(ranking, "ranking")?.0;
        let file = std::fs::File::create(path_arg(path, "path")?).map_err(Error::from)?;
        r.write_csv(std::io::BufWriter::new(file), None)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ifc_ranking_free(ranking: *mut IfcRanking) {
    if !ranking.is_null() {
        drop(Box::from_raw(ranking));
    }
}

// ---- closed forms ----

/// Logit-gradient inner product of two points from different classes, each
/// predicted with confidence `alpha` and uniform mass on the rest.
#[no_mangle]
pub unsafe extern "C" fn ifc_theory_cross_class(alpha: f64, classes: usize, out: *mut f64) -> IfcStatus {
    guard(|| write_out(out, cross_class_product(alpha, classes)?, "out"))
}

/// Same as [`ifc_theory_cross_class`] for two points of the same class.
#[no_mangle]
pub unsafe extern "C" fn ifc_theory_same_class(alpha: f64, classes: usize, out: *mut f64) -> IfcStatus {
    guard(|| write_out(out, same_class_product(alpha, classes)?, "out"))
}
