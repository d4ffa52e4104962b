//! C interface to road generation, simulation, datasets, training and
//! inference.
//!
//! Conventions:
//! - Every fallible function returns a [`QcmStatus`]; on failure a message
//!   is available from [`qcm_last_error`] on the same thread.
//! - Objects are opaque handles created by `*_generate`, `*_load` or
//!   `qcm_train` and released with the matching `*_free`.
//! - Output buffers are caller-allocated; lengths are passed explicitly.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use qcm_sysid::dataset::{self, Dataset, GenConfig};
use qcm_sysid::net::{load_checkpoint, save_checkpoint, Checkpoint};
use qcm_sysid::road::{self, RoadClass, RoadProfile};
use qcm_sysid::sim::{self, QcmParams};
use qcm_sysid::training::{self, Model, NoObserver, Objective, SplitName, TrainConfig};
use qcm_sysid::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Shape = 4,
    Diverged = 5,
    NonFinite = 6,
    Io = 7,
    Corrupt = 8,
    Version = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcmObjective {
    Labelled = 0,
    Unlabelled = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcmSplit {
    Train = 0,
    Test = 1,
}

/// Dataset generation settings; start from [`qcm_gen_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QcmGenConfig {
    pub roads: usize,
    pub masses: usize,
    /// Samples per trace.
    pub n: usize,
    /// Step width in seconds.
    pub h: f64,
    pub frequencies: usize,
    pub velocity: f64,
    pub train_roads: usize,
    pub master_seed: u64,
}

/// Training settings; start from [`qcm_train_config_default`]. The network
/// architecture is always the default one.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct QcmTrainConfig {
    pub objective: QcmObjective,
    pub steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Evaluate every this many steps; 0 only evaluates after the last step.
    pub eval_every: u64,
    pub seed: u64,
    pub eval_seed: u64,
    pub noise_sigma_eval: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QcmSampleInfo {
    /// 1-based road index.
    pub road_index: usize,
    /// 1-based mass index.
    pub mass_index: usize,
    pub mass: u32,
    /// Roughness exponent k of the road class (A = 0 .. E = 8).
    pub road_class_k: u32,
    pub p1: f64,
    pub p2: f64,
    /// Whether the sample belongs to the training split.
    pub is_train: bool,
}

/// Mean and population standard deviation of relative deviations.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QcmEvalResult {
    pub samples: usize,
    pub p1_mu: f64,
    pub p1_sigma: f64,
    pub p2_mu: f64,
    pub p2_sigma: f64,
}

pub struct QcmRoad(RoadProfile);

pub struct QcmDataset(Dataset);

pub struct QcmModel {
    model: Model,
    checkpoint: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> QcmStatus {
    match err {
        Error::InvalidArgument(_) => QcmStatus::InvalidArgument,
        Error::Domain(_) => QcmStatus::Domain,
        Error::Shape(_) => QcmStatus::Shape,
        Error::Diverged { .. } | Error::SampleDiverged { .. } => QcmStatus::Diverged,
        Error::NonFiniteLoss { .. } => QcmStatus::NonFinite,
        Error::Version { .. } => QcmStatus::Version,
        Error::Corrupt { .. } | Error::Manifest { .. } => QcmStatus::Corrupt,
        Error::Io { .. } => QcmStatus::Io,
    }
}

/// Failure raised inside the wrapper itself.
struct Fail(QcmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(QcmStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QcmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            QcmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Fail(QcmStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn fill(out: *mut f64, len: usize, values: &[f64], what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    if len < values.len() {
        return Err(Fail(QcmStatus::BufferTooSmall, format!("{what} holds {len} values, {} needed", values.len())));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qcm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qcm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

// ---------------------------------------------------------------------------
// Roads and simulation

/// Draws a road of class exponent `class_k` (0, 2, 4, 6 or 8).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn qcm_road_generate(
    class_k: u32,
    frequencies: usize,
    velocity: f64,
    seed: u64,
    out: *mut *mut QcmRoad,
) -> QcmStatus {
    guard(|| {
        let class = RoadClass::from_k(class_k)?;
        let profile = road::generate_road(class, frequencies, velocity, seed)?;
        put(out, Box::into_raw(Box::new(QcmRoad(profile))))
    })
}

/// Road height at time `t` in seconds.
///
/// # Safety
/// `road` must come from [`qcm_road_generate`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_road_evaluate(road: *const QcmRoad, t: f64, out: *mut f64) -> QcmStatus {
    guard(|| put(out, deref(road, "road")?.0.evaluate(t)))
}

/// # Safety
/// `road` must come from [`qcm_road_generate`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qcm_road_free(road: *mut QcmRoad) {
    if !road.is_null() {
        drop(Box::from_raw(road));
    }
}

/// Writes `[p1, p2] = [C3/m3, K3/m3]` of the reference vehicle.
///
/// # Safety
/// `out` must point to two writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qcm_true_parameters(m3: f64, out: *mut f64) -> QcmStatus {
    guard(|| {
        let p = QcmParams::with_passenger_mass(m3);
        p.validate()?;
        fill(out, 2, &sim::true_parameters(&p).as_array(), "out")
    })
}

/// Simulates `n` steps of width `h` from rest and writes the recorded seat
/// and body accelerations, `n` values each.
///
/// # Safety
/// `road` must be a live handle; `z_ddot` and `y_ddot` must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qcm_simulate(
    road: *const QcmRoad,
    m3: f64,
    h: f64,
    n: usize,
    z_ddot: *mut f64,
    y_ddot: *mut f64,
) -> QcmStatus {
    guard(|| {
        let road = deref(road, "road")?;
        let trace = sim::simulate(&QcmParams::with_passenger_mass(m3), &road.0, h, n)?;
        fill(z_ddot, n, &trace.z_ddot, "z_ddot")?;
        fill(y_ddot, n, &trace.y_ddot, "y_ddot")
    })
}

// ---------------------------------------------------------------------------
// Datasets

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_gen_config_default(out: *mut QcmGenConfig) -> QcmStatus {
    let d = GenConfig::default();
    guard(|| {
        put(
            out,
            QcmGenConfig {
                roads: d.roads,
                masses: d.masses,
                n: d.n,
                h: d.h,
                frequencies: d.frequencies,
                velocity: d.velocity,
                train_roads: d.train_roads,
                master_seed: d.master_seed,
            },
        )
    })
}

/// # Safety
/// `config` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_dataset_generate(config: *const QcmGenConfig, out: *mut *mut QcmDataset) -> QcmStatus {
    guard(|| {
        let c = deref(config, "config")?;
        let config = GenConfig {
            roads: c.roads,
            masses: c.masses,
            n: c.n,
            h: c.h,
            frequencies: c.frequencies,
            velocity: c.velocity,
            train_roads: c.train_roads,
            master_seed: c.master_seed,
        };
        let ds = dataset::generate_dataset(&config)?;
        put(out, Box::into_raw(Box::new(QcmDataset(ds))))
    })
}

/// # Safety
/// `dir` must be a NUL-terminated UTF-8 path; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_dataset_load(dir: *const c_char, out: *mut *mut QcmDataset) -> QcmStatus {
    guard(|| {
        let ds = dataset::load_dataset(&path_arg(dir)?)?;
        put(out, Box::into_raw(Box::new(QcmDataset(ds))))
    })
}

/// # Safety
/// `ds` must be a live handle and `dir` a NUL-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn qcm_dataset_save(ds: *const QcmDataset, dir: *const c_char) -> QcmStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        dataset::save_dataset(&ds.0, &path_arg(dir)?)?;
        Ok(())
    })
}

/// Number of samples and per-trace length.
///
/// # Safety
/// `ds` must be a live handle; both outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_dataset_shape(ds: *const QcmDataset, samples: *mut usize, n: *mut usize) -> QcmStatus {
    guard(|| {
        let ds = deref(ds, "dataset")?;
        put(samples, ds.0.samples.len())?;
        put(n, ds.0.config.n)
    })
}

/// Metadata of sample `index` (0-based, road-major order). The acceleration
/// buffers may be null; when given, each must hold `len >= n` doubles.
///
/// # Safety
/// `ds` must be a live handle; non-null pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_dataset_sample(
    ds: *const QcmDataset,
    index: usize,
    info: *mut QcmSampleInfo,
    z_ddot: *mut f64,
    y_ddot: *mut f64,
    len: usize,
) -> QcmStatus {
    guard(|| {
        let ds = &deref(ds, "dataset")?.0;
        let s = ds.samples.get(index).ok_or_else(|| {
            Fail(QcmStatus::InvalidArgument, format!("sample index {index} out of range 0..{}", ds.samples.len()))
        })?;
        let t = s.target();
        put(
            info,
            QcmSampleInfo {
                road_index: s.road_index,
                mass_index: s.mass_index,
                mass: s.mass,
                road_class_k: s.road_class.k(),
                p1: t.p1,
                p2: t.p2,
                is_train: s.road_index <= ds.config.train_roads,
            },
        )?;
        if !z_ddot.is_null() {
            fill(z_ddot, len, &s.z_ddot, "z_ddot")?;
        }
        if !y_ddot.is_null() {
            fill(y_ddot, len, &s.y_ddot, "y_ddot")?;
        }
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live handle not used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qcm_dataset_free(ds: *mut QcmDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

// ---------------------------------------------------------------------------
// Training and inference

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_train_config_default(out: *mut QcmTrainConfig) -> QcmStatus {
    let d = TrainConfig::default();
    guard(|| {
        put(
            out,
            QcmTrainConfig {
                objective: QcmObjective::Labelled,
                steps: d.steps,
                batch_size: d.batch_size,
                learning_rate: d.learning_rate,
                eval_every: d.eval_every,
                seed: d.seed,
                eval_seed: d.eval_seed,
                noise_sigma_eval: d.noise_sigma_eval,
            },
        )
    })
}

fn split_of(ds: &Dataset) -> Result<dataset::Split, Fail> {
    Ok(dataset::split(ds, ds.config.train_roads)?)
}

/// Trains on the dataset's training split and returns the model.
///
/// # Safety
/// `ds` and `config` must be readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_train(ds: *const QcmDataset, config: *const QcmTrainConfig, out: *mut *mut QcmModel) -> QcmStatus {
    guard(|| {
        let ds = &deref(ds, "dataset")?.0;
        let c = deref(config, "config")?;
        let config = TrainConfig {
            objective: match c.objective {
                QcmObjective::Labelled => Objective::Labelled,
                QcmObjective::Unlabelled => Objective::Unlabelled,
            },
            steps: c.steps,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            eval_every: c.eval_every,
            seed: c.seed,
            eval_seed: c.eval_seed,
            noise_sigma_eval: c.noise_sigma_eval,
            ..TrainConfig::default()
        };
        let sp = split_of(ds)?;
        let outcome = training::train(&sp.train_view(ds), &sp.test_view(ds), &config, None, &mut NoObserver)?;
        put(out, Box::into_raw(Box::new(QcmModel { model: outcome.model, checkpoint: outcome.checkpoint })))
    })
}

/// Loads a checkpoint directory written by training.
///
/// # Safety
/// `dir` must be a NUL-terminated UTF-8 path; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_model_load(dir: *const c_char, out: *mut *mut QcmModel) -> QcmStatus {
    guard(|| {
        let checkpoint = load_checkpoint(&path_arg(dir)?)?;
        let model = Model::from_checkpoint(&checkpoint)?;
        put(out, Box::into_raw(Box::new(QcmModel { model, checkpoint })))
    })
}

/// # Safety
/// `model` must be a live handle and `dir` a NUL-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn qcm_model_save(model: *const QcmModel, dir: *const c_char) -> QcmStatus {
    guard(|| {
        let m = deref(model, "model")?;
        save_checkpoint(&m.checkpoint, &path_arg(dir)?)?;
        Ok(())
    })
}

/// Rows per input window (500 for the default network).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_model_window_len(model: *const QcmModel, out: *mut usize) -> QcmStatus {
    guard(|| put(out, deref(model, "model")?.model.shape().input_len))
}

/// Estimates `[p1, p2]` for `count` windows. `windows` holds
/// `count * rows * 2` doubles, each window as interleaved `[z̈, ÿ]` rows;
/// `rows` must equal [`qcm_model_window_len`]. Writes `2 * count` doubles.
///
/// # Safety
/// `model` must be a live handle; the buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn qcm_model_predict(
    model: *const QcmModel,
    windows: *const f64,
    count: usize,
    rows: usize,
    out: *mut f64,
) -> QcmStatus {
    guard(|| {
        let m = &deref(model, "model")?.model;
        let expected = m.shape().input_len;
        if rows != expected {
            return Err(Fail(QcmStatus::Shape, format!("windows have {rows} rows, the network expects {expected}")));
        }
        if count == 0 {
            return Ok(());
        }
        if windows.is_null() {
            return Err(null("windows"));
        }
        let data = std::slice::from_raw_parts(windows, count * rows * 2);
        let refs: Vec<&[f64]> = data.chunks_exact(rows * 2).collect();
        let preds = m.predict_windows(&refs)?;
        let flat: Vec<f64> = preds.iter().flatten().copied().collect();
        fill(out, 2 * count, &flat, "out")
    })
}

/// Relative deviation statistics on one split, with optional input noise.
///
/// # Safety
/// `model` and `ds` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcm_model_evaluate(
    model: *const QcmModel,
    ds: *const QcmDataset,
    split: QcmSplit,
    noise_sigma: f64,
    eval_seed: u64,
    out: *mut QcmEvalResult,
) -> QcmStatus {
    guard(|| {
        let m = &deref(model, "model")?.model;
        let ds = &deref(ds, "dataset")?.0;
        let sp = split_of(ds)?;
        let (view, name) = match split {
            QcmSplit::Train => (sp.train_view(ds), SplitName::Train),
            QcmSplit::Test => (sp.test_view(ds), SplitName::Test),
        };
        let r = training::evaluate(m, &view, name, noise_sigma, eval_seed)?;
        put(
            out,
            QcmEvalResult { samples: r.samples, p1_mu: r.p1.mu, p1_sigma: r.p1.sigma, p2_mu: r.p2.mu, p2_sigma: r.p2.sigma },
        )
    })
}

/// # Safety
/// `model` must be a live handle not used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qcm_model_free(model: *mut QcmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
