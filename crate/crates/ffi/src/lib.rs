//! C ABI over the `nanorc` simulator.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `*_new`/`*_load`/`*_run` function and released with the matching
//! `*_free`. Fallible calls return an [`NrcStatus`]; on failure a
//! description is available from [`nrc_last_error`] until the next failing
//! call on the same thread. Panics never unwind into C: they are caught and
//! reported as `NRC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nanorc::config::{ReservoirKind, RunConfig};
use nanorc::experiment::{run_experiment, Experiment, Stage, StageError};
use nanorc::readout::{ridge_regression, StateMatrix, Targets};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    LayoutError = 4,
    DynamicsError = 5,
    LearningError = 6,
    IoError = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrcReservoirKind {
    Nanomagnet = 0,
    Esn = 1,
}

/// Opaque run configuration.
pub struct NrcConfig(RunConfig);

/// Opaque finished experiment.
pub struct NrcExperiment(Experiment);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn stage_status(e: &StageError) -> NrcStatus {
    match e.stage {
        Stage::Config => NrcStatus::ConfigError,
        Stage::Layout => NrcStatus::LayoutError,
        Stage::Dynamics => NrcStatus::DynamicsError,
        Stage::Learning => NrcStatus::LearningError,
        Stage::Output => NrcStatus::IoError,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NrcStatus, String)>) -> NrcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NrcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside nanorc");
            NrcStatus::Panic
        }
    }
}

fn null(what: &str) -> (NrcStatus, String) {
    (NrcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, (NrcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| (NrcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nrc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates the shipped benchmark configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn nrc_config_benchmark(out: *mut *mut NrcConfig) -> NrcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(NrcConfig(RunConfig::benchmark())));
        Ok(())
    })
}

/// Loads a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nrc_config_load(
    path: *const c_char,
    out: *mut *mut NrcConfig,
) -> NrcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path, "path")?;
        let cfg = RunConfig::load(path).map_err(|e| (NrcStatus::ConfigError, e.to_string()))?;
        *out = Box::into_raw(Box::new(NrcConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nrc_config_set_task_seed(cfg: *mut NrcConfig, seed: u64) -> NrcStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.task.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nrc_config_set_reservoir(
    cfg: *mut NrcConfig,
    kind: NrcReservoirKind,
) -> NrcStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.reservoir = match kind {
            NrcReservoirKind::Nanomagnet => ReservoirKind::Nanomagnet,
            NrcReservoirKind::Esn => ReservoirKind::Esn,
        };
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library (or be NULL) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn nrc_config_free(cfg: *mut NrcConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the configured experiment end to end.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nrc_experiment_run(
    cfg: *const NrcConfig,
    out: *mut *mut NrcExperiment,
) -> NrcStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let exp = run_experiment(&cfg.0, None).map_err(|e| (stage_status(&e), e.to_string()))?;
        *out = Box::into_raw(Box::new(NrcExperiment(exp)));
        Ok(())
    })
}

/// # Safety
/// `exp` must be a live experiment handle; `train` and `test` writable.
#[no_mangle]
pub unsafe extern "C" fn nrc_experiment_accuracy(
    exp: *const NrcExperiment,
    train: *mut f64,
    test: *mut f64,
) -> NrcStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("exp"))?;
        if train.is_null() || test.is_null() {
            return Err(null("accuracy output"));
        }
        *train = exp.0.outcome.scores.train_accuracy;
        *test = exp.0.outcome.scores.test_accuracy;
        Ok(())
    })
}

/// Number of samples (columns of the state matrix); 0 for NULL.
///
/// # Safety
/// `exp` must be a live experiment handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn nrc_experiment_num_samples(exp: *const NrcExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.0.outcome.states.cols())
}

/// Rows of the state matrix including the bias row; 0 for NULL.
///
/// # Safety
/// `exp` must be a live experiment handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn nrc_experiment_num_rows(exp: *const NrcExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.0.outcome.states.rows())
}

/// Copies the state matrix, one sample after another (sample-major, each
/// `nrc_experiment_num_rows` long, bias last).
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nrc_experiment_states(
    exp: *const NrcExperiment,
    buf: *mut f64,
    len: usize,
) -> NrcStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("exp"))?;
        let states = &exp.0.outcome.states;
        let need = states.rows() * states.cols();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < need {
            return Err((
                NrcStatus::BufferTooSmall,
                format!("need {need} doubles, got {len}"),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (chunk, col) in dst.chunks_mut(states.rows()).zip(states.columns()) {
            chunk.copy_from_slice(col);
        }
        Ok(())
    })
}

/// Copies the readout outputs ŷ, one per sample.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nrc_experiment_outputs(
    exp: *const NrcExperiment,
    buf: *mut f64,
    len: usize,
) -> NrcStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("exp"))?;
        let samples = &exp.0.outcome.samples;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < samples.len() {
            return Err((
                NrcStatus::BufferTooSmall,
                format!("need {} doubles, got {len}", samples.len()),
            ));
        }
        for (i, s) in samples.iter().enumerate() {
            *buf.add(i) = s.y_hat;
        }
        Ok(())
    })
}

/// Writes all run artifacts into `dir` (created if missing).
///
/// # Safety
/// `exp` must be live; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nrc_experiment_write(
    exp: *const NrcExperiment,
    dir: *const c_char,
) -> NrcStatus {
    guard(|| {
        let exp = exp.as_ref().ok_or_else(|| null("exp"))?;
        let dir = path_arg(dir, "dir")?;
        exp.0
            .write_artifacts(dir)
            .map(|_| ())
            .map_err(|e| (stage_status(&e), e.to_string()))
    })
}

/// # Safety
/// `exp` must come from this library (or be NULL) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn nrc_experiment_free(exp: *mut NrcExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Ridge regression with an appended bias row. `x` is `nodes × samples`
/// row-major, `y` holds one 0/1 target per sample and `w_out` receives
/// `nodes + 1` weights (bias last).
///
/// # Safety
/// Buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn nrc_ridge_regression(
    x: *const f64,
    nodes: usize,
    samples: usize,
    y: *const f64,
    lambda: f64,
    w_out: *mut f64,
) -> NrcStatus {
    guard(|| {
        if x.is_null() || y.is_null() || w_out.is_null() {
            return Err(null("buffer"));
        }
        if nodes == 0 || samples == 0 {
            return Err((NrcStatus::InvalidArgument, "empty state matrix".into()));
        }
        let x = std::slice::from_raw_parts(x, nodes * samples);
        let y = std::slice::from_raw_parts(y, samples);
        let columns: Vec<Vec<f64>> = (0..samples)
            .map(|t| (0..nodes).map(|k| x[k * samples + t]).collect())
            .collect();
        let states = StateMatrix::from_samples(&columns)
            .map_err(|e| (NrcStatus::InvalidArgument, e.to_string()))?;
        let w = ridge_regression(&states, &Targets::single(y.to_vec()), lambda)
            .map_err(|e| (NrcStatus::LearningError, e.to_string()))?;
        std::slice::from_raw_parts_mut(w_out, nodes + 1).copy_from_slice(&w.w[0]);
        Ok(())
    })
}
