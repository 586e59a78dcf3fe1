//! C ABI over `hcons`.
//!
//! Every fallible function returns an [`HconsStatus`]; on failure a message is
//! stored per thread and read back with [`hcons_last_error`]. Objects are
//! opaque handles created by `*_new`/`*_parse`/`*_load` functions and released
//! with the matching `*_free`. Passing NULL to a `*_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hcons::adversarial::{self, AdvConfig, Dataset, LinearModel, Objective, PerturbationNorm, SolverConfig};
use hcons::bounds::verify_bound_instance;
use hcons::conditional::{Hypothesis, HypothesisClass};
use hcons::counterexamples::{assert_counterexample, build_counterexample, CounterexampleParams, NegativeTheorem};
use hcons::datagen::{load_csv_dataset, CsvOptions};
use hcons::distributions::FiniteDistribution;
use hcons::{Error, LossKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HconsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDistribution = 3,
    NotSymmetric = 4,
    BoundInapplicable = 5,
    NonConvergence = 6,
    Io = 7,
    Parse = 8,
    DimensionMismatch = 9,
    Internal = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HconsClass {
    AllBounded = 0,
    ConstantBounded = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HconsNegativeTheorem {
    Huber = 0,
    SqEps = 1,
    EpsFar = 2,
    EpsNear = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HconsNorm {
    LInf = 0,
    L2 = 1,
    L1 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HconsObjective {
    SmoothAdv = 0,
    AdvSq = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HconsBoundResult {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// 1 when the bound holds within tolerance, 0 otherwise.
    pub holds: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HconsCounterexampleResult {
    pub surrogate_err_hbar: f64,
    pub surrogate_err_hstar: f64,
    pub sq_regret_hbar: f64,
    pub confirmed: i32,
}

/// Training options. `loss` is required for `SmoothAdv` and ignored for
/// `AdvSq`. A `projection_bound` of 0 means no box.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HconsTrainConfig {
    pub objective: HconsObjective,
    pub loss: *const HconsLoss,
    pub gamma: f64,
    pub tau: f64,
    pub norm: HconsNorm,
    pub max_iters: usize,
    pub tol: f64,
    pub step0: f64,
    pub projection_bound: f64,
}

pub struct HconsLoss {
    kind: LossKind,
}

pub struct HconsDistribution {
    dist: FiniteDistribution,
}

pub struct HconsDataset {
    data: Dataset,
}

pub struct HconsModel {
    model: LinearModel,
    objective: f64,
    iters: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> HconsStatus {
    match err {
        Error::InvalidLoss(_)
        | Error::InvalidClass(_)
        | Error::InvalidSpec(_)
        | Error::InvalidParams(_)
        | Error::MissingPrediction(_)
        | Error::PredictionOutOfBounds { .. }
        | Error::DomainViolation { .. }
        | Error::ConfigInfeasible(_)
        | Error::PremiseFailed { .. } => HconsStatus::InvalidArgument,
        Error::InvalidDistribution { .. } => HconsStatus::InvalidDistribution,
        Error::SymmetryViolation { .. } | Error::NotSymmetric { .. } => HconsStatus::NotSymmetric,
        Error::BoundInapplicable(_) => HconsStatus::BoundInapplicable,
        Error::NonConvergence { .. } => HconsStatus::NonConvergence,
        Error::Io { .. } => HconsStatus::Io,
        Error::Parse { .. } | Error::Json(_) => HconsStatus::Parse,
        Error::DimensionMismatch { .. } => HconsStatus::DimensionMismatch,
        Error::Inconsistent(_) => HconsStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), (HconsStatus, String)>) -> HconsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HconsStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("panic inside hcons".into());
            HconsStatus::Panic
        }
    }
}

fn lib(err: Error) -> (HconsStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (HconsStatus, String) {
    (HconsStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (HconsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (HconsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, (HconsStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (HconsStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

fn norm_of(n: HconsNorm) -> PerturbationNorm {
    match n {
        HconsNorm::LInf => PerturbationNorm::LInf,
        HconsNorm::L2 => PerturbationNorm::L2,
        HconsNorm::L1 => PerturbationNorm::L1,
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hcons_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hcons_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a loss such as `"squared"`, `"lp:3"`, `"huber:0.2"`, `"eps:0.1"` or `"sqeps:0.1"`.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcons_loss_parse(spec: *const c_char, out: *mut *mut HconsLoss) -> HconsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kind: LossKind = str_arg(spec, "spec")?.parse().map_err(lib)?;
        *out = Box::into_raw(Box::new(HconsLoss { kind }));
        Ok(())
    })
}

/// # Safety
/// `loss` must be NULL or a handle from [`hcons_loss_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hcons_loss_free(loss: *mut HconsLoss) {
    if !loss.is_null() {
        drop(Box::from_raw(loss));
    }
}

/// # Safety
/// `loss` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcons_loss_value(loss: *const HconsLoss, prediction: f64, label: f64, out: *mut f64) -> HconsStatus {
    guard(|| {
        let loss = ref_arg(loss, "loss")?;
        *out_arg(out, "out")? = loss.kind.value(prediction, label);
        Ok(())
    })
}

/// Parses a distribution from its JSON form
/// (`{"B": 1, "points": [{"id": "x0", "weight": 1, "cond": [[y, mass], ...]}]}`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcons_distribution_from_json(json: *const c_char, out: *mut *mut HconsDistribution) -> HconsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let dist = FiniteDistribution::from_json_str(str_arg(json, "json")?).map_err(lib)?;
        *out = Box::into_raw(Box::new(HconsDistribution { dist }));
        Ok(())
    })
}

/// # Safety
/// `dist` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcons_distribution_free(dist: *mut HconsDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Number of inputs, which is the length expected by [`hcons_verify_bound`].
///
/// # Safety
/// `dist` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcons_distribution_num_inputs(dist: *const HconsDistribution) -> usize {
    dist.as_ref().map_or(0, |d| d.dist.points().len())
}

/// Checks the consistency bound of `surrogate` for the hypothesis whose
/// predictions are `predictions[i]` at the `i`-th input of `dist`. The class
/// bound is the distribution's `B`.
///
/// # Safety
/// Handles must be live, `predictions` must hold `len` values and `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcons_verify_bound(
    dist: *const HconsDistribution,
    class: HconsClass,
    predictions: *const f64,
    len: usize,
    surrogate: *const HconsLoss,
    out: *mut HconsBoundResult,
) -> HconsStatus {
    guard(|| {
        let dist = &ref_arg(dist, "dist")?.dist;
        let surrogate = ref_arg(surrogate, "surrogate")?.kind;
        let out = out_arg(out, "out")?;
        if predictions.is_null() {
            return Err(null("predictions"));
        }
        if len != dist.points().len() {
            return Err(lib(Error::DimensionMismatch {
                expected: dist.points().len(),
                found: len,
                context: Some("predictions".into()),
            }));
        }
        let values = std::slice::from_raw_parts(predictions, len);
        let h = Hypothesis::new(dist.points().iter().map(|p| p.id.clone()).zip(values.iter().copied()));
        let class = match class {
            HconsClass::AllBounded => HypothesisClass::all_bounded(dist.bound(), 101),
            HconsClass::ConstantBounded => HypothesisClass::constant_bounded(dist.bound(), 101),
        }
        .map_err(lib)?;
        let r = verify_bound_instance(dist, &class, &h, surrogate).map_err(lib)?;
        *out = HconsBoundResult {
            lhs: r.lhs,
            rhs: r.rhs,
            slack: r.slack,
            holds: r.holds as i32,
        };
        Ok(())
    })
}

/// Builds and evaluates a negative-result construction; `param` is the Huber
/// delta or the epsilon.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcons_counterexample_assert(
    theorem: HconsNegativeTheorem,
    bound: f64,
    y: f64,
    mu: f64,
    param: f64,
    out: *mut HconsCounterexampleResult,
) -> HconsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let theorem = match theorem {
            HconsNegativeTheorem::Huber => NegativeTheorem::HuberNeg,
            HconsNegativeTheorem::SqEps => NegativeTheorem::SqEpsNeg,
            HconsNegativeTheorem::EpsFar => NegativeTheorem::EpsNegFar,
            HconsNegativeTheorem::EpsNear => NegativeTheorem::EpsNegNear,
        };
        let case = build_counterexample(theorem, CounterexampleParams { bound, y, mu, param }).map_err(lib)?;
        let o = assert_counterexample(&case).map_err(lib)?;
        *out = HconsCounterexampleResult {
            surrogate_err_hbar: o.surrogate_err_hbar,
            surrogate_err_hstar: o.surrogate_err_hstar,
            sq_regret_hbar: o.sq_regret_hbar,
            confirmed: o.confirmed as i32,
        };
        Ok(())
    })
}

/// Copies `m` rows of `d` features (row-major) and `m` labels.
///
/// # Safety
/// `features` must hold `m * d` values, `labels` `m` values, `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hcons_dataset_new(
    features: *const f64,
    labels: *const f64,
    m: usize,
    d: usize,
    out: *mut *mut HconsDataset,
) -> HconsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if features.is_null() || labels.is_null() {
            return Err(null("features or labels"));
        }
        if m == 0 || d == 0 {
            return Err((HconsStatus::InvalidArgument, "m and d must be >= 1".into()));
        }
        let total = m.checked_mul(d).ok_or((HconsStatus::InvalidArgument, "m * d overflows".into()))?;
        let flat = std::slice::from_raw_parts(features, total);
        let rows = flat.chunks(d).map(<[f64]>::to_vec).collect();
        let data = Dataset::new(rows, std::slice::from_raw_parts(labels, m).to_vec()).map_err(lib)?;
        *out = Box::into_raw(Box::new(HconsDataset { data }));
        Ok(())
    })
}

/// Loads a CSV file with a header row and the label in the last column.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcons_dataset_load_csv(path: *const c_char, out: *mut *mut HconsDataset) -> HconsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let data = load_csv_dataset(str_arg(path, "path")?, CsvOptions::default()).map_err(lib)?;
        *out = Box::into_raw(Box::new(HconsDataset { data }));
        Ok(())
    })
}

/// # Safety
/// `data` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcons_dataset_free(data: *mut HconsDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Trains a linear model. Deterministic for identical inputs.
///
/// # Safety
/// Handles and pointers must be valid; `config->loss` must be a live handle
/// for `SmoothAdv`.
#[no_mangle]
pub unsafe extern "C" fn hcons_train(
    data: *const HconsDataset,
    config: *const HconsTrainConfig,
    out: *mut *mut HconsModel,
) -> HconsStatus {
    guard(|| {
        let data = &ref_arg(data, "data")?.data;
        let cfg = ref_arg(config, "config")?;
        let out = out_arg(out, "out")?;
        let norm = norm_of(cfg.norm);
        let objective = match cfg.objective {
            HconsObjective::SmoothAdv => Objective::SmoothAdv(AdvConfig {
                gamma: cfg.gamma,
                norm,
                tau: cfg.tau,
                surrogate: ref_arg(cfg.loss, "config->loss")?.kind,
            }),
            HconsObjective::AdvSq => Objective::AdvSq { gamma: cfg.gamma, norm },
        };
        let solver = SolverConfig {
            max_iters: cfg.max_iters,
            step0: cfg.step0,
            tol: cfg.tol,
            seed: 0,
            projection_bound: (cfg.projection_bound > 0.0).then_some(cfg.projection_bound),
        };
        let r = adversarial::train(&objective, data, &solver).map_err(lib)?;
        *out = Box::into_raw(Box::new(HconsModel {
            model: r.model,
            objective: r.objective,
            iters: r.iters,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcons_model_free(model: *mut HconsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of weights.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcons_model_dim(model: *const HconsModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.dim())
}

/// Copies the weights into `weights[0..len]`, the bias into `bias`, the final
/// objective into `objective` and the iteration count into `iters`. Any of the
/// last three may be NULL.
///
/// # Safety
/// `weights` must hold `len` values; other non-NULL pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hcons_model_params(
    model: *const HconsModel,
    weights: *mut f64,
    len: usize,
    bias: *mut f64,
    objective: *mut f64,
    iters: *mut usize,
) -> HconsStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        if len != m.model.dim() {
            return Err(lib(Error::DimensionMismatch {
                expected: m.model.dim(),
                found: len,
                context: Some("weights buffer".into()),
            }));
        }
        if weights.is_null() {
            return Err(null("weights"));
        }
        std::slice::from_raw_parts_mut(weights, len).copy_from_slice(&m.model.weights);
        if let Some(b) = bias.as_mut() {
            *b = m.model.bias;
        }
        if let Some(o) = objective.as_mut() {
            *o = m.objective;
        }
        if let Some(i) = iters.as_mut() {
            *i = m.iters;
        }
        Ok(())
    })
}

/// Clean and robust mean squared error of `model` on `data`.
///
/// # Safety
/// Handles must be live and the output pointers valid.
#[no_mangle]
pub unsafe extern "C" fn hcons_evaluate(
    model: *const HconsModel,
    data: *const HconsDataset,
    gamma: f64,
    norm: HconsNorm,
    clean_mse: *mut f64,
    robust_mse: *mut f64,
) -> HconsStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let d = ref_arg(data, "data")?;
        let clean = out_arg(clean_mse, "clean_mse")?;
        let robust = out_arg(robust_mse, "robust_mse")?;
        let r = adversarial::evaluate(&m.model, &d.data, gamma, norm_of(norm)).map_err(lib)?;
        *clean = r.clean_mse;
        *robust = r.robust_mse;
        Ok(())
    })
}
