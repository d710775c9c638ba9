//! C ABI over `graph_saliency`.
//!
//! Models, graphs and saliency maps are opaque heap handles owned by the
//! caller and released with the matching `*_free` function. Every entry point
//! returns a [`GsStatus`]; on failure [`gs_last_error_message`] describes the
//! error for the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use graph_saliency::io::{find_record, load_model, save_saliency};
use graph_saliency::metrics::{infidelity, sparsity, MetricConfig};
use graph_saliency::{explain_class, with_workers, Error, Graph, Matrix, ModelSpec, SaliencyGraph};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    NotFound = 5,
    Dimension = 6,
    Numeric = 7,
    Panic = 8,
}

pub struct GsModel {
    inner: ModelSpec,
}

pub struct GsGraph {
    inner: Graph,
}

pub struct GsSaliency {
    inner: SaliencyGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GsStatus {
    match e.root() {
        Error::Dimension { .. } => GsStatus::Dimension,
        Error::Domain(_) | Error::Config(_) => GsStatus::InvalidArgument,
        Error::Numeric(_) => GsStatus::Numeric,
        Error::Format { .. } => GsStatus::Format,
        Error::NotFound(_) => GsStatus::NotFound,
        Error::Io(_) => GsStatus::Io,
        Error::Layer { .. } | Error::Channel { .. } => GsStatus::InvalidArgument,
    }
}

struct Fail(GsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(GsStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            GsStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn as_out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn as_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn copy_out(src: &[f64], buf: *mut f64, len: usize, what: &str) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null(what));
    }
    if len != src.len() {
        return Err(Fail(
            GsStatus::Dimension,
            format!("{what} has length {len}, expected {}", src.len()),
        ));
    }
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, len) };
    Ok(())
}

fn workers_opt(workers: usize) -> Option<usize> {
    (workers > 0).then_some(workers)
}

/// Message for the last failed call on this thread, or NULL if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a model JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_model_load(path: *const c_char, out: *mut *mut GsModel) -> GsStatus {
    guard(|| {
        let out = unsafe { as_out(out, "out")? };
        let path = unsafe { as_str(path, "path")? };
        let inner = load_model(path)?;
        *out = Box::into_raw(Box::new(GsModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`gs_model_load`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn gs_model_free(model: *mut GsModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_model_num_classes(model: *const GsModel, out: *mut usize) -> GsStatus {
    guard(|| {
        *unsafe { as_out(out, "out")? } = unsafe { as_ref(model, "model")? }.inner.num_classes;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_model_input_dim(model: *const GsModel, out: *mut usize) -> GsStatus {
    guard(|| {
        *unsafe { as_out(out, "out")? } = unsafe { as_ref(model, "model")? }.inner.input_dim();
        Ok(())
    })
}

/// Builds a graph from row-major `features` (`num_nodes * num_features`) and
/// a binary row-major `adjacency` (`num_nodes * num_nodes`).
///
/// # Safety
/// Both arrays must hold the stated number of doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_new(
    num_nodes: usize,
    num_features: usize,
    features: *const f64,
    adjacency: *const f64,
    out: *mut *mut GsGraph,
) -> GsStatus {
    guard(|| {
        let out = unsafe { as_out(out, "out")? };
        let nf = num_nodes
            .checked_mul(num_features)
            .ok_or_else(|| invalid("num_nodes * num_features overflows"))?;
        let nn = num_nodes
            .checked_mul(num_nodes)
            .ok_or_else(|| invalid("num_nodes * num_nodes overflows"))?;
        let x = unsafe { as_slice(features, nf, "features")? };
        let a = unsafe { as_slice(adjacency, nn, "adjacency")? };
        let inner = Graph::new(
            Matrix::from_vec(num_nodes, num_features, x.to_vec())?,
            Matrix::from_vec(num_nodes, num_nodes, a.to_vec())?,
        )?;
        *out = Box::into_raw(Box::new(GsGraph { inner }));
        Ok(())
    })
}

/// Loads the record with `graph_id` from a JSON-lines dataset.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_load(
    dataset_path: *const c_char,
    graph_id: *const c_char,
    out: *mut *mut GsGraph,
) -> GsStatus {
    guard(|| {
        let out = unsafe { as_out(out, "out")? };
        let path = unsafe { as_str(dataset_path, "dataset_path")? };
        let id = unsafe { as_str(graph_id, "graph_id")? };
        let inner = find_record(path, id)?.to_graph()?;
        *out = Box::into_raw(Box::new(GsGraph { inner }));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from a `gs_graph_*` constructor or be NULL.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_free(graph: *mut GsGraph) {
    if !graph.is_null() {
        drop(unsafe { Box::from_raw(graph) });
    }
}

/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_graph_num_nodes(graph: *const GsGraph, out: *mut usize) -> GsStatus {
    guard(|| {
        *unsafe { as_out(out, "out")? } = unsafe { as_ref(graph, "graph")? }.inner.num_nodes();
        Ok(())
    })
}

/// Runs the classifier. `logits` must hold exactly `num_classes` doubles;
/// `class_out` may be NULL.
///
/// # Safety
/// Handles must be live; buffers must be writable for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn gs_forward(
    model: *const GsModel,
    graph: *const GsGraph,
    logits: *mut f64,
    logits_len: usize,
    class_out: *mut usize,
) -> GsStatus {
    guard(|| {
        let m = unsafe { as_ref(model, "model")? };
        let g = unsafe { as_ref(graph, "graph")? };
        let r = m.inner.forward(&g.inner)?;
        copy_out(&r.logits, logits, logits_len, "logits")?;
        if let Some(c) = unsafe { class_out.as_mut() } {
            *c = r.predicted_class();
        }
        Ok(())
    })
}

/// Computes a saliency map for `target_class`, or the predicted class when
/// it is negative. `workers == 0` uses every available core; the result does
/// not depend on the worker count.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_explain(
    model: *const GsModel,
    graph: *const GsGraph,
    target_class: i64,
    workers: usize,
    out: *mut *mut GsSaliency,
) -> GsStatus {
    guard(|| {
        let out = unsafe { as_out(out, "out")? };
        let m = unsafe { as_ref(model, "model")? };
        let g = unsafe { as_ref(graph, "graph")? };
        let target = if target_class < 0 {
            None
        } else {
            Some(usize::try_from(target_class).map_err(|_| invalid("target_class too large"))?)
        };
        let inner = with_workers(workers_opt(workers), || explain_class(&g.inner, &m.inner, target))??;
        *out = Box::into_raw(Box::new(GsSaliency { inner }));
        Ok(())
    })
}

/// # Safety
/// `saliency` must come from [`gs_explain`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn gs_saliency_free(saliency: *mut GsSaliency) {
    if !saliency.is_null() {
        drop(unsafe { Box::from_raw(saliency) });
    }
}

/// # Safety
/// `saliency` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_saliency_num_nodes(saliency: *const GsSaliency, out: *mut usize) -> GsStatus {
    guard(|| {
        *unsafe { as_out(out, "out")? } = unsafe { as_ref(saliency, "saliency")? }.inner.saliency.len();
        Ok(())
    })
}

/// # Safety
/// `saliency` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_saliency_num_channels(saliency: *const GsSaliency, out: *mut usize) -> GsStatus {
    guard(|| {
        *unsafe { as_out(out, "out")? } = unsafe { as_ref(saliency, "saliency")? }.inner.channel_weights.u.len();
        Ok(())
    })
}

/// # Safety
/// `saliency` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_saliency_class(saliency: *const GsSaliency, out: *mut usize) -> GsStatus {
    guard(|| {
        *unsafe { as_out(out, "out")? } = unsafe { as_ref(saliency, "saliency")? }.inner.class_index();
        Ok(())
    })
}

/// Copies the per-node saliency into `buf`, which must hold exactly
/// `num_nodes` doubles.
///
/// # Safety
/// `saliency` must be a live handle; `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_saliency_values(saliency: *const GsSaliency, buf: *mut f64, len: usize) -> GsStatus {
    guard(|| copy_out(&unsafe { as_ref(saliency, "saliency")? }.inner.saliency, buf, len, "buf"))
}

/// Copies the channel weights into `buf`, which must hold exactly
/// `num_channels` doubles.
///
/// # Safety
/// `saliency` must be a live handle; `buf` must be writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gs_saliency_channel_weights(
    saliency: *const GsSaliency,
    buf: *mut f64,
    len: usize,
) -> GsStatus {
    guard(|| copy_out(&unsafe { as_ref(saliency, "saliency")? }.inner.channel_weights.u, buf, len, "buf"))
}

/// Writes the saliency JSON file.
///
/// # Safety
/// `saliency` must be a live handle; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gs_saliency_save(saliency: *const GsSaliency, path: *const c_char) -> GsStatus {
    guard(|| {
        let s = unsafe { as_ref(saliency, "saliency")? };
        save_saliency(&s.inner, unsafe { as_str(path, "path")? })?;
        Ok(())
    })
}

/// Sparsity of a saliency vector, in `[0, 1]`.
///
/// # Safety
/// `values` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_sparsity(values: *const f64, len: usize, out: *mut f64) -> GsStatus {
    guard(|| {
        let out = unsafe { as_out(out, "out")? };
        *out = sparsity(unsafe { as_slice(values, len, "values")? })?;
        Ok(())
    })
}

/// Monte-Carlo infidelity of `saliency` for `graph` under `model`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gs_infidelity(
    model: *const GsModel,
    graph: *const GsGraph,
    saliency: *const GsSaliency,
    sigma: f64,
    num_samples: usize,
    seed: u64,
    out: *mut f64,
) -> GsStatus {
    guard(|| {
        let out = unsafe { as_out(out, "out")? };
        let m = unsafe { as_ref(model, "model")? };
        let g = unsafe { as_ref(graph, "graph")? };
        let s = unsafe { as_ref(saliency, "saliency")? };
        let cfg = MetricConfig {
            perturbation_sigma: sigma,
            num_samples,
            rng_seed: seed,
            ..Default::default()
        };
        *out = infidelity(&g.inner, &m.inner, &s.inner, &cfg)?;
        Ok(())
    })
}
