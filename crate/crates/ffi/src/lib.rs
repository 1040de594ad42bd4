//! C ABI over the `rdsos` library.
//!
//! Networks and partitions are opaque heap handles released with their
//! `*_free` function. Every fallible call returns an [`RdsosStatus`]; on a
//! non-zero status the thread's last error message is available from
//! [`rdsos_last_error_message`]. Labels crossing the boundary are
//! zero-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rdsos::generators::sample;
use rdsos::io::{load_multilayer_edgelist, IngestOptions};
use rdsos::kmeans::KmeansOptions;
use rdsos::metrics::clustering_error;
use rdsos::modularity::{estimate_k, ModularityMetric};
use rdsos::oracle::{example_mldcsbm, example_mlsbm};
use rdsos::{detect, DetectOptions, Error, MethodId, MultiLayerNetwork, Partition, TauSpec};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RdsosStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RdsosExample {
    Mlsbm = 0,
    Mldcsbm = 1,
}

/// Opaque multi-layer network.
pub struct RdsosNetwork(MultiLayerNetwork);

/// Opaque community assignment.
pub struct RdsosPartition(Partition);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> RdsosStatus {
    match err {
        Error::Parse { .. } | Error::Range { .. } | Error::EmptyInput | Error::Json(_) | Error::Csv(_) => {
            RdsosStatus::Parse
        }
        Error::Io(_) => RdsosStatus::Io,
        Error::SingularDegree { .. } | Error::NotSymmetric { .. } | Error::EigenResidual { .. } => {
            RdsosStatus::Numerical
        }
        _ => RdsosStatus::InvalidArgument,
    }
}

struct Failure(RdsosStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RdsosStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(RdsosStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RdsosStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RdsosStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            RdsosStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<T>(p: *mut T, what: &str) -> Result<&'static mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn detect_options(tau: f64, restarts: usize) -> DetectOptions {
    DetectOptions {
        tau: if tau.is_nan() || tau < 0.0 { TauSpec::Auto } else { TauSpec::Value(tau) },
        kmeans: KmeansOptions {
            restarts: if restarts == 0 { KmeansOptions::default().restarts } else { restarts },
            ..KmeansOptions::default()
        },
        ..DetectOptions::default()
    }
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn rdsos_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a `layer <sep> src <sep> dst` edge list with string node names.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_network` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rdsos_network_load(
    path: *const c_char,
    separator: c_char,
    out_network: *mut *mut RdsosNetwork,
) -> RdsosStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let slot = out(out_network, "out_network")?;
        let sep = separator as u8;
        if !sep.is_ascii() || sep == 0 {
            return Err(invalid("separator must be a non-NUL ASCII character"));
        }
        let file = File::open(path).map_err(|e| Failure(RdsosStatus::Io, format!("{path}: {e}")))?;
        let opts = IngestOptions {
            separator: sep as char,
            ..IngestOptions::default()
        };
        let net = load_multilayer_edgelist(BufReader::new(file), &opts)?;
        *slot = Box::into_raw(Box::new(RdsosNetwork(net)));
        Ok(())
    })
}

/// Builds a network from `m` zero-based edge records `(layer[e], src[e], dst[e])`
/// over `n` nodes and `layers` layers.
///
/// # Safety
/// The three arrays must each hold `m` elements.
#[no_mangle]
pub unsafe extern "C" fn rdsos_network_from_edges(
    n: usize,
    layers: usize,
    layer: *const usize,
    src: *const usize,
    dst: *const usize,
    m: usize,
    out_network: *mut *mut RdsosNetwork,
) -> RdsosStatus {
    guard(|| {
        let slot = out(out_network, "out_network")?;
        if m > 0 && (layer.is_null() || src.is_null() || dst.is_null()) {
            return Err(null("edge array"));
        }
        let mut lists = vec![Vec::new(); layers];
        for e in 0..m {
            let l = *layer.add(e);
            let list = lists
                .get_mut(l)
                .ok_or_else(|| invalid(format!("edge {e}: layer {l} out of range")))?;
            list.push((*src.add(e), *dst.add(e)));
        }
        let net = MultiLayerNetwork::from_edge_lists(n, &lists)?;
        *slot = Box::into_raw(Box::new(RdsosNetwork(net)));
        Ok(())
    })
}

/// Samples the built-in 20-node, 3-layer example model.
///
/// # Safety
/// Both out pointers must be valid; `out_truth` may be null.
#[no_mangle]
pub unsafe extern "C" fn rdsos_generate_example(
    model: RdsosExample,
    seed: u64,
    out_network: *mut *mut RdsosNetwork,
    out_truth: *mut *mut RdsosPartition,
) -> RdsosStatus {
    guard(|| {
        let slot = out(out_network, "out_network")?;
        let params = match model {
            RdsosExample::Mlsbm => example_mlsbm(),
            RdsosExample::Mldcsbm => example_mldcsbm(),
        };
        let (net, truth) = sample(&params, seed)?;
        *slot = Box::into_raw(Box::new(RdsosNetwork(net)));
        if let Some(t) = out_truth.as_mut() {
            *t = Box::into_raw(Box::new(RdsosPartition(truth)));
        }
        Ok(())
    })
}

/// # Safety
/// `network` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rdsos_network_node_count(network: *const RdsosNetwork) -> usize {
    network.as_ref().map_or(0, |n| n.0.node_count())
}

/// # Safety
/// `network` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rdsos_network_layer_count(network: *const RdsosNetwork) -> usize {
    network.as_ref().map_or(0, |n| n.0.layer_count())
}

/// # Safety
/// `network` must be null or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rdsos_network_free(network: *mut RdsosNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Splits the network into `k` communities. `method` is a method name such
/// as `"rdsos"` or `"DC-RDSoS"`. A negative or NaN `tau` selects the
/// default regularizer; `restarts == 0` selects the default restart count.
///
/// # Safety
/// `network` must be a live handle, `method` NUL-terminated and
/// `out_partition` valid.
#[no_mangle]
pub unsafe extern "C" fn rdsos_detect(
    network: *const RdsosNetwork,
    k: usize,
    method: *const c_char,
    tau: f64,
    seed: u64,
    restarts: usize,
    out_partition: *mut *mut RdsosPartition,
) -> RdsosStatus {
    guard(|| {
        let net = handle(network, "network")?;
        let method: MethodId = str_arg(method, "method")?.parse()?;
        let slot = out(out_partition, "out_partition")?;
        let det = detect(&net.0, k, method, &detect_options(tau, restarts), seed)?;
        *slot = Box::into_raw(Box::new(RdsosPartition(det.partition)));
        Ok(())
    })
}

/// Scans k = 1..=kmax and writes the modularity-maximizing k. `metric` is
/// `"sos"` or `"mnavrg"`.
///
/// # Safety
/// `network` must be a live handle, strings NUL-terminated, `out_k` valid;
/// `out_q` may be null.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rdsos_estimate_k(
    network: *const RdsosNetwork,
    method: *const c_char,
    metric: *const c_char,
    kmax: usize,
    tau: f64,
    seed: u64,
    restarts: usize,
    out_k: *mut usize,
    out_q: *mut f64,
) -> RdsosStatus {
    guard(|| {
        let net = handle(network, "network")?;
        let method: MethodId = str_arg(method, "method")?.parse()?;
        let metric: ModularityMetric = str_arg(metric, "metric")?.parse()?;
        let k_slot = out(out_k, "out_k")?;
        let curve = estimate_k(&net.0, method, metric, kmax, &detect_options(tau, restarts), seed)?;
        *k_slot = curve.best_k;
        if let Some(q) = out_q.as_mut() {
            *q = curve.best_q;
        }
        Ok(())
    })
}

/// Builds a partition from `n` zero-based labels; K is the largest label plus one.
///
/// # Safety
/// `labels` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn rdsos_partition_from_labels(
    labels: *const usize,
    n: usize,
    out_partition: *mut *mut RdsosPartition,
) -> RdsosStatus {
    guard(|| {
        let slot = out(out_partition, "out_partition")?;
        if n > 0 && labels.is_null() {
            return Err(null("labels"));
        }
        let labels = if n == 0 { Vec::new() } else { std::slice::from_raw_parts(labels, n).to_vec() };
        *slot = Box::into_raw(Box::new(RdsosPartition(Partition::from_labels(labels))));
        Ok(())
    })
}

/// # Safety
/// `partition` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rdsos_partition_len(partition: *const RdsosPartition) -> usize {
    partition.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `partition` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rdsos_partition_k(partition: *const RdsosPartition) -> usize {
    partition.as_ref().map_or(0, |p| p.0.k())
}

/// Copies the zero-based labels into `buf`, which must hold at least
/// `rdsos_partition_len` elements.
///
/// # Safety
/// `buf` must be writable for `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn rdsos_partition_labels(
    partition: *const RdsosPartition,
    buf: *mut usize,
    capacity: usize,
) -> RdsosStatus {
    guard(|| {
        let p = handle(partition, "partition")?;
        let labels = p.0.labels();
        if capacity < labels.len() {
            return Err(invalid(format!("buffer holds {capacity} labels, need {}", labels.len())));
        }
        if !labels.is_empty() {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(labels.as_ptr(), buf, labels.len());
        }
        Ok(())
    })
}

/// Clustering error of `estimate` against `truth`.
///
/// # Safety
/// Both handles must be live and `out_error` valid.
#[no_mangle]
pub unsafe extern "C" fn rdsos_clustering_error(
    truth: *const RdsosPartition,
    estimate: *const RdsosPartition,
    out_error: *mut f64,
) -> RdsosStatus {
    guard(|| {
        let t = handle(truth, "truth")?;
        let e = handle(estimate, "estimate")?;
        let slot = out(out_error, "out_error")?;
        *slot = clustering_error(&t.0, &e.0)?;
        Ok(())
    })
}

/// # Safety
/// `partition` must be null or an unfreed handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rdsos_partition_free(partition: *mut RdsosPartition) {
    if !partition.is_null() {
        drop(Box::from_raw(partition));
    }
}
