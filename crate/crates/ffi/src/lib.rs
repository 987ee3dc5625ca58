//! C ABI over the core estimators: opaque handles, integer status codes, and
//! a per-thread error message, so the estimators can sit behind C, C++,
//! Python, or R callers without exposing any Rust types.
//!
//! Conventions, mirrored in the generated `include/rosce.h`:
//! - Every fallible call returns a [`RosceStatus`]; `Ok` is zero. On any
//!   other status, [`rosce_last_error_message`] holds a human-readable
//!   reason, valid on the calling thread until its next library call.
//! - Constructors hand back owned handles through an `out` pointer; every
//!   handle has exactly one `_free` function, which tolerates null.
//! - Buffers are caller-allocated; size-query calls take a null buffer and
//!   report the required length instead of writing.
//! - No call unwinds across the boundary: panics are caught and surfaced as
//!   [`RosceStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rosce::basis::{AxisBounds, BasisLevel, BasisSpec, LocationRef, Locations, SpaceDomain};
use rosce::bootstrap::{bootstrap_band, BootstrapOptions, CIBand, Estimator, ResampleSeed};
use rosce::estimator::{fit_direct_ls, fit_rosce, EffectModel};
use rosce::residualize::{fit_residuals, Dataset};
use rosce::Error;

/// Result of every fallible library call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RosceStatus {
    /// The call succeeded.
    Ok = 0,
    /// A pointer was null, a length was zero or mismatched, or an argument
    /// value is outside its documented range.
    InvalidArgument = 1,
    /// The configuration (basis, options) is invalid.
    Config = 2,
    /// The data are invalid: non-finite entries, bad region labels,
    /// too few rows.
    Data = 3,
    /// A location lies outside the declared spatial domain.
    OutOfDomain = 4,
    /// No exposure variation is left, so no effect is identifiable.
    DegenerateExposure = 5,
    /// Some discrete region has no observations.
    MissingRegions = 6,
    /// A numerical routine failed to produce a usable result.
    Numerical = 7,
    /// An internal invariant was violated; the handle states are unchanged.
    Panic = 8,
}

/// Fit the orthogonalized robust estimator (`method` argument value).
pub const ROSCE_METHOD_ROBUST: u32 = 0;
/// Fit the direct joint least-squares baseline (`method` argument value).
pub const ROSCE_METHOD_DIRECT_LS: u32 = 1;

/// A loaded outcome/exposure/location sample.
pub struct RosceDataset {
    inner: Dataset,
}

/// A spatial basis configuration.
pub struct RosceBasis {
    inner: BasisSpec,
}

/// A fitted effect surface.
pub struct RosceModel {
    inner: EffectModel,
}

/// A pointwise bootstrap confidence band on a query grid.
pub struct RosceBand {
    inner: CIBand,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: Vec<u8> = message.bytes().map(|b| if b == 0 { b' ' } else { b }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("nul bytes were stripped");
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::default());
}

fn status_of(err: &Error) -> RosceStatus {
    match err {
        Error::Config(_) => RosceStatus::Config,
        Error::Data(_) => RosceStatus::Data,
        Error::OutOfDomain(_) => RosceStatus::OutOfDomain,
        Error::DegenerateExposure(_) => RosceStatus::DegenerateExposure,
        Error::MissingRegions(_) => RosceStatus::MissingRegions,
        Error::Numerical(_) => RosceStatus::Numerical,
    }
}

fn fail(err: &Error) -> RosceStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn invalid(message: &str) -> RosceStatus {
    set_error(message);
    RosceStatus::InvalidArgument
}

/// Run an FFI body with the error slot cleared and panics contained.
fn guarded(body: impl FnOnce() -> RosceStatus) -> RosceStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| (*s).to_string()))
                .unwrap_or_else(|| "internal panic".into());
            set_error(&message);
            RosceStatus::Panic
        }
    }
}

/// Read a slice out of a raw pointer, or fail with a named argument.
///
/// # Safety
/// `ptr` must point to `len` readable elements when non-null.
unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], RosceStatus> {
    if ptr.is_null() {
        return Err(invalid(&format!("{name} must not be null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn handle_arg<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, RosceStatus> {
    if ptr.is_null() {
        return Err(invalid(&format!("{name} must not be null")));
    }
    Ok(&*ptr)
}

/// The library version as a static, nul-terminated string.
#[no_mangle]
pub extern "C" fn rosce_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message describing the most recent failure on this thread, or an empty
/// string after a success. The pointer stays valid until this thread's next
/// library call.
#[no_mangle]
pub extern "C" fn rosce_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Build a dataset over continuous locations. `coords` holds `n * dim`
/// values, row-major (all coordinates of point 0, then point 1, ...).
///
/// # Safety
/// `y` and `z` must point to `n` readable doubles, `coords` to `n * dim`;
/// `out` must be a valid destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rosce_dataset_new_continuous(
    y: *const f64,
    z: *const f64,
    coords: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut RosceDataset,
) -> RosceStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("out must not be null");
        }
        if n == 0 || dim == 0 {
            return invalid("n and dim must be positive");
        }
        let (y, z, coords) = match (|| {
            Ok((
                slice_arg(y, n, "y")?.to_vec(),
                slice_arg(z, n, "z")?.to_vec(),
                slice_arg(coords, n * dim, "coords")?.to_vec(),
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        let locations = match Locations::continuous(dim, coords) {
            Ok(l) => l,
            Err(e) => return fail(&e),
        };
        match Dataset::new(y, z, locations) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RosceDataset { inner }));
                RosceStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Build a dataset over `d` discrete regions; `regions` holds `n` 1-based
/// labels in `1..=d`.
///
/// # Safety
/// `y` and `z` must point to `n` readable doubles, `regions` to `n` readable
/// `uint32_t`; `out` must be a valid destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rosce_dataset_new_discrete(
    y: *const f64,
    z: *const f64,
    regions: *const u32,
    n: usize,
    d: u32,
    out: *mut *mut RosceDataset,
) -> RosceStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("out must not be null");
        }
        if n == 0 || d == 0 {
            return invalid("n and d must be positive");
        }
        let (y, z, labels) = match (|| {
            Ok((
                slice_arg(y, n, "y")?.to_vec(),
                slice_arg(z, n, "z")?.to_vec(),
                slice_arg(regions, n, "regions")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        let labels: Vec<usize> = labels.iter().map(|&r| r as usize).collect();
        let locations = match Locations::discrete(d as usize, labels) {
            Ok(l) => l,
            Err(e) => return fail(&e),
        };
        match Dataset::new(y, z, locations) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RosceDataset { inner }));
                RosceStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a dataset handle. Null is a no-op.
///
/// # Safety
/// `dataset` must be null or a pointer obtained from a dataset constructor
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn rosce_dataset_free(dataset: *mut RosceDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Build a multi-resolution spline basis over a continuous box domain.
/// `lower`/`upper` hold `dim` bounds per axis; level `k` contributes
/// `n_components[k]^dim` components whose supports span
/// `support_fractions[k]` of each axis range.
///
/// # Safety
/// `lower` and `upper` must point to `dim` readable doubles,
/// `n_components` and `support_fractions` to `n_levels` readable elements;
/// `out` must be a valid destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rosce_basis_new_continuous(
    lower: *const f64,
    upper: *const f64,
    dim: usize,
    n_components: *const usize,
    support_fractions: *const f64,
    n_levels: usize,
    out: *mut *mut RosceBasis,
) -> RosceStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("out must not be null");
        }
        if dim == 0 || n_levels == 0 {
            return invalid("dim and n_levels must be positive");
        }
        let (lower, upper, counts, fractions) = match (|| {
            Ok((
                slice_arg(lower, dim, "lower")?,
                slice_arg(upper, dim, "upper")?,
                slice_arg(n_components, n_levels, "n_components")?,
                slice_arg(support_fractions, n_levels, "support_fractions")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        let bounds = match lower
            .iter()
            .zip(upper)
            .map(|(&lo, &hi)| AxisBounds::new(lo, hi))
            .collect::<Result<Vec<_>, _>>()
        {
            Ok(b) => b,
            Err(e) => return fail(&e),
        };
        let domain = match SpaceDomain::continuous(bounds) {
            Ok(d) => d,
            Err(e) => return fail(&e),
        };
        let levels = counts
            .iter()
            .zip(fractions)
            .map(|(&n_components, &support_fraction)| BasisLevel {
                n_components,
                support_fraction,
            })
            .collect();
        match BasisSpec::continuous(domain, levels) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RosceBasis { inner }));
                RosceStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Build the indicator basis over `d` discrete regions.
///
/// # Safety
/// `out` must be a valid destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rosce_basis_new_discrete(
    d: u32,
    out: *mut *mut RosceBasis,
) -> RosceStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("out must not be null");
        }
        match BasisSpec::discrete(d as usize) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RosceBasis { inner }));
                RosceStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a basis handle. Null is a no-op.
///
/// # Safety
/// `basis` must be null or a pointer obtained from a basis constructor that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn rosce_basis_free(basis: *mut RosceBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Fit an effect surface. `method` is one of the `ROSCE_METHOD_*` constants:
/// the robust pipeline residualizes outcome and exposure against the basis
/// before the penalized effect regression, while the direct baseline runs
/// joint least squares on the raw data.
///
/// # Safety
/// `dataset` and `basis` must be live handles; `out` must be a valid
/// destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rosce_fit(
    dataset: *const RosceDataset,
    basis: *const RosceBasis,
    method: u32,
    out: *mut *mut RosceModel,
) -> RosceStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("out must not be null");
        }
        let (dataset, basis) = match (|| {
            Ok((handle_arg(dataset, "dataset")?, handle_arg(basis, "basis")?))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        let fitted = match method {
            ROSCE_METHOD_ROBUST => fit_residuals(&dataset.inner, &basis.inner)
                .and_then(|resid| fit_rosce(&resid, &dataset.inner.locations, &basis.inner)),
            ROSCE_METHOD_DIRECT_LS => fit_direct_ls(&dataset.inner, &basis.inner),
            other => return invalid(&format!("unknown method code {other}")),
        };
        match fitted {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RosceModel { inner }));
                RosceStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Evaluate a fitted effect at a continuous location with `dim` coordinates.
///
/// # Safety
/// `model` must be a live handle, `coords` must point to `dim` readable
/// doubles, and `out` must be a valid destination for one double.
#[no_mangle]
pub unsafe extern "C" fn rosce_model_effect_at(
    model: *const RosceModel,
    coords: *const f64,
    dim: usize,
    out: *mut f64,
) -> RosceStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("out must not be null");
        }
        let (model, coords) = match (|| {
            Ok((handle_arg(model, "model")?, slice_arg(coords, dim, "coords")?))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        match model.inner.effect_at(LocationRef::Continuous(coords)) {
            Ok(value) => {
                *out = value;
                RosceStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Evaluate a fitted effect in a 1-based discrete region.
///
/// # Safety
/// `model` must be a live handle and `out` a valid destination for one
/// double.
#[no_mangle]
pub unsafe extern "C" fn rosce_model_effect_in_region(
    model: *const RosceModel,
    region: u32,
    out: *mut f64,
) -> RosceStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("out must not be null");
        }
        let model = match handle_arg(model, "model") {
            Ok(m) => m,
            Err(status) => return status,
        };
        match model.inner.effect_at(LocationRef::Discrete(region as usize)) {
            Ok(value) => {
                *out = value;
                RosceStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Copy the model's basis coefficients. With a null `buffer` the call only
/// reports the coefficient count through `written`; otherwise `capacity`
/// must be at least that count.
///
/// # Safety
/// `model` must be a live handle, `written` a valid destination for one
/// `size_t`, and `buffer` null or pointing to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rosce_model_coefficients(
    model: *const RosceModel,
    buffer: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> RosceStatus {
    guarded(|| {
        if written.is_null() {
            return invalid("written must not be null");
        }
        let model = match handle_arg(model, "model") {
            Ok(m) => m,
            Err(status) => return status,
        };
        let theta = &model.inner.theta;
        *written = theta.len();
        if buffer.is_null() {
            return RosceStatus::Ok;
        }
        if capacity < theta.len() {
            return invalid(&format!(
                "buffer holds {capacity} values, the model has {} coefficients",
                theta.len()
            ));
        }
        std::slice::from_raw_parts_mut(buffer, theta.len()).copy_from_slice(theta);
        RosceStatus::Ok
    })
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be null or a pointer obtained from `rosce_fit` that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn rosce_model_free(model: *mut RosceModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Fit a pointwise pivotal bootstrap confidence band with `replicates`
/// resamples (at least 100) at miscoverage `alpha`. On a continuous domain
/// the band is evaluated on a regular grid with `grid_points_per_axis`
/// points per axis over the basis domain; on a discrete domain it covers
/// every region and `grid_points_per_axis` is ignored. `refit_nuisance`
/// refits the residualization inside every replicate (nonzero) or reuses
/// the full-sample nuisance coefficients (zero).
///
/// # Safety
/// `dataset` and `basis` must be live handles; `out` must be a valid
/// destination for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rosce_band_fit(
    dataset: *const RosceDataset,
    basis: *const RosceBasis,
    method: u32,
    replicates: usize,
    alpha: f64,
    seed: u64,
    refit_nuisance: bool,
    grid_points_per_axis: usize,
    out: *mut *mut RosceBand,
) -> RosceStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("out must not be null");
        }
        let (dataset, basis) = match (|| {
            Ok((handle_arg(dataset, "dataset")?, handle_arg(basis, "basis")?))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        let estimator = match method {
            ROSCE_METHOD_ROBUST => Estimator::Rosce,
            ROSCE_METHOD_DIRECT_LS => Estimator::Ls,
            other => return invalid(&format!("unknown method code {other}")),
        };
        let grid = match basis.inner.domain() {
            SpaceDomain::Continuous { bounds } => {
                if grid_points_per_axis < 2 {
                    return invalid("grid_points_per_axis must be at least 2");
                }
                match Locations::grid(bounds, grid_points_per_axis) {
                    Ok(g) => g,
                    Err(e) => return fail(&e),
                }
            }
            SpaceDomain::Discrete { d } => match Locations::all_regions(*d) {
                Ok(g) => g,
                Err(e) => return fail(&e),
            },
        };
        let options = BootstrapOptions {
            replicates,
            alpha,
            seed: ResampleSeed { seed },
            refit_nuisance,
            estimator,
            ..BootstrapOptions::default()
        };
        match bootstrap_band(&dataset.inner, &basis.inner, &grid, &options) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RosceBand { inner }));
                RosceStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of grid points a band was evaluated on (zero for a null handle).
///
/// # Safety
/// `band` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rosce_band_len(band: *const RosceBand) -> usize {
    if band.is_null() {
        return 0;
    }
    (*band).inner.grid.len()
}

/// Values per grid point written by `rosce_band_grid`: the coordinate count
/// on a continuous domain, 1 on a discrete one (zero for a null handle).
///
/// # Safety
/// `band` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rosce_band_grid_dim(band: *const RosceBand) -> usize {
    if band.is_null() {
        return 0;
    }
    match &(*band).inner.grid {
        Locations::Continuous { dim, .. } => *dim,
        Locations::Discrete { .. } => 1,
    }
}

/// Copy the band's grid, row-major: continuous coordinates, or 1-based
/// region labels as doubles. Requires `capacity >= len * grid_dim`.
///
/// # Safety
/// `band` must be a live handle and `buffer` must point to `capacity`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rosce_band_grid(
    band: *const RosceBand,
    buffer: *mut f64,
    capacity: usize,
) -> RosceStatus {
    guarded(|| {
        let band = match handle_arg(band, "band") {
            Ok(b) => b,
            Err(status) => return status,
        };
        if buffer.is_null() {
            return invalid("buffer must not be null");
        }
        let values: Vec<f64> = match &band.inner.grid {
            Locations::Continuous { coords, .. } => coords.clone(),
            Locations::Discrete { regions, .. } => {
                regions.iter().map(|&r| r as f64).collect()
            }
        };
        if capacity < values.len() {
            return invalid(&format!(
                "buffer holds {capacity} values, the grid needs {}",
                values.len()
            ));
        }
        std::slice::from_raw_parts_mut(buffer, values.len()).copy_from_slice(&values);
        RosceStatus::Ok
    })
}

/// Copy the band's point estimates and interval endpoints. Each non-null
/// buffer receives `len` values; requires `capacity >= len`.
///
/// # Safety
/// `band` must be a live handle; each of `point`, `lower`, `upper` must be
/// null or point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rosce_band_values(
    band: *const RosceBand,
    point: *mut f64,
    lower: *mut f64,
    upper: *mut f64,
    capacity: usize,
) -> RosceStatus {
    guarded(|| {
        let band = match handle_arg(band, "band") {
            Ok(b) => b,
            Err(status) => return status,
        };
        let len = band.inner.grid.len();
        for (buffer, values) in [
            (point, &band.inner.point),
            (lower, &band.inner.lower),
            (upper, &band.inner.upper),
        ] {
            if buffer.is_null() {
                continue;
            }
            if capacity < len {
                return invalid(&format!(
                    "buffer holds {capacity} values, the band has {len}"
                ));
            }
            std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(values);
        }
        RosceStatus::Ok
    })
}

/// Release a band handle. Null is a no-op.
///
/// # Safety
/// `band` must be null or a pointer obtained from `rosce_band_fit` that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn rosce_band_free(band: *mut RosceBand) {
    if !band.is_null() {
        drop(Box::from_raw(band));
    }
}
