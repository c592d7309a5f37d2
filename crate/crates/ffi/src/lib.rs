//! C interface to `makeup-core`.
//!
//! Every fallible call returns a [`MakeupStatus`]; on failure the message is
//! kept per thread and read back with [`makeup_last_error`]. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `*_free`. Images are tightly packed 8-bit RGB, row-major; masks are one
//! byte per pixel (nonzero = inside); feature maps are `H×W×C` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use image::RgbImage;
use makeup_core::attention::{sow_attention, AttentionParams};
use makeup_core::geometry::{alignment_grid, bilinear_sample, tps_solve, LandmarkSet, Point, TpsTransform};
use makeup_core::imaging::{rgb_to_tensor, tensor_to_rgb};
use makeup_core::mask::Mask;
use makeup_core::pgt::histogram_match;
use makeup_core::{Error, Tensor};
use rand::SeedableRng;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MakeupStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    Capability = 3,
    DegenerateControls = 4,
    DegenerateEmbedding = 5,
    Contract = 6,
    Config = 7,
    EmptyRegion = 8,
    Domain = 9,
    Landmarks = 10,
    Io = 11,
    Format = 12,
    Panic = 13,
}

impl From<&Error> for MakeupStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension(_) => MakeupStatus::Dimension,
            Error::Capability(_) => MakeupStatus::Capability,
            Error::DegenerateControls(_) => MakeupStatus::DegenerateControls,
            Error::DegenerateEmbedding(_) => MakeupStatus::DegenerateEmbedding,
            Error::Contract(_) => MakeupStatus::Contract,
            Error::Config(_) => MakeupStatus::Config,
            Error::EmptyRegion(_) => MakeupStatus::EmptyRegion,
            Error::Domain(_) => MakeupStatus::Domain,
            Error::Landmarks(_) => MakeupStatus::Landmarks,
            Error::Io { .. } => MakeupStatus::Io,
            Error::Format { .. } => MakeupStatus::Format,
        }
    }
}

/// Landmarks in pixel coordinates of a `width × height` image.
pub struct MakeupLandmarks(LandmarkSet);

/// Thin-plate spline mapping source controls onto target controls.
pub struct MakeupTps(TpsTransform);

/// Q, K, V projections for landmark-embedded attention.
pub struct MakeupAttention(AttentionParams);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MakeupStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(MakeupStatus::from(&e), e.to_string())
    }
}

type Out<T> = std::result::Result<T, Failure>;

fn null(what: &str) -> Failure {
    Failure(MakeupStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Out<()>) -> MakeupStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MakeupStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            MakeupStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Out<&'a [T]> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Out<&'a mut [T]> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Out<&'a T> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Out<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn rgb(data: &[u8], width: usize, height: usize) -> Out<RgbImage> {
    RgbImage::from_raw(width as u32, height as u32, data.to_vec())
        .ok_or_else(|| Failure(MakeupStatus::Dimension, "image buffer is too small".into()))
}

fn mask(data: &[u8], width: usize, height: usize) -> Out<Mask> {
    Ok(Mask::new(width, height, data.iter().map(|&b| b != 0).collect())?)
}

fn pixels(width: usize, height: usize) -> Out<usize> {
    width
        .checked_mul(height)
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure(MakeupStatus::Dimension, format!("bad image size {width}×{height}")))
}

/// Message for the most recent failure on this thread, or null if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn makeup_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn makeup_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a landmark set from `count` interleaved `(x, y)` pairs.
///
/// # Safety
/// `xy` must point to `2 * count` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn makeup_landmarks_new(
    xy: *const f64,
    count: usize,
    width: usize,
    height: usize,
    out: *mut *mut MakeupLandmarks,
) -> MakeupStatus {
    guard(|| {
        let xy = slice(xy, 2 * count, "xy")?;
        let pts = xy.chunks_exact(2).map(|p| Point::new(p[0], p[1])).collect();
        emit(out, MakeupLandmarks(LandmarkSet::new(pts, width, height)?))
    })
}

/// # Safety
/// `lm` must come from [`makeup_landmarks_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn makeup_landmarks_free(lm: *mut MakeupLandmarks) {
    if !lm.is_null() {
        drop(Box::from_raw(lm));
    }
}

/// Number of points in the set, 0 for null.
///
/// # Safety
/// `lm` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn makeup_landmarks_len(lm: *const MakeupLandmarks) -> usize {
    lm.as_ref().map_or(0, |l| l.0.len())
}

/// Solves the spline sending each `source` point onto its `target` point.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn makeup_tps_solve(
    source: *const MakeupLandmarks,
    target: *const MakeupLandmarks,
    out: *mut *mut MakeupTps,
) -> MakeupStatus {
    guard(|| {
        let (s, t) = (handle(source, "source")?, handle(target, "target")?);
        emit(out, MakeupTps(tps_solve(&s.0, &t.0)?))
    })
}

/// Maps one point through the spline.
///
/// # Safety
/// `tps` must be live; `out_x` and `out_y` writable.
#[no_mangle]
pub unsafe extern "C" fn makeup_tps_apply(tps: *const MakeupTps, x: f64, y: f64, out_x: *mut f64, out_y: *mut f64) -> MakeupStatus {
    guard(|| {
        let t = handle(tps, "tps")?;
        if out_x.is_null() || out_y.is_null() {
            return Err(null("out"));
        }
        let p = t.0.apply(Point::new(x, y));
        *out_x = p.x;
        *out_y = p.y;
        Ok(())
    })
}

/// # Safety
/// `tps` must come from [`makeup_tps_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn makeup_tps_free(tps: *mut MakeupTps) {
    if !tps.is_null() {
        drop(Box::from_raw(tps));
    }
}

/// Warps a reference image so `ref_lm` lands on `src_lm`; output has the
/// reference size.
///
/// # Safety
/// `rgb` and `out` must each hold `3 * width * height` bytes.
#[no_mangle]
pub unsafe extern "C" fn makeup_warp_rgb(
    src_lm: *const MakeupLandmarks,
    ref_lm: *const MakeupLandmarks,
    rgb_in: *const u8,
    width: usize,
    height: usize,
    out: *mut u8,
) -> MakeupStatus {
    guard(|| {
        let (s, r) = (handle(src_lm, "src_lm")?, handle(ref_lm, "ref_lm")?);
        let n = 3 * pixels(width, height)?;
        let img = rgb(slice(rgb_in, n, "rgb")?, width, height)?;
        let grid = alignment_grid(&r.0, &s.0, height, width)?;
        let warped = tensor_to_rgb(&bilinear_sample(&rgb_to_tensor(&img), &grid)?)?;
        slice_mut(out, n, "out")?.copy_from_slice(warped.as_raw());
        Ok(())
    })
}

/// Per-channel histogram matching of the source region onto the reference
/// region. Both images share one size; pixels outside `mask_src` are copied.
///
/// # Safety
/// Images and `out` hold `3 * width * height` bytes, masks `width * height`.
#[no_mangle]
pub unsafe extern "C" fn makeup_histogram_match(
    src: *const u8,
    reference: *const u8,
    mask_src: *const u8,
    mask_ref: *const u8,
    width: usize,
    height: usize,
    out: *mut u8,
) -> MakeupStatus {
    guard(|| {
        let n = pixels(width, height)?;
        let x = rgb(slice(src, 3 * n, "src")?, width, height)?;
        let y = rgb(slice(reference, 3 * n, "reference")?, width, height)?;
        let mx = mask(slice(mask_src, n, "mask_src")?, width, height)?;
        let my = mask(slice(mask_ref, n, "mask_ref")?, width, height)?;
        let matched = histogram_match(&x, &y, &mx, &my)?;
        slice_mut(out, 3 * n, "out")?.copy_from_slice(matched.as_raw());
        Ok(())
    })
}

/// Uniform random projections in `[-scale, scale]` for `channels` feature
/// channels and `landmarks` landmarks.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn makeup_attention_random(
    channels: usize,
    landmarks: usize,
    scale: f64,
    seed: u64,
    out: *mut *mut MakeupAttention,
) -> MakeupStatus {
    guard(|| {
        if channels == 0 || !(scale.is_finite() && scale >= 0.0) {
            return Err(Failure(MakeupStatus::Domain, "channels must be positive and scale finite".into()));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        emit(out, MakeupAttention(AttentionParams::random(channels, 2 * landmarks, scale, &mut rng)))
    })
}

/// # Safety
/// `attn` must come from [`makeup_attention_random`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn makeup_attention_free(attn: *mut MakeupAttention) {
    if !attn.is_null() {
        drop(Box::from_raw(attn));
    }
}

/// Windowed attention of `x` over `y` (`height × width × channels` each) with
/// window size `window`. Landmarks are in feature-map coordinates.
///
/// # Safety
/// `x`, `y` and `out` hold `height * width * channels` doubles.
#[no_mangle]
pub unsafe extern "C" fn makeup_sow_attention(
    attn: *const MakeupAttention,
    x: *const f64,
    y: *const f64,
    height: usize,
    width: usize,
    x_lm: *const MakeupLandmarks,
    y_lm: *const MakeupLandmarks,
    window: usize,
    out: *mut f64,
) -> MakeupStatus {
    guard(|| {
        let p = handle(attn, "attn")?;
        let c = p.0.channels();
        let n = pixels(width, height)? * c;
        let shape = [height, width, c];
        let xt = Tensor::new(shape, slice(x, n, "x")?.to_vec())?;
        let yt = Tensor::new(shape, slice(y, n, "y")?.to_vec())?;
        let g = sow_attention(&xt, &yt, &handle(x_lm, "x_lm")?.0, &handle(y_lm, "y_lm")?.0, window, &p.0)?;
        slice_mut(out, n, "out")?.copy_from_slice(g.data());
        Ok(())
    })
}
