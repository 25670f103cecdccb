//! C ABI over the cgidl toolkit.
//!
//! Objects cross the boundary as opaque handles created by `*_new`,
//! `*_generate` or `*_load` functions and released with the matching
//! `*_free`. Every fallible call returns a [`CgiStatus`]; the message of the
//! most recent failure on the calling thread is available through
//! [`cgi_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use cgidl::data::{make_block_digit, Scene, Style};
use cgidl::forward::NoiseSpec;
use cgidl::metrics::QualityReport;
use cgidl::nn::{checkpoint, Network};
use cgidl::recon::{pattern_count_for, ReconImage};
use cgidl::speckle::{self, Family, PatternSpec, PatternStack};
use cgidl::{container, pipeline, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Format = 5,
    Degenerate = 6,
    MissingCheckpoint = 7,
    Panic = 8,
    Other = 9,
}

/// Pattern family selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgiFamily {
    White = 0,
    Pink = 1,
}

impl From<CgiFamily> for Family {
    fn from(f: CgiFamily) -> Self {
        match f {
            CgiFamily::White => Family::White,
            CgiFamily::Pink => Family::Pink,
        }
    }
}

/// Quality indicators of one image.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CgiQuality {
    pub psnr: f64,
    pub vis: f64,
    pub cc: f64,
    pub mse: f64,
}

/// Opaque pattern stack.
pub struct CgiStack(PatternStack);

/// Opaque binary scene.
pub struct CgiScene(Scene);

/// Opaque reconstructed image.
pub struct CgiRecon(ReconImage);

/// Opaque trained network.
pub struct CgiNetwork(Network<f32>);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> CgiStatus {
    match err {
        Error::InvalidSpec(_) | Error::InvalidScene(_) | Error::Config(_) | Error::Usage(_) => {
            CgiStatus::InvalidArgument
        }
        Error::DimensionMismatch(_) => CgiStatus::DimensionMismatch,
        Error::Io(_) => CgiStatus::Io,
        Error::Format { .. } | Error::Corrupt(_) | Error::Version { .. } => CgiStatus::Format,
        Error::Degenerate(_) | Error::Calibration(_) | Error::NonFinite(_) => CgiStatus::Degenerate,
        Error::MissingCheckpoint { .. } => CgiStatus::MissingCheckpoint,
        _ => CgiStatus::Other,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Run `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CgiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CgiStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CgiStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            CgiStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CgiStatus::Panic
        }
    }
}

unsafe fn obj<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut *mut T, what: &'static str) -> Result<&'a mut *mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Invalid("path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, len: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(Failure::Null("buffer"));
    }
    if len < src.len() {
        return Err(Failure::Invalid(format!("buffer holds {len} values, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL.
#[no_mangle]
pub extern "C" fn cgi_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copy the last error message into `buf` as a NUL-terminated string,
/// truncating to `cap - 1` bytes. Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cgi_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Number of patterns for sampling ratio `beta` on the standard scene grid.
///
/// # Safety
/// `count` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgi_pattern_count(beta: f64, count: *mut usize) -> CgiStatus {
    guard(|| {
        let c = count.as_mut().ok_or(Failure::Null("count"))?;
        *c = pattern_count_for(beta, cgidl::SCENE_PIXELS)?;
        Ok(())
    })
}

/// Generate a stack of `count` patterns on the standard scene grid.
///
/// # Safety
/// `stack` must be a valid pointer; on success it receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn cgi_stack_generate(
    family: CgiFamily,
    count: usize,
    seed: u64,
    binarize: bool,
    stack: *mut *mut CgiStack,
) -> CgiStatus {
    guard(|| {
        let o = out(stack, "stack")?;
        let spec = PatternSpec {
            binarize,
            ..PatternSpec::scene(family.into(), count, seed)
        };
        *o = boxed(CgiStack(speckle::generate(&spec)?));
        Ok(())
    })
}

/// Read a stack container file.
///
/// # Safety
/// `file` must be a NUL-terminated path and `stack` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgi_stack_read(file: *const c_char, stack: *mut *mut CgiStack) -> CgiStatus {
    guard(|| {
        let o = out(stack, "stack")?;
        *o = boxed(CgiStack(container::read_stack(&path(file)?)?));
        Ok(())
    })
}

/// Write a stack container file.
///
/// # Safety
/// `stack` must be a live handle and `file` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn cgi_stack_write(stack: *const CgiStack, file: *const c_char) -> CgiStatus {
    guard(|| {
        let s = obj(stack, "stack")?;
        container::write_stack(&path(file)?, &s.0)?;
        Ok(())
    })
}

/// Pattern count, height and width of a stack.
///
/// # Safety
/// `stack` must be a live handle; any of the outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn cgi_stack_shape(
    stack: *const CgiStack,
    count: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> CgiStatus {
    guard(|| {
        let s = &obj(stack, "stack")?.0;
        for (p, v) in [(count, s.count()), (height, s.height()), (width, s.width())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copy pattern `index` (row-major) into `buf`.
///
/// # Safety
/// `stack` must be a live handle and `buf` point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn cgi_stack_pattern(
    stack: *const CgiStack,
    index: usize,
    buf: *mut f32,
    len: usize,
) -> CgiStatus {
    guard(|| {
        let s = &obj(stack, "stack")?.0;
        if index >= s.count() {
            return Err(Failure::Invalid(format!("pattern {index} of {}", s.count())));
        }
        copy_out(s.pattern(index), buf, len)
    })
}

/// # Safety
/// `stack` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cgi_stack_free(stack: *mut CgiStack) {
    free(stack)
}

/// Scene from a row-major 0/1 transmission map.
///
/// # Safety
/// `transmission` must point to `height * width` readable bytes and `scene`
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgi_scene_new(
    height: usize,
    width: usize,
    transmission: *const u8,
    label: u8,
    scene: *mut *mut CgiScene,
) -> CgiStatus {
    guard(|| {
        let o = out(scene, "scene")?;
        if transmission.is_null() {
            return Err(Failure::Null("transmission"));
        }
        let t = std::slice::from_raw_parts(transmission, height * width).to_vec();
        *o = boxed(CgiScene(Scene::new(height, width, t, label, Style::Handwriting)?));
        Ok(())
    })
}

/// Built-in block-style glyph for digit `digit`.
///
/// # Safety
/// `scene` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgi_scene_block_digit(digit: u8, scene: *mut *mut CgiScene) -> CgiStatus {
    guard(|| {
        let o = out(scene, "scene")?;
        *o = boxed(CgiScene(make_block_digit(digit)?));
        Ok(())
    })
}

/// # Safety
/// `scene` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cgi_scene_free(scene: *mut CgiScene) {
    free(scene)
}

/// Measure `scene` with every pattern of `stack` and reconstruct it.
/// A non-finite `snr_db` means noiseless; otherwise uniform noise is drawn
/// from `noise_seed`.
///
/// # Safety
/// `scene` and `stack` must be live handles and `recon` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgi_simulate(
    scene: *const CgiScene,
    stack: *const CgiStack,
    snr_db: f64,
    noise_seed: u64,
    recon: *mut *mut CgiRecon,
) -> CgiStatus {
    guard(|| {
        let sc = obj(scene, "scene")?;
        let st = obj(stack, "stack")?;
        let o = out(recon, "recon")?;
        let noise = snr_db.is_finite().then(|| NoiseSpec::new(snr_db, noise_seed));
        let mut r = pipeline::simulate(std::slice::from_ref(&sc.0), &st.0, noise.as_ref())?;
        *o = boxed(CgiRecon(r.remove(0)));
        Ok(())
    })
}

/// Height, width and sampling ratio of a reconstruction.
///
/// # Safety
/// `recon` must be a live handle; any of the outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn cgi_recon_shape(
    recon: *const CgiRecon,
    height: *mut usize,
    width: *mut usize,
    beta: *mut f64,
) -> CgiStatus {
    guard(|| {
        let r = &obj(recon, "recon")?.0;
        if let Some(h) = height.as_mut() {
            *h = r.height;
        }
        if let Some(w) = width.as_mut() {
            *w = r.width;
        }
        if let Some(b) = beta.as_mut() {
            *b = r.beta;
        }
        Ok(())
    })
}

/// Copy the image values (row-major) into `buf`.
///
/// # Safety
/// `recon` must be a live handle and `buf` point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn cgi_recon_values(recon: *const CgiRecon, buf: *mut f32, len: usize) -> CgiStatus {
    guard(|| copy_out(&obj(recon, "recon")?.0.g, buf, len))
}

/// Score a reconstruction against its scene at gray-level depth `bit_depth`.
///
/// # Safety
/// `recon` and `scene` must be live handles and `quality` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgi_recon_quality(
    recon: *const CgiRecon,
    scene: *const CgiScene,
    bit_depth: u32,
    quality: *mut CgiQuality,
) -> CgiStatus {
    guard(|| {
        let r = obj(recon, "recon")?;
        let s = obj(scene, "scene")?;
        let q = quality.as_mut().ok_or(Failure::Null("quality"))?;
        let rep = QualityReport::score("", &r.0, &s.0, None, bit_depth)?;
        *q = CgiQuality {
            psnr: rep.psnr,
            vis: rep.vis,
            cc: rep.cc,
            mse: rep.mse,
        };
        Ok(())
    })
}

/// # Safety
/// `recon` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cgi_recon_free(recon: *mut CgiRecon) {
    free(recon)
}

/// Load a network checkpoint.
///
/// # Safety
/// `file` must be a NUL-terminated path and `network` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgi_network_load(file: *const c_char, network: *mut *mut CgiNetwork) -> CgiStatus {
    guard(|| {
        let o = out(network, "network")?;
        let p = path(file)?;
        if !p.exists() {
            return Err(Failure::Lib(Error::MissingCheckpoint {
                command: format!("cgidl train --out {}", p.display()),
                path: p,
            }));
        }
        *o = boxed(CgiNetwork(checkpoint::load(&p)?.params.network));
        Ok(())
    })
}

/// Enhance a reconstruction with the network.
///
/// # Safety
/// `network` and `input` must be live handles and `output` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cgi_network_infer(
    network: *const CgiNetwork,
    input: *const CgiRecon,
    output: *mut *mut CgiRecon,
) -> CgiStatus {
    guard(|| {
        let n = obj(network, "network")?;
        let r = obj(input, "input")?;
        let o = out(output, "output")?;
        let mut y = pipeline::infer(&n.0, std::slice::from_ref(&r.0))?;
        *o = boxed(CgiRecon(y.remove(0)));
        Ok(())
    })
}

/// # Safety
/// `network` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cgi_network_free(network: *mut CgiNetwork) {
    free(network)
}
