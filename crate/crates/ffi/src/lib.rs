//! C ABI over `reenact`.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns a
//! [`ReStatus`]; on failure `re_last_error()` describes what went wrong on
//! the calling thread. Byte buffers handed out by the library are released
//! with [`re_bytes_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use reenact::audio::{self, TimeRange, WavBuffer};
use reenact::eaf::{self, MarkupDocument};
use reenact::release::{self, Release, ReleaseConfig, ReleaseError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Audio = 5,
    /// Strict build refused because validation raised diagnostics.
    Strict = 6,
    InvalidArgument = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

pub struct ReDocument(MarkupDocument);
pub struct ReWav(WavBuffer);
pub struct ReRelease(Release);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReCounts {
    pub recordings: usize,
    pub long_clips: usize,
    pub short_clips: usize,
    pub concatenations: usize,
    pub fragment_tables: usize,
    pub diagnostics: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ReStats {
    pub conversations: usize,
    pub participants: usize,
    pub long_pairs: usize,
    pub mean_long_duration_s: f64,
    pub short_pairs: usize,
    pub mean_short_duration_s: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: ReStatus, message: impl Into<String>) -> ReStatus {
    set_error(message);
    status
}

/// Run `f`, turning a panic into `ReStatus::Panic` instead of unwinding into C.
fn guarded(f: impl FnOnce() -> ReStatus) -> ReStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(ReStatus::Panic, "internal panic"),
    }
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Option<&'a [u8]> {
    if data.is_null() {
        (len == 0).then_some(&[])
    } else {
        Some(std::slice::from_raw_parts(data, len))
    }
}

unsafe fn path_arg(text: *const c_char) -> Result<PathBuf, ReStatus> {
    if text.is_null() {
        return Err(fail(ReStatus::NullArgument, "null path"));
    }
    CStr::from_ptr(text)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(ReStatus::InvalidUtf8, "path is not UTF-8"))
}

unsafe fn give_bytes(buf: Vec<u8>, out: *mut *mut u8, out_len: *mut usize) {
    let boxed = buf.into_boxed_slice();
    *out_len = boxed.len();
    *out = Box::into_raw(boxed) as *mut u8;
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn re_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `data` and `len` must come from a library call that returned bytes.
#[no_mangle]
pub unsafe extern "C" fn re_bytes_free(data: *mut u8, len: usize) {
    if !data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(data, len)));
    }
}

/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn re_eaf_parse(data: *const u8, len: usize, out: *mut *mut ReDocument) -> ReStatus {
    guarded(|| {
        let (Some(input), false) = (bytes(data, len), out.is_null()) else {
            return fail(ReStatus::NullArgument, "null argument");
        };
        match eaf::parse_eaf(input) {
            Ok(doc) => {
                *out = Box::into_raw(Box::new(ReDocument(doc)));
                ReStatus::Ok
            }
            Err(e) => fail(ReStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `doc` must be a live handle; `out` and `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn re_eaf_serialize(doc: *const ReDocument, out: *mut *mut u8, out_len: *mut usize) -> ReStatus {
    guarded(|| {
        if doc.is_null() || out.is_null() || out_len.is_null() {
            return fail(ReStatus::NullArgument, "null argument");
        }
        match eaf::serialize_eaf(&(*doc).0) {
            Ok(buf) => {
                give_bytes(buf, out, out_len);
                ReStatus::Ok
            }
            Err(e) => fail(ReStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Number of tiers, 0 for a null handle.
///
/// # Safety
/// `doc` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn re_eaf_tier_count(doc: *const ReDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.0.tiers().len())
}

/// Number of annotations on the named tier, or -1 if there is no such tier.
///
/// # Safety
/// `doc` must be a live handle and `tier` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn re_eaf_annotation_count(doc: *const ReDocument, tier: *const c_char) -> i64 {
    let (Some(doc), false) = (doc.as_ref(), tier.is_null()) else { return -1 };
    let Ok(name) = CStr::from_ptr(tier).to_str() else { return -1 };
    doc.0.tier(name).map_or(-1, |t| t.annotations().len() as i64)
}

/// # Safety
/// `doc` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn re_eaf_free(doc: *mut ReDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn re_wav_read(data: *const u8, len: usize, out: *mut *mut ReWav) -> ReStatus {
    guarded(|| {
        let (Some(input), false) = (bytes(data, len), out.is_null()) else {
            return fail(ReStatus::NullArgument, "null argument");
        };
        match audio::read_wav(input) {
            Ok(buf) => {
                *out = Box::into_raw(Box::new(ReWav(buf)));
                ReStatus::Ok
            }
            Err(e) => fail(ReStatus::Audio, e.to_string()),
        }
    })
}

/// # Safety
/// `wav` must be a live handle; `out` and `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn re_wav_write(wav: *const ReWav, out: *mut *mut u8, out_len: *mut usize) -> ReStatus {
    guarded(|| {
        if wav.is_null() || out.is_null() || out_len.is_null() {
            return fail(ReStatus::NullArgument, "null argument");
        }
        give_bytes(audio::write_wav(&(*wav).0), out, out_len);
        ReStatus::Ok
    })
}

/// # Safety
/// `wav` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn re_wav_sample_rate(wav: *const ReWav) -> u32 {
    wav.as_ref().map_or(0, |w| w.0.sample_rate())
}

/// # Safety
/// `wav` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn re_wav_channels(wav: *const ReWav) -> u16 {
    wav.as_ref().map_or(0, |w| w.0.channels())
}

/// # Safety
/// `wav` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn re_wav_frames(wav: *const ReWav) -> u64 {
    wav.as_ref().map_or(0, |w| w.0.frames() as u64)
}

/// Cut `[start_ms, end_ms)` into a new handle.
///
/// # Safety
/// `wav` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn re_wav_cut(wav: *const ReWav, start_ms: u64, end_ms: u64, out: *mut *mut ReWav) -> ReStatus {
    guarded(|| {
        if wav.is_null() || out.is_null() {
            return fail(ReStatus::NullArgument, "null argument");
        }
        let Some(range) = TimeRange::new(start_ms, end_ms) else {
            return fail(ReStatus::InvalidArgument, "start must be before end");
        };
        match audio::cut(&(*wav).0, range) {
            Ok(clip) => {
                *out = Box::into_raw(Box::new(ReWav(clip)));
                ReStatus::Ok
            }
            Err(e) => fail(ReStatus::Audio, e.to_string()),
        }
    })
}

/// # Safety
/// `wav` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn re_wav_free(wav: *mut ReWav) {
    if !wav.is_null() {
        drop(Box::from_raw(wav));
    }
}

#[no_mangle]
pub extern "C" fn re_ms_to_sample(ms: u64, rate: u32) -> u64 {
    audio::ms_to_sample(ms, rate)
}

/// Write `mm:ss.mmm` and a NUL into `buf`.
///
/// # Safety
/// `buf` must point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn re_format_duration(ms: u64, buf: *mut c_char, cap: usize) -> ReStatus {
    guarded(|| {
        if buf.is_null() {
            return fail(ReStatus::NullArgument, "null buffer");
        }
        let text = audio::format_duration(ms);
        if text.len() + 1 > cap {
            return fail(ReStatus::BufferTooSmall, format!("need {} bytes", text.len() + 1));
        }
        ptr::copy_nonoverlapping(text.as_ptr(), buf as *mut u8, text.len());
        *buf.add(text.len()) = 0;
        ReStatus::Ok
    })
}

/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn re_parse_duration(text: *const c_char, out: *mut u64) -> ReStatus {
    guarded(|| {
        if text.is_null() || out.is_null() {
            return fail(ReStatus::NullArgument, "null argument");
        }
        let Ok(s) = CStr::from_ptr(text).to_str() else {
            return fail(ReStatus::InvalidUtf8, "duration is not UTF-8");
        };
        match audio::parse_duration(s) {
            Ok(ms) => {
                *out = ms;
                ReStatus::Ok
            }
            Err(e) => fail(ReStatus::Parse, e.to_string()),
        }
    })
}

/// Build a release. `report` may be null. On `ReStatus::Strict` nothing is
/// written and `*out` is left untouched.
///
/// # Safety
/// `input` and `output` must be NUL-terminated; `report` null or
/// NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn re_build_release(
    input: *const c_char,
    output: *const c_char,
    strict: bool,
    report: *const c_char,
    out: *mut *mut ReRelease,
) -> ReStatus {
    guarded(|| {
        if out.is_null() {
            return fail(ReStatus::NullArgument, "null argument");
        }
        let (input, output) = match (path_arg(input), path_arg(output)) {
            (Ok(i), Ok(o)) => (i, o),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let mut cfg = ReleaseConfig::new(input, output);
        cfg.strict = strict;
        if !report.is_null() {
            match path_arg(report) {
                Ok(p) => cfg.report_path = Some(p),
                Err(s) => return s,
            }
        }
        match release::build_release(&cfg) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(ReRelease(r)));
                ReStatus::Ok
            }
            Err(e) => {
                let status = match &e {
                    ReleaseError::Strict(_) => ReStatus::Strict,
                    ReleaseError::Markup { .. } => ReStatus::Parse,
                    ReleaseError::Audio { .. } => ReStatus::Audio,
                    ReleaseError::SameDirectory(_) | ReleaseError::OutputNotEmpty(_) => ReStatus::InvalidArgument,
                    ReleaseError::Corpus(_) | ReleaseError::Io { .. } => ReStatus::Io,
                };
                fail(status, e.to_string())
            }
        }
    })
}

/// # Safety
/// `release` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn re_release_counts(release: *const ReRelease, out: *mut ReCounts) -> ReStatus {
    guarded(|| {
        let (Some(r), false) = (release.as_ref(), out.is_null()) else {
            return fail(ReStatus::NullArgument, "null argument");
        };
        let c = &r.0.manifest.counts;
        *out = ReCounts {
            recordings: c.recordings,
            long_clips: c.long_clips,
            short_clips: c.short_clips,
            concatenations: c.concatenations,
            fragment_tables: c.fragment_tables,
            diagnostics: r.0.report.diagnostics.len(),
        };
        ReStatus::Ok
    })
}

/// # Safety
/// `release` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn re_release_free(release: *mut ReRelease) {
    if !release.is_null() {
        drop(Box::from_raw(release));
    }
}

/// # Safety
/// `release_dir` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn re_compute_stats(release_dir: *const c_char, out: *mut ReStats) -> ReStatus {
    guarded(|| {
        if out.is_null() {
            return fail(ReStatus::NullArgument, "null argument");
        }
        let dir = match path_arg(release_dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match release::compute_stats(&dir) {
            Ok(report) => {
                let s = report.stats;
                *out = ReStats {
                    conversations: s.conversations,
                    participants: s.participants,
                    long_pairs: s.long_pairs,
                    mean_long_duration_s: s.mean_long_duration_s,
                    short_pairs: s.short_pairs,
                    mean_short_duration_s: s.mean_short_duration_s,
                };
                ReStatus::Ok
            }
            Err(e) => fail(ReStatus::Io, e.to_string()),
        }
    })
}
