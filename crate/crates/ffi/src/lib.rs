//! C ABI over `romlineage`.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free`. Every fallible call returns an [`RlStatus`] and on
//! failure leaves a message for [`rl_last_error_message`] on the calling
//! thread. Strings handed out by the library are freed with
//! [`rl_string_free`]. No call unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use romlineage::lineage::extract_entry_points_with;
use romlineage::pattern::Parallelism;
use romlineage::report::{emit_defs, DefsFormat, Report, RomIdentity};
use romlineage::similarity::fingerprint_with;
use romlineage::{
    builtin_db, classify, compare, load_rom, load_signatures, Architecture, Confidence, Error, Family,
    FingerprintParams, LineageVerdict, RomImage, SignatureDb, Thresholds, Verdict,
};

/// Opaque ROM image.
pub struct RlRom(RomImage);

/// Opaque signature database.
pub struct RlDb(SignatureDb);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidInput = 4,
    InvalidParameter = 5,
    NothingToEmit = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlArch {
    Z80 = 0,
    M6502 = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RlVerdictKind {
    DerivedFrom = 0,
    Original = 1,
    #[default]
    Inconclusive = 2,
}

/// `None` outside a `DerivedFrom` verdict.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RlFamily {
    #[default]
    None = 0,
    Microsoft = 1,
    Sinclair = 2,
    HuBasic = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlDefsFormat {
    Asm = 0,
    Header = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RlVerdict {
    pub kind: RlVerdictKind,
    pub family: RlFamily,
    /// 1 for high, 0 for low.
    pub high_confidence: u8,
    pub score_microsoft: u32,
    pub score_sinclair: u32,
    pub score_hubasic: u32,
    pub routines_matched: u32,
}

/// Exact ratios as numerator/denominator pairs.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RlSimilarity {
    pub jaccard_num: u64,
    pub jaccard_den: u64,
    pub containment_a_in_b_num: u64,
    pub containment_a_in_b_den: u64,
    pub containment_b_in_a_num: u64,
    pub containment_b_in_a_den: u64,
    pub shared_grams: u64,
    pub size_a: u64,
    pub size_b: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let mut s = msg.into();
    s.retain(|c| c != '\0');
    let c = CString::new(s).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> RlStatus {
    match e {
        Error::Io { .. } => RlStatus::Io,
        Error::NothingToEmit => RlStatus::NothingToEmit,
        Error::DslSyntax { .. }
        | Error::WeakPattern { .. }
        | Error::DuplicateSlot(_)
        | Error::Thresholds { .. }
        | Error::TooShort { .. }
        | Error::ParamMismatch(_)
        | Error::InvalidParam(_)
        | Error::Window(_)
        | Error::ArchMismatch(_) => RlStatus::InvalidParameter,
        _ => RlStatus::InvalidInput,
    }
}

struct Fail(RlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RlStatus::NullArgument, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic; never unwinds.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RlStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RlStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    let mut s = s;
    s.retain(|c| c != '\0');
    CString::new(s).expect("nul bytes removed").into_raw()
}

fn arch_of(a: RlArch) -> Architecture {
    match a {
        RlArch::Z80 => Architecture::Z80,
        RlArch::M6502 => Architecture::M6502,
    }
}

fn thresholds(t_derived: u32, t_original: u32) -> Result<Thresholds, Fail> {
    if t_derived == 0 && t_original == 0 {
        Ok(Thresholds::default())
    } else {
        Ok(Thresholds::new(t_derived, t_original)?)
    }
}

fn flatten_verdict(v: &LineageVerdict) -> RlVerdict {
    let score = |f| v.scores.get(&f).copied().unwrap_or(0);
    let (kind, family) = match v.verdict {
        Verdict::DerivedFrom(f) => (
            RlVerdictKind::DerivedFrom,
            match f {
                Family::Microsoft => RlFamily::Microsoft,
                Family::Sinclair => RlFamily::Sinclair,
                Family::HuBasic => RlFamily::HuBasic,
            },
        ),
        Verdict::Original => (RlVerdictKind::Original, RlFamily::None),
        Verdict::Inconclusive => (RlVerdictKind::Inconclusive, RlFamily::None),
    };
    RlVerdict {
        kind,
        family,
        high_confidence: u8::from(v.confidence == Confidence::High),
        score_microsoft: score(Family::Microsoft),
        score_sinclair: score(Family::Sinclair),
        score_hubasic: score(Family::HuBasic),
        routines_matched: v.matched_routines.values().map(|s| s.len() as u32).sum(),
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version has no interior nul"),
    };
    V.as_ptr()
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next library call on the same thread.
#[no_mangle]
pub extern "C" fn rl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` is a nul-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rl_rom_load_file(
    path: *const c_char,
    arch: RlArch,
    base_addr: u16,
    out: *mut *mut RlRom,
) -> RlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let rom = load_rom(Path::new(path), arch_of(arch), base_addr)?;
        put(out, Box::into_raw(Box::new(RlRom(rom))), "out")
    })
}

/// # Safety
/// `data` points at `len` readable bytes; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rl_rom_load_bytes(
    data: *const u8,
    len: usize,
    arch: RlArch,
    base_addr: u16,
    out: *mut *mut RlRom,
) -> RlStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        let bytes = std::slice::from_raw_parts(data, len);
        let rom = load_rom(bytes, arch_of(arch), base_addr)?;
        put(out, Box::into_raw(Box::new(RlRom(rom))), "out")
    })
}

/// # Safety
/// `rom` came from `rl_rom_load_*` and is not used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn rl_rom_free(rom: *mut RlRom) {
    if !rom.is_null() {
        drop(Box::from_raw(rom));
    }
}

/// # Safety
/// `rom` is a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn rl_rom_len(rom: *const RlRom) -> usize {
    rom.as_ref().map_or(0, |r| r.0.len())
}

/// Writes the 32-byte SHA-256 of the image to `out`.
///
/// # Safety
/// `rom` is live; `out` has room for 32 bytes.
#[no_mangle]
pub unsafe extern "C" fn rl_rom_content_hash(rom: *const RlRom, out: *mut u8) -> RlStatus {
    guard(|| {
        let rom = ref_arg(rom, "rom")?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(rom.0.content_hash().0.as_ptr(), out, 32);
        Ok(())
    })
}

/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rl_db_builtin(out: *mut *mut RlDb) -> RlStatus {
    guard(|| put(out, Box::into_raw(Box::new(RlDb(builtin_db()))), "out"))
}

/// # Safety
/// `path` is a nul-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rl_db_load_file(path: *const c_char, out: *mut *mut RlDb) -> RlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let db = load_signatures(Path::new(path))?;
        put(out, Box::into_raw(Box::new(RlDb(db))), "out")
    })
}

/// # Safety
/// `db` came from `rl_db_*` and is not used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn rl_db_free(db: *mut RlDb) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// # Safety
/// `db` is a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn rl_db_len(db: *const RlDb) -> usize {
    db.as_ref().map_or(0, |d| d.0.len())
}

fn scan_report(rom: &RomImage, db: &SignatureDb, thresholds: Option<Thresholds>) -> Result<Report, Fail> {
    rom.ensure_addressable()?;
    let (rmap, hits) = extract_entry_points_with(rom, db, Parallelism::Sequential)?;
    let mut report = Report::new(if thresholds.is_some() { "classify" } else { "scan" });
    report.db_version = Some(db.db_version().to_string());
    report.rom = Some(RomIdentity::from(rom));
    if let Some(t) = thresholds {
        report.verdict = Some(classify(&rmap, t));
        report.thresholds = Some(t);
    } else {
        report.hits = Some(hits);
    }
    report.routine_map = Some(rmap);
    Ok(report)
}

/// Scan report (hits and routine map) as JSON, without timing.
///
/// # Safety
/// Handles are live; `out` is writable. Free the string with `rl_string_free`.
#[no_mangle]
pub unsafe extern "C" fn rl_scan_json(rom: *const RlRom, db: *const RlDb, out: *mut *mut c_char) -> RlStatus {
    guard(|| {
        let (rom, db) = (ref_arg(rom, "rom")?, ref_arg(db, "db")?);
        let report = scan_report(&rom.0, &db.0, None)?;
        put(out, to_c_string(report.to_json()), "out")
    })
}

/// Classification report as JSON, without timing. Passing 0 for both
/// thresholds selects the defaults.
///
/// # Safety
/// Handles are live; `out` is writable. Free the string with `rl_string_free`.
#[no_mangle]
pub unsafe extern "C" fn rl_report_json(
    rom: *const RlRom,
    db: *const RlDb,
    t_derived: u32,
    t_original: u32,
    out: *mut *mut c_char,
) -> RlStatus {
    guard(|| {
        let (rom, db) = (ref_arg(rom, "rom")?, ref_arg(db, "db")?);
        let report = scan_report(&rom.0, &db.0, Some(thresholds(t_derived, t_original)?))?;
        put(out, to_c_string(report.to_json()), "out")
    })
}

/// Passing 0 for both thresholds selects the defaults.
///
/// # Safety
/// Handles are live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rl_classify(
    rom: *const RlRom,
    db: *const RlDb,
    t_derived: u32,
    t_original: u32,
    out: *mut RlVerdict,
) -> RlStatus {
    guard(|| {
        let (rom, db) = (ref_arg(rom, "rom")?, ref_arg(db, "db")?);
        let t = thresholds(t_derived, t_original)?;
        rom.0.ensure_addressable()?;
        let (rmap, _) = extract_entry_points_with(&rom.0, &db.0, Parallelism::Sequential)?;
        put(out, flatten_verdict(&classify(&rmap, t)), "out")
    })
}

/// Symbol definitions for the routines found in `rom`. `prefix` may be null.
///
/// # Safety
/// Handles are live; `prefix` is null or nul-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rl_emit_defs(
    rom: *const RlRom,
    db: *const RlDb,
    format: RlDefsFormat,
    prefix: *const c_char,
    out: *mut *mut c_char,
) -> RlStatus {
    guard(|| {
        let (rom, db) = (ref_arg(rom, "rom")?, ref_arg(db, "db")?);
        let prefix = if prefix.is_null() { "" } else { str_arg(prefix, "prefix")? };
        rom.0.ensure_addressable()?;
        let (rmap, _) = extract_entry_points_with(&rom.0, &db.0, Parallelism::Sequential)?;
        let format = match format {
            RlDefsFormat::Asm => DefsFormat::Asm,
            RlDefsFormat::Header => DefsFormat::Header,
        };
        put(out, to_c_string(emit_defs(&rmap, format, prefix)?), "out")
    })
}

/// k-gram similarity. `winnow` of 0 keeps every gram.
///
/// # Safety
/// Handles are live; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rl_compare(
    a: *const RlRom,
    b: *const RlRom,
    k: usize,
    winnow: usize,
    mask_operands: bool,
    out: *mut RlSimilarity,
) -> RlStatus {
    guard(|| {
        let (a, b) = (ref_arg(a, "a")?, ref_arg(b, "b")?);
        let params = FingerprintParams::new(k, (winnow > 0).then_some(winnow), mask_operands)?;
        let s = compare(&fingerprint_with(&a.0, params)?, &fingerprint_with(&b.0, params)?)?;
        put(
            out,
            RlSimilarity {
                jaccard_num: *s.jaccard.numer(),
                jaccard_den: *s.jaccard.denom(),
                containment_a_in_b_num: *s.containment_a_in_b.numer(),
                containment_a_in_b_den: *s.containment_a_in_b.denom(),
                containment_b_in_a_num: *s.containment_b_in_a.numer(),
                containment_b_in_a_den: *s.containment_b_in_a.denom(),
                shared_grams: s.shared_grams,
                size_a: s.size_a,
                size_b: s.size_b,
            },
            "out",
        )
    })
}

/// # Safety
/// `s` came from this library and is not used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn rl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
