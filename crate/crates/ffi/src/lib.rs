//! C ABI for `simplex-core`.
//!
//! A `SimplexFile` is an opaque handle to one register file. Every function
//! returns a `SimplexStatus`; results come back through out-pointers. A
//! handle belongs to the thread that created it: calls from any other
//! thread fail with `SIMPLEX_STATUS_WRONG_THREAD` and change nothing.
//!
//! Slots are numbered 0 to 3 (BND0 to BND3).
//!
//! # Safety
//!
//! Every pointer argument must be null or valid for the access the function
//! makes. A `SimplexFile *` must come from `simplex_file_new` and not have
//! been freed. Enum arguments must hold one of the declared values.

#![allow(clippy::missing_safety_doc)]

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::thread::{self, ThreadId};

use simplex::probe::{probe, select_backend, BackendRequest};
use simplex::{BackendKind, Error, RegisterFile, SlotId};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimplexStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidSlot = 2,
    /// The file has not been initialized, or has been finished.
    Disabled = 3,
    HardwareUnavailable = 4,
    /// Another hardware file is live on this thread.
    HardwareBusy = 5,
    InvalidBackend = 6,
    WrongThread = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimplexBackend {
    Auto = 0,
    Hardware = 1,
    Emulated = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimplexProbeReport {
    pub cpu_has_mpx: bool,
    pub xstate_bndregs: bool,
    pub xstate_bndcsr: bool,
    pub os_context_saves_mpx: bool,
    /// Backend `SIMPLEX_BACKEND_AUTO` resolves to on this machine.
    pub selected: SimplexBackend,
}

/// Opaque register-file handle.
pub struct SimplexFile {
    inner: RegisterFile,
    owner: ThreadId,
}

fn status_of(e: &Error) -> SimplexStatus {
    match e {
        Error::Disabled => SimplexStatus::Disabled,
        Error::InvalidSlot(_) => SimplexStatus::InvalidSlot,
        Error::HardwareUnavailable(_) => SimplexStatus::HardwareUnavailable,
        Error::HardwareBusy => SimplexStatus::HardwareBusy,
        Error::UnknownBackend(_) => SimplexStatus::InvalidBackend,
        _ => SimplexStatus::Internal,
    }
}

fn kind_to_ffi(k: BackendKind) -> SimplexBackend {
    match k {
        BackendKind::Hardware => SimplexBackend::Hardware,
        BackendKind::Emulated => SimplexBackend::Emulated,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SimplexStatus>) -> SimplexStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SimplexStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => SimplexStatus::Panic,
    }
}

/// Runs `f` on the file behind `file` after the null and owner checks.
unsafe fn with_file(
    file: *mut SimplexFile,
    f: impl FnOnce(&mut RegisterFile) -> Result<(), Error>,
) -> SimplexStatus {
    guard(|| {
        let file = file.as_mut().ok_or(SimplexStatus::NullPointer)?;
        if file.owner != thread::current().id() {
            return Err(SimplexStatus::WrongThread);
        }
        f(&mut file.inner).map_err(|e| status_of(&e))
    })
}

fn slot(index: u8) -> Result<SlotId, Error> {
    SlotId::from_index(index)
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), Error> {
    out.write(v);
    Ok(())
}

macro_rules! require {
    ($($p:expr),+) => {
        if $($p.is_null())||+ {
            return SimplexStatus::NullPointer;
        }
    };
}

/// Fills `out` with this machine's MPX capabilities.
#[no_mangle]
pub unsafe extern "C" fn simplex_probe(out: *mut SimplexProbeReport) -> SimplexStatus {
    require!(out);
    guard(|| {
        let r = probe();
        out.write(SimplexProbeReport {
            cpu_has_mpx: r.cpu_has_mpx,
            xstate_bndregs: r.xstate_bndregs,
            xstate_bndcsr: r.xstate_bndcsr,
            os_context_saves_mpx: r.os_context_saves_mpx,
            selected: kind_to_ffi(r.selected),
        });
        Ok(())
    })
}

/// Creates a disabled register file. `SIMPLEX_BACKEND_HARDWARE` fails when
/// the machine lacks MPX; `SIMPLEX_BACKEND_AUTO` falls back to emulation.
/// On success `*out` receives a handle to release with `simplex_file_free`.
#[no_mangle]
pub unsafe extern "C" fn simplex_file_new(
    backend: SimplexBackend,
    out: *mut *mut SimplexFile,
) -> SimplexStatus {
    require!(out);
    out.write(std::ptr::null_mut());
    guard(|| {
        let req = match backend {
            SimplexBackend::Auto => BackendRequest::Auto,
            SimplexBackend::Hardware => BackendRequest::Hardware,
            SimplexBackend::Emulated => BackendRequest::Emulated,
        };
        let kind = select_backend(&probe(), req, true).map_err(|e| status_of(&e))?;
        let inner = RegisterFile::new(kind).map_err(|e| status_of(&e))?;
        let handle = Box::new(SimplexFile {
            inner,
            owner: thread::current().id(),
        });
        out.write(Box::into_raw(handle));
        Ok(())
    })
}

/// Releases a handle. Null is accepted. The slots are wiped first.
#[no_mangle]
pub unsafe extern "C" fn simplex_file_free(file: *mut SimplexFile) -> SimplexStatus {
    if file.is_null() {
        return SimplexStatus::Ok;
    }
    guard(|| {
        if (*file).owner != thread::current().id() {
            return Err(SimplexStatus::WrongThread);
        }
        let mut b = Box::from_raw(file);
        let r = b.inner.finish();
        drop(b);
        r.map_err(|e| status_of(&e))
    })
}

#[no_mangle]
pub unsafe extern "C" fn simplex_file_backend(
    file: *mut SimplexFile,
    out: *mut SimplexBackend,
) -> SimplexStatus {
    require!(out);
    with_file(file, |f| put(out, kind_to_ffi(f.backend())))
}

/// Enables the file and resets all slots. Safe to call again.
#[no_mangle]
pub unsafe extern "C" fn simplex_process_specific_init(file: *mut SimplexFile) -> SimplexStatus {
    with_file(file, |f| f.init())
}

/// Resets all slots and disables the file. Safe to call again.
#[no_mangle]
pub unsafe extern "C" fn simplex_process_specific_finish(file: *mut SimplexFile) -> SimplexStatus {
    with_file(file, |f| f.finish())
}

#[no_mangle]
pub unsafe extern "C" fn simplex_is_enabled(
    file: *mut SimplexFile,
    out: *mut bool,
) -> SimplexStatus {
    require!(out);
    with_file(file, |f| put(out, f.is_enabled()))
}

#[no_mangle]
pub unsafe extern "C" fn simplex_setbndl(
    file: *mut SimplexFile,
    slot_index: u8,
    value: u64,
) -> SimplexStatus {
    with_file(file, |f| f.setbnd_low(slot(slot_index)?, value))
}

#[no_mangle]
pub unsafe extern "C" fn simplex_setbndu(
    file: *mut SimplexFile,
    slot_index: u8,
    value: u64,
) -> SimplexStatus {
    with_file(file, |f| f.setbnd_high(slot(slot_index)?, value))
}

#[no_mangle]
pub unsafe extern "C" fn simplex_setbnd128(
    file: *mut SimplexFile,
    slot_index: u8,
    low: u64,
    high: u64,
) -> SimplexStatus {
    with_file(file, |f| f.setbnd128(slot(slot_index)?, low, high))
}

/// Quick write of the lower half; the upper half is left undefined.
#[no_mangle]
pub unsafe extern "C" fn simplex_qsetbndl(
    file: *mut SimplexFile,
    slot_index: u8,
    value: u64,
) -> SimplexStatus {
    with_file(file, |f| f.qsetbnd_low(slot(slot_index)?, value))
}

#[no_mangle]
pub unsafe extern "C" fn simplex_getbndl(
    file: *mut SimplexFile,
    slot_index: u8,
    out: *mut u64,
) -> SimplexStatus {
    require!(out);
    with_file(file, |f| put(out, f.getbnd_low(slot(slot_index)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn simplex_getbndu(
    file: *mut SimplexFile,
    slot_index: u8,
    out: *mut u64,
) -> SimplexStatus {
    require!(out);
    with_file(file, |f| put(out, f.getbnd_high(slot(slot_index)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn simplex_getbnd128(
    file: *mut SimplexFile,
    slot_index: u8,
    low: *mut u64,
    high: *mut u64,
) -> SimplexStatus {
    require!(low, high);
    with_file(file, |f| {
        let (l, h) = f.getbnd128(slot(slot_index)?)?;
        put(low, l)?;
        put(high, h)
    })
}

/// Quick read of the lower half; does not clear the spill area.
#[no_mangle]
pub unsafe extern "C" fn simplex_qgetbndl(
    file: *mut SimplexFile,
    slot_index: u8,
    out: *mut u64,
) -> SimplexStatus {
    require!(out);
    with_file(file, |f| put(out, f.qgetbnd_low(slot(slot_index)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn simplex_reset_slot(
    file: *mut SimplexFile,
    slot_index: u8,
) -> SimplexStatus {
    with_file(file, |f| f.reset_slot(slot(slot_index)?))
}

#[no_mangle]
pub unsafe extern "C" fn simplex_reset_all(file: *mut SimplexFile) -> SimplexStatus {
    with_file(file, |f| f.reset_all())
}

/// Copies the file's 16-byte spill area into `out` (test hook).
#[no_mangle]
pub unsafe extern "C" fn simplex_scratch_snapshot(
    file: *mut SimplexFile,
    out: *mut u8,
) -> SimplexStatus {
    require!(out);
    with_file(file, |f| {
        let snap = f.scratch_snapshot();
        std::ptr::copy_nonoverlapping(snap.as_ptr(), out, snap.len());
        Ok(())
    })
}

/// Static, NUL-terminated description of a status code.
#[no_mangle]
pub extern "C" fn simplex_status_str(status: SimplexStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        SimplexStatus::Ok => b"ok\0",
        SimplexStatus::NullPointer => b"null pointer argument\0",
        SimplexStatus::InvalidSlot => b"slot index out of range\0",
        SimplexStatus::Disabled => b"register file is not initialized\0",
        SimplexStatus::HardwareUnavailable => b"MPX hardware unavailable\0",
        SimplexStatus::HardwareBusy => b"a hardware register file is already live on this thread\0",
        SimplexStatus::InvalidBackend => b"invalid backend\0",
        SimplexStatus::WrongThread => b"handle used from a thread other than its creator\0",
        SimplexStatus::Internal => b"internal error\0",
        SimplexStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}
