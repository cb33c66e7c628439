use std::ffi::CStr;
use std::ptr;

use simplex_ffi::*;

fn new_emulated() -> *mut SimplexFile {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { simplex_file_new(SimplexBackend::Emulated, &mut f) }, SimplexStatus::Ok);
    assert!(!f.is_null());
    f
}

#[test]
fn lifecycle_and_round_trip() {
    let f = new_emulated();
    unsafe {
        let mut on = true;
        assert_eq!(simplex_is_enabled(f, &mut on), SimplexStatus::Ok);
        assert!(!on);
        assert_eq!(simplex_setbndl(f, 0, 1), SimplexStatus::Disabled);

        assert_eq!(simplex_process_specific_init(f), SimplexStatus::Ok);
        assert_eq!(simplex_is_enabled(f, &mut on), SimplexStatus::Ok);
        assert!(on);

        let (mut lo, mut hi) = (0u64, 0u64);
        assert_eq!(simplex_getbnd128(f, 3, &mut lo, &mut hi), SimplexStatus::Ok);
        assert_eq!((lo, hi), (u64::MAX, 0));

        assert_eq!(simplex_setbndl(f, 1, 0x1111), SimplexStatus::Ok);
        assert_eq!(simplex_setbndu(f, 1, 0x2222), SimplexStatus::Ok);
        assert_eq!(simplex_getbndl(f, 1, &mut lo), SimplexStatus::Ok);
        assert_eq!(simplex_getbndu(f, 1, &mut hi), SimplexStatus::Ok);
        assert_eq!((lo, hi), (0x1111, 0x2222));

        assert_eq!(simplex_setbnd128(f, 2, 7, 8), SimplexStatus::Ok);
        assert_eq!(simplex_getbnd128(f, 2, &mut lo, &mut hi), SimplexStatus::Ok);
        assert_eq!((lo, hi), (7, 8));

        assert_eq!(simplex_qsetbndl(f, 0, 42), SimplexStatus::Ok);
        assert_eq!(simplex_qgetbndl(f, 0, &mut lo), SimplexStatus::Ok);
        assert_eq!(lo, 42);
        let mut snap = [0u8; 16];
        assert_eq!(simplex_scratch_snapshot(f, snap.as_mut_ptr()), SimplexStatus::Ok);
        assert_eq!(&snap[..8], &42u64.to_le_bytes());
        assert_eq!(simplex_getbndl(f, 0, &mut lo), SimplexStatus::Ok);
        assert_eq!(simplex_scratch_snapshot(f, snap.as_mut_ptr()), SimplexStatus::Ok);
        assert_eq!(snap, [0; 16]);

        assert_eq!(simplex_reset_slot(f, 2), SimplexStatus::Ok);
        assert_eq!(simplex_getbnd128(f, 2, &mut lo, &mut hi), SimplexStatus::Ok);
        assert_eq!((lo, hi), (u64::MAX, 0));
        assert_eq!(simplex_reset_all(f), SimplexStatus::Ok);
        assert_eq!(simplex_getbndl(f, 1, &mut lo), SimplexStatus::Ok);
        assert_eq!(lo, u64::MAX);

        assert_eq!(simplex_process_specific_finish(f), SimplexStatus::Ok);
        assert_eq!(simplex_process_specific_finish(f), SimplexStatus::Ok);
        assert_eq!(simplex_getbndl(f, 1, &mut lo), SimplexStatus::Disabled);
        assert_eq!(simplex_file_free(f), SimplexStatus::Ok);
    }
}

#[test]
fn argument_errors() {
    let f = new_emulated();
    unsafe {
        assert_eq!(simplex_process_specific_init(f), SimplexStatus::Ok);
        assert_eq!(simplex_setbndl(f, 4, 1), SimplexStatus::InvalidSlot);
        assert_eq!(simplex_getbndl(f, 0, ptr::null_mut()), SimplexStatus::NullPointer);
        assert_eq!(simplex_getbnd128(f, 0, ptr::null_mut(), &mut 0), SimplexStatus::NullPointer);
        assert_eq!(simplex_setbndl(ptr::null_mut(), 0, 1), SimplexStatus::NullPointer);
        assert_eq!(simplex_file_new(SimplexBackend::Emulated, ptr::null_mut()), SimplexStatus::NullPointer);
        assert_eq!(simplex_probe(ptr::null_mut()), SimplexStatus::NullPointer);
        assert_eq!(simplex_file_free(ptr::null_mut()), SimplexStatus::Ok);
        assert_eq!(simplex_file_free(f), SimplexStatus::Ok);
    }
}

#[test]
fn probe_and_backend_selection() {
    let mut r = SimplexProbeReport {
        cpu_has_mpx: true,
        xstate_bndregs: true,
        xstate_bndcsr: true,
        os_context_saves_mpx: true,
        selected: SimplexBackend::Auto,
    };
    assert_eq!(unsafe { simplex_probe(&mut r) }, SimplexStatus::Ok);
    assert_ne!(r.selected, SimplexBackend::Auto);
    let capable = r.cpu_has_mpx && r.os_context_saves_mpx;

    let mut f = ptr::null_mut();
    let s = unsafe { simplex_file_new(SimplexBackend::Hardware, &mut f) };
    if capable {
        assert_eq!(s, SimplexStatus::Ok);
    } else {
        assert_eq!(s, SimplexStatus::HardwareUnavailable);
        assert!(f.is_null());
    }
    unsafe { simplex_file_free(f) };

    let mut f = ptr::null_mut();
    assert_eq!(unsafe { simplex_file_new(SimplexBackend::Auto, &mut f) }, SimplexStatus::Ok);
    let mut b = SimplexBackend::Auto;
    assert_eq!(unsafe { simplex_file_backend(f, &mut b) }, SimplexStatus::Ok);
    assert_eq!(b, r.selected);
    unsafe { simplex_file_free(f) };
}

#[test]
fn handles_are_thread_bound() {
    let f = new_emulated();
    let addr = f as usize;
    let s = std::thread::spawn(move || unsafe {
        let f = addr as *mut SimplexFile;
        (simplex_process_specific_init(f), simplex_file_free(f))
    })
    .join()
    .unwrap();
    assert_eq!(s, (SimplexStatus::WrongThread, SimplexStatus::WrongThread));
    unsafe {
        let mut on = true;
        assert_eq!(simplex_is_enabled(f, &mut on), SimplexStatus::Ok);
        assert!(!on);
        assert_eq!(simplex_file_free(f), SimplexStatus::Ok);
    }
}

#[test]
fn status_strings() {
    for s in [
        SimplexStatus::Ok,
        SimplexStatus::NullPointer,
        SimplexStatus::InvalidSlot,
        SimplexStatus::Disabled,
        SimplexStatus::HardwareUnavailable,
        SimplexStatus::HardwareBusy,
        SimplexStatus::InvalidBackend,
        SimplexStatus::WrongThread,
        SimplexStatus::Internal,
        SimplexStatus::Panic,
    ] {
        let text = unsafe { CStr::from_ptr(simplex_status_str(s)) };
        assert!(!text.to_bytes().is_empty());
    }
    let ok = unsafe { CStr::from_ptr(simplex_status_str(SimplexStatus::Ok)) };
    assert_eq!(ok.to_str().unwrap(), "ok");
}
