//! Raw MPX instruction wrappers for the hardware backend.
//!
//! The assembler rejects MPX mnemonics, so `bndmk` and `bndmov` are emitted
//! as encoded bytes with fixed operand registers:
//!
//! * `bndmk bndN, [rsi + rdi*1]`  is `F3 0F 1B /r` with ModRM `04|N<<3`, SIB `3E`
//! * `bndmov [rdx], bndN`         is `66 0F 1B /r` with ModRM `02|N<<3`
//!
//! `bndmk` stores the base as the lower bound and the one's complement of the
//! effective address as the upper bound. Callers pre-compensate the index so
//! the raw upper half comes out as the requested payload.
//!
//! Every function here is a no-op on CPUs without MPX (the encodings live in
//! the hint-NOP space), which is why callers must consult the probe first.

use std::arch::asm;
use std::arch::x86_64::{__cpuid_count, _xrstor64, _xsave64};
use std::cell::Cell;

use super::{BoundsSlot, SlotId};

const XSTATE_BNDREGS: u64 = 1 << 3;
const XSTATE_BNDCSR: u64 = 1 << 4;
const XSAVE_HEADER_OFFSET: usize = 512;
const XSAVE_AREA_LEN: usize = 4096;

/// BNDCFGU bit 0 enables MPX, bit 1 preserves bounds across legacy branches.
/// Bits 63:12 (bounds directory base) are deliberately left zero.
const BNDCFG_ENABLE_PRESERVE: u64 = 0b11;

macro_rules! bndmk {
    ($modrm:literal, $base:expr, $index:expr) => {
        asm!(
            concat!(".byte 0xf3, 0x0f, 0x1b, ", $modrm, ", 0x3e"),
            in("rsi") $base,
            in("rdi") $index,
            options(nomem, nostack, preserves_flags),
        )
    };
}

macro_rules! bndmov_store {
    ($modrm:literal, $dst:expr) => {
        asm!(
            concat!(".byte 0x66, 0x0f, 0x1b, ", $modrm),
            in("rdx") $dst,
            options(nostack, preserves_flags),
        )
    };
}

/// Executes `bndmk` on `slot` with the given base and index operands.
///
/// # Safety
/// MPX must be enabled on the calling thread, or the instruction is a NOP.
#[inline(always)]
pub(super) unsafe fn make(slot: SlotId, base: u64, index: u64) {
    match slot {
        SlotId::Bnd0 => bndmk!("0x04", base, index),
        SlotId::Bnd1 => bndmk!("0x0c", base, index),
        SlotId::Bnd2 => bndmk!("0x14", base, index),
        SlotId::Bnd3 => bndmk!("0x1c", base, index),
    }
}

/// Writes the raw pair `(low, high)` into `slot`.
///
/// # Safety
/// As [`make`].
#[inline(always)]
pub(super) unsafe fn write_raw(slot: SlotId, low: u64, high: u64) {
    // lea = base + index must equal !high so that NOT(lea) == high.
    make(slot, low, (!high).wrapping_sub(low));
}

/// Spills the 128-bit contents of `slot` to `dst`.
///
/// # Safety
/// `dst` must be valid for a 16-byte write. MPX must be enabled.
#[inline(always)]
pub(super) unsafe fn spill(slot: SlotId, dst: *mut u64) {
    match slot {
        SlotId::Bnd0 => bndmov_store!("0x02", dst),
        SlotId::Bnd1 => bndmov_store!("0x0a", dst),
        SlotId::Bnd2 => bndmov_store!("0x12", dst),
        SlotId::Bnd3 => bndmov_store!("0x1a", dst),
    }
}

#[repr(C, align(64))]
struct XsaveArea([u8; XSAVE_AREA_LEN]);

impl XsaveArea {
    fn zeroed() -> Box<Self> {
        Box::new(XsaveArea([0; XSAVE_AREA_LEN]))
    }

    fn read_u64(&self, offset: usize) -> u64 {
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&self.0[offset..offset + 8]);
        u64::from_le_bytes(bytes)
    }

    fn write_u64(&mut self, offset: usize, value: u64) {
        self.0[offset..offset + 8].copy_from_slice(&value.to_le_bytes());
    }

    fn xstate_bv(&self) -> u64 {
        self.read_u64(XSAVE_HEADER_OFFSET)
    }
}

/// Standard-format offset of an XSAVE state component, from CPUID leaf 0xD.
fn component_offset(component: u32) -> Option<usize> {
    // SAFETY: cpuid is available on every x86_64 processor.
    let leaf = __cpuid_count(0xd, component);
    let offset = leaf.ebx as usize;
    let size = leaf.eax as usize;
    if offset == 0 || size < 64 || offset + 64 > XSAVE_AREA_LEN {
        None
    } else {
        Some(offset)
    }
}

#[target_feature(enable = "xsave")]
unsafe fn xrstor(area: &XsaveArea, mask: u64) {
    _xrstor64(area.0.as_ptr(), mask);
}

#[target_feature(enable = "xsave")]
unsafe fn xsave(area: &mut XsaveArea, mask: u64) {
    _xsave64(area.0.as_mut_ptr(), mask);
}

fn restore_config(config: Option<u64>) -> Result<(), &'static str> {
    let offset = component_offset(4).ok_or("BNDCSR component offset unavailable")?;
    let mut area = XsaveArea::zeroed();
    if let Some(config) = config {
        area.write_u64(XSAVE_HEADER_OFFSET, XSTATE_BNDCSR);
        area.write_u64(offset, config);
    }
    // A clear XSTATE_BV bit makes xrstor load the component's init state,
    // which for BNDCSR is all-zero (disabled).
    // SAFETY: the caller verified XCR0[4] through the probe; the area is
    // 64-byte aligned and large enough for the component.
    unsafe { xrstor(&area, XSTATE_BNDCSR) };
    Ok(())
}

/// Sets BNDCFGU to enable + preserve, with no bounds directory.
pub(super) fn enable() -> Result<(), &'static str> {
    restore_config(Some(BNDCFG_ENABLE_PRESERVE))
}

/// Returns BNDCFGU to its init state.
pub(super) fn disable() -> Result<(), &'static str> {
    restore_config(None)
}

/// Current BNDCFGU value as seen through XSAVE.
pub(super) fn read_config() -> Result<u64, &'static str> {
    let offset = component_offset(4).ok_or("BNDCSR component offset unavailable")?;
    let mut area = XsaveArea::zeroed();
    // SAFETY: see restore_config.
    unsafe { xsave(&mut area, XSTATE_BNDCSR) };
    if area.xstate_bv() & XSTATE_BNDCSR == 0 {
        Ok(0)
    } else {
        Ok(area.read_u64(offset))
    }
}

/// Raw contents of BND0..BND3 through XSAVE; works while MPX is disabled.
pub(super) fn read_bounds() -> Result<[BoundsSlot; 4], &'static str> {
    let offset = component_offset(3).ok_or("BNDREGS component offset unavailable")?;
    let mut area = XsaveArea::zeroed();
    // SAFETY: see restore_config; XCR0[3] is part of the same probe check.
    unsafe { xsave(&mut area, XSTATE_BNDREGS) };
    let mut slots = [BoundsSlot { low: 0, high: 0 }; 4];
    if area.xstate_bv() & XSTATE_BNDREGS != 0 {
        for (i, slot) in slots.iter_mut().enumerate() {
            slot.low = area.read_u64(offset + 16 * i);
            slot.high = area.read_u64(offset + 16 * i + 8);
        }
    }
    Ok(slots)
}

thread_local! {
    static CLAIMED: Cell<bool> = const { Cell::new(false) };
}

/// Marks the calling thread's bounds registers as owned by one register file.
pub(super) fn claim() -> bool {
    CLAIMED.with(|c| !c.replace(true))
}

pub(super) fn release() {
    CLAIMED.with(|c| c.set(false));
}
