//! Four 128-bit storage slots backed by the MPX bounds registers.
//!
//! A [`RegisterFile`] exposes the accessor/mutator family over BND0..BND3:
//! lower half, upper half, full 128 bits, and a "quick" lower-half pair that
//! neither preserves the upper half on write nor sanitizes the spill area on
//! read. Two backends implement the same contract:
//!
//! * [`BackendKind::Hardware`] drives the real registers with `bndmk` (write)
//!   and `bndmov` (spill to memory, then read back with ordinary loads).
//! * [`BackendKind::Emulated`] keeps the four slots in process memory and
//!   mirrors the hardware's observable behaviour bit for bit, including the
//!   upper half left behind by the quick write.
//!
//! Halves are raw 64-bit payloads. The hardware keeps the upper bound in
//! one's complement form; the write path compensates so that what a spill
//! shows is exactly what was written.
//!
//! Reads go through a 16-byte scratch area owned by the file. Sanitizing
//! reads zero it before returning; [`RegisterFile::scratch_snapshot`] lets
//! tests confirm that.

#[cfg(target_arch = "x86_64")]
mod hw;

use std::fmt;
use std::marker::PhantomData;
use std::ptr;
use std::sync::atomic::{compiler_fence, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower half of a slot after initialization or reset.
pub const LOW_RESET: u64 = u64::MAX;
/// Upper half of a slot after initialization or reset.
pub const HIGH_RESET: u64 = 0;

/// One of the four bounds registers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum SlotId {
    Bnd0 = 0,
    Bnd1 = 1,
    Bnd2 = 2,
    Bnd3 = 3,
}

impl SlotId {
    pub const ALL: [SlotId; 4] = [SlotId::Bnd0, SlotId::Bnd1, SlotId::Bnd2, SlotId::Bnd3];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: u8) -> Result<Self> {
        match index {
            0 => Ok(SlotId::Bnd0),
            1 => Ok(SlotId::Bnd1),
            2 => Ok(SlotId::Bnd2),
            3 => Ok(SlotId::Bnd3),
            other => Err(Error::InvalidSlot(other)),
        }
    }
}

impl TryFrom<u8> for SlotId {
    type Error = Error;

    fn try_from(index: u8) -> Result<Self> {
        SlotId::from_index(index)
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BND{}", self.index())
    }
}

/// Raw contents of one 128-bit slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundsSlot {
    pub low: u64,
    pub high: u64,
}

impl BoundsSlot {
    pub const RESET: BoundsSlot = BoundsSlot {
        low: LOW_RESET,
        high: HIGH_RESET,
    };

    pub const fn new(low: u64, high: u64) -> Self {
        BoundsSlot { low, high }
    }

    pub const fn is_reset(&self) -> bool {
        self.low == LOW_RESET && self.high == HIGH_RESET
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Hardware,
    Emulated,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Hardware => "hardware",
            BackendKind::Emulated => "emulated",
        })
    }
}

#[repr(C, align(16))]
struct Scratch([u64; 2]);

/// The calling thread's view of the four slots.
///
/// A file starts disabled; [`RegisterFile::init`] (or
/// [`crate::runtime::process_specific_init`]) enables it. Every slot
/// operation on a disabled file fails with [`Error::Disabled`] and leaves
/// state untouched.
///
/// Files are pinned to the thread that created them (`!Send`, `!Sync`):
/// the hardware registers are per-thread CPU context. At most one hardware
/// file can exist per thread. Use [`crate::context::spawn_inheriting`] to
/// start a thread with a copy of the current slots.
pub struct RegisterFile {
    backend: BackendKind,
    enabled: bool,
    slots: [BoundsSlot; 4],
    scratch: Scratch,
    _thread_bound: PhantomData<*mut ()>,
}

impl fmt::Debug for RegisterFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Slot payloads are deliberately not printed.
        f.debug_struct("RegisterFile")
            .field("backend", &self.backend)
            .field("enabled", &self.enabled)
            .finish_non_exhaustive()
    }
}

impl RegisterFile {
    /// Creates a disabled register file on the given backend.
    ///
    /// Hardware files require a positive probe and fail with
    /// [`Error::HardwareBusy`] if this thread already owns one.
    pub fn new(backend: BackendKind) -> Result<Self> {
        if backend == BackendKind::Hardware {
            claim_hardware()?;
        }
        Ok(RegisterFile {
            backend,
            enabled: false,
            slots: [BoundsSlot::RESET; 4],
            scratch: Scratch([0; 2]),
            _thread_bound: PhantomData,
        })
    }

    pub fn backend(&self) -> BackendKind {
        self.backend
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    #[inline]
    fn ensure_enabled(&self) -> Result<()> {
        if self.enabled {
            Ok(())
        } else {
            Err(Error::Disabled)
        }
    }

    /// Copies the full 128-bit slot into the scratch area.
    #[inline(always)]
    fn spill(&mut self, slot: SlotId) {
        let dst = self.scratch.0.as_mut_ptr();
        match self.backend {
            #[cfg(target_arch = "x86_64")]
            BackendKind::Hardware => unsafe { hw::spill(slot, dst) },
            #[cfg(not(target_arch = "x86_64"))]
            BackendKind::Hardware => unreachable!("hardware backend is x86_64 only"),
            BackendKind::Emulated => {
                let s = self.slots[slot.index()];
                // SAFETY: dst points at our own two-quadword scratch.
                unsafe {
                    ptr::write_volatile(dst, s.low);
                    ptr::write_volatile(dst.add(1), s.high);
                }
            }
        }
        compiler_fence(Ordering::SeqCst);
    }

    #[inline(always)]
    fn scratch_low(&self) -> u64 {
        // SAFETY: reads our own initialized scratch.
        unsafe { ptr::read_volatile(self.scratch.0.as_ptr()) }
    }

    #[inline(always)]
    fn scratch_high(&self) -> u64 {
        unsafe { ptr::read_volatile(self.scratch.0.as_ptr().add(1)) }
    }

    #[inline(always)]
    fn sanitize(&mut self) {
        let dst = self.scratch.0.as_mut_ptr();
        // SAFETY: volatile writes to our own scratch; they cannot be elided.
        unsafe {
            ptr::write_volatile(dst, 0);
            ptr::write_volatile(dst.add(1), 0);
        }
        compiler_fence(Ordering::SeqCst);
    }

    #[inline(always)]
    fn store(&mut self, slot: SlotId, low: u64, high: u64) {
        match self.backend {
            #[cfg(target_arch = "x86_64")]
            BackendKind::Hardware => unsafe { hw::write_raw(slot, low, high) },
            #[cfg(not(target_arch = "x86_64"))]
            BackendKind::Hardware => unreachable!("hardware backend is x86_64 only"),
            BackendKind::Emulated => self.slots[slot.index()] = BoundsSlot { low, high },
        }
    }

    /// Spill, read both halves, and sanitize.
    #[inline(always)]
    fn read_sanitized(&mut self, slot: SlotId) -> BoundsSlot {
        self.spill(slot);
        let out = BoundsSlot {
            low: self.scratch_low(),
            high: self.scratch_high(),
        };
        self.sanitize();
        out
    }

    /// Writes the lower half, preserving the upper half.
    #[inline]
    pub fn setbnd_low(&mut self, slot: SlotId, value: u64) -> Result<()> {
        self.ensure_enabled()?;
        match self.backend {
            BackendKind::Emulated => self.slots[slot.index()].low = value,
            BackendKind::Hardware => {
                let high = self.read_sanitized(slot).high;
                self.store(slot, value, high);
            }
        }
        Ok(())
    }

    /// Writes the upper half, preserving the lower half.
    #[inline]
    pub fn setbnd_high(&mut self, slot: SlotId, value: u64) -> Result<()> {
        self.ensure_enabled()?;
        match self.backend {
            BackendKind::Emulated => self.slots[slot.index()].high = value,
            BackendKind::Hardware => {
                let low = self.read_sanitized(slot).low;
                self.store(slot, low, value);
            }
        }
        Ok(())
    }

    #[inline]
    pub fn setbnd128(&mut self, slot: SlotId, low: u64, high: u64) -> Result<()> {
        self.ensure_enabled()?;
        self.store(slot, low, high);
        Ok(())
    }

    /// Writes the lower half with a single `bndmk` and zero index.
    ///
    /// The upper half is not preserved; callers must treat it as garbage.
    /// (Both backends leave `!value` there, which is what the hardware does.)
    #[inline]
    pub fn qsetbnd_low(&mut self, slot: SlotId, value: u64) -> Result<()> {
        self.ensure_enabled()?;
        match self.backend {
            #[cfg(target_arch = "x86_64")]
            BackendKind::Hardware => unsafe { hw::make(slot, value, 0) },
            #[cfg(not(target_arch = "x86_64"))]
            BackendKind::Hardware => unreachable!("hardware backend is x86_64 only"),
            BackendKind::Emulated => {
                self.slots[slot.index()] = BoundsSlot {
                    low: value,
                    high: !value,
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn getbnd_low(&mut self, slot: SlotId) -> Result<u64> {
        self.ensure_enabled()?;
        Ok(self.read_sanitized(slot).low)
    }

    #[inline]
    pub fn getbnd_high(&mut self, slot: SlotId) -> Result<u64> {
        self.ensure_enabled()?;
        Ok(self.read_sanitized(slot).high)
    }

    #[inline]
    pub fn getbnd128(&mut self, slot: SlotId) -> Result<(u64, u64)> {
        self.ensure_enabled()?;
        let s = self.read_sanitized(slot);
        Ok((s.low, s.high))
    }

    /// Reads the lower half without sanitizing; the spilled slot stays in
    /// the scratch area until the next read overwrites it.
    #[inline]
    pub fn qgetbnd_low(&mut self, slot: SlotId) -> Result<u64> {
        self.ensure_enabled()?;
        self.spill(slot);
        Ok(self.scratch_low())
    }

    pub fn reset_slot(&mut self, slot: SlotId) -> Result<()> {
        self.ensure_enabled()?;
        self.store(slot, LOW_RESET, HIGH_RESET);
        Ok(())
    }

    pub fn reset_all(&mut self) -> Result<()> {
        self.ensure_enabled()?;
        self.reset_slots();
        Ok(())
    }

    fn reset_slots(&mut self) {
        for slot in SlotId::ALL {
            self.store(slot, LOW_RESET, HIGH_RESET);
        }
    }

    /// Copy of the 16-byte spill area (test hook).
    pub fn scratch_snapshot(&self) -> [u8; 16] {
        let mut out = [0u8; 16];
        out[..8].copy_from_slice(&self.scratch_low().to_le_bytes());
        out[8..].copy_from_slice(&self.scratch_high().to_le_bytes());
        out
    }

    /// Raw slot contents regardless of the enable state.
    ///
    /// Diagnostic only: the lifecycle harnesses use it to inspect what a
    /// finalized context leaves behind. The hardware backend reads the
    /// registers through XSAVE rather than `bndmov`, which is a no-op while
    /// MPX is disabled.
    pub fn raw_state(&self) -> Result<[BoundsSlot; 4]> {
        match self.backend {
            BackendKind::Emulated => Ok(self.slots),
            #[cfg(target_arch = "x86_64")]
            BackendKind::Hardware => {
                hw::read_bounds().map_err(|e| Error::HardwareUnavailable(e.to_string()))
            }
            #[cfg(not(target_arch = "x86_64"))]
            BackendKind::Hardware => unreachable!("hardware backend is x86_64 only"),
        }
    }

    /// Whether the CPU (hardware) or file (emulated) currently has slot
    /// operations enabled. On hardware this reads BNDCFGU directly.
    pub fn observed_enabled(&self) -> Result<bool> {
        match self.backend {
            BackendKind::Emulated => Ok(self.enabled),
            #[cfg(target_arch = "x86_64")]
            BackendKind::Hardware => hw::read_config()
                .map(|cfg| cfg & 1 == 1)
                .map_err(|e| Error::HardwareUnavailable(e.to_string())),
            #[cfg(not(target_arch = "x86_64"))]
            BackendKind::Hardware => unreachable!("hardware backend is x86_64 only"),
        }
    }

    /// Enables the file and resets all four slots. Re-initializing an
    /// enabled file is legal and discards whatever the slots held.
    pub fn init(&mut self) -> Result<()> {
        match self.backend {
            BackendKind::Emulated => {}
            #[cfg(target_arch = "x86_64")]
            BackendKind::Hardware => {
                hw::enable().map_err(|e| Error::HardwareUnavailable(e.to_string()))?
            }
            #[cfg(not(target_arch = "x86_64"))]
            BackendKind::Hardware => unreachable!("hardware backend is x86_64 only"),
        }
        self.enabled = true;
        self.reset_slots();
        self.sanitize();
        Ok(())
    }

    /// Resets all slots and disables the file. Finishing a disabled file is
    /// a no-op.
    pub fn finish(&mut self) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        self.reset_slots();
        self.sanitize();
        match self.backend {
            BackendKind::Emulated => {}
            #[cfg(target_arch = "x86_64")]
            BackendKind::Hardware => {
                hw::disable().map_err(|e| Error::HardwareUnavailable(e.to_string()))?
            }
            #[cfg(not(target_arch = "x86_64"))]
            BackendKind::Hardware => unreachable!("hardware backend is x86_64 only"),
        }
        self.enabled = false;
        Ok(())
    }
}

impl Drop for RegisterFile {
    fn drop(&mut self) {
        self.sanitize();
        #[cfg(target_arch = "x86_64")]
        if self.backend == BackendKind::Hardware {
            hw::release();
        }
    }
}

fn claim_hardware() -> Result<()> {
    let report = crate::probe::probe();
    if !report.hardware_capable() {
        return Err(Error::HardwareUnavailable(report.unavailable_reason()));
    }
    #[cfg(target_arch = "x86_64")]
    {
        if hw::claim() {
            Ok(())
        } else {
            Err(Error::HardwareBusy)
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        Err(Error::HardwareUnavailable("not an x86_64 target".into()))
    }
}
