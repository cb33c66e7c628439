//! Two-share XOR hiding and the unhiding traversal.
//!
//! A secret is split into a random share A and B = secret ^ A. Only the
//! shares' addresses are kept, and only in two bounds slots; the
//! [`HiddenBuffer`] handle itself stores no pointer. Unhiding walks both
//! shares and XORs them back together.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use zeroize::Zeroize;

use super::{fold_bytes, gpr, measure, size_label, BenchRecord, Fixture, Target, STANDARD_SIZES};
use crate::error::{Error, Result};
use crate::regfile::{RegisterFile, SlotId};

/// How often the share addresses are re-read from their slots while
/// unhiding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reload {
    /// Both addresses re-read (quick path) for every byte.
    #[default]
    PerByte,
    /// Both addresses read once (sanitizing) per pass over the buffer.
    PerPass,
}

impl FromStr for Reload {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-byte" => Ok(Reload::PerByte),
            "per-pass" => Ok(Reload::PerPass),
            other => Err(Error::InvalidParameter(format!(
                "unknown reload mode {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Reload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reload::PerByte => "per-byte",
            Reload::PerPass => "per-pass",
        })
    }
}

/// Handle to a secret split across two shares whose addresses live only in
/// `slot_a` and `slot_b`.
///
/// The shares are freed by [`HiddenBuffer::release`]. Dropping the handle
/// without releasing it leaks them, since the handle has no way to find
/// them without the register file.
#[must_use = "hidden shares leak unless released"]
#[derive(Debug)]
pub struct HiddenBuffer {
    len: usize,
    slot_a: SlotId,
    slot_b: SlotId,
    key: u64,
    fingerprint: u64,
}

fn mix(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fingerprint(key: u64, a: u64, b: u64) -> u64 {
    mix(a ^ key) ^ mix(b ^ key.rotate_left(29)).rotate_left(1)
}

fn alloc_share(len: usize) -> *mut u8 {
    Box::into_raw(vec![0u8; len].into_boxed_slice()) as *mut u8
}

/// # Safety
/// `ptr` must come from `alloc_share(len)` and not have been freed.
unsafe fn free_share(ptr: *mut u8, len: usize) {
    let mut b = Box::from_raw(std::ptr::slice_from_raw_parts_mut(ptr, len));
    b.zeroize();
}

/// Splits `secret` into two shares, parks their addresses in `slot_a` and
/// `slot_b`, and wipes `secret`.
pub fn hide_split<R: RngCore + ?Sized>(
    file: &mut RegisterFile,
    secret: &mut [u8],
    rng: &mut R,
    slot_a: SlotId,
    slot_b: SlotId,
) -> Result<HiddenBuffer> {
    if !file.is_enabled() {
        return Err(Error::Disabled);
    }
    if slot_a == slot_b {
        return Err(Error::InvalidParameter(
            "shares need two distinct slots".into(),
        ));
    }
    let len = secret.len();
    let a = alloc_share(len);
    let b = alloc_share(len);
    // SAFETY: both allocations are `len` bytes and exclusively ours.
    unsafe {
        let sa = std::slice::from_raw_parts_mut(a, len);
        let sb = std::slice::from_raw_parts_mut(b, len);
        rng.fill_bytes(sa);
        for ((x, y), s) in sa.iter().zip(sb.iter_mut()).zip(secret.iter()) {
            *y = x ^ s;
        }
    }
    secret.zeroize();

    let key = rng.next_u64();
    let (addr_a, addr_b) = (a as u64, b as u64);
    file.qsetbnd_low(slot_a, addr_a)?;
    file.qsetbnd_low(slot_b, addr_b)?;
    Ok(HiddenBuffer {
        len,
        slot_a,
        slot_b,
        key,
        fingerprint: fingerprint(key, addr_a, addr_b),
    })
}

impl HiddenBuffer {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn slots(&self) -> (SlotId, SlotId) {
        (self.slot_a, self.slot_b)
    }

    /// Reads both addresses (sanitizing) and checks they still belong to
    /// this buffer.
    fn addresses(&self, file: &mut RegisterFile) -> Result<(*const u8, *const u8)> {
        let a = file.getbnd_low(self.slot_a)?;
        let b = file.getbnd_low(self.slot_b)?;
        if fingerprint(self.key, a, b) != self.fingerprint {
            return Err(Error::SlotClobbered);
        }
        Ok((a as *const u8, b as *const u8))
    }

    /// Borrow both shares.
    pub fn shares<'a>(&'a self, file: &mut RegisterFile) -> Result<(&'a [u8], &'a [u8])> {
        let (a, b) = self.addresses(file)?;
        // SAFETY: the fingerprint ties the addresses to our live allocations.
        unsafe {
            Ok((
                std::slice::from_raw_parts(a, self.len),
                std::slice::from_raw_parts(b, self.len),
            ))
        }
    }

    /// Reconstructs the secret into `out`.
    pub fn unhide_combine(
        &self,
        file: &mut RegisterFile,
        out: &mut [u8],
        reload: Reload,
    ) -> Result<()> {
        if out.len() != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: out.len(),
            });
        }
        let (a, b) = self.addresses(file)?;
        match reload {
            // SAFETY: addresses verified above; `file` is borrowed mutably
            // for the whole pass so the slots cannot change underneath us.
            Reload::PerPass => unsafe { combine_pinned(a, b, out) },
            Reload::PerByte => {
                let dst = out.as_mut_ptr();
                for i in 0..self.len {
                    let pa = file.qgetbnd_low(self.slot_a)? as *const u8;
                    let pb = file.qgetbnd_low(self.slot_b)? as *const u8;
                    unsafe { *dst.add(i) = *pa.add(i) ^ *pb.add(i) };
                }
            }
        }
        Ok(())
    }

    /// Frees both shares (zeroizing them) and resets the two slots.
    pub fn release(self, file: &mut RegisterFile) -> Result<()> {
        let (a, b) = self.addresses(file)?;
        // SAFETY: verified addresses of our own allocations, freed once.
        unsafe {
            free_share(a as *mut u8, self.len);
            free_share(b as *mut u8, self.len);
        }
        file.reset_slot(self.slot_a)?;
        file.reset_slot(self.slot_b)?;
        Ok(())
    }
}

/// Free-function form of [`HiddenBuffer::unhide_combine`].
pub fn unhide_combine(
    file: &mut RegisterFile,
    hidden: &HiddenBuffer,
    out: &mut [u8],
    reload: Reload,
) -> Result<()> {
    hidden.unhide_combine(file, out, reload)
}

/// XOR traversal with both base pointers pinned in general-purpose
/// registers, one byte at a time.
///
/// # Safety
/// `a` and `b` must be valid for `out.len()` reads.
#[inline(never)]
unsafe fn combine_pinned(mut a: *const u8, mut b: *const u8, out: &mut [u8]) {
    let dst = out.as_mut_ptr();
    for i in 0..out.len() {
        gpr::pin(&mut a, &mut b);
        *dst.add(i) = *a.add(i) ^ *b.add(i);
    }
}

/// Baseline traversal over ordinary buffers.
pub fn combine_plain(a: &[u8], b: &[u8], out: &mut [u8]) -> Result<()> {
    if a.len() != out.len() || b.len() != out.len() {
        return Err(Error::LengthMismatch {
            expected: out.len(),
            actual: a.len().min(b.len()),
        });
    }
    unsafe { combine_pinned(a.as_ptr(), b.as_ptr(), out) };
    Ok(())
}

/// Times the baseline and slot-backed unhiding of a random `size`-byte
/// secret over `runs` runs of `iters` full passes each.
///
/// Returns `(baseline, slot)`; the slot record carries the overhead. Every
/// run's output is compared with the original secret. Uses BND0 and BND1.
pub fn bench_traversal(
    file: &mut RegisterFile,
    size: usize,
    runs: u64,
    iters: u64,
    reload: Reload,
    seed: u64,
) -> Result<(BenchRecord, BenchRecord)> {
    if !file.is_enabled() {
        return Err(Error::Disabled);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut secret = vec![0u8; size];
    rng.fill_bytes(&mut secret);
    let expected = secret.clone();
    let hidden = hide_split(file, &mut secret, &mut rng, SlotId::Bnd0, SlotId::Bnd1)?;

    let result = run_traversal(file, &hidden, &expected, runs, iters, reload);
    hidden.release(file)?;
    let (base, slot) = result?;

    let note = if STANDARD_SIZES.contains(&size) {
        ""
    } else {
        " (non-standard size)"
    };
    let detail = format!("unhide {}{note}", size_label(size));
    let base = base.into_record(
        Fixture::Traversal,
        Target::GeneralPurposeBaseline,
        detail.clone(),
        size,
        runs,
        iters,
        size as u64,
    );
    let mut slot = slot.into_record(
        Fixture::Traversal,
        Target::SlotBacked,
        format!("{detail} reload={reload}"),
        size,
        runs,
        iters,
        size as u64,
    );
    slot.attach_overhead(&base);
    Ok((base, slot))
}

fn run_traversal(
    file: &mut RegisterFile,
    hidden: &HiddenBuffer,
    expected: &[u8],
    runs: u64,
    iters: u64,
    reload: Reload,
) -> Result<(super::Measured, super::Measured)> {
    let size = expected.len();
    let mismatch = || Error::OracleMismatch(format!("traversal {}", size_label(size)));
    let mut out = vec![0u8; size];

    let (a, b) = hidden.shares(file)?;
    let (a, b) = (a.to_vec(), b.to_vec());
    let out_cell = std::cell::RefCell::new(&mut out);
    let base = measure(
        runs,
        || {
            let mut o = out_cell.borrow_mut();
            for _ in 0..iters {
                combine_plain(&a, &b, &mut o)?;
            }
            Ok(fold_bytes(&o))
        },
        || {
            if out_cell.borrow().as_slice() == expected {
                Ok(())
            } else {
                Err(mismatch())
            }
        },
    )?;

    let slot = measure(
        runs,
        || {
            let mut o = out_cell.borrow_mut();
            o.fill(0);
            for _ in 0..iters {
                hidden.unhide_combine(file, &mut o, reload)?;
            }
            Ok(fold_bytes(&o))
        },
        || {
            if out_cell.borrow().as_slice() == expected {
                Ok(())
            } else {
                Err(mismatch())
            }
        },
    )?;
    Ok((base, slot))
}
