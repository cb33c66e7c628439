//! The five `string.h` memory primitives, in two flavours.
//!
//! The reference versions take buffers the ordinary way. The slot versions
//! take no buffer addresses at all: the caller parks the addresses in bounds
//! slots (usually with [`RegisterFile::qsetbnd_low`]) and the function loads
//! each one once per call before running the same byte loop.
//!
//! The loops are the plain byte-at-a-time algorithms from libgcc; there are
//! no vectorized fast paths.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regfile::{RegisterFile, SlotId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    MemCmp,
    MemCpy,
    MemMove,
    MemSet,
    MemChr,
}

impl OpKind {
    pub const ALL: [OpKind; 5] = [
        OpKind::MemCmp,
        OpKind::MemCpy,
        OpKind::MemMove,
        OpKind::MemSet,
        OpKind::MemChr,
    ];

    /// Whether the operation writes its destination buffer.
    pub fn writes(self) -> bool {
        matches!(self, OpKind::MemCpy | OpKind::MemMove | OpKind::MemSet)
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::MemCmp => "memcmp",
            OpKind::MemCpy => "memcpy",
            OpKind::MemMove => "memmove",
            OpKind::MemSet => "memset",
            OpKind::MemChr => "memchr",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown string op {s:?}")))
    }
}

/// Result of one primitive call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpResult {
    /// memcmp: difference of the first mismatching bytes as unsigned values.
    Ordering(i32),
    /// memchr: offset of the first match.
    Offset(Option<usize>),
    /// memcpy, memmove, memset.
    Done,
}

impl OpResult {
    /// Normalizes memcmp results to -1/0/1 so they can be compared with
    /// other implementations.
    pub fn normalized(self) -> Self {
        match self {
            OpResult::Ordering(d) => OpResult::Ordering(d.signum()),
            other => other,
        }
    }
}

// Raw byte loops shared by both flavours.

#[inline(never)]
unsafe fn memcmp_raw(a: *const u8, b: *const u8, n: usize) -> i32 {
    for i in 0..n {
        let (x, y) = (*a.add(i), *b.add(i));
        if x != y {
            return x as i32 - y as i32;
        }
    }
    0
}

#[inline(never)]
unsafe fn memcpy_raw(dst: *mut u8, src: *const u8, n: usize) {
    for i in 0..n {
        *dst.add(i) = *src.add(i);
    }
}

#[inline(never)]
unsafe fn memmove_raw(dst: *mut u8, src: *const u8, n: usize) {
    if (dst as usize) < (src as usize) {
        for i in 0..n {
            *dst.add(i) = *src.add(i);
        }
    } else {
        for i in (0..n).rev() {
            *dst.add(i) = *src.add(i);
        }
    }
}

#[inline(never)]
unsafe fn memset_raw(dst: *mut u8, c: u8, n: usize) {
    for i in 0..n {
        *dst.add(i) = c;
    }
}

#[inline(never)]
unsafe fn memchr_raw(s: *const u8, c: u8, n: usize) -> Option<usize> {
    (0..n).find(|&i| *s.add(i) == c)
}

/// Compares equal-length prefixes of `a` and `b` (`min` of the lengths).
pub fn ref_memcmp(a: &[u8], b: &[u8]) -> i32 {
    let n = a.len().min(b.len());
    unsafe { memcmp_raw(a.as_ptr(), b.as_ptr(), n) }
}

pub fn ref_memcpy(dst: &mut [u8], src: &[u8]) -> Result<()> {
    check_len(dst.len(), src.len())?;
    unsafe { memcpy_raw(dst.as_mut_ptr(), src.as_ptr(), src.len()) };
    Ok(())
}

/// memmove between two disjoint buffers.
pub fn ref_memmove(dst: &mut [u8], src: &[u8]) -> Result<()> {
    check_len(dst.len(), src.len())?;
    unsafe { memmove_raw(dst.as_mut_ptr(), src.as_ptr(), src.len()) };
    Ok(())
}

/// memmove of `n` bytes from `buf[src..]` to `buf[dst..]`; ranges may overlap.
pub fn ref_memmove_within(buf: &mut [u8], dst: usize, src: usize, n: usize) -> Result<()> {
    check_range(buf.len(), dst, n)?;
    check_range(buf.len(), src, n)?;
    let base = buf.as_mut_ptr();
    unsafe { memmove_raw(base.add(dst), base.add(src), n) };
    Ok(())
}

pub fn ref_memset(dst: &mut [u8], c: u8) {
    unsafe { memset_raw(dst.as_mut_ptr(), c, dst.len()) }
}

pub fn ref_memchr(s: &[u8], c: u8) -> Option<usize> {
    unsafe { memchr_raw(s.as_ptr(), c, s.len()) }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

fn check_range(len: usize, off: usize, n: usize) -> Result<()> {
    match off.checked_add(n) {
        Some(end) if end <= len => Ok(()),
        _ => Err(Error::InvalidParameter(format!(
            "range {off}..{off}+{n} exceeds buffer of {len} bytes"
        ))),
    }
}

/// Runs `kind` on ordinary buffers.
///
/// memcmp compares `src` with `dst`; memchr searches `src` for `aux`;
/// memset fills `dst` with `aux`; memcpy and memmove copy `src` into `dst`.
pub fn ref_op(kind: OpKind, src: &[u8], dst: &mut [u8], aux: u8) -> Result<OpResult> {
    Ok(match kind {
        OpKind::MemCmp => {
            check_len(src.len(), dst.len())?;
            OpResult::Ordering(ref_memcmp(src, dst))
        }
        OpKind::MemCpy => {
            ref_memcpy(dst, src)?;
            OpResult::Done
        }
        OpKind::MemMove => {
            ref_memmove(dst, src)?;
            OpResult::Done
        }
        OpKind::MemSet => {
            ref_memset(dst, aux);
            OpResult::Done
        }
        OpKind::MemChr => OpResult::Offset(ref_memchr(src, aux)),
    })
}

#[inline(always)]
fn load_addr(file: &mut RegisterFile, slot: SlotId) -> Result<usize> {
    match file.qgetbnd_low(slot)? {
        0 => Err(Error::NullSlotAddress(slot)),
        addr => Ok(addr as usize),
    }
}

/// memcmp of the buffers whose addresses sit in slots `a` and `b`.
///
/// # Safety
/// Both slots must hold addresses readable up to the first differing byte,
/// or for `n` bytes if there is none. Nothing past that byte is touched.
pub unsafe fn slot_memcmp(file: &mut RegisterFile, a: SlotId, b: SlotId, n: usize) -> Result<i32> {
    let pa = load_addr(file, a)? as *const u8;
    let pb = load_addr(file, b)? as *const u8;
    Ok(memcmp_raw(pa, pb, n))
}

/// # Safety
/// `dst` must hold an address valid for `n`-byte writes, `src` one valid for
/// `n`-byte reads, and the ranges must not overlap.
pub unsafe fn slot_memcpy(
    file: &mut RegisterFile,
    dst: SlotId,
    src: SlotId,
    n: usize,
) -> Result<()> {
    let pd = load_addr(file, dst)? as *mut u8;
    let ps = load_addr(file, src)? as *const u8;
    memcpy_raw(pd, ps, n);
    Ok(())
}

/// # Safety
/// As [`slot_memcpy`], except the ranges may overlap.
pub unsafe fn slot_memmove(
    file: &mut RegisterFile,
    dst: SlotId,
    src: SlotId,
    n: usize,
) -> Result<()> {
    let pd = load_addr(file, dst)? as *mut u8;
    let ps = load_addr(file, src)? as *const u8;
    memmove_raw(pd, ps, n);
    Ok(())
}

/// # Safety
/// `dst` must hold an address valid for `n`-byte writes.
pub unsafe fn slot_memset(file: &mut RegisterFile, dst: SlotId, c: u8, n: usize) -> Result<()> {
    let pd = load_addr(file, dst)? as *mut u8;
    memset_raw(pd, c, n);
    Ok(())
}

/// # Safety
/// `s` must hold an address readable up to the first `c`, or for `n` bytes
/// if there is none. Nothing past the match is touched.
pub unsafe fn slot_memchr(
    file: &mut RegisterFile,
    s: SlotId,
    c: u8,
    n: usize,
) -> Result<Option<usize>> {
    let ps = load_addr(file, s)? as *const u8;
    Ok(memchr_raw(ps, c, n))
}

/// Slot operands for [`slot_op`]; meanings follow [`ref_op`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotArgs {
    pub src: SlotId,
    pub dst: SlotId,
    pub len: usize,
    pub aux: u8,
}

/// Runs `kind` with every buffer address taken from a slot.
///
/// # Safety
/// The slots named in `args` must hold addresses valid for the accesses
/// `kind` performs over `args.len` bytes.
pub unsafe fn slot_op(kind: OpKind, file: &mut RegisterFile, args: SlotArgs) -> Result<OpResult> {
    let SlotArgs { src, dst, len, aux } = args;
    Ok(match kind {
        OpKind::MemCmp => OpResult::Ordering(slot_memcmp(file, src, dst, len)?),
        OpKind::MemCpy => {
            slot_memcpy(file, dst, src, len)?;
            OpResult::Done
        }
        OpKind::MemMove => {
            slot_memmove(file, dst, src, len)?;
            OpResult::Done
        }
        OpKind::MemSet => {
            slot_memset(file, dst, aux, len)?;
            OpResult::Done
        }
        OpKind::MemChr => OpResult::Offset(slot_memchr(file, src, aux, len)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regfile::BackendKind;
    use crate::runtime::process_specific_init;

    #[test]
    fn reference_basics() {
        let a = [7u8; 64];
        assert_eq!(ref_memcmp(&a, &a), 0);
        assert_eq!(ref_memchr(b"abc", b'b'), Some(1));
        assert_eq!(ref_memchr(b"abc", b'z'), None);
        assert!(ref_memcmp(b"ab\x01", b"ab\xff") < 0);
        assert!(ref_memcmp(b"\x80", b"\x7f") > 0);
        let mut z = vec![0xaau8; 4096];
        ref_memset(&mut z, 0);
        assert!(z.iter().all(|&b| b == 0));
    }

    #[test]
    fn overlapping_moves() {
        let orig: Vec<u8> = (0..32).collect();
        let mut fwd = orig.clone();
        ref_memmove_within(&mut fwd, 0, 4, 20).unwrap();
        assert_eq!(&fwd[..20], &orig[4..24]);
        let mut back = orig.clone();
        ref_memmove_within(&mut back, 4, 0, 20).unwrap();
        assert_eq!(&back[4..24], &orig[..20]);
        assert!(ref_memmove_within(&mut back, 30, 0, 4).is_err());
    }

    #[test]
    fn length_checks() {
        let mut d = [0u8; 3];
        assert!(matches!(
            ref_memcpy(&mut d, &[1, 2]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(ref_op(OpKind::MemCmp, &[1], &mut d, 0).is_err());
    }

    #[test]
    fn null_slot_is_rejected() {
        let mut f = process_specific_init(BackendKind::Emulated).unwrap();
        f.qsetbnd_low(SlotId::Bnd0, 0).unwrap();
        let r = unsafe { slot_memchr(&mut f, SlotId::Bnd0, 0, 16) };
        assert!(matches!(r, Err(Error::NullSlotAddress(SlotId::Bnd0))));
    }

    #[test]
    fn slot_ops_need_enabled_file() {
        let mut f = RegisterFile::new(BackendKind::Emulated).unwrap();
        let r = unsafe { slot_memset(&mut f, SlotId::Bnd0, 0, 0) };
        assert!(matches!(r, Err(Error::Disabled)));
    }

    #[test]
    fn names_round_trip() {
        for k in OpKind::ALL {
            assert_eq!(k.name().parse::<OpKind>().unwrap(), k);
        }
        assert!("strlen".parse::<OpKind>().is_err());
    }
}
