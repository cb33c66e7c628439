//! Overhead of passing buffer addresses through bounds slots to the
//! string primitives.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fold_bytes, geomean, measure_prepared, size_label, BenchRecord, Fixture, Target};
use crate::error::{Error, Result};
use crate::regfile::{RegisterFile, SlotId};
use crate::strops::{ref_op, slot_op, OpKind, OpResult, SlotArgs};

const SRC_SLOT: SlotId = SlotId::Bnd2;
const DST_SLOT: SlotId = SlotId::Bnd3;

/// Inputs for one (kind, size) cell. memcmp compares equal buffers and
/// memchr finds its needle in the last byte, so both scan the full length.
struct Workload {
    kind: OpKind,
    src: Vec<u8>,
    dst: Vec<u8>,
    aux: u8,
}

impl Workload {
    fn new(kind: OpKind, size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut src = vec![0u8; size];
        rng.fill_bytes(&mut src);
        let aux = rng.gen::<u8>() | 1;
        let dst = match kind {
            OpKind::MemCmp => src.clone(),
            _ => vec![0u8; size],
        };
        if kind == OpKind::MemChr {
            for b in src.iter_mut() {
                if *b == aux {
                    *b = aux ^ 0x80;
                }
            }
            if let Some(last) = src.last_mut() {
                *last = aux;
            }
        }
        Workload {
            kind,
            src,
            dst,
            aux,
        }
    }

    /// Expected result from the platform C library.
    fn oracle(&self) -> OpResult {
        let n = self.src.len();
        match self.kind {
            OpKind::MemCmp => {
                let r =
                    unsafe { libc::memcmp(self.src.as_ptr().cast(), self.dst.as_ptr().cast(), n) };
                OpResult::Ordering(r.signum())
            }
            OpKind::MemChr => {
                let p = unsafe { libc::memchr(self.src.as_ptr().cast(), self.aux as i32, n) };
                OpResult::Offset((!p.is_null()).then(|| p as usize - self.src.as_ptr() as usize))
            }
            _ => OpResult::Done,
        }
    }

    fn output_ok(&self) -> bool {
        match self.kind {
            OpKind::MemCpy | OpKind::MemMove => self.dst == self.src,
            OpKind::MemSet => self.dst.iter().all(|&b| b == self.aux),
            OpKind::MemCmp | OpKind::MemChr => true,
        }
    }

    fn result_sum(r: OpResult) -> u64 {
        match r {
            OpResult::Ordering(d) => d as u64,
            OpResult::Offset(o) => o.map_or(u64::MAX, |o| o as u64),
            OpResult::Done => 0,
        }
    }
}

/// Times `ref_op` (baseline) against `slot_op` (treatment) for one cell.
///
/// Returns `(baseline, slot)`. The slot arm parks the two buffer addresses
/// in BND2/BND3 once per run; each call then loads them from there.
pub fn bench_strops(
    file: &mut RegisterFile,
    kind: OpKind,
    size: usize,
    runs: u64,
    iters: u64,
    seed: u64,
) -> Result<(BenchRecord, BenchRecord)> {
    if !file.is_enabled() {
        return Err(Error::Disabled);
    }
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be at least 1".into()));
    }
    let w = std::cell::RefCell::new(Workload::new(kind, size, seed));
    let expected = w.borrow().oracle();
    let label = format!("{kind} {}", size_label(size));
    let wrong = |arm: &str| Error::OracleMismatch(format!("strops {label} ({arm})"));

    let last = std::cell::Cell::new(OpResult::Done);
    let check = |arm: &str| {
        let w = w.borrow();
        if last.get().normalized() == expected && w.output_ok() {
            Ok(())
        } else {
            Err(wrong(arm))
        }
    };

    let reset = || {
        let mut w = w.borrow_mut();
        if w.kind.writes() {
            w.dst.fill(0);
        }
        Ok(())
    };

    let base = measure_prepared(
        runs,
        reset,
        || {
            let mut w = w.borrow_mut();
            let Workload { src, dst, aux, .. } = &mut *w;
            let mut sum = 0u64;
            let mut r = OpResult::Done;
            for _ in 0..iters {
                r = ref_op(kind, src, dst, *aux)?;
                sum = sum.wrapping_add(Workload::result_sum(r));
            }
            last.set(r);
            Ok(sum ^ fold_bytes(&dst[..dst.len().min(64)]))
        },
        || check("baseline"),
    )?;

    let slot = measure_prepared(
        runs,
        reset,
        || {
            let mut w = w.borrow_mut();
            let Workload { src, dst, aux, .. } = &mut *w;
            let args = SlotArgs {
                src: SRC_SLOT,
                dst: DST_SLOT,
                len: src.len(),
                aux: *aux,
            };
            file.qsetbnd_low(SRC_SLOT, src.as_ptr() as u64)?;
            file.qsetbnd_low(DST_SLOT, dst.as_mut_ptr() as u64)?;
            let mut sum = 0u64;
            let mut r = OpResult::Done;
            for _ in 0..iters {
                // SAFETY: both slots hold addresses of live `len`-byte
                // buffers that nothing else touches during the loop.
                r = unsafe { slot_op(kind, file, args)? };
                sum = sum.wrapping_add(Workload::result_sum(r));
            }
            file.reset_slot(SRC_SLOT)?;
            file.reset_slot(DST_SLOT)?;
            last.set(r);
            Ok(sum ^ fold_bytes(&dst[..dst.len().min(64)]))
        },
        || check("slot"),
    )?;

    let base = base.into_record(
        Fixture::StrOps,
        Target::GeneralPurposeBaseline,
        label.clone(),
        size,
        runs,
        iters,
        1,
    );
    let mut slot = slot.into_record(
        Fixture::StrOps,
        Target::SlotBacked,
        label,
        size,
        runs,
        iters,
        1,
    );
    slot.attach_overhead(&base);
    Ok((base, slot))
}

/// All cells of a kinds x sizes grid plus the geometric-mean overheads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StropsGrid {
    pub records: Vec<BenchRecord>,
    pub geomean_mean_pct: f64,
    pub geomean_median_pct: f64,
    pub max_mean_pct: f64,
}

pub fn strops_grid(
    file: &mut RegisterFile,
    kinds: &[OpKind],
    sizes: &[usize],
    runs: u64,
    iters: u64,
    seed: u64,
) -> Result<StropsGrid> {
    let mut records = Vec::new();
    let mut means = Vec::new();
    let mut medians = Vec::new();
    for (i, &kind) in kinds.iter().enumerate() {
        for (j, &size) in sizes.iter().enumerate() {
            let cell_seed = seed ^ ((i as u64) << 32 | j as u64);
            let (base, slot) = bench_strops(file, kind, size, runs, iters, cell_seed)?;
            means.push(slot.overhead_pct.expect("attached"));
            medians.push(slot.overhead_median_pct.expect("attached"));
            records.push(base);
            records.push(slot);
        }
    }
    Ok(StropsGrid {
        records,
        geomean_mean_pct: geomean(&means)?,
        geomean_median_pct: geomean(&medians)?,
        max_mean_pct: means.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}
