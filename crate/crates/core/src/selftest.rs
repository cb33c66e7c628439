//! Self-test suites run by `simplex selftest`.
//!
//! The round-trip suite drives a register file with random operations and
//! checks every read against a plain array model. The context suites replay
//! the process, thread, and lifecycle scenarios from [`crate::context`].

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::context::{
    fork_table, reinit_harness, run_fork_sequence, run_thread_sequence, thread_table, verify_log,
    ChildFault, ContextEventLog, Expect, ExpectedRow,
};
use crate::error::{Error, Result};
use crate::regfile::{BackendKind, BoundsSlot, RegisterFile, SlotId};
use crate::runtime::process_specific_init;

pub const ROUNDTRIP_OPS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    RoundTrip,
    Sanitize,
    Fork,
    Threads,
    Reinit,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::RoundTrip,
        Suite::Sanitize,
        Suite::Fork,
        Suite::Threads,
        Suite::Reinit,
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::RoundTrip => "roundtrip",
            Suite::Sanitize => "sanitize",
            Suite::Fork => "fork",
            Suite::Threads => "threads",
            Suite::Reinit => "reinit",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Options {
    pub seed: u64,
    /// Corrupts one expectation so the failure path can be exercised.
    pub inject_fault: bool,
}

#[derive(Debug)]
pub struct SuiteResult {
    pub suite: Suite,
    pub outcome: Result<()>,
    pub log: Option<ContextEventLog>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Ok(()) => write!(f, "PASS {}", self.suite),
            Err(e) => write!(f, "FAIL {}: {e}", self.suite),
        }
    }
}

pub fn run(suite: Suite, backend: BackendKind, opts: Options) -> SuiteResult {
    let mut log = None;
    let outcome = match suite {
        Suite::RoundTrip => roundtrip_suite(backend, ROUNDTRIP_OPS, opts.seed, opts.inject_fault),
        Suite::Sanitize => sanitize_suite(backend),
        Suite::Fork => checked(
            run_fork_sequence(backend, ChildFault::None),
            fork_table(),
            opts.inject_fault,
            &mut log,
        ),
        Suite::Threads => checked(
            run_thread_sequence(backend),
            thread_table(),
            opts.inject_fault,
            &mut log,
        ),
        Suite::Reinit => reinit_harness(backend).map(|l| log = Some(l)),
    };
    SuiteResult {
        suite,
        outcome,
        log,
    }
}

fn checked(
    got: Result<ContextEventLog>,
    mut table: Vec<ExpectedRow>,
    inject_fault: bool,
    log: &mut Option<ContextEventLog>,
) -> Result<()> {
    let got = got?;
    if inject_fault {
        corrupt(&mut table);
    }
    let r = verify_log(&got, &table);
    *log = Some(got);
    r
}

/// Flips the parent's cell on the last row that asserts a value.
fn corrupt(table: &mut [ExpectedRow]) {
    let cell = table
        .iter_mut()
        .rev()
        .find_map(|r| match r.cells[0] {
            Expect::On(_) => Some(&mut r.cells[0]),
            _ => None,
        })
        .expect("table asserts a parent value");
    if let Expect::On(v) = cell {
        *cell = Expect::On(v.wrapping_add(0x40));
    }
}

fn mismatch(op: usize, what: &str, expected: u64, got: u64) -> Error {
    Error::OracleMismatch(format!(
        "op {op}: {what}: expected {expected:#x}, got {got:#x}"
    ))
}

/// `ops` random reads and writes checked against an array model. On the
/// hardware backend an emulated file replays the same operations and must
/// agree on every read as well.
pub fn roundtrip_suite(
    backend: BackendKind,
    ops: usize,
    seed: u64,
    inject_fault: bool,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut file = process_specific_init(backend)?;
    let mut mirror = match backend {
        BackendKind::Hardware => Some(process_specific_init(BackendKind::Emulated)?),
        BackendKind::Emulated => None,
    };
    let mut model = [BoundsSlot::RESET; 4];

    for op in 0..ops {
        let slot = SlotId::ALL[rng.gen_range(0..4)];
        let i = slot.index();
        let a: u64 = rng.gen();
        let b: u64 = rng.gen();
        let kind = rng.gen_range(0..10u8);

        let mut files: Vec<&mut RegisterFile> = Vec::with_capacity(2);
        files.push(&mut file);
        if let Some(m) = mirror.as_mut() {
            files.push(m);
        }
        for f in files {
            match kind {
                0 => f.setbnd_low(slot, a)?,
                1 => f.setbnd_high(slot, a)?,
                2 => f.setbnd128(slot, a, b)?,
                3 => f.qsetbnd_low(slot, a)?,
                4 => {
                    let got = f.getbnd_low(slot)?;
                    if got != model[i].low {
                        return Err(mismatch(
                            op,
                            &format!("getbnd_low {slot}"),
                            model[i].low,
                            got,
                        ));
                    }
                }
                5 => {
                    let got = f.getbnd_high(slot)?;
                    if got != model[i].high {
                        return Err(mismatch(
                            op,
                            &format!("getbnd_high {slot}"),
                            model[i].high,
                            got,
                        ));
                    }
                }
                6 => {
                    let (lo, hi) = f.getbnd128(slot)?;
                    if lo != model[i].low {
                        return Err(mismatch(
                            op,
                            &format!("getbnd128 {slot} low"),
                            model[i].low,
                            lo,
                        ));
                    }
                    if hi != model[i].high {
                        return Err(mismatch(
                            op,
                            &format!("getbnd128 {slot} high"),
                            model[i].high,
                            hi,
                        ));
                    }
                }
                7 => {
                    let got = f.qgetbnd_low(slot)?;
                    if got != model[i].low {
                        return Err(mismatch(
                            op,
                            &format!("qgetbnd_low {slot}"),
                            model[i].low,
                            got,
                        ));
                    }
                }
                8 => f.reset_slot(slot)?,
                _ => {
                    // Full sweep of every slot.
                    for s in SlotId::ALL {
                        let (lo, hi) = f.getbnd128(s)?;
                        let m = model[s.index()];
                        if (lo, hi) != (m.low, m.high) {
                            return Err(Error::OracleMismatch(format!(
                                "op {op}: sweep {s}: expected {:#x}/{:#x}, got {lo:#x}/{hi:#x}",
                                m.low, m.high
                            )));
                        }
                    }
                }
            }
        }
        match kind {
            0 => model[i].low = a,
            1 => model[i].high = a,
            2 => model[i] = BoundsSlot::new(a, b),
            3 => model[i] = BoundsSlot::new(a, !a),
            8 => model[i] = BoundsSlot::RESET,
            _ => {}
        }
    }
    // Final sweep so corruption in a slot never read again still shows.
    if inject_fault {
        model[3].high ^= 1;
    }
    for s in SlotId::ALL {
        let (lo, hi) = file.getbnd128(s)?;
        let m = model[s.index()];
        if (lo, hi) != (m.low, m.high) {
            return Err(Error::OracleMismatch(format!(
                "final sweep {s}: expected {:#x}/{:#x}, got {lo:#x}/{hi:#x}",
                m.low, m.high
            )));
        }
    }
    file.finish()?;
    if let Some(mut m) = mirror {
        m.finish()?;
    }
    Ok(())
}

type ReadFn = fn(&mut RegisterFile, SlotId) -> Result<()>;

/// Sanitizing reads leave a zeroed spill area; quick reads leave residue.
pub fn sanitize_suite(backend: BackendKind) -> Result<()> {
    let mut file = process_specific_init(backend)?;
    let secret = 0xa5a5_0f0f_5a5a_f0f0u64;
    for slot in SlotId::ALL {
        file.setbnd128(slot, secret, !secret)?;
        let reads: [(&str, ReadFn); 3] = [
            ("getbnd_low", |f, s| f.getbnd_low(s).map(drop)),
            ("getbnd_high", |f, s| f.getbnd_high(s).map(drop)),
            ("getbnd128", |f, s| f.getbnd128(s).map(drop)),
        ];
        for (name, read) in reads {
            read(&mut file, slot)?;
            if file.scratch_snapshot() != [0; 16] {
                return Err(Error::OracleMismatch(format!(
                    "{name} {slot} left slot contents in the spill area"
                )));
            }
        }
        file.setbnd_high(slot, 1)?;
        if file.scratch_snapshot() != [0; 16] {
            return Err(Error::OracleMismatch(format!(
                "setbnd_high {slot} left slot contents in the spill area"
            )));
        }
        let low = file.qgetbnd_low(slot)?;
        if file.scratch_snapshot()[..8] != low.to_le_bytes() {
            return Err(Error::OracleMismatch(format!(
                "qgetbnd_low {slot} did not go through the spill area"
            )));
        }
    }
    file.finish()?;
    if file.scratch_snapshot() != [0; 16] {
        return Err(Error::OracleMismatch(
            "finish left the spill area dirty".into(),
        ));
    }
    Ok(())
}
