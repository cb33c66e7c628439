//! End-to-end acceptance run. Prints one line per criterion and exits
//! non-zero if any criterion fails. Criteria that need MPX hardware are
//! skipped with a notice on other machines.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simplex::bench::{
    bench_loadstore, bench_strops, bench_traversal, hide_split, strops_grid, LoadStoreConfig,
    Reload, Target, KIB, MIB, STANDARD_SIZES,
};
use simplex::context::{fork_harness, reinit_harness, thread_harness};
use simplex::selftest::{roundtrip_suite, ROUNDTRIP_OPS};
use simplex::strops::{ref_memmove_within, ref_op, slot_memmove, slot_op, OpKind, OpResult, SlotArgs};
use simplex::{runtime, BackendKind, RegisterFile, SlotId};

type Outcome = Result<(), String>;

enum Verdict {
    Pass,
    Fail(String),
    SkipHw,
}

fn hw() -> bool {
    simplex::probe().hardware_capable()
}

fn backends() -> Vec<BackendKind> {
    if hw() {
        vec![BackendKind::Emulated, BackendKind::Hardware]
    } else {
        vec![BackendKind::Emulated]
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Verdict {
    let start = Instant::now();
    let r = f();
    let took = start.elapsed();
    match (r, limit) {
        (Err(e), _) => Verdict::Fail(e),
        (Ok(()), Some(l)) if took > l => {
            Verdict::Fail(format!("took {:.2}s, limit {:.0}s", took.as_secs_f64(), l.as_secs_f64()))
        }
        _ => Verdict::Pass,
    }
}

fn hw_only(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Verdict {
    if hw() {
        timed(limit, f)
    } else {
        Verdict::SkipHw
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn init(backend: BackendKind) -> Result<RegisterFile, String> {
    runtime::process_specific_init(backend).map_err(e2s)
}

// 1
fn round_trips() -> Outcome {
    for b in backends() {
        roundtrip_suite(b, ROUNDTRIP_OPS, 0x0dd_ba11, false).map_err(|e| format!("{b}: {e}"))?;
    }
    Ok(())
}

// 2
fn context_tables() -> Outcome {
    for b in backends() {
        fork_harness(b).map_err(|e| format!("{b} fork: {e}"))?;
        thread_harness(b).map_err(|e| format!("{b} threads: {e}"))?;
        reinit_harness(b).map_err(|e| format!("{b} reinit: {e}"))?;
    }
    Ok(())
}

// 3
fn sanitization() -> Outcome {
    for b in backends() {
        let mut f = init(b)?;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = [(u64::MAX, 0u64); 4];
        for op in 0..1000 {
            let s = SlotId::ALL[rng.gen_range(0..4)];
            let i = s.index();
            match rng.gen_range(0..5) {
                0 => {
                    let (lo, hi) = (rng.gen(), rng.gen());
                    f.setbnd128(s, lo, hi).map_err(e2s)?;
                    model[i] = (lo, hi);
                    continue;
                }
                1 => {
                    f.getbnd_low(s).map_err(e2s)?;
                }
                2 => {
                    f.getbnd_high(s).map_err(e2s)?;
                }
                3 => {
                    f.getbnd128(s).map_err(e2s)?;
                }
                _ => {
                    let v = f.qgetbnd_low(s).map_err(e2s)?;
                    if b == BackendKind::Emulated {
                        let snap = f.scratch_snapshot();
                        let mut want = [0u8; 16];
                        want[..8].copy_from_slice(&model[i].0.to_le_bytes());
                        want[8..].copy_from_slice(&model[i].1.to_le_bytes());
                        if v != model[i].0 || snap != want {
                            return Err(format!("op {op}: quick read residue {snap:02x?}"));
                        }
                    }
                    continue;
                }
            }
            if f.scratch_snapshot() != [0; 16] {
                return Err(format!("{b} op {op}: scratch not zero after sanitizing access"));
            }
        }
    }
    Ok(())
}

fn libc_result(kind: OpKind, src: &[u8], dst: &mut [u8], aux: u8) -> OpResult {
    let n = src.len();
    unsafe {
        match kind {
            OpKind::MemCmp => {
                OpResult::Ordering(libc::memcmp(src.as_ptr().cast(), dst.as_ptr().cast(), n).signum())
            }
            OpKind::MemCpy => {
                libc::memcpy(dst.as_mut_ptr().cast(), src.as_ptr().cast(), n);
                OpResult::Done
            }
            OpKind::MemMove => {
                libc::memmove(dst.as_mut_ptr().cast(), src.as_ptr().cast(), n);
                OpResult::Done
            }
            OpKind::MemSet => {
                libc::memset(dst.as_mut_ptr().cast(), aux as i32, n);
                OpResult::Done
            }
            OpKind::MemChr => {
                let p = libc::memchr(src.as_ptr().cast(), aux as i32, n);
                OpResult::Offset((!p.is_null()).then(|| p as usize - src.as_ptr() as usize))
            }
        }
    }
}

// 4
fn strops_equivalence() -> Outcome {
    let mut f = init(BackendKind::Emulated)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for size in STANDARD_SIZES {
        // One random base per size, perturbed per trial, keeps 16 MiB
        // inputs affordable.
        let mut src = vec![0u8; size];
        rng.fill_bytes(&mut src);
        let mut dst0 = vec![0u8; size];
        rng.fill_bytes(&mut dst0);
        for kind in OpKind::ALL {
            for trial in 0..100 {
                for _ in 0..64 {
                    let i = rng.gen_range(0..size);
                    src[i] = rng.gen();
                }
                let aux: u8 = rng.gen();
                let mut dst = match kind {
                    OpKind::MemCmp => {
                        let mut d = src.clone();
                        if trial % 4 != 0 {
                            let i = rng.gen_range(0..size);
                            d[i] = d[i].wrapping_add(rng.gen_range(1..=255));
                        }
                        d
                    }
                    _ => dst0.clone(),
                };
                let mut d_ref = dst.clone();
                let mut d_lib = dst.clone();
                let r_ref = ref_op(kind, &src, &mut d_ref, aux).map_err(e2s)?.normalized();
                let r_lib = libc_result(kind, &src, &mut d_lib, aux);
                f.qsetbnd_low(SlotId::Bnd2, src.as_ptr() as u64).map_err(e2s)?;
                f.qsetbnd_low(SlotId::Bnd3, dst.as_mut_ptr() as u64).map_err(e2s)?;
                let args = SlotArgs {
                    src: SlotId::Bnd2,
                    dst: SlotId::Bnd3,
                    len: size,
                    aux,
                };
                let r_slot = unsafe { slot_op(kind, &mut f, args) }.map_err(e2s)?.normalized();
                if r_ref != r_lib || r_slot != r_lib || d_ref != d_lib || dst != d_lib {
                    return Err(format!("{kind} {size} trial {trial}: results differ"));
                }
            }
        }
        // Overlapping moves within one buffer.
        let mut buf = src.clone();
        for trial in 0..100 {
            let n = rng.gen_range(1..=size / 2);
            let a = rng.gen_range(0..=size - n);
            let b = (a + rng.gen_range(0..n)).min(size - n);
            let (s, d) = if trial % 2 == 0 { (a, b) } else { (b, a) };
            let mut expect = buf.clone();
            unsafe {
                let p = expect.as_mut_ptr();
                libc::memmove(p.add(d).cast(), p.add(s).cast(), n);
            }
            let mut by_ref = buf.clone();
            ref_memmove_within(&mut by_ref, d, s, n).map_err(e2s)?;
            let base = buf.as_mut_ptr();
            f.qsetbnd_low(SlotId::Bnd0, unsafe { base.add(d) } as u64).map_err(e2s)?;
            f.qsetbnd_low(SlotId::Bnd1, unsafe { base.add(s) } as u64).map_err(e2s)?;
            unsafe { slot_memmove(&mut f, SlotId::Bnd0, SlotId::Bnd1, n) }.map_err(e2s)?;
            if by_ref != expect || buf != expect {
                return Err(format!("overlapping memmove {size} n={n} src={s} dst={d}"));
            }
        }
    }
    Ok(())
}

// 5
fn traversal_correctness() -> Outcome {
    let mut f = init(BackendKind::Emulated)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for size in STANDARD_SIZES {
        let mut secret = vec![0u8; size];
        let mut out = vec![0u8; size];
        for it in 0..100 {
            rng.fill_bytes(&mut secret);
            let orig = secret.clone();
            let h = hide_split(&mut f, &mut secret, &mut rng, SlotId::Bnd0, SlotId::Bnd1)
                .map_err(e2s)?;
            let reload = if it % 2 == 0 { Reload::PerByte } else { Reload::PerPass };
            h.unhide_combine(&mut f, &mut out, reload).map_err(e2s)?;
            h.release(&mut f).map_err(e2s)?;
            if out != orig {
                return Err(format!("{size} bytes, iteration {it}: mismatch"));
            }
        }
    }
    Ok(())
}

// 6 (HW)
fn loadstore_ratios() -> Outcome {
    let mut f = init(BackendKind::Hardware)?;
    let cfg = LoadStoreConfig {
        runs: 1_000,
        iters: 1_000_000,
        ..LoadStoreConfig::default()
    };
    let base = bench_loadstore(Target::GeneralPurposeBaseline, &mut f, &cfg).map_err(e2s)?;
    let slot = bench_loadstore(Target::SlotBacked, &mut f, &cfg).map_err(e2s)?;
    let (s, l) = simplex::bench::loadstore::rate_ratios(&base, &slot).ok_or("missing records")?;
    if !(0.8..=1.2).contains(&s) || !(0.5..=1.0).contains(&l) {
        return Err(format!("store ratio {s:.3}, load ratio {l:.3}"));
    }
    Ok(())
}

// 7 (HW)
fn traversal_overhead() -> Outcome {
    let mut f = init(BackendKind::Hardware)?;
    for size in STANDARD_SIZES {
        let (_, slot) = bench_traversal(&mut f, size, 100, 1000, Reload::PerByte, 7).map_err(e2s)?;
        let o = slot.overhead_pct.unwrap_or(f64::NAN);
        if !(150.0..=400.0).contains(&o) {
            return Err(format!("{size} bytes: overhead {o:.1}%"));
        }
    }
    Ok(())
}

// 8 (HW)
fn strops_geomean() -> Outcome {
    let mut f = init(BackendKind::Hardware)?;
    let g = strops_grid(&mut f, &OpKind::ALL, &STANDARD_SIZES, 20, 10, 8).map_err(e2s)?;
    if g.geomean_mean_pct > 10.0 {
        return Err(format!("geomean {:.2}%", g.geomean_mean_pct));
    }
    Ok(())
}

/// Median over three trials of elapsed(2n) / elapsed(n).
fn doubling_ratio(mut run: impl FnMut(u64) -> Result<u64, String>, n: u64) -> Result<f64, String> {
    let mut ratios = Vec::new();
    for _ in 0..3 {
        let one = run(n)? as f64;
        let two = run(2 * n)? as f64;
        ratios.push(two / one);
    }
    ratios.sort_by(f64::total_cmp);
    Ok(ratios[1])
}

// 9
fn anti_optimization() -> Outcome {
    let mut f = init(BackendKind::Emulated)?;
    let mut failures = Vec::new();

    let ls = |f: &mut RegisterFile, iters: u64, seed: u64| {
        let cfg = LoadStoreConfig {
            runs: 5,
            iters,
            seed,
            slot: SlotId::Bnd0,
        };
        bench_loadstore(Target::SlotBacked, f, &cfg).map_err(e2s)
    };
    let r = doubling_ratio(|n| Ok(ls(&mut f, n, 1)?[0].elapsed_ns), 2_000_000)?;
    let rl = doubling_ratio(|n| Ok(ls(&mut f, n, 1)?[1].elapsed_ns), 2_000_000)?;
    let r_tr = doubling_ratio(
        |n| Ok(bench_traversal(&mut f, 16 * KIB, 3, n, Reload::PerByte, 1).map_err(e2s)?.1.elapsed_ns),
        100,
    )?;
    let r_st = doubling_ratio(
        |n| Ok(bench_strops(&mut f, OpKind::MemCpy, MIB, 3, n, 1).map_err(e2s)?.1.elapsed_ns),
        5,
    )?;
    for (name, ratio) in [
        ("loadstore store", r),
        ("loadstore load", rl),
        ("traversal", r_tr),
        ("strops", r_st),
    ] {
        if !(1.5..=3.0).contains(&ratio) {
            failures.push(format!("{name} x{ratio:.2}"));
        }
    }

    let a = ls(&mut f, 1000, 1)?;
    let b = ls(&mut f, 1000, 2)?;
    if a[0].checksum == b[0].checksum || a[1].checksum == b[1].checksum {
        failures.push("loadstore checksum ignores seed".into());
    }
    let ta = bench_traversal(&mut f, 4 * KIB, 2, 1, Reload::PerByte, 1).map_err(e2s)?;
    let tb = bench_traversal(&mut f, 4 * KIB, 2, 1, Reload::PerByte, 2).map_err(e2s)?;
    if ta.1.checksum == tb.1.checksum {
        failures.push("traversal checksum ignores seed".into());
    }
    let sa = bench_strops(&mut f, OpKind::MemCpy, 4 * KIB, 2, 1, 1).map_err(e2s)?;
    let sb = bench_strops(&mut f, OpKind::MemCpy, 4 * KIB, 2, 1, 2).map_err(e2s)?;
    if sa.1.checksum == sb.1.checksum {
        failures.push("strops checksum ignores seed".into());
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures.join("; "))
    }
}

fn run_cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simplex"))
        .args(args)
        .env_remove("SIMPLEX_BACKEND")
        .output()
        .expect("spawn simplex")
}

// 10
fn cli_contract() -> Outcome {
    let o = run_cli(&["probe", "--json"]);
    serde_json::from_slice::<serde_json::Value>(&o.stdout).map_err(|e| format!("probe --json: {e}"))?;
    let code = |args: &[&str]| run_cli(args).status.code();
    let checks: Vec<(&[&str], i32)> = vec![
        (&["selftest", "--backend", "emulated"], 0),
        (&["selftest", "--no-such-flag"], 1),
        (&["selftest", "--fork", "--inject-fault", "--backend", "emulated"], 3),
        (&["selftest", "--threads", "--inject-fault", "--backend", "emulated"], 3),
    ];
    for (args, want) in checks {
        let got = code(args);
        if got != Some(want) {
            return Err(format!("{args:?}: exit {got:?}, want {want}"));
        }
    }
    if !hw() {
        let got = code(&["selftest", "--backend", "hardware"]);
        if got != Some(2) {
            return Err(format!("selftest --backend hardware: exit {got:?}, want 2"));
        }
    }
    let help = String::from_utf8_lossy(&run_cli(&["bench", "--help"]).stdout).into_owned();
    for needle in ["10000", "1000000", "traversal 100", "1000", "strops 20", "4K 8K 1M 16M"] {
        if !help.contains(needle) {
            return Err(format!("bench --help lacks {needle:?}"));
        }
    }
    Ok(())
}

type Criterion = (u32, &'static str, Box<dyn FnOnce() -> Verdict>);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "round-trip suite", Box::new(|| timed(secs(5), round_trips))),
        (2, "context tables", Box::new(|| timed(secs(10), context_tables))),
        (3, "sanitization", Box::new(|| timed(secs(1), sanitization))),
        (4, "string-op oracle equivalence", Box::new(|| timed(secs(60), strops_equivalence))),
        (5, "traversal correctness", Box::new(|| timed(secs(60), traversal_correctness))),
        (6, "load/store rate ratios", Box::new(|| hw_only(None, loadstore_ratios))),
        (7, "traversal overhead envelope", Box::new(|| hw_only(None, traversal_overhead))),
        (8, "string-op geometric mean", Box::new(|| hw_only(None, strops_geomean))),
        (9, "anti-optimization guard", Box::new(|| timed(secs(30), anti_optimization))),
        (10, "CLI contract", Box::new(|| timed(None, cli_contract))),
    ];
    if !hw() {
        println!("notice: no usable MPX hardware; hardware criteria are skipped");
    }
    let mut failed = 0;
    for (n, name, run) in criteria {
        match run() {
            Verdict::Pass => println!("criterion {n:>2} PASS  {name}"),
            Verdict::SkipHw => println!("criterion {n:>2} SKIP(HW)  {name}: needs MPX hardware"),
            Verdict::Fail(why) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
