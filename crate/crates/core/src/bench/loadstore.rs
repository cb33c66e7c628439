//! Steady-state store and load rate: `r15` versus a bounds slot.

use serde::{Deserialize, Serialize};

use super::{gpr, measure, BenchRecord, Fixture, Target, LOADSTORE_ITERS, LOADSTORE_RUNS};
use crate::error::{Error, Result};
use crate::regfile::{RegisterFile, SlotId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStoreConfig {
    pub runs: u64,
    pub iters: u64,
    pub seed: u64,
    pub slot: SlotId,
}

impl Default for LoadStoreConfig {
    fn default() -> Self {
        LoadStoreConfig {
            runs: LOADSTORE_RUNS,
            iters: LOADSTORE_ITERS,
            seed: 0,
            slot: SlotId::Bnd0,
        }
    }
}

fn store_baseline(iters: u64, seed: u64) -> u64 {
    let mut sum = 0u64;
    for i in 0..iters {
        let v = seed.wrapping_add(i);
        gpr::store(v);
        sum = sum.wrapping_add(v);
    }
    sum
}

fn load_baseline(iters: u64, seed: u64) -> u64 {
    let mut sum = 0u64;
    for _ in 0..iters {
        sum = sum.wrapping_add(gpr::load(seed));
    }
    sum
}

fn store_slot(file: &mut RegisterFile, slot: SlotId, iters: u64, seed: u64) -> Result<u64> {
    let mut sum = 0u64;
    for i in 0..iters {
        let v = seed.wrapping_add(i);
        file.setbnd_low(slot, v)?;
        sum = sum.wrapping_add(v);
    }
    Ok(sum)
}

fn load_slot(file: &mut RegisterFile, slot: SlotId, iters: u64) -> Result<u64> {
    let mut sum = 0u64;
    for _ in 0..iters {
        sum = sum.wrapping_add(file.getbnd_low(slot)?);
    }
    Ok(sum)
}

/// Measures the store rate and then the load rate for `target`.
///
/// Returns two records, `detail` = `store` and `load`. The slot target needs
/// an enabled file and overwrites `cfg.slot`.
pub fn bench_loadstore(
    target: Target,
    file: &mut RegisterFile,
    cfg: &LoadStoreConfig,
) -> Result<Vec<BenchRecord>> {
    if cfg.iters == 0 {
        return Err(Error::InvalidParameter("iters must be at least 1".into()));
    }
    let LoadStoreConfig {
        runs,
        iters,
        seed,
        slot,
    } = *cfg;

    let (store, load) = match target {
        Target::GeneralPurposeBaseline => {
            let store = measure(runs, || Ok(store_baseline(iters, seed)), || Ok(()))?;
            let load = measure(runs, || Ok(load_baseline(iters, seed)), || Ok(()))?;
            (store, load)
        }
        Target::SlotBacked => {
            if !file.is_enabled() {
                return Err(Error::Disabled);
            }
            let store = measure(runs, || store_slot(file, slot, iters, seed), || Ok(()))?;
            // The last store left seed + iters - 1; verify, then load a known value.
            let last = file.getbnd_low(slot)?;
            if last != seed.wrapping_add(iters - 1) {
                return Err(Error::OracleMismatch(format!(
                    "loadstore: slot holds {last:#x} after store loop"
                )));
            }
            file.setbnd_low(slot, seed)?;
            let load = measure(runs, || load_slot(file, slot, iters), || Ok(()))?;
            (store, load)
        }
    };

    let expected_load = seed.wrapping_mul(iters);
    let mut out = Vec::with_capacity(2);
    for (detail, m) in [("store", store), ("load", load)] {
        if detail == "load" && m.checksum != fold_runs(expected_load, runs) {
            return Err(Error::OracleMismatch(format!(
                "loadstore {target}: load checksum"
            )));
        }
        out.push(m.into_record(Fixture::LoadStore, target, detail.into(), 8, runs, iters, 1));
    }
    Ok(out)
}

/// Checksum `measure` produces when every run returns `per_run`.
fn fold_runs(per_run: u64, runs: u64) -> u64 {
    (0..runs).fold(0u64, |acc, _| acc.rotate_left(7) ^ per_run)
}

/// Slot-rate / baseline-rate for store and load.
pub fn rate_ratios(baseline: &[BenchRecord], slot: &[BenchRecord]) -> Option<(f64, f64)> {
    let find = |recs: &[BenchRecord], d: &str| {
        recs.iter()
            .find(|r| r.detail == d)
            .map(|r| r.rate_ops_per_s)
    };
    Some((
        find(slot, "store")? / find(baseline, "store")?,
        find(slot, "load")? / find(baseline, "load")?,
    ))
}
