//! Benchmark fixtures: register load/store rate, hidden-buffer traversal,
//! and slot-addressed string primitives.
//!
//! Every fixture pairs a general-purpose-register baseline with a
//! slot-backed treatment. Runs are timed with the monotonic clock around the
//! whole iteration loop; run 0 is a warm-up and is discarded whenever more
//! than one run was requested. Each treatment run is checked against its
//! oracle before its timing is kept, and every hot loop folds what it
//! produces into a checksum so the optimizer cannot drop it.

mod gpr;
pub mod loadstore;
pub mod report;
pub mod strbench;
pub mod traversal;

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use loadstore::{bench_loadstore, LoadStoreConfig};
pub use report::{render, OutputFormat};
pub use strbench::{bench_strops, strops_grid, StropsGrid};
pub use traversal::{bench_traversal, hide_split, unhide_combine, HiddenBuffer, Reload};

pub const KIB: usize = 1024;
pub const MIB: usize = 1024 * 1024;

/// Buffer sizes used by the traversal and string fixtures.
pub const STANDARD_SIZES: [usize; 4] = [4 * KIB, 8 * KIB, MIB, 16 * MIB];

pub const LOADSTORE_RUNS: u64 = 10_000;
pub const LOADSTORE_ITERS: u64 = 1_000_000;
pub const TRAVERSAL_RUNS: u64 = 100;
pub const TRAVERSAL_ITERS: u64 = 1_000;
pub const STROPS_RUNS: u64 = 20;
pub const STROPS_ITERS: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fixture {
    LoadStore,
    Traversal,
    StrOps,
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fixture::LoadStore => "loadstore",
            Fixture::Traversal => "traversal",
            Fixture::StrOps => "strops",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    #[serde(rename = "baseline")]
    GeneralPurposeBaseline,
    #[serde(rename = "slot")]
    SlotBacked,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::GeneralPurposeBaseline => "baseline",
            Target::SlotBacked => "slot",
        })
    }
}

/// Summary of per-run elapsed times, in nanoseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl RunStats {
    /// Quartiles use linear interpolation between closest ranks.
    pub fn from_samples(samples: &[u64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut v: Vec<f64> = samples.iter().map(|&x| x as f64).collect();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(RunStats {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: q(0.5),
            q1: q(0.25),
            q3: q(0.75),
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

/// One measured fixture configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub fixture: Fixture,
    pub target: Target,
    pub detail: String,
    pub size_bytes: u64,
    /// Requested runs, including the discarded warm-up.
    pub runs: u64,
    pub iters_per_run: u64,
    /// Total elapsed time over the measured runs.
    pub elapsed_ns: u64,
    /// Operations per second over the measured runs. An operation is one
    /// register access (loadstore), one byte unhidden (traversal), or one
    /// call (strops).
    pub rate_ops_per_s: f64,
    /// Mean-elapsed overhead against the matching baseline record.
    pub overhead_pct: Option<f64>,
    /// Median-elapsed overhead against the matching baseline record.
    pub overhead_median_pct: Option<f64>,
    pub stats: RunStats,
    pub checksum: u64,
}

impl BenchRecord {
    /// Fills the overhead fields relative to `baseline`.
    pub fn attach_overhead(&mut self, baseline: &BenchRecord) {
        self.overhead_pct = Some(overhead_pct(baseline.stats.mean, self.stats.mean));
        self.overhead_median_pct = Some(overhead_pct(baseline.stats.median, self.stats.median));
    }
}

/// Percentage by which `treatment` exceeds `baseline`.
pub fn overhead_pct(baseline: f64, treatment: f64) -> f64 {
    (treatment / baseline - 1.0) * 100.0
}

/// Geometric mean of percentage overheads: `exp(mean(ln(1 + x/100))) - 1`,
/// in percent.
pub fn geomean(overheads: &[f64]) -> Result<f64> {
    if overheads.is_empty() {
        return Err(Error::InvalidParameter(
            "geometric mean of an empty set".into(),
        ));
    }
    let mut acc = 0.0;
    for &x in overheads {
        if x.is_nan() || x <= -100.0 {
            return Err(Error::Domain(x));
        }
        acc += (1.0 + x / 100.0).ln();
    }
    Ok(((acc / overheads.len() as f64).exp() - 1.0) * 100.0)
}

/// Parses sizes like `4096`, `4K`, `4KiB`, `16M` (1024-based).
pub fn parse_size(s: &str) -> Result<usize> {
    let t = s.trim();
    let bad = || Error::InvalidParameter(format!("invalid size {s:?}"));
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (digits, suffix) = t.split_at(split);
    let n: usize = digits.parse().map_err(|_| bad())?;
    let mult = match suffix {
        "" | "B" => 1,
        "K" | "k" | "KiB" | "KB" => KIB,
        "M" | "m" | "MiB" | "MB" => MIB,
        "G" | "g" | "GiB" | "GB" => 1024 * MIB,
        _ => return Err(bad()),
    };
    n.checked_mul(mult).ok_or_else(bad)
}

/// Compact size label: `4K`, `16M`, or a byte count.
pub fn size_label(bytes: usize) -> String {
    if bytes >= MIB && bytes.is_multiple_of(MIB) {
        format!("{}M", bytes / MIB)
    } else if bytes >= KIB && bytes.is_multiple_of(KIB) {
        format!("{}K", bytes / KIB)
    } else {
        bytes.to_string()
    }
}

/// Timed runs of one configuration.
pub(crate) struct Measured {
    pub elapsed: Vec<u64>,
    pub checksum: u64,
}

impl Measured {
    pub fn total_ns(&self) -> u64 {
        self.elapsed.iter().sum()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn into_record(
        self,
        fixture: Fixture,
        target: Target,
        detail: String,
        size_bytes: usize,
        runs: u64,
        iters: u64,
        ops_per_iter: u64,
    ) -> BenchRecord {
        let total = self.total_ns();
        let ops = self.elapsed.len() as f64 * iters as f64 * ops_per_iter as f64;
        BenchRecord {
            fixture,
            target,
            detail,
            size_bytes: size_bytes as u64,
            runs,
            iters_per_run: iters,
            elapsed_ns: total,
            rate_ops_per_s: ops / (total.max(1) as f64 / 1e9),
            overhead_pct: None,
            overhead_median_pct: None,
            stats: RunStats::from_samples(&self.elapsed).expect("at least one measured run"),
            checksum: self.checksum,
        }
    }
}

/// Times `runs` invocations of `run` (each performing one run's iterations)
/// and calls `verify` after each. Run 0 is discarded when `runs > 1`.
pub(crate) fn measure<R, V>(runs: u64, run: R, verify: V) -> Result<Measured>
where
    R: FnMut() -> Result<u64>,
    V: FnMut() -> Result<()>,
{
    measure_prepared(runs, || Ok(()), run, verify)
}

/// As [`measure`], with an untimed `prepare` step before every run.
pub(crate) fn measure_prepared<P, R, V>(
    runs: u64,
    mut prepare: P,
    mut run: R,
    mut verify: V,
) -> Result<Measured>
where
    P: FnMut() -> Result<()>,
    R: FnMut() -> Result<u64>,
    V: FnMut() -> Result<()>,
{
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let mut elapsed = Vec::with_capacity(runs as usize);
    let mut checksum = 0u64;
    for i in 0..runs {
        prepare()?;
        let start = Instant::now();
        let sum = run()?;
        let ns = start.elapsed().as_nanos() as u64;
        verify()?;
        checksum = checksum.rotate_left(7) ^ sum;
        if i > 0 || runs == 1 {
            elapsed.push(ns.max(1));
        }
    }
    Ok(Measured { elapsed, checksum })
}

/// Order-sensitive 64-bit fold of a byte buffer.
pub(crate) fn fold_bytes(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    let mut chunks = bytes.chunks_exact(8);
    for c in &mut chunks {
        h = (h ^ u64::from_le_bytes(c.try_into().unwrap())).wrapping_mul(0x0100_0000_01b3);
    }
    for &b in chunks.remainder() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geomean_trivial_cases() {
        assert!(geomean(&[0.0, 0.0, 0.0]).unwrap().abs() < 1e-12);
        assert!((geomean(&[100.0]).unwrap() - 100.0).abs() < 1e-9);
        // (2 * 8)^(1/2) = 4 -> 300%
        assert!((geomean(&[100.0, 700.0]).unwrap() - 300.0).abs() < 1e-9);
    }

    #[test]
    fn geomean_domain() {
        assert!(matches!(geomean(&[-100.0]), Err(Error::Domain(_))));
        assert!(matches!(geomean(&[1.0, -150.0]), Err(Error::Domain(_))));
        assert!(matches!(geomean(&[f64::NAN]), Err(Error::Domain(_))));
        assert!(geomean(&[]).is_err());
        assert!(geomean(&[-99.0]).is_ok());
    }

    #[test]
    fn quartiles() {
        let s = RunStats::from_samples(&[5, 1, 3, 2, 4]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max),
            (1.0, 2.0, 3.0, 4.0, 5.0)
        );
        assert_eq!(s.mean, 3.0);
        let s = RunStats::from_samples(&[1, 2, 3, 4]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert!(RunStats::from_samples(&[]).is_none());
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_size("4K").unwrap(), 4096);
        assert_eq!(parse_size("8KiB").unwrap(), 8192);
        assert_eq!(parse_size("1M").unwrap(), 1 << 20);
        assert_eq!(parse_size("16M").unwrap(), 16 << 20);
        assert_eq!(parse_size("100").unwrap(), 100);
        assert!(parse_size("4X").is_err());
        assert!(parse_size("K").is_err());
        for s in STANDARD_SIZES {
            assert_eq!(parse_size(&size_label(s)).unwrap(), s);
        }
        assert_eq!(size_label(1000), "1000");
    }

    #[test]
    fn warmup_is_discarded() {
        let mut n = 0;
        let m = measure(
            4,
            || {
                n += 1;
                Ok(n)
            },
            || Ok(()),
        )
        .unwrap();
        assert_eq!(m.elapsed.len(), 3);
        let single = measure(1, || Ok(0), || Ok(())).unwrap();
        assert_eq!(single.elapsed.len(), 1);
        assert!(measure(0, || Ok(0), || Ok(())).is_err());
    }

    #[test]
    fn failed_verification_aborts() {
        let r = measure(3, || Ok(0), || Err(Error::OracleMismatch("x".into())));
        assert!(matches!(r, Err(Error::OracleMismatch(_))));
    }
}
