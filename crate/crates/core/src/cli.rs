//! Command-line front end for the `simplex` binary.

use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{
    self, bench_loadstore, bench_traversal, loadstore, parse_size, size_label, BenchRecord,
    LoadStoreConfig, OutputFormat, Reload, Target, LOADSTORE_ITERS, LOADSTORE_RUNS, STANDARD_SIZES,
    STROPS_ITERS, STROPS_RUNS, TRAVERSAL_ITERS, TRAVERSAL_RUNS,
};
use crate::error::{Error, Result};
use crate::probe::{probe_with_overrides, select_backend, BackendRequest, OverrideSource};
use crate::regfile::{BackendKind, RegisterFile, SlotId};
use crate::runtime::process_specific_init;
use crate::selftest::{self, Suite};
use crate::strops::OpKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BACKEND: i32 = 2;
pub const EXIT_CORRECTNESS: i32 = 3;

/// Largest secret `demo-hide` accepts.
pub const DEMO_MAX_SECRET: u64 = 16 * 1024 * 1024;

#[derive(Debug, Parser)]
#[command(
    name = "simplex",
    version,
    about = "Hidden storage in the MPX bounds registers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report MPX support and the backend that would be used.
    Probe {
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        backend: BackendArg,
    },
    /// Run the correctness suites (all of them when none is selected).
    Selftest(SelftestArgs),
    /// Run a benchmark fixture.
    Bench(BenchArgs),
    /// Hide a file's contents in two shares and recover it.
    DemoHide {
        #[arg(long, value_name = "PATH")]
        secret_file: PathBuf,
        #[command(flatten)]
        backend: BackendArg,
    },
}

#[derive(Debug, Args, Clone, Copy)]
pub struct BackendArg {
    /// auto, hardware, or emulated. Overrides SIMPLEX_BACKEND. Asking for
    /// hardware here fails if the machine cannot provide it.
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<BackendRequest>,
}

fn parse_backend(s: &str) -> std::result::Result<BackendRequest, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Parent/child process scenario.
    #[arg(long)]
    pub fork: bool,
    /// Parent/two-thread scenario.
    #[arg(long)]
    pub threads: bool,
    /// Repeated init/finish scenario.
    #[arg(long)]
    pub reinit: bool,
    /// Randomized read/write round trips against a model.
    #[arg(long)]
    pub roundtrip: bool,
    /// Spill-area sanitization checks.
    #[arg(long)]
    pub sanitize: bool,
    /// Print the observation table of each context scenario.
    #[arg(long, short)]
    pub verbose: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
    #[command(flatten)]
    pub backend: BackendArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureArg {
    Loadstore,
    Traversal,
    Strops,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Baseline,
    Slot,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Md,
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Md => OutputFormat::Markdown,
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(value_enum)]
    pub fixture: FixtureArg,
    /// Timed runs; run 0 is a discarded warm-up when more than one is asked
    /// for. [default: loadstore 10000, traversal 100, strops 20]
    #[arg(long)]
    pub runs: Option<u64>,
    /// Iterations per run. [default: loadstore 1000000, traversal 1000,
    /// strops 10]
    #[arg(long)]
    pub iters: Option<u64>,
    /// Buffer size, repeatable; accepts K and M suffixes.
    /// [default: 4K 8K 1M 16M]
    #[arg(long = "size", value_parser = parse_size_arg)]
    pub sizes: Vec<usize>,
    /// Traversal only: when share addresses are loaded from the slots.
    #[arg(long, default_value = "per-byte", value_parser = parse_reload)]
    pub reload: Reload,
    /// Strops only: primitive to measure, repeatable. [default: all five]
    #[arg(long = "op", value_parser = parse_op)]
    pub ops: Vec<OpKind>,
    #[arg(long, value_enum, default_value = "md")]
    pub format: FormatArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Which arm(s) to report.
    #[arg(long, value_enum, default_value = "both")]
    pub target: TargetArg,
    #[command(flatten)]
    pub backend: BackendArg,
}

fn parse_size_arg(s: &str) -> std::result::Result<usize, String> {
    match parse_size(s) {
        Ok(0) => Err("size must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_reload(s: &str) -> std::result::Result<Reload, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_op(s: &str) -> std::result::Result<OpKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit code for an error escaping a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::HardwareUnavailable(_) | Error::HardwareBusy | Error::UnknownBackend(_) => {
            EXIT_BACKEND
        }
        Error::InvalidParameter(_) | Error::LengthMismatch { .. } => EXIT_USAGE,
        _ => EXIT_CORRECTNESS,
    }
}

/// Resolves the backend: the flag is strict, the environment variable is not.
fn resolve_backend(arg: BackendArg) -> Result<BackendKind> {
    let report = probe_with_overrides(arg.backend)?;
    let requested = match report.override_source {
        OverrideSource::Flag => arg.backend.expect("flag source implies a flag"),
        OverrideSource::EnvVar => crate::probe::request_from_env()?.unwrap_or(BackendRequest::Auto),
        OverrideSource::None => BackendRequest::Auto,
    };
    select_backend(
        &report,
        requested,
        report.override_source == OverrideSource::Flag,
    )
}

fn open_file(arg: BackendArg) -> Result<RegisterFile> {
    process_specific_init(resolve_backend(arg)?)
}

pub fn run(cli: Cli) -> i32 {
    let r = match cli.command {
        Command::Probe { json, backend } => cmd_probe(json, backend),
        Command::Selftest(a) => cmd_selftest(a),
        Command::Bench(a) => cmd_bench(a),
        Command::DemoHide {
            secret_file,
            backend,
        } => cmd_demo_hide(&secret_file, backend),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("simplex: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_probe(json: bool, arg: BackendArg) -> Result<i32> {
    let report = probe_with_overrides(arg.backend)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        println!("{report}");
    }
    if arg.backend == Some(BackendRequest::Hardware) && !report.hardware_capable() {
        eprintln!(
            "simplex: hardware backend unavailable: {}",
            report.unavailable_reason()
        );
        return Ok(EXIT_BACKEND);
    }
    Ok(EXIT_OK)
}

fn cmd_selftest(a: SelftestArgs) -> Result<i32> {
    let backend = resolve_backend(a.backend)?;
    let picked: Vec<Suite> = [
        (a.roundtrip, Suite::RoundTrip),
        (a.sanitize, Suite::Sanitize),
        (a.fork, Suite::Fork),
        (a.threads, Suite::Threads),
        (a.reinit, Suite::Reinit),
    ]
    .into_iter()
    .filter_map(|(on, s)| on.then_some(s))
    .collect();
    let suites = if picked.is_empty() {
        Suite::ALL.to_vec()
    } else {
        picked
    };
    let opts = selftest::Options {
        seed: a.seed,
        inject_fault: a.inject_fault,
    };

    println!("backend: {backend}");
    let mut worst = EXIT_OK;
    for suite in suites {
        let r = selftest::run(suite, backend, opts);
        println!("{r}");
        if let Some(log) = &r.log {
            if a.verbose || !r.passed() {
                print!("{}", log.to_table());
            }
        }
        if let Err(e) = &r.outcome {
            worst = worst.max(match exit_code(e) {
                EXIT_BACKEND => EXIT_BACKEND,
                _ => EXIT_CORRECTNESS,
            });
        }
    }
    Ok(worst)
}

fn cmd_bench(a: BenchArgs) -> Result<i32> {
    let mut file = open_file(a.backend)?;
    let sizes = if a.sizes.is_empty() {
        STANDARD_SIZES.to_vec()
    } else {
        a.sizes.clone()
    };
    let mut records: Vec<BenchRecord> = Vec::new();
    let mut summary: Vec<String> = Vec::new();

    match a.fixture {
        FixtureArg::Loadstore => {
            let cfg = LoadStoreConfig {
                runs: a.runs.unwrap_or(LOADSTORE_RUNS),
                iters: a.iters.unwrap_or(LOADSTORE_ITERS),
                seed: a.seed,
                slot: SlotId::Bnd0,
            };
            let base = bench_loadstore(Target::GeneralPurposeBaseline, &mut file, &cfg)?;
            let slot = bench_loadstore(Target::SlotBacked, &mut file, &cfg)?;
            if let Some((s, l)) = loadstore::rate_ratios(&base, &slot) {
                summary.push(format!("slot/baseline rate: store {s:.3}, load {l:.3}"));
            }
            records.extend(base);
            records.extend(slot);
        }
        FixtureArg::Traversal => {
            let runs = a.runs.unwrap_or(TRAVERSAL_RUNS);
            let iters = a.iters.unwrap_or(TRAVERSAL_ITERS);
            for (i, &size) in sizes.iter().enumerate() {
                let (b, s) =
                    bench_traversal(&mut file, size, runs, iters, a.reload, a.seed ^ i as u64)?;
                summary.push(format!(
                    "{}: overhead {:.1}% (median {:.1}%)",
                    size_label(size),
                    s.overhead_pct.unwrap_or(f64::NAN),
                    s.overhead_median_pct.unwrap_or(f64::NAN)
                ));
                records.push(b);
                records.push(s);
            }
        }
        FixtureArg::Strops => {
            let runs = a.runs.unwrap_or(STROPS_RUNS);
            let iters = a.iters.unwrap_or(STROPS_ITERS);
            let ops = if a.ops.is_empty() {
                OpKind::ALL.to_vec()
            } else {
                a.ops.clone()
            };
            let grid = bench::strops_grid(&mut file, &ops, &sizes, runs, iters, a.seed)?;
            summary.push(format!(
                "geomean overhead: {:.2}% (of medians {:.2}%), max cell {:.2}%",
                grid.geomean_mean_pct, grid.geomean_median_pct, grid.max_mean_pct
            ));
            records = grid.records;
        }
    }
    file.finish()?;

    records.retain(|r| match a.target {
        TargetArg::Both => true,
        TargetArg::Baseline => r.target == Target::GeneralPurposeBaseline,
        TargetArg::Slot => r.target == Target::SlotBacked,
    });
    let format = OutputFormat::from(a.format);
    print!("{}", bench::render(&records, format)?);
    if format == OutputFormat::Markdown {
        println!();
        for line in summary {
            println!("{line}");
        }
    } else {
        for line in summary {
            log::info!("{line}");
        }
    }
    Ok(EXIT_OK)
}

fn cmd_demo_hide(path: &std::path::Path, arg: BackendArg) -> Result<i32> {
    let meta = std::fs::metadata(path)?;
    if meta.len() > DEMO_MAX_SECRET {
        eprintln!(
            "simplex: {} is {} bytes; demo-hide accepts at most {DEMO_MAX_SECRET}",
            path.display(),
            meta.len()
        );
        return Ok(EXIT_USAGE);
    }
    let mut secret = Vec::with_capacity(meta.len() as usize);
    std::fs::File::open(path)?
        .take(DEMO_MAX_SECRET + 1)
        .read_to_end(&mut secret)?;
    if secret.len() as u64 > DEMO_MAX_SECRET {
        eprintln!(
            "simplex: {} grew past {DEMO_MAX_SECRET} bytes",
            path.display()
        );
        return Ok(EXIT_USAGE);
    }
    if secret.is_empty() {
        println!("secret is empty; nothing to hide");
        return Ok(EXIT_OK);
    }

    let mut file = open_file(arg)?;
    let digest = bench::fold_bytes(&secret);
    let len = secret.len();
    let mut rng = ChaCha8Rng::from_entropy();
    let hidden = bench::hide_split(&mut file, &mut secret, &mut rng, SlotId::Bnd0, SlotId::Bnd1)?;
    println!(
        "hid {len} bytes as two shares; addresses held in BND0/BND1 ({} backend)",
        file.backend()
    );
    let mut out = vec![0u8; len];
    let r = hidden.unhide_combine(&mut file, &mut out, Reload::PerByte);
    hidden.release(&mut file)?;
    r?;
    let ok = bench::fold_bytes(&out) == digest;
    zeroize::Zeroize::zeroize(&mut out);
    file.finish()?;
    if ok {
        println!("recovered {len} bytes: match");
        Ok(EXIT_OK)
    } else {
        println!("recovered {len} bytes: MISMATCH");
        Ok(EXIT_CORRECTNESS)
    }
}
