//! Hidden general-purpose storage in the x86 MPX bounds registers.
//!
//! MPX gave x86-64 four 128-bit bounds registers (BND0..BND3) that ordinary
//! loads and stores cannot reach. This crate treats them as eight 64-bit
//! cells of storage for pointers, keys, or anything else worth keeping out
//! of addressable memory. It never uses the bounds-checking or bounds-table
//! instructions.
//!
//! On machines without MPX the [`regfile::BackendKind::Emulated`] backend
//! provides the same interface in software, which also serves as the test
//! oracle for the hardware backend.
//!
//! ```
//! use simplex::{runtime, BackendKind, SlotId};
//!
//! let mut file = runtime::process_specific_init(BackendKind::Emulated)?;
//! file.setbnd_low(SlotId::Bnd0, 1)?;
//! assert_eq!(file.getbnd_low(SlotId::Bnd0)?, 1);
//! runtime::process_specific_finish(&mut file)?;
//! # Ok::<(), simplex::Error>(())
//! ```

pub mod bench;
pub mod cli;
pub mod context;
pub mod error;
pub mod probe;
pub mod regfile;
pub mod runtime;
pub mod selftest;
pub mod strops;

pub use error::{Error, Result};
pub use probe::{probe, BackendRequest, ProbeReport};
pub use regfile::{BackendKind, BoundsSlot, RegisterFile, SlotId, HIGH_RESET, LOW_RESET};
