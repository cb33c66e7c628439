use thiserror::Error;

use crate::regfile::SlotId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("register file is not initialized (call process_specific_init first)")]
    Disabled,

    #[error("MPX hardware backend unavailable: {0}")]
    HardwareUnavailable(String),

    #[error("a hardware register file already exists on this thread")]
    HardwareBusy,

    #[error("invalid slot index {0} (expected 0..=3)")]
    InvalidSlot(u8),

    #[error("unknown backend {0:?} (expected auto, hardware or emulated)")]
    UnknownBackend(String),

    #[error("slot {0} holds a null buffer address")]
    NullSlotAddress(SlotId),

    #[error("slot contents no longer match the hidden buffer they were assigned to")]
    SlotClobbered,

    #[error("length mismatch: expected {expected} bytes, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("geometric mean undefined for overhead {0}% (must exceed -100%)")]
    Domain(f64),

    #[error("process harness failed: {0}")]
    ForkFailed(String),

    #[error(
        "harness log diverges at row {row} ({action}): expected {expected}, observed {observed}"
    )]
    HarnessMismatch {
        row: usize,
        action: String,
        expected: String,
        observed: String,
    },

    #[error("oracle mismatch in {0}")]
    OracleMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
