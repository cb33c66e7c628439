//! Enable/disable lifecycle.
//!
//! Initialization sets BNDCFGU to "enabled, preserve bounds across legacy
//! branches" and resets all four slots. The bounds-directory base is left at
//! zero: no bounds table ever exists, so any attempt to reach slot contents
//! through table instructions faults instead of leaking.

use crate::error::Result;
use crate::regfile::{BackendKind, RegisterFile};

/// Creates a register file on `backend` and enables it.
///
/// All four slots start at ([`crate::LOW_RESET`], [`crate::HIGH_RESET`]).
pub fn process_specific_init(backend: BackendKind) -> Result<RegisterFile> {
    let mut file = RegisterFile::new(backend)?;
    file.init()?;
    Ok(file)
}

/// Re-initializes an existing file. Slot contents are destroyed.
pub fn process_specific_reinit(file: &mut RegisterFile) -> Result<()> {
    file.init()
}

/// Disables `file` after resetting its slots. Idempotent.
///
/// On the emulated backend every slot ends at the reset value. Real hardware
/// has been observed to leave a large value with the top bit set in BND0's
/// upper half; nothing about that value is guaranteed.
pub fn process_specific_finish(file: &mut RegisterFile) -> Result<()> {
    file.finish()
}

pub fn is_enabled(file: &RegisterFile) -> bool {
    file.is_enabled()
}
