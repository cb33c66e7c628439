//! System readiness check and backend selection.
//!
//! Hardware slots need two facts: the CPU advertises MPX
//! (CPUID.(EAX=07H,ECX=0):EBX bit 14) and the OS has both MPX state
//! components enabled in XCR0 (bit 3 BNDREGS, bit 4 BNDCSR), meaning the
//! registers are saved and restored across context switches. The same pair
//! of checks gates the MPX runtime shipped with GCC 5.
//!
//! MPX instructions execute as NOPs on CPUs that lack the extension, so a
//! positive probe is the only thing standing between a caller and silently
//! lost writes.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regfile::BackendKind;

/// Environment variable consulted for a backend override.
pub const BACKEND_ENV: &str = "SIMPLEX_BACKEND";

/// Structured extended feature flags leaf.
pub const CPUID_EXT_FEATURES_LEAF: u32 = 0x07;
/// MPX bit in CPUID.(07H,0):EBX.
pub const CPUID_MPX_BIT: u32 = 14;
pub const XCR0_BNDREGS_BIT: u32 = 3;
pub const XCR0_BNDCSR_BIT: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendRequest {
    Auto,
    Hardware,
    Emulated,
}

impl FromStr for BackendRequest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(BackendRequest::Auto),
            "hardware" => Ok(BackendRequest::Hardware),
            "emulated" => Ok(BackendRequest::Emulated),
            other => Err(Error::UnknownBackend(other.to_string())),
        }
    }
}

impl fmt::Display for BackendRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendRequest::Auto => "auto",
            BackendRequest::Hardware => "hardware",
            BackendRequest::Emulated => "emulated",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverrideSource {
    None,
    EnvVar,
    Flag,
}

/// Raw capability facts of the executing machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpuFacts {
    pub cpu_has_mpx: bool,
    pub xstate_bndregs: bool,
    pub xstate_bndcsr: bool,
}

impl CpuFacts {
    pub fn os_context_saves_mpx(&self) -> bool {
        self.xstate_bndregs && self.xstate_bndcsr
    }

    pub fn hardware_capable(&self) -> bool {
        self.cpu_has_mpx && self.os_context_saves_mpx()
    }

    /// Reads CPUID and XCR0. Never executes an MPX instruction.
    #[cfg(target_arch = "x86_64")]
    pub fn detect() -> Self {
        use std::arch::x86_64::{__cpuid, __cpuid_count};

        // SAFETY: cpuid is always available on x86_64.
        let max_leaf = __cpuid(0).eax;
        let cpu_has_mpx = max_leaf >= CPUID_EXT_FEATURES_LEAF
            && __cpuid_count(CPUID_EXT_FEATURES_LEAF, 0).ebx & (1 << CPUID_MPX_BIT) != 0;

        // xgetbv is only legal once the OS has set CR4.OSXSAVE (CPUID.1:ECX[27]).
        let osxsave = __cpuid(1).ecx & (1 << 27) != 0;
        let xcr0 = if osxsave { unsafe { read_xcr0() } } else { 0 };

        CpuFacts {
            cpu_has_mpx,
            xstate_bndregs: xcr0 & (1 << XCR0_BNDREGS_BIT) != 0,
            xstate_bndcsr: xcr0 & (1 << XCR0_BNDCSR_BIT) != 0,
        }
    }

    #[cfg(not(target_arch = "x86_64"))]
    pub fn detect() -> Self {
        CpuFacts {
            cpu_has_mpx: false,
            xstate_bndregs: false,
            xstate_bndcsr: false,
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "xsave")]
unsafe fn read_xcr0() -> u64 {
    std::arch::x86_64::_xgetbv(0)
}

/// Capability facts plus the backend that will be used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub cpu_has_mpx: bool,
    pub xstate_bndregs: bool,
    pub xstate_bndcsr: bool,
    pub os_context_saves_mpx: bool,
    pub selected: BackendKind,
    pub override_source: OverrideSource,
}

impl ProbeReport {
    /// Builds a report from facts and an optional override.
    ///
    /// Hardware is selected only when the machine supports it and the
    /// override does not ask for emulation.
    pub fn from_facts(facts: CpuFacts, request: BackendRequest, source: OverrideSource) -> Self {
        let capable = facts.hardware_capable();
        let selected = match request {
            BackendRequest::Emulated => BackendKind::Emulated,
            BackendRequest::Auto | BackendRequest::Hardware if capable => BackendKind::Hardware,
            _ => BackendKind::Emulated,
        };
        ProbeReport {
            cpu_has_mpx: facts.cpu_has_mpx,
            xstate_bndregs: facts.xstate_bndregs,
            xstate_bndcsr: facts.xstate_bndcsr,
            os_context_saves_mpx: facts.os_context_saves_mpx(),
            selected,
            override_source: source,
        }
    }

    pub fn hardware_capable(&self) -> bool {
        self.cpu_has_mpx && self.os_context_saves_mpx
    }

    pub fn unavailable_reason(&self) -> String {
        if !self.cpu_has_mpx {
            "CPU does not report MPX (CPUID.07H:EBX[14] clear)".into()
        } else if !self.os_context_saves_mpx {
            format!(
                "OS does not save MPX state (XCR0[3]={}, XCR0[4]={})",
                self.xstate_bndregs as u8, self.xstate_bndcsr as u8
            )
        } else {
            "hardware available".into()
        }
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let yn = |b: bool| if b { "yes" } else { "no" };
        writeln!(f, "cpu_has_mpx:          {}", yn(self.cpu_has_mpx))?;
        writeln!(f, "xstate_bndregs:       {}", yn(self.xstate_bndregs))?;
        writeln!(f, "xstate_bndcsr:        {}", yn(self.xstate_bndcsr))?;
        writeln!(f, "os_context_saves_mpx: {}", yn(self.os_context_saves_mpx))?;
        let source = match self.override_source {
            OverrideSource::None => "none",
            OverrideSource::EnvVar => "env",
            OverrideSource::Flag => "flag",
        };
        writeln!(f, "override:             {source}")?;
        write!(f, "selected: {}", self.selected)
    }
}

fn cached_facts() -> CpuFacts {
    static FACTS: OnceLock<CpuFacts> = OnceLock::new();
    *FACTS.get_or_init(CpuFacts::detect)
}

/// Probes the executing machine with no override applied.
pub fn probe() -> ProbeReport {
    ProbeReport::from_facts(cached_facts(), BackendRequest::Auto, OverrideSource::None)
}

/// Reads [`BACKEND_ENV`]. Unset means no override; anything other than
/// `auto`, `hardware` or `emulated` is an error.
pub fn request_from_env() -> Result<Option<BackendRequest>> {
    match std::env::var(BACKEND_ENV) {
        Ok(value) => value.parse().map(Some),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(v)) => {
            Err(Error::UnknownBackend(v.to_string_lossy().into_owned()))
        }
    }
}

/// Resolves the effective request: an explicit flag beats the environment.
pub fn resolve_request(
    flag: Option<BackendRequest>,
    env: Option<BackendRequest>,
) -> (BackendRequest, OverrideSource) {
    match (flag, env) {
        (Some(r), _) => (r, OverrideSource::Flag),
        (None, Some(r)) => (r, OverrideSource::EnvVar),
        (None, None) => (BackendRequest::Auto, OverrideSource::None),
    }
}

/// Probes the machine, honouring `flag` and then [`BACKEND_ENV`].
pub fn probe_with_overrides(flag: Option<BackendRequest>) -> Result<ProbeReport> {
    let env = request_from_env()?;
    let (request, source) = resolve_request(flag, env);
    Ok(ProbeReport::from_facts(cached_facts(), request, source))
}

/// Maps a request onto a usable backend.
///
/// `Auto` picks hardware when available. A hardware request the machine
/// cannot satisfy falls back to emulation with a warning, unless `strict`
/// is set, in which case it fails with [`Error::HardwareUnavailable`].
pub fn select_backend(
    report: &ProbeReport,
    requested: BackendRequest,
    strict: bool,
) -> Result<BackendKind> {
    match requested {
        BackendRequest::Emulated => Ok(BackendKind::Emulated),
        BackendRequest::Auto if report.hardware_capable() => Ok(BackendKind::Hardware),
        BackendRequest::Auto => Ok(BackendKind::Emulated),
        BackendRequest::Hardware if report.hardware_capable() => Ok(BackendKind::Hardware),
        BackendRequest::Hardware if strict => {
            Err(Error::HardwareUnavailable(report.unavailable_reason()))
        }
        BackendRequest::Hardware => {
            log::warn!(
                "hardware backend requested but unavailable ({}); using emulated",
                report.unavailable_reason()
            );
            Ok(BackendKind::Emulated)
        }
    }
}
