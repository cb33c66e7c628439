//! Context inheritance across processes, threads, and repeated lifecycles.
//!
//! Hardware bounds registers are part of the CPU context: `fork()` and
//! thread creation copy them, after which parent and child evolve
//! independently. The harnesses here replay the three lifecycle scenarios
//! (parent + forked child, parent + two threads, repeated init/finish) and
//! record what every actor observes after each step, so the log can be
//! compared cell by cell with the expected tables.
//!
//! Software state does not follow a new thread the way CPU context does, so
//! emulated files need [`spawn_inheriting`]. A thread created any other way
//! starts with no register file at all.

use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{Read, Write};
use std::os::fd::{FromRawFd, OwnedFd};
use std::sync::mpsc;
use std::thread::{self, JoinHandle};

use serde::{Deserialize, Serialize};
use zeroize::Zeroize;

use crate::error::{Error, Result};
use crate::regfile::{BackendKind, BoundsSlot, RegisterFile, SlotId, LOW_RESET};
use crate::runtime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Actor {
    Parent = 0,
    Child1 = 1,
    Child2 = 2,
}

impl Actor {
    pub const ALL: [Actor; 3] = [Actor::Parent, Actor::Child1, Actor::Child2];

    fn from_byte(b: u8) -> Option<Actor> {
        match b {
            0 => Some(Actor::Parent),
            1 => Some(Actor::Child1),
            2 => Some(Actor::Child2),
            _ => None,
        }
    }
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Actor::Parent => "Parent",
            Actor::Child1 => "Child 1",
            Actor::Child2 => "Child 2",
        })
    }
}

/// What one actor sees right after an event. `bnd0_low` is `None` while
/// the actor's file is disabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub enabled: bool,
    pub bnd0_low: Option<u64>,
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.enabled, self.bnd0_low) {
            (true, Some(v)) => write!(f, "enabled, BND0={v}"),
            (true, None) => f.write_str("enabled, BND0=?"),
            (false, _) => f.write_str("disabled"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEvent {
    pub actor: Actor,
    pub action: String,
    /// Indexed by [`Actor`]; `None` means the actor does not exist at this point.
    pub observed: [Option<Observation>; 3],
    /// Raw slot contents, recorded only by the lifecycle harness.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub raw_slots: Option<[BoundsSlot; 4]>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEventLog {
    pub events: Vec<ContextEvent>,
}

impl ContextEventLog {
    fn push(&mut self, actor: Actor, action: &str, observed: [Option<Observation>; 3]) {
        self.events.push(ContextEvent {
            actor,
            action: action.to_string(),
            observed,
            raw_slots: None,
        });
    }

    /// Canonical text table: one row per event, `Enabled?`/`BND0` per actor.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "| # | Event | Parent Enabled? | Parent BND0 | Child 1 Enabled? | Child 1 BND0 | Child 2 Enabled? | Child 2 BND0 |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|---|---|---|");
        for (i, e) in self.events.iter().enumerate() {
            let _ = write!(out, "| {} | {} |", i + 1, e.action);
            for obs in &e.observed {
                let (en, bnd) = match obs {
                    None => (String::new(), String::new()),
                    Some(o) if !o.enabled => ("no".into(), "-".into()),
                    Some(o) => (
                        "yes".into(),
                        o.bnd0_low
                            .map(|v| v.to_string())
                            .unwrap_or_else(|| "?".into()),
                    ),
                };
                let _ = write!(out, " {en} | {bnd} |");
            }
            out.push('\n');
        }
        out
    }
}

/// Expected contents of one actor's cells in a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expect {
    /// The actor does not exist.
    Blank,
    /// Enabled, with BND0's lower half equal to the value.
    On(u64),
    /// Enabled; BND0 is not asserted on this row.
    OnAny,
    Off,
}

impl Expect {
    fn matches(&self, obs: Option<&Observation>) -> bool {
        match (self, obs) {
            (Expect::Blank, None) => true,
            (Expect::On(v), Some(o)) => o.enabled && o.bnd0_low == Some(*v),
            (Expect::OnAny, Some(o)) => o.enabled,
            (Expect::Off, Some(o)) => !o.enabled,
            _ => false,
        }
    }
}

impl fmt::Display for Expect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expect::Blank => f.write_str("absent"),
            Expect::On(v) => write!(f, "enabled, BND0={v}"),
            Expect::OnAny => f.write_str("enabled"),
            Expect::Off => f.write_str("disabled"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpectedRow {
    pub action: &'static str,
    pub cells: [Expect; 3],
}

const fn row(action: &'static str, cells: [Expect; 3]) -> ExpectedRow {
    ExpectedRow { action, cells }
}

const FORK_INIT: &str = "Parent calls process_specific_init() and setbnd(BND0,1)";
const FORK_FORK: &str = "Parent calls fork()";
const FORK_CHILD_SET: &str = "Child calls setbnd(BND0,2)";
const FORK_CHILD_FINISH: &str = "Child calls process_specific_finish()";
const FORK_CHILD_EXIT: &str = "Child calls exit()";
const FORK_PARENT_FINISH: &str = "Parent calls process_specific_finish()";

/// Parent/child process table.
pub fn fork_table() -> Vec<ExpectedRow> {
    use Expect::*;
    vec![
        row(FORK_INIT, [On(1), Blank, Blank]),
        row(FORK_FORK, [On(1), On(1), Blank]),
        row(FORK_CHILD_SET, [On(1), On(2), Blank]),
        row(FORK_CHILD_FINISH, [On(1), Off, Blank]),
        row(FORK_CHILD_EXIT, [On(1), Blank, Blank]),
        row(FORK_PARENT_FINISH, [Off, Blank, Blank]),
    ]
}

const THREAD_INIT: &str = "Parent calls process_specific_init() and setbnd(0,0)";
const THREAD_SPAWN1: &str = "Parent calls pthread_create() for Child 1";
const THREAD_SPAWN2: &str = "Parent calls pthread_create() for Child 2";
const THREAD_C1_SET: &str = "Child 1 calls setbnd(0,1)";
const THREAD_C2_SET: &str = "Child 2 calls setbnd(0,2)";
const THREAD_C2_FINISH: &str = "Child 2 calls process_specific_finish()";
const THREAD_C1_FINISH: &str = "Child 1 calls process_specific_finish()";
const THREAD_JOIN: &str = "Children call pthread_exit(), Parent joins each";
const THREAD_PARENT_FINISH: &str = "Parent calls process_specific_finish()";

/// Parent/two-thread table.
///
/// Child values are asserted only from the row where the child writes them;
/// before that the child is only required to be enabled.
pub fn thread_table() -> Vec<ExpectedRow> {
    use Expect::*;
    vec![
        row(THREAD_INIT, [On(0), Blank, Blank]),
        row(THREAD_SPAWN1, [On(0), OnAny, Blank]),
        row(THREAD_SPAWN2, [On(0), OnAny, OnAny]),
        row(THREAD_C1_SET, [On(0), On(1), OnAny]),
        row(THREAD_C2_SET, [On(0), On(1), On(2)]),
        row(THREAD_C2_FINISH, [On(0), On(1), Off]),
        row(THREAD_C1_FINISH, [On(0), Off, Off]),
        row(THREAD_JOIN, [On(0), Blank, Blank]),
        row(THREAD_PARENT_FINISH, [Off, Blank, Blank]),
    ]
}

/// Compares a log against an expected table, reporting the first
/// diverging row (1-based).
pub fn verify_log(log: &ContextEventLog, expected: &[ExpectedRow]) -> Result<()> {
    for (i, exp) in expected.iter().enumerate() {
        let Some(event) = log.events.get(i) else {
            return Err(Error::HarnessMismatch {
                row: i + 1,
                action: exp.action.to_string(),
                expected: "row present".into(),
                observed: "log ended".into(),
            });
        };
        for (actor, cell) in Actor::ALL.iter().zip(exp.cells.iter()) {
            let obs = event.observed[*actor as usize].as_ref();
            if !cell.matches(obs) {
                return Err(Error::HarnessMismatch {
                    row: i + 1,
                    action: exp.action.to_string(),
                    expected: format!("{actor}: {cell}"),
                    observed: format!(
                        "{actor}: {}",
                        obs.map(|o| o.to_string())
                            .unwrap_or_else(|| "absent".into())
                    ),
                });
            }
        }
    }
    if log.events.len() > expected.len() {
        let extra = &log.events[expected.len()];
        return Err(Error::HarnessMismatch {
            row: expected.len() + 1,
            action: extra.action.clone(),
            expected: "end of log".into(),
            observed: "extra row".into(),
        });
    }
    Ok(())
}

/// Observes `file` the way a table row does: enable state, then BND0's
/// lower half through a sanitizing read.
pub fn observe(file: &mut RegisterFile) -> Observation {
    let enabled = file
        .observed_enabled()
        .unwrap_or_else(|_| file.is_enabled());
    let bnd0_low = if file.is_enabled() {
        file.getbnd_low(SlotId::Bnd0).ok()
    } else {
        None
    };
    Observation { enabled, bnd0_low }
}

/// Copies all four slots through sanitizing reads.
pub fn snapshot(file: &mut RegisterFile) -> Result<[BoundsSlot; 4]> {
    let mut out = [BoundsSlot::RESET; 4];
    for slot in SlotId::ALL {
        let (low, high) = file.getbnd128(slot)?;
        out[slot.index()] = BoundsSlot { low, high };
    }
    Ok(out)
}

/// Spawns a thread whose register file starts as a copy of `parent`.
///
/// The snapshot moves into the thread by value; afterwards the two files
/// are unrelated. The handle yields an error if the child could not set up
/// its file.
pub fn spawn_inheriting<F, T>(parent: &mut RegisterFile, task: F) -> Result<JoinHandle<Result<T>>>
where
    F: FnOnce(RegisterFile) -> T + Send + 'static,
    T: Send + 'static,
{
    let backend = parent.backend();
    let mut snap = snapshot(parent)?;
    let handle = thread::Builder::new()
        .name("simplex-child".into())
        .spawn(move || {
            let file = adopt_snapshot(backend, &snap);
            for s in snap.iter_mut() {
                s.low.zeroize();
                s.high.zeroize();
            }
            Ok(task(file?))
        })?;
    Ok(handle)
}

fn adopt_snapshot(backend: BackendKind, snap: &[BoundsSlot; 4]) -> Result<RegisterFile> {
    let mut file = runtime::process_specific_init(backend)?;
    for slot in SlotId::ALL {
        let s = snap[slot.index()];
        file.setbnd128(slot, s.low, s.high)?;
    }
    Ok(file)
}

/// Length of one child-to-parent observation record.
pub const RECORD_LEN: usize = 10;

/// Packs an observation as `actor:u8, enabled:u8, bnd0_low:u64 LE`.
/// A disabled actor's value field is zero.
pub fn encode_record(actor: Actor, obs: &Observation) -> [u8; RECORD_LEN] {
    let mut out = [0u8; RECORD_LEN];
    out[0] = actor as u8;
    out[1] = obs.enabled as u8;
    let value = if obs.enabled {
        obs.bnd0_low.unwrap_or(0)
    } else {
        0
    };
    out[2..].copy_from_slice(&value.to_le_bytes());
    out
}

pub fn decode_record(buf: &[u8; RECORD_LEN]) -> Result<(Actor, Observation)> {
    let actor = Actor::from_byte(buf[0])
        .ok_or_else(|| Error::ForkFailed(format!("bad actor byte {}", buf[0])))?;
    let enabled = match buf[1] {
        0 => false,
        1 => true,
        b => return Err(Error::ForkFailed(format!("bad enabled byte {b}"))),
    };
    let mut v = [0u8; 8];
    v.copy_from_slice(&buf[2..]);
    let bnd0_low = enabled.then(|| u64::from_le_bytes(v));
    Ok((actor, Observation { enabled, bnd0_low }))
}

/// Fault injection for the process harness's transport.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChildFault {
    #[default]
    None,
    /// The child exits after sending this many records.
    HangUpAfter(usize),
}

fn pipe() -> Result<(OwnedFd, OwnedFd)> {
    let mut fds = [0; 2];
    // SAFETY: fds has room for two descriptors.
    if unsafe { libc::pipe(fds.as_mut_ptr()) } != 0 {
        return Err(std::io::Error::last_os_error().into());
    }
    // SAFETY: pipe() just returned these as fresh, owned descriptors.
    unsafe { Ok((OwnedFd::from_raw_fd(fds[0]), OwnedFd::from_raw_fd(fds[1]))) }
}

/// Runs in the forked child. Must not allocate: the parent may have had
/// other threads holding the allocator lock at fork time.
fn child_main(file: &mut RegisterFile, tx: i32, rx: i32, fault: ChildFault) -> ! {
    let mut sent = 0usize;
    let mut send = |file: &mut RegisterFile| {
        if let ChildFault::HangUpAfter(n) = fault {
            if sent >= n {
                unsafe { libc::_exit(0) };
            }
        }
        let rec = encode_record(Actor::Child1, &observe(file));
        let w = unsafe { libc::write(tx, rec.as_ptr().cast(), RECORD_LEN) };
        if w != RECORD_LEN as isize {
            unsafe { libc::_exit(1) };
        }
        sent += 1;
    };
    let wait_go = || {
        let mut b = 0u8;
        if unsafe { libc::read(rx, (&mut b as *mut u8).cast(), 1) } != 1 {
            unsafe { libc::_exit(1) };
        }
    };

    send(file);
    wait_go();
    if file.setbnd_low(SlotId::Bnd0, 2).is_err() {
        unsafe { libc::_exit(1) };
    }
    send(file);
    wait_go();
    if file.finish().is_err() {
        unsafe { libc::_exit(1) };
    }
    send(file);
    wait_go();
    unsafe { libc::_exit(0) }
}

fn read_child(pipe: &mut File) -> Result<Observation> {
    let mut buf = [0u8; RECORD_LEN];
    pipe.read_exact(&mut buf)
        .map_err(|e| Error::ForkFailed(format!("child observation channel closed: {e}")))?;
    let (actor, obs) = decode_record(&buf)?;
    if actor != Actor::Child1 {
        return Err(Error::ForkFailed(format!(
            "unexpected actor {actor} on child channel"
        )));
    }
    Ok(obs)
}

fn reap(pid: libc::pid_t) -> Result<i32> {
    let mut status = 0;
    // SAFETY: pid is our own child.
    let r = unsafe { libc::waitpid(pid, &mut status, 0) };
    if r != pid {
        return Err(Error::ForkFailed(format!(
            "waitpid failed: {}",
            std::io::Error::last_os_error()
        )));
    }
    if libc::WIFEXITED(status) {
        Ok(libc::WEXITSTATUS(status))
    } else {
        Err(Error::ForkFailed(format!(
            "child terminated abnormally (status {status:#x})"
        )))
    }
}

/// Replays the parent/child process scenario and returns the raw log.
///
/// The child reports its observations over a pipe of fixed-width records
/// and waits for a go byte before each step, so the parent can observe
/// itself at the same point.
pub fn run_fork_sequence(backend: BackendKind, fault: ChildFault) -> Result<ContextEventLog> {
    let mut log = ContextEventLog::default();
    let mut file = runtime::process_specific_init(backend)?;
    file.setbnd_low(SlotId::Bnd0, 1)?;
    log.push(
        Actor::Parent,
        FORK_INIT,
        [Some(observe(&mut file)), None, None],
    );

    let (up_rx, up_tx) = pipe()?;
    let (down_rx, down_tx) = pipe()?;

    // SAFETY: the child branch only touches the register file and raw file
    // descriptors, then leaves through _exit.
    let pid = unsafe { libc::fork() };
    if pid < 0 {
        return Err(Error::ForkFailed(format!(
            "fork failed: {}",
            std::io::Error::last_os_error()
        )));
    }
    if pid == 0 {
        use std::os::fd::AsRawFd;
        child_main(&mut file, up_tx.as_raw_fd(), down_rx.as_raw_fd(), fault);
    }

    drop(up_tx);
    drop(down_rx);
    let mut from_child = File::from(up_rx);
    let mut to_child = File::from(down_tx);

    let result = (|| -> Result<()> {
        for action in [FORK_FORK, FORK_CHILD_SET, FORK_CHILD_FINISH] {
            let child = read_child(&mut from_child)?;
            let parent = observe(&mut file);
            log.push(Actor::Child1, action, [Some(parent), Some(child), None]);
            to_child
                .write_all(&[1])
                .map_err(|e| Error::ForkFailed(format!("cannot signal child: {e}")))?;
        }
        Ok(())
    })();
    drop(to_child);
    let status = reap(pid)?;
    result?;
    if status != 0 {
        return Err(Error::ForkFailed(format!(
            "child exited with status {status}"
        )));
    }
    log.push(
        Actor::Child1,
        FORK_CHILD_EXIT,
        [Some(observe(&mut file)), None, None],
    );

    file.finish()?;
    log.push(
        Actor::Parent,
        FORK_PARENT_FINISH,
        [Some(observe(&mut file)), None, None],
    );
    Ok(log)
}

/// Runs the process scenario and checks it against [`fork_table`].
pub fn fork_harness(backend: BackendKind) -> Result<ContextEventLog> {
    let log = run_fork_sequence(backend, ChildFault::None)?;
    verify_log(&log, &fork_table())?;
    Ok(log)
}

enum Cmd {
    Observe,
    SetBnd0(u64),
    Finish,
    Exit,
}

struct ChildThread {
    cmd: mpsc::Sender<Cmd>,
    reply: mpsc::Receiver<Observation>,
    handle: JoinHandle<Result<()>>,
}

impl ChildThread {
    fn spawn(parent: &mut RegisterFile) -> Result<Self> {
        let (cmd_tx, cmd_rx) = mpsc::channel();
        let (reply_tx, reply_rx) = mpsc::channel();
        let handle = spawn_inheriting(parent, move |mut file| {
            for cmd in cmd_rx {
                match cmd {
                    Cmd::Observe => {}
                    Cmd::SetBnd0(v) => {
                        let _ = file.setbnd_low(SlotId::Bnd0, v);
                    }
                    Cmd::Finish => {
                        let _ = file.finish();
                    }
                    Cmd::Exit => break,
                }
                if reply_tx.send(observe(&mut file)).is_err() {
                    break;
                }
            }
        })?;
        Ok(ChildThread {
            cmd: cmd_tx,
            reply: reply_rx,
            handle,
        })
    }

    fn call(&self, cmd: Cmd) -> Result<Observation> {
        let lost = || Error::HarnessMismatch {
            row: 0,
            action: "child thread".into(),
            expected: "reply".into(),
            observed: "thread gone".into(),
        };
        self.cmd.send(cmd).map_err(|_| lost())?;
        self.reply.recv().map_err(|_| lost())
    }

    fn exit(self) -> Result<()> {
        let _ = self.cmd.send(Cmd::Exit);
        self.handle
            .join()
            .map_err(|_| Error::ForkFailed("child thread panicked".into()))?
    }
}

/// Replays the parent/two-thread scenario and returns the raw log.
pub fn run_thread_sequence(backend: BackendKind) -> Result<ContextEventLog> {
    let mut log = ContextEventLog::default();
    let mut file = runtime::process_specific_init(backend)?;
    file.setbnd_low(SlotId::Bnd0, 0)?;
    log.push(
        Actor::Parent,
        THREAD_INIT,
        [Some(observe(&mut file)), None, None],
    );

    let c1 = ChildThread::spawn(&mut file)?;
    let o1 = c1.call(Cmd::Observe)?;
    log.push(
        Actor::Parent,
        THREAD_SPAWN1,
        [Some(observe(&mut file)), Some(o1), None],
    );

    let c2 = ChildThread::spawn(&mut file)?;
    let o2 = c2.call(Cmd::Observe)?;
    let o1 = c1.call(Cmd::Observe)?;
    log.push(
        Actor::Parent,
        THREAD_SPAWN2,
        [Some(observe(&mut file)), Some(o1), Some(o2)],
    );

    let o1 = c1.call(Cmd::SetBnd0(1))?;
    let o2 = c2.call(Cmd::Observe)?;
    log.push(
        Actor::Child1,
        THREAD_C1_SET,
        [Some(observe(&mut file)), Some(o1), Some(o2)],
    );

    let o2 = c2.call(Cmd::SetBnd0(2))?;
    let o1 = c1.call(Cmd::Observe)?;
    log.push(
        Actor::Child2,
        THREAD_C2_SET,
        [Some(observe(&mut file)), Some(o1), Some(o2)],
    );

    let o2 = c2.call(Cmd::Finish)?;
    let o1 = c1.call(Cmd::Observe)?;
    log.push(
        Actor::Child2,
        THREAD_C2_FINISH,
        [Some(observe(&mut file)), Some(o1), Some(o2)],
    );

    let o1 = c1.call(Cmd::Finish)?;
    let o2 = c2.call(Cmd::Observe)?;
    log.push(
        Actor::Child1,
        THREAD_C1_FINISH,
        [Some(observe(&mut file)), Some(o1), Some(o2)],
    );

    c1.exit()?;
    c2.exit()?;
    log.push(
        Actor::Parent,
        THREAD_JOIN,
        [Some(observe(&mut file)), None, None],
    );

    file.finish()?;
    log.push(
        Actor::Parent,
        THREAD_PARENT_FINISH,
        [Some(observe(&mut file)), None, None],
    );
    Ok(log)
}

/// Runs the thread scenario and checks it against [`thread_table`].
pub fn thread_harness(backend: BackendKind) -> Result<ContextEventLog> {
    let log = run_thread_sequence(backend)?;
    verify_log(&log, &thread_table())?;
    Ok(log)
}

/// Lifecycle phases of the repeated init/finish scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    FirstInit,
    SubsequentInit,
    FirstFinish,
    SubsequentFinish,
}

/// Payload written between lifecycle calls; must never be seen again.
const SENTINELS: [BoundsSlot; 4] = [
    BoundsSlot::new(0x5eed_0000_0000_0001, 0x5eed_0000_0000_0011),
    BoundsSlot::new(0x5eed_0000_0000_0002, 0x5eed_0000_0000_0022),
    BoundsSlot::new(0x5eed_0000_0000_0003, 0x5eed_0000_0000_0033),
    BoundsSlot::new(0x5eed_0000_0000_0004, 0x5eed_0000_0000_0044),
];

fn write_sentinels(file: &mut RegisterFile) -> Result<()> {
    for slot in SlotId::ALL {
        let s = SENTINELS[slot.index()];
        file.setbnd128(slot, s.low, s.high)?;
    }
    Ok(())
}

/// BND0 state accepted after finalization on each backend.
fn bnd0_after_finish_ok(backend: BackendKind, bnd0: BoundsSlot) -> bool {
    if bnd0.low != LOW_RESET {
        return false;
    }
    match backend {
        BackendKind::Emulated => bnd0.is_reset(),
        BackendKind::Hardware => bnd0.high >> 63 == 1,
    }
}

fn check_phase(backend: BackendKind, phase: Phase, row: usize, event: &ContextEvent) -> Result<()> {
    let obs = event.observed[0].expect("parent always observed");
    let slots = event.raw_slots.expect("lifecycle rows carry raw slots");
    let want_enabled = matches!(phase, Phase::FirstInit | Phase::SubsequentInit);
    let mismatch = |expected: String, observed: String| Error::HarnessMismatch {
        row,
        action: event.action.clone(),
        expected,
        observed,
    };
    if obs.enabled != want_enabled {
        return Err(mismatch(
            format!(
                "config {}",
                if want_enabled { "Enabled" } else { "Disabled" }
            ),
            format!(
                "config {}",
                if obs.enabled { "Enabled" } else { "Disabled" }
            ),
        ));
    }
    for (i, s) in slots.iter().enumerate() {
        let leaked = SENTINELS
            .iter()
            .any(|p| s.low == p.low || s.high == p.high || s.low == p.high || s.high == p.low);
        if leaked {
            return Err(mismatch(
                "no sentinel value".into(),
                format!("BND{i} = {s:x?}"),
            ));
        }
    }
    let bounds_ok = if want_enabled {
        slots.iter().all(BoundsSlot::is_reset)
    } else {
        slots[1..].iter().all(BoundsSlot::is_reset) && bnd0_after_finish_ok(backend, slots[0])
    };
    if !bounds_ok {
        let expected = if want_enabled {
            "Reset"
        } else {
            "BND0: Undefined, BND1-3: Reset"
        };
        return Err(mismatch(
            format!("bounds {expected}"),
            format!("{slots:x?}"),
        ));
    }
    Ok(())
}

/// Repeated initialization and finalization.
///
/// Sequence: init, write, init, write, finish, finish. Each lifecycle row
/// records the raw slots and is checked for the enable state, the reset
/// pattern, and the absence of any value written earlier.
pub fn reinit_harness(backend: BackendKind) -> Result<ContextEventLog> {
    let mut log = ContextEventLog::default();
    let mut file = RegisterFile::new(backend)?;
    let mut checked = Vec::new();

    let mut record = |file: &mut RegisterFile, action: &str, phase: Option<Phase>| -> Result<()> {
        let raw = file.raw_state()?;
        log.events.push(ContextEvent {
            actor: Actor::Parent,
            action: action.to_string(),
            observed: [Some(observe(file)), None, None],
            raw_slots: Some(raw),
        });
        if let Some(phase) = phase {
            checked.push((log.events.len(), phase));
        }
        Ok(())
    };

    file.init()?;
    record(
        &mut file,
        "First process_specific_init()",
        Some(Phase::FirstInit),
    )?;
    write_sentinels(&mut file)?;
    record(&mut file, "Write sentinel values", None)?;
    file.init()?;
    record(
        &mut file,
        "Subsequent process_specific_init()",
        Some(Phase::SubsequentInit),
    )?;
    write_sentinels(&mut file)?;
    record(&mut file, "Write sentinel values", None)?;
    file.finish()?;
    record(
        &mut file,
        "First process_specific_finish()",
        Some(Phase::FirstFinish),
    )?;
    file.finish()?;
    record(
        &mut file,
        "Subsequent process_specific_finish()",
        Some(Phase::SubsequentFinish),
    )?;

    for (row, phase) in checked {
        check_phase(backend, phase, row, &log.events[row - 1])?;
    }
    Ok(log)
}
