use simplex::context::{
    fork_harness, fork_table, reinit_harness, run_fork_sequence, run_thread_sequence,
    spawn_inheriting, thread_harness, thread_table, verify_log, ChildFault, Expect,
};
use simplex::{runtime, BackendKind, BoundsSlot, Error, SlotId};

#[test]
fn fork_table_matches() {
    let log = fork_harness(BackendKind::Emulated).unwrap();
    assert_eq!(log.events.len(), 6);
}

#[test]
fn thread_table_matches() {
    let log = thread_harness(BackendKind::Emulated).unwrap();
    assert_eq!(log.events.len(), 9);
}

#[test]
fn reinit_table_matches() {
    let log = reinit_harness(BackendKind::Emulated).unwrap();
    let last = log.events.last().unwrap();
    assert_eq!(last.raw_slots.unwrap(), [BoundsSlot::RESET; 4]);
    assert!(!last.observed[0].unwrap().enabled);
}

#[test]
fn child_hang_up_is_reported() {
    for n in 0..3 {
        let r = run_fork_sequence(BackendKind::Emulated, ChildFault::HangUpAfter(n));
        assert!(matches!(r, Err(Error::ForkFailed(_))), "hang up after {n}: {r:?}");
    }
}

#[test]
fn runs_are_deterministic() {
    let a = run_fork_sequence(BackendKind::Emulated, ChildFault::None).unwrap();
    let b = run_fork_sequence(BackendKind::Emulated, ChildFault::None).unwrap();
    assert_eq!(a, b);
    let a = run_thread_sequence(BackendKind::Emulated).unwrap();
    let b = run_thread_sequence(BackendKind::Emulated).unwrap();
    assert_eq!(a, b);
}

#[test]
fn altered_table_reports_row() {
    let log = run_thread_sequence(BackendKind::Emulated).unwrap();
    let mut table = thread_table();
    table[4].cells[2] = Expect::On(3);
    match verify_log(&log, &table) {
        Err(Error::HarnessMismatch { row, .. }) => assert_eq!(row, 5),
        other => panic!("expected a mismatch, got {other:?}"),
    }
    let log = run_fork_sequence(BackendKind::Emulated, ChildFault::None).unwrap();
    let mut table = fork_table();
    table[5].cells[0] = Expect::On(1);
    assert!(matches!(
        verify_log(&log, &table),
        Err(Error::HarnessMismatch { row: 6, .. })
    ));
}

#[test]
fn spawned_thread_inherits_enable_state() {
    let mut parent = runtime::process_specific_init(BackendKind::Emulated).unwrap();
    parent.setbnd_low(SlotId::Bnd0, 42).unwrap();
    let h = spawn_inheriting(&mut parent, |mut f| {
        assert!(f.is_enabled());
        let inherited = f.getbnd_low(SlotId::Bnd0).unwrap();
        f.setbnd_low(SlotId::Bnd0, 7).unwrap();
        (inherited, f.getbnd_low(SlotId::Bnd0).unwrap())
    })
    .unwrap();
    assert_eq!(h.join().unwrap().unwrap(), (42, 7));
    assert_eq!(parent.getbnd_low(SlotId::Bnd0).unwrap(), 42);
}

#[test]
fn table_rendering_has_every_row() {
    let log = fork_harness(BackendKind::Emulated).unwrap();
    let t = log.to_table();
    assert_eq!(t.lines().count(), 2 + 6);
    assert!(t.contains("Parent calls fork()"));
}
