use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simplex::bench::traversal::combine_plain;
use simplex::bench::{hide_split, unhide_combine, Reload, KIB, MIB};
use simplex::{runtime, BackendKind, RegisterFile, SlotId};

fn file() -> RegisterFile {
    runtime::process_specific_init(BackendKind::Emulated).unwrap()
}

fn round_trip(f: &mut RegisterFile, rng: &mut ChaCha8Rng, size: usize, reload: Reload) {
    let mut secret = vec![0u8; size];
    rng.fill_bytes(&mut secret);
    let orig = secret.clone();
    let h = hide_split(f, &mut secret, rng, SlotId::Bnd0, SlotId::Bnd1).unwrap();
    assert!(secret.iter().all(|&b| b == 0), "secret not wiped");
    let mut out = vec![0u8; size];
    unhide_combine(f, &h, &mut out, reload).unwrap();
    assert!(out == orig, "{size} bytes, {reload}");

    let (a, b) = h.shares(f).unwrap();
    let mut plain = vec![0u8; size];
    combine_plain(a, b, &mut plain).unwrap();
    assert!(plain == orig);
    h.release(f).unwrap();
}

#[test]
fn reconstructs_small_sizes_both_reloads() {
    let mut f = file();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for size in [1, 2, 7, 64, 4 * KIB, 8 * KIB] {
        round_trip(&mut f, &mut rng, size, Reload::PerByte);
        round_trip(&mut f, &mut rng, size, Reload::PerPass);
    }
}

#[test]
fn reconstructs_sixteen_mib() {
    let mut f = file();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    round_trip(&mut f, &mut rng, 16 * MIB, Reload::PerByte);
}

#[test]
fn zero_length_is_a_no_op() {
    let mut f = file();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = hide_split(&mut f, &mut [], &mut rng, SlotId::Bnd2, SlotId::Bnd3).unwrap();
    let mut out: [u8; 0] = [];
    unhide_combine(&mut f, &h, &mut out, Reload::PerByte).unwrap();
    h.release(&mut f).unwrap();
}

#[test]
fn all_zero_secret_gives_identical_shares() {
    let mut f = file();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut secret = vec![0u8; 4 * KIB];
    let h = hide_split(&mut f, &mut secret, &mut rng, SlotId::Bnd0, SlotId::Bnd1).unwrap();
    let (a, b) = h.shares(&mut f).unwrap();
    assert_eq!(a, b);
    h.release(&mut f).unwrap();
}

/// Pearson chi-square statistic of the 16x16 table of
/// (secret high nibble, share high nibble).
fn nibble_chi_square(secret: &[u8], share: &[u8]) -> f64 {
    let mut table = [[0u64; 16]; 16];
    for (&s, &x) in secret.iter().zip(share) {
        table[(s >> 4) as usize][(x >> 4) as usize] += 1;
    }
    let n = secret.len() as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let cols: Vec<f64> = (0..16).map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64).collect();
    let mut chi = 0.0;
    for i in 0..16 {
        for j in 0..16 {
            let e = rows[i] * cols[j] / n;
            if e > 0.0 {
                let d = table[i][j] as f64 - e;
                chi += d * d / e;
            }
        }
    }
    chi
}

#[test]
fn shares_are_uncorrelated_with_secret() {
    let mut f = file();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // Highly structured secret: repeating ramp with a slow drift.
    let mut secret: Vec<u8> = (0..MIB).map(|i| ((i / 3) ^ (i >> 12)) as u8).collect();
    let orig = secret.clone();
    let h = hide_split(&mut f, &mut secret, &mut rng, SlotId::Bnd0, SlotId::Bnd1).unwrap();
    let (a, b) = h.shares(&mut f).unwrap();

    // 225 degrees of freedom: mean 225, sd ~21. Six sd is a loose bound.
    let limit = 225.0 + 6.0 * (450f64).sqrt();
    let chi_a = nibble_chi_square(&orig, a);
    let chi_b = nibble_chi_square(&orig, b);
    assert!(chi_a < limit, "share A chi-square {chi_a}");
    assert!(chi_b < limit, "share B chi-square {chi_b}");
    // The statistic does react to real dependence.
    assert!(nibble_chi_square(&orig, &orig) > 10.0 * limit);
    h.release(&mut f).unwrap();
}
