use proptest::prelude::*;
use turbo_ep::channel::{CHAN3, PROAKIS_C};
use turbo_ep::equalizers::EqualizerKind;
use turbo_ep::evaluation::{ber_sweep, interpolated_crossing, SweepOptions};
use turbo_ep::modem::{ConstellationKind, Domain};
use turbo_ep::turbo::{frame_seed, Link, LinkConfig};

fn link(cst: ConstellationKind, taps: &[f64], n: usize, kind: EqualizerKind, db: f64) -> Link {
    Link::new(LinkConfig::new(cst, taps, n, kind, db), 11).unwrap()
}

#[test]
fn noiseless_frames_decode_at_first_pass() {
    for kind in EqualizerKind::ALL {
        for cst in [ConstellationKind::Bpsk, ConstellationKind::Psk8] {
            if kind == EqualizerKind::Bcjr && cst != ConstellationKind::Bpsk {
                continue;
            }
            let r = link(cst, &CHAN3, 256, kind, 60.0)
                .run_frame(frame_seed(11, 0, 0))
                .unwrap();
            assert_eq!(r.bit_errors[0], 0, "{} {}", kind.name(), cst.name());
        }
    }
}

#[test]
fn equalizer_choice_leaves_transmission_alone() {
    let a = link(
        ConstellationKind::Bpsk,
        &PROAKIS_C,
        512,
        EqualizerKind::LmmseBlock,
        5.0,
    );
    let b = link(
        ConstellationKind::Bpsk,
        &PROAKIS_C,
        512,
        EqualizerKind::Nubep,
        5.0,
    );
    let seed = frame_seed(11, 2, 9);
    let (ba, ia, ya) = a.transmit_frame(seed).unwrap();
    let (bb, ib, yb) = b.transmit_frame(seed).unwrap();
    assert_eq!(ba, bb);
    assert_eq!(ia, ib);
    assert_eq!(ya, yb);
}

#[test]
fn real_links_use_the_real_domain() {
    let cfg = LinkConfig::new(
        ConstellationKind::Bpsk,
        &CHAN3,
        256,
        EqualizerKind::Nubep,
        3.0,
    );
    assert_eq!(cfg.domain, Domain::Real);
    let cfg = LinkConfig::new(
        ConstellationKind::Qam16,
        &CHAN3,
        256,
        EqualizerKind::Nubep,
        3.0,
    );
    assert_eq!(cfg.domain, Domain::Complex);
}

#[test]
fn nubep_within_half_a_db_of_bcjr() {
    let opts = SweepOptions {
        min_frames: 200,
        min_errors: u64::MAX,
        seed: 5,
        workers: 0,
    };
    let cfg = |kind| LinkConfig::new(ConstellationKind::Bpsk, &CHAN3, 1024, kind, 0.0);
    let grid = [3.5, 4.0, 4.5];
    let bcjr = ber_sweep(&cfg(EqualizerKind::Bcjr), &grid, &opts).unwrap();
    let at = bcjr
        .iter()
        .filter(|r| r.turbo_iter == 5)
        .find(|r| r.ber < 1e-3)
        .map(|r| r.eb_n0_db)
        .expect("BCJR stays above 1e-3 on the grid");
    let nubep = ber_sweep(&cfg(EqualizerKind::Nubep), &[at, at + 0.5], &opts).unwrap();
    let x = interpolated_crossing(&nubep, 5, 1e-3, 512).expect("nuBEP never reaches 1e-3");
    assert!(
        x <= at + 0.5,
        "BCJR below 1e-3 at {at} dB, nuBEP crosses at {x:.2} dB"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ber_records_are_consistent(seed in 0u64..1000, db in 0.0f64..8.0) {
        let opts = SweepOptions { min_frames: 3, min_errors: 50, seed, workers: 1 };
        let cfg = LinkConfig {
            turbo_iterations: 3,
            ..LinkConfig::new(ConstellationKind::Bpsk, &CHAN3, 128, EqualizerKind::LmmseBlock, 0.0)
        };
        let recs = ber_sweep(&cfg, &[db], &opts).unwrap();
        prop_assert_eq!(recs.len(), 3);
        for (t, r) in recs.iter().enumerate() {
            prop_assert_eq!(r.turbo_iter, t + 1);
            prop_assert_eq!(r.ber, r.bit_errors as f64 / (r.frames as f64 * 64.0));
            prop_assert!(r.frames >= 3 || r.bit_errors >= 50);
        }
    }
}
