//! Detection pipeline checked against brute-force oracles.

mod oracles;

use oracles::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsn_nads::anomaly::{LabelPair, PacketLabel};
use tsn_nads::dataset::{CapturePoint, CaptureSet, InterfaceMeta, LabeledPacket};
use tsn_nads::nads::detect::Hbos;
use tsn_nads::nads::{
    compute_window_metrics, evaluate, run_evaluation, train_detector, DetectorKind, NadsError, Params, StreamFilter,
    Truth, WindowConfig,
};
use tsn_nads::net::Direction;

fn check_against_brute(pkts: &[LabeledPacket]) {
    let cfg = WindowConfig::default();
    let got = compute_window_metrics(pkts, &cfg);
    let want = brute_windows(pkts, cfg.nominal_ns);
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g.start, w.start);
        assert_eq!(g.real_length, w.real);
        assert_eq!(g.packet_count, w.packets);
        assert_eq!(g.sums.bytes, w.bytes);
        assert_eq!(g.sums.gap_sum_ns, w.gap_sum);
        assert_eq!(g.sums.jitter2_sum_ns, w.jitter2_sum);
        assert_eq!(g.bandwidth_bps, w.bandwidth());
        assert_eq!(g.avg_frame_size, w.bytes as f64 / w.packets as f64);
        assert_eq!(g.ground_truth.is_abnormal(), w.abnormal);
        assert!(g.real_length >= g.nominal_length);
    }
}

#[test]
fn metrics_match_recount_on_1000_sequences() {
    for seed in 0..1000 {
        let n = 1 + (seed as usize * 37) % 400;
        check_against_brute(&random_packets(seed, n));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn windows_partition_the_stream(seed in any::<u64>(), n in 1usize..600) {
        let pkts = random_packets(seed, n);
        let cfg = WindowConfig { flush: true, ..Default::default() };
        let w = compute_window_metrics(&pkts, &cfg);
        prop_assert_eq!(w.iter().map(|x| x.packet_count).sum::<u64>(), n as u64);
        for pair in w.windows(2) {
            prop_assert!(pair[0].start + pair[0].real_length <= pair[1].start);
        }
        prop_assert!(w.iter().all(|x| x.packet_count >= 1 && x.real_length >= x.nominal_length));
    }

    #[test]
    fn hbos_equals_histogram_lookup(seed in any::<u64>(), n in 2usize..80, bins in 1usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let h = Hbos::fit(&train, bins, 0.1);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.2..1.2)).collect();
            prop_assert!(hbos_matches_brute(&h, &train, &x));
        }
        for x in &train {
            prop_assert!(hbos_matches_brute(&h, &train, x));
        }
    }

    #[test]
    fn confusion_counts_are_consistent(v in prop::collection::vec((any::<bool>(), any::<bool>()), 0..300)) {
        let t = |b: bool| if b { Truth::Abnormal } else { Truth::Benign };
        let pred: Vec<Truth> = v.iter().map(|x| t(x.0)).collect();
        let truth: Vec<Truth> = v.iter().map(|x| t(x.1)).collect();
        let r = evaluate(&pred, &truth).unwrap();
        prop_assert_eq!(r.total(), v.len() as u64);
        prop_assert_eq!((r.tp, r.fp, r.tn, r.fn_), hand_count(&pred, &truth));
        if let Some(p) = r.precision {
            prop_assert_eq!(p, r.tp as f64 / (r.tp + r.fp) as f64);
        } else {
            prop_assert_eq!(r.tp + r.fp, 0);
        }
        if let Some(rc) = r.recall {
            prop_assert_eq!(rc, r.tp as f64 / (r.tp + r.fn_) as f64);
        } else {
            prop_assert_eq!(r.tp + r.fn_, 0);
        }
    }
}

#[test]
fn reference_confusion_rows() {
    for row in &REFERENCE_ROWS {
        let (tp, fp, tn, fn_) = row.0;
        let (p, t) = expand_counts(tp, fp, tn, fn_);
        let r = evaluate(&p, &t).unwrap();
        assert!(report_matches_row(&r, row), "{r:?} vs {row:?}");
    }
}

#[test]
fn autoencoder_gradient_at_random_points() {
    for seed in 0..20 {
        let e = autoencoder_gradient_error(seed);
        assert!(e <= 1e-4, "seed {seed}: relative error {e}");
    }
}

/// Jittered 1 ms stream; `bump` adds packets between 4 s and 6 s.
fn stream(seed: u64, bump: bool) -> CaptureSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cp = CapturePoint::new(InterfaceMeta::new("sw", "eth0", Direction::In, 1_000_000_000));
    for k in 0..10_000u64 {
        let ts = k * 1_000_000 + rng.gen_range(0..20_000);
        cp.packets.push(LabeledPacket { ts, frame: vec![0; 110], labels: LabelPair::benign() });
        if bump && (4_000..6_000).contains(&k) && k % 3 == 0 {
            let labels = LabelPair::new(PacketLabel::Injected, "inject");
            cp.packets.push(LabeledPacket { ts: ts + 400_000, frame: vec![0; 110], labels });
        }
    }
    CaptureSet { points: vec![cp] }
}

#[test]
fn every_detector_separates_an_obvious_injection() {
    let train = stream(1, false);
    let test = stream(2, true);
    let f: StreamFilter = "iface=sw-eth0-in".parse().unwrap();
    for kind in DetectorKind::ALL {
        let ev = run_evaluation(&train, &test, &f, kind, &Params::default(), 5, &WindowConfig::default()).unwrap();
        assert_eq!(ev.report.recall, Some(1.0), "{kind}: {:?}", ev.report);
        assert!(ev.report.precision.unwrap() >= 0.5, "{kind}: {:?}", ev.report);
    }
}

#[test]
fn pipeline_is_deterministic() {
    let train = stream(3, false);
    let test = stream(4, true);
    let f = StreamFilter::udp_dst(1);
    let f_all: StreamFilter = "dir=in".parse().unwrap();
    assert!(run_evaluation(&train, &test, &f, DetectorKind::Hbos, &Params::default(), 1, &WindowConfig::default())
        .is_err());
    for kind in DetectorKind::ALL {
        let a = run_evaluation(&train, &test, &f_all, kind, &Params::default(), 9, &WindowConfig::default()).unwrap();
        let b = run_evaluation(&train, &test, &f_all, kind, &Params::default(), 9, &WindowConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn pipeline_errors() {
    let train = stream(3, false);
    let none: StreamFilter = "iface=other".parse().unwrap();
    let all: StreamFilter = "dir=in".parse().unwrap();
    let w = WindowConfig::default();
    let p = Params::default();
    assert_eq!(run_evaluation(&train, &train, &none, DetectorKind::Hbos, &p, 1, &w).unwrap_err(), NadsError::EmptyTraining);
    let bad = Params::default().set("trees", 10);
    assert!(matches!(
        run_evaluation(&train, &train, &all, DetectorKind::Hbos, &bad, 1, &w),
        Err(NadsError::UnknownParam { .. })
    ));
    let few = compute_window_metrics(&train.points[0].packets[..500], &w);
    assert!(matches!(train_detector(DetectorKind::Hbos, &few, &p, 1), Err(NadsError::TooFewWindows { .. })));
}

#[test]
fn training_windows_mostly_pass_the_autoencoder() {
    let train = stream(6, false);
    let w = compute_window_metrics(&train.points[0].packets, &WindowConfig::default());
    let m = train_detector(DetectorKind::Autoencoder, &w, &Params::default(), 2).unwrap();
    let flagged = w.iter().filter(|x| m.predict(&x.features()).is_abnormal()).count();
    assert!(flagged as f64 <= 0.01 * w.len() as f64 + 1.0);
    // Same window twice, same answer.
    assert_eq!(m.predict(&w[0].features()), m.predict(&w[0].features()));
}
