//! Simulator invariants on short runs of the shipped scenarios, and the
//! shaper and recovery primitives against brute-force models.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsn_nads::anomaly::{decide_action, AnomalyConfig, AnomalyKind, PacketLabel, PhaseSpec};
use tsn_nads::dataset::encode_capture_point;
use tsn_nads::scenario::{parse_scenario_file, ScenarioConfig, ShapingClass};
use tsn_nads::sim::clock::ClockModel;
use tsn_nads::sim::{
    build_plan, cbs_transmit_time, frer_accept, run_simulation, tas_gate_transmit_time, CreditState, GateSchedule,
    RecoveryState, SimOptions, SimOutput,
};

const MS: u64 = 1_000_000;

/// A shipped scenario cut to `duration`, with its anomaly phase moved to
/// 100 ms on / 100 ms off from 100 ms.
fn short(name: &str, duration: u64) -> ScenarioConfig {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut cfg = parse_scenario_file(&dir.join(format!("{name}.json"))).unwrap();
    cfg.duration_ns = duration;
    for a in &mut cfg.anomalies {
        a.phase.start_ns = 100 * MS;
        a.phase.active_ns = 100 * MS;
        a.phase.inactive_ns = 100 * MS;
    }
    cfg
}

fn run(cfg: &ScenarioConfig, trace: bool) -> SimOutput {
    run_simulation(cfg, &SimOptions { trace_tx: trace }).unwrap()
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let cfg = short("eliminate_auto_brake", 400 * MS);
    let a = run(&cfg, false);
    let b = run(&cfg, false);
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.ledger, b.ledger);
    assert_eq!(a.captures.points.len(), b.captures.points.len());
    for (x, y) in a.captures.points.iter().zip(&b.captures.points) {
        assert_eq!(encode_capture_point(x).unwrap(), encode_capture_point(y).unwrap());
    }
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run(&other, false).ledger, a.ledger);
}

#[test]
fn copies_are_conserved_in_every_scenario() {
    for name in ["baseline", "delay_steer", "eliminate_auto_brake", "inject_can_tunnel", "reorder_camera_front"] {
        let out = run(&short(name, 350 * MS), false);
        assert!(!out.conservation.is_empty());
        for row in &out.conservation {
            assert!(row.balanced(), "{name}: {row:?}");
            assert_eq!(row.queue_dropped, 0, "{name}: {row:?}");
        }
        assert_eq!(out.stats.queue_drops, 0, "{name}");
    }
}

#[test]
fn baseline_delivers_everything_once() {
    let out = run(&short("baseline", 300 * MS), false);
    for l in &out.stats.listeners {
        assert!(l.sent.abs_diff(l.received) <= 1, "{l:?}");
        assert!(l.received <= l.sent, "{l:?}");
    }
    let redundant: u64 = out.stats.listeners.iter().map(|l| l.duplicates_eliminated).sum();
    assert!(redundant > 0, "redundant streams should see their second copy eliminated");
    assert!(out.ledger.entries.is_empty());
    for cp in &out.captures.points {
        assert!(cp.packets.iter().all(|p| p.labels.packet == PacketLabel::Benign), "{}", cp.meta.name);
        assert!(cp.packets.windows(2).all(|w| w[0].ts <= w[1].ts), "{}", cp.meta.name);
        assert!(cp.packets.iter().all(|p| (64..=1522).contains(&p.frame.len())), "{}", cp.meta.name);
    }
}

#[test]
fn timed_frames_stay_inside_their_gates() {
    let cfg = short("baseline", 100 * MS);
    let plan = build_plan(&cfg).unwrap();
    let out = run(&cfg, true);
    let mut checked = 0;
    for r in out.tx_trace.iter().filter(|r| cfg.topology.class_of(r.pcp) == ShapingClass::Timed) {
        let Some(g) = &plan.gates[r.node as usize][r.port as usize] else { continue };
        let ls = r.local_start.max(0) as u64;
        assert_eq!(tas_gate_transmit_time(g, r.pcp, ls, r.end - r.start), Ok(ls), "{r:?}");
        checked += 1;
    }
    assert!(checked > 1000, "{checked}");
}

#[test]
fn shaped_ports_respect_their_idle_slope() {
    let cfg = short("baseline", 60 * MS);
    let plan = build_plan(&cfg).unwrap();
    let out = run(&cfg, true);
    let window = 10 * MS;
    let mut per_queue: BTreeMap<(u32, u32, u8), Vec<(u64, u64)>> = BTreeMap::new();
    for r in &out.tx_trace {
        if plan.idle_slopes[r.node as usize][r.port as usize][usize::from(r.pcp)] > 0 {
            per_queue.entry((r.node, r.port, r.pcp)).or_default().push((r.start, r.bits));
        }
    }
    assert!(!per_queue.is_empty());
    let max_frame_bits = (1522 + 20) * 8;
    for ((node, port, pcp), tx) in per_queue {
        let idle = plan.idle_slopes[node as usize][port as usize][usize::from(pcp)];
        let allowed = (idle as u128 * window as u128 / 1_000_000_000) as u64 + max_frame_bits;
        let mut j = 0;
        let mut bits = 0u64;
        // Windows starting at each transmission, two pointers.
        for i in 0..tx.len() {
            while j < tx.len() && tx[j].0 < tx[i].0 + window {
                bits += tx[j].1;
                j += 1;
            }
            assert!(bits <= allowed, "{}: pcp {pcp}: {bits} bits in 10 ms, allowed {allowed}",
                plan.net.iface_name(node as usize, port as usize));
            bits -= tx[i].1;
        }
    }
}

fn anomaly_of(cfg: &ScenarioConfig) -> &AnomalyConfig {
    &cfg.anomalies[0]
}

#[test]
fn anomaly_actions_respect_phase_and_clearance() {
    for name in ["delay_steer", "eliminate_auto_brake", "inject_can_tunnel", "reorder_camera_front"] {
        let mut cfg = short(name, 600 * MS);
        cfg.anomalies[0].min_clearance_ns = 5 * MS;
        let a = anomaly_of(&cfg).clone();
        let out = run(&cfg, false);
        let times: Vec<u64> = out.ledger.entries.iter().map(|e| e.true_time_ns).collect();
        assert!(!times.is_empty(), "{name}");
        assert!(times.windows(2).all(|w| w[1] - w[0] >= a.min_clearance_ns), "{name}");
        assert!(times.iter().all(|&t| a.phase.is_active(t)), "{name}");
        assert!(out.ledger.entries.iter().all(|e| e.kind == a.kind && e.anomaly_id == a.id), "{name}");
    }
}

#[test]
fn labels_follow_the_actions() {
    for name in ["delay_steer", "eliminate_auto_brake", "inject_can_tunnel", "reorder_camera_front"] {
        let cfg = short(name, 500 * MS);
        let a = anomaly_of(&cfg).clone();
        let out = run(&cfg, false);
        let actions = out.ledger.count(&a.id, a.kind);
        let expected = a.kind.packet_label();
        for cp in &out.captures.points {
            let mut stamped = 0;
            for p in &cp.packets {
                if p.labels.packet.is_anomalous() {
                    assert_eq!(Some(p.labels.packet), expected, "{name} {}", cp.meta.name);
                    assert_eq!(p.labels.phase, a.phase.label, "{name}");
                    stamped += 1;
                }
                if p.labels.packet == PacketLabel::Benign && p.ts < a.phase.start_ns {
                    assert_eq!(p.labels.phase, "", "{name}");
                }
            }
            assert!(stamped <= actions, "{name} {}: {stamped} labels for {actions} actions", cp.meta.name);
        }
        let recovered: usize = out
            .captures
            .points
            .iter()
            .map(|cp| cp.packets.iter().filter(|p| p.labels.packet == PacketLabel::BenignRecovered).count())
            .sum();
        assert!(recovered > 0, "{name}");
    }
}

#[test]
fn eliminations_are_accounted_at_the_port() {
    let cfg = short("eliminate_auto_brake", 500 * MS);
    let a = anomaly_of(&cfg).clone();
    let out = run(&cfg, false);
    let eliminated = out.ledger.count(&a.id, AnomalyKind::Eliminate) as u64;
    assert!(eliminated > 0);
    let stats = &out.anomalies.iter().find(|(id, _)| *id == a.id).unwrap().1;
    assert_eq!(stats.acted, eliminated);
    assert_eq!(stats.matched - eliminated, stats.forwarded);
    // The other ring direction still delivers every frame.
    for l in out.stats.stream_listeners("auto_brake") {
        assert_eq!(l.sent, l.received, "{l:?}");
    }
}

#[test]
fn injections_surface_at_the_listeners() {
    let cfg = short("inject_can_tunnel", 500 * MS);
    let a = anomaly_of(&cfg).clone();
    let out = run(&cfg, false);
    let injected = out.ledger.count(&a.id, AnomalyKind::Inject) as u64;
    assert!(injected > 0);
    for l in out.stats.stream_listeners("can_rl_000") {
        let surplus = l.received.saturating_sub(l.sent);
        assert!(surplus > 0 && surplus <= injected, "{l:?} with {injected} injections");
    }
}

// Primitives against brute-force models.

fn brute_tas(g: &GateSchedule, pcp: u8, ready: u64, tx: u64) -> Option<u64> {
    let fits = |t: u64| (t..t + tx).all(|x| g.is_open(pcp, x));
    (ready..ready + 3 * g.cycle_ns).find(|&t| fits(t))
}

fn brute_cbs(s: CreditState, now: u64) -> u64 {
    // Replay the credit nanosecond by nanosecond.
    let mut credit = s.credit_nb;
    let idle = s.idle_slope_bps as i128;
    for _ in s.last_update..now {
        if credit < 0 {
            credit = (credit + idle).min(0);
        } else {
            credit = 0;
        }
    }
    let mut t = now.max(s.last_update);
    while credit < 0 {
        credit += idle;
        t += 1;
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn tas_matches_scan(cuts in prop::collection::vec(0u64..400, 2..8), ready in 0u64..1_200, tx in 1u64..60) {
        let mut c = cuts.clone();
        c.sort_unstable();
        c.dedup();
        let iv: Vec<(u64, u64)> = c.chunks(2).filter(|p| p.len() == 2).map(|p| (p[0], p[1])).collect();
        prop_assume!(!iv.is_empty());
        let mut g = GateSchedule::always_open(400);
        g.set_open(6, &iv).unwrap();
        match tas_gate_transmit_time(&g, 6, ready, tx) {
            Ok(t) => prop_assert_eq!(Some(t), brute_tas(&g, 6, ready, tx)),
            Err(_) => prop_assert_eq!(brute_tas(&g, 6, ready, tx), None),
        }
    }

    #[test]
    fn cbs_matches_replay(credit in -20_000i64..2_000, idle_mbps in 1u64..900, last in 0u64..2_000,
                          gap in 0u64..3_000, tx in 1u64..12_000) {
        let s = CreditState::new(idle_mbps * 1_000_000, 1_000_000_000).with_credit_bits(credit);
        let s = CreditState { last_update: last, ..s };
        let now = last + gap;
        let (start, after) = cbs_transmit_time(s, now, tx);
        prop_assert_eq!(start, brute_cbs(s, now));
        prop_assert!(start >= now);
        prop_assert_eq!(after.last_update, start + tx);
        // Credit at the start was zero or just above; the frame then drains it.
        let at_start = after.credit_nb - after.send_slope_bps as i128 * tx as i128;
        prop_assert!(at_start >= 0);
        prop_assert!(at_start < s.idle_slope_bps as i128 || credit >= 0);
    }

    #[test]
    fn frer_matches_window_model(seqs in prop::collection::vec(0u64..40, 0..200), hist in 1usize..16) {
        let mut s = RecoveryState::new(hist);
        let mut accepted: Vec<u64> = Vec::new();
        for q in seqs {
            let recent: HashSet<u64> = accepted.iter().rev().take(hist).copied().collect();
            let want = !recent.contains(&q);
            prop_assert_eq!(frer_accept(&mut s, q), want);
            if want {
                accepted.push(q);
            }
            prop_assert!(s.len() <= hist);
        }
    }

    #[test]
    fn decide_action_gates(seed in any::<u64>(), p in 0.0f64..=1.0, clearance in 0u64..20, start in 0u64..50,
                           active in 1u64..40, inactive in 0u64..40) {
        let mut cfg: AnomalyConfig = serde_json::from_value(serde_json::json!({
            "id": "a", "kind": "eliminate",
            "location": {"node": "s", "port": "eth0"},
            "target_filter": {"stream": "x"},
            "phase": {"start_ns": 0, "active_ns": 1, "label": "ph"},
            "probability": 0.5, "params": {"eliminate": {}}
        })).unwrap();
        cfg.probability = p;
        cfg.min_clearance_ns = clearance;
        cfg.phase = PhaseSpec { start_ns: start, active_ns: active, inactive_ns: inactive, label: "ph".into() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = ChaCha8Rng::seed_from_u64(seed);
        let mut last = None;
        let mut model_last: Option<u64> = None;
        for t in 0..300u64 {
            let got = decide_action(&cfg, t, &mut last, &mut rng);
            let gated = cfg.phase.is_active(t) && model_last.is_none_or(|l| t - l >= clearance);
            let want = gated && model.gen::<f64>() < p.max(if p >= 1.0 { 2.0 } else { 0.0 });
            prop_assert_eq!(got, want, "t = {}", t);
            if want {
                model_last = Some(t);
            }
        }
    }

    #[test]
    fn phase_intervals_agree_with_membership(start in 0u64..100, active in 0u64..30, inactive in 0u64..30,
                                             from in 0u64..150, len in 0u64..150) {
        let ph = PhaseSpec { start_ns: start, active_ns: active, inactive_ns: inactive, label: "p".into() };
        let until = from + len;
        let iv = ph.active_intervals(from, until);
        for t in from..until {
            prop_assert_eq!(iv.iter().any(|&(a, b)| a <= t && t < b), ph.is_active(t), "t = {}", t);
        }
        prop_assert!(iv.windows(2).all(|w| w[0].1 < w[1].0 || inactive == 0));
    }

    #[test]
    fn clock_error_is_bounded(ppb in -50_000i64..50_000, bound in 0u64..2_000, key in any::<u64>(),
                              t in 0u64..2_000_000_000) {
        let c = ClockModel { drift_ppb: ppb, sync_interval_ns: 125_000_000, post_sync_offset_bound_ns: bound, key };
        prop_assert!((c.local_time(t) - t as i64).unsigned_abs() <= c.error_bound());
        let local = c.local_time(t);
        let back = c.true_time_at(0, local);
        prop_assert!(back <= t && c.local_time(back) >= local);
    }
}

#[test]
fn clearance_gated_coin_flips() {
    // p = 0.5 with a 10 ms clearance over a 1 s phase on a 1 ms grid.
    let mut cfg: AnomalyConfig = serde_json::from_value(serde_json::json!({
        "id": "a", "kind": "eliminate",
        "location": {"node": "s", "port": "eth0"},
        "target_filter": {"stream": "x"},
        "phase": {"start_ns": 0, "active_ns": 1000000000, "label": "ph"},
        "probability": 0.5, "min_clearance_ns": 10000000, "params": {"eliminate": {}}
    }))
    .unwrap();
    let mut total = 0usize;
    let runs = 400;
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut last = None;
        let n = (0..1000u64).filter(|k| decide_action(&cfg, k * MS, &mut last, &mut rng)).count();
        assert!(n <= 100);
        total += n;
    }
    // Each action is followed by 9 dead slots and a geometric wait of mean 1.
    let mean = total as f64 / runs as f64;
    assert!((mean - 1000.0 / 11.0).abs() < 2.0, "{mean}");
    cfg.probability = 1.0;
    cfg.min_clearance_ns = 0;
    let mut last = None;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!((0..100u64).all(|k| decide_action(&cfg, k, &mut last, &mut rng)));
}
