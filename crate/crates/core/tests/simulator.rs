use edca_core::analytic::{DetectionModel, NetworkScenario, SolverOptions};
use edca_core::par::Strategy;
use edca_core::sim::{replay_determinism, run_all, run_single, SimConfig, SimStats};
use edca_core::sweep::analyze;

fn t_tr_of(s: &NetworkScenario) -> f64 {
    let q = s.detection.p_preamble * s.detection.p_decode;
    let z = [q, (1.0 - q) * q, (1.0 - q).powi(2) * q, (1.0 - q).powi(3)];
    let mean_bits: f64 = z.iter().enumerate().map(|(i, p)| p * (i + 1) as f64 * s.phy.packet_payload).sum();
    s.phy.phy_header / s.phy.basic_rate + (s.phy.mac_header + mean_bits) / s.phy.data_rate + s.phy.propagation_delay
}

/// One station whose AC0 queue never empties and whose AC1 is silent.
fn lone_station(detection: DetectionModel, duration: f64, runs: u32) -> SimConfig {
    let mut s = NetworkScenario::default().with_stations(1).with_detection(detection);
    s.ac[1].arrival.rate = 0.0;
    let mut cfg = SimConfig::new(s, duration, 11, runs);
    cfg.saturated = [true, false];
    cfg
}

#[test]
fn undetectable_preamble_always_pays_four_copies() {
    let cfg = lone_station(DetectionModel { p_preamble: 0.0, p_decode: 1.0 }, 2.0, 2);
    let st = SimStats::pooled(&run_all(&cfg, Strategy::Parallel).unwrap());
    let s = &cfg.scenario;
    let t_tr = t_tr_of(s);
    // Four copies, three SIFS gaps, and a uniform backoff over 0..=CWmin slots.
    let want = 4.0 * t_tr + 3.0 * s.phy.sifs + s.phy.slot_time * s.ac[0].cw_min as f64 / 2.0;
    let ac0 = &st.ac[0];
    let se = ac0.stddev() / (ac0.n_samples() as f64).sqrt();
    assert!((ac0.mean() - want).abs() < 3.0 * se + 2e-9, "{} vs {want}", ac0.mean());
    assert_eq!(ac0.copies[..3], [0, 0, 0]);
}

#[test]
fn repetition_counts_follow_the_geometric_law() {
    let (pd, ps) = (0.8, 0.7);
    let cfg = lone_station(DetectionModel { p_preamble: pd, p_decode: ps }, 100.0, 8);
    let st = SimStats::pooled(&run_all(&cfg, Strategy::Parallel).unwrap());
    let counts = st.ac[0].copies;
    let n: u64 = counts.iter().sum();
    assert!(n >= 1_000_000, "only {n} transmissions");
    let q = pd * ps;
    let want = [q, (1.0 - q) * q, (1.0 - q).powi(2) * q, (1.0 - q).powi(3)];
    for k in 0..4 {
        let f = counts[k] as f64 / n as f64;
        let se = (want[k] * (1.0 - want[k]) / n as f64).sqrt();
        assert!((f - want[k]).abs() < 3.0 * se, "k={}: {f} vs {} (se {se})", k + 1, want[k]);
    }
}

#[test]
fn light_load_matches_single_category_analysis() {
    let mut s = NetworkScenario::default().with_stations(5).with_detection(DetectionModel::LEGACY);
    s.ac[0].arrival.rate = 10.0;
    s.ac[1].arrival.rate = 0.0;
    let cfg = SimConfig::new(s.clone(), 20.0, 1, 4);
    let st = SimStats::pooled(&run_all(&cfg, Strategy::Parallel).unwrap());
    let a = analyze(&s, &SolverOptions::default()).unwrap();
    let rel = |x: f64, y: f64| ((x - y) / y).abs();
    assert!(rel(st.ac[0].mean(), a.moments[0].mean) < 0.05, "{} vs {}", st.ac[0].mean(), a.moments[0].mean);
    assert!(rel(st.ac[0].stddev(), a.moments[0].stddev) < 0.05);
}

#[test]
fn every_transmission_is_a_success_or_an_external_collision() {
    let cfg = SimConfig::new(NetworkScenario::default().with_stations(60).with_rates(40.0, 40.0), 2.0, 5, 1);
    let st = run_single(&cfg, 0).unwrap();
    let sent: u64 = st.ac.iter().flat_map(|a| a.copies).sum();
    let collided: u64 = st.ac.iter().map(|a| a.external_collisions).sum();
    assert!(collided > 0);
    assert_eq!(sent, st.successes + collided);
    assert!(st.busy_periods >= st.successes);
}

#[test]
fn ac0_wins_every_internal_collision() {
    let mut cfg = SimConfig::new(NetworkScenario::default().with_stations(3), 1.0, 9, 1);
    cfg.saturated = [true, true];
    let st = run_single(&cfg, 0).unwrap();
    assert_eq!(st.ac[0].internal_collisions, 0);
    assert!(st.ac[1].internal_collisions > 0);
}

#[test]
fn runs_are_independent_of_scheduling() {
    let cfg = SimConfig::new(NetworkScenario::default().with_stations(15), 0.5, 42, 4);
    let par = run_all(&cfg, Strategy::Parallel).unwrap();
    let seq = run_all(&cfg, Strategy::Sequential).unwrap();
    assert_eq!(par, seq);
    for (r, stats) in par.iter().enumerate() {
        assert_eq!(&run_single(&cfg, r as u32).unwrap(), stats);
    }
    assert_ne!(par[0], par[1]);
    assert!(replay_determinism(&cfg).unwrap());
}
