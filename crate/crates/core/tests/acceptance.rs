//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line
//! with the numbers behind the verdict, then asserts it.
//!
//! Run with `cargo test -p edca-core --test acceptance -- --nocapture` to
//! see the lines.

use std::time::{Duration, Instant};

use edca_core::analytic::{
    cw_schedule, external_collision, solve_fixed_point, z_distribution, ArrivalKind, DetectionModel,
    FixedPointSolution, NetworkScenario, SolverOptions,
};
use edca_core::config::ConfigDocument;
use edca_core::delay::{moments_from_pgf, pgf_transmission, reliability, ServiceModel, TimeGrid};
use edca_core::par::{map_range, Strategy};
use edca_core::platoon::{
    characteristic, count_sign_changes, critical_delay, default_step, integrate_platoon, Dynamics, FvdParams,
    GapMapping, LeadState, VehicleState, FVD_DEFAULT_RANGES,
};
use edca_core::report;
use edca_core::sim::SimConfig;
use edca_core::sweep::{analyze, axis_values, PlatoonRow, SweepAxis, SweepContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, name: &str, pass: bool, elapsed: Duration, budget: Duration, detail: &str) {
    let in_time = elapsed <= budget;
    let ok = pass && in_time;
    println!(
        "criterion {n} ({name}): {}  [{:.2} s of {} s]  {detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(in_time, "criterion {n} exceeded its {} s budget", budget.as_secs());
}

fn context() -> SweepContext {
    let doc = ConfigDocument::default();
    SweepContext {
        scenario: doc.scenario().unwrap(),
        solver: doc.solver_options().unwrap(),
        platoon: doc.platoon_setup().unwrap(),
        strategy: Strategy::Parallel,
    }
}

// Independent timing helpers, in seconds.

fn t_tr_of(s: &NetworkScenario) -> f64 {
    let (pd, ps) = (s.detection.p_preamble, s.detection.p_decode);
    let q = pd * ps;
    let z = [q, (1.0 - q) * q, (1.0 - q).powi(2) * q, (1.0 - q).powi(3)];
    let mean_bits: f64 = z.iter().enumerate().map(|(i, p)| p * (i + 1) as f64 * s.phy.packet_payload).sum();
    s.phy.phy_header / s.phy.basic_rate + (s.phy.mac_header + mean_bits) / s.phy.data_rate + s.phy.propagation_delay
}

fn burst_of(k: u32, t_tr: f64, sifs: f64) -> f64 {
    k as f64 * t_tr + (k - 1) as f64 * sifs
}

#[test]
fn c01_legacy_reduction() {
    let start = Instant::now();
    let legacy = DetectionModel { p_preamble: 1.0, p_decode: 1.0 };
    let z = z_distribution(&legacy);
    let single = z.probs == [1.0, 0.0, 0.0, 0.0];

    let mut worst = 0.0f64;
    for i in 0..10 {
        let beta = 0.005 + 0.05 * i as f64;
        for n in [1u32, 2, 3, 5, 10, 30, 60, 100, 300, 500] {
            let want = 1.0 - (1.0 - beta).powf(n as f64 - 1.0);
            let got = external_collision(beta, n, &z).p_o;
            worst = worst.max((got - want).abs());
        }
    }
    // The converged solver obeys the same expression.
    for n in [10, 100] {
        let s = NetworkScenario::default().with_stations(n).with_detection(legacy);
        let sol = solve_fixed_point(&s, &SolverOptions::default()).unwrap();
        let want = 1.0 - (1.0 - sol.beta[0] - sol.beta[1]).powf(n as f64 - 1.0);
        worst = worst.max((sol.p_ext - want).abs());
    }

    let s = NetworkScenario::default().with_detection(legacy);
    let grid = TimeGrid::default();
    let t_tr = t_tr_of(&s);
    let d = pgf_transmission(&z, t_tr, s.phy.sifs, grid);
    let atoms: Vec<(u64, f64)> = d.iter_ticks().filter(|(_, p)| *p != 0.0).collect();
    let one_atom = atoms == vec![((t_tr / grid.tick).round() as u64, 1.0)];

    let pass = single && worst <= 1e-12 && one_atom;
    verdict(
        1,
        "legacy reduction",
        pass,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("p(Z=1)=1: {single}; max |p_o - 802.11p| = {worst:.2e}; single transmission atom: {one_atom} {atoms:?}"),
    );
}

/// Copies sent by the repetition protocol: a copy ends the burst when its
/// preamble is detected and its payload decoded; the fourth copy is always
/// the last.
fn repetition_trial(rng: &mut ChaCha8Rng, pd: f64, ps: f64) -> usize {
    for k in 1..=3 {
        if rng.random::<f64>() < pd && rng.random::<f64>() < ps {
            return k;
        }
    }
    4
}

#[test]
fn c02_repetition_count_distribution() {
    let start = Instant::now();
    const TRIALS: u64 = 1_000_000;
    let points: Vec<(f64, f64)> =
        (0..=10).flat_map(|i| (0..=10).map(move |j| (i as f64 / 10.0, j as f64 / 10.0))).collect();
    let results = map_range(Strategy::Parallel, points.len(), |idx| {
        let (pd, ps) = points[idx];
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + idx as u64);
        let mut counts = [0u64; 4];
        for _ in 0..TRIALS {
            counts[repetition_trial(&mut rng, pd, ps) - 1] += 1;
        }
        let z = z_distribution(&DetectionModel { p_preamble: pd, p_decode: ps });
        let sum_err = (z.probs.iter().sum::<f64>() - 1.0).abs();
        let mut exceed = Vec::new();
        let mut worst_z = 0.0f64;
        for (k, (&p, &count)) in z.probs.iter().zip(&counts).enumerate() {
            let freq = count as f64 / TRIALS as f64;
            let se = (p * (1.0 - p) / TRIALS as f64).sqrt();
            let dev = (freq - p).abs();
            if se > 0.0 {
                worst_z = worst_z.max(dev / se);
            }
            if dev > 3.0 * se + 1e-12 {
                exceed.push((pd, ps, k + 1, dev / se.max(f64::MIN_POSITIVE)));
            }
        }
        (sum_err, exceed, worst_z)
    });
    let max_sum_err = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let exceed: Vec<_> = results.iter().flat_map(|r| r.1.clone()).collect();
    let worst_z = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let pass = max_sum_err <= 1e-12 && exceed.is_empty();
    verdict(
        2,
        "repetition-count oracle",
        pass,
        start.elapsed(),
        Duration::from_secs(60),
        &format!(
            "121 points x 1e6 trials; max |sum - 1| = {max_sum_err:.1e}; largest deviation {worst_z:.2} SE; \
             beyond 3 SE: {exceed:?}"
        ),
    );
}

/// Exact mean and second moment, in ticks, of the service time obtained by
/// enumerating every stage path, every combination of backoff counters and
/// every mix of idle and busy decrements.
fn enumerate_service(
    windows: &[u32],
    p_collision: f64,
    retry_always_ends: bool,
    step: &[(u64, f64)],
    tx: &[(u64, f64)],
) -> (f64, f64) {
    let tx_m1: f64 = tx.iter().map(|(t, p)| *t as f64 * p).sum();
    let tx_m2: f64 = tx.iter().map(|(t, p)| (*t as f64).powi(2) * p).sum();

    // Moments of the sum of m decrements, from all class counts.
    let max_m: usize = windows.iter().map(|w| *w as usize - 1).sum();
    let mut factorial = vec![1.0f64; max_m + 1];
    for i in 1..=max_m {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let mut step_moments = vec![(0.0, 0.0); max_m + 1];
    for (m, slot) in step_moments.iter_mut().enumerate() {
        let mut counts = vec![0usize; step.len()];
        let (mut e1, mut e2) = (0.0, 0.0);
        fn walk(
            i: usize,
            left: usize,
            counts: &mut Vec<usize>,
            step: &[(u64, f64)],
            fact: &[f64],
            m: usize,
            acc: &mut (f64, f64),
        ) {
            if i == step.len() - 1 {
                counts[i] = left;
                let mut prob = fact[m];
                let mut dur = 0.0;
                for (c, (t, p)) in counts.iter().zip(step) {
                    prob *= p.powi(*c as i32) / fact[*c];
                    dur += *c as f64 * *t as f64;
                }
                acc.0 += prob * dur;
                acc.1 += prob * dur * dur;
                return;
            }
            for c in 0..=left {
                counts[i] = c;
                walk(i + 1, left - c, counts, step, fact, m, acc);
            }
        }
        let mut acc = (0.0, 0.0);
        walk(0, m, &mut counts, step, &factorial, m, &mut acc);
        e1 += acc.0;
        e2 += acc.1;
        *slot = (e1, e2);
    }

    // Every counter combination along every stage path.
    let mut mean = 0.0;
    let mut second = 0.0;
    let stages = windows.len();
    let mut reach = 1.0;
    for n in 0..stages {
        let last = n + 1 == stages;
        let success = if last && retry_always_ends { reach } else { reach * (1.0 - p_collision) };
        let exhausted = if last && !retry_always_ends { reach * p_collision } else { 0.0 };
        let combos: usize = windows[..=n].iter().map(|w| *w as usize).product();
        let weight = 1.0 / combos as f64;
        for idx in 0..combos {
            let mut rest = idx;
            let mut m = 0;
            for w in &windows[..=n] {
                m += rest % *w as usize;
                rest /= *w as usize;
            }
            let (s1, s2) = step_moments[m];
            mean += weight * (success * (s1 + tx_m1) + exhausted * s1);
            second += weight * (success * (s2 + 2.0 * s1 * tx_m1 + tx_m2) + exhausted * s2);
        }
        reach *= p_collision;
    }
    (mean, second)
}

#[test]
fn c03_moment_extraction_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = TimeGrid::default();
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    for case in 0..50 {
        let mut s =
            NetworkScenario::default().with_detection(DetectionModel { p_preamble: rng.random(), p_decode: rng.random() });
        s.phy.data_rate = [3e6, 6e6, 12e6, 27e6][rng.random_range(0..4)];
        s.phy.packet_payload = rng.random_range(100.0..4000.0);
        let ac_index = case % 2;
        let ac = &mut s.ac[ac_index];
        let w0 = [1u32, 2, 4, 8][rng.random_range(0..4)];
        let doublings = rng.random_range(0..=(8 / w0).trailing_zeros());
        ac.cw_min = w0 - 1;
        ac.cw_max = (w0 << doublings) - 1;
        ac.retry_limit = if ac_index == 0 { 0 } else { rng.random_range(0..=2) };
        let ac = s.ac[ac_index];
        let p_busy: f64 = rng.random();
        let p_coll: f64 = if ac_index == 0 { 0.0 } else { rng.random_range(0.0..0.95) };

        let windows: Vec<u32> = (0..=ac.retry_limit).map(|j| cw_schedule(&ac, j).unwrap()).collect();
        let t_tr = t_tr_of(&s);
        let q = s.detection.p_preamble * s.detection.p_decode;
        let z = [q, (1.0 - q) * q, (1.0 - q).powi(2) * q, (1.0 - q).powi(3)];
        let aifs = s.phy.sifs + ac.aifsn as f64 * s.phy.slot_time;
        let tick = |t: f64| (t / grid.tick).round() as u64;
        let mut step = vec![(tick(s.phy.slot_time), 1.0 - p_busy)];
        step.extend((1..=4).map(|k| (tick(burst_of(k, t_tr, s.phy.sifs) + aifs), p_busy * z[k as usize - 1])));
        let tx: Vec<(u64, f64)> = (1..=4).map(|k| (tick(burst_of(k, t_tr, s.phy.sifs)), z[k as usize - 1])).collect();
        let (m1, m2) = enumerate_service(&windows, p_coll, ac_index == 0, &step, &tx);
        let want_mean = m1 * grid.tick;
        let want_std = (m2 - m1 * m1).max(0.0).sqrt() * grid.tick;

        let model = if ac_index == 0 {
            ServiceModel::ac0(&s, grid, p_busy).unwrap()
        } else {
            ServiceModel::ac1(&s, grid, p_busy, p_coll).unwrap()
        };
        let from_dist = moments_from_pgf(&model.distribution()).unwrap();
        let closed = model.moments();
        for (label, got) in [("distribution", from_dist), ("closed form", closed)] {
            let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
            let err = rel(got.mean, want_mean).max(rel(got.stddev, want_std));
            if err > worst {
                worst = err;
                worst_case = format!("case {case} ({label}, AC{ac_index}, windows {windows:?})");
            }
        }
    }
    verdict(
        3,
        "moment-extraction oracle",
        worst <= 1e-10,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("50 scenarios; worst relative error {worst:.2e} at {worst_case}"),
    );
}

/// Re-derives every chain relation from the returned fields and reports the
/// largest discrepancy.
fn self_consistency(s: &NetworkScenario, sol: &FixedPointSolution, grid: TimeGrid) -> (f64, f64) {
    let n = s.n_stations as f64;
    let x = sol.beta[0] + sol.beta[1];
    let q = s.detection.p_preamble * s.detection.p_decode;
    let z = [q, (1.0 - q) * q, (1.0 - q).powi(2) * q, (1.0 - q).powi(3)];
    let t_tr = t_tr_of(s);
    let sifs = s.phy.sifs;
    let idle_others = (1.0 - x).powf(n - 1.0);
    let p_ex = 1.0 - idle_others;
    let p_o: f64 = (0..4).map(|k| z[k] * (1.0 - (1.0 - p_ex).powi(k as i32 + 1))).sum();
    let w0 = sol.omega[0];
    let p_b = [p_ex, 1.0 - idle_others * (1.0 - w0)];
    let p_c1 = w0 + (1.0 - w0) * p_o;

    let mean_burst: f64 = (1..=4).map(|k| z[k as usize - 1] * burst_of(k, t_tr, sifs)).sum();
    let p_a: Vec<f64> = (0..2)
        .map(|i| {
            let aifs = sifs + s.ac[i].aifsn as f64 * s.phy.slot_time;
            let eps = (1.0 - p_b[i]) * s.phy.slot_time + p_b[i] * (mean_burst + aifs);
            let lam = s.ac[i].arrival.rate;
            match s.ac[i].arrival.kind {
                ArrivalKind::Poisson => 1.0 - (-lam * eps).exp(),
                ArrivalKind::Periodic => (lam * eps).min(1.0),
            }
        })
        .collect();
    let idle_term = |i: usize| if sol.rho[i] >= 1.0 { 0.0 } else { (1.0 - sol.rho[i]) / p_a[i] };

    let ac0 = &s.ac[0];
    let omega0 = 1.0 / ((ac0.cw_min as f64 + 2.0) / (2.0 * (1.0 - p_b[0])) + idle_term(0));
    let ac1 = &s.ac[1];
    let windows: Vec<f64> = (0..=ac1.retry_limit)
        .map(|j| ((ac1.cw_min as f64 + 1.0) * 2f64.powi(j as i32)).min(ac1.cw_max as f64 + 1.0))
        .collect();
    let attempts: f64 = (0..windows.len()).map(|j| p_c1.powi(j as i32)).sum();
    let slots: f64 = windows.iter().enumerate().map(|(j, w)| p_c1.powi(j as i32) * (w - 1.0)).sum();
    let omega1 = attempts / (attempts + slots / (2.0 * (1.0 - p_b[1])) + idle_term(1));

    let pairs = [
        (sol.p_ext_single, p_ex),
        (sol.p_ext, p_o),
        (sol.p_busy[0], p_b[0]),
        (sol.p_busy[1], p_b[1]),
        (sol.p_internal[1], w0),
        (sol.p_coll_ac1, p_c1),
        (sol.p_arrival[0], p_a[0]),
        (sol.p_arrival[1], p_a[1]),
        (sol.omega[0], omega0),
        (sol.omega[1], omega1),
    ];
    let mut worst = pairs.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if sol.beta[0] != sol.omega[0] || sol.beta[1] != sol.omega[1] * (1.0 - sol.omega[0]) {
        worst = f64::INFINITY;
    }

    // Utilisation from the mean service time on the grid.
    let tick = |t: f64| (t / grid.tick).round() * grid.tick;
    let tx_mean: f64 = (1..=4).map(|k| z[k as usize - 1] * tick(burst_of(k, t_tr, sifs))).sum();
    let step_mean = |i: usize| {
        let aifs = sifs + s.ac[i].aifsn as f64 * s.phy.slot_time;
        (1.0 - p_b[i]) * tick(s.phy.slot_time)
            + p_b[i] * (1..=4).map(|k| z[k as usize - 1] * tick(burst_of(k, t_tr, sifs) + aifs)).sum::<f64>()
    };
    let t0 = (ac0.cw_min as f64) / 2.0 * step_mean(0) + tx_mean;
    let mut t1 = 0.0;
    let mut backoff = 0.0;
    for (j, w) in windows.iter().enumerate() {
        backoff += (w - 1.0) / 2.0 * step_mean(1);
        t1 += p_c1.powi(j as i32) * (1.0 - p_c1) * (backoff + tx_mean);
    }
    t1 += p_c1.powi(windows.len() as i32) * backoff;
    let rho_err = [t0, t1]
        .iter()
        .enumerate()
        .map(|(i, t)| ((s.ac[i].arrival.rate * t).min(1.0) - sol.rho[i]).abs())
        .fold(0.0, f64::max);
    (worst, rho_err.max(sol.residual))
}

#[test]
fn c04_fixed_point_self_consistency() {
    let start = Instant::now();
    let ctx = context();
    let mut details = Vec::new();
    let mut pass = true;
    for n in [10, 100, 300] {
        let s = ctx.scenario.clone().with_stations(n);
        let sol = solve_fixed_point(&s, &ctx.solver).unwrap();
        let (eq_err, rho_err) = self_consistency(&s, &sol, ctx.solver.grid);
        pass &= eq_err <= 1e-9 && rho_err <= 1e-5;
        details.push(format!("N={n}: relations {eq_err:.1e}, rho {rho_err:.1e} ({} iterations)", sol.iterations));
    }
    verdict(4, "fixed-point self-consistency", pass, start.elapsed(), Duration::from_secs(10), &details.join("; "));
}

fn monotone(values: &[f64], increasing: bool) -> Vec<usize> {
    values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let tol = 1e-9 * w[0].abs().max(w[1].abs());
            w.iter().any(|v| v.is_nan()) || if increasing { w[1] < w[0] - tol } else { w[1] > w[0] + tol }
        })
        .map(|(i, _)| i + 1)
        .collect()
}

#[test]
fn c05_network_parameter_trends() {
    let start = Instant::now();
    let ctx = context();
    let n_axis = axis_values(10.0, 500.0, 50, false).unwrap();
    let packet_axis = axis_values(10.0, 10_000.0, 40, true).unwrap();
    let rate_axis = axis_values(62.5e3, 100e6, 40, true).unwrap();
    let by_n = ctx.delay_sweep(SweepAxis::NStations, &n_axis);
    let by_packet = ctx.delay_sweep(SweepAxis::PacketBits, &packet_axis);
    let by_rate = ctx.delay_sweep(SweepAxis::DataRate, &rate_axis);

    let mut problems = Vec::new();
    for ac in 0..2 {
        let col = |rows: &[edca_core::sweep::DelayRow]| rows.iter().map(|r| r.mean[ac]).collect::<Vec<_>>();
        for (name, rows, inc) in [("n_stations", &by_n, true), ("packet_bits", &by_packet, true), ("data_rate", &by_rate, false)] {
            let bad = monotone(&col(rows), inc);
            if !bad.is_empty() {
                problems.push(format!("AC{ac} {name} not monotone at {:?}", bad.iter().map(|&i| rows[i].x).collect::<Vec<_>>()));
            }
        }
    }
    let out_of_band: Vec<(f64, f64)> = by_n
        .iter()
        .filter(|r| !(1e-3..=7e-3).contains(&r.mean[0]))
        .map(|r| (r.x, r.mean[0] * 1e3))
        .collect();
    if !out_of_band.is_empty() {
        problems.push(format!("AC0 mean outside [1, 7] ms at (N, ms) {out_of_band:?}"));
    }
    let range = |rows: &[edca_core::sweep::DelayRow]| {
        let first = rows.first().unwrap().mean[0] * 1e3;
        let last = rows.last().unwrap().mean[0] * 1e3;
        format!("{first:.3}->{last:.3} ms")
    };
    verdict(
        5,
        "network parameter trends",
        problems.is_empty(),
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "AC0 mean over N {}, packet {}, rate {}; {}",
            range(&by_n),
            range(&by_packet),
            range(&by_rate),
            if problems.is_empty() { "all trends hold".to_string() } else { problems.join("; ") }
        ),
    );
}

#[test]
fn c06_reliability_contract() {
    let start = Instant::now();
    let ctx = context();
    let a = analyze(&ctx.scenario, &ctx.solver).unwrap();
    let t_tr = a.t_tr;
    let mut problems = Vec::new();
    if a.reliability(t_tr) != [0.0, 0.0] {
        problems.push(format!("R(T_tr) = {:?}", a.reliability(t_tr)));
    }
    if a.reliability(f64::INFINITY) != [1.0, 1.0] || a.reliability(1e3).iter().any(|r| (r - 1.0).abs() > 1e-12) {
        problems.push("R does not reach 1".into());
    }
    let taus: Vec<f64> = (0..=20_000).map(|i| i as f64 * 1e-6).collect();
    let mut prev = [0.0f64; 2];
    for &tau in &taus {
        let r = a.reliability(tau);
        if tau < t_tr && r != [0.0, 0.0] {
            problems.push(format!("R({tau}) = {r:?} below T_tr"));
        }
        if r[0] < prev[0] || r[1] < prev[1] {
            problems.push(format!("R decreases at {tau}"));
        }
        if r[0] < r[1] {
            problems.push(format!("AC0 below AC1 at {tau}"));
        }
        prev = r;
    }
    // The formula applied to arbitrary moments stays a distribution function.
    let m = a.moments[1];
    if reliability(&m, t_tr, t_tr * 0.5) != 0.0 {
        problems.push("non-zero below T_tr for AC1 moments".into());
    }
    problems.truncate(5);
    verdict(
        6,
        "reliability contract",
        problems.is_empty(),
        start.elapsed(),
        Duration::from_secs(1),
        &format!(
            "T_tr = {:.4} ms, R(5 ms) = [{:.4}, {:.4}]; {}",
            t_tr * 1e3,
            a.reliability(5e-3)[0],
            a.reliability(5e-3)[1],
            if problems.is_empty() { "contract holds on 0..20 ms".to_string() } else { problems.join("; ") }
        ),
    );
}

#[test]
fn c07_analysis_matches_simulation() {
    let start = Instant::now();
    let ctx = context();
    let doc = ConfigDocument::default();
    let sim = doc.sim_config().unwrap();
    assert!(sim.runs >= 5 && sim.duration >= 10.0);
    assert_eq!(ctx.scenario.ac[1].arrival.rate, 30.0);
    let ys: Vec<f64> = (2..=10).map(f64::from).collect();
    let mut worst = (0.0f64, String::new());
    let mut failures = 0;
    let mut lines = Vec::new();
    for mapping in [GapMapping::Linear, GapMapping::Logarithmic] {
        for row in ctx.platoon_sweep(&ys, mapping, Some(&sim)) {
            let simulated = row.simulated.expect("simulated columns");
            let mut row_worst = 0.0f64;
            for ac in 0..2 {
                for (what, ana, got) in [
                    ("mean", row.moments[ac].mean, simulated.ac[ac].mean()),
                    ("stddev", row.moments[ac].stddev, simulated.ac[ac].stddev()),
                ] {
                    let rel = ((got - ana) / ana).abs();
                    let rel = if rel.is_nan() { f64::INFINITY } else { rel };
                    row_worst = row_worst.max(rel);
                    if rel > 0.10 {
                        failures += 1;
                    }
                    if rel > worst.0 {
                        worst = (rel, format!("{mapping:?} y*={} AC{ac} {what}: sim {:.4} ms vs {:.4} ms", row.headway, got * 1e3, ana * 1e3));
                    }
                }
            }
            lines.push(format!("{}{}:{:.0}%", if mapping == GapMapping::Linear { "L" } else { "G" }, row.headway, row_worst * 100.0));
        }
    }
    verdict(
        7,
        "analysis vs simulation",
        failures == 0,
        start.elapsed(),
        Duration::from_secs(900),
        &format!(
            "{failures} of 72 comparisons beyond 10%; worst {:.0}% ({}); per point worst error {}",
            worst.0 * 100.0,
            worst.1,
            lines.join(" ")
        ),
    );
}

/// First-follower headway deviation after a small initial perturbation.
fn follower_response(p: &FvdParams, y_star: f64, tau: f64, horizon: f64) -> Vec<f64> {
    let p = p.with_tau(tau);
    let speed = edca_core::platoon::bovf(y_star, &p);
    let lead = move |t: f64| LeadState::cruising(speed, t);
    let mut initial = vec![VehicleState { headway: y_star, rel_velocity: 0.0 }; p.n_vehicles - 1];
    initial[0].headway += 1e-3 * y_star;
    let traj = integrate_platoon(&p, y_star, Dynamics::Nonlinear, &lead, &initial, horizon, default_step(tau)).unwrap();
    traj.headways(0).iter().map(|y| y - y_star).collect()
}

#[test]
fn c08_stability_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let base = FvdParams::default();
    let mut sets = Vec::new();
    while sets.len() < 5 {
        let p = FVD_DEFAULT_RANGES.at(std::array::from_fn(|_| rng.random()), &base);
        let y: f64 = rng.random_range(2.0..10.0);
        let r = critical_delay(&p, y).unwrap();
        if r.tau_c > 0.0 {
            sets.push((p, r));
        }
    }
    let mut pass = true;
    let mut details = Vec::new();
    for (p, r) in &sets {
        let residual = characteristic(r.sigma_root, r.tau_c, p, r.v_prime).abs();
        let decay = 1.0 / (r.d_tilde * (2.0 - std::f64::consts::SQRT_2));
        let horizon = (12.0 * decay).clamp(10.0, 300.0);
        let amp = 1e-3 * r.y_star;
        let low = follower_response(p, r.y_star, 0.5 * r.tau_c, horizon);
        let high = follower_response(p, r.y_star, 1.5 * r.tau_c, horizon);
        let low_changes = count_sign_changes(&low, 1e-6 * amp);
        let high_changes = count_sign_changes(&high, 1e-6 * amp);
        let low_decays = low.last().unwrap().abs() < 0.05 * amp;
        let ok = residual <= 1e-6 && low_changes <= 1 && low_decays && high_changes >= 2;
        pass &= ok;
        details.push(format!(
            "[a={:.2} l={:.2} V0={:.1} ym={:.2} yt={:.2} y*={:.2}: tau_C={:.3} s, residual {residual:.1e}, \
             sign changes {low_changes} at 0.5x (decayed: {low_decays}), {high_changes} at 1.5x]",
            p.a, p.l, p.v0, p.y_m, p.y_tilde, r.y_star, r.tau_c
        ));
    }
    verdict(8, "stability oracle", pass, start.elapsed(), Duration::from_secs(120), &details.join(" "));
}

#[test]
fn c09_reliability_declines_at_long_headways() {
    let start = Instant::now();
    let ctx = context();
    let ys: Vec<f64> = (2..=10).map(f64::from).collect();
    let mut pass = true;
    let mut details = Vec::new();
    for mapping in [GapMapping::Linear, GapMapping::Logarithmic] {
        let rows: Vec<PlatoonRow> = ctx.platoon_sweep(&ys, mapping, None);
        for ac in 0..2 {
            let plateau = rows.iter().filter(|r| r.headway <= 6.0).map(|r| r.reliability[ac]).fold(f64::INFINITY, f64::min);
            let tail: Vec<(f64, f64)> =
                rows.iter().filter(|r| r.headway > 8.0).map(|r| (r.headway, r.reliability[ac])).collect();
            let declined = tail.iter().all(|(_, r)| *r < plateau);
            pass &= declined;
            details.push(format!(
                "{mapping:?} AC{ac}: plateau min {plateau:.4}, y*>8 {:?} -> {}",
                tail.iter().map(|(y, r)| format!("{y}:{r:.4}")).collect::<Vec<_>>(),
                if declined { "below" } else { "not all below" }
            ));
        }
    }
    verdict(9, "reliability trend over headway", pass, start.elapsed(), Duration::from_secs(120), &details.join("; "));
}

fn all_csvs(strategy: Strategy) -> Vec<(String, Vec<u8>)> {
    let ctx = SweepContext { strategy, ..context() };
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let rows = ctx.delay_sweep(SweepAxis::NStations, &axis_values(10.0, 500.0, 50, false).unwrap());
    report::write_delay_sweep(&mut buf, &rows).unwrap();
    out.push(("sweep".into(), std::mem::take(&mut buf)));

    let taus: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5e-3).collect();
    report::write_reliability(&mut buf, &ctx.reliability_curve(&taus).unwrap()).unwrap();
    out.push(("reliability".into(), std::mem::take(&mut buf)));

    let mut sim = SimConfig::new(ctx.scenario.clone().with_stations(40), 1.0, 11, 3);
    let runs = edca_core::sim::run_all(&sim, strategy).unwrap();
    report::write_sim(&mut buf, &runs).unwrap();
    out.push(("simulation".into(), std::mem::take(&mut buf)));

    sim.duration = 0.5;
    sim.warmup = 0.05;
    for mapping in [GapMapping::Linear, GapMapping::Logarithmic] {
        let rows = ctx.platoon_sweep(&[3.0, 6.0, 9.0], mapping, Some(&sim));
        report::write_platoon(&mut buf, &rows, true).unwrap();
        out.push((format!("platoon {mapping:?}"), std::mem::take(&mut buf)));
    }
    out
}

#[test]
fn c10_determinism() {
    let start = Instant::now();
    let first = all_csvs(Strategy::Parallel);
    let second = all_csvs(Strategy::Parallel);
    let sequential = all_csvs(Strategy::Sequential);
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .zip(&sequential)
        .filter(|((a, b), c)| a.1 != b.1 || a.1 != c.1)
        .map(|((a, _), _)| a.0.as_str())
        .collect();
    let bytes: usize = first.iter().map(|(_, b)| b.len()).sum();
    verdict(
        10,
        "determinism",
        differing.is_empty(),
        start.elapsed(),
        Duration::from_secs(60),
        &format!(
            "{} CSVs ({bytes} bytes) compared across two runs and sequential execution; differing: {differing:?}",
            first.len()
        ),
    );
}
