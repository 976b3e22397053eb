//! CSV output. Times are written in milliseconds (distributions in
//! microseconds) with six significant digits.

use std::io::Write;

use crate::delay::DiscreteTimeDistribution;
use crate::platoon::StabilityResult;
use crate::sim::SimStats;
use crate::sweep::{Analysis, DelayRow, PlatoonRow};
use crate::Result;

/// Formats `x` with `digits` significant digits, in plain notation unless
/// the magnitude is very small or very large.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if !(-5..15).contains(&exp) {
        return sci;
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let rounded: f64 = sci.parse().unwrap();
    format!("{:.*}", decimals, rounded)
}

fn ms(seconds: f64) -> String {
    sig(seconds * 1e3, 6)
}

fn s6(x: f64) -> String {
    sig(x, 6)
}

/// Columns `x, mean_ac0_ms, mean_ac1_ms, std_ac0_ms, std_ac1_ms`.
pub fn write_delay_sweep<W: Write>(out: W, rows: &[DelayRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "mean_ac0_ms", "mean_ac1_ms", "std_ac0_ms", "std_ac1_ms"])?;
    for r in rows {
        w.write_record([s6(r.x), ms(r.mean[0]), ms(r.mean[1]), ms(r.stddev[0]), ms(r.stddev[1])])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `tau_ms, reliability_ac0, reliability_ac1`.
pub fn write_reliability<W: Write>(out: W, rows: &[(f64, [f64; 2])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tau_ms", "reliability_ac0", "reliability_ac1"])?;
    for (tau, r) in rows {
        w.write_record([ms(*tau), s6(r[0]), s6(r[1])])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain `key = value` report of a converged analysis, with the reliability
/// of both categories at each `tau` (seconds).
pub fn write_analysis<W: Write>(mut out: W, a: &Analysis, taus: &[f64]) -> Result<()> {
    let s = &a.solution;
    writeln!(out, "iterations = {}", s.iterations)?;
    writeln!(out, "residual = {}", sig(s.residual, 6))?;
    writeln!(out, "p_ex = {}", s6(s.p_ext_single))?;
    writeln!(out, "p_o = {}", s6(s.p_ext))?;
    writeln!(out, "p_c1 = {}", s6(s.p_coll_ac1))?;
    writeln!(out, "t_tr_ms = {}", ms(a.t_tr))?;
    for ac in 0..2 {
        writeln!(out, "\n[ac{ac}]")?;
        writeln!(out, "omega = {}", s6(s.omega[ac]))?;
        writeln!(out, "beta = {}", s6(s.beta[ac]))?;
        writeln!(out, "p_busy = {}", s6(s.p_busy[ac]))?;
        writeln!(out, "p_internal = {}", s6(s.p_internal[ac]))?;
        writeln!(out, "rho = {}", s6(s.rho[ac]))?;
        writeln!(out, "p_arrival = {}", s6(s.p_arrival[ac]))?;
        writeln!(out, "service_time_ms = {}", ms(s.service_time[ac]))?;
        writeln!(out, "mean_ms = {}", ms(a.moments[ac].mean))?;
        writeln!(out, "stddev_ms = {}", ms(a.moments[ac].stddev))?;
    }
    if !taus.is_empty() {
        writeln!(out, "\n[reliability]")?;
        for &t in taus {
            let r = a.reliability(t);
            writeln!(out, "tau_ms = {}  ac0 = {}  ac1 = {}", ms(t), s6(r[0]), s6(r[1]))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Critical-delay table over headways.
pub fn write_stability<W: Write>(out: W, rows: &[StabilityResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "headway_m",
        "speed_mps",
        "v_prime",
        "d_tilde",
        "sigma_root",
        "tau_c_ms",
        "tau_cr_ms",
        "p_accept",
        "lambda0_pps",
    ])?;
    for r in rows {
        w.write_record([
            s6(r.y_star),
            s6(r.speed),
            s6(r.v_prime),
            s6(r.d_tilde),
            s6(r.sigma_root),
            ms(r.tau_c),
            ms(r.tau_cr),
            s6(r.p_accept),
            s6(r.lambda0),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `time_us, probability`.
pub fn write_distribution<W: Write>(out: W, d: &DiscreteTimeDistribution) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_us", "probability"])?;
    for (t, p) in d.iter() {
        if p != 0.0 {
            w.write_record([s6(t * 1e6), sig(p, 12)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn sim_record(run: &str, ac: usize, s: &SimStats) -> [String; 8] {
    let a = &s.ac[ac];
    [
        run.to_string(),
        format!("ac{ac}"),
        a.n_samples().to_string(),
        ms(a.mean()),
        ms(a.stddev()),
        a.internal_collisions.to_string(),
        a.external_collisions.to_string(),
        a.drops.to_string(),
    ]
}

/// One row per run and category, followed by the pooled rows (`run = all`).
pub fn write_sim<W: Write>(out: W, runs: &[SimStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run",
        "ac",
        "n_samples",
        "mean_ms",
        "stddev_ms",
        "internal_collisions",
        "external_collisions",
        "drops",
    ])?;
    for (i, s) in runs.iter().enumerate() {
        for ac in 0..2 {
            w.write_record(sim_record(&i.to_string(), ac, s))?;
        }
    }
    let pooled = SimStats::pooled(runs);
    for ac in 0..2 {
        w.write_record(sim_record("all", ac, &pooled))?;
    }
    w.flush()?;
    Ok(())
}

/// Headway sweep table; simulator columns are appended when `with_sim`.
pub fn write_platoon<W: Write>(out: W, rows: &[PlatoonRow], with_sim: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "headway_m",
        "p_accept",
        "lambda0_pps",
        "tau_c_ms",
        "tau_cr_ms",
        "mean_delay_ac0_ms",
        "mean_delay_ac1_ms",
        "stddev_ac0_ms",
        "stddev_ac1_ms",
        "reliability_ac0",
        "reliability_ac1",
    ];
    if with_sim {
        header.extend(["sim_mean_ac0_ms", "sim_mean_ac1_ms", "sim_stddev_ac0_ms", "sim_stddev_ac1_ms"]);
    }
    w.write_record(&header)?;
    for r in rows {
        let st = &r.stability;
        let mut rec = vec![
            s6(r.headway),
            s6(st.p_accept),
            s6(st.lambda0),
            ms(st.tau_c),
            ms(st.tau_cr),
            ms(r.moments[0].mean),
            ms(r.moments[1].mean),
            ms(r.moments[0].stddev),
            ms(r.moments[1].stddev),
            s6(r.reliability[0]),
            s6(r.reliability[1]),
        ];
        if with_sim {
            match &r.simulated {
                Some(s) => rec.extend([
                    ms(s.ac[0].mean()),
                    ms(s.ac[1].mean()),
                    ms(s.ac[0].stddev()),
                    ms(s.ac[1].stddev()),
                ]),
                None => rec.extend(std::iter::repeat_n("NaN".to_string(), 4)),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
