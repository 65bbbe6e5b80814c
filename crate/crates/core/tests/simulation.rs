use parked_rsu::config::RunConfig;
use parked_rsu::sim::{run, MeanSd, RevocationCause, Simulation};
use parked_rsu::traffic::ParkingMode;

/// Expected parked count at `t` when arrivals at rate `lambda` drive for an
/// exponential time with mean `m1`, then stay an exponential time with mean `m2`.
fn tandem_mean(lambda: f64, m1: f64, m2: f64, t: f64) -> f64 {
    let (a, b) = (1.0 / m1, 1.0 / m2);
    lambda * a / (a - b) * ((1.0 - (-b * t).exp()) / b - (1.0 - (-a * t).exp()) / a)
}

#[test]
fn parked_population_follows_infinite_server_queue() {
    let cfg = RunConfig::default();
    let mut sim = Simulation::new(&cfg).unwrap();
    let mut counts = Vec::new();
    while sim.tick() < cfg.sim.duration_s {
        sim.step().unwrap();
        if sim.tick() % 600 == 0 {
            counts.push((sim.tick(), sim.parked_count() as f64));
        }
    }
    let tr = &cfg.traffic;
    let (t, n) = *counts.last().unwrap();
    let transient = tandem_mean(
        tr.arrival_rate_vps,
        tr.mean_moving_s,
        tr.mean_parking_s,
        t as f64,
    );
    assert!(
        (n - transient).abs() < 0.05 * transient,
        "{n} vs {transient}"
    );
    let steady = tr.arrival_rate_vps * tr.mean_parking_s;
    assert!((n - steady).abs() < 0.15 * steady, "{n} vs {steady}");
    for (t, n) in counts {
        let m = tandem_mean(
            tr.arrival_rate_vps,
            tr.mean_moving_s,
            tr.mean_parking_s,
            t as f64,
        );
        assert!((n - m).abs() < 4.0 * m.sqrt() + 5.0, "t={t}: {n} vs {m}");
    }
}

#[test]
fn coverage_settles_in_the_last_half_hour() {
    let out = run(&RunConfig::default()).unwrap();
    let tail: Vec<f64> = out
        .metrics
        .iter()
        .filter(|m| m.t >= 5400)
        .map(|m| m.coverage_pct)
        .collect();
    assert_eq!(tail.len(), 1800);
    assert!(MeanSd::of(tail).sd < 0.02);
}

#[test]
fn forced_revocations_pile_up_at_tau_max() {
    let mut cfg = RunConfig::default();
    cfg.decision.enforce_tau_max = true;
    cfg.sim.duration_s = 28_800;
    let out = run(&cfg).unwrap();
    let forced: Vec<f64> = out
        .lifetimes
        .iter()
        .filter(|r| r.cause == RevocationCause::ForcedTauMax)
        .map(|r| r.lifetime_s())
        .collect();
    assert!(!forced.is_empty());
    assert!(forced.iter().all(|l| *l == 3600.0));
    // 60 s histogram bins over the hour: the last bin is the tallest of the
    // second half hour
    let mut bins = [0u32; 60];
    for r in &out.lifetimes {
        let b = ((r.lifetime_s() / 60.0).ceil() as usize).clamp(1, 60) - 1;
        bins[b] += 1;
    }
    let last = bins[59];
    println!(
        "forced {} of {}, bins 50..60 {:?}",
        forced.len(),
        out.lifetimes.len(),
        &bins[50..]
    );
    assert!(bins[30..59].iter().all(|b| *b < last));
}

#[test]
fn day_profile_parks_the_daily_total() {
    let mut cfg = RunConfig::default();
    cfg.traffic.mode = ParkingMode::DayProfile;
    cfg.sim.duration_s = 86_400;
    cfg.sim.discard_s = 0.0;
    let out = run(&cfg).unwrap();
    let want = cfg.traffic.daily_total as f64;
    assert!((out.parking_events as f64 - want).abs() <= 0.01 * want);
}

#[test]
fn zero_arrivals_leave_the_city_empty() {
    let mut cfg = RunConfig::default();
    cfg.traffic.arrival_rate_vps = 0.0;
    cfg.sim.duration_s = 300;
    let out = run(&cfg).unwrap();
    assert_eq!(out.metrics.len(), 300);
    assert!(out
        .metrics
        .iter()
        .all(|m| m.active_rsus == 0 && m.coverage_pct == 0.0 && m.mean_signal == 0.0));
    assert!(out.lifetimes.is_empty() && out.commands.is_empty());
}
