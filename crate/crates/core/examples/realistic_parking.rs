//! A full day driven by the hourly parking profile.

use parked_rsu::config::RunConfig;
use parked_rsu::sim::run;
use parked_rsu::traffic::ParkingMode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.traffic.mode = ParkingMode::DayProfile;
    cfg.sim.duration_s = 86_400;
    cfg.sim.discard_s = 0.0;
    let out = run(&cfg)?;
    println!("hour  rsus  coverage");
    for hour in 0..24 {
        let slice: Vec<_> = out.metrics.iter().filter(|m| m.t / 3600 == hour).collect();
        let n = slice.len() as f64;
        let rsus = slice.iter().map(|m| m.active_rsus as f64).sum::<f64>() / n;
        let cov = slice.iter().map(|m| m.coverage_pct).sum::<f64>() / n;
        println!("{hour:4} {rsus:5.1} {cov:9.3}");
    }
    println!(
        "{} parkings, {} RSU assignments",
        out.parking_events, out.assignments
    );
    Ok(())
}
