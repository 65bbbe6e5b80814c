//! Steps the default city for two hours and shows the RSU network forming.

use parked_rsu::config::RunConfig;
use parked_rsu::sim::{steady_state_stats, Simulation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::default();
    let mut sim = Simulation::new(&cfg)?;
    println!("   t  moving  parked  rsus  coverage  signal  saturation");
    while sim.tick() < cfg.sim.duration_s {
        let m = sim.step()?;
        if m.t % 600 == 0 {
            println!(
                "{:5} {:7} {:7} {:5} {:9.3} {:7.3} {:11.3}",
                m.t,
                sim.moving_count(),
                sim.parked_count(),
                m.active_rsus,
                m.coverage_pct,
                m.mean_signal,
                m.mean_saturation
            );
        }
    }
    let out = sim.into_output();
    let s = steady_state_stats(&out.metrics, cfg.sim.discard_s)?;
    println!(
        "steady: {:.1} RSUs, coverage {:.3}, {} decisions, {} commands",
        s.active_rsus.mean,
        s.coverage_pct.mean,
        out.decisions,
        out.commands.len()
    );
    Ok(())
}
