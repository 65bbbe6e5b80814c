//! Battery-aware rotation: lifetime histograms with and without the battery
//! weight when the hard limit is enforced.

use parked_rsu::config::RunConfig;
use parked_rsu::sim::{run, RevocationCause};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for w_bat in [0.0, 0.5] {
        let mut cfg = RunConfig::default();
        cfg.decision.w_bat = w_bat;
        cfg.decision.enforce_tau_max = true;
        cfg.sim.duration_s = 8 * 3600;
        let out = run(&cfg)?;
        let mut bins = [0u32; 6];
        for r in &out.lifetimes {
            bins[((r.lifetime_s() / 600.0) as usize).min(5)] += 1;
        }
        let forced = out
            .lifetimes
            .iter()
            .filter(|r| r.cause == RevocationCause::ForcedTauMax)
            .count();
        println!(
            "w_bat {w_bat}: {forced} forced of {} lifetimes",
            out.lifetimes.len()
        );
        for (i, n) in bins.iter().enumerate() {
            let label = if i == 5 {
                "50+ min".to_string()
            } else {
                format!("{}-{} min", i * 10, i * 10 + 10)
            };
            println!("  {label:>9} {n}");
        }
    }
    Ok(())
}
