//! Sweeps the saturation weight and prints pooled steady-state metrics.

use parked_rsu::cli::sweep_runs;
use parked_rsu::config::RunConfig;
use parked_rsu::sim::SteadyState;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut base = RunConfig::default();
    base.decision.w_cov = 0.0;
    let values: Vec<String> = ["0.05", "0.1", "0.2", "0.3", "0.4"]
        .map(String::from)
        .into();
    let runs = sweep_runs(&base, "w_sat", &values, 2, 0)?;
    println!("w_sat   rsus  coverage  saturation  area/rsu");
    for v in &values {
        let group: Vec<SteadyState> = runs
            .iter()
            .filter(|r| &r.value == v)
            .map(|r| r.steady)
            .collect();
        let s = SteadyState::pooled(&group);
        println!(
            "{v:>5} {:6.1} {:9.3} {:11.3} {:9.0}",
            s.active_rsus.mean, s.coverage_pct.mean, s.mean_saturation.mean, s.area_per_rsu_m2.mean
        );
    }
    Ok(())
}
