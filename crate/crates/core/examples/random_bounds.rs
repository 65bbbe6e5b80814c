//! Random RSU assignments bound the signal/saturation plane; the decision
//! run is then placed against that envelope.

use parked_rsu::bounds::{overlay_points, random_assignment_bounds, Envelope};
use parked_rsu::config::RunConfig;
use parked_rsu::sim::run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::default();
    let bounds = random_assignment_bounds(&cfg, 20_000, cfg.sim.seed)?;
    let env = Envelope::from_samples(&bounds.samples, cfg.bounds.bin_width);
    println!("signal bin  min sat  max sat");
    for (bin, (lo, hi)) in &env.bins {
        println!(
            "{:10.1} {:8.3} {:8.3}",
            *bin as f64 * cfg.bounds.bin_width,
            lo,
            hi
        );
    }
    let out = run(&cfg)?;
    let points = overlay_points(&out.metrics, cfg.sim.discard_s);
    let mut heights: Vec<f64> = points
        .iter()
        .filter_map(|&(_, sig, sat)| env.relative_height(sig, sat))
        .collect();
    heights.sort_by(f64::total_cmp);
    if let Some(m) = heights.get(heights.len() / 2) {
        println!(
            "{} decision samples, median height in envelope {m:.3}",
            points.len()
        );
    }
    Ok(())
}
