//! Learns a receiver's coverage map from a noisy beacon survey and compares
//! it with the deterministic truth.

use parked_rsu::grid::{build_manhattan_city, Cell};
use parked_rsu::maps::{MapBuilder, DEFAULT_MIN_SAMPLES};
use parked_rsu::radio::PropagationConfig;
use parked_rsu::survey::{generate_survey, SurveyConfig};
use parked_rsu::EntityId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = build_manhattan_city(4, 4, 1, 3)?;
    let survey = generate_survey(
        &grid,
        &PropagationConfig::default(),
        &SurveyConfig::new(Cell::new(8, 8)),
        3,
    )?;
    let mut builder = MapBuilder::new();
    for r in &survey.records {
        builder.record_beacon(r.cell, r.rssi);
    }
    let (map, stats) = builder.finalize(EntityId(0), DEFAULT_MIN_SAMPLES);
    println!(
        "{} beacons over {} cells",
        survey.records.len(),
        stats.len()
    );

    let mut rows = [[0u32; 6]; 6];
    for s in &stats {
        rows[survey.truth.get(s.cell).value() as usize][map.get(s.cell).value() as usize] += 1;
    }
    println!("truth \\ learned  0     1     2     3     4     5");
    for (t, row) in rows.iter().enumerate() {
        let cols: Vec<String> = row.iter().map(|n| format!("{n:5}")).collect();
        println!("{t:15} {}", cols.join(" "));
    }
    let bimodal = stats.iter().filter(|s| s.bimodal).count();
    println!("{bimodal} cells look bimodal");
    Ok(())
}
