//! One decision maker weighing its neighbours: every constrained solution,
//! its attributes and score, then the winning role commands.

use parked_rsu::decision::{
    attributes, decide, enumerate_solutions, score, CandidatePool, ScoringWeights,
};
use parked_rsu::grid::Cell;
use parked_rsu::maps::CoverageMap;
use parked_rsu::radio::SignalStrength;
use parked_rsu::EntityId;

fn strip(owner: u32, from: i32, to: i32, s: u8) -> CoverageMap {
    CoverageMap::from_cells(
        EntityId(owner),
        (from..to).map(|x| (Cell::new(x, 0), SignalStrength::new(s).unwrap())),
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // two RSUs overlap the newcomer heavily, a third sits further along
    let pool = CandidatePool::new(EntityId(0), strip(0, 0, 8, 4))
        .with_neighbor(EntityId(1), strip(1, 0, 6, 3), 0.9)
        .with_neighbor(EntityId(2), strip(2, 2, 9, 3), 0.4)
        .with_neighbor(EntityId(3), strip(3, 7, 14, 4), 1.0)
        .with_second_hop(strip(9, 12, 18, 5));
    let weights = ScoringWeights::new(1.0, 0.2, 0.3, 0.5);

    for sol in enumerate_solutions(&pool) {
        let a = attributes(&sol, &pool)?;
        println!(
            "revoke {:<14} sig {:.3} sat {:.3} cov {:.3} bat {:.3} score {:.4}",
            format!("{:?}", sol.revoked.iter().map(|e| e.0).collect::<Vec<_>>()),
            a.a_sig,
            a.a_sat,
            a.a_cov,
            a.a_bat,
            score(&a, &weights)?
        );
    }
    let d = decide(&pool, &weights)?;
    println!(
        "winner keeps {:?}",
        d.chosen.active.iter().map(|e| e.0).collect::<Vec<_>>()
    );
    for c in &d.commands {
        println!("{} {}", c.verb, c.target.0);
    }
    Ok(())
}
