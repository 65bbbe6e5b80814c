//! Strength classes heard around one transmitter, with and without a
//! longer radio range.

use parked_rsu::grid::{build_manhattan_city, Cell, CityGrid};
use parked_rsu::radio::{strength, PropagationConfig};

fn draw(
    grid: &CityGrid,
    tx: Cell,
    cfg: &PropagationConfig,
) -> Result<(), Box<dyn std::error::Error>> {
    for y in 0..grid.height() as i32 {
        let row: String = (0..grid.width() as i32)
            .map(|x| {
                let c = Cell::new(x, y);
                if c == tx {
                    return Ok('T');
                }
                if grid.is_obstruction(c) {
                    return Ok('#');
                }
                let s = strength(tx, c, grid, cfg)?.value();
                Ok(if s == 0 { '.' } else { char::from(b'0' + s) })
            })
            .collect::<Result<_, parked_rsu::radio::RadioError>>()?;
        println!("{row}");
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = build_manhattan_city(5, 5, 1, 3)?;
    let tx = Cell::new(8, 8);
    let base = PropagationConfig::default();
    println!("range x1, band edges {:?} m", base.effective_edges());
    draw(&grid, tx, &base)?;
    let wide = PropagationConfig {
        range_multiplier: 2.0,
        ..base
    };
    println!("\nrange x2");
    draw(&grid, tx, &wide)?;
    Ok(())
}
