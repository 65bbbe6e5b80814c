//! Builds the default Manhattan city, draws it and writes the grid file.

use parked_rsu::config::GridConfig;
use parked_rsu::grid::Cell;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridConfig::default().build()?;
    println!(
        "{}x{} cells of {} m, {} usable ({:.1}%), {} border entries",
        grid.width(),
        grid.height(),
        grid.cell_size_m(),
        grid.usable_count(),
        100.0 * grid.usable_fraction(),
        grid.border_usable_cells().len()
    );
    for y in 0..grid.height() as i32 {
        let row: String = (0..grid.width() as i32)
            .map(|x| {
                if grid.is_usable(Cell::new(x, y)) {
                    '.'
                } else {
                    '#'
                }
            })
            .collect();
        println!("{row}");
    }
    let path = std::env::temp_dir().join("city_grid.csv");
    grid.write_text(std::fs::File::create(&path)?)?;
    println!("grid file: {}", path.display());
    Ok(())
}
