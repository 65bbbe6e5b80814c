//! Geodesic cell decomposition of the simulated urban area.
//!
//! Cells are squares of `cell_size_m` meters identified by integer indices, so
//! cell identity never depends on floating point comparisons. A [`CityGrid`]
//! is a rectangular window of cells, each of which is a road (usable), a
//! building (obstruction) or open ground that is neither.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Meters per cell edge: one latitude GPS-second.
pub const DEFAULT_CELL_SIZE_M: f64 = 30.9;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("position ({x:.3}, {y:.3}) m lies outside the {width}x{height} grid")]
    OutOfBounds {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("cell {0} lies outside the grid")]
    CellOutOfBounds(Cell),
    #[error("invalid city configuration: {0}")]
    Config(String),
    #[error("city file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Integer cell coordinates. `x` runs along longitude, `y` along latitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Planar position in meters, measured from the grid's lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Road,
    Building,
    Open,
}

/// The four axis directions vehicles travel in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    East,
    North,
    West,
    South,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::East,
        Direction::North,
        Direction::West,
        Direction::South,
    ];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::East => (1, 0),
            Direction::North => (0, 1),
            Direction::West => (-1, 0),
            Direction::South => (0, -1),
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::East => Direction::West,
            Direction::North => Direction::South,
            Direction::West => Direction::East,
            Direction::South => Direction::North,
        }
    }

    pub fn step(self, cell: Cell) -> Cell {
        let (dx, dy) = self.delta();
        Cell::new(cell.x + dx, cell.y + dy)
    }
}

/// Rectangular city map. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CityGrid {
    width: u32,
    height: u32,
    origin: Cell,
    cell_size_m: f64,
    kinds: Vec<CellKind>,
    usable_count: usize,
}

impl CityGrid {
    /// Builds a grid from a row-major kind table (`y` major, `x` minor).
    pub fn from_kinds(
        width: u32,
        height: u32,
        origin: Cell,
        cell_size_m: f64,
        kinds: Vec<CellKind>,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::Config("grid must have at least one cell".into()));
        }
        if !(cell_size_m.is_finite() && cell_size_m > 0.0) {
            return Err(GridError::Config(format!(
                "cell size must be positive, got {cell_size_m}"
            )));
        }
        if kinds.len() != width as usize * height as usize {
            return Err(GridError::Config(format!(
                "expected {} cell kinds, got {}",
                width as usize * height as usize,
                kinds.len()
            )));
        }
        let usable_count = kinds.iter().filter(|k| **k == CellKind::Road).count();
        if usable_count == 0 {
            return Err(GridError::Config("grid has no usable cells".into()));
        }
        Ok(CityGrid {
            width,
            height,
            origin,
            cell_size_m,
            kinds,
            usable_count,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn origin(&self) -> Cell {
        self.origin
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn cell_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn usable_count(&self) -> usize {
        self.usable_count
    }

    pub fn usable_fraction(&self) -> f64 {
        self.usable_count as f64 / self.cell_count() as f64
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.index(cell).is_some()
    }

    /// Dense row-major index of a cell, if it lies inside the grid.
    pub fn index(&self, cell: Cell) -> Option<usize> {
        let dx = i64::from(cell.x) - i64::from(self.origin.x);
        let dy = i64::from(cell.y) - i64::from(self.origin.y);
        if dx < 0 || dy < 0 || dx >= i64::from(self.width) || dy >= i64::from(self.height) {
            return None;
        }
        Some(dy as usize * self.width as usize + dx as usize)
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        let w = self.width as usize;
        Cell::new(
            self.origin.x + (index % w) as i32,
            self.origin.y + (index / w) as i32,
        )
    }

    pub fn kind(&self, cell: Cell) -> Option<CellKind> {
        self.index(cell).map(|i| self.kinds[i])
    }

    pub fn is_usable(&self, cell: Cell) -> bool {
        self.kind(cell) == Some(CellKind::Road)
    }

    pub fn is_obstruction(&self, cell: Cell) -> bool {
        self.kind(cell) == Some(CellKind::Building)
    }

    pub fn is_usable_index(&self, index: usize) -> bool {
        self.kinds[index] == CellKind::Road
    }

    pub fn is_obstruction_index(&self, index: usize) -> bool {
        self.kinds[index] == CellKind::Building
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.kinds.len()).map(move |i| self.cell_at(i))
    }

    pub fn usable_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == CellKind::Road)
            .map(move |(i, _)| self.cell_at(i))
    }

    /// Usable cells on the outer edge of the grid, in row-major order.
    pub fn border_usable_cells(&self) -> Vec<Cell> {
        let (x0, y0) = (self.origin.x, self.origin.y);
        let (x1, y1) = (x0 + self.width as i32 - 1, y0 + self.height as i32 - 1);
        self.usable_cells()
            .filter(|c| c.x == x0 || c.x == x1 || c.y == y0 || c.y == y1)
            .collect()
    }

    /// Directions leading from `cell` into an adjacent usable cell.
    pub fn open_directions(&self, cell: Cell) -> impl Iterator<Item = Direction> + '_ {
        Direction::ALL
            .into_iter()
            .filter(move |d| self.is_usable(d.step(cell)))
    }

    /// Cell whose half-open square contains `position`.
    pub fn cell_of(&self, position: Point) -> Result<Cell, GridError> {
        let out = || GridError::OutOfBounds {
            x: position.x,
            y: position.y,
            width: self.width,
            height: self.height,
        };
        if !(position.x.is_finite() && position.y.is_finite()) {
            return Err(out());
        }
        let kx = (position.x / self.cell_size_m).floor();
        let ky = (position.y / self.cell_size_m).floor();
        if kx < 0.0 || ky < 0.0 || kx >= f64::from(self.width) || ky >= f64::from(self.height) {
            return Err(out());
        }
        Ok(Cell::new(
            self.origin.x + kx as i32,
            self.origin.y + ky as i32,
        ))
    }

    /// Center of a cell in grid meters.
    pub fn center_of(&self, cell: Cell) -> Point {
        Point::new(
            (f64::from(cell.x - self.origin.x) + 0.5) * self.cell_size_m,
            (f64::from(cell.y - self.origin.y) + 0.5) * self.cell_size_m,
        )
    }

    /// Euclidean distance between two cell centers in meters.
    pub fn center_distance(&self, a: Cell, b: Cell) -> f64 {
        let dx = f64::from(a.x - b.x);
        let dy = f64::from(a.y - b.y);
        dx.hypot(dy) * self.cell_size_m
    }

    /// Writes the `x,y,flag` city format. Open cells are omitted.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<(), GridError> {
        for (i, kind) in self.kinds.iter().enumerate() {
            let flag = match kind {
                CellKind::Road => "road",
                CellKind::Building => "building",
                CellKind::Open => continue,
            };
            let c = self.cell_at(i);
            writeln!(out, "{},{},{}", c.x, c.y, flag)?;
        }
        Ok(())
    }

    /// Reads the `x,y,flag` city format. The grid spans the bounding box of
    /// the listed cells; unlisted cells inside it are open ground.
    pub fn read_text<R: BufRead>(input: R, cell_size_m: f64) -> Result<Self, GridError> {
        let mut entries = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line_no = n + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |msg: &str| GridError::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(parse_err("expected `x,y,flag`"));
            }
            let x: i32 = fields[0].parse().map_err(|_| parse_err("bad x index"))?;
            let y: i32 = fields[1].parse().map_err(|_| parse_err("bad y index"))?;
            let kind = match fields[2] {
                "road" => CellKind::Road,
                "building" => CellKind::Building,
                other => return Err(parse_err(&format!("unknown flag `{other}`"))),
            };
            entries.push((line_no, Cell::new(x, y), kind));
        }
        if entries.is_empty() {
            return Err(GridError::Config("city file lists no cells".into()));
        }
        let min_x = entries.iter().map(|e| e.1.x).min().unwrap();
        let min_y = entries.iter().map(|e| e.1.y).min().unwrap();
        let max_x = entries.iter().map(|e| e.1.x).max().unwrap();
        let max_y = entries.iter().map(|e| e.1.y).max().unwrap();
        let width = (i64::from(max_x) - i64::from(min_x) + 1) as u32;
        let height = (i64::from(max_y) - i64::from(min_y) + 1) as u32;
        let mut kinds = vec![CellKind::Open; width as usize * height as usize];
        let mut seen = vec![false; kinds.len()];
        for (line, cell, kind) in entries {
            let i = (cell.y - min_y) as usize * width as usize + (cell.x - min_x) as usize;
            if seen[i] {
                return Err(GridError::Parse {
                    line,
                    msg: format!("cell {cell} listed twice"),
                });
            }
            seen[i] = true;
            kinds[i] = kind;
        }
        CityGrid::from_kinds(width, height, Cell::new(min_x, min_y), cell_size_m, kinds)
    }
}

/// Manhattan layout parameters, all in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManhattanLayout {
    pub blocks_x: u32,
    pub blocks_y: u32,
    pub road_width_cells: u32,
    pub block_size_cells: u32,
}

impl Default for ManhattanLayout {
    /// 33x33 cells (about 1 km²) with single-cell roads around 3x3 blocks.
    fn default() -> Self {
        ManhattanLayout {
            blocks_x: 8,
            blocks_y: 8,
            road_width_cells: 1,
            block_size_cells: 3,
        }
    }
}

/// Orthogonal road corridors (including the perimeter) separating square
/// building blocks. The grid origin is `(0, 0)`.
pub fn build_manhattan_city(
    blocks_x: u32,
    blocks_y: u32,
    road_width_cells: u32,
    block_size_cells: u32,
) -> Result<CityGrid, GridError> {
    build_manhattan_city_sized(
        ManhattanLayout {
            blocks_x,
            blocks_y,
            road_width_cells,
            block_size_cells,
        },
        DEFAULT_CELL_SIZE_M,
    )
}

pub fn build_manhattan_city_sized(
    layout: ManhattanLayout,
    cell_size_m: f64,
) -> Result<CityGrid, GridError> {
    let ManhattanLayout {
        blocks_x,
        blocks_y,
        road_width_cells: road,
        block_size_cells: block,
    } = layout;
    if blocks_x == 0 || blocks_y == 0 || road == 0 || block == 0 {
        return Err(GridError::Config(format!(
            "manhattan parameters must all be >= 1, got {layout:?}"
        )));
    }
    let period = road + block;
    let width = blocks_x * period + road;
    let height = blocks_y * period + road;
    let is_road = |k: u32| k % period < road;
    let mut kinds = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        for x in 0..width {
            kinds.push(if is_road(x) || is_road(y) {
                CellKind::Road
            } else {
                CellKind::Building
            });
        }
    }
    CityGrid::from_kinds(width, height, Cell::new(0, 0), cell_size_m, kinds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_of_examples() {
        let grid = build_manhattan_city(2, 2, 1, 3).unwrap();
        assert_eq!(grid.cell_of(Point::new(0.0, 0.0)).unwrap(), Cell::new(0, 0));
        assert_eq!(
            grid.cell_of(Point::new(30.9, 0.0)).unwrap(),
            Cell::new(1, 0)
        );
        assert_eq!(
            grid.cell_of(Point::new(61.7, 45.0)).unwrap(),
            Cell::new(1, 1)
        );
    }

    #[test]
    fn cell_of_rejects_outside() {
        let grid = build_manhattan_city(1, 1, 1, 3).unwrap();
        assert!(grid.cell_of(Point::new(-0.1, 0.0)).is_err());
        assert!(grid.cell_of(Point::new(5.0 * 30.9, 1.0)).is_err());
        assert!(grid.cell_of(Point::new(f64::NAN, 1.0)).is_err());
    }

    #[test]
    fn single_block_layout() {
        let grid = build_manhattan_city(1, 1, 1, 3).unwrap();
        assert_eq!((grid.width(), grid.height()), (5, 5));
        assert_eq!(grid.usable_count(), 16);
        let obstruction = grid.cells().filter(|c| grid.is_obstruction(*c)).count();
        assert_eq!(obstruction, 9);
        // the perimeter is road, the inner 3x3 is building
        for c in grid.cells() {
            let perimeter = c.x == 0 || c.y == 0 || c.x == 4 || c.y == 4;
            assert_eq!(grid.is_usable(c), perimeter, "{c}");
        }
    }

    #[test]
    fn two_by_two_layout_counts() {
        let grid = build_manhattan_city(2, 2, 1, 3).unwrap();
        // area formula: 9x9 minus four 3x3 blocks
        let by_formula = 9 * 9 - 4 * 3 * 3;
        let by_count = grid.cells().filter(|c| grid.is_usable(*c)).count();
        assert_eq!(by_count, by_formula);
        assert_eq!(grid.usable_count(), 45);
    }

    #[test]
    fn zero_parameters_rejected() {
        assert!(build_manhattan_city(0, 1, 1, 3).is_err());
        assert!(build_manhattan_city(1, 1, 0, 3).is_err());
        assert!(build_manhattan_city(1, 1, 1, 0).is_err());
    }

    #[test]
    fn default_layout_usable_fraction() {
        let grid =
            build_manhattan_city_sized(ManhattanLayout::default(), DEFAULT_CELL_SIZE_M).unwrap();
        assert_eq!((grid.width(), grid.height()), (33, 33));
        let f = grid.usable_fraction();
        assert!((0.40..=0.70).contains(&f), "usable fraction {f}");
    }

    #[test]
    fn negative_origin_cells() {
        let kinds = vec![CellKind::Road, CellKind::Building];
        let grid = CityGrid::from_kinds(2, 1, Cell::new(-31121, 146326), 30.9, kinds).unwrap();
        assert!(grid.is_usable(Cell::new(-31121, 146326)));
        assert!(grid.is_obstruction(Cell::new(-31120, 146326)));
        assert_eq!(
            grid.cell_of(Point::new(40.0, 3.0)).unwrap(),
            Cell::new(-31120, 146326)
        );
    }

    #[test]
    fn text_round_trip() {
        let grid = build_manhattan_city(2, 3, 1, 2).unwrap();
        let mut buf = Vec::new();
        grid.write_text(&mut buf).unwrap();
        let back = CityGrid::read_text(&buf[..], grid.cell_size_m()).unwrap();
        assert_eq!(back, grid);
    }

    #[test]
    fn text_errors_name_line() {
        let err = CityGrid::read_text(&b"0,0,road\n1,0,lake\n"[..], 30.9).unwrap_err();
        assert!(matches!(err, GridError::Parse { line: 2, .. }), "{err}");
        let err = CityGrid::read_text(&b"0,0,building\n"[..], 30.9).unwrap_err();
        assert!(matches!(err, GridError::Config(_)));
    }

    #[test]
    fn center_requantizes_to_same_cell() {
        let grid = build_manhattan_city(3, 2, 2, 4).unwrap();
        for c in grid.cells() {
            assert_eq!(grid.cell_of(grid.center_of(c)).unwrap(), c);
        }
    }
}
