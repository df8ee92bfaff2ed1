use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EnvError;

const NEIGHBOURS: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, 1), (0, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Safe,
    Unsafe,
    Target,
    Initial,
}

impl Cell {
    fn from_char(c: char) -> Option<Cell> {
        match c {
            '.' => Some(Cell::Safe),
            'U' => Some(Cell::Unsafe),
            'T' => Some(Cell::Target),
            'S' => Some(Cell::Initial),
            _ => None,
        }
    }

    fn to_char(self) -> char {
        match self {
            Cell::Safe => '.',
            Cell::Unsafe => 'U',
            Cell::Target => 'T',
            Cell::Initial => 'S',
        }
    }
}

/// Rectangular grid of labelled cells. Coordinates are `(x, y)` with
/// `(0, 0)` at the bottom-left; in map files the first line is the top row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    width: usize,
    height: usize,
    /// Row-major from the bottom row up.
    cells: Vec<Cell>,
    start: (usize, usize),
}

impl GridLayout {
    /// Builds a layout from rows listed top to bottom.
    pub fn from_rows(rows: &[Vec<Cell>]) -> Result<Self, EnvError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 || height == 0 {
            return Err(EnvError::Layout {
                line: 0,
                msg: "layout is empty".into(),
            });
        }
        let mut cells = Vec::with_capacity(width * height);
        for (i, row) in rows.iter().enumerate().rev() {
            if row.len() != width {
                return Err(EnvError::Layout {
                    line: i + 1,
                    msg: format!("row has {} cells, expected {width}", row.len()),
                });
            }
            cells.extend_from_slice(row);
        }
        let starts: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == Cell::Initial).collect();
        if starts.len() != 1 {
            return Err(EnvError::Layout {
                line: 0,
                msg: format!("expected exactly one initial cell `S`, found {}", starts.len()),
            });
        }
        if !cells.contains(&Cell::Target) {
            return Err(EnvError::Layout {
                line: 0,
                msg: "no target cell `T`".into(),
            });
        }
        let layout = Self {
            width,
            height,
            start: (starts[0] % width, starts[0] / width),
            cells,
        };
        if !layout.target_reachable() {
            return Err(EnvError::Layout {
                line: 0,
                msg: "no safe path from the initial cell to a target".into(),
            });
        }
        Ok(layout)
    }

    /// The shipped bridge task: 20x20, an unsafe band on rows 9-10 crossed by
    /// a safe bridge on columns 9-10, start at (0,0), target at (19,19).
    pub fn bridge() -> Self {
        let mut rows = vec![vec![Cell::Safe; 20]; 20];
        for y in [9, 10] {
            for (x, cell) in rows[19 - y].iter_mut().enumerate() {
                if x != 9 && x != 10 {
                    *cell = Cell::Unsafe;
                }
            }
        }
        rows[19][0] = Cell::Initial;
        rows[0][19] = Cell::Target;
        Self::from_rows(&rows).expect("bridge layout is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> (usize, usize) {
        self.start
    }

    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.width + x]
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Cells carrying `label`, ordered by row then column from the bottom-left.
    pub fn cells_with(&self, label: Cell) -> Vec<(usize, usize)> {
        (0..self.cells.len())
            .filter(|&i| self.cells[i] == label)
            .map(|i| (i % self.width, i / self.width))
            .collect()
    }

    /// True for non-unsafe cells with an unsafe von Neumann neighbour.
    pub fn is_adjacent_to_unsafe(&self, x: usize, y: usize) -> bool {
        self.cell(x, y) != Cell::Unsafe
            && NEIGHBOURS.iter().any(|&(dx, dy)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                self.in_bounds(nx, ny) && self.cell(nx as usize, ny as usize) == Cell::Unsafe
            })
    }

    fn target_reachable(&self) -> bool {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([self.start]);
        seen[self.start.1 * self.width + self.start.0] = true;
        while let Some((x, y)) = queue.pop_front() {
            if self.cell(x, y) == Cell::Target {
                return true;
            }
            for (dx, dy) in NEIGHBOURS {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if !self.in_bounds(nx, ny) {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                let i = ny * self.width + nx;
                if !seen[i] && self.cells[i] != Cell::Unsafe {
                    seen[i] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
        false
    }
}

impl FromStr for GridLayout {
    type Err = EnvError;

    /// Parses a map: one line per row, top row first, using `.` safe,
    /// `U` unsafe, `T` target and `S` initial. Blank lines are ignored.
    fn from_str(text: &str) -> Result<Self, EnvError> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let row = line
                .chars()
                .enumerate()
                .map(|(col, c)| {
                    Cell::from_char(c).ok_or_else(|| EnvError::Layout {
                        line: i + 1,
                        msg: format!("unknown cell `{c}` at column {}", col + 1),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

impl fmt::Display for GridLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in (0..self.height).rev() {
            let line: String = (0..self.width).map(|x| self.cell(x, y).to_char()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}
