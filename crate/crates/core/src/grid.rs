//! Cells, actions and dense 2-D grids shared by every module.

use std::fmt;

/// A grid cell; `x` is the column, `y` the row (row 0 is the top).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Neighbor in direction `a`, if it lies inside a `width x height` grid.
    pub fn step(self, a: Action, width: usize, height: usize) -> Option<Cell> {
        let (dx, dy) = a.offset();
        let x = self.x.checked_add_signed(dx)?;
        let y = self.y.checked_add_signed(dy)?;
        (x < width && y < height).then_some(Cell { x, y })
    }

    pub fn chebyshev(self, other: Cell) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// The eight moves, indexed 0..8 in the fixed order N, NE, E, SE, S, SW, W, NW.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    North,
    NorthEast,
    East,
    SouthEast,
    South,
    SouthWest,
    West,
    NorthWest,
}

impl Action {
    pub const COUNT: usize = 8;

    pub const ALL: [Action; 8] = [
        Action::North,
        Action::NorthEast,
        Action::East,
        Action::SouthEast,
        Action::South,
        Action::SouthWest,
        Action::West,
        Action::NorthWest,
    ];

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Displacement `(dx, dy)`; north decreases `y`.
    pub fn offset(self) -> (isize, isize) {
        match self {
            Action::North => (0, -1),
            Action::NorthEast => (1, -1),
            Action::East => (1, 0),
            Action::SouthEast => (1, 1),
            Action::South => (0, 1),
            Action::SouthWest => (-1, 1),
            Action::West => (-1, 0),
            Action::NorthWest => (-1, -1),
        }
    }

    pub fn is_diagonal(self) -> bool {
        let (dx, dy) = self.offset();
        dx != 0 && dy != 0
    }

    /// Euclidean length of the move.
    pub fn cost(self) -> f64 {
        if self.is_diagonal() {
            std::f64::consts::SQRT_2
        } else {
            1.0
        }
    }

    pub fn short_name(self) -> &'static str {
        ["N", "NE", "E", "SE", "S", "SW", "W", "NW"][self.index()]
    }

    pub fn from_short_name(s: &str) -> Option<Action> {
        Self::ALL.into_iter().find(|a| a.short_name() == s)
    }

    pub fn arrow(self) -> char {
        ['↑', '↗', '→', '↘', '↓', '↙', '←', '↖'][self.index()]
    }
}

/// Offsets `(dy, dx)` of the eight neighbors in action order followed by the
/// cell itself, in the row/column convention of [`crate::tensor::Tape::shift_stack`].
pub const NEIGHBORHOOD: [(isize, isize); 9] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (0, 0),
];

/// Row-major dense grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    cells: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            cells: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, cells: Vec<T>) -> Option<Self> {
        (cells.len() == width * height).then_some(Self {
            width,
            height,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.cells
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.cells
    }

    pub fn into_vec(self) -> Vec<T> {
        self.cells
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }

    pub fn neighbor(&self, c: Cell, a: Action) -> Option<Cell> {
        c.step(a, self.width, self.height)
    }
}

impl<T> std::ops::Index<Cell> for Grid<T> {
    type Output = T;

    fn index(&self, c: Cell) -> &T {
        &self.cells[c.y * self.width + c.x]
    }
}

impl<T> std::ops::IndexMut<Cell> for Grid<T> {
    fn index_mut(&mut self, c: Cell) -> &mut T {
        &mut self.cells[c.y * self.width + c.x]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn actions_biject_onto_neighbors() {
        let mut seen = std::collections::HashSet::new();
        for a in Action::ALL {
            assert_eq!(Action::from_index(a.index()), Some(a));
            assert!(seen.insert(a.offset()));
            assert_ne!(a.offset(), (0, 0));
            let (dx, dy) = a.offset();
            assert_eq!(NEIGHBORHOOD[a.index()], (dy, dx));
        }
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn step_stays_inside() {
        assert_eq!(Cell::new(0, 0).step(Action::North, 3, 3), None);
        assert_eq!(Cell::new(0, 0).step(Action::SouthEast, 3, 3), Some(Cell::new(1, 1)));
        assert_eq!(Cell::new(2, 1).step(Action::East, 3, 3), None);
    }
}
