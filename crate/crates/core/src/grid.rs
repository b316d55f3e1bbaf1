//! Raster grids over the board. Cell `(i, j)` covers
//! `[i*r, (i+1)*r) x [j*r, (j+1)*r)`; rows run along x, row-major storage.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geom::Point;

/// Dense net identifier, `nets[i].id == i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetId(pub u32);

impl fmt::Display for NetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Seed raster cell before partitioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Seed {
    Empty,
    Keepout,
    Net(NetId),
}

/// Zone raster cell after partitioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Zone {
    Net(NetId),
    Gap,
    Outside,
}

impl Zone {
    pub fn net(self) -> Option<NetId> {
        match self {
            Zone::Net(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid<T> {
    nx: usize,
    ny: usize,
    cells: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(nx: usize, ny: usize, fill: T) -> Self {
        Self {
            nx,
            ny,
            cells: vec![fill; nx * ny],
        }
    }

    pub fn from_cells(nx: usize, ny: usize, cells: Vec<T>) -> Self {
        assert_eq!(cells.len(), nx * ny, "cell count does not match {nx}x{ny}");
        Self { nx, ny, cells }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.cells[j * self.nx + i]
    }

    /// Signed lookup; `None` off-grid.
    pub fn get_signed(&self, i: isize, j: isize) -> Option<T> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            None
        } else {
            Some(self.cells[j as usize * self.nx + i as usize])
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let idx = j * self.nx + i;
        self.cells[idx] = v;
    }

    pub fn at(&self, idx: usize) -> T {
        self.cells[idx]
    }

    pub fn set_at(&mut self, idx: usize, v: T) {
        self.cells[idx] = v;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            nx: self.nx,
            ny: self.ny,
            cells: self.cells.iter().map(|&c| f(c)).collect(),
        }
    }

    /// 4-neighbours of a flat index, in the fixed order left, right, up, down.
    pub fn neighbors4(&self, idx: usize) -> impl Iterator<Item = usize> {
        let (i, j) = self.coords(idx);
        let (nx, ny) = (self.nx, self.ny);
        [
            (i > 0).then(|| idx - 1),
            (i + 1 < nx).then(|| idx + 1),
            (j > 0).then(|| idx - nx),
            (j + 1 < ny).then(|| idx + nx),
        ]
        .into_iter()
        .flatten()
    }
}

pub fn cell_center(i: usize, j: usize, r: f64) -> Point {
    Point::new((i as f64 + 0.5) * r, (j as f64 + 0.5) * r)
}

/// Integer offsets whose center distance is within `radius` mm
/// (`<= radius` when `inclusive`, `< radius` otherwise), origin included.
pub fn disk_offsets(radius: f64, r: f64, inclusive: bool) -> Vec<(isize, isize)> {
    let rr = radius / r;
    if rr < 0.0 {
        return Vec::new();
    }
    let limit = rr * rr;
    let reach = rr.ceil() as isize;
    let mut out = Vec::new();
    for dj in -reach..=reach {
        for di in -reach..=reach {
            let d2 = (di * di + dj * dj) as f64;
            let hit = if inclusive {
                d2 <= limit + 1e-9
            } else {
                d2 < limit - 1e-9
            };
            if hit {
                out.push((di, dj));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_sizes() {
        assert_eq!(disk_offsets(0.0, 1.0, true).len(), 1);
        assert_eq!(disk_offsets(1.0, 1.0, true).len(), 5);
        assert_eq!(disk_offsets(1.0, 1.0, false).len(), 1);
        assert_eq!(disk_offsets(0.5, 0.2, true).len(), 21);
    }

    #[test]
    fn neighbors_at_corner() {
        let g = Grid::new(3, 2, 0u8);
        let n: Vec<_> = g.neighbors4(0).collect();
        assert_eq!(n, vec![1, 3]);
        let n: Vec<_> = g.neighbors4(4).collect();
        assert_eq!(n, vec![3, 5, 1]);
    }
}
