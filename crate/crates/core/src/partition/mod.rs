//! Seeds in, zones out: rasterize pads or traces, grow every net into its
//! geodesic share of the board, carve isolation channels, drop slivers that
//! cannot be weeded, and trace the result back into polygons.

mod carve;
mod connect;
mod dump;
mod geodesic;
mod raster;
mod vector;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::board::Board;
use crate::geom::Point;
use crate::grid::{cell_center, Grid, NetId, Seed, Zone};

pub use carve::{carve_gaps, drop_islands, enforce_min_feature, opening_residue};
pub use connect::{
    check_seed_connectivity, check_zone_connectivity, components, trace_partition_mismatches,
    Components,
};
pub use dump::{
    read_seed_dump, read_zone_dump, write_seed_dump, write_zone_dump, DumpError, MAX_DUMP_NET,
};
pub use geodesic::geodesic_partition;
pub use raster::{
    rasterize_pads, rasterize_pads_lenient, rasterize_traces, trace_net_index, SeedClaim,
};
pub use vector::vectorize;

/// Rasterized pads or traces, one cell per `resolution` square.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedGrid {
    pub board: Board,
    pub cells: Grid<Seed>,
}

impl SeedGrid {
    pub fn empty(board: &Board) -> Self {
        Self {
            board: *board,
            cells: Grid::new(board.nx(), board.ny(), Seed::Empty),
        }
    }

    pub fn nx(&self) -> usize {
        self.cells.nx()
    }

    pub fn ny(&self) -> usize {
        self.cells.ny()
    }

    /// Flat indices of every seed cell of `net`, in scanline order.
    pub fn cells_of(&self, net: NetId) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&idx| self.cells.at(idx) == Seed::Net(net))
            .collect()
    }

    pub fn nets(&self) -> Vec<NetId> {
        let mut nets: Vec<NetId> = self
            .cells
            .cells()
            .iter()
            .filter_map(|c| match c {
                Seed::Net(n) => Some(*n),
                _ => None,
            })
            .collect();
        nets.sort();
        nets.dedup();
        nets
    }
}

/// Per-cell zone labels for the whole board.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneMap {
    pub board: Board,
    pub cells: Grid<Zone>,
}

impl ZoneMap {
    pub fn nx(&self) -> usize {
        self.cells.nx()
    }

    pub fn ny(&self) -> usize {
        self.cells.ny()
    }

    pub fn center(&self, idx: usize) -> Point {
        let (i, j) = self.cells.coords(idx);
        cell_center(i, j, self.board.resolution)
    }

    pub fn nets(&self) -> Vec<NetId> {
        let mut nets: Vec<NetId> = self.cells.cells().iter().filter_map(|z| z.net()).collect();
        nets.sort();
        nets.dedup();
        nets
    }
}

/// One connected zone: outer ring with positive signed area, holes negative.
/// Rings are implicitly closed (the first vertex is not repeated).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZonePolygon {
    pub outer: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
}

impl ZonePolygon {
    pub fn contains(&self, p: Point) -> bool {
        crate::geom::point_in_ring(p, &self.outer)
            && !self.holes.iter().any(|h| crate::geom::point_in_ring(p, h))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneLayout {
    pub board: Board,
    pub zones: BTreeMap<NetId, Vec<ZonePolygon>>,
    /// Every zone boundary once, as closed rings, ordered by first vertex.
    pub cut_paths: Vec<Vec<Point>>,
}

impl ZoneLayout {
    pub fn empty(board: &Board) -> Self {
        Self {
            board: *board,
            zones: BTreeMap::new(),
            cut_paths: Vec::new(),
        }
    }

    /// Net label at `p`, by point-in-polygon over the vector zones.
    pub fn net_at(&self, p: Point) -> Option<NetId> {
        self.zones
            .iter()
            .find(|(_, polys)| polys.iter().any(|poly| poly.contains(p)))
            .map(|(&net, _)| net)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PartitionError {
    #[error("seed conflict at ({x:.3}, {y:.3}): {first} and {second} claim the same cell")]
    SeedConflict {
        x: f64,
        y: f64,
        first: String,
        second: String,
    },
    #[error("trace net `{0}` has no id")]
    UnknownNetName(String),
    #[error("no seed cells: nothing to partition")]
    NoSeeds,
    #[error(
        "nets {} and {} are {distance:.3} mm apart near ({x:.3}, {y:.3}), closer than the {required:.3} mm gap",
        nets.0, nets.1
    )]
    PadClearanceViolation {
        nets: (NetId, NetId),
        x: f64,
        y: f64,
        distance: f64,
        required: f64,
    },
    #[error(
        "net {net} would lose pad contact when features narrower than {min_feature} mm are removed"
    )]
    FeatureTooThin { net: NetId, min_feature: f64 },
}
