use std::collections::BTreeMap;

use super::{PartitionError, SeedGrid};
use crate::board::Board;
use crate::footprint::PadInstance;
use crate::geom::{point_in_ring, point_segment_distance, Point, Rect};
use crate::grid::{cell_center, NetId, Seed};
use crate::netmodel::{TraceGeometry, TraceLayer};

/// Lenient pad rasterization: conflicts are recorded instead of failing.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedClaim {
    pub seeds: SeedGrid,
    /// Cells covered by each pad, parallel to the input slice.
    pub pad_cells: Vec<Vec<usize>>,
    /// `(cell, pad a, pad b)` where two pads of different nets meet.
    pub conflicts: Vec<(usize, usize, usize)>,
}

/// Cell indices whose centers satisfy `inside`, scanning only the cells
/// overlapping `bounds`.
fn cells_in(board: &Board, bounds: Rect, mut inside: impl FnMut(Point) -> bool) -> Vec<usize> {
    let r = board.resolution;
    let (nx, ny) = (board.nx(), board.ny());
    let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n);
    let i0 = clamp((bounds.x0 / r).floor() - 1.0, nx);
    let i1 = clamp((bounds.x1 / r).ceil() + 1.0, nx);
    let j0 = clamp((bounds.y0 / r).floor() - 1.0, ny);
    let j1 = clamp((bounds.y1 / r).ceil() + 1.0, ny);
    let mut out = Vec::new();
    for j in j0..j1 {
        for i in i0..i1 {
            if inside(cell_center(i, j, r)) {
                out.push(j * nx + i);
            }
        }
    }
    out
}

fn pad_cells(pad: &PadInstance, board: &Board) -> Vec<usize> {
    let shape = pad.board_shape();
    cells_in(board, pad.bounds(), |p| {
        shape.contains(p.x - pad.center.x, p.y - pad.center.y)
    })
}

fn pad_name(pad: &PadInstance) -> String {
    format!("{}.{}", pad.part_id, pad.pin)
}

/// Stamps every pad onto a fresh grid. Pads without a net become keepout;
/// a net pad wins over keepout, two different nets on one cell is an error.
pub fn rasterize_pads(pads: &[PadInstance], board: &Board) -> Result<SeedGrid, PartitionError> {
    let claim = rasterize_pads_lenient(pads, board);
    match claim.conflicts.first() {
        None => Ok(claim.seeds),
        Some(&(idx, a, b)) => {
            let (i, j) = claim.seeds.cells.coords(idx);
            let c = cell_center(i, j, board.resolution);
            Err(PartitionError::SeedConflict {
                x: c.x,
                y: c.y,
                first: pad_name(&pads[a]),
                second: pad_name(&pads[b]),
            })
        }
    }
}

pub fn rasterize_pads_lenient(pads: &[PadInstance], board: &Board) -> SeedClaim {
    let mut seeds = SeedGrid::empty(board);
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pad_cells_out = Vec::with_capacity(pads.len());
    let mut conflicts = Vec::new();
    for (k, pad) in pads.iter().enumerate() {
        let cells = pad_cells(pad, board);
        for &idx in &cells {
            match (seeds.cells.at(idx), pad.net_id) {
                (Seed::Net(existing), Some(net)) if existing != net => {
                    conflicts.push((idx, owner[&idx], k));
                }
                (Seed::Net(_), _) => {}
                (_, Some(net)) => {
                    seeds.cells.set_at(idx, Seed::Net(net));
                    owner.insert(idx, k);
                }
                (_, None) => seeds.cells.set_at(idx, Seed::Keepout),
            }
        }
        pad_cells_out.push(cells);
    }
    conflicts.sort();
    SeedClaim {
        seeds,
        pad_cells: pad_cells_out,
        conflicts,
    }
}

/// Net ids for a trace layer, in order of first appearance.
pub fn trace_net_index(layer: &TraceLayer) -> BTreeMap<String, NetId> {
    layer
        .nets
        .iter()
        .enumerate()
        .map(|(i, n)| (n.name.clone(), NetId(i as u32)))
        .collect()
}

/// Whether segment `a..b` touches the closed box.
fn segment_hits_box(a: Point, b: Point, bx: Rect) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (p, q) in [
        (-dx, a.x - bx.x0),
        (dx, bx.x1 - a.x),
        (-dy, a.y - bx.y0),
        (dy, bx.y1 - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

fn geometry_cells(geom: &TraceGeometry, board: &Board) -> Vec<usize> {
    let r = board.resolution;
    let nx = board.nx();
    match geom {
        TraceGeometry::Stroke { points, width } => {
            let half = width / 2.0;
            let mut out = Vec::new();
            if points.len() == 1 {
                let p = points[0];
                let bounds = Rect::centered(p.x, p.y, *width, *width);
                out = cells_in(board, bounds, |c| c.dist(p) <= half + 1e-9);
                let (i, j) = ((p.x / r).floor(), (p.y / r).floor());
                if i >= 0.0 && j >= 0.0 && (i as usize) < nx && (j as usize) < board.ny() {
                    out.push(j as usize * nx + i as usize);
                }
            }
            for seg in points.windows(2) {
                let (a, b) = (seg[0], seg[1]);
                let bounds = Rect::new(a.x, a.y, b.x, b.y).expand(half);
                out.extend(cells_in(board, bounds, |c| {
                    point_segment_distance(c, a, b) <= half + 1e-9
                        || segment_hits_box(a, b, Rect::centered(c.x, c.y, r, r))
                }));
            }
            out.sort_unstable();
            out.dedup();
            out
        }
        TraceGeometry::Fill { ring } => {
            let Some(first) = ring.first() else {
                return Vec::new();
            };
            let bounds = ring
                .iter()
                .fold(Rect::new(first.x, first.y, first.x, first.y), |b, p| {
                    Rect::new(b.x0.min(p.x), b.y0.min(p.y), b.x1.max(p.x), b.y1.max(p.y))
                });
            let mut out = cells_in(board, bounds, |c| point_in_ring(c, ring));
            if out.is_empty() {
                let (i, j) = ((first.x / r).floor(), (first.y / r).floor());
                if i >= 0.0 && j >= 0.0 && (i as usize) < nx && (j as usize) < board.ny() {
                    out.push(j as usize * nx + i as usize);
                }
            }
            out
        }
    }
}

/// Rasterizes a trace layer: strokes claim every cell within half their
/// width plus every cell they pass through (so hairline traces stay
/// 4-connected), fills claim the cells whose centers they contain.
/// Geometry in the margin band is clipped away.
pub fn rasterize_traces(
    layer: &TraceLayer,
    board: &Board,
    net_index: &BTreeMap<String, NetId>,
) -> Result<SeedGrid, PartitionError> {
    let mut seeds = SeedGrid::empty(board);
    let r = board.resolution;
    let usable = |idx: usize, seeds: &SeedGrid| {
        let (i, j) = seeds.cells.coords(idx);
        !board.in_margin(cell_center(i, j, r))
    };
    for geom in &layer.unassigned {
        for idx in geometry_cells(geom, board) {
            if usable(idx, &seeds) {
                seeds.cells.set_at(idx, Seed::Keepout);
            }
        }
    }
    let mut owner: BTreeMap<usize, &str> = BTreeMap::new();
    for net in &layer.nets {
        let id = *net_index
            .get(&net.name)
            .ok_or_else(|| PartitionError::UnknownNetName(net.name.clone()))?;
        for geom in &net.geometry {
            for idx in geometry_cells(geom, board) {
                if !usable(idx, &seeds) {
                    continue;
                }
                match seeds.cells.at(idx) {
                    Seed::Net(existing) if existing != id => {
                        let (i, j) = seeds.cells.coords(idx);
                        let c = cell_center(i, j, r);
                        return Err(PartitionError::SeedConflict {
                            x: c.x,
                            y: c.y,
                            first: format!("net {}", owner[&idx]),
                            second: format!("net {}", net.name),
                        });
                    }
                    _ => {
                        seeds.cells.set_at(idx, Seed::Net(id));
                        owner.insert(idx, &net.name);
                    }
                }
            }
        }
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::footprint::PadShape;
    use crate::netmodel::TraceNet;
    use crate::placement::Rotation;

    fn board(w: f64, h: f64, r: f64) -> Board {
        Board {
            width: w,
            height: h,
            resolution: r,
            margin: 0.0,
            gap: 2.0 * r,
            min_feature: 2.0 * r,
            ..Board::default()
        }
    }

    fn pad(part: &str, net: Option<u32>, x: f64, y: f64, w: f64, h: f64) -> PadInstance {
        PadInstance {
            part_id: part.into(),
            pin: 1,
            net_id: net.map(NetId),
            center: Point::new(x, y),
            shape: PadShape::Rect { w, h },
            rotation: Rotation::R0,
        }
    }

    #[test]
    fn square_pad_covers_four_cells() {
        let b = board(10.0, 10.0, 1.0);
        let s = rasterize_pads(&[pad("P", Some(0), 5.0, 5.0, 2.0, 2.0)], &b).unwrap();
        assert_eq!(s.cells_of(NetId(0)), vec![44, 45, 54, 55]);
    }

    #[test]
    fn no_pads_all_empty() {
        let b = board(10.0, 10.0, 1.0);
        let s = rasterize_pads(&[], &b).unwrap();
        assert!(s.cells.cells().iter().all(|&c| c == Seed::Empty));
    }

    #[test]
    fn coincident_pads_conflict() {
        let b = board(10.0, 10.0, 1.0);
        let err = rasterize_pads(
            &[
                pad("A", Some(0), 5.0, 5.0, 2.0, 2.0),
                pad("B", Some(1), 5.0, 5.0, 2.0, 2.0),
            ],
            &b,
        )
        .unwrap_err();
        match err {
            PartitionError::SeedConflict { first, second, .. } => {
                assert_eq!((first.as_str(), second.as_str()), ("A.1", "B.1"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn same_net_pads_merge_and_keepout_yields() {
        let b = board(10.0, 10.0, 1.0);
        let s = rasterize_pads(
            &[
                pad("K", None, 5.0, 5.0, 2.0, 2.0),
                pad("A", Some(0), 5.0, 5.0, 2.0, 2.0),
                pad("B", Some(0), 6.0, 5.0, 2.0, 2.0),
            ],
            &b,
        )
        .unwrap();
        assert_eq!(s.cells_of(NetId(0)).len(), 6);
        assert!(s.cells.cells().iter().all(|&c| c != Seed::Keepout));
    }

    fn layer(nets: Vec<(&str, Vec<TraceGeometry>)>) -> TraceLayer {
        TraceLayer {
            nets: nets
                .into_iter()
                .map(|(name, geometry)| TraceNet {
                    name: name.into(),
                    geometry,
                })
                .collect(),
            ..TraceLayer::default()
        }
    }

    #[test]
    fn straight_trace_band_is_two_cells() {
        let b = board(10.0, 10.0, 0.5);
        let l = layer(vec![(
            "A",
            vec![TraceGeometry::Stroke {
                points: vec![Point::new(2.0, 5.0), Point::new(8.0, 5.0)],
                width: 1.0,
            }],
        )]);
        let s = rasterize_traces(&l, &b, &trace_net_index(&l)).unwrap();
        let cells = s.cells_of(NetId(0));
        // Column at x = 5.25 holds exactly rows 9 and 10.
        let column: Vec<usize> = cells
            .iter()
            .map(|&i| s.cells.coords(i))
            .filter(|&(i, _)| i == 10)
            .map(|(_, j)| j)
            .collect();
        assert_eq!(column, vec![9, 10]);
        for idx in cells {
            let (i, j) = s.cells.coords(idx);
            let c = cell_center(i, j, 0.5);
            assert!(
                point_segment_distance(c, Point::new(2.0, 5.0), Point::new(8.0, 5.0)) <= 0.5 + 1e-9
            );
        }
    }

    #[test]
    fn empty_layer_all_empty() {
        let b = board(10.0, 10.0, 0.5);
        let l = TraceLayer::default();
        let s = rasterize_traces(&l, &b, &trace_net_index(&l)).unwrap();
        assert!(s.nets().is_empty());
    }

    #[test]
    fn crossing_traces_conflict() {
        let b = board(10.0, 10.0, 0.5);
        let stroke = |a: (f64, f64), z: (f64, f64)| TraceGeometry::Stroke {
            points: vec![Point::new(a.0, a.1), Point::new(z.0, z.1)],
            width: 0.5,
        };
        let l = layer(vec![
            ("A", vec![stroke((1.0, 5.0), (9.0, 5.0))]),
            ("B", vec![stroke((5.0, 1.0), (5.0, 9.0))]),
        ]);
        let err = rasterize_traces(&l, &b, &trace_net_index(&l)).unwrap_err();
        match err {
            PartitionError::SeedConflict { x, y, .. } => {
                assert!((x - 5.0).abs() <= 0.5 && (y - 5.0).abs() <= 0.5);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn hairline_diagonal_stays_four_connected() {
        let b = board(10.0, 10.0, 0.5);
        let l = layer(vec![(
            "A",
            vec![TraceGeometry::Stroke {
                points: vec![Point::new(1.1, 1.3), Point::new(8.7, 7.9)],
                width: 0.01,
            }],
        )]);
        let s = rasterize_traces(&l, &b, &trace_net_index(&l)).unwrap();
        let labels = s.cells.map(|c| c == Seed::Net(NetId(0)));
        let comps = super::super::components(&labels, |&v| v.then_some(()));
        assert_eq!(comps.count, 1);
    }

    #[test]
    fn unknown_net_name() {
        let b = board(10.0, 10.0, 0.5);
        let l = layer(vec![("A", vec![])]);
        assert_eq!(
            rasterize_traces(&l, &b, &BTreeMap::new()),
            Err(PartitionError::UnknownNetName("A".into()))
        );
    }
}
