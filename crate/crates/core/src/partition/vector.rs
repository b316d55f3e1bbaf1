use std::collections::BTreeMap;

use super::{components, ZoneLayout, ZoneMap, ZonePolygon};
use crate::geom::{
    canonical_start, point_in_ring, scanline_cmp, signed_area, simplify_ring, Point,
};
use crate::grid::{NetId, Zone};

/// Unit steps along cell edges: +x, +y, -x, -y. With y read as pointing
/// up, the zone is always on the left of an edge, so outer rings come out
/// with positive signed area and `d + 3` is a right turn.
const STEP: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

struct Edge {
    from: usize,
    dir: u8,
    comp: u32,
}

/// Traces every zone component's boundary along cell edges, simplifies the
/// rings (Douglas-Peucker, board tolerance) and collects them as cut paths.
/// Where two cells of one component touch only at a corner the trace turns
/// right, bridging the pinch; every ring then visits each lattice corner at
/// most once and stays simple (a hole may touch its outer ring at a point).
pub fn vectorize(z: &ZoneMap) -> ZoneLayout {
    let board = z.board;
    let cells = &z.cells;
    let (nx, ny) = (cells.nx(), cells.ny());
    let vx = nx + 1;
    let comps = components(cells, |c| c.net());

    let mut edges: Vec<Edge> = Vec::new();
    let mut outgoing: Vec<Vec<u32>> = vec![Vec::new(); vx * (ny + 1)];
    let same = |i: isize, j: isize, net: NetId| cells.get_signed(i, j) == Some(Zone::Net(net));
    for (idx, &c) in cells.cells().iter().enumerate() {
        let Zone::Net(net) = c else { continue };
        let comp = comps.id[idx].unwrap();
        let (i, j) = cells.coords(idx);
        let (si, sj) = (i as isize, j as isize);
        let sides = [
            (!same(si, sj - 1, net), (i, j), 0u8),
            (!same(si + 1, sj, net), (i + 1, j), 1),
            (!same(si, sj + 1, net), (i + 1, j + 1), 2),
            (!same(si - 1, sj, net), (i, j + 1), 3),
        ];
        for (open, (a, b), dir) in sides {
            if open {
                let from = b * vx + a;
                outgoing[from].push(edges.len() as u32);
                edges.push(Edge { from, dir, comp });
            }
        }
    }

    let end_of = |e: &Edge| {
        let (di, dj) = STEP[e.dir as usize];
        let (a, b) = ((e.from % vx) as isize + di, (e.from / vx) as isize + dj);
        b as usize * vx + a as usize
    };
    let mut used = vec![false; edges.len()];
    // Rings per component, as lattice corner lists.
    let mut rings: Vec<Vec<Vec<(usize, usize)>>> = vec![Vec::new(); comps.count];
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let comp = edges[start].comp;
        let mut ring = Vec::new();
        let mut e = start;
        loop {
            used[e] = true;
            let edge = &edges[e];
            let v = end_of(edge);
            let next = [3u8, 0, 1]
                .iter()
                .find_map(|turn| {
                    let want = (edge.dir + turn) % 4;
                    outgoing[v]
                        .iter()
                        .map(|&k| k as usize)
                        .find(|&k| edges[k].comp == comp && edges[k].dir == want)
                })
                .expect("boundary edges always continue");
            if edges[next].dir != edge.dir {
                ring.push((v % vx, v / vx));
            }
            if next == start {
                break;
            }
            e = next;
        }
        rings[comp as usize].push(ring);
    }

    let r = board.resolution;
    let to_mm = |(i, j): (usize, usize)| {
        Point::new(
            (i as f64 * r).clamp(0.0, board.width),
            (j as f64 * r).clamp(0.0, board.height),
        )
    };
    let finish = |ring: &[(usize, usize)]| {
        let pts: Vec<Point> = ring.iter().map(|&v| to_mm(v)).collect();
        let mut s = simplify_ring(&pts, board.simplify_tolerance);
        canonical_start(&mut s);
        s
    };

    let mut comp_net = vec![NetId(0); comps.count];
    for (idx, c) in comps.id.iter().enumerate() {
        if let Some(c) = c {
            comp_net[*c as usize] = cells.at(idx).net().unwrap();
        }
    }
    let mut zones: BTreeMap<NetId, Vec<ZonePolygon>> = BTreeMap::new();
    let mut cut_paths = Vec::new();
    for (comp, comp_rings) in rings.iter().enumerate() {
        let (outers, holes): (Vec<_>, Vec<_>) = comp_rings
            .iter()
            .map(|ring| {
                let raw: Vec<Point> = ring.iter().map(|&v| to_mm(v)).collect();
                (signed_area(&raw) > 0.0, ring)
            })
            .partition(|(outer, _)| *outer);
        let mut polys: Vec<ZonePolygon> = outers
            .iter()
            .map(|(_, ring)| ZonePolygon {
                outer: finish(ring),
                holes: Vec::new(),
            })
            .collect();
        for (_, ring) in holes {
            let hole = finish(ring);
            let target = if polys.len() == 1 {
                0
            } else {
                let a = to_mm(ring[0]);
                let b = to_mm(ring[1]);
                let probe = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
                polys
                    .iter()
                    .position(|p| point_in_ring(probe, &p.outer))
                    .unwrap_or(0)
            };
            polys[target].holes.push(hole);
        }
        for p in &polys {
            cut_paths.push(p.outer.clone());
            cut_paths.extend(p.holes.iter().cloned());
        }
        zones.entry(comp_net[comp]).or_default().extend(polys);
    }
    cut_paths.sort_by(|a, b| {
        scanline_cmp(a[0], b[0]).then_with(|| {
            a.iter()
                .zip(b)
                .map(|(p, q)| scanline_cmp(*p, *q))
                .find(|o| o.is_ne())
                .unwrap_or(a.len().cmp(&b.len()))
        })
    });
    ZoneLayout {
        board,
        zones,
        cut_paths,
    }
}
