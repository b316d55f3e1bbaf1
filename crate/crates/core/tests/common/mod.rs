//! Fixtures and brute-force oracles shared by the integration tests. The
//! oracles deliberately avoid the library's own geometry and graph helpers.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zonecut_core::board::Board;
use zonecut_core::footprint::FootprintLibrary;
use zonecut_core::geom::Point;
use zonecut_core::grid::{Grid, NetId, Seed, Zone};
use zonecut_core::netmodel::{parse_netlist_xml, Netlist, TraceGeometry, TraceLayer, TraceNet};
use zonecut_core::partition::{SeedGrid, ZoneLayout, ZoneMap};
use zonecut_core::pipeline::{compile_netlist, compile_traces, Compiled};
use zonecut_core::placement::{auto_place, load_placement, PlacementSet};

pub const RGB_XML: &str = include_str!("../../fixtures/rgb_led.xml");
pub const RGB_PLACE: &str = include_str!("../../fixtures/rgb_led.place");
pub const CHAIN4_XML: &str = include_str!("../../fixtures/chain4.xml");
pub const TWO_TRACES_SVG: &str = include_str!("../../fixtures/two_traces.svg");

pub fn rgb() -> (Netlist, PlacementSet) {
    let n = parse_netlist_xml(RGB_XML).unwrap();
    let p = load_placement(RGB_PLACE, &n).unwrap();
    (n, p)
}

pub fn chain4() -> Netlist {
    parse_netlist_xml(CHAIN4_XML).unwrap()
}

pub fn rgb_compiled() -> Compiled {
    let (n, p) = rgb();
    compile_netlist(
        &n,
        &FootprintLibrary::builtin(),
        &Board::default(),
        &p,
        false,
    )
    .unwrap()
}

pub fn trace_board() -> Board {
    Board {
        width: 30.0,
        height: 24.0,
        margin: 1.0,
        resolution: 0.25,
        gap: 1.0,
        min_feature: 1.0,
        simplify_tolerance: 0.1,
    }
}

fn seg_dist(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.x - a.x - t * dx).hypot(p.y - a.y - t * dy)
}

fn sample_polyline(points: &[Point], step: f64) -> Vec<Point> {
    let mut out = vec![points[0]];
    for w in points.windows(2) {
        let n = ((w[0].dist(w[1]) / step).ceil() as usize).max(1);
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push(Point::new(
                w[0].x + t * (w[1].x - w[0].x),
                w[0].y + t * (w[1].y - w[0].y),
            ));
        }
    }
    out
}

fn polyline_dist(a: &[Point], b: &[Point]) -> f64 {
    sample_polyline(a, 0.05)
        .into_iter()
        .map(|p| {
            if b.len() == 1 {
                p.dist(b[0])
            } else {
                b.windows(2)
                    .map(|w| seg_dist(p, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random stroked traces, one connected polyline per net, with different
/// nets kept a safe distance apart so the layout is always convertible.
pub fn random_trace_layer(seed: u64, board: &Board) -> TraceLayer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nets = rng.random_range(2..=5);
    let lo = board.margin + 1.5;
    let (hx, hy) = (board.width - lo, board.height - lo);
    let mut placed: Vec<(Vec<Point>, f64)> = Vec::new();
    let mut layer = TraceLayer::default();
    for k in 0..nets {
        for _attempt in 0..200 {
            let n_pts = rng.random_range(2..=4);
            let mut pts = vec![Point::new(
                rng.random_range(lo..hx),
                rng.random_range(lo..hy),
            )];
            for _ in 1..n_pts {
                let last = *pts.last().unwrap();
                let p = if rng.random_bool(0.5) {
                    Point::new(rng.random_range(lo..hx), last.y)
                } else {
                    Point::new(last.x, rng.random_range(lo..hy))
                };
                pts.push(p);
            }
            let width: f64 = [1.5, 2.0, 2.5][rng.random_range(0..3)];
            let clear = placed.iter().all(|(other, w)| {
                polyline_dist(&pts, other) >= (width + w) / 2.0 + board.gap + 1.0
            });
            if clear {
                placed.push((pts.clone(), width));
                layer.nets.push(TraceNet {
                    name: format!("N{k}"),
                    geometry: vec![TraceGeometry::Stroke { points: pts, width }],
                });
                break;
            }
        }
    }
    layer.size = Some((board.width, board.height));
    layer
}

pub fn small_trace_board() -> Board {
    Board {
        width: 14.0,
        height: 12.0,
        ..trace_board()
    }
}

pub fn trace_compiled(seed: u64, board: &Board) -> Compiled {
    compile_traces(&random_trace_layer(seed, board), board).unwrap()
}

pub fn chain4_compiled(seed: u64) -> Compiled {
    let n = chain4();
    let lib = FootprintLibrary::builtin();
    let p = auto_place(&n, &lib, &Board::default(), seed).unwrap();
    compile_netlist(&n, &lib, &Board::default(), &p, false).unwrap()
}

/// Every pipeline result the corpus-wide criteria are judged on.
pub fn corpus() -> Vec<(String, Compiled)> {
    let mut out = vec![("rgb_led".to_string(), rgb_compiled())];
    out.push(("chain4".into(), chain4_compiled(1)));
    let layer = zonecut_core::netmodel::parse_trace_layer(TWO_TRACES_SVG, "data-net").unwrap();
    let board = Board {
        width: 40.0,
        height: 30.0,
        ..Board::default()
    };
    out.push(("two_traces".into(), compile_traces(&layer, &board).unwrap()));
    for seed in 0..12 {
        out.push((
            format!("traces#{seed}"),
            trace_compiled(seed, &trace_board()),
        ));
        out.push((
            format!("small#{seed}"),
            trace_compiled(seed, &small_trace_board()),
        ));
    }
    out
}

/// Random seed grid: up to 64x64 cells, up to 5 nets as small blobs, and
/// random keepout cells and walls.
pub fn random_seed_grid(seed: u64) -> SeedGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = rng.random_range(4..=64);
    let ny = rng.random_range(4..=64);
    let board = Board {
        width: nx as f64,
        height: ny as f64,
        margin: 0.0,
        resolution: 1.0,
        gap: 2.0,
        min_feature: 2.0,
        simplify_tolerance: 0.1,
    };
    let mut cells = Grid::new(nx, ny, Seed::Empty);
    let density: f64 = rng.random_range(0.0..0.35);
    for idx in 0..nx * ny {
        if rng.random_bool(density) {
            let (i, j) = (idx % nx, idx / nx);
            cells.set(i, j, Seed::Keepout);
        }
    }
    for _ in 0..rng.random_range(0..3) {
        let j = rng.random_range(0..ny);
        let (a, b) = (rng.random_range(0..nx), rng.random_range(0..nx));
        for i in a.min(b)..=a.max(b) {
            cells.set(i, j, Seed::Keepout);
        }
    }
    let nets = rng.random_range(1..=5u32);
    for net in 0..nets {
        for _ in 0..rng.random_range(1..=3) {
            let (i0, j0) = (rng.random_range(0..nx), rng.random_range(0..ny));
            let (w, h) = (rng.random_range(1..=3), rng.random_range(1..=3));
            for j in j0..(j0 + h).min(ny) {
                for i in i0..(i0 + w).min(nx) {
                    cells.set(i, j, Seed::Net(NetId(net)));
                }
            }
        }
    }
    SeedGrid { board, cells }
}

/// Multi-source Dijkstra on unit-weight 4-neighbour steps through empty cells.
/// Keys are (distance, net id), so ties resolve to the lower id.
pub fn dijkstra_labels(s: &SeedGrid) -> Vec<Zone> {
    let (nx, ny) = (s.cells.nx(), s.cells.ny());
    let mut best: Vec<Option<(u64, u32)>> = vec![None; nx * ny];
    let mut heap = BinaryHeap::new();
    for j in 0..ny {
        for i in 0..nx {
            if let Seed::Net(n) = s.cells.get(i, j) {
                heap.push(Reverse((0u64, n.0, i, j)));
            }
        }
    }
    while let Some(Reverse((d, net, i, j))) = heap.pop() {
        let idx = j * nx + i;
        if best[idx].is_some() {
            continue;
        }
        best[idx] = Some((d, net));
        let steps: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        for (di, dj) in steps {
            let (a, b) = (i as isize + di, j as isize + dj);
            if a < 0 || b < 0 || a >= nx as isize || b >= ny as isize {
                continue;
            }
            let (a, b) = (a as usize, b as usize);
            if s.cells.get(a, b) == Seed::Empty && best[b * nx + a].is_none() {
                heap.push(Reverse((d + 1, net, a, b)));
            }
        }
    }
    best.into_iter()
        .map(|b| match b {
            Some((_, n)) => Zone::Net(NetId(n)),
            None => Zone::Gap,
        })
        .collect()
}

pub fn center(z: &ZoneMap, idx: usize) -> Point {
    let r = z.board.resolution;
    let (i, j) = (idx % z.nx(), idx / z.nx());
    Point::new((i as f64 + 0.5) * r, (j as f64 + 0.5) * r)
}

/// Every pair of different-net cells whose centers are closer than `limit`.
/// Quadratic; meant for small maps.
pub fn brute_close_pairs(z: &ZoneMap, limit: f64) -> Vec<(usize, usize)> {
    let nets: Vec<(usize, NetId)> = z
        .cells
        .cells()
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.net().map(|n| (i, n)))
        .collect();
    let mut out = Vec::new();
    for (k, &(a, na)) in nets.iter().enumerate() {
        for &(b, nb) in &nets[k + 1..] {
            if na != nb && center(z, a).dist(center(z, b)) < limit - 1e-9 {
                out.push((a, b));
            }
        }
    }
    out
}

/// Dilation-overlap form of the same check for large maps: for every net
/// cell, scan the square window that could hold a too-close foreign cell.
pub fn windowed_close_pairs(z: &ZoneMap, limit: f64) -> usize {
    let r = z.board.resolution;
    let reach = (limit / r).ceil() as isize;
    let (nx, ny) = (z.nx() as isize, z.ny() as isize);
    let mut count = 0;
    for idx in 0..z.cells.len() {
        let Some(net) = z.cells.at(idx).net() else {
            continue;
        };
        let (i, j) = ((idx % z.nx()) as isize, (idx / z.nx()) as isize);
        for dj in -reach..=reach {
            for di in -reach..=reach {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= nx || b >= ny {
                    continue;
                }
                let other = (b * nx + a) as usize;
                if other <= idx {
                    continue;
                }
                if let Some(m) = z.cells.at(other).net() {
                    if m != net && ((di * di + dj * dj) as f64).sqrt() * r < limit - 1e-9 {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Root of every net cell's 4-connected same-net component.
pub fn zone_roots(z: &ZoneMap) -> Vec<Option<usize>> {
    let nx = z.nx();
    let mut uf = UnionFind::new(z.cells.len());
    for idx in 0..z.cells.len() {
        let Some(n) = z.cells.at(idx).net() else {
            continue;
        };
        if idx % nx + 1 < nx && z.cells.at(idx + 1).net() == Some(n) {
            uf.union(idx, idx + 1);
        }
        if idx + nx < z.cells.len() && z.cells.at(idx + nx).net() == Some(n) {
            uf.union(idx, idx + nx);
        }
    }
    (0..z.cells.len())
        .map(|idx| z.cells.at(idx).net().map(|_| uf.find(idx)))
        .collect()
}

/// Checks that output components and input nets are in one-to-one
/// correspondence: each net's seeds share one component, that component holds
/// no other net's seeds, and no component lacks seeds. Returns problems.
pub fn partition_problems(seeds: &SeedGrid, z: &ZoneMap) -> Vec<String> {
    let roots = zone_roots(z);
    let mut net_roots: BTreeMap<NetId, BTreeSet<Option<usize>>> = BTreeMap::new();
    for (idx, s) in seeds.cells.cells().iter().enumerate() {
        if let Seed::Net(n) = s {
            let here = if z.cells.at(idx) == Zone::Net(*n) {
                roots[idx]
            } else {
                None
            };
            net_roots.entry(*n).or_default().insert(here);
        }
    }
    let mut problems = Vec::new();
    let mut owner: BTreeMap<usize, NetId> = BTreeMap::new();
    for (net, set) in &net_roots {
        if set.len() != 1 || set.contains(&None) {
            problems.push(format!("net {net} split or uncovered: {set:?}"));
            continue;
        }
        let root = set.iter().next().unwrap().unwrap();
        if let Some(prev) = owner.insert(root, *net) {
            problems.push(format!("nets {prev} and {net} merged"));
        }
    }
    let all: BTreeSet<usize> = roots.iter().flatten().copied().collect();
    for r in all {
        if !owner.contains_key(&r) {
            problems.push(format!("component at cell {r} holds no trace"));
        }
    }
    problems
}

/// Scanline fill of the vector zones back onto the cell grid, using an
/// even-odd crossing count per net.
pub fn rerasterize(layout: &ZoneLayout, nx: usize, ny: usize) -> Vec<Option<NetId>> {
    let r = layout.board.resolution;
    let mut out = vec![None; nx * ny];
    for (net, polys) in &layout.zones {
        for j in 0..ny {
            let y = (j as f64 + 0.5) * r;
            let mut xs = Vec::new();
            for poly in polys {
                for ring in std::iter::once(&poly.outer).chain(&poly.holes) {
                    for k in 0..ring.len() {
                        let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
                        if (a.y > y) != (b.y > y) {
                            xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                        }
                    }
                }
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                for i in 0..nx {
                    let x = (i as f64 + 0.5) * r;
                    if x > pair[0] && x < pair[1] {
                        out[j * nx + i] = Some(*net);
                    }
                }
            }
        }
    }
    out
}

/// Closed polylines from the `d` attributes of matching `<path>` elements.
pub fn svg_paths(svg: &str, in_group: Option<&str>, skip_id: Option<&str>) -> Vec<Vec<Point>> {
    let doc = roxmltree::Document::parse(svg).unwrap();
    let mut out = Vec::new();
    for node in doc.descendants().filter(|n| n.has_tag_name("path")) {
        if skip_id.is_some() && node.attribute("id") == skip_id {
            continue;
        }
        if let Some(g) = in_group {
            let parent_id = node.parent_element().and_then(|p| p.attribute("id"));
            if parent_id != Some(g) {
                continue;
            }
        } else if node.parent_element().map(|p| p.has_tag_name("svg")) != Some(true) {
            continue;
        }
        let mut ring = Vec::new();
        for seg in svgtypes::SimplifyingPathParser::from(node.attribute("d").unwrap()) {
            match seg.unwrap() {
                svgtypes::SimplePathSegment::MoveTo { x, y }
                | svgtypes::SimplePathSegment::LineTo { x, y } => ring.push(Point::new(x, y)),
                svgtypes::SimplePathSegment::ClosePath => {}
                other => panic!("unexpected segment {other:?}"),
            }
        }
        out.push(ring);
    }
    out
}

fn closed(ring: &[Point]) -> Vec<Point> {
    let mut v = ring.to_vec();
    v.push(ring[0]);
    v
}

/// Symmetric Hausdorff distance between two closed polylines, sampled every 0.05 mm.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let (a, b) = (closed(a), closed(b));
    let one_way = |p: &[Point], q: &[Point]| {
        sample_polyline(p, 0.05)
            .into_iter()
            .map(|s| {
                q.windows(2)
                    .map(|w| seg_dist(s, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_way(&a, &b).max(one_way(&b, &a))
}

/// Greedy one-to-one matching of guides to cut paths; returns the worst
/// matched distance, or infinity when the counts differ or a guide has no
/// partner within `eps`.
pub fn match_polylines(guides: &[Vec<Point>], cuts: &[Vec<Point>], eps: f64) -> f64 {
    if guides.len() != cuts.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; cuts.len()];
    let mut worst: f64 = 0.0;
    for g in guides {
        let best = cuts
            .iter()
            .enumerate()
            .filter(|(k, _)| !used[*k])
            .map(|(k, c)| (k, hausdorff(g, c)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((k, d)) if d <= eps => {
                used[k] = true;
                worst = worst.max(d);
            }
            _ => return f64::INFINITY,
        }
    }
    worst
}
