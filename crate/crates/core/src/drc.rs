//! Design-rule checks over a finished zone map: what makes a layout
//! electrically sound and physically weedable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::board::Board;
use crate::footprint::PadInstance;
use crate::geom::Point;
use crate::grid::{disk_offsets, Grid, NetId, Zone};
use crate::partition::{components, opening_residue, rasterize_pads_lenient, ZoneLayout, ZoneMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationKind {
    Clearance,
    DisconnectedNet,
    ThinFeature,
    PadUncovered,
    OutOfBoard,
    SeedConflict,
}

impl ViolationKind {
    pub fn code(self) -> &'static str {
        match self {
            ViolationKind::Clearance => "CLEARANCE",
            ViolationKind::DisconnectedNet => "DISCONNECTED_NET",
            ViolationKind::ThinFeature => "THIN_FEATURE",
            ViolationKind::PadUncovered => "PAD_UNCOVERED",
            ViolationKind::OutOfBoard => "OUT_OF_BOARD",
            ViolationKind::SeedConflict => "SEED_CONFLICT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// mm, rounded to 3 decimals.
    pub x: f64,
    pub y: f64,
    pub nets: Vec<NetId>,
    pub net_names: Vec<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrcReport {
    pub violations: Vec<Violation>,
    pub pass: bool,
}

pub fn round3(v: f64) -> f64 {
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl DrcReport {
    pub fn new(mut violations: Vec<Violation>) -> Self {
        violations.sort_by(|a, b| {
            a.kind
                .cmp(&b.kind)
                .then(a.y.total_cmp(&b.y))
                .then(a.x.total_cmp(&b.x))
                .then_with(|| a.nets.cmp(&b.nets))
                .then_with(|| a.detail.cmp(&b.detail))
        });
        Self {
            pass: violations.is_empty(),
            violations,
        }
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// One `KIND x y nets detail` line per violation, then the JSON form.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# design rules: {} ({} violation{})\n",
            if self.pass { "PASS" } else { "FAIL" },
            self.violations.len(),
            if self.violations.len() == 1 { "" } else { "s" }
        );
        for v in &self.violations {
            let nets = if v.nets.is_empty() {
                "-".to_string()
            } else {
                v.nets
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let _ = writeln!(
                out,
                "{} {:.3} {:.3} {} {}",
                v.kind.code(),
                v.x,
                v.y,
                nets,
                v.detail
            );
        }
        out.push_str("--- json\n");
        out.push_str(&self.to_json());
        out.push('\n');
        out
    }
}

fn net_label(v: &Violation, k: usize) -> String {
    match v.net_names.get(k) {
        Some(name) if !name.is_empty() => name.clone(),
        _ => format!("net {}", v.nets[k]),
    }
}

/// A one-line, human-readable account of a violation and how to fix it.
pub fn explain_violation(v: &Violation) -> String {
    let nets: Vec<String> = (0..v.nets.len()).map(|k| net_label(v, k)).collect();
    let nets = match nets.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    };
    let at = format!("({:.3}, {:.3})", v.x, v.y);
    match v.kind {
        ViolationKind::Clearance => format!(
            "clearance: {nets} come too close at {at} ({}); move the parts apart or increase the gap",
            v.detail
        ),
        ViolationKind::DisconnectedNet => format!(
            "disconnected: {nets} is split into separate zones near {at} ({}); move its parts closer together or clear a path",
            v.detail
        ),
        ViolationKind::ThinFeature => format!(
            "thin feature: a sliver of {nets} at {at} is narrower than {}; widen the zone or move neighbouring parts away",
            v.detail
        ),
        ViolationKind::PadUncovered => format!(
            "pad uncovered: {} at {at} is not fully inside a {nets} zone; give the pad more room",
            v.detail
        ),
        ViolationKind::OutOfBoard => format!(
            "out of board: copper of {nets} reaches the margin at {at} ({}); move the part inward",
            v.detail
        ),
        ViolationKind::SeedConflict => format!(
            "seed conflict: {} overlap at {at}, shorting {nets}; separate the parts",
            v.detail
        ),
    }
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Every pair `(a, b)`, `a < b`, of cells with different net labels whose
/// centers are closer than `gap - 2 * resolution`.
pub fn clearance_pairs(z: &ZoneMap) -> Vec<(usize, usize)> {
    let offsets: Vec<(isize, isize)> = disk_offsets(z.board.clearance(), z.board.resolution, false)
        .into_iter()
        .filter(|&(di, dj)| dj > 0 || (dj == 0 && di > 0))
        .collect();
    let cells = &z.cells;
    let mut pairs = Vec::new();
    for (a, &c) in cells.cells().iter().enumerate() {
        let Zone::Net(na) = c else { continue };
        let (i, j) = cells.coords(a);
        for &(di, dj) in &offsets {
            let (bi, bj) = (i as isize + di, j as isize + dj);
            if let Some(Zone::Net(nb)) = cells.get_signed(bi, bj) {
                if nb != na {
                    let b = cells.index(bi as usize, bj as usize);
                    pairs.push((a.min(b), a.max(b)));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

fn centroid(z: &ZoneMap, cells: &[usize]) -> Point {
    let (mut sx, mut sy) = (0.0, 0.0);
    for &idx in cells {
        let c = z.center(idx);
        sx += c.x;
        sy += c.y;
    }
    let n = cells.len().max(1) as f64;
    clamp_to_board(&z.board, Point::new(sx / n, sy / n))
}

fn clamp_to_board(board: &Board, p: Point) -> Point {
    Point::new(p.x.clamp(0.0, board.width), p.y.clamp(0.0, board.height))
}

struct Builder<'a> {
    names: &'a [String],
    out: Vec<Violation>,
}

impl Builder<'_> {
    fn push(
        &mut self,
        kind: ViolationKind,
        at: Point,
        nets: impl IntoIterator<Item = NetId>,
        detail: String,
    ) {
        let nets: Vec<NetId> = nets
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let net_names = nets
            .iter()
            .map(|n| self.names.get(n.0 as usize).cloned().unwrap_or_default())
            .collect();
        self.out.push(Violation {
            kind,
            x: round3(at.x),
            y: round3(at.y),
            nets,
            net_names,
            detail,
        });
    }
}

fn check_clearance(z: &ZoneMap, b: &mut Builder) {
    let pairs = clearance_pairs(z);
    if pairs.is_empty() {
        return;
    }
    let mut sets = DisjointSets::new(z.cells.len());
    let mut violating = vec![false; z.cells.len()];
    let mut closest = BTreeMap::new();
    for &(a, c) in &pairs {
        sets.union(a, c);
        violating[a] = true;
        violating[c] = true;
        let d = z.center(a).dist(z.center(c));
        for k in [a, c] {
            let e = closest.entry(k).or_insert(f64::INFINITY);
            *e = f64::min(*e, d);
        }
    }
    // Neighbouring violating cells belong to the same blob.
    let nx = z.cells.nx();
    for idx in 0..z.cells.len() {
        if !violating[idx] {
            continue;
        }
        let (i, j) = z.cells.coords(idx);
        for (di, dj) in [(1isize, 0isize), (-1, 1), (0, 1), (1, 1)] {
            let (ni, nj) = (i as isize + di, j as isize + dj);
            if z.cells.get_signed(ni, nj).is_some() {
                let n = nj as usize * nx + ni as usize;
                if violating[n] {
                    sets.union(idx, n);
                }
            }
        }
    }
    let mut blobs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for idx in 0..z.cells.len() {
        if violating[idx] {
            blobs.entry(sets.find(idx)).or_default().push(idx);
        }
    }
    for cells in blobs.values() {
        let nets = cells.iter().filter_map(|&k| z.cells.at(k).net());
        let closest = cells
            .iter()
            .map(|k| closest[k])
            .fold(f64::INFINITY, f64::min);
        b.push(
            ViolationKind::Clearance,
            centroid(z, cells),
            nets,
            format!(
                "distance {:.3} mm below clearance {:.3} mm",
                closest,
                z.board.clearance()
            ),
        );
    }
}

fn check_thin(z: &ZoneMap, b: &mut Builder) {
    let mut marks = Grid::new(z.nx(), z.ny(), None);
    for (net, cells) in opening_residue(z) {
        for idx in cells {
            marks.set_at(idx, Some(net));
        }
    }
    let comps = components(&marks, |m| *m);
    let mut blobs: Vec<Vec<usize>> = vec![Vec::new(); comps.count];
    for (idx, c) in comps.id.iter().enumerate() {
        if let Some(c) = c {
            blobs[*c as usize].push(idx);
        }
    }
    for cells in blobs {
        let net = marks.at(cells[0]).unwrap();
        b.push(
            ViolationKind::ThinFeature,
            centroid(z, &cells),
            [net],
            format!("w_min {} mm ({} cells)", z.board.min_feature, cells.len()),
        );
    }
}

fn check_margin(z: &ZoneMap, b: &mut Builder) {
    let mut marks = Grid::new(z.nx(), z.ny(), None);
    for (idx, &c) in z.cells.cells().iter().enumerate() {
        if let Zone::Net(n) = c {
            let p = z.center(idx);
            let beyond = p.x > z.board.width || p.y > z.board.height;
            if beyond || z.board.in_margin(p) {
                marks.set_at(idx, Some(n));
            }
        }
    }
    let comps = components(&marks, |m| *m);
    let mut blobs: Vec<Vec<usize>> = vec![Vec::new(); comps.count];
    for (idx, c) in comps.id.iter().enumerate() {
        if let Some(c) = c {
            blobs[*c as usize].push(idx);
        }
    }
    for cells in blobs {
        let net = marks.at(cells[0]).unwrap();
        b.push(
            ViolationKind::OutOfBoard,
            centroid(z, &cells),
            [net],
            format!(
                "{} cells inside the {} mm margin",
                cells.len(),
                z.board.margin
            ),
        );
    }
}

fn check_layout(layout: &ZoneLayout, b: &mut Builder) {
    let board = &layout.board;
    for (&net, polys) in &layout.zones {
        let outside = polys
            .iter()
            .flat_map(|p| p.outer.iter().chain(p.holes.iter().flatten()))
            .find(|p| p.x < 0.0 || p.y < 0.0 || p.x > board.width || p.y > board.height);
        if let Some(&p) = outside {
            b.push(
                ViolationKind::OutOfBoard,
                clamp_to_board(board, p),
                [net],
                format!("outline vertex ({:.3}, {:.3}) off the board", p.x, p.y),
            );
        }
    }
}

fn check_pads(z: &ZoneMap, pads: &[PadInstance], b: &mut Builder) {
    let claim = rasterize_pads_lenient(pads, &z.board);
    let comps = components(&z.cells, |c| c.net());

    let mut conflicts: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for &(idx, p, q) in &claim.conflicts {
        conflicts.entry((p, q)).or_default().push(idx);
    }
    for ((p, q), cells) in conflicts {
        b.push(
            ViolationKind::SeedConflict,
            centroid(z, &cells),
            pads[p].net_id.into_iter().chain(pads[q].net_id),
            format!(
                "pads {}.{} and {}.{}",
                pads[p].part_id, pads[p].pin, pads[q].part_id, pads[q].pin
            ),
        );
    }

    // Per pad: the zone components its correctly labeled cells fall in.
    let mut pad_comps: Vec<BTreeSet<u32>> = Vec::with_capacity(pads.len());
    for (pad, cells) in pads.iter().zip(&claim.pad_cells) {
        let mut set = BTreeSet::new();
        let Some(net) = pad.net_id else {
            pad_comps.push(set);
            continue;
        };
        let mut uncovered = 0;
        for &idx in cells {
            if z.cells.at(idx) == Zone::Net(net) {
                set.insert(comps.id[idx].unwrap());
            } else {
                uncovered += 1;
            }
        }
        if uncovered > 0 {
            b.push(
                ViolationKind::PadUncovered,
                clamp_to_board(&z.board, pad.center),
                [net],
                format!(
                    "pad {}.{} ({} of {} cells)",
                    pad.part_id,
                    pad.pin,
                    uncovered,
                    cells.len()
                ),
            );
        }
        pad_comps.push(set);
    }

    let mut by_net: BTreeMap<NetId, Vec<usize>> = BTreeMap::new();
    for (k, pad) in pads.iter().enumerate() {
        if let Some(net) = pad.net_id {
            if !claim.pad_cells[k].is_empty() {
                by_net.entry(net).or_default().push(k);
            }
        }
    }
    for (net, members) in by_net {
        let mut votes: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for (order, &k) in members.iter().enumerate() {
            if let Some(&c) = pad_comps[k].iter().next() {
                let e = votes.entry(c).or_insert((0, order));
                e.0 += 1;
            }
        }
        let main = votes
            .iter()
            .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .map(|(&c, _)| c);
        let all: BTreeSet<u32> = members
            .iter()
            .flat_map(|&k| pad_comps[k].iter().copied())
            .collect();
        let stray = members.iter().find(|&&k| {
            main.is_none()
                || pad_comps[k].iter().any(|&c| Some(c) != main)
                || pad_comps[k].is_empty()
        });
        if all.len() > 1 || main.is_none() {
            let k = *stray.unwrap_or(&members[0]);
            b.push(
                ViolationKind::DisconnectedNet,
                clamp_to_board(&z.board, pads[k].center),
                [net],
                format!(
                    "{} separate regions; pad {}.{} is cut off",
                    all.len().max(1),
                    pads[k].part_id,
                    pads[k].pin
                ),
            );
        }
    }

    // Nets with no pads at all can only be judged by their shape.
    let padded: BTreeSet<NetId> = pads.iter().filter_map(|p| p.net_id).collect();
    let mut per_net: BTreeMap<NetId, Vec<usize>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for (idx, c) in comps.id.iter().enumerate() {
        if let (Some(c), Zone::Net(net)) = (c, z.cells.at(idx)) {
            if !padded.contains(&net) && seen.insert(*c) {
                per_net.entry(net).or_default().push(idx);
            }
        }
    }
    for (net, firsts) in per_net {
        if firsts.len() > 1 {
            b.push(
                ViolationKind::DisconnectedNet,
                z.center(firsts[1]),
                [net],
                format!("{} separate regions", firsts.len()),
            );
        }
    }
}

/// Runs every rule. `net_names[i]` names net `i` in explanations.
pub fn run_drc(
    z: &ZoneMap,
    layout: &ZoneLayout,
    pads: &[PadInstance],
    net_names: &[String],
) -> DrcReport {
    let mut b = Builder {
        names: net_names,
        out: Vec::new(),
    };
    check_clearance(z, &mut b);
    check_pads(z, pads, &mut b);
    check_thin(z, &mut b);
    check_margin(z, &mut b);
    check_layout(layout, &mut b);
    DrcReport::new(b.out)
}
