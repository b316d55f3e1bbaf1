use super::{components, PartitionError, SeedGrid, ZoneMap};
use crate::board::Board;
use crate::grid::{cell_center, disk_offsets, Grid, NetId, Seed, Zone};

fn margin_mask(board: &Board, nx: usize, ny: usize) -> Vec<bool> {
    let mut mask = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            mask.push(board.in_margin(cell_center(i, j, board.resolution)));
        }
    }
    mask
}

/// First different-net cell within `offsets` of `idx`, if any.
fn nearest_foreign<T: Copy>(
    grid: &Grid<T>,
    idx: usize,
    offsets: &[(isize, isize)],
    net: NetId,
    net_of: impl Fn(T) -> Option<NetId>,
    skip: impl Fn(usize) -> bool,
) -> Option<(usize, NetId)> {
    let (i, j) = grid.coords(idx);
    let mut best: Option<(isize, usize, NetId)> = None;
    for &(di, dj) in offsets {
        let (ni, nj) = (i as isize + di, j as isize + dj);
        let Some(v) = grid.get_signed(ni, nj) else {
            continue;
        };
        let n = grid.index(ni as usize, nj as usize);
        if skip(n) {
            continue;
        }
        match net_of(v) {
            Some(other) if other != net => {
                let d2 = di * di + dj * dj;
                if best.is_none_or(|(b, bn, _)| (d2, n) < (b, bn)) {
                    best = Some((d2, n, other));
                }
            }
            _ => {}
        }
    }
    best.map(|(_, n, other)| (n, other))
}

fn clearance_error(
    board: &Board,
    grid_nx: usize,
    a: usize,
    b: usize,
    na: NetId,
    nb: NetId,
) -> PartitionError {
    let r = board.resolution;
    let pa = cell_center(a % grid_nx, a / grid_nx, r);
    let pb = cell_center(b % grid_nx, b / grid_nx, r);
    PartitionError::PadClearanceViolation {
        nets: (na.min(nb), na.max(nb)),
        x: (pa.x + pb.x) / 2.0,
        y: (pa.y + pb.y) / 2.0,
        distance: pa.dist(pb),
        required: board.gap,
    }
}

/// Opens the isolation channels. A labeled cell keeps its net only if no
/// cell of another net lies within `gap / 2` (center distance, inclusive);
/// the margin band becomes OUTSIDE. Seed cells never lose their net: seeds
/// of different nets closer than the gap are rejected up front, and any
/// exempted seed that still ends up too close to foreign copper is an error.
pub fn carve_gaps(labels: &Grid<Zone>, seeds: &SeedGrid) -> Result<ZoneMap, PartitionError> {
    let board = seeds.board;
    let r = board.resolution;
    let (nx, ny) = (labels.nx(), labels.ny());
    let seed_net = |s: Seed| match s {
        Seed::Net(n) => Some(n),
        _ => None,
    };

    let too_close = disk_offsets(board.gap, r, false);
    for (idx, &s) in seeds.cells.cells().iter().enumerate() {
        let Some(net) = seed_net(s) else { continue };
        if let Some((other_idx, other)) =
            nearest_foreign(&seeds.cells, idx, &too_close, net, seed_net, |_| false)
        {
            return Err(clearance_error(&board, nx, idx, other_idx, net, other));
        }
    }

    let margin = margin_mask(&board, nx, ny);
    let half_gap = disk_offsets(board.gap / 2.0, r, true);
    let mut out = labels.clone();
    let mut exempt = Vec::new();
    for idx in 0..labels.len() {
        if margin[idx] {
            out.set_at(idx, Zone::Outside);
            continue;
        }
        let Zone::Net(net) = labels.at(idx) else {
            continue;
        };
        if nearest_foreign(labels, idx, &half_gap, net, Zone::net, |n| margin[n]).is_some() {
            if seeds.cells.at(idx) == Seed::Net(net) {
                exempt.push(idx);
            } else {
                out.set_at(idx, Zone::Gap);
            }
        }
    }

    let clearance = disk_offsets(board.clearance(), r, false);
    for idx in exempt {
        let Zone::Net(net) = out.at(idx) else {
            continue;
        };
        if let Some((other_idx, other)) =
            nearest_foreign(&out, idx, &clearance, net, Zone::net, |_| false)
        {
            return Err(clearance_error(&board, nx, idx, other_idx, net, other));
        }
    }
    Ok(ZoneMap { board, cells: out })
}

/// Exact squared Euclidean distance (in cells) from every cell of a
/// `w x h` window to the nearest feature cell; `f64::INFINITY` if none.
fn squared_distance_transform(w: usize, h: usize, feature: &[bool]) -> Vec<f64> {
    let mut d: Vec<f64> = feature
        .iter()
        .map(|&f| if f { 0.0 } else { f64::INFINITY })
        .collect();
    let mut buf_f = vec![0.0; w.max(h)];
    let mut buf_d = vec![0.0; w.max(h)];
    for i in 0..w {
        for j in 0..h {
            buf_f[j] = d[j * w + i];
        }
        lower_envelope(&buf_f[..h], &mut buf_d[..h]);
        for j in 0..h {
            d[j * w + i] = buf_d[j];
        }
    }
    for j in 0..h {
        buf_f[..w].copy_from_slice(&d[j * w..(j + 1) * w]);
        lower_envelope(&buf_f[..w], &mut buf_d[..w]);
        d[j * w..(j + 1) * w].copy_from_slice(&buf_d[..w]);
    }
    d
}

/// One-dimensional distance transform of a sampled function under the
/// squared Euclidean metric (lower envelope of parabolas).
fn lower_envelope(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k: Option<usize> = None;
    for q in (0..n).filter(|&q| f[q].is_finite()) {
        let Some(mut kk) = k else {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            k = Some(0);
            continue;
        };
        loop {
            let p = v[kk];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[kk] {
                // z[0] is -inf, so this never underflows.
                kk -= 1;
                continue;
            }
            kk += 1;
            v[kk] = q;
            z[kk] = s;
            z[kk + 1] = f64::INFINITY;
            break;
        }
        k = Some(kk);
    }
    if k.is_none() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut kk = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[kk + 1] < q as f64 {
            kk += 1;
        }
        let dq = q as f64 - v[kk] as f64;
        *o = dq * dq + f[v[kk]];
    }
}

/// Cells of `net` that a morphological opening with a disk of diameter
/// `min_feature` removes. OUTSIDE and off-grid cells count as neutral, so
/// zones meeting the margin keep their square corners.
fn net_residue(z: &ZoneMap, net: NetId) -> Vec<usize> {
    let cells = &z.cells;
    let (nx, ny) = (cells.nx(), cells.ny());
    let (mut i0, mut j0, mut i1, mut j1) = (usize::MAX, usize::MAX, 0, 0);
    for (idx, &c) in cells.cells().iter().enumerate() {
        if c == Zone::Net(net) {
            let (i, j) = cells.coords(idx);
            i0 = i0.min(i);
            j0 = j0.min(j);
            i1 = i1.max(i);
            j1 = j1.max(j);
        }
    }
    if i0 == usize::MAX {
        return Vec::new();
    }
    let radius = z.board.min_feature / 2.0 / z.board.resolution;
    let limit = radius * radius + 1e-9;
    // Anything farther than the radius from the net cannot affect it.
    let reach = radius.ceil() as usize + 1;
    let (i0, j0) = (i0.saturating_sub(reach), j0.saturating_sub(reach));
    let (i1, j1) = ((i1 + reach).min(nx - 1), (j1 + reach).min(ny - 1));
    let (w, h) = (i1 - i0 + 1, j1 - j0 + 1);
    let mut inside = vec![false; w * h];
    let mut blocking = vec![false; w * h];
    for wj in 0..h {
        for wi in 0..w {
            let c = cells.get(i0 + wi, j0 + wj);
            inside[wj * w + wi] = c == Zone::Net(net);
            blocking[wj * w + wi] = c != Zone::Net(net) && c != Zone::Outside;
        }
    }
    let to_blocking = squared_distance_transform(w, h, &blocking);
    let eroded: Vec<bool> = inside
        .iter()
        .zip(&to_blocking)
        .map(|(&m, &d)| m && d > limit)
        .collect();
    let to_eroded = squared_distance_transform(w, h, &eroded);
    let mut residue = Vec::new();
    for wj in 0..h {
        for wi in 0..w {
            let k = wj * w + wi;
            if inside[k] && to_eroded[k] > limit {
                residue.push(cells.index(i0 + wi, j0 + wj));
            }
        }
    }
    residue
}

/// Per net, the cells an opening by a `min_feature` disk would remove.
pub fn opening_residue(z: &ZoneMap) -> Vec<(NetId, Vec<usize>)> {
    z.nets()
        .into_iter()
        .map(|net| (net, net_residue(z, net)))
        .filter(|(_, cells)| !cells.is_empty())
        .collect()
}

/// Number of distinct components holding the net's (still labeled) seeds.
fn seed_component_counts(z: &ZoneMap, seeds: &SeedGrid) -> Vec<(NetId, usize, bool)> {
    let comps = components(&z.cells, |c| c.net());
    let mut out: Vec<(NetId, Vec<u32>, bool)> = Vec::new();
    for net in seeds.nets() {
        let mut ids = Vec::new();
        let mut lost = false;
        for idx in seeds.cells_of(net) {
            match comps.id[idx] {
                Some(c) if z.cells.at(idx) == Zone::Net(net) => ids.push(c),
                _ => lost = true,
            }
        }
        ids.sort_unstable();
        ids.dedup();
        out.push((net, ids, lost));
    }
    out.into_iter()
        .map(|(n, ids, lost)| (n, ids.len(), lost))
        .collect()
}

/// Removes every zone sliver narrower than `min_feature` (morphological
/// opening per net); removed cells become GAP. Fails if that strips a seed
/// cell or splits a net's seeds into more pieces than before.
pub fn enforce_min_feature(z: &ZoneMap, seeds: &SeedGrid) -> Result<ZoneMap, PartitionError> {
    let before = seed_component_counts(z, seeds);
    let mut out = z.clone();
    for (_, cells) in opening_residue(z) {
        for idx in cells {
            out.cells.set_at(idx, Zone::Gap);
        }
    }
    let after = seed_component_counts(&out, seeds);
    for ((net, n0, lost0), (_, n1, lost1)) in before.into_iter().zip(after) {
        if (lost1 && !lost0) || n1 > n0 {
            return Err(PartitionError::FeatureTooThin {
                net,
                min_feature: z.board.min_feature,
            });
        }
    }
    Ok(out)
}

/// Zone components that contain none of their net's seeds are cut away.
pub fn drop_islands(z: &ZoneMap, seeds: &SeedGrid) -> ZoneMap {
    let comps = components(&z.cells, |c| c.net());
    let mut anchored = vec![false; comps.count];
    for (idx, &s) in seeds.cells.cells().iter().enumerate() {
        if let (Seed::Net(n), Some(c)) = (s, comps.id[idx]) {
            if z.cells.at(idx) == Zone::Net(n) {
                anchored[c as usize] = true;
            }
        }
    }
    let mut out = z.clone();
    for (idx, c) in comps.id.iter().enumerate() {
        if let Some(c) = c {
            if !anchored[*c as usize] {
                out.cells.set_at(idx, Zone::Gap);
            }
        }
    }
    out
}
