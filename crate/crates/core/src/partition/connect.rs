use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{rasterize_pads_lenient, SeedGrid, ZoneMap};
use crate::footprint::PadInstance;
use crate::grid::{Grid, NetId, Seed};

/// 4-connected components, numbered in scanline order of their first cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub id: Vec<Option<u32>>,
    pub count: usize,
}

/// Flood fill over cells with equal `key`; cells keyed `None` are background.
pub fn components<T: Copy, K: PartialEq>(
    grid: &Grid<T>,
    key: impl Fn(&T) -> Option<K>,
) -> Components {
    let keys: Vec<Option<K>> = grid.cells().iter().map(&key).collect();
    let mut id = vec![None; grid.len()];
    let mut count = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if id[start].is_some() || keys[start].is_none() {
            continue;
        }
        id[start] = Some(count);
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            for n in grid.neighbors4(idx) {
                if id[n].is_none() && keys[n].is_some() && keys[n] == keys[idx] {
                    id[n] = Some(count);
                    queue.push_back(n);
                }
            }
        }
        count += 1;
    }
    Components {
        id,
        count: count as usize,
    }
}

/// For each net with seed cells: are all of them labeled with the net and
/// inside a single zone component?
pub fn check_seed_connectivity(z: &ZoneMap, seeds: &SeedGrid) -> BTreeMap<NetId, bool> {
    let comps = components(&z.cells, |c| c.net());
    let mut out = BTreeMap::new();
    let mut seen: BTreeMap<NetId, Option<u32>> = BTreeMap::new();
    for (idx, &cell) in seeds.cells.cells().iter().enumerate() {
        let Seed::Net(net) = cell else { continue };
        let here = (z.cells.at(idx).net() == Some(net))
            .then(|| comps.id[idx])
            .flatten();
        let ok = out.entry(net).or_insert(true);
        match seen.get(&net) {
            None => {
                seen.insert(net, here);
                *ok &= here.is_some();
            }
            Some(&first) => *ok &= here.is_some() && here == first,
        }
    }
    out
}

pub fn check_zone_connectivity(z: &ZoneMap, pads: &[PadInstance]) -> BTreeMap<NetId, bool> {
    check_seed_connectivity(z, &rasterize_pads_lenient(pads, &z.board).seeds)
}

/// Compares the connected seed blobs with the connected zones grown from
/// them. Every blob must land in exactly one zone component and every zone
/// component must hold exactly one blob; anything else is reported.
pub fn trace_partition_mismatches(seeds: &SeedGrid, z: &ZoneMap) -> Vec<String> {
    let blobs = components(&seeds.cells, |c| match c {
        Seed::Net(n) => Some(*n),
        _ => None,
    });
    let zones = components(&z.cells, |c| c.net());
    let mut blob_zones: Vec<BTreeSet<Option<u32>>> = vec![BTreeSet::new(); blobs.count];
    let mut blob_net: Vec<(NetId, usize)> = vec![(NetId(0), 0); blobs.count];
    for (idx, b) in blobs.id.iter().enumerate() {
        let Some(b) = *b else { continue };
        let Seed::Net(net) = seeds.cells.at(idx) else {
            continue;
        };
        blob_net[b as usize] = (net, idx);
        let zone = (z.cells.at(idx).net() == Some(net))
            .then(|| zones.id[idx])
            .flatten();
        blob_zones[b as usize].insert(zone);
    }
    let mut problems = Vec::new();
    let mut zone_blobs: Vec<Vec<usize>> = vec![Vec::new(); zones.count];
    for (b, set) in blob_zones.iter().enumerate() {
        let (net, idx) = blob_net[b];
        let (i, j) = seeds.cells.coords(idx);
        match set.iter().collect::<Vec<_>>().as_slice() {
            [Some(zone)] => zone_blobs[*zone as usize].push(b),
            _ => problems.push(format!(
                "net {net}: trace starting at cell ({i}, {j}) is split across zones"
            )),
        }
    }
    for (zone, members) in zone_blobs.iter().enumerate() {
        let first = zones
            .id
            .iter()
            .position(|&c| c == Some(zone as u32))
            .unwrap();
        let (i, j) = z.cells.coords(first);
        match members.len() {
            1 => {}
            0 => problems.push(format!("zone at cell ({i}, {j}) holds no trace")),
            n => problems.push(format!(
                "net {}: {n} separate traces merged into the zone at cell ({i}, {j})",
                blob_net[members[0]].0
            )),
        }
    }
    problems
}
