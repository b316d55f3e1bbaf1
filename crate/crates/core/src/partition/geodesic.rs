use std::collections::VecDeque;

use super::{PartitionError, SeedGrid};
use crate::grid::{Grid, Seed, Zone};

const UNSEEN: u32 = u32::MAX;

/// Multi-source breadth-first growth over 4-connected unit steps. Each
/// EMPTY cell takes the net of its geodesically nearest seed; equal
/// distances go to the lower net id. Keepout and unreachable cells are GAP.
pub fn geodesic_partition(s: &SeedGrid) -> Result<Grid<Zone>, PartitionError> {
    let cells = &s.cells;
    let mut dist = vec![UNSEEN; cells.len()];
    let mut labels = Grid::new(cells.nx(), cells.ny(), Zone::Gap);
    let mut queue = VecDeque::new();
    for (idx, &c) in cells.cells().iter().enumerate() {
        if let Seed::Net(n) = c {
            dist[idx] = 0;
            labels.set_at(idx, Zone::Net(n));
            queue.push_back(idx);
        }
    }
    if queue.is_empty() {
        return Err(PartitionError::NoSeeds);
    }
    // Layer by layer: a cell's label is final once every cell of the
    // previous layer has offered it, which happens before it is popped.
    while let Some(idx) = queue.pop_front() {
        let d = dist[idx] + 1;
        let Zone::Net(net) = labels.at(idx) else {
            unreachable!()
        };
        for n in cells.neighbors4(idx) {
            if cells.at(n) != Seed::Empty {
                continue;
            }
            if dist[n] == UNSEEN {
                dist[n] = d;
                labels.set_at(n, Zone::Net(net));
                queue.push_back(n);
            } else if dist[n] == d {
                if let Zone::Net(other) = labels.at(n) {
                    if net < other {
                        labels.set_at(n, Zone::Net(net));
                    }
                }
            }
        }
    }
    Ok(labels)
}
