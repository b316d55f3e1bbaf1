//! Simulated-annealing placer.
//!
//! Positions live on an integer 0.1 mm lattice and moves are whole-mm
//! offsets, so a fixed seed gives bit-identical results everywhere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Placement, PlacementCost, PlacementError, PlacementSet, Rotation};
use crate::board::Board;
use crate::footprint::{FootprintLibrary, Pad};
use crate::geom::Rect;
use crate::netmodel::Netlist;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealConfig {
    /// Random moves sampled to set the initial temperature.
    pub sample_moves: usize,
    pub cooling: f64,
    pub moves_per_temperature: usize,
    /// Stop once the temperature falls below this fraction of the initial one.
    pub stop_ratio: f64,
    /// Translation step, mm.
    pub step_mm: i64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            sample_moves: 100,
            cooling: 0.95,
            moves_per_temperature: 200,
            stop_ratio: 1e-3,
            step_mm: 1,
        }
    }
}

struct PartModel {
    id: String,
    pads: Vec<Pad>,
    court_w: f64,
    court_h: f64,
}

pub(super) struct Model {
    parts: Vec<PartModel>,
    /// Per net: (part index, pad index).
    nets: Vec<Vec<(usize, usize)>>,
    board: Board,
}

/// Positions in units of 0.1 mm.
#[derive(Debug, Clone, PartialEq)]
pub(super) struct State {
    pos: Vec<(i64, i64)>,
    rot: Vec<Rotation>,
}

const UNIT: f64 = 0.1;

impl Model {
    pub(super) fn new(
        netlist: &Netlist,
        lib: &FootprintLibrary,
        board: &Board,
    ) -> Result<Self, PlacementError> {
        let mut parts: Vec<PartModel> = Vec::with_capacity(netlist.parts.len());
        let mut order: Vec<&crate::netmodel::Part> = netlist.parts.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        for part in order {
            let fp = lib
                .get(&part.footprint_key)
                .ok_or_else(|| PlacementError::UnknownFootprint(part.footprint_key.clone()))?;
            parts.push(PartModel {
                id: part.id.clone(),
                pads: fp.pads.clone(),
                court_w: fp.courtyard_w,
                court_h: fp.courtyard_h,
            });
        }
        let nets = netlist
            .nets
            .iter()
            .map(|net| {
                net.pins
                    .iter()
                    .filter_map(|pin| {
                        let pi = parts.iter().position(|p| p.id == pin.part_id)?;
                        let k = pin.pin as usize - 1;
                        (k < parts[pi].pads.len()).then_some((pi, k))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            parts,
            nets,
            board: *board,
        })
    }

    pub(super) fn state_from(&self, placement: &PlacementSet) -> Result<State, PlacementError> {
        let mut state = State {
            pos: Vec::with_capacity(self.parts.len()),
            rot: Vec::with_capacity(self.parts.len()),
        };
        for part in &self.parts {
            let pl = placement
                .get(&part.id)
                .ok_or_else(|| PlacementError::MissingPlacement(part.id.clone()))?;
            state.pos.push((to_units(pl.x), to_units(pl.y)));
            state.rot.push(pl.rot);
        }
        Ok(state)
    }

    fn to_placement(&self, state: &State) -> PlacementSet {
        let mut set = PlacementSet::default();
        for (i, part) in self.parts.iter().enumerate() {
            set.insert(
                part.id.clone(),
                Placement {
                    x: state.pos[i].0 as f64 * UNIT,
                    y: state.pos[i].1 as f64 * UNIT,
                    rot: state.rot[i],
                },
            );
        }
        set
    }

    fn courtyard(&self, state: &State, i: usize) -> Rect {
        let p = &self.parts[i];
        let (w, h) = if state.rot[i].swaps_axes() {
            (p.court_h, p.court_w)
        } else {
            (p.court_w, p.court_h)
        };
        Rect::centered(
            state.pos[i].0 as f64 * UNIT,
            state.pos[i].1 as f64 * UNIT,
            w,
            h,
        )
    }

    pub(super) fn cost(&self, state: &State) -> PlacementCost {
        let mut wirelength = 0.0;
        for net in &self.nets {
            if net.is_empty() {
                continue;
            }
            let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
            for &(pi, k) in net {
                let pad = &self.parts[pi].pads[k];
                let (dx, dy) = state.rot[pi].apply(pad.x, pad.y);
                let x = state.pos[pi].0 as f64 * UNIT + dx;
                let y = state.pos[pi].1 as f64 * UNIT + dy;
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
            wirelength += (x1 - x0) + (y1 - y0);
        }
        let halo = self.board.gap / 2.0;
        let usable = self.board.usable();
        let courts: Vec<Rect> = (0..self.parts.len())
            .map(|i| self.courtyard(state, i))
            .collect();
        let mut overlap = 0.0;
        let mut out_of_board = 0.0;
        for (i, a) in courts.iter().enumerate() {
            let ea = a.expand(halo);
            for b in &courts[i + 1..] {
                overlap += ea.intersection_area(&b.expand(halo));
            }
            out_of_board += a.area_outside(&usable);
        }
        PlacementCost::new(wirelength, overlap, out_of_board)
    }

    fn initial(&self) -> State {
        let n = self.parts.len();
        let b = &self.board;
        let center = (to_units(b.width / 2.0), to_units(b.height / 2.0));
        let mut state = State {
            pos: vec![center; n],
            rot: vec![Rotation::R0; n],
        };
        if n <= 1 {
            return state;
        }
        // Shelf packing of halo-expanded courtyards, in part-id order.
        let usable = b.usable();
        let (x0, y0) = (to_units_ceil(usable.x0), to_units_ceil(usable.y0));
        let (x1, y1) = (to_units_floor(usable.x1), to_units_floor(usable.y1));
        let (mut x, mut y, mut row_h) = (x0, y0, 0i64);
        let mut packed = Vec::with_capacity(n);
        for p in &self.parts {
            let w = to_units_ceil(p.court_w + b.gap) + 1;
            let h = to_units_ceil(p.court_h + b.gap) + 1;
            if x + w > x1 {
                x = x0;
                y += row_h;
                row_h = 0;
            }
            if x + w > x1 || y + h > y1 {
                return state;
            }
            packed.push((x + w / 2, y + h / 2));
            x += w;
            row_h = row_h.max(h);
        }
        state.pos = packed;
        state
    }

    fn propose(&self, state: &mut State, rng: &mut ChaCha8Rng, reach_mm: i64) {
        let n = self.parts.len();
        let kind = if n >= 2 {
            rng.random_range(0..3)
        } else {
            rng.random_range(0..2)
        };
        match kind {
            0 => {
                let i = rng.random_range(0..n);
                let (dx, dy) = loop {
                    let d = (
                        rng.random_range(-reach_mm..=reach_mm),
                        rng.random_range(-reach_mm..=reach_mm),
                    );
                    if d != (0, 0) {
                        break d;
                    }
                };
                let usable = self.board.usable();
                let (x, y) = state.pos[i];
                state.pos[i] = (
                    (x + dx * 10).clamp(to_units_ceil(usable.x0), to_units_floor(usable.x1)),
                    (y + dy * 10).clamp(to_units_ceil(usable.y0), to_units_floor(usable.y1)),
                );
            }
            1 => {
                let i = rng.random_range(0..n);
                state.rot[i] = if rng.random_bool(0.5) {
                    state.rot[i].ccw()
                } else {
                    state.rot[i].cw()
                };
            }
            _ => {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                state.pos.swap(i, j);
            }
        }
    }
}

fn to_units(mm: f64) -> i64 {
    (mm / UNIT).round() as i64
}

fn to_units_ceil(mm: f64) -> i64 {
    (mm / UNIT - 1e-9).ceil() as i64
}

fn to_units_floor(mm: f64) -> i64 {
    (mm / UNIT + 1e-9).floor() as i64
}

/// Anneals a placement with the default schedule.
pub fn auto_place(
    netlist: &Netlist,
    lib: &FootprintLibrary,
    board: &Board,
    seed: u64,
) -> Result<PlacementSet, PlacementError> {
    auto_place_with(netlist, lib, board, seed, &AnnealConfig::default())
}

/// Returns the best feasible placement seen (zero overlap, fully in-board).
pub fn auto_place_with(
    netlist: &Netlist,
    lib: &FootprintLibrary,
    board: &Board,
    seed: u64,
    cfg: &AnnealConfig,
) -> Result<PlacementSet, PlacementError> {
    let model = Model::new(netlist, lib, board)?;
    if model.parts.is_empty() {
        return Ok(PlacementSet::default());
    }
    let usable = board.usable();
    let needed: f64 = model
        .parts
        .iter()
        .map(|p| (p.court_w + board.gap) * (p.court_h + board.gap))
        .sum();
    if needed > usable.area() {
        return Err(PlacementError::Infeasible {
            needed,
            available: usable.area(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = model.initial();
    let mut current_cost = model.cost(&current);
    let mut best = current_cost
        .is_feasible()
        .then(|| (current.clone(), current_cost));

    let span_mm = ((board.width.max(board.height) / 2.0).round() as i64).max(cfg.step_mm);
    let mut delta_sum = 0.0;
    for _ in 0..cfg.sample_moves {
        let mut trial = current.clone();
        model.propose(&mut trial, &mut rng, span_mm);
        delta_sum += (model.cost(&trial).total - current_cost.total).abs();
    }
    let t0 = if cfg.sample_moves > 0 {
        delta_sum / cfg.sample_moves as f64
    } else {
        0.0
    };

    if t0 > 0.0 {
        let mut t = t0;
        while t >= cfg.stop_ratio * t0 {
            let reach = ((span_mm as f64 * t / t0).round() as i64).max(cfg.step_mm);
            for _ in 0..cfg.moves_per_temperature {
                let mut trial = current.clone();
                model.propose(&mut trial, &mut rng, reach);
                let cost = model.cost(&trial);
                let delta = cost.total - current_cost.total;
                if delta <= 0.0 || rng.random::<f64>() < (-delta / t).exp() {
                    current = trial;
                    current_cost = cost;
                    if current_cost.is_feasible()
                        && best
                            .as_ref()
                            .is_none_or(|(_, b)| current_cost.total < b.total)
                    {
                        best = Some((current.clone(), current_cost));
                    }
                }
            }
            t *= cfg.cooling;
        }
    }

    match best {
        Some((state, _)) => Ok(model.to_placement(&state)),
        None => Err(PlacementError::Infeasible {
            needed,
            available: usable.area(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::parse_netlist_xml;
    use crate::placement::placement_cost;

    fn single() -> Netlist {
        parse_netlist_xml(r#"<netlist><part id="S1" footprint="spst_slide"/></netlist>"#).unwrap()
    }

    #[test]
    fn single_part_goes_to_center() {
        let board = Board::default();
        let pl = auto_place(&single(), &FootprintLibrary::builtin(), &board, 3).unwrap();
        assert_eq!(
            pl.get("S1"),
            Some(&Placement {
                x: 50.0,
                y: 35.0,
                rot: Rotation::R0
            })
        );
        let cost = placement_cost(&single(), &FootprintLibrary::builtin(), &board, &pl).unwrap();
        assert_eq!((cost.wirelength, cost.overlap), (0.0, 0.0));
    }

    #[test]
    fn infeasible_reported_up_front() {
        let board = Board::new(20.0, 20.0).unwrap();
        let n = parse_netlist_xml(
            r#"<netlist><part id="A" footprint="cr2032_clip"/><part id="B" footprint="cr2032_clip"/></netlist>"#,
        )
        .unwrap();
        assert!(matches!(
            auto_place(&n, &FootprintLibrary::builtin(), &board, 1),
            Err(PlacementError::Infeasible { .. })
        ));
    }

    #[test]
    fn rgb_fixture_places_feasibly_and_improves() {
        let n = parse_netlist_xml(include_str!("../../fixtures/rgb_led.xml")).unwrap();
        let lib = FootprintLibrary::builtin();
        let board = Board::default();
        let model = Model::new(&n, &lib, &board).unwrap();
        let init = model.cost(&model.initial());
        assert!(init.is_feasible());
        let pl = auto_place(&n, &lib, &board, 11).unwrap();
        let cost = placement_cost(&n, &lib, &board, &pl).unwrap();
        assert!(cost.is_feasible());
        assert!(cost.total <= init.total);
    }
}
