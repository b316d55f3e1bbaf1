//! Part positions on the board: the placement file, the placement cost model,
//! courtyard overlap checks, and automatic placement by simulated annealing.

mod anneal;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::Board;
use crate::footprint::FootprintLibrary;
use crate::geom::Rect;
use crate::netmodel::{Netlist, ParseError};

pub use anneal::{auto_place, auto_place_with, AnnealConfig};

/// Penalty per mm² of halo-expanded courtyard overlap.
pub const OVERLAP_WEIGHT: f64 = 10.0;
/// Penalty per mm² of courtyard outside the usable board area.
pub const OUT_OF_BOARD_WEIGHT: f64 = 100.0;

/// One of the four cardinal rotations, counterclockwise in board coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn from_degrees(deg: f64) -> Option<Rotation> {
        if deg.fract() != 0.0 {
            return None;
        }
        match deg as i64 {
            0 => Some(Rotation::R0),
            90 => Some(Rotation::R90),
            180 => Some(Rotation::R180),
            270 => Some(Rotation::R270),
            _ => None,
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    /// Rotates a local-frame vector. Exact: only swaps and sign flips.
    pub fn apply(self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Rotation::R0 => (x, y),
            Rotation::R90 => (-y, x),
            Rotation::R180 => (-x, -y),
            Rotation::R270 => (y, -x),
        }
    }

    pub fn then(self, other: Rotation) -> Rotation {
        Rotation::ALL[(self.index() + other.index()) % 4]
    }

    pub fn ccw(self) -> Rotation {
        self.then(Rotation::R90)
    }

    pub fn cw(self) -> Rotation {
        self.then(Rotation::R270)
    }

    pub fn swaps_axes(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }

    fn index(self) -> usize {
        self.degrees() as usize / 90
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.degrees())
    }
}

impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u32(self.degrees())
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let deg = f64::deserialize(d)?;
        Rotation::from_degrees(deg).ok_or_else(|| {
            serde::de::Error::custom(format!("rotation {deg} is not 0, 90, 180 or 270"))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub x: f64,
    pub y: f64,
    pub rot: Rotation,
}

/// Rounds to the 0.1 mm placement grid.
pub fn snap(v: f64) -> f64 {
    let s = (v * 10.0).round() / 10.0;
    if s == 0.0 {
        0.0
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct PlacementSet {
    entries: BTreeMap<String, Placement>,
}

impl PlacementSet {
    pub fn insert(&mut self, part_id: impl Into<String>, placement: Placement) {
        self.entries.insert(part_id.into(), placement);
    }

    pub fn get(&self, part_id: &str) -> Option<&Placement> {
        self.entries.get(part_id)
    }

    pub fn contains(&self, part_id: &str) -> bool {
        self.entries.contains_key(part_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Placement)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Placement file text: `part_id x_mm y_mm rot`, sorted by part id.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# part x_mm y_mm rot\n");
        for (id, p) in &self.entries {
            out.push_str(&format!(
                "{} {:.1} {:.1} {}\n",
                id,
                snap(p.x),
                snap(p.y),
                p.rot
            ));
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("placement names unknown part `{0}`")]
    UnknownPart(String),
    #[error("line {line}: rotation {value} is not 0, 90, 180 or 270")]
    BadRotation { line: u32, value: String },
    #[error("part `{0}` has no placement")]
    MissingPlacement(String),
    #[error("unknown footprint `{0}`")]
    UnknownFootprint(String),
    #[error("courtyards need {needed:.1} mm² but the usable board area is {available:.1} mm²")]
    Infeasible { needed: f64, available: f64 },
}

/// Parses a placement file. Accepts `id x y rot` and `id at x,y rot r` lines;
/// `#` starts a comment.
pub fn load_placement(text: &str, netlist: &Netlist) -> Result<PlacementSet, PlacementError> {
    let mut set = PlacementSet::default();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k as u32 + 1;
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        let fields: Vec<&str> = match tokens.as_slice() {
            [id, "at", x, y, "rot", r] => vec![*id, *x, *y, *r],
            [id, "at", x, y] => vec![*id, *x, *y, "0"],
            [id, x, y, r] => vec![*id, *x, *y, *r],
            [id, x, y] => vec![*id, *x, *y, "0"],
            _ => {
                return Err(ParseError::at(
                    format!("expected `part_id x y rot`, got `{line}`"),
                    line_no,
                    1,
                )
                .into())
            }
        };
        let id = fields[0];
        let coord = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ParseError::at(format!("bad coordinate `{s}`"), line_no, 1))
        };
        let (x, y) = (coord(fields[1])?, coord(fields[2])?);
        let rot = fields[3]
            .parse::<f64>()
            .ok()
            .and_then(Rotation::from_degrees)
            .ok_or_else(|| PlacementError::BadRotation {
                line: line_no,
                value: fields[3].to_string(),
            })?;
        if netlist.part(id).is_none() {
            return Err(PlacementError::UnknownPart(id.to_string()));
        }
        if set.contains(id) {
            return Err(ParseError::at(format!("part `{id}` placed twice"), line_no, 1).into());
        }
        set.insert(id, Placement { x, y, rot });
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlacementCost {
    /// Sum over nets of the half-perimeter of the pad-center bounding box.
    pub wirelength: f64,
    /// Pairwise courtyard intersection, courtyards expanded by half the gap.
    pub overlap: f64,
    pub out_of_board: f64,
    pub total: f64,
}

impl PlacementCost {
    pub fn new(wirelength: f64, overlap: f64, out_of_board: f64) -> Self {
        Self {
            wirelength,
            overlap,
            out_of_board,
            total: wirelength + OVERLAP_WEIGHT * overlap + OUT_OF_BOARD_WEIGHT * out_of_board,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.overlap == 0.0 && self.out_of_board == 0.0
    }
}

pub fn placement_cost(
    netlist: &Netlist,
    lib: &FootprintLibrary,
    board: &Board,
    placement: &PlacementSet,
) -> Result<PlacementCost, PlacementError> {
    let model = anneal::Model::new(netlist, lib, board)?;
    let state = model.state_from(placement)?;
    Ok(model.cost(&state))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OverlapViolation {
    Overlap { a: String, b: String, area: f64 },
    OutOfBoard { part: String, area: f64 },
}

impl fmt::Display for OverlapViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OverlapViolation::Overlap { a, b, area } => {
                write!(f, "courtyards of `{a}` and `{b}` overlap by {area:.2} mm² (including the gap halo)")
            }
            OverlapViolation::OutOfBoard { part, area } => {
                write!(
                    f,
                    "courtyard of `{part}` extends {area:.2} mm² past the board margin"
                )
            }
        }
    }
}

/// Courtyard checks: one violation per intersecting pair (after expanding by
/// half the gap) and one per courtyard leaving the board-minus-margin area.
pub fn check_overlaps(courtyards: &[(String, Rect)], board: &Board) -> Vec<OverlapViolation> {
    let halo = board.gap / 2.0;
    let usable = board.usable();
    let mut out = Vec::new();
    for (i, (a, ra)) in courtyards.iter().enumerate() {
        for (b, rb) in &courtyards[i + 1..] {
            let area = ra.expand(halo).intersection_area(&rb.expand(halo));
            if area > 1e-12 {
                out.push(OverlapViolation::Overlap {
                    a: a.clone(),
                    b: b.clone(),
                    area,
                });
            }
        }
    }
    for (part, r) in courtyards {
        let area = r.area_outside(&usable);
        if area > 1e-12 {
            out.push(OverlapViolation::OutOfBoard {
                part: part.clone(),
                area,
            });
        }
    }
    out
}

/// Courtyard rectangles of every placed part, in part order.
pub fn placed_courtyards(
    netlist: &Netlist,
    lib: &FootprintLibrary,
    placement: &PlacementSet,
) -> Result<Vec<(String, Rect)>, PlacementError> {
    netlist
        .parts
        .iter()
        .map(|part| {
            let fp = lib
                .get(&part.footprint_key)
                .ok_or_else(|| PlacementError::UnknownFootprint(part.footprint_key.clone()))?;
            let pl = placement
                .get(&part.id)
                .ok_or_else(|| PlacementError::MissingPlacement(part.id.clone()))?;
            Ok((part.id.clone(), fp.courtyard_at(pl.x, pl.y, pl.rot)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::parse_netlist_xml;

    fn rgb() -> Netlist {
        parse_netlist_xml(include_str!("../../fixtures/rgb_led.xml")).unwrap()
    }

    #[test]
    fn four_rotations_are_identity() {
        for r in Rotation::ALL {
            let mut v = (2.5, -1.25);
            for _ in 0..4 {
                v = Rotation::R90.apply(v.0, v.1);
            }
            assert_eq!(v, (2.5, -1.25));
            assert_eq!(r.ccw().ccw().ccw().ccw(), r);
            assert_eq!(r.cw().ccw(), r);
        }
    }

    #[test]
    fn parses_both_line_forms() {
        let n = rgb();
        let set = load_placement(
            "D1 at 20,30 rot 90\n# comment\nR1 10 12.5 180 # trailing\n",
            &n,
        )
        .unwrap();
        assert_eq!(
            set.get("D1"),
            Some(&Placement {
                x: 20.0,
                y: 30.0,
                rot: Rotation::R90
            })
        );
        assert_eq!(set.get("R1").unwrap().rot, Rotation::R180);
        assert!(!set.contains("R2"));
    }

    #[test]
    fn unknown_part_and_bad_rotation() {
        let n = rgb();
        assert_eq!(
            load_placement("Q9 1 1 0", &n),
            Err(PlacementError::UnknownPart("Q9".into()))
        );
        assert!(matches!(
            load_placement("D1 1 1 45", &n),
            Err(PlacementError::BadRotation { line: 1, .. })
        ));
        assert!(matches!(
            load_placement("D1 x 1 0", &n),
            Err(PlacementError::Parse(_))
        ));
    }

    #[test]
    fn text_round_trip() {
        let n = rgb();
        let set = load_placement(include_str!("../../fixtures/rgb_led.place"), &n).unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(load_placement(&set.to_text(), &n).unwrap(), set);
    }

    #[test]
    fn overlap_checks() {
        let board = Board::default();
        let disjoint = vec![
            ("a".to_string(), Rect::new(10.0, 10.0, 20.0, 20.0)),
            ("b".to_string(), Rect::new(30.0, 10.0, 40.0, 20.0)),
        ];
        assert!(check_overlaps(&disjoint, &board).is_empty());

        // Expanded by 0.5 mm each, these overlap in a 2 x 2 square.
        let overlapping = vec![
            ("a".to_string(), Rect::new(10.0, 10.0, 20.0, 20.0)),
            ("b".to_string(), Rect::new(19.0, 19.0, 29.0, 29.0)),
        ];
        let v = check_overlaps(&overlapping, &board);
        assert_eq!(v.len(), 1);
        match &v[0] {
            OverlapViolation::Overlap { area, .. } => assert!((area - 4.0).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }

        let crossing = vec![("a".to_string(), Rect::new(1.0, 10.0, 11.0, 20.0))];
        let v = check_overlaps(&crossing, &board);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], OverlapViolation::OutOfBoard { .. }));
    }

    #[test]
    fn snapping() {
        assert_eq!(snap(20.04), 20.0);
        assert_eq!(snap(20.06), 20.1);
        assert_eq!(snap(-0.04), 0.0);
    }
}
