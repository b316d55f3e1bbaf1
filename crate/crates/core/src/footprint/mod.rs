//! Component pad geometry, attachment styles, and placement into board coordinates.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point, Rect};
use crate::grid::NetId;
use crate::netmodel::{Netlist, ParseError};
use crate::placement::{PlacementSet, Rotation};

const BUILTIN: &str = include_str!("builtin.toml");

/// How a component is fixed to the paper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attach {
    /// Legs pierce the paper twice, like a staple.
    StaplerSlot,
    /// Held down by a strip of copper tape.
    TapePad,
    SolderPad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PadShape {
    Rect { w: f64, h: f64 },
    Circle { diameter: f64 },
}

impl PadShape {
    pub fn half_extents(&self) -> (f64, f64) {
        match *self {
            PadShape::Rect { w, h } => (w / 2.0, h / 2.0),
            PadShape::Circle { diameter } => (diameter / 2.0, diameter / 2.0),
        }
    }

    pub fn rotated(&self, rot: Rotation) -> PadShape {
        match *self {
            PadShape::Rect { w, h } if rot.swaps_axes() => PadShape::Rect { w: h, h: w },
            s => s,
        }
    }

    /// Whether `p`, relative to the pad center, lies on the pad (boundary included).
    pub fn contains(&self, dx: f64, dy: f64) -> bool {
        const EPS: f64 = 1e-9;
        match *self {
            PadShape::Rect { w, h } => dx.abs() <= w / 2.0 + EPS && dy.abs() <= h / 2.0 + EPS,
            PadShape::Circle { diameter } => dx.hypot(dy) <= diameter / 2.0 + EPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pad {
    pub x: f64,
    pub y: f64,
    pub shape: PadShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub key: String,
    /// Pin `k` is `pads[k - 1]`.
    pub pads: Vec<Pad>,
    pub attach: Attach,
    /// Courtyard size, centered on the local origin.
    pub courtyard_w: f64,
    pub courtyard_h: f64,
}

impl Footprint {
    pub fn pad_count(&self) -> usize {
        self.pads.len()
    }

    /// Courtyard rectangle in board coordinates for a part at `(x, y)` with `rot`.
    pub fn courtyard_at(&self, x: f64, y: f64, rot: Rotation) -> Rect {
        let (w, h) = if rot.swaps_axes() {
            (self.courtyard_h, self.courtyard_w)
        } else {
            (self.courtyard_w, self.courtyard_h)
        };
        Rect::centered(x, y, w, h)
    }

    fn validate(&self) -> Result<(), FootprintError> {
        let bad = |msg: String| FootprintError::Validation {
            key: self.key.clone(),
            message: msg,
        };
        if self.key.trim().is_empty() {
            return Err(bad("empty footprint key".into()));
        }
        if self.pads.is_empty() {
            return Err(bad("footprint has no pads".into()));
        }
        if !(self.courtyard_w > 0.0 && self.courtyard_h > 0.0) {
            return Err(bad(format!(
                "courtyard {}x{} must be positive",
                self.courtyard_w, self.courtyard_h
            )));
        }
        let court = Rect::centered(0.0, 0.0, self.courtyard_w, self.courtyard_h);
        for (i, pad) in self.pads.iter().enumerate() {
            let (hw, hh) = pad.shape.half_extents();
            if !(hw > 0.0 && hh > 0.0) {
                return Err(bad(format!("pad {} has a nonpositive dimension", i + 1)));
            }
            let r = Rect::new(pad.x - hw, pad.y - hh, pad.x + hw, pad.y + hh);
            if !court.contains_rect(&r, 1e-9) {
                return Err(bad(format!(
                    "pad {} at ({}, {}) lies outside the {}x{} courtyard",
                    i + 1,
                    pad.x,
                    pad.y,
                    self.courtyard_w,
                    self.courtyard_h
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FootprintError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("footprint `{key}`: {message}")]
    Validation { key: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FootprintLibrary {
    entries: BTreeMap<String, Footprint>,
}

impl FootprintLibrary {
    /// Axial resistor, LEDs, DIP sockets, coin-cell clip and slide switch.
    pub fn builtin() -> Self {
        let mut lib = FootprintLibrary::default();
        for fp in parse_library_file(BUILTIN).expect("built-in footprint library is valid") {
            lib.entries.insert(fp.key.clone(), fp);
        }
        lib
    }

    pub fn get(&self, key: &str) -> Option<&Footprint> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, fp: Footprint) {
        self.entries.insert(fp.key.clone(), fp);
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Footprint> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Overlays the entries of a library file; file entries shadow existing keys.
    pub fn merge_file(&mut self, text: &str) -> Result<(), FootprintError> {
        for fp in parse_library_file(text)? {
            self.insert(fp);
        }
        Ok(())
    }
}

/// Loads a library file merged over the built-in defaults.
pub fn load_footprint_library(text: &str) -> Result<FootprintLibrary, FootprintError> {
    let mut lib = FootprintLibrary::builtin();
    lib.merge_file(text)?;
    Ok(lib)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryFile {
    #[serde(default)]
    footprint: Vec<FootprintEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FootprintEntry {
    key: String,
    attach: Attach,
    courtyard: SizeEntry,
    pads: Vec<PadEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SizeEntry {
    w: f64,
    h: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PadEntry {
    x: f64,
    y: f64,
    shape: ShapeKind,
    w: f64,
    /// Ignored for circles, which use `w` as the diameter.
    h: Option<f64>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum ShapeKind {
    Rect,
    Circle,
}

fn parse_library_file(text: &str) -> Result<Vec<Footprint>, FootprintError> {
    let file: LibraryFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_col(text, s.start))
            .map_or((None, None), |(l, c)| (Some(l), Some(c)));
        ParseError {
            message: e.message().to_string(),
            line,
            column,
        }
    })?;
    let mut seen: HashMap<String, ()> = HashMap::new();
    let mut out = Vec::with_capacity(file.footprint.len());
    for entry in file.footprint {
        if seen.insert(entry.key.clone(), ()).is_some() {
            return Err(FootprintError::Validation {
                key: entry.key,
                message: "duplicate key in one library file".into(),
            });
        }
        let mut pads = Vec::with_capacity(entry.pads.len());
        for p in entry.pads {
            let shape = match p.shape {
                ShapeKind::Rect => PadShape::Rect {
                    w: p.w,
                    h: p.h.ok_or_else(|| FootprintError::Validation {
                        key: entry.key.clone(),
                        message: "rect pad needs `h`".into(),
                    })?,
                },
                ShapeKind::Circle => PadShape::Circle { diameter: p.w },
            };
            pads.push(Pad {
                x: p.x,
                y: p.y,
                shape,
            });
        }
        let fp = Footprint {
            key: entry.key,
            pads,
            attach: entry.attach,
            courtyard_w: entry.courtyard.w,
            courtyard_h: entry.courtyard.h,
        };
        fp.validate()?;
        out.push(fp);
    }
    Ok(out)
}

fn line_col(text: &str, offset: usize) -> (u32, u32) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() as u32 + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32 + 1;
    (line, column)
}

/// A footprint pad placed on the board.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PadInstance {
    pub part_id: String,
    pub pin: u32,
    /// `None` for pins that belong to no net.
    pub net_id: Option<NetId>,
    pub center: Point,
    /// Local-frame shape; see [`PadInstance::board_shape`].
    pub shape: PadShape,
    pub rotation: Rotation,
}

impl PadInstance {
    pub fn board_shape(&self) -> PadShape {
        self.shape.rotated(self.rotation)
    }

    pub fn bounds(&self) -> Rect {
        let (hw, hh) = self.board_shape().half_extents();
        Rect::new(
            self.center.x - hw,
            self.center.y - hh,
            self.center.x + hw,
            self.center.y + hh,
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InstantiateError {
    #[error("part `{0}` has no placement")]
    MissingPlacement(String),
    #[error("unknown footprint `{0}`")]
    UnknownFootprint(String),
}

/// Places every pad of every part; output ordered by `(part_id, pin)`.
pub fn instantiate_pads(
    netlist: &Netlist,
    lib: &FootprintLibrary,
    placement: &PlacementSet,
) -> Result<Vec<PadInstance>, InstantiateError> {
    let pin_nets = netlist.pin_nets();
    let mut parts: Vec<_> = netlist.parts.iter().collect();
    parts.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::new();
    for part in parts {
        let fp = lib
            .get(&part.footprint_key)
            .ok_or_else(|| InstantiateError::UnknownFootprint(part.footprint_key.clone()))?;
        let pl = placement
            .get(&part.id)
            .ok_or_else(|| InstantiateError::MissingPlacement(part.id.clone()))?;
        for (k, pad) in fp.pads.iter().enumerate() {
            let pin = k as u32 + 1;
            let (dx, dy) = pl.rot.apply(pad.x, pad.y);
            out.push(PadInstance {
                part_id: part.id.clone(),
                pin,
                net_id: pin_nets.get(&(part.id.as_str(), pin)).copied(),
                center: Point::new(pl.x + dx, pl.y + dy),
                shape: pad.shape,
                rotation: pl.rot,
            });
        }
    }
    Ok(out)
}
