//! Fabrication files: stroke-only SVG for the vinyl cutter, a printable
//! fine-tape template, and a one-pixel-per-cell PNG preview.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Point;
use crate::grid::{NetId, Zone};
use crate::partition::{ZoneLayout, ZoneMap, ZonePolygon};

pub const CUT_STYLE: &str = "fill:none;stroke:#000;stroke-width:0.1";
pub const ZONE_FILL: &str = "#f0c070";
pub const PEELABLE_WARNING: &str =
    "fine-tape mode: the copper layer laid over the tape must peel off cleanly; conductive fabric tape will not work";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportMode {
    Cut,
    #[serde(rename = "finetape")]
    FineTape,
}

impl ExportMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExportMode::Cut => "cut",
            ExportMode::FineTape => "finetape",
        }
    }
}

impl FromStr for ExportMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cut" | "vinyl" | "vinyl-cut" => Ok(ExportMode::Cut),
            "finetape" | "fine-tape" => Ok(ExportMode::FineTape),
            _ => Err(format!(
                "unknown export mode `{s}` (expected cut or finetape)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportOptions {
    pub mode: ExportMode,
    /// Fine-tape width in mm; ignored when cutting.
    pub tape_width: f64,
    pub include_labels: bool,
    pub include_registration_marks: bool,
    /// Label text per net id, used when `include_labels` is set.
    pub net_names: Vec<String>,
}

impl ExportOptions {
    pub fn cut() -> Self {
        Self {
            mode: ExportMode::Cut,
            tape_width: 0.0,
            include_labels: false,
            include_registration_marks: false,
            net_names: Vec::new(),
        }
    }

    pub fn fine_tape(tape_width: f64) -> Self {
        Self {
            mode: ExportMode::FineTape,
            tape_width,
            ..Self::cut()
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExportError {
    #[error("export mode mismatch: expected {expected}, options say {got}")]
    ModeMismatch {
        expected: &'static str,
        got: &'static str,
    },
    #[error("tape width {tape} mm must equal the board gap {gap} mm")]
    TapeWidthMismatch { tape: f64, gap: f64 },
    #[error("tape width must be positive, got {0} mm")]
    BadTapeWidth(f64),
}

fn num(v: f64) -> String {
    let s = format!("{:.3}", v);
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn ring_d(out: &mut String, ring: &[Point]) {
    for (k, p) in ring.iter().enumerate() {
        let cmd = if k == 0 { "M" } else { " L" };
        if k == 0 && !out.is_empty() {
            out.push(' ');
        }
        let _ = write!(out, "{cmd} {} {}", num(p.x), num(p.y));
    }
    out.push_str(" Z");
}

pub fn path_data(ring: &[Point]) -> String {
    let mut d = String::new();
    ring_d(&mut d, ring);
    d
}

fn header(out: &mut String, layout: &ZoneLayout, title: &str) {
    let b = &layout.board;
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}mm\" height=\"{h}mm\" viewBox=\"0 0 {w} {h}\">",
        w = num(b.width),
        h = num(b.height)
    );
    let _ = writeln!(out, "<title>{title}</title>");
}

fn outline(out: &mut String, layout: &ZoneLayout) {
    let b = &layout.board;
    let ring = [
        Point::new(0.0, 0.0),
        Point::new(b.width, 0.0),
        Point::new(b.width, b.height),
        Point::new(0.0, b.height),
    ];
    let _ = writeln!(
        out,
        "<path id=\"board-outline\" d=\"{}\" style=\"{CUT_STYLE}\"/>",
        path_data(&ring)
    );
    out.push_str("</svg>\n");
}

fn registration_marks(out: &mut String, layout: &ZoneLayout) {
    let (w, h) = (layout.board.width, layout.board.height);
    let (inset, arm) = (0.5, 5.0);
    let corners = [
        (inset, inset, 1.0, 1.0),
        (w - inset, inset, -1.0, 1.0),
        (inset, h - inset, 1.0, -1.0),
    ];
    out.push_str("<g id=\"registration\" style=\"fill:none;stroke:#000;stroke-width:0.2\">\n");
    for (x, y, sx, sy) in corners {
        let _ = writeln!(
            out,
            "<path d=\"M {} {} L {} {} L {} {}\"/>",
            num(x),
            num(y + sy * arm),
            num(x),
            num(y),
            num(x + sx * arm),
            num(y)
        );
    }
    out.push_str("</g>\n");
}

/// Midpoint of the widest horizontal run through the polygon at its
/// vertical middle, which always lands inside the zone.
fn label_anchor(poly: &ZonePolygon) -> Option<Point> {
    let (lo, hi) = poly
        .outer
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.y), hi.max(p.y))
        });
    let y = (lo + hi) / 2.0;
    let mut xs = Vec::new();
    for ring in std::iter::once(&poly.outer).chain(&poly.holes) {
        for k in 0..ring.len() {
            let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
            if (a.y <= y) != (b.y <= y) {
                xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.chunks_exact(2)
        .max_by(|p, q| (p[1] - p[0]).total_cmp(&(q[1] - q[0])))
        .map(|c| Point::new((c[0] + c[1]) / 2.0, y))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn labels(out: &mut String, layout: &ZoneLayout, names: &[String]) {
    out.push_str("<g id=\"labels\" style=\"font-family:sans-serif;font-size:2px;text-anchor:middle;fill:#000\">\n");
    for (net, polys) in &layout.zones {
        let name = names
            .get(net.0 as usize)
            .cloned()
            .unwrap_or_else(|| format!("net {net}"));
        for p in polys.iter().filter_map(label_anchor) {
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{}\">{}</text>",
                num(p.x),
                num(p.y),
                escape(&name)
            );
        }
    }
    out.push_str("</g>\n");
}

/// Blade paths: one closed stroke per zone boundary ring, then the board outline.
pub fn export_cut_svg(layout: &ZoneLayout, opts: &ExportOptions) -> Result<String, ExportError> {
    if opts.mode != ExportMode::Cut {
        return Err(ExportError::ModeMismatch {
            expected: "cut",
            got: opts.mode.as_str(),
        });
    }
    let mut out = String::new();
    header(&mut out, layout, "cut paths");
    for ring in &layout.cut_paths {
        let _ = writeln!(
            out,
            "<path d=\"{}\" style=\"{CUT_STYLE}\"/>",
            path_data(ring)
        );
    }
    if opts.include_labels {
        labels(&mut out, layout, &opts.net_names);
    }
    if opts.include_registration_marks {
        registration_marks(&mut out, layout);
    }
    outline(&mut out, layout);
    Ok(out)
}

/// Print template for the tape-and-foil workflow. Zones are filled, each cut
/// ring becomes a white tape corridor of width `t` and a dashed guide along
/// the same polyline the cutter would follow.
pub fn export_finetape_svg(
    layout: &ZoneLayout,
    opts: &ExportOptions,
) -> Result<String, ExportError> {
    if opts.mode != ExportMode::FineTape {
        return Err(ExportError::ModeMismatch {
            expected: "finetape",
            got: opts.mode.as_str(),
        });
    }
    let t = opts.tape_width;
    if !(t > 0.0) || !t.is_finite() {
        return Err(ExportError::BadTapeWidth(t));
    }
    if (t - layout.board.gap).abs() > 1e-9 {
        return Err(ExportError::TapeWidthMismatch {
            tape: t,
            gap: layout.board.gap,
        });
    }
    let mut out = String::new();
    header(&mut out, layout, "fine-tape template");
    let _ = writeln!(out, "<desc>{PEELABLE_WARNING}</desc>");
    let _ = writeln!(
        out,
        "<g id=\"zones\" style=\"fill:{ZONE_FILL};fill-rule:evenodd;stroke:none\">"
    );
    for polys in layout.zones.values() {
        for poly in polys {
            let mut d = String::new();
            ring_d(&mut d, &poly.outer);
            for h in &poly.holes {
                ring_d(&mut d, h);
            }
            let _ = writeln!(out, "<path d=\"{d}\"/>");
        }
    }
    out.push_str("</g>\n");
    let _ = writeln!(
        out,
        "<g id=\"tape-corridors\" style=\"fill:none;stroke:#fff;stroke-width:{};stroke-linejoin:miter\">",
        num(t)
    );
    for ring in &layout.cut_paths {
        let _ = writeln!(out, "<path d=\"{}\"/>", path_data(ring));
    }
    out.push_str("</g>\n");
    out.push_str(
        "<g id=\"tape-guides\" style=\"fill:none;stroke:#000;stroke-width:0.1;stroke-dasharray:1,1\">\n",
    );
    for ring in &layout.cut_paths {
        let _ = writeln!(out, "<path d=\"{}\"/>", path_data(ring));
    }
    out.push_str("</g>\n");
    if opts.include_labels {
        labels(&mut out, layout, &opts.net_names);
    }
    if opts.include_registration_marks {
        registration_marks(&mut out, layout);
    }
    outline(&mut out, layout);
    Ok(out)
}

const PALETTE: [[u8; 3]; 12] = [
    [230, 126, 34],
    [41, 128, 185],
    [39, 174, 96],
    [192, 57, 43],
    [142, 68, 173],
    [241, 196, 15],
    [22, 160, 133],
    [211, 84, 0],
    [52, 73, 94],
    [236, 112, 160],
    [127, 140, 141],
    [160, 110, 60],
];
pub const GAP_COLOR: [u8; 3] = [255, 255, 255];
pub const OUTSIDE_COLOR: [u8; 3] = [160, 160, 160];

pub fn net_color(net: NetId) -> [u8; 3] {
    PALETTE[net.0 as usize % PALETTE.len()]
}

pub fn zone_color(z: Zone) -> [u8; 3] {
    match z {
        Zone::Net(n) => net_color(n),
        Zone::Gap => GAP_COLOR,
        Zone::Outside => OUTSIDE_COLOR,
    }
}

/// RGB PNG, one pixel per cell, row 0 at the top.
pub fn export_zone_preview(z: &ZoneMap) -> Vec<u8> {
    let mut data = Vec::with_capacity(z.cells.len() * 3);
    for &c in z.cells.cells() {
        data.extend_from_slice(&zone_color(c));
    }
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, z.nx() as u32, z.ny() as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("png header into memory");
        w.write_image_data(&data).expect("png body into memory");
    }
    bytes
}
