//! Trace-layer import: one copper layer exported from a PCB tool as SVG, with
//! each element tagged by a net attribute.

use std::str::FromStr;

use roxmltree::{Document, Node};
use svgtypes::{
    Length, LengthUnit, PointsParser, SimplePathSegment, SimplifyingPathParser, ViewBox,
};
use thiserror::Error;

use super::ParseError;
use crate::geom::Point;

pub const DEFAULT_NET_ATTR: &str = "data-net";

const CURVE_STEPS: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unit error: {0}")]
    Unit(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceGeometry {
    /// Stroked polyline; a single point with a width is a round dot.
    Stroke { points: Vec<Point>, width: f64 },
    /// Filled closed ring.
    Fill { ring: Vec<Point> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceNet {
    pub name: String,
    pub geometry: Vec<TraceGeometry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceLayer {
    /// Nets in order of first appearance.
    pub nets: Vec<TraceNet>,
    /// Geometry without a net attribute.
    pub unassigned: Vec<TraceGeometry>,
    pub warnings: Vec<String>,
    /// Document size in mm, when declared.
    pub size: Option<(f64, f64)>,
}

impl TraceLayer {
    pub fn net(&self, name: &str) -> Option<&TraceNet> {
        self.nets.iter().find(|n| n.name == name)
    }

    fn push(&mut self, net: Option<&str>, geom: TraceGeometry) {
        match net {
            None => self.unassigned.push(geom),
            Some(name) => match self.nets.iter_mut().find(|n| n.name == name) {
                Some(n) => n.geometry.push(geom),
                None => self.nets.push(TraceNet {
                    name: name.to_string(),
                    geometry: vec![geom],
                }),
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Affine([f64; 6]);

impl Affine {
    const IDENTITY: Affine = Affine([1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);

    /// `self` applied after `inner`.
    fn then(self, inner: Affine) -> Affine {
        let [a, b, c, d, e, f] = self.0;
        let [a2, b2, c2, d2, e2, f2] = inner.0;
        Affine([
            a * a2 + c * b2,
            b * a2 + d * b2,
            a * c2 + c * d2,
            b * c2 + d * d2,
            a * e2 + c * f2 + e,
            b * e2 + d * f2 + f,
        ])
    }

    fn apply(&self, x: f64, y: f64) -> Point {
        let [a, b, c, d, e, f] = self.0;
        Point::new(a * x + c * y + e, b * x + d * y + f)
    }

    fn scale(&self) -> f64 {
        let [a, b, c, d, ..] = self.0;
        (a * d - b * c).abs().sqrt()
    }
}

/// Parses an SVG trace layer into per-net geometry in mm.
pub fn parse_trace_layer(svg_text: &str, net_attr: &str) -> Result<TraceLayer, TraceError> {
    let doc = Document::parse(svg_text).map_err(|e| {
        let pos = e.pos();
        ParseError::at(e.to_string(), pos.row, pos.col)
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "svg" {
        return Err(error_at(&doc, root, "root element is not <svg>".into()).into());
    }
    let units = document_units(root);
    let mut layer = TraceLayer {
        size: units.as_ref().ok().map(|u| u.size),
        ..TraceLayer::default()
    };
    let mut ctx = Walk {
        doc: &doc,
        net_attr,
        units,
        layer: &mut layer,
    };
    ctx.walk(root, Affine::IDENTITY)?;
    if !layer.unassigned.is_empty() {
        layer.warnings.push(format!(
            "{} element(s) lack a `{}` attribute and were treated as keepout",
            layer.unassigned.len(),
            net_attr
        ));
    }
    Ok(layer)
}

struct DocUnits {
    size: (f64, f64),
    to_mm: Affine,
}

fn document_units(root: Node) -> Result<DocUnits, String> {
    let width = root.attribute("width").ok_or("<svg> has no width")?;
    let height = root.attribute("height").ok_or("<svg> has no height")?;
    let w = length_mm(width)?;
    let h = length_mm(height)?;
    let vb = root.attribute("viewBox").ok_or("<svg> has no viewBox")?;
    let vb = ViewBox::from_str(vb).map_err(|e| format!("bad viewBox `{vb}`: {e}"))?;
    if !(vb.w > 0.0 && vb.h > 0.0) {
        return Err(format!("degenerate viewBox {} {}", vb.w, vb.h));
    }
    let (sx, sy) = (w / vb.w, h / vb.h);
    Ok(DocUnits {
        size: (w, h),
        to_mm: Affine([sx, 0.0, 0.0, sy, -vb.x * sx, -vb.y * sy]),
    })
}

fn length_mm(text: &str) -> Result<f64, String> {
    let len = Length::from_str(text).map_err(|e| format!("bad length `{text}`: {e}"))?;
    let factor = match len.unit {
        LengthUnit::Mm => 1.0,
        LengthUnit::Cm => 10.0,
        LengthUnit::In => 25.4,
        other => {
            return Err(format!(
                "length `{text}` uses unit {other:?}, which has no fixed mm size"
            ))
        }
    };
    Ok(len.number * factor)
}

struct Walk<'a, 'input> {
    doc: &'a Document<'input>,
    net_attr: &'a str,
    units: Result<DocUnits, String>,
    layer: &'a mut TraceLayer,
}

impl Walk<'_, '_> {
    fn walk(&mut self, node: Node, parent: Affine) -> Result<(), TraceError> {
        let local = match node.attribute("transform") {
            Some(t) => {
                let t = svgtypes::Transform::from_str(t)
                    .map_err(|e| error_at(self.doc, node, format!("bad transform: {e}")))?;
                Affine([t.a, t.b, t.c, t.d, t.e, t.f])
            }
            None => Affine::IDENTITY,
        };
        let xf = parent.then(local);
        for child in node.children().filter(Node::is_element) {
            match child.tag_name().name() {
                "g" | "a" | "switch" => self.walk(child, xf)?,
                "defs" | "clipPath" | "mask" | "pattern" | "symbol" | "metadata" | "title"
                | "desc" => {}
                "path" | "line" | "polyline" | "polygon" | "rect" | "circle" => {
                    self.shape(child, xf)?;
                }
                other => self
                    .layer
                    .warnings
                    .push(format!("ignored unsupported element <{other}>")),
            }
        }
        Ok(())
    }

    fn shape(&mut self, node: Node, parent: Affine) -> Result<(), TraceError> {
        let to_mm = match &self.units {
            Ok(u) => u.to_mm,
            Err(msg) => return Err(TraceError::Unit(msg.clone())),
        };
        let local = match node.attribute("transform") {
            Some(t) => {
                let t = svgtypes::Transform::from_str(t)
                    .map_err(|e| error_at(self.doc, node, format!("bad transform: {e}")))?;
                Affine([t.a, t.b, t.c, t.d, t.e, t.f])
            }
            None => Affine::IDENTITY,
        };
        let xf = to_mm.then(parent).then(local);
        let net = inherited(node, self.net_attr);
        let fill = paint(node, "fill").is_none_or(|v| v != "none");
        let stroke = paint(node, "stroke").is_some_and(|v| v != "none");
        let stroke_width = paint(node, "stroke-width")
            .map(|w| parse_number(&w))
            .transpose()
            .map_err(|e| error_at(self.doc, node, e))?
            .unwrap_or(1.0)
            * xf.scale();

        let num = |name: &str| -> Result<f64, TraceError> {
            node.attribute(name)
                .map(parse_number)
                .transpose()
                .map_err(|e| error_at(self.doc, node, e).into())
                .map(|v| v.unwrap_or(0.0))
        };

        // Each subpath: (points in user units, closed).
        let mut subpaths: Vec<(Vec<(f64, f64)>, bool)> = Vec::new();
        let mut dot: Option<((f64, f64), f64)> = None;
        match node.tag_name().name() {
            "path" => {
                subpaths = flatten_path(node.attribute("d").unwrap_or_default())
                    .map_err(|e| error_at(self.doc, node, e))?;
            }
            "line" => {
                subpaths.push((
                    vec![(num("x1")?, num("y1")?), (num("x2")?, num("y2")?)],
                    false,
                ));
            }
            "polyline" | "polygon" => {
                let pts: Vec<(f64, f64)> =
                    PointsParser::from(node.attribute("points").unwrap_or_default()).collect();
                subpaths.push((pts, node.tag_name().name() == "polygon"));
            }
            "rect" => {
                let (x, y, w, h) = (num("x")?, num("y")?, num("width")?, num("height")?);
                subpaths.push((vec![(x, y), (x + w, y), (x + w, y + h), (x, y + h)], true));
            }
            "circle" => {
                dot = Some(((num("cx")?, num("cy")?), num("r")?));
            }
            _ => unreachable!(),
        }

        if let Some(((cx, cy), r)) = dot {
            let c = xf.apply(cx, cy);
            let mut width = 0.0;
            if fill {
                width = 2.0 * r * xf.scale();
            }
            if stroke {
                width = width.max(2.0 * r * xf.scale() + stroke_width);
            }
            if width > 0.0 {
                self.layer.push(
                    net.as_deref(),
                    TraceGeometry::Stroke {
                        points: vec![c],
                        width,
                    },
                );
            }
            return Ok(());
        }

        for (pts, closed) in subpaths {
            if pts.is_empty() {
                continue;
            }
            let pts: Vec<Point> = pts.iter().map(|&(x, y)| xf.apply(x, y)).collect();
            if fill && pts.len() >= 3 {
                self.layer
                    .push(net.as_deref(), TraceGeometry::Fill { ring: pts.clone() });
            }
            if stroke && stroke_width > 0.0 {
                let mut line = pts;
                if closed && line.len() > 2 {
                    line.push(line[0]);
                }
                self.layer.push(
                    net.as_deref(),
                    TraceGeometry::Stroke {
                        points: line,
                        width: stroke_width,
                    },
                );
            }
        }
        Ok(())
    }
}

/// Attribute or `style` property, looked up on the node and its ancestors.
fn paint(node: Node, name: &str) -> Option<String> {
    for n in node.ancestors().filter(Node::is_element) {
        if let Some(style) = n.attribute("style") {
            for decl in style.split(';') {
                if let Some((k, v)) = decl.split_once(':') {
                    if k.trim() == name {
                        return Some(v.trim().to_string());
                    }
                }
            }
        }
        if let Some(v) = n.attribute(name) {
            return Some(v.trim().to_string());
        }
    }
    None
}

fn inherited(node: Node, attr: &str) -> Option<String> {
    node.ancestors()
        .filter(Node::is_element)
        .find_map(|n| n.attribute(attr))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}

fn parse_number(text: &str) -> Result<f64, String> {
    let len = Length::from_str(text).map_err(|e| format!("bad number `{text}`: {e}"))?;
    match len.unit {
        LengthUnit::None | LengthUnit::Px => Ok(len.number),
        _ => Err(format!(
            "`{text}`: units inside the drawing are not supported"
        )),
    }
}

fn flatten_path(d: &str) -> Result<Vec<(Vec<(f64, f64)>, bool)>, String> {
    let mut out: Vec<(Vec<(f64, f64)>, bool)> = Vec::new();
    let mut current: Vec<(f64, f64)> = Vec::new();
    let mut closed = false;
    for seg in SimplifyingPathParser::from(d) {
        let seg = seg.map_err(|e| format!("bad path data: {e}"))?;
        let last = current.last().copied().unwrap_or((0.0, 0.0));
        match seg {
            SimplePathSegment::MoveTo { x, y } => {
                if !current.is_empty() {
                    out.push((std::mem::take(&mut current), closed));
                }
                closed = false;
                current.push((x, y));
            }
            SimplePathSegment::LineTo { x, y } => current.push((x, y)),
            SimplePathSegment::CurveTo {
                x1,
                y1,
                x2,
                y2,
                x,
                y,
            } => {
                for k in 1..=CURVE_STEPS {
                    let t = k as f64 / CURVE_STEPS as f64;
                    let u = 1.0 - t;
                    let (a, b, c, e) = (u * u * u, 3.0 * u * u * t, 3.0 * u * t * t, t * t * t);
                    current.push((
                        a * last.0 + b * x1 + c * x2 + e * x,
                        a * last.1 + b * y1 + c * y2 + e * y,
                    ));
                }
            }
            SimplePathSegment::Quadratic { x1, y1, x, y } => {
                for k in 1..=CURVE_STEPS {
                    let t = k as f64 / CURVE_STEPS as f64;
                    let u = 1.0 - t;
                    current.push((
                        u * u * last.0 + 2.0 * u * t * x1 + t * t * x,
                        u * u * last.1 + 2.0 * u * t * y1 + t * t * y,
                    ));
                }
            }
            SimplePathSegment::ClosePath => {
                closed = true;
                if current.len() > 1 && current.first() == current.last() {
                    current.pop();
                }
            }
        }
    }
    if !current.is_empty() {
        out.push((current, closed));
    }
    Ok(out)
}

fn error_at(doc: &Document, node: Node, message: String) -> ParseError {
    let pos = doc.text_pos_at(node.range().start);
    ParseError::at(message, pos.row, pos.col)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = r#"<svg xmlns="http://www.w3.org/2000/svg" width="40mm" height="20mm" viewBox="0 0 40 20">"#;

    #[test]
    fn two_tagged_paths() {
        let svg = format!(
            r##"{HEADER}
              <path data-net="VCC" d="M 5 5 L 35 5" fill="none" stroke="#000" stroke-width="1"/>
              <path data-net="GND" d="M 5 15 L 35 15" fill="none" stroke="#000" stroke-width="1"/>
            </svg>"##
        );
        let layer = parse_trace_layer(&svg, DEFAULT_NET_ATTR).unwrap();
        assert_eq!(layer.nets.len(), 2);
        assert_eq!(layer.nets[0].name, "VCC");
        assert_eq!(layer.nets[1].geometry.len(), 1);
        assert_eq!(
            layer.nets[1].geometry[0],
            TraceGeometry::Stroke {
                points: vec![Point::new(5.0, 15.0), Point::new(35.0, 15.0)],
                width: 1.0
            }
        );
        assert_eq!(layer.size, Some((40.0, 20.0)));
        assert!(layer.warnings.is_empty());
    }

    #[test]
    fn empty_svg() {
        let layer = parse_trace_layer(
            r#"<svg xmlns="http://www.w3.org/2000/svg"/>"#,
            DEFAULT_NET_ATTR,
        )
        .unwrap();
        assert!(layer.nets.is_empty() && layer.unassigned.is_empty());
    }

    #[test]
    fn untagged_geometry_is_unassigned() {
        let svg = format!(r#"{HEADER}<path d="M 1 1 L 4 1" fill="none" stroke="black"/></svg>"#);
        let layer = parse_trace_layer(&svg, DEFAULT_NET_ATTR).unwrap();
        assert!(layer.nets.is_empty());
        assert_eq!(layer.unassigned.len(), 1);
        assert_eq!(layer.warnings.len(), 1);
    }

    #[test]
    fn pixel_document_is_unit_error() {
        let svg = r#"<svg xmlns="http://www.w3.org/2000/svg" width="400" height="200" viewBox="0 0 400 200">
            <path data-net="A" d="M 1 1 L 4 1" stroke="black"/></svg>"#;
        assert!(matches!(
            parse_trace_layer(svg, DEFAULT_NET_ATTR),
            Err(TraceError::Unit(_))
        ));
    }

    #[test]
    fn invalid_xml_is_parse_error() {
        assert!(matches!(
            parse_trace_layer("<svg><path></svg>", DEFAULT_NET_ATTR),
            Err(TraceError::Parse(_))
        ));
    }

    #[test]
    fn viewbox_scale_group_transform_and_inherited_net() {
        let svg = r#"<svg xmlns="http://www.w3.org/2000/svg" width="2cm" height="1cm" viewBox="0 0 200 100">
            <g data-net="SIG" transform="translate(10,0)" style="fill:none;stroke:#000;stroke-width:10">
              <polyline points="0,50 100,50"/>
              <rect x="20" y="20" width="10" height="10" style="fill:#f00;stroke:none"/>
            </g></svg>"#;
        let layer = parse_trace_layer(svg, DEFAULT_NET_ATTR).unwrap();
        let net = layer.net("SIG").unwrap();
        assert_eq!(
            net.geometry[0],
            TraceGeometry::Stroke {
                points: vec![Point::new(1.0, 5.0), Point::new(11.0, 5.0)],
                width: 1.0
            }
        );
        match &net.geometry[1] {
            TraceGeometry::Fill { ring } => assert_eq!(ring[0], Point::new(3.0, 2.0)),
            g => panic!("unexpected {g:?}"),
        }
    }

    #[test]
    fn custom_attribute_and_curves() {
        let svg = format!(
            r##"{HEADER}<path net="N1" d="M 0 0 Q 10 10 20 0" fill="none" stroke="#000" stroke-width="0.5"/></svg>"##
        );
        let layer = parse_trace_layer(&svg, "net").unwrap();
        match &layer.nets[0].geometry[0] {
            TraceGeometry::Stroke { points, .. } => {
                assert_eq!(points.len(), CURVE_STEPS + 1);
                assert_eq!(*points.last().unwrap(), Point::new(20.0, 0.0));
            }
            g => panic!("unexpected {g:?}"),
        }
    }
}
