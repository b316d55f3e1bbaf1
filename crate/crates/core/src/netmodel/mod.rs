//! Circuit model: parts, nets, and pin memberships, plus the importers that
//! build it from netlist XML and from a vector trace layer.

mod trace;
mod xml;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::footprint::FootprintLibrary;
use crate::grid::NetId;

pub use trace::{
    parse_trace_layer, TraceError, TraceGeometry, TraceLayer, TraceNet, DEFAULT_NET_ATTR,
};
pub use xml::{parse_netlist_xml, parse_netlist_xml_with, ParseOptions};

/// Malformed input, with a 1-based position when one is known.
#[derive(Debug, Clone, Error, PartialEq)]
pub struct ParseError {
    pub message: String,
    pub line: Option<u32>,
    pub column: Option<u32>,
}

impl ParseError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            line: None,
            column: None,
        }
    }

    pub fn at(message: impl Into<String>, line: u32, column: u32) -> Self {
        Self {
            message: message.into(),
            line: Some(line),
            column: Some(column),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{}: {}", l, c, self.message),
            (Some(l), None) => write!(f, "line {}: {}", l, self.message),
            _ => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Part {
    pub id: String,
    pub footprint_key: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PinRef {
    pub part_id: String,
    /// 1-based footprint pin.
    pub pin: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Net {
    pub id: NetId,
    pub name: String,
    pub pins: Vec<PinRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Netlist {
    pub parts: Vec<Part>,
    pub nets: Vec<Net>,
}

impl Netlist {
    pub fn part(&self, id: &str) -> Option<&Part> {
        self.parts.iter().find(|p| p.id == id)
    }

    pub fn net_name(&self, id: NetId) -> Option<&str> {
        self.nets.get(id.0 as usize).map(|n| n.name.as_str())
    }

    pub fn net_names(&self) -> Vec<String> {
        self.nets.iter().map(|n| n.name.clone()).collect()
    }

    /// `(part_id, pin) -> net` lookup.
    pub fn pin_nets(&self) -> HashMap<(&str, u32), NetId> {
        let mut map = HashMap::new();
        for net in &self.nets {
            for p in &net.pins {
                map.insert((p.part_id.as_str(), p.pin), net.id);
            }
        }
        map
    }

    /// Serializes to the accepted netlist XML schema, with every part declared
    /// up front. Parsing the output yields an equal `Netlist`.
    pub fn to_xml(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<netlist>\n");
        for p in &self.parts {
            out.push_str(&format!(
                "  <part id=\"{}\" footprint=\"{}\" label=\"{}\"/>\n",
                escape(&p.id),
                escape(&p.footprint_key),
                escape(&p.label)
            ));
        }
        for net in &self.nets {
            out.push_str(&format!("  <net name=\"{}\">\n", escape(&net.name)));
            for pin in &net.pins {
                out.push_str(&format!(
                    "    <connector id=\"connector{}\">\n      <part id=\"{}\"/>\n    </connector>\n",
                    pin.pin - 1,
                    escape(&pin.part_id)
                ));
            }
            out.push_str("  </net>\n");
        }
        out.push_str("</netlist>\n");
        out
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueKind {
    UnknownFootprint,
    PinOutOfRange,
    SinglePinNet,
    UnconnectedPart,
}

impl IssueKind {
    /// Blocking issues prevent pad instantiation; the rest are warnings.
    pub fn is_blocking(self) -> bool {
        matches!(self, IssueKind::UnknownFootprint | IssueKind::PinOutOfRange)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = if self.kind.is_blocking() {
            "error"
        } else {
            "warning"
        };
        write!(f, "{level}: {}", self.message)
    }
}

/// Cross-checks a netlist against a footprint library. An empty result means
/// the netlist is fully linkable.
pub fn validate_netlist(netlist: &Netlist, lib: &FootprintLibrary) -> Vec<Issue> {
    let mut issues = Vec::new();
    for part in &netlist.parts {
        if lib.get(&part.footprint_key).is_none() {
            issues.push(Issue {
                kind: IssueKind::UnknownFootprint,
                subject: part.id.clone(),
                message: format!(
                    "part `{}` uses unknown footprint `{}`",
                    part.id, part.footprint_key
                ),
            });
        }
    }
    let mut connected = BTreeSet::new();
    for net in &netlist.nets {
        for pin in &net.pins {
            connected.insert(pin.part_id.as_str());
            let Some(part) = netlist.part(&pin.part_id) else {
                continue;
            };
            if let Some(fp) = lib.get(&part.footprint_key) {
                if pin.pin as usize > fp.pad_count() {
                    issues.push(Issue {
                        kind: IssueKind::PinOutOfRange,
                        subject: format!("{}.{}", pin.part_id, pin.pin),
                        message: format!(
                            "net `{}` uses pin {} of `{}` but footprint `{}` has {} pads",
                            net.name,
                            pin.pin,
                            pin.part_id,
                            fp.key,
                            fp.pad_count()
                        ),
                    });
                }
            }
        }
        if net.pins.len() == 1 {
            issues.push(Issue {
                kind: IssueKind::SinglePinNet,
                subject: net.name.clone(),
                message: format!("net `{}` connects a single pin", net.name),
            });
        }
    }
    for part in &netlist.parts {
        if !connected.contains(part.id.as_str()) {
            issues.push(Issue {
                kind: IssueKind::UnconnectedPart,
                subject: part.id.clone(),
                message: format!("part `{}` is not connected to any net", part.id),
            });
        }
    }
    issues
}
