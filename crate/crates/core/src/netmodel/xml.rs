use std::collections::{HashMap, HashSet};

use roxmltree::{Document, Node};

use super::{Net, Netlist, ParseError, Part, PinRef};
use crate::grid::NetId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject connectors that reference parts not declared at the top level.
    pub strict: bool,
}

/// Parses netlist XML in lenient mode.
pub fn parse_netlist_xml(xml_text: &str) -> Result<Netlist, ParseError> {
    parse_netlist_xml_with(xml_text, ParseOptions::default())
}

pub fn parse_netlist_xml_with(xml_text: &str, opts: ParseOptions) -> Result<Netlist, ParseError> {
    let doc = Document::parse(xml_text).map_err(|e| {
        let pos = e.pos();
        ParseError::at(e.to_string(), pos.row, pos.col)
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "netlist" {
        return Err(error_at(
            &doc,
            root,
            format!(
                "expected root element <netlist>, found <{}>",
                root.tag_name().name()
            ),
        ));
    }

    let mut parts = PartTable::default();
    for child in root.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "part" => {
                parts.declare(&doc, child)?;
            }
            "parts" => {
                for p in child.children().filter(|n| n.has_tag_name("part")) {
                    parts.declare(&doc, p)?;
                }
            }
            _ => {}
        }
    }
    let declared: HashSet<String> = parts.parts.iter().map(|p| p.id.clone()).collect();

    let mut nets = Vec::new();
    let mut owner: HashMap<(String, u32), String> = HashMap::new();
    for net_node in root.children().filter(|n| n.has_tag_name("net")) {
        let name = net_node
            .attribute("name")
            .map(str::to_string)
            .unwrap_or_else(|| format!("net{}", nets.len()));
        let mut pins: Vec<PinRef> = Vec::new();
        for conn in net_node.children().filter(|n| n.has_tag_name("connector")) {
            let conn_id = conn
                .attribute("id")
                .ok_or_else(|| error_at(&doc, conn, "connector without `id`".into()))?;
            let pin = connector_pin(conn_id).ok_or_else(|| {
                error_at(
                    &doc,
                    conn,
                    format!("connector id `{conn_id}` has no trailing pin index"),
                )
            })?;
            let part_node = conn
                .children()
                .find(|n| n.has_tag_name("part"))
                .ok_or_else(|| {
                    error_at(&doc, conn, format!("connector `{conn_id}` has no <part>"))
                })?;
            let part_id = if opts.strict {
                let id = part_node.attribute("id").unwrap_or_default();
                if !declared.contains(id) {
                    return Err(error_at(
                        &doc,
                        part_node,
                        format!("connector references undeclared part `{id}`"),
                    ));
                }
                id.to_string()
            } else {
                parts.declare(&doc, part_node)?
            };
            let pin_ref = PinRef { part_id, pin };
            if pins.contains(&pin_ref) {
                continue;
            }
            if let Some(other) = owner.get(&(pin_ref.part_id.clone(), pin)) {
                return Err(error_at(
                    &doc,
                    conn,
                    format!(
                        "pin {} of `{}` appears in nets `{}` and `{}`",
                        pin, pin_ref.part_id, other, name
                    ),
                ));
            }
            owner.insert((pin_ref.part_id.clone(), pin), name.clone());
            pins.push(pin_ref);
        }
        if pins.is_empty() {
            continue;
        }
        nets.push(Net {
            id: NetId(nets.len() as u32),
            name,
            pins,
        });
    }

    for (part, pos) in parts.parts.iter().zip(&parts.positions) {
        if part.footprint_key.is_empty() {
            return Err(ParseError::at(
                format!("part `{}` declares no footprint", part.id),
                pos.0,
                pos.1,
            ));
        }
    }
    Ok(Netlist {
        parts: parts.parts,
        nets,
    })
}

#[derive(Default)]
struct PartTable {
    parts: Vec<Part>,
    positions: Vec<(u32, u32)>,
    index: HashMap<String, usize>,
}

impl PartTable {
    /// Declares or merges a `<part>` element; repeated declarations collapse.
    fn declare(&mut self, doc: &Document, node: Node) -> Result<String, ParseError> {
        let id = node.attribute("id").unwrap_or_default().trim();
        if id.is_empty() {
            return Err(error_at(doc, node, "part without `id`".into()));
        }
        let footprint = node.attribute("footprint").unwrap_or_default().trim();
        let label = node.attribute("label").unwrap_or_default();
        let label = if label.trim().is_empty() { "" } else { label };
        match self.index.get(id) {
            Some(&i) => {
                let part = &mut self.parts[i];
                if !footprint.is_empty() {
                    if part.footprint_key.is_empty() {
                        part.footprint_key = footprint.to_string();
                    } else if part.footprint_key != footprint {
                        return Err(error_at(
                            doc,
                            node,
                            format!(
                                "part `{}` declared with footprints `{}` and `{}`",
                                id, part.footprint_key, footprint
                            ),
                        ));
                    }
                }
                if part.label.is_empty() {
                    part.label = label.to_string();
                }
            }
            None => {
                let pos = doc.text_pos_at(node.range().start);
                self.index.insert(id.to_string(), self.parts.len());
                self.parts.push(Part {
                    id: id.to_string(),
                    footprint_key: footprint.to_string(),
                    label: label.to_string(),
                });
                self.positions.push((pos.row, pos.col));
            }
        }
        Ok(id.to_string())
    }
}

/// `connector0` is pin 1.
fn connector_pin(id: &str) -> Option<u32> {
    let digits = id.len() - id.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    id[id.len() - digits..].parse::<u32>().ok()?.checked_add(1)
}

fn error_at(doc: &Document, node: Node, message: String) -> ParseError {
    let pos = doc.text_pos_at(node.range().start);
    ParseError::at(message, pos.row, pos.col)
}
