//! Browser bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; failures come back as `{"error": ...}`
//! so the same functions run natively under `cargo test`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;
use zonecut_core::board::Board;
use zonecut_core::drc::explain_violation;
use zonecut_core::export::{export_cut_svg, export_finetape_svg, ExportOptions};
use zonecut_core::footprint::FootprintLibrary;
use zonecut_core::netmodel::{parse_netlist_xml, parse_trace_layer, DEFAULT_NET_ATTR};
use zonecut_core::pipeline::{compile_netlist, compile_traces, Compiled};
use zonecut_core::placement::{auto_place, load_placement};

fn board(width: f64, height: f64, gap: f64) -> Result<Board, String> {
    let d = Board::default();
    Board {
        width,
        height,
        gap,
        min_feature: d.min_feature.max(gap),
        ..d
    }
    .validated()
    .map_err(|e| e.to_string())
}

fn to_json(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// The preview is drawn whatever the DRC outcome; the cut file only for clean layouts.
fn summary(c: &Compiled) -> Result<Value, String> {
    let mut preview_opts = ExportOptions::fine_tape(c.layout.board.gap);
    preview_opts.include_labels = true;
    preview_opts.net_names = c.net_names.clone();
    let preview = export_finetape_svg(&c.layout, &preview_opts).map_err(|e| e.to_string())?;
    let cut = if c.is_clean() {
        let mut opts = ExportOptions::cut();
        opts.net_names = c.net_names.clone();
        Some(export_cut_svg(&c.layout, &opts).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let mut problems: Vec<String> = c.drc.violations.iter().map(explain_violation).collect();
    problems.extend(c.mismatches.iter().map(|m| format!("connectivity: {m}")));
    Ok(json!({
        "pass": c.is_clean(),
        "zones": c.layout.zones.len(),
        "warnings": c.warnings,
        "problems": problems,
        "report": c.drc.to_text(),
        "preview_svg": preview,
        "cut_svg": cut,
    }))
}

fn convert_netlist_inner(
    xml: &str,
    placement: &str,
    width: f64,
    height: f64,
    gap: f64,
) -> Result<Value, String> {
    let b = board(width, height, gap)?;
    let n = parse_netlist_xml(xml).map_err(|e| e.to_string())?;
    let p = load_placement(placement, &n).map_err(|e| e.to_string())?;
    let c = compile_netlist(&n, &FootprintLibrary::builtin(), &b, &p, false)
        .map_err(|e| e.to_string())?;
    summary(&c)
}

fn auto_place_inner(
    xml: &str,
    width: f64,
    height: f64,
    gap: f64,
    seed: u64,
) -> Result<Value, String> {
    let b = board(width, height, gap)?;
    let n = parse_netlist_xml(xml).map_err(|e| e.to_string())?;
    let p = auto_place(&n, &FootprintLibrary::builtin(), &b, seed).map_err(|e| e.to_string())?;
    Ok(json!({ "placement": p.to_text() }))
}

fn convert_traces_inner(svg: &str, gap: f64) -> Result<Value, String> {
    let layer = parse_trace_layer(svg, DEFAULT_NET_ATTR).map_err(|e| e.to_string())?;
    let d = Board::default();
    let (w, h) = layer.size.unwrap_or((d.width, d.height));
    let b = board(w, h, gap)?;
    let c = compile_traces(&layer, &b).map_err(|e| e.to_string())?;
    summary(&c)
}

/// Netlist XML plus placement text to zones on a `width` x `height` mm board.
#[wasm_bindgen]
pub fn convert_netlist(xml: &str, placement: &str, width: f64, height: f64, gap: f64) -> String {
    to_json(convert_netlist_inner(xml, placement, width, height, gap))
}

/// Annealed placement, returned as placement-file text under `placement`.
#[wasm_bindgen]
pub fn place(xml: &str, width: f64, height: f64, gap: f64, seed: u32) -> String {
    to_json(auto_place_inner(xml, width, height, gap, seed as u64))
}

/// Trace-layer SVG to zones; the board takes the SVG's size.
#[wasm_bindgen]
pub fn convert_traces(svg: &str, gap: f64) -> String {
    to_json(convert_traces_inner(svg, gap))
}

#[cfg(test)]
mod tests {
    use super::*;

    const RGB_XML: &str = include_str!("../../core/fixtures/rgb_led.xml");
    const RGB_PLACE: &str = include_str!("../../core/fixtures/rgb_led.place");
    const TRACES: &str = include_str!("../../core/fixtures/two_traces.svg");
    const CLOSE: &str = include_str!("../../core/fixtures/close_traces.svg");

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn netlist_converts() {
        let v = parse(convert_netlist(RGB_XML, RGB_PLACE, 100.0, 70.0, 1.0));
        assert_eq!(v["pass"], true, "{v}");
        assert_eq!(v["zones"], 5);
        assert!(v["cut_svg"].as_str().unwrap().contains("board-outline"));
        assert!(v["preview_svg"]
            .as_str()
            .unwrap()
            .contains("tape-corridors"));
    }

    #[test]
    fn placement_text_loads_back() {
        let v = parse(place(RGB_XML, 100.0, 70.0, 1.0, 4));
        let text = v["placement"].as_str().unwrap();
        let n = parse_netlist_xml(RGB_XML).unwrap();
        assert_eq!(load_placement(text, &n).unwrap().iter().count(), 5);
        let again = parse(convert_netlist(RGB_XML, text, 100.0, 70.0, 1.0));
        assert!(again["error"].is_null(), "{again}");
    }

    #[test]
    fn traces_convert_or_report() {
        let ok = parse(convert_traces(TRACES, 1.0));
        assert_eq!(ok["pass"], true, "{ok}");
        let bad = parse(convert_traces(CLOSE, 1.0));
        assert!(bad["error"].as_str().unwrap().contains("closer than"));
        let junk = parse(convert_traces("<svg", 1.0));
        assert!(junk["error"].is_string());
    }

    #[test]
    fn bad_board_is_an_error() {
        let v = parse(convert_netlist(RGB_XML, RGB_PLACE, 100.0, 70.0, -1.0));
        assert!(v["error"].is_string());
    }
}
