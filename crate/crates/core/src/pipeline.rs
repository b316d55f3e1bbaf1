//! The conversion flow shared by the command line and the local service.

use thiserror::Error;

use crate::board::{Board, BoardError};
use crate::drc::{run_drc, DrcReport};
use crate::export::{export_cut_svg, export_finetape_svg, ExportError, ExportMode, ExportOptions};
use crate::footprint::{
    instantiate_pads, FootprintError, FootprintLibrary, InstantiateError, PadInstance,
};
use crate::netmodel::{validate_netlist, Issue, Netlist, ParseError, TraceError, TraceLayer};
use crate::partition::{
    carve_gaps, drop_islands, enforce_min_feature, geodesic_partition, rasterize_pads,
    rasterize_traces, trace_net_index, trace_partition_mismatches, vectorize, write_zone_dump,
    DumpError, PartitionError, SeedGrid, ZoneLayout, ZoneMap,
};
use crate::placement::{PlacementError, PlacementSet};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Board(#[from] BoardError),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Footprint(#[from] FootprintError),
    #[error("netlist cannot be linked: {}", join_issues(.0))]
    Issues(Vec<Issue>),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Instantiate(#[from] InstantiateError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

fn join_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Everything a conversion produces before files are written.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub seeds: SeedGrid,
    pub zones: ZoneMap,
    pub layout: ZoneLayout,
    pub drc: DrcReport,
    pub net_names: Vec<String>,
    pub pads: Vec<PadInstance>,
    /// Non-blocking netlist warnings.
    pub warnings: Vec<Issue>,
    /// Trace flow only: differences between trace blobs and output zones.
    pub mismatches: Vec<String>,
}

impl Compiled {
    /// Clean means the design rules pass and the trace nets survived intact.
    pub fn is_clean(&self) -> bool {
        self.drc.pass && self.mismatches.is_empty()
    }
}

/// Geodesic growth, gap carving, minimum-feature opening and island removal.
pub fn partition_seeds(seeds: &SeedGrid) -> Result<ZoneMap, PartitionError> {
    let labels = geodesic_partition(seeds)?;
    let carved = carve_gaps(&labels, seeds)?;
    let opened = enforce_min_feature(&carved, seeds)?;
    Ok(drop_islands(&opened, seeds))
}

pub fn compile_netlist(
    netlist: &Netlist,
    lib: &FootprintLibrary,
    board: &Board,
    placement: &PlacementSet,
    strict: bool,
) -> Result<Compiled, PipelineError> {
    let board = board.validated()?;
    let issues = validate_netlist(netlist, lib);
    if issues.iter().any(|i| strict || i.kind.is_blocking()) {
        let shown = issues
            .into_iter()
            .filter(|i| strict || i.kind.is_blocking())
            .collect();
        return Err(PipelineError::Issues(shown));
    }
    let pads = instantiate_pads(netlist, lib, placement)?;
    let seeds = rasterize_pads(&pads, &board)?;
    let zones = partition_seeds(&seeds)?;
    let layout = vectorize(&zones);
    let net_names = netlist.net_names();
    let drc = run_drc(&zones, &layout, &pads, &net_names);
    Ok(Compiled {
        seeds,
        zones,
        layout,
        drc,
        net_names,
        pads,
        warnings: issues,
        mismatches: Vec::new(),
    })
}

pub fn compile_traces(layer: &TraceLayer, board: &Board) -> Result<Compiled, PipelineError> {
    let board = board.validated()?;
    let index = trace_net_index(layer);
    let seeds = rasterize_traces(layer, &board, &index)?;
    let zones = partition_seeds(&seeds)?;
    let layout = vectorize(&zones);
    let net_names: Vec<String> = layer.nets.iter().map(|n| n.name.clone()).collect();
    let drc = run_drc(&zones, &layout, &[], &net_names);
    let mismatches = trace_partition_mismatches(&seeds, &zones);
    Ok(Compiled {
        seeds,
        zones,
        layout,
        drc,
        net_names,
        pads: Vec::new(),
        warnings: Vec::new(),
        mismatches,
    })
}

/// File contents for one conversion. SVGs are only produced for clean results.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub cut_svg: Option<String>,
    pub finetape_svg: Option<String>,
    pub drc_txt: String,
    pub zone_dump: Vec<u8>,
}

pub fn render(c: &Compiled, opts: &ExportOptions) -> Result<Artifacts, PipelineError> {
    let mut cut_svg = None;
    let mut finetape_svg = None;
    if c.is_clean() {
        let cut_opts = ExportOptions {
            mode: ExportMode::Cut,
            ..opts.clone()
        };
        cut_svg = Some(export_cut_svg(&c.layout, &cut_opts)?);
        if opts.mode == ExportMode::FineTape {
            finetape_svg = Some(export_finetape_svg(&c.layout, opts)?);
        }
    }
    Ok(Artifacts {
        cut_svg,
        finetape_svg,
        drc_txt: c.drc.to_text(),
        zone_dump: write_zone_dump(&c.zones.cells, c.zones.board.resolution)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::parse_netlist_xml;
    use crate::placement::load_placement;

    fn rgb() -> (Netlist, PlacementSet) {
        let n = parse_netlist_xml(include_str!("../fixtures/rgb_led.xml")).unwrap();
        let p = load_placement(include_str!("../fixtures/rgb_led.place"), &n).unwrap();
        (n, p)
    }

    #[test]
    fn rgb_fixture_is_clean() {
        let (n, p) = rgb();
        let c = compile_netlist(
            &n,
            &FootprintLibrary::builtin(),
            &Board::default(),
            &p,
            false,
        )
        .unwrap();
        assert!(c.drc.pass, "{}", c.drc.to_text());
        assert_eq!(c.layout.zones.len(), n.nets.len());
        assert!(c.layout.zones.values().all(|polys| polys.len() == 1));
        let files = render(&c, &ExportOptions::fine_tape(1.0)).unwrap();
        assert!(files.cut_svg.is_some() && files.finetape_svg.is_some());
    }

    #[test]
    fn unknown_footprint_is_blocking() {
        let (mut n, p) = rgb();
        n.parts[0].footprint_key = "nosuch".into();
        let err = compile_netlist(
            &n,
            &FootprintLibrary::builtin(),
            &Board::default(),
            &p,
            false,
        )
        .unwrap_err();
        assert!(err.to_string().contains("nosuch"), "{err}");
    }
}
