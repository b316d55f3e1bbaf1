//! Project configuration: a TOML file merged under command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;
use zonecut_core::board::Board;
use zonecut_core::export::{ExportMode, ExportOptions};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub netlist: Option<PathBuf>,
    pub placement: Option<PathBuf>,
    #[serde(default)]
    pub lib: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub board: BoardSection,
    #[serde(default)]
    pub export: ExportSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardSection {
    pub width: Option<f64>,
    pub height: Option<f64>,
    pub margin: Option<f64>,
    pub resolution: Option<f64>,
    pub gap: Option<f64>,
    pub min_feature: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportSection {
    pub mode: Option<String>,
    pub tape_width: Option<f64>,
    #[serde(default)]
    pub labels: bool,
    #[serde(default)]
    pub registration_marks: bool,
}

impl FileConfig {
    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.netlist.as_mut().map(fix);
        cfg.placement.as_mut().map(fix);
        cfg.out.as_mut().map(fix);
        cfg.lib.iter_mut().for_each(fix);
        Ok(cfg)
    }
}

fn parse_board_size(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH in mm, got `{s}`"))?;
    let w: f64 = w.trim().parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: f64 = h.trim().parse().map_err(|_| format!("bad height `{h}`"))?;
    Ok((w, h))
}

/// Board, export and output flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML project file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Board size in mm, e.g. 100x70.
    #[arg(long, value_parser = parse_board_size, global = true)]
    pub board: Option<(f64, f64)>,
    /// Raster cell size in mm.
    #[arg(long, global = true)]
    pub resolution: Option<f64>,
    /// Width of the cut channel between zones, mm.
    #[arg(long, global = true)]
    pub gap: Option<f64>,
    /// Narrowest zone that survives weeding, mm.
    #[arg(long, global = true)]
    pub min_feature: Option<f64>,
    /// Border kept free of copper, mm.
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    /// cut or finetape.
    #[arg(long, global = true)]
    pub mode: Option<ExportMode>,
    /// Fine-tape width in mm (finetape mode).
    #[arg(long, global = true)]
    pub tape_width: Option<f64>,
    /// Add net names to the SVG.
    #[arg(long, global = true)]
    pub labels: bool,
    /// Add corner registration marks to the SVG.
    #[arg(long, global = true)]
    pub registration_marks: bool,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also write the zone map dump.
    #[arg(long, global = true)]
    pub debug: bool,
    /// Treat netlist warnings as errors.
    #[arg(long, global = true)]
    pub strict: bool,
}

/// Flags and file values merged, flags first.
pub struct Resolved {
    pub file: FileConfig,
    pub board: Board,
    pub export: ExportOptions,
    pub out: PathBuf,
}

impl CommonArgs {
    pub fn file(&self) -> Result<FileConfig> {
        match &self.config {
            Some(p) => FileConfig::load(p),
            None => Ok(FileConfig::default()),
        }
    }

    /// `fallback_size` is used when neither flags nor config give a board size.
    pub fn resolve(&self, fallback_size: Option<(f64, f64)>) -> Result<Resolved> {
        let file = self.file()?;
        let fb = &file.board;
        let defaults = Board::default();
        let (dw, dh) = fallback_size.unwrap_or((defaults.width, defaults.height));
        let (width, height) = self
            .board
            .unwrap_or((fb.width.unwrap_or(dw), fb.height.unwrap_or(dh)));
        let explicit_gap = self.gap.or(fb.gap);
        let mode = match (self.mode, &file.export.mode) {
            (Some(m), _) => m,
            (None, Some(s)) => s.parse().map_err(anyhow::Error::msg)?,
            (None, None) => ExportMode::Cut,
        };
        let tape_width = self.tape_width.or(file.export.tape_width);
        let mut gap = explicit_gap.unwrap_or(defaults.gap);
        if mode == ExportMode::FineTape {
            if let (None, Some(t)) = (explicit_gap, tape_width) {
                gap = t;
            }
        }
        let board = Board {
            width,
            height,
            margin: self.margin.or(fb.margin).unwrap_or(defaults.margin),
            resolution: self
                .resolution
                .or(fb.resolution)
                .unwrap_or(defaults.resolution),
            gap,
            min_feature: self
                .min_feature
                .or(fb.min_feature)
                .unwrap_or(defaults.min_feature.max(gap)),
            simplify_tolerance: defaults.simplify_tolerance,
        }
        .validated()?;
        let export = ExportOptions {
            mode,
            tape_width: tape_width.unwrap_or(board.gap),
            include_labels: self.labels || file.export.labels,
            include_registration_marks: self.registration_marks || file.export.registration_marks,
            net_names: Vec::new(),
        };
        if export.mode == ExportMode::FineTape && !(export.tape_width > 0.0) {
            bail!("tape width must be positive, got {} mm", export.tape_width);
        }
        let out = self
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Resolved {
            file,
            board,
            export,
            out,
        })
    }
}
