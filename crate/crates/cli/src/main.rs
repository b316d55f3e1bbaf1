mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use zonecut_core::board::Board;
use zonecut_core::drc::run_drc;
use zonecut_core::export::PEELABLE_WARNING;
use zonecut_core::footprint::FootprintLibrary;
use zonecut_core::netmodel::{
    parse_netlist_xml_with, parse_trace_layer, Netlist, ParseOptions, DEFAULT_NET_ATTR,
};
use zonecut_core::partition::{read_zone_dump, vectorize, PartitionError, ZoneMap};
use zonecut_core::pipeline::{compile_netlist, compile_traces, render, Compiled, PipelineError};
use zonecut_core::placement::{auto_place, load_placement, placement_cost, PlacementSet};

use config::CommonArgs;

#[derive(Parser)]
#[command(
    name = "zonecut",
    version,
    about = "Turn netlists and trace layers into cut-ready conductive zone layouts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Netlist plus placement to zones, DRC report and cut files.
    Convert {
        #[arg(long)]
        netlist: Option<PathBuf>,
        /// Placement file; auto-placed with --seed when absent.
        #[arg(long)]
        placement: Option<PathBuf>,
        /// Extra footprint library files, later ones shadow earlier ones.
        #[arg(long)]
        lib: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Trace-layer SVG to zones, checking that every net survives intact.
    TraceConvert {
        svg: PathBuf,
        #[arg(long, default_value = DEFAULT_NET_ATTR)]
        net_attr: String,
    },
    /// Automatic placement; writes placement.txt.
    Place {
        #[arg(long)]
        netlist: Option<PathBuf>,
        #[arg(long)]
        lib: Vec<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Design-rule check of a zone map dump.
    Check { dump: PathBuf },
    /// Serve the editor API on loopback.
    Serve {
        #[arg(long)]
        netlist: Option<PathBuf>,
        #[arg(long)]
        placement: Option<PathBuf>,
        #[arg(long)]
        lib: Vec<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8787)]
        port: u16,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// A run that completed but found problems (exit 1), as opposed to one that
/// could not complete (exit 2).
#[derive(Debug)]
struct RuleFailure;

impl std::fmt::Display for RuleFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("design rule violations")
    }
}

impl std::error::Error for RuleFailure {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<RuleFailure>() => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Convert {
            netlist,
            placement,
            lib,
            seed,
        } => convert(common, netlist, placement, lib, seed),
        Command::TraceConvert { svg, net_attr } => trace_convert(common, &svg, &net_attr),
        Command::Place { netlist, lib, seed } => place(common, netlist, lib, seed),
        Command::Check { dump } => check(common, &dump),
        Command::Serve {
            netlist,
            placement,
            lib,
            host,
            port,
            seed,
        } => serve(common, netlist, placement, lib, &host, port, seed),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Write to a temporary file next to `path`, then rename over it.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn library(paths: &[PathBuf]) -> Result<FootprintLibrary> {
    let mut lib = FootprintLibrary::builtin();
    for p in paths {
        lib.merge_file(&read(p)?)
            .with_context(|| format!("loading {}", p.display()))?;
    }
    Ok(lib)
}

fn load_netlist(path: &Path, strict: bool) -> Result<Netlist> {
    parse_netlist_xml_with(&read(path)?, ParseOptions { strict })
        .with_context(|| format!("parsing {}", path.display()))
}

struct Inputs {
    netlist: Netlist,
    lib: FootprintLibrary,
    placement: Option<PlacementSet>,
}

fn inputs(
    common: &CommonArgs,
    file: &config::FileConfig,
    netlist: Option<PathBuf>,
    placement: Option<PathBuf>,
    lib: Vec<PathBuf>,
) -> Result<Inputs> {
    let netlist_path = netlist
        .or_else(|| file.netlist.clone())
        .ok_or_else(|| anyhow!("no netlist given (--netlist or `netlist` in the config file)"))?;
    let netlist = load_netlist(&netlist_path, common.strict)?;
    let lib_paths: Vec<PathBuf> = file.lib.iter().cloned().chain(lib).collect();
    let lib = library(&lib_paths)?;
    let placement = match placement.or_else(|| file.placement.clone()) {
        Some(p) => Some(
            load_placement(&read(&p)?, &netlist)
                .with_context(|| format!("loading {}", p.display()))?,
        ),
        None => None,
    };
    Ok(Inputs {
        netlist,
        lib,
        placement,
    })
}

fn report_violations(c: &Compiled) {
    for v in &c.drc.violations {
        eprintln!("{}", zonecut_core::drc::explain_violation(v));
    }
    for m in &c.mismatches {
        eprintln!("connectivity: {m}");
    }
}

/// Writes drc.txt, the SVGs of a clean run and, with --debug, the dump.
fn write_outputs(
    common: &CommonArgs,
    out: &Path,
    c: &Compiled,
    opts: &zonecut_core::export::ExportOptions,
) -> Result<()> {
    let mut opts = opts.clone();
    opts.net_names = c.net_names.clone();
    let files = render(c, &opts)?;
    write_atomic(&out.join("drc.txt"), files.drc_txt.as_bytes())?;
    if let Some(svg) = &files.cut_svg {
        write_atomic(&out.join("cut.svg"), svg.as_bytes())?;
    }
    if let Some(svg) = &files.finetape_svg {
        write_atomic(&out.join("finetape.svg"), svg.as_bytes())?;
        eprintln!("warning: {PEELABLE_WARNING}");
    }
    if common.debug {
        write_atomic(&out.join("zonemap.zmap"), &files.zone_dump)?;
    }
    Ok(())
}

fn convert(
    common: &CommonArgs,
    netlist: Option<PathBuf>,
    placement: Option<PathBuf>,
    lib: Vec<PathBuf>,
    seed: u64,
) -> Result<()> {
    let cfg = common.resolve(None)?;
    let input = inputs(common, &cfg.file, netlist, placement, lib)?;
    let placement = match input.placement {
        Some(p) => p,
        None => {
            let p = auto_place(&input.netlist, &input.lib, &cfg.board, seed)?;
            write_atomic(&cfg.out.join("placement.txt"), p.to_text().as_bytes())?;
            p
        }
    };
    let c = compile_netlist(
        &input.netlist,
        &input.lib,
        &cfg.board,
        &placement,
        common.strict,
    )?;
    for w in &c.warnings {
        eprintln!("warning: {w}");
    }
    write_outputs(common, &cfg.out, &c, &cfg.export)?;
    if c.is_clean() {
        Ok(())
    } else {
        report_violations(&c);
        Err(RuleFailure.into())
    }
}

fn trace_convert(common: &CommonArgs, svg: &Path, net_attr: &str) -> Result<()> {
    let layer = parse_trace_layer(&read(svg)?, net_attr)
        .with_context(|| format!("parsing {}", svg.display()))?;
    for w in &layer.warnings {
        eprintln!("warning: {w}");
    }
    let cfg = common.resolve(layer.size)?;
    let c = match compile_traces(&layer, &cfg.board) {
        Ok(c) => c,
        Err(PipelineError::Partition(e @ PartitionError::PadClearanceViolation { .. })) => {
            eprintln!("{e}");
            return Err(RuleFailure.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_outputs(common, &cfg.out, &c, &cfg.export)?;
    if c.is_clean() {
        Ok(())
    } else {
        report_violations(&c);
        Err(RuleFailure.into())
    }
}

fn place(
    common: &CommonArgs,
    netlist: Option<PathBuf>,
    lib: Vec<PathBuf>,
    seed: u64,
) -> Result<()> {
    let cfg = common.resolve(None)?;
    let input = inputs(common, &cfg.file, netlist, None, lib)?;
    let p = auto_place(&input.netlist, &input.lib, &cfg.board, seed)?;
    let cost = placement_cost(&input.netlist, &input.lib, &cfg.board, &p)?;
    write_atomic(&cfg.out.join("placement.txt"), p.to_text().as_bytes())?;
    eprintln!("wirelength {:.1} mm", cost.wirelength);
    Ok(())
}

fn check(common: &CommonArgs, dump: &Path) -> Result<()> {
    let bytes = std::fs::read(dump).with_context(|| format!("reading {}", dump.display()))?;
    let (r, cells) =
        read_zone_dump(&bytes).with_context(|| format!("reading {}", dump.display()))?;
    let mut args = common.clone();
    args.resolution = Some(r);
    let size = (cells.nx() as f64 * r, cells.ny() as f64 * r);
    let cfg = args.resolve(Some(size))?;
    let board: Board = cfg.board;
    if (board.nx(), board.ny()) != (cells.nx(), cells.ny()) {
        return Err(anyhow!(
            "dump is {}x{} cells but a {}x{} mm board at {} mm needs {}x{}",
            cells.nx(),
            cells.ny(),
            board.width,
            board.height,
            r,
            board.nx(),
            board.ny()
        ));
    }
    let z = ZoneMap { board, cells };
    let report = run_drc(&z, &vectorize(&z), &[], &[]);
    print!("{}", report.to_text());
    if let Some(out) = &common.out {
        write_atomic(&out.join("drc.txt"), report.to_text().as_bytes())?;
    }
    if report.pass {
        Ok(())
    } else {
        Err(RuleFailure.into())
    }
}

fn serve(
    common: &CommonArgs,
    netlist: Option<PathBuf>,
    placement: Option<PathBuf>,
    lib: Vec<PathBuf>,
    host: &str,
    port: u16,
    seed: u64,
) -> Result<()> {
    let cfg = common.resolve(None)?;
    let have_netlist = netlist.is_some() || cfg.file.netlist.is_some();
    let project = if have_netlist {
        let input = inputs(common, &cfg.file, netlist, placement, lib)?;
        let placement = match input.placement {
            Some(p) => p,
            None => auto_place(&input.netlist, &input.lib, &cfg.board, seed)?,
        };
        Some(zonecut_service::Project::new(
            input.netlist,
            input.lib,
            cfg.board,
            placement,
        ))
    } else {
        None
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("binding {host}:{port}"))?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        zonecut_service::serve(listener, zonecut_service::AppState::new(project)).await?;
        Ok(())
    })
}
