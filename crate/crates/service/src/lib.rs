//! Local HTTP+JSON API for the placement editor. One project per server;
//! placement edits bump a revision counter and invalidate the cached layout.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::{Mutex, RwLock};
use zonecut_core::board::Board;
use zonecut_core::drc::{explain_violation, round3, DrcReport};
use zonecut_core::export::{export_zone_preview, ExportMode, ExportOptions};
use zonecut_core::footprint::FootprintLibrary;
use zonecut_core::geom::Point;
use zonecut_core::netmodel::Netlist;
use zonecut_core::pipeline::{compile_netlist, render, Compiled, PipelineError};
use zonecut_core::placement::{snap, Placement, PlacementSet, Rotation};

/// The editable design: everything a recompute needs.
#[derive(Debug, Clone)]
pub struct Project {
    pub netlist: Netlist,
    pub lib: FootprintLibrary,
    pub board: Board,
    pub placement: PlacementSet,
    pub revision: u64,
}

impl Project {
    pub fn new(
        netlist: Netlist,
        lib: FootprintLibrary,
        board: Board,
        placement: PlacementSet,
    ) -> Self {
        Self {
            netlist,
            lib,
            board,
            placement,
            revision: 0,
        }
    }
}

struct Cached {
    revision: u64,
    compiled: Arc<Compiled>,
    payload: Value,
}

#[derive(Default)]
struct Session {
    project: Option<Project>,
    cache: Option<Cached>,
}

#[derive(Clone, Default)]
pub struct AppState {
    session: Arc<RwLock<Session>>,
    recompute: Arc<Mutex<()>>,
}

impl AppState {
    pub fn new(project: Option<Project>) -> Self {
        Self {
            session: Arc::new(RwLock::new(Session {
                project,
                cache: None,
            })),
            recompute: Arc::new(Mutex::new(())),
        }
    }

    pub async fn revision(&self) -> Option<u64> {
        self.session
            .read()
            .await
            .project
            .as_ref()
            .map(|p| p.revision)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/project", get(get_project))
        .route("/api/placement/{part_id}", put(put_placement))
        .route("/api/recompute", post(recompute))
        .route("/api/drc", get(get_drc))
        .route("/api/export", get(get_export))
        .route("/api/preview.png", get(get_preview))
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

type ApiResult = Result<Response, (StatusCode, Json<Value>)>;

fn fail(status: StatusCode, kind: &str, message: impl Into<String>) -> (StatusCode, Json<Value>) {
    (
        status,
        Json(json!({ "error": message.into(), "kind": kind })),
    )
}

fn no_project() -> (StatusCode, Json<Value>) {
    fail(StatusCode::NOT_FOUND, "NO_PROJECT", "no project loaded")
}

fn pt(p: Point) -> Value {
    json!([round3(p.x), round3(p.y)])
}

fn ring(r: &[Point]) -> Value {
    Value::Array(r.iter().copied().map(pt).collect())
}

fn placement_json(pl: &Placement) -> Value {
    json!({ "x": round3(pl.x), "y": round3(pl.y), "rot": pl.rot.degrees() })
}

fn project_json(p: &Project) -> Value {
    let parts: Vec<Value> = p
        .netlist
        .parts
        .iter()
        .map(|part| {
            let fp = p.lib.get(&part.footprint_key);
            let pads: Vec<Value> = fp
                .map(|fp| {
                    fp.pads
                        .iter()
                        .enumerate()
                        .map(|(k, pad)| {
                            let (hw, hh) = pad.shape.half_extents();
                            json!({
                                "pin": k + 1,
                                "x": round3(pad.x),
                                "y": round3(pad.y),
                                "w": round3(2.0 * hw),
                                "h": round3(2.0 * hh),
                            })
                        })
                        .collect()
                })
                .unwrap_or_default();
            json!({
                "id": part.id,
                "label": part.label,
                "footprint": part.footprint_key,
                "courtyard": fp.map(|fp| json!({ "w": round3(fp.courtyard_w), "h": round3(fp.courtyard_h) })),
                "pads": pads,
            })
        })
        .collect();
    let nets: Vec<Value> = p
        .netlist
        .nets
        .iter()
        .map(|n| {
            json!({
                "id": n.id,
                "name": n.name,
                "pins": n.pins.iter().map(|r| json!({ "part_id": r.part_id, "pin": r.pin })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let placement: serde_json::Map<String, Value> = p
        .placement
        .iter()
        .map(|(id, pl)| (id.to_string(), placement_json(pl)))
        .collect();
    let b = &p.board;
    json!({
        "parts": parts,
        "nets": nets,
        "board": {
            "width": round3(b.width),
            "height": round3(b.height),
            "margin": round3(b.margin),
            "resolution": round3(b.resolution),
            "gap": round3(b.gap),
            "min_feature": round3(b.min_feature),
        },
        "placement": placement,
        "revision": p.revision,
    })
}

fn drc_json(report: &DrcReport) -> (Value, bool) {
    let violations: Vec<Value> = report
        .violations
        .iter()
        .map(|v| {
            json!({
                "kind": v.kind.code(),
                "x": round3(v.x),
                "y": round3(v.y),
                "nets": v.nets,
                "net_names": v.net_names,
                "detail": v.detail,
                "explanation": explain_violation(v),
            })
        })
        .collect();
    (Value::Array(violations), report.pass)
}

fn layout_json(c: &Compiled, revision: u64) -> Value {
    let zones: Vec<Value> = c
        .layout
        .zones
        .iter()
        .map(|(net, polys)| {
            json!({
                "net": net,
                "name": c.net_names.get(net.0 as usize),
                "polygons": polys
                    .iter()
                    .map(|poly| json!({
                        "outer": ring(&poly.outer),
                        "holes": poly.holes.iter().map(|h| ring(h)).collect::<Vec<_>>(),
                    }))
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    let (violations, pass) = drc_json(&c.drc);
    json!({
        "revision": revision,
        "zones": zones,
        "cut_paths": c.layout.cut_paths.iter().map(|r| ring(r)).collect::<Vec<_>>(),
        "violations": violations,
        "pass": pass && c.is_clean(),
    })
}

async fn get_project(State(state): State<AppState>) -> ApiResult {
    let s = state.session.read().await;
    let p = s.project.as_ref().ok_or_else(no_project)?;
    Ok(Json(project_json(p)).into_response())
}

#[derive(Deserialize)]
struct PlacementBody {
    x: f64,
    y: f64,
    rot: f64,
}

async fn put_placement(
    State(state): State<AppState>,
    Path(part_id): Path<String>,
    Json(body): Json<PlacementBody>,
) -> ApiResult {
    let mut s = state.session.write().await;
    let p = s.project.as_mut().ok_or_else(no_project)?;
    let part = p.netlist.part(&part_id).ok_or_else(|| {
        fail(
            StatusCode::NOT_FOUND,
            "UNKNOWN_PART",
            format!("no part `{part_id}`"),
        )
    })?;
    let rot = Rotation::from_degrees(body.rot).ok_or_else(|| {
        fail(
            StatusCode::UNPROCESSABLE_ENTITY,
            "BAD_ROTATION",
            format!("rotation {} is not 0, 90, 180 or 270", body.rot),
        )
    })?;
    if !body.x.is_finite() || !body.y.is_finite() {
        return Err(fail(
            StatusCode::UNPROCESSABLE_ENTITY,
            "BAD_POSITION",
            "position must be finite",
        ));
    }
    let placed = Placement {
        x: snap(body.x),
        y: snap(body.y),
        rot,
    };
    if let Some(fp) = p.lib.get(&part.footprint_key) {
        let court = fp.courtyard_at(placed.x, placed.y, placed.rot);
        let outside = court.area_outside(&p.board.usable());
        if outside > 1e-9 {
            return Err(fail(
                StatusCode::UNPROCESSABLE_ENTITY,
                "OUT_OF_BOARD",
                format!("courtyard of `{part_id}` extends {outside:.2} mm² past the board margin"),
            ));
        }
    }
    p.placement.insert(part_id.clone(), placed);
    p.revision += 1;
    let revision = p.revision;
    s.cache = None;
    let mut body = placement_json(&placed);
    body["part_id"] = json!(part_id);
    body["revision"] = json!(revision);
    Ok(Json(body).into_response())
}

fn pipeline_failure(e: &PipelineError) -> (StatusCode, Json<Value>) {
    use zonecut_core::partition::PartitionError as P;
    let kind = match e {
        PipelineError::Partition(P::SeedConflict { .. }) => "SEED_CONFLICT",
        PipelineError::Partition(P::PadClearanceViolation { .. }) => "PAD_CLEARANCE",
        PipelineError::Partition(P::FeatureTooThin { .. }) => "FEATURE_TOO_THIN",
        PipelineError::Partition(P::NoSeeds) => "NO_SEEDS",
        PipelineError::Issues(_) => "NETLIST",
        _ => "PIPELINE",
    };
    fail(StatusCode::UNPROCESSABLE_ENTITY, kind, e.to_string())
}

/// Compiles the current revision unless it is already cached.
async fn current(
    state: &AppState,
) -> Result<(u64, Arc<Compiled>, Value), (StatusCode, Json<Value>)> {
    let _one_at_a_time = state.recompute.lock().await;
    let project = {
        let s = state.session.read().await;
        let p = s.project.as_ref().ok_or_else(no_project)?;
        if let Some(c) = s.cache.as_ref().filter(|c| c.revision == p.revision) {
            return Ok((c.revision, c.compiled.clone(), c.payload.clone()));
        }
        p.clone()
    };
    if let Some(part) = project
        .netlist
        .parts
        .iter()
        .find(|part| !project.placement.contains(&part.id))
    {
        return Err(fail(
            StatusCode::CONFLICT,
            "UNPLACED_PART",
            format!("part `{}` has no placement", part.id),
        ));
    }
    let revision = project.revision;
    let compiled = tokio::task::spawn_blocking(move || {
        compile_netlist(
            &project.netlist,
            &project.lib,
            &project.board,
            &project.placement,
            false,
        )
    })
    .await
    .map_err(|e| fail(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
    .map_err(|e| pipeline_failure(&e))?;
    let compiled = Arc::new(compiled);
    let payload = layout_json(&compiled, revision);
    let mut s = state.session.write().await;
    if s.project.as_ref().map(|p| p.revision) == Some(revision) {
        s.cache = Some(Cached {
            revision,
            compiled: compiled.clone(),
            payload: payload.clone(),
        });
    }
    Ok((revision, compiled, payload))
}

/// The cached result, only if it matches the current revision.
async fn cached(state: &AppState) -> Result<(u64, Arc<Compiled>), (StatusCode, Json<Value>)> {
    let s = state.session.read().await;
    let p = s.project.as_ref().ok_or_else(no_project)?;
    match s.cache.as_ref().filter(|c| c.revision == p.revision) {
        Some(c) => Ok((c.revision, c.compiled.clone())),
        None => Err(fail(
            StatusCode::CONFLICT,
            "STALE",
            "no layout for the current revision; recompute first",
        )),
    }
}

async fn recompute(State(state): State<AppState>) -> ApiResult {
    let (_, _, payload) = current(&state).await?;
    Ok(Json(payload).into_response())
}

async fn get_drc(State(state): State<AppState>) -> ApiResult {
    let (revision, c) = cached(&state).await?;
    let (violations, pass) = drc_json(&c.drc);
    Ok(
        Json(json!({ "revision": revision, "violations": violations, "pass": pass }))
            .into_response(),
    )
}

#[derive(Deserialize)]
struct ExportQuery {
    mode: Option<String>,
    tape_width: Option<f64>,
}

async fn get_export(State(state): State<AppState>, Query(q): Query<ExportQuery>) -> ApiResult {
    let mode: ExportMode = q
        .mode
        .as_deref()
        .unwrap_or("cut")
        .parse()
        .map_err(|e: String| fail(StatusCode::UNPROCESSABLE_ENTITY, "BAD_MODE", e))?;
    let (_, c) = cached(&state).await?;
    if !c.is_clean() {
        return Err(fail(
            StatusCode::CONFLICT,
            "DRC_FAILED",
            format!(
                "design rules fail with {} violation(s)",
                c.drc.violations.len()
            ),
        ));
    }
    let opts = match mode {
        ExportMode::Cut => ExportOptions::cut(),
        ExportMode::FineTape => {
            ExportOptions::fine_tape(q.tape_width.unwrap_or(c.layout.board.gap))
        }
    };
    let files = render(&c, &opts)
        .map_err(|e| fail(StatusCode::UNPROCESSABLE_ENTITY, "EXPORT", e.to_string()))?;
    let (svg, name) = match mode {
        ExportMode::Cut => (files.cut_svg, "cut.svg"),
        ExportMode::FineTape => (files.finetape_svg, "finetape.svg"),
    };
    let svg = svg.ok_or_else(|| fail(StatusCode::CONFLICT, "DRC_FAILED", "layout is not clean"))?;
    Ok((
        [
            (header::CONTENT_TYPE, "image/svg+xml".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"{name}\""),
            ),
        ],
        svg,
    )
        .into_response())
}

async fn get_preview(State(state): State<AppState>) -> ApiResult {
    let (_, c) = cached(&state).await?;
    Ok((
        [(header::CONTENT_TYPE, "image/png")],
        export_zone_preview(&c.zones),
    )
        .into_response())
}
