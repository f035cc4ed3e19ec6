//! JSON-over-HTTP endpoints for the annotation client.
//!
//! Malformed bodies get 400 `malformed_body`; domain failures get 422 with
//! the same reason codes the CLI logs.

use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use puddlemap::camera_model::{Camera, Gcp, ResectOptions};
use puddlemap::imagery::{encode_ppm, FrameSequence, Roi};
use puddlemap::seeds::{make_grid, seed_conflicts, SeedLabel, SeedPoint, SeedSet};
use puddlemap::terrain::{load_dem, DemGrid};
use puddlemap::tree_classifier::WaterMask;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::{open_frames, read_frame};
use crate::config::PipelineConfig;
use crate::error::PipelineError;
use crate::ops::{classify, resect_report, segment_frame, train_on_frame, CameraJson, PixelGeometry};
use crate::rle::Rle;

/// Assets loaded once at startup; handlers only read them.
pub struct AppState {
    pub config: PipelineConfig,
    pub frames: Option<(FrameSequence, Roi)>,
    pub dem: Option<DemGrid>,
    pub camera: Option<Camera>,
    geometry: OnceLock<PixelGeometry>,
}

impl AppState {
    /// Loads whichever of frames, DEM and camera the config names.
    pub fn load(config: PipelineConfig) -> Result<Self, PipelineError> {
        let frames = match config.frames_dir {
            Some(_) => {
                let inputs = open_frames(&config)?;
                Some((inputs.sequence, inputs.roi))
            }
            None => None,
        };
        let dem = config.dem.as_deref().map(load_dem).transpose()?;
        let camera = match config.camera.as_deref() {
            Some(p) => {
                let c = puddlemap::camera_model::load_camera(p)?;
                c.validate()?;
                Some(c)
            }
            None => None,
        };
        Ok(Self {
            config,
            frames,
            dem,
            camera,
            geometry: OnceLock::new(),
        })
    }

    fn roi(&self) -> Option<Roi> {
        self.config.roi.or_else(|| self.frames.as_ref().map(|(_, roi)| *roi))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/frame/{id}", get(get_frame))
        .route("/grid", get(get_grid))
        .route("/segment", post(post_segment))
        .route("/classify", post(post_classify))
        .route("/resect", post(post_resect))
        .route("/elevation", get(get_elevation))
        .route("/georef", post(post_georef))
        .with_state(state)
}

pub async fn serve(config: PipelineConfig) -> Result<(), PipelineError> {
    let addr = format!("{}:{}", config.bind, config.port);
    let state = Arc::new(AppState::load(config)?);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| PipelineError::Input(format!("cannot bind {addr}: {e}")))?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| PipelineError::Input(format!("server error: {e}")))
}

#[derive(Debug)]
pub enum ApiError {
    Malformed(String),
    NotFound(String),
    Domain(PipelineError),
    Conflicts(Vec<u32>),
    Unavailable(&'static str),
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        Self::Domain(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            Self::Malformed(m) => (StatusCode::BAD_REQUEST, json!({"error": "malformed_body", "message": m})),
            Self::NotFound(m) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "message": m})),
            Self::Domain(e) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": e.code(), "message": e.to_string()}),
            ),
            Self::Conflicts(segments) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({
                    "error": "seed_conflict",
                    "message": format!("segments {segments:?} hold both dry and wet seeds"),
                    "conflicts": segments,
                }),
            ),
            Self::Unavailable(what) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                json!({"error": "bad_config", "message": format!("service started without {what}")}),
            ),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::Malformed(e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ApiError::Domain(PipelineError::Input(format!("worker failed: {e}")))))
}

fn frames(state: &AppState) -> ApiResult<&(FrameSequence, Roi)> {
    state.frames.as_ref().ok_or(ApiError::Unavailable("frames_dir"))
}

async fn get_frame(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let (seq, _) = frames(&state)?;
    let entry = seq.find(&id).ok_or_else(|| ApiError::NotFound(format!("frame `{id}`")))?;
    let frame = read_frame(entry)?;
    Ok(([(header::CONTENT_TYPE, "image/x-portable-pixmap")], encode_ppm(&frame)).into_response())
}

#[derive(Serialize)]
struct GridPoint {
    row: usize,
    col: usize,
}

async fn get_grid(State(state): State<Arc<AppState>>) -> ApiResult<Json<serde_json::Value>> {
    let roi = state.roi().ok_or(ApiError::Unavailable("roi or frames_dir"))?;
    let grid = make_grid(roi, state.config.grid_nx, state.config.grid_ny).map_err(PipelineError::Seeds)?;
    let points: Vec<GridPoint> = grid.points().iter().map(|p| GridPoint { row: p.row, col: p.col }).collect();
    Ok(Json(json!({"roi": [roi.x0, roi.y0, roi.w, roi.h], "points": points})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRequest {
    frame: String,
    sigma: Option<f64>,
    k: Option<f64>,
    min_size: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SegmentResponse {
    pub frame: String,
    pub segment_count: usize,
    pub labels: Rle,
}

fn segment_params(cfg: &PipelineConfig, sigma: Option<f64>, k: Option<f64>, min_size: Option<usize>) -> crate::ops::SegmentParams {
    let mut p = cfg.segment_params();
    p.sigma = sigma.unwrap_or(p.sigma);
    p.k = k.unwrap_or(p.k);
    p.min_size = min_size.unwrap_or(p.min_size);
    p
}

async fn post_segment(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<SegmentResponse>> {
    let req: SegmentRequest = parse_body(&body)?;
    blocking(move || {
        let (seq, roi) = frames(&state)?;
        let entry = seq.find(&req.frame).ok_or_else(|| ApiError::NotFound(format!("frame `{}`", req.frame)))?;
        let params = segment_params(&state.config, req.sigma, req.k, req.min_size);
        let (map, _) = segment_frame(&read_frame(entry)?, *roi, params)?;
        Ok(Json(SegmentResponse {
            frame: req.frame,
            segment_count: map.segment_count,
            labels: Rle::encode(map.width, map.height, &map.labels),
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedJson {
    row: usize,
    col: usize,
    label: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyRequest {
    frame: String,
    seeds: Vec<SeedJson>,
    sigma: Option<f64>,
    k: Option<f64>,
    min_size: Option<usize>,
    max_depth: Option<usize>,
    min_leaf: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ClassifyResponse {
    pub frame: String,
    pub mask: Rle,
    pub wet_pixels: usize,
    pub conflicts: Vec<u32>,
}

async fn post_classify(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<ClassifyResponse>> {
    let req: ClassifyRequest = parse_body(&body)?;
    let points = req
        .seeds
        .iter()
        .map(|s| {
            let label = SeedLabel::parse(&s.label).ok_or_else(|| ApiError::Malformed(format!("unknown label `{}`", s.label)))?;
            Ok(SeedPoint { row: s.row, col: s.col, label })
        })
        .collect::<ApiResult<Vec<_>>>()?;
    blocking(move || {
        let (seq, roi) = frames(&state)?;
        let seeds = SeedSet::new(points).map_err(PipelineError::Seeds)?;
        if let Some(p) = seeds.points().iter().find(|p| p.row >= roi.h || p.col >= roi.w) {
            return Err(PipelineError::Input(format!("seed ({}, {}) lies outside the {}x{} roi", p.row, p.col, roi.w, roi.h)).into());
        }
        let entry = seq.find(&req.frame).ok_or_else(|| ApiError::NotFound(format!("frame `{}`", req.frame)))?;
        let params = segment_params(&state.config, req.sigma, req.k, req.min_size);
        let (map, feats) = segment_frame(&read_frame(entry)?, *roi, params)?;
        let conflicts = seed_conflicts(&seeds, &map);
        if !conflicts.is_empty() {
            return Err(ApiError::Conflicts(conflicts));
        }
        let mut tp = state.config.tree_params();
        tp.max_depth = req.max_depth.unwrap_or(tp.max_depth);
        tp.min_leaf = req.min_leaf.unwrap_or(tp.min_leaf);
        let tree = train_on_frame(&entry.id, &map, &feats, &seeds, tp)?;
        let mask = classify(&entry.id, &map, &feats, &tree, &seeds)?;
        Ok(Json(ClassifyResponse {
            frame: req.frame,
            mask: Rle::encode_mask(mask.width, mask.height, &mask.wet),
            wet_pixels: mask.wet_count(),
            conflicts: Vec::new(),
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GcpJson {
    u: f64,
    v: f64,
    #[serde(alias = "X")]
    x: f64,
    #[serde(alias = "Y")]
    y: f64,
    #[serde(alias = "Z")]
    z: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResectRequest {
    gcps: Vec<GcpJson>,
    init: CameraJson,
    fix_intrinsics: Option<bool>,
    max_iter: Option<usize>,
    tol: Option<f64>,
}

async fn post_resect(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<crate::ops::ResectReport>> {
    let req: ResectRequest = parse_body(&body)?;
    blocking(move || {
        let defaults = state.config.resect_options();
        let opts = ResectOptions {
            fix_intrinsics: req.fix_intrinsics.unwrap_or(defaults.fix_intrinsics),
            max_iter: req.max_iter.unwrap_or(defaults.max_iter),
            tol: req.tol.unwrap_or(defaults.tol),
        };
        let gcps: Vec<Gcp> = req.gcps.iter().map(|g| Gcp { u: g.u, v: g.v, x: g.x, y: g.y, z: g.z }).collect();
        Ok(Json(resect_report(&gcps, &req.init.into(), &opts)?))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct ElevationQuery {
    x: f64,
    y: f64,
}

async fn get_elevation(
    State(state): State<Arc<AppState>>,
    query: Result<Query<ElevationQuery>, QueryRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Query(q) = query.map_err(|e| ApiError::Malformed(e.body_text()))?;
    let dem = state.dem.as_ref().ok_or(ApiError::Unavailable("dem"))?;
    let z = dem.elevation_at(q.x, q.y).map_err(PipelineError::from)?;
    Ok(Json(json!({"x": q.x, "y": q.y, "z": z})))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeorefRequest {
    mask: Rle,
    frame: Option<String>,
    #[serde(default)]
    all: bool,
}

async fn post_georef(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Json<crate::geojson::FeatureCollection>> {
    let req: GeorefRequest = parse_body(&body)?;
    let wet = req.mask.decode_mask().map_err(ApiError::Malformed)?;
    blocking(move || {
        let camera = state.camera.as_ref().ok_or(ApiError::Unavailable("camera"))?;
        let dem = state.dem.as_ref().ok_or(ApiError::Unavailable("dem"))?;
        let roi = state.roi().unwrap_or(Roi::new(0, 0, req.mask.width, req.mask.height));
        let timestamp = match &req.frame {
            Some(id) => {
                let (seq, _) = frames(&state)?;
                Some(seq.find(id).ok_or_else(|| ApiError::NotFound(format!("frame `{id}`")))?.timestamp)
            }
            None => None,
        };
        let geometry = state
            .geometry
            .get_or_init(|| PixelGeometry::build(camera, dem, roi, &state.config.intersect_options()));
        let mask = WaterMask::new(req.mask.width, req.mask.height, wet);
        let (collection, _) = geometry.collection(&mask, req.all, timestamp)?;
        Ok(Json(collection))
    })
    .await
}
