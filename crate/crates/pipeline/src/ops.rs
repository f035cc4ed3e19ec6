//! Library operations shared by the CLI commands and the HTTP service.

use std::fs;
use std::path::{Path, PathBuf};

use puddlemap::camera_model::{resect, Camera, Gcp, ResectOptions, ResectionResult};
use puddlemap::imagery::{crop, gaussian_blur, parse_pgm8, Frame, Roi};
use puddlemap::seeds::{seeds_to_training, SeedSet};
use puddlemap::segmenter::{felzenszwalb, segment_features, SegmentFeatures, SegmentMap};
use puddlemap::terrain::{footprint_map, ground_point, DemGrid, GroundPoint, IntersectOptions};
use puddlemap::tree_classifier::{classify_frame, train, DecisionTree, WaterMask};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::geojson::{Feature, FeatureCollection, PointProperties};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub sigma: f64,
    pub k: f64,
    pub min_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

/// Crops to the ROI, smooths, segments, and measures the segments.
/// Features are taken from the unsmoothed crop.
pub fn segment_frame(frame: &Frame, roi: Roi, p: SegmentParams) -> Result<(SegmentMap, SegmentFeatures)> {
    let cropped = crop(frame, roi).map_err(|e| PipelineError::image("roi", e))?;
    let raster = gaussian_blur(&cropped, p.sigma).map_err(|e| PipelineError::image("blur", e))?;
    let map = felzenszwalb(&raster, p.k, p.min_size)?;
    let feats = segment_features(&cropped, &map)?;
    Ok((map, feats))
}

/// Trains a tree from the seeded segments of one frame.
pub fn train_on_frame(
    frame_id: &str,
    map: &SegmentMap,
    feats: &SegmentFeatures,
    seeds: &SeedSet,
    p: TreeParams,
) -> Result<DecisionTree> {
    let ts = seeds_to_training(seeds, map, feats).map_err(|e| PipelineError::seeds(frame_id, e))?;
    if ts.is_empty() {
        return Err(PipelineError::Input(format!("frame {frame_id}: no labeled seeds to train on")));
    }
    train(&ts, p.max_depth, p.min_leaf).map_err(|e| PipelineError::tree(frame_id, e))
}

pub fn classify(
    frame_id: &str,
    map: &SegmentMap,
    feats: &SegmentFeatures,
    tree: &DecisionTree,
    seeds: &SeedSet,
) -> Result<WaterMask> {
    classify_frame(tree, map, feats, seeds).map_err(|e| PipelineError::tree(frame_id, e))
}

/// Camera parameters as JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub omega: f64,
    pub phi: f64,
    pub kappa: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl From<&Camera> for CameraJson {
    fn from(c: &Camera) -> Self {
        let [fx, fy, cx, cy, omega, phi, kappa, tx, ty, tz] = c.to_params();
        Self { fx, fy, cx, cy, omega, phi, kappa, tx, ty, tz }
    }
}

impl From<CameraJson> for Camera {
    fn from(c: CameraJson) -> Self {
        Camera::from_params(&[c.fx, c.fy, c.cx, c.cy, c.omega, c.phi, c.kappa, c.tx, c.ty, c.tz])
    }
}

/// Outcome of a resection in the shape the service returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResectReport {
    pub camera: CameraJson,
    /// Observed minus projected, pixels, one per GCP.
    pub residuals: Vec<[f64; 2]>,
    pub rmse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub behind_camera: Vec<usize>,
}

impl From<&ResectionResult> for ResectReport {
    fn from(r: &ResectionResult) -> Self {
        Self {
            camera: (&r.camera).into(),
            residuals: r.residuals.clone(),
            rmse: r.rmse,
            iterations: r.iterations,
            converged: r.converged,
            behind_camera: r.behind_camera.clone(),
        }
    }
}

pub fn resect_report(gcps: &[Gcp], init: &Camera, opts: &ResectOptions) -> Result<ResectReport> {
    init.validate()?;
    Ok(ResectReport::from(&resect(gcps, init, opts)?))
}

pub const RESIDUALS_HEADER: &str = "index,u,v,X,Y,Z,du,dv,norm";

pub fn format_residuals(gcps: &[Gcp], residuals: &[[f64; 2]]) -> String {
    let mut out = format!("{RESIDUALS_HEADER}\n");
    for (i, (g, r)) in gcps.iter().zip(residuals).enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{}\n",
            g.u,
            g.v,
            g.x,
            g.y,
            g.z,
            r[0],
            r[1],
            r[0].hypot(r[1])
        ));
    }
    out
}

pub fn format_resect_summary(r: &ResectReport) -> String {
    let behind: Vec<String> = r.behind_camera.iter().map(usize::to_string).collect();
    format!(
        "rmse = {}\niterations = {}\nconverged = {}\nbehind_camera = {}\n",
        r.rmse,
        r.iterations,
        r.converged,
        behind.join(",")
    )
}

/// Ground point and footprint area of each ROI pixel, row-major.
#[derive(Debug, Clone)]
pub struct PixelGeometry {
    pub roi: Roi,
    pub cells: Vec<Option<(GroundPoint, f64)>>,
}

impl PixelGeometry {
    /// Pixels whose centre ray or any corner ray misses the terrain are
    /// left undefined.
    pub fn build(camera: &Camera, dem: &DemGrid, roi: Roi, opts: &IntersectOptions) -> Self {
        let footprints = footprint_map(camera, dem, roi, opts);
        let cells = footprints
            .par_iter()
            .enumerate()
            .map(|(i, fp)| {
                let fp = fp.as_ref()?;
                let (r, c) = (i / roi.w, i % roi.w);
                let (u, v) = ((roi.x0 + c) as f64, (roi.y0 + r) as f64);
                let gp = ground_point(camera, dem, u, v, opts).ok()?;
                Some((gp, fp.area))
            })
            .collect();
        Self { roi, cells }
    }

    pub fn areas(&self) -> Vec<Option<f64>> {
        self.cells.iter().map(|c| c.map(|(_, a)| a)).collect()
    }

    pub fn defined(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Point features for wet pixels (all pixels with `all`) that have a
    /// defined footprint, plus the number of wet pixels left out.
    pub fn collection(&self, mask: &WaterMask, all: bool, timestamp: Option<f64>) -> Result<(FeatureCollection, usize)> {
        if (mask.width, mask.height) != (self.roi.w, self.roi.h) {
            return Err(PipelineError::Input(format!(
                "mask is {}x{}, roi is {}x{}",
                mask.width, mask.height, self.roi.w, self.roi.h
            )));
        }
        let mut features = Vec::new();
        let mut skipped = 0;
        for (cell, &wet) in self.cells.iter().zip(&mask.wet) {
            if !(wet || all) {
                continue;
            }
            match cell {
                Some((gp, area)) => features.push(Feature::point(
                    gp.x,
                    gp.y,
                    PointProperties {
                        z: gp.z,
                        u: gp.u,
                        v: gp.v,
                        area_m2: *area,
                        wet,
                    },
                )),
                None if wet => skipped += 1,
                None => {}
            }
        }
        Ok((FeatureCollection::new(timestamp, features), skipped))
    }
}

/// Writes through a temporary sibling so readers never see partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| PipelineError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

/// A mask file named `<epoch>.pgm`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskEntry {
    pub id: String,
    pub timestamp: f64,
    pub path: PathBuf,
}

/// Lists `<epoch>.pgm` masks in time order.
pub fn scan_masks(dir: &Path) -> Result<Vec<MaskEntry>> {
    let entries = fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| PipelineError::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let timestamp: f64 = id
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| PipelineError::Input(format!("{}: mask name is not a timestamp", path.display())))?;
        out.push(MaskEntry { id, timestamp, path });
    }
    out.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    if out.windows(2).any(|w| w[0].timestamp == w[1].timestamp) {
        return Err(PipelineError::Input(format!("{}: duplicate mask timestamps", dir.display())));
    }
    Ok(out)
}

pub fn load_mask(path: &Path) -> Result<WaterMask> {
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    let (w, h, values) = parse_pgm8(&bytes).map_err(|e| PipelineError::image(path.display().to_string(), e))?;
    Ok(WaterMask::new(w, h, values.into_iter().map(|v| v != 0).collect()))
}
