//! The `puddlemap` subcommands. Each reads the inputs named in the
//! configuration and writes its artifacts under `output_dir`.

use std::fmt::Write as _;
use std::path::PathBuf;

use log::{info, warn};
use puddlemap::camera_model::{format_camera, load_camera, load_gcps, Camera, Gcp, ResectOptions};
use puddlemap::hydro_metrics::{
    format_phase_report, format_sofi_csv, parse_sofi_csv, parse_well_csv, phase_report, sofi_sample, TimeSeries, Unit,
};
use puddlemap::imagery::{load_frame, Frame, FrameEntry, FrameSequence, Roi};
use puddlemap::seeds::{load_seeds, SeedSet};
use puddlemap::segmenter::FEATURE_NAMES;
use puddlemap::terrain::{load_dem, DemGrid, IntersectOptions};
use puddlemap::tree_classifier::{DecisionTree, TrainingMode};
use rayon::prelude::*;

use crate::config::{PipelineConfig, SofiColumn};
use crate::error::{PipelineError, Result};
use crate::ops::{
    classify, format_residuals, format_resect_summary, load_mask, read_text, resect_report, scan_masks,
    segment_frame, train_on_frame, write_atomic, PixelGeometry, ResectReport, SegmentParams, TreeParams,
};

/// Human judgments read by a command: labeled seeds and GCPs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HumanInputs {
    pub seed_labels: usize,
    pub gcps: usize,
}

impl std::ops::AddAssign for HumanInputs {
    fn add_assign(&mut self, o: Self) {
        self.seed_labels += o.seed_labels;
        self.gcps += o.gcps;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub inputs: HumanInputs,
}

impl Outcome {
    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn warn(&mut self, message: String) {
        warn!("{message}");
        self.warnings.push(message);
    }
}

impl PipelineConfig {
    pub fn segment_params(&self) -> SegmentParams {
        SegmentParams {
            sigma: self.sigma,
            k: self.k,
            min_size: self.min_size,
        }
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
        }
    }

    pub fn resect_options(&self) -> ResectOptions {
        ResectOptions {
            fix_intrinsics: self.fix_intrinsics,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    pub fn intersect_options(&self) -> IntersectOptions {
        IntersectOptions {
            max_range: self.max_range,
            force_march: false,
        }
    }
}

/// Frames of the sequence together with the processing ROI.
pub struct Inputs {
    pub sequence: FrameSequence,
    pub roi: Roi,
}

pub fn open_frames(cfg: &PipelineConfig) -> Result<Inputs> {
    let dir = cfg.require("frames_dir", &cfg.frames_dir)?;
    let sequence = FrameSequence::scan(dir).map_err(|e| PipelineError::image(dir.display().to_string(), e))?;
    let first = sequence
        .entries()
        .first()
        .ok_or_else(|| PipelineError::Input(format!("{}: no frames", dir.display())))?;
    let frame = read_frame(first)?;
    let roi = cfg.roi.unwrap_or_else(|| frame.full_roi());
    if !roi.fits(frame.width(), frame.height()) {
        return Err(PipelineError::Input(format!(
            "roi {},{},{},{} exceeds {}x{} frames",
            roi.x0,
            roi.y0,
            roi.w,
            roi.h,
            frame.width(),
            frame.height()
        )));
    }
    Ok(Inputs { sequence, roi })
}

pub fn read_frame(entry: &FrameEntry) -> Result<Frame> {
    load_frame(&entry.path).map_err(|e| PipelineError::image(entry.path.display().to_string(), e))
}

fn representative<'a>(cfg: &PipelineConfig, seq: &'a FrameSequence) -> Result<&'a FrameEntry> {
    match &cfg.representative_frame {
        Some(id) => seq
            .find(id)
            .ok_or_else(|| PipelineError::Input(format!("representative frame `{id}` not found"))),
        None => Ok(&seq.entries()[0]),
    }
}

/// Loads the seed file once and counts its labeled points.
pub fn ingest_seeds(cfg: &PipelineConfig, roi: Roi, inputs: &mut HumanInputs) -> Result<SeedSet> {
    let path = cfg.require("seeds", &cfg.seeds)?;
    let seeds = load_seeds(path, roi).map_err(PipelineError::Seeds)?;
    inputs.seed_labels += seeds.labeled_count();
    info!("{}: {} dry, {} wet seeds", path.display(), seeds.dry_count(), seeds.wet_count());
    Ok(seeds)
}

pub fn ingest_gcps(cfg: &PipelineConfig, inputs: &mut HumanInputs) -> Result<Vec<Gcp>> {
    let path = cfg.require("gcps", &cfg.gcps)?;
    let gcps = load_gcps(path)?;
    inputs.gcps += gcps.len();
    Ok(gcps)
}

fn load_camera_file(path: &std::path::Path) -> Result<Camera> {
    let camera = load_camera(path)?;
    camera.validate()?;
    Ok(camera)
}

pub fn cmd_segment(cfg: &PipelineConfig) -> Result<Outcome> {
    let Inputs { sequence, roi } = open_frames(cfg)?;
    let params = cfg.segment_params();
    let results: Vec<_> = sequence
        .entries()
        .par_iter()
        .map(|entry| {
            let (map, feats) = segment_frame(&read_frame(entry)?, roi, params)?;
            let pgm = map.to_pgm().map_err(|e| PipelineError::image(entry.id.clone(), e))?;
            Ok((entry, pgm, feats))
        })
        .collect::<Result<_>>()?;

    let mut out = Outcome::default();
    let mut csv = format!("frame,segment,{}\n", FEATURE_NAMES.join(","));
    for (entry, pgm, feats) in results {
        out.write(cfg.output_dir.join("segments").join(format!("{}.pgm", entry.id)), &pgm)?;
        for (i, row) in feats.rows.iter().enumerate() {
            let _ = write!(csv, "{},{i}", entry.id);
            for v in row {
                let _ = write!(csv, ",{v}");
            }
            csv.push('\n');
        }
    }
    out.write(cfg.output_dir.join("features.csv"), csv.as_bytes())?;
    info!("segmented {} frames", sequence.len());
    Ok(out)
}

pub const MASKS_HEADER: &str = "frame,timestamp,wet_pixels,total_pixels";

pub fn cmd_classify(cfg: &PipelineConfig) -> Result<Outcome> {
    let Inputs { sequence, roi } = open_frames(cfg)?;
    let mut out = Outcome::default();
    let seeds = ingest_seeds(cfg, roi, &mut out.inputs)?;
    let (sp, tp) = (cfg.segment_params(), cfg.tree_params());

    let shared_tree = match cfg.training_mode {
        TrainingMode::TrainOnce => {
            let rep = representative(cfg, &sequence)?;
            let (map, feats) = segment_frame(&read_frame(rep)?, roi, sp)?;
            let tree = train_on_frame(&rep.id, &map, &feats, &seeds, tp)?;
            out.write(cfg.output_dir.join("tree.txt"), tree.to_text().as_bytes())?;
            Some(tree)
        }
        TrainingMode::PerFrame => None,
    };

    let results: Vec<_> = sequence
        .entries()
        .par_iter()
        .map(|entry| {
            let (map, feats) = segment_frame(&read_frame(entry)?, roi, sp)?;
            let own: Option<DecisionTree> = match &shared_tree {
                Some(_) => None,
                None => Some(train_on_frame(&entry.id, &map, &feats, &seeds, tp)?),
            };
            let tree = shared_tree.as_ref().or(own.as_ref()).expect("a tree");
            let mask = classify(&entry.id, &map, &feats, tree, &seeds)?;
            Ok((entry, mask, own))
        })
        .collect::<Result<_>>()?;

    let masks_dir = cfg.masks_dir();
    let mut summary = format!("{MASKS_HEADER}\n");
    for (entry, mask, own) in results {
        out.write(masks_dir.join(format!("{}.pgm", entry.id)), &mask.to_pgm())?;
        if let Some(tree) = own {
            out.write(cfg.output_dir.join("trees").join(format!("{}.txt", entry.id)), tree.to_text().as_bytes())?;
        }
        let _ = writeln!(summary, "{},{},{},{}", entry.id, entry.timestamp, mask.wet_count(), mask.wet.len());
    }
    out.write(cfg.output_dir.join("masks.csv"), summary.as_bytes())?;
    info!("classified {} frames", sequence.len());
    Ok(out)
}

pub fn cmd_resect(cfg: &PipelineConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    let gcps = ingest_gcps(cfg, &mut out.inputs)?;
    let init = load_camera_file(cfg.camera_init()?)?;
    let report: ResectReport = resect_report(&gcps, &init, &cfg.resect_options())?;
    if !report.converged {
        out.warn(format!("resection stopped after {} iterations without converging", report.iterations));
    }
    if !report.behind_camera.is_empty() {
        out.warn(format!("GCPs behind the camera: {:?}", report.behind_camera));
    }
    let camera: Camera = report.camera.into();
    out.write(cfg.output_dir.join("camera.txt"), format_camera(&camera).as_bytes())?;
    out.write(cfg.output_dir.join("residuals.csv"), format_residuals(&gcps, &report.residuals).as_bytes())?;
    out.write(cfg.output_dir.join("resect.txt"), format_resect_summary(&report).as_bytes())?;
    info!("resection rmse {} px after {} iterations", report.rmse, report.iterations);
    Ok(out)
}

/// Camera, DEM and ROI for georeferencing masks.
pub fn load_geometry(cfg: &PipelineConfig) -> Result<(Camera, DemGrid, Roi, PixelGeometry)> {
    let camera = load_camera_file(cfg.require("camera", &cfg.camera)?)?;
    let dem = load_dem(cfg.require("dem", &cfg.dem)?)?;
    let masks = scan_masks(&cfg.masks_dir())?;
    let roi = match (cfg.roi, masks.first()) {
        (Some(roi), _) => roi,
        (None, Some(m)) => {
            let mask = load_mask(&m.path)?;
            Roi::new(0, 0, mask.width, mask.height)
        }
        (None, None) => return Err(PipelineError::Missing("roi")),
    };
    let geometry = PixelGeometry::build(&camera, &dem, roi, &cfg.intersect_options());
    Ok((camera, dem, roi, geometry))
}

pub fn cmd_georef(cfg: &PipelineConfig) -> Result<Outcome> {
    let (_, _, roi, geometry) = load_geometry(cfg)?;
    let mut out = Outcome::default();
    let undefined = roi.pixel_count() - geometry.defined();
    if undefined > 0 {
        out.warn(format!("{undefined} of {} roi pixels have no ground footprint", roi.pixel_count()));
    }
    for entry in scan_masks(&cfg.masks_dir())? {
        let mask = load_mask(&entry.path)?;
        let (collection, skipped) = geometry.collection(&mask, cfg.all, Some(entry.timestamp))?;
        if skipped > 0 {
            info!("frame {}: {skipped} wet pixels without footprint left out", entry.id);
        }
        out.write(
            cfg.output_dir.join("georef").join(format!("{}.geojson", entry.id)),
            collection.to_json().as_bytes(),
        )?;
    }
    Ok(out)
}

pub fn cmd_sofi(cfg: &PipelineConfig) -> Result<Outcome> {
    let (_, _, _, geometry) = load_geometry(cfg)?;
    let areas = geometry.areas();
    let mut samples = Vec::new();
    for entry in scan_masks(&cfg.masks_dir())? {
        let mask = load_mask(&entry.path)?;
        if (mask.width, mask.height) != (geometry.roi.w, geometry.roi.h) {
            return Err(PipelineError::Input(format!("{}: mask size differs from roi", entry.path.display())));
        }
        samples.push(sofi_sample(entry.timestamp, &mask, &areas)?);
    }
    let mut out = Outcome::default();
    out.write(cfg.output_dir.join("sofi.csv"), format_sofi_csv(&samples).as_bytes())?;
    Ok(out)
}

pub fn cmd_correlate(cfg: &PipelineConfig) -> Result<Outcome> {
    let samples = parse_sofi_csv(&read_text(&cfg.sofi_csv())?)?;
    let extent = TimeSeries::from_pairs(
        Unit::Ratio,
        samples.iter().map(|s| {
            let v = match cfg.sofi_column {
                SofiColumn::Pixel => s.pixel_sofi,
                SofiColumn::Projected => s.projected_sofi,
            };
            (s.timestamp, v)
        }),
    )?;
    let well_path = cfg.require("well", &cfg.well)?;
    let (_, well) = parse_well_csv(&read_text(well_path)?, cfg.well_mount_height)?;
    let report = phase_report(&extent, &well, Some(cfg.smoothing_window_s), cfg.max_lag_s)?;
    let mut out = Outcome::default();
    for w in &report.warnings {
        out.warn(w.clone());
    }
    out.write(cfg.output_dir.join("phase_report.txt"), format_phase_report(&report).as_bytes())?;
    Ok(out)
}
