//! Synthetic street-camera fixture shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use puddlemap::camera_model::{format_camera, format_gcps, Camera, Gcp, Intrinsics, PoseParams};
use puddlemap::imagery::{save_frame, Frame};
use puddlemap::terrain::{format_dem, pixel_ray, DemGrid};
use puddlemap_pipeline::PipelineConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WIDTH: usize = 320;
pub const HEIGHT: usize = 180;
pub const T0: f64 = 1_600_000_000.0;
pub const FRAME_STEP: f64 = 30.0;
pub const WELL_LAG: f64 = 600.0;

pub const DRY: [u8; 3] = [150, 150, 145];
pub const WET: [u8; 3] = [40, 60, 110];

pub const DRY_ROWS: [usize; 2] = [10, 25];
pub const WET_ROWS: [usize; 4] = [130, 145, 160, 175];

/// Camera 6 m above flat ground at the origin, looking along +Y, 20 degrees down.
pub fn fixture_camera() -> Camera {
    Camera {
        intrinsics: Intrinsics::new(300.0, 300.0, 160.0, 90.0),
        pose: PoseParams {
            omega: FRAC_PI_2 + 20f64.to_radians(),
            phi: 0.0,
            kappa: 0.0,
            tx: 0.0,
            ty: 0.0,
            tz: -6.0,
        },
    }
}

pub fn flat_dem() -> DemGrid {
    DemGrid::new(61, 61, -300.0, -300.0, 10.0, -9999.0, vec![0.0; 61 * 61]).unwrap()
}

/// First wet row of frame `i` of `n`: 120 at the ends, 60 at the middle.
pub fn waterline(i: usize, n: usize) -> usize {
    let mid = (n - 1) as f64 / 2.0;
    let rise = 1.0 - (i as f64 - mid).abs() / mid.max(1.0);
    (120.0 - 60.0 * rise).round() as usize
}

pub fn wet_fraction(i: usize, n: usize) -> f64 {
    (HEIGHT - waterline(i, n)) as f64 / HEIGHT as f64
}

pub fn frame(i: usize, n: usize) -> Frame {
    let line = waterline(i, n);
    let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
    Frame::from_fn(WIDTH, HEIGHT, |r, _| {
        let base = if r < line { DRY } else { WET };
        base.map(|c| c.saturating_add_signed(rng.gen_range(-3i8..=3)))
    })
}

pub fn seeds_csv() -> String {
    let mut out = String::from("row,col,label\n");
    for &r in &DRY_ROWS {
        for c in 0..8 {
            out.push_str(&format!("{r},{},dry\n", 20 + 40 * c));
        }
    }
    for &r in &WET_ROWS {
        for c in 0..23 {
            out.push_str(&format!("{r},{},wet\n", 6 + 14 * c));
        }
    }
    // Unlabeled grid points are not human judgments and must not be counted.
    out.push_str("90,160,unlabeled\n");
    out
}

/// GCPs on poles and facades 0..4 m high, seen by `camera`.
pub fn gcps(camera: &Camera, n: usize, seed: u64) -> Vec<Gcp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u = rng.gen_range(10.0..310.0);
            let v = rng.gen_range(10.0..170.0);
            let z = rng.gen_range(0.0..4.0);
            let ray = pixel_ray(&camera.intrinsics, &camera.pose, u, v);
            let t = (z - ray.origin.z) / ray.direction.z;
            let t = if t > 0.0 && t < 150.0 { t } else { rng.gen_range(15.0..60.0) };
            let p: Vector3<f64> = ray.at(t);
            let (u, v) = camera.project(p).unwrap();
            Gcp { u, v, x: p.x, y: p.y, z: p.z }
        })
        .collect()
}

pub fn perturbed(camera: &Camera) -> Camera {
    let mut c = *camera;
    c.intrinsics.fx *= 1.03;
    c.intrinsics.fy *= 0.98;
    c.pose.omega += 0.02;
    c.pose.kappa -= 0.01;
    c.pose.tx += 0.7;
    c.pose.tz -= 0.5;
    c
}

/// Well depth follows the wet fraction `lag` seconds late, sampled every `step` s.
pub fn well_csv(n: usize, step: f64, lag: f64) -> String {
    let end = T0 + (n - 1) as f64 * FRAME_STEP;
    let mut out = String::from("timestamp,depth_m\n");
    let mut t = T0;
    while t <= end {
        let src = ((t - lag - T0) / FRAME_STEP).clamp(0.0, (n - 1) as f64);
        let (i0, frac) = (src.floor() as usize, src.fract());
        let i1 = (i0 + 1).min(n - 1);
        let w = wet_fraction(i0, n) * (1.0 - frac) + wet_fraction(i1, n) * frac;
        out.push_str(&format!("{t},{}\n", 0.2 + 0.5 * w));
        t += step;
    }
    out
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub frames: usize,
}

impl Fixture {
    /// Writes `frames` frames plus every input file and a `pipeline.conf`.
    pub fn new(frames: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        fs::create_dir(root.join("frames")).unwrap();
        for i in 0..frames {
            let ts = T0 + i as f64 * FRAME_STEP;
            save_frame(&frame(i, frames), root.join("frames").join(format!("{ts}.ppm"))).unwrap();
        }
        let camera = fixture_camera();
        fs::write(root.join("seeds.csv"), seeds_csv()).unwrap();
        fs::write(root.join("gcps.csv"), format_gcps(&gcps(&camera, 10, 7))).unwrap();
        fs::write(root.join("camera_init.txt"), format_camera(&perturbed(&camera))).unwrap();
        fs::write(root.join("camera_true.txt"), format_camera(&camera)).unwrap();
        fs::write(root.join("dem.asc"), format_dem(&flat_dem())).unwrap();
        fs::write(root.join("well.csv"), well_csv(frames, 60.0, WELL_LAG)).unwrap();
        let conf = "\
frames_dir = frames
seeds = seeds.csv
gcps = gcps.csv
camera_init = camera_init.txt
camera = out/camera.txt
dem = dem.asc
well = well.csv
output_dir = out
";
        fs::write(root.join("pipeline.conf"), conf).unwrap();
        Self { dir, frames }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn config_path(&self) -> PathBuf {
        self.root().join("pipeline.conf")
    }

    pub fn config(&self, overrides: &[&str]) -> PipelineConfig {
        let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        PipelineConfig::load(Some(&self.config_path()), &overrides).unwrap()
    }

    /// Absolute path of a fixture file, as an override value.
    pub fn p(&self, name: &str) -> String {
        self.root().join(name).to_string_lossy().into_owned()
    }

    pub fn out(&self) -> PathBuf {
        self.root().join("out")
    }
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
