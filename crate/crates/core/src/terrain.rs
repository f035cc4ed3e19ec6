//! DEM ingestion, pixel back-projection onto the terrain, and per-pixel
//! ground footprints.
//!
//! World coordinates are a local projected meter grid: X east, Y north,
//! Z up. DEM samples sit at cell centres; the first stored row is the
//! northernmost.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::camera_model::{camera_center, Camera, Intrinsics, PoseParams};
use crate::imagery::Roi;

/// Bisection stops once the height gap drops below this (meters)...
const SURFACE_TOL: f64 = 1e-4;
/// ...and the bracketing interval along the ray is shorter than this.
const BRACKET_TOL: f64 = 1e-7;
/// Snap distance, in cells, for queries that land on a sample position.
const SNAP: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("missing header key {0}")]
    MissingKey(&'static str),
    #[error("duplicate header key {0}")]
    DuplicateKey(String),
    #[error("bad header value for {key}: {value:?}")]
    BadHeaderValue { key: String, value: String },
    #[error("expected {expected} elevation values, found {found}")]
    WrongCount { expected: usize, found: usize },
    #[error("non-numeric elevation token {0:?}")]
    NonNumeric(String),
    #[error("grid must be at least 2x2 with positive cellsize")]
    BadGeometry,
    #[error("({x}, {y}) is outside the DEM sample extent")]
    OutOfBounds { x: f64, y: f64 },
    #[error("({x}, {y}) is adjacent to a nodata sample")]
    NoData { x: f64, y: f64 },
    #[error("ray origin is not above the terrain")]
    OriginBelowSurface,
    #[error("ray does not reach the terrain")]
    NoIntersection,
    #[error("footprint of pixel ({u}, {v}) is undefined")]
    FootprintUndefined { u: f64, v: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemGrid {
    pub ncols: usize,
    pub nrows: usize,
    /// Lower-left corner of the lower-left cell.
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
    /// Row-major, first row northernmost.
    pub elevations: Vec<f64>,
    constant: Option<f64>,
}

impl DemGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        nodata: f64,
        elevations: Vec<f64>,
    ) -> Result<Self, TerrainError> {
        if ncols < 2 || nrows < 2 || !(cellsize > 0.0 && cellsize.is_finite()) || !xll.is_finite() || !yll.is_finite() {
            return Err(TerrainError::BadGeometry);
        }
        let expected = ncols.checked_mul(nrows).ok_or(TerrainError::BadGeometry)?;
        if elevations.len() != expected {
            return Err(TerrainError::WrongCount {
                expected,
                found: elevations.len(),
            });
        }
        let first = elevations[0];
        let constant = (first != nodata && elevations.iter().all(|&z| z == first)).then_some(first);
        Ok(Self {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata,
            elevations,
            constant,
        })
    }

    /// Elevation when every sample holds the same (valid) value.
    pub fn constant_elevation(&self) -> Option<f64> {
        self.constant
    }

    pub fn sample(&self, row: usize, col: usize) -> f64 {
        self.elevations[row * self.ncols + col]
    }

    /// World (X, Y) of the centre of cell (row, col).
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.xll + (col as f64 + 0.5) * self.cellsize,
            self.yll + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize,
        )
    }

    /// Rectangle spanned by the cell centres: (xmin, xmax, ymin, ymax).
    pub fn sample_extent(&self) -> (f64, f64, f64, f64) {
        let half = 0.5 * self.cellsize;
        (
            self.xll + half,
            self.xll + (self.ncols as f64 - 0.5) * self.cellsize,
            self.yll + half,
            self.yll + (self.nrows as f64 - 0.5) * self.cellsize,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.grid_coords(x, y).is_some()
    }

    /// Fractional (row, col) of a world point, `None` outside the extent.
    fn grid_coords(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let snap = |v: f64| if (v - v.round()).abs() < SNAP { v.round() } else { v };
        let col = snap((x - self.xll) / self.cellsize - 0.5);
        let row = snap(self.nrows as f64 - 0.5 - (y - self.yll) / self.cellsize);
        let inside = (0.0..=(self.ncols - 1) as f64).contains(&col) && (0.0..=(self.nrows - 1) as f64).contains(&row);
        inside.then_some((row, col))
    }

    /// Bilinear interpolation over the four surrounding cell centres.
    pub fn elevation_at(&self, x: f64, y: f64) -> Result<f64, TerrainError> {
        let (row, col) = self.grid_coords(x, y).ok_or(TerrainError::OutOfBounds { x, y })?;
        let c0 = (col.floor() as usize).min(self.ncols - 2);
        let r0 = (row.floor() as usize).min(self.nrows - 2);
        let (tc, tr) = (col - c0 as f64, row - r0 as f64);
        let z00 = self.sample(r0, c0);
        let z01 = self.sample(r0, c0 + 1);
        let z10 = self.sample(r0 + 1, c0);
        let z11 = self.sample(r0 + 1, c0 + 1);
        if [z00, z01, z10, z11].contains(&self.nodata) {
            return Err(TerrainError::NoData { x, y });
        }
        let top = lerp(z00, z01, tc);
        let bottom = lerp(z10, z11, tc);
        Ok(lerp(top, bottom, tr))
    }
}

// Exact at both ends and for equal endpoints.
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 1.0 {
        b
    } else {
        a + t * (b - a)
    }
}

/// Parses an Esri ASCII grid. Header keys are case-insensitive;
/// `xllcenter`/`yllcenter` are shifted by half a cell to corner form;
/// `NODATA_value` defaults to -9999 when absent.
pub fn parse_dem(text: &str) -> Result<DemGrid, TerrainError> {
    let mut tokens = text.split_ascii_whitespace().peekable();
    let mut header: Vec<(String, String)> = Vec::new();
    const KEYS: [&str; 8] = [
        "ncols", "nrows", "xllcorner", "yllcorner", "xllcenter", "yllcenter", "cellsize", "nodata_value",
    ];
    while let Some(tok) = tokens.peek() {
        let key = tok.to_ascii_lowercase();
        if !KEYS.contains(&key.as_str()) {
            break;
        }
        tokens.next();
        if header.iter().any(|(k, _)| *k == key) {
            return Err(TerrainError::DuplicateKey(key));
        }
        let value = tokens.next().ok_or_else(|| TerrainError::BadHeaderValue {
            key: key.clone(),
            value: String::new(),
        })?;
        header.push((key, value.to_string()));
    }
    let get = |k: &str| header.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
    let real = |k: &str, v: &str| {
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| TerrainError::BadHeaderValue {
                key: k.to_string(),
                value: v.to_string(),
            })
    };
    let int = |k: &'static str| -> Result<usize, TerrainError> {
        let v = get(k).ok_or(TerrainError::MissingKey(k))?;
        v.parse::<usize>().map_err(|_| TerrainError::BadHeaderValue {
            key: k.to_string(),
            value: v.to_string(),
        })
    };
    let ncols = int("ncols")?;
    let nrows = int("nrows")?;
    let cellsize = real("cellsize", get("cellsize").ok_or(TerrainError::MissingKey("cellsize"))?)?;
    let corner = |corner_key: &'static str, center_key: &'static str| -> Result<f64, TerrainError> {
        match (get(corner_key), get(center_key)) {
            (Some(v), None) => real(corner_key, v),
            (None, Some(v)) => Ok(real(center_key, v)? - 0.5 * cellsize),
            (Some(_), Some(_)) => Err(TerrainError::DuplicateKey(center_key.to_string())),
            (None, None) => Err(TerrainError::MissingKey(corner_key)),
        }
    };
    let xll = corner("xllcorner", "xllcenter")?;
    let yll = corner("yllcorner", "yllcenter")?;
    let nodata = match get("nodata_value") {
        Some(v) => real("nodata_value", v)?,
        None => -9999.0,
    };

    let mut elevations = Vec::new();
    for tok in tokens {
        let z = tok
            .parse::<f64>()
            .ok()
            .filter(|z| z.is_finite())
            .ok_or_else(|| TerrainError::NonNumeric(tok.to_string()))?;
        elevations.push(z);
    }
    let expected = ncols.saturating_mul(nrows);
    if elevations.len() != expected {
        return Err(TerrainError::WrongCount {
            expected,
            found: elevations.len(),
        });
    }
    DemGrid::new(ncols, nrows, xll, yll, cellsize, nodata, elevations)
}

pub fn load_dem(path: impl AsRef<Path>) -> Result<DemGrid, TerrainError> {
    parse_dem(&std::fs::read_to_string(path)?)
}

/// Esri ASCII text with corner-registered header.
pub fn format_dem(dem: &DemGrid) -> String {
    let mut out = format!(
        "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
        dem.ncols, dem.nrows, dem.xll, dem.yll, dem.cellsize, dem.nodata
    );
    for row in dem.elevations.chunks(dem.ncols) {
        let line: Vec<String> = row.iter().map(|z| z.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    /// Unit length.
    pub direction: Vector3<f64>,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + t * self.direction
    }
}

/// Ray from the camera centre through pixel (u, v).
pub fn pixel_ray(intr: &Intrinsics, pose: &PoseParams, u: f64, v: f64) -> Ray {
    let cam_dir = Vector3::new((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
    Ray {
        origin: camera_center(pose),
        direction: (pose.rotation().transpose() * cam_dir).normalize(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectOptions {
    /// Longest accepted distance along the ray, meters.
    pub max_range: f64,
    /// Use the marcher even when the DEM is constant.
    pub force_march: bool,
}

impl Default for IntersectOptions {
    fn default() -> Self {
        Self {
            max_range: 10_000.0,
            force_march: false,
        }
    }
}

/// A terrain hit: world coordinates plus the pixel it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
    pub v: f64,
}

impl GroundPoint {
    pub fn world(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// Parameter range `[0, t_exit]` over which the ray stays inside the DEM
/// sample rectangle (origin assumed inside).
fn exit_parameter(dem: &DemGrid, ray: &Ray) -> f64 {
    let (xmin, xmax, ymin, ymax) = dem.sample_extent();
    let mut t_exit = f64::INFINITY;
    for (o, d, lo, hi) in [
        (ray.origin.x, ray.direction.x, xmin, xmax),
        (ray.origin.y, ray.direction.y, ymin, ymax),
    ] {
        if d > 0.0 {
            t_exit = t_exit.min((hi - o) / d);
        } else if d < 0.0 {
            t_exit = t_exit.min((lo - o) / d);
        }
    }
    t_exit.max(0.0)
}

/// First crossing of the ray with the terrain surface.
///
/// Constant DEMs are intersected analytically. Otherwise the ray is marched
/// in steps of `cellsize / 4` until the height above terrain changes sign,
/// and the bracket is refined by bisection.
pub fn intersect_ground(ray: &Ray, dem: &DemGrid, opts: &IntersectOptions) -> Result<Vector3<f64>, TerrainError> {
    let o = ray.origin;
    let ground_at_origin = dem.elevation_at(o.x, o.y)?;
    if o.z <= ground_at_origin {
        return Err(TerrainError::OriginBelowSurface);
    }
    if ray.direction.z >= 0.0 {
        return Err(TerrainError::NoIntersection);
    }
    let t_end = exit_parameter(dem, ray).min(opts.max_range);

    if let (Some(z0), false) = (dem.constant_elevation(), opts.force_march) {
        let t = (z0 - o.z) / ray.direction.z;
        if t > t_end {
            return Err(TerrainError::NoIntersection);
        }
        return Ok(ray.at(t));
    }

    let height = |t: f64| -> Result<f64, TerrainError> {
        let p = ray.at(t);
        // The last sample sits on the extent boundary; clamp away rounding.
        let (xmin, xmax, ymin, ymax) = dem.sample_extent();
        Ok(p.z - dem.elevation_at(p.x.clamp(xmin, xmax), p.y.clamp(ymin, ymax))?)
    };
    let step = dem.cellsize / 4.0;
    let (mut t_prev, mut f_prev) = (0.0, o.z - ground_at_origin);
    let mut k = 1u64;
    loop {
        let t = (k as f64 * step).min(t_end);
        let f = height(t)?;
        if f <= 0.0 {
            return bisect(ray, t_prev, t, f_prev, &height);
        }
        if t >= t_end {
            return Err(TerrainError::NoIntersection);
        }
        t_prev = t;
        f_prev = f;
        k += 1;
    }
}

fn bisect(
    ray: &Ray,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    height: &impl Fn(f64) -> Result<f64, TerrainError>,
) -> Result<Vector3<f64>, TerrainError> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = height(mid)?;
        if f_mid.abs() < SURFACE_TOL && hi - lo < BRACKET_TOL {
            return Ok(ray.at(mid));
        }
        if f_mid > 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi <= lo {
            break;
        }
    }
    debug_assert!(f_lo > 0.0);
    Ok(ray.at(0.5 * (lo + hi)))
}

/// Ground hit for the centre of pixel (u, v).
pub fn ground_point(camera: &Camera, dem: &DemGrid, u: f64, v: f64, opts: &IntersectOptions) -> Result<GroundPoint, TerrainError> {
    let ray = pixel_ray(&camera.intrinsics, &camera.pose, u, v);
    let p = intersect_ground(&ray, dem, opts)?;
    Ok(GroundPoint { x: p.x, y: p.y, z: p.z, u, v })
}

/// Ground quadrilateral of one pixel and its planimetric area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintCell {
    pub u: f64,
    pub v: f64,
    /// Corners at (u-½, v-½), (u+½, v-½), (u+½, v+½), (u-½, v+½).
    pub quad: [Vector3<f64>; 4],
    pub area: f64,
}

/// Shoelace area of a polygon's (X, Y) projection.
pub fn planimetric_area(points: &[Vector3<f64>]) -> f64 {
    let n = points.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum();
    0.5 * twice.abs()
}

fn footprint_from(u: f64, v: f64, quad: [Vector3<f64>; 4]) -> Result<FootprintCell, TerrainError> {
    let area = planimetric_area(&quad);
    if !(area > 0.0 && area.is_finite()) {
        return Err(TerrainError::FootprintUndefined { u, v });
    }
    Ok(FootprintCell { u, v, quad, area })
}

/// Intersects the four pixel-corner rays of (u, v) with the terrain.
pub fn pixel_footprint(
    camera: &Camera,
    dem: &DemGrid,
    u: f64,
    v: f64,
    opts: &IntersectOptions,
) -> Result<FootprintCell, TerrainError> {
    let corner = |du: f64, dv: f64| {
        let ray = pixel_ray(&camera.intrinsics, &camera.pose, u + du, v + dv);
        intersect_ground(&ray, dem, opts).map_err(|_| TerrainError::FootprintUndefined { u, v })
    };
    let quad = [corner(-0.5, -0.5)?, corner(0.5, -0.5)?, corner(0.5, 0.5)?, corner(-0.5, 0.5)?];
    footprint_from(u, v, quad)
}

/// Footprints of every ROI pixel, row-major over the ROI. Pixel (r, c) of
/// the ROI is image pixel (u, v) = (x0 + c, y0 + r). Corner rays are shared
/// between neighbours; results equal per-pixel [`pixel_footprint`] calls.
pub fn footprint_map(camera: &Camera, dem: &DemGrid, roi: Roi, opts: &IntersectOptions) -> Vec<Option<FootprintCell>> {
    let (cw, ch) = (roi.w + 1, roi.h + 1);
    let corners: Vec<Option<Vector3<f64>>> = (0..ch)
        .flat_map(|j| (0..cw).map(move |i| (i, j)))
        .map(|(i, j)| {
            let u = (roi.x0 + i) as f64 - 0.5;
            let v = (roi.y0 + j) as f64 - 0.5;
            let ray = pixel_ray(&camera.intrinsics, &camera.pose, u, v);
            intersect_ground(&ray, dem, opts).ok()
        })
        .collect();
    let mut out = Vec::with_capacity(roi.pixel_count());
    for r in 0..roi.h {
        for c in 0..roi.w {
            let at = |i: usize, j: usize| corners[j * cw + i];
            let (u, v) = ((roi.x0 + c) as f64, (roi.y0 + r) as f64);
            let cell = match (at(c, r), at(c + 1, r), at(c + 1, r + 1), at(c, r + 1)) {
                (Some(a), Some(b), Some(d), Some(e)) => footprint_from(u, v, [a, b, d, e]).ok(),
                _ => None,
            };
            out.push(cell);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(z: f64, n: usize, cell: f64, origin: f64) -> DemGrid {
        DemGrid::new(n, n, origin, origin, cell, -9999.0, vec![z; n * n]).unwrap()
    }

    #[test]
    fn parse_constant_grid() {
        let dem = parse_dem("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n5 5\n5.0 5\n").unwrap();
        assert_eq!(dem.elevations, vec![5.0; 4]);
        assert_eq!(dem.constant_elevation(), Some(5.0));
        assert_eq!(dem.cellsize, 10.0);
    }

    #[test]
    fn parse_center_registration_and_case() {
        let dem = parse_dem("NCOLS 2\nNRows 2\nXLLCENTER 5\nyllcenter 15\nCellSize 10\nnodata_value -1\n1 2 3 4\n").unwrap();
        assert_eq!((dem.xll, dem.yll), (0.0, 10.0));
        assert_eq!(dem.nodata, -1.0);
    }

    #[test]
    fn parse_errors() {
        let head = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n";
        assert!(matches!(
            parse_dem(&format!("{head}1 2 3\n")),
            Err(TerrainError::WrongCount { expected: 4, found: 3 })
        ));
        assert!(matches!(parse_dem(&format!("{head}1 2 x 4\n")), Err(TerrainError::NonNumeric(_))));
        assert!(matches!(
            parse_dem("ncols 2\nnrows 2\nyllcorner 0\ncellsize 10\n1 2 3 4\n"),
            Err(TerrainError::MissingKey("xllcorner"))
        ));
        assert!(matches!(
            parse_dem("ncols 2\nncols 2\n"),
            Err(TerrainError::DuplicateKey(_))
        ));
        assert!(matches!(
            parse_dem("ncols 1\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 10\n1 2\n"),
            Err(TerrainError::BadGeometry)
        ));
    }

    #[test]
    fn format_round_trip() {
        let dem = DemGrid::new(3, 2, 100.0, -50.0, 2.5, -9999.0, vec![1.0, 2.5, -3.0, 4.0, 5.0, 6.125]).unwrap();
        assert_eq!(parse_dem(&format_dem(&dem)).unwrap(), dem);
    }

    #[test]
    fn bilinear_elevation() {
        // Rows north to south: [0, 10], [0, 10].
        let dem = DemGrid::new(2, 2, 0.0, 0.0, 10.0, -9999.0, vec![0.0, 10.0, 0.0, 10.0]).unwrap();
        let (x, y) = dem.cell_center(0, 1);
        assert_eq!(dem.elevation_at(x, y).unwrap(), 10.0);
        assert_eq!(dem.elevation_at(10.0, 5.0).unwrap(), 5.0);
        assert!(matches!(dem.elevation_at(0.0, 5.0), Err(TerrainError::OutOfBounds { .. })));

        let c = flat(3.0, 4, 10.0, 0.0);
        for (x, y) in [(5.0, 5.0), (17.3, 31.9), (35.0, 35.0)] {
            assert_eq!(c.elevation_at(x, y).unwrap(), 3.0);
        }
        let mut z = vec![1.0; 9];
        z[4] = -9999.0;
        let holes = DemGrid::new(3, 3, 0.0, 0.0, 1.0, -9999.0, z).unwrap();
        assert!(matches!(holes.elevation_at(1.0, 1.0), Err(TerrainError::NoData { .. })));
    }

    #[test]
    fn every_cell_center_is_exact() {
        let z: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin() * 7.0).collect();
        let dem = DemGrid::new(5, 4, 123.4, -56.7, 3.3, -9999.0, z).unwrap();
        for r in 0..4 {
            for c in 0..5 {
                let (x, y) = dem.cell_center(r, c);
                assert_eq!(dem.elevation_at(x, y).unwrap(), dem.sample(r, c));
            }
        }
    }

    fn nadir_camera(height: f64, f: f64) -> Camera {
        // omega = π looks straight down with image v pointing south.
        Camera {
            intrinsics: Intrinsics::new(f, f, 500.0, 500.0),
            pose: PoseParams {
                omega: std::f64::consts::PI,
                phi: 0.0,
                kappa: 0.0,
                tx: 0.0,
                ty: 0.0,
                tz: -height,
            },
        }
    }

    #[test]
    fn ray_examples() {
        let intr = Intrinsics::new(1000.0, 1000.0, 640.0, 360.0);
        let pose = PoseParams::default();
        let ray = pixel_ray(&intr, &pose, 640.0, 360.0);
        assert_eq!(ray.direction, Vector3::new(0.0, 0.0, 1.0));
        let ray = pixel_ray(&intr, &pose, 1640.0, 360.0);
        let expect = Vector3::new(1.0, 0.0, 1.0).normalize();
        assert!((ray.direction - expect).norm() < 1e-15);

        let cam = Camera {
            intrinsics: intr,
            pose: PoseParams { omega: 0.3, phi: -0.2, kappa: 1.0, tx: 4.0, ty: -3.0, tz: 2.0 },
        };
        let ray = pixel_ray(&cam.intrinsics, &cam.pose, 100.0, 650.0);
        let (u, v) = cam.project(ray.at(50.0)).unwrap();
        assert!((u - 100.0).abs() < 1e-9 && (v - 650.0).abs() < 1e-9);
    }

    #[test]
    fn flat_plane_hits() {
        let dem = flat(0.0, 5, 10.0, -25.0);
        let nadir = Ray { origin: Vector3::new(0.0, 0.0, 10.0), direction: Vector3::new(0.0, 0.0, -1.0) };
        let oblique = Ray {
            origin: Vector3::new(0.0, 0.0, 10.0),
            direction: Vector3::new(1.0, 0.0, -1.0).normalize(),
        };
        let opts = IntersectOptions::default();
        assert!((intersect_ground(&nadir, &dem, &opts).unwrap() - Vector3::zeros()).norm() < 1e-12);
        let hit = intersect_ground(&oblique, &dem, &opts).unwrap();
        assert!((hit - Vector3::new(10.0, 0.0, 0.0)).norm() < 1e-12);
        let marched = intersect_ground(&oblique, &dem, &IntersectOptions { force_march: true, ..opts }).unwrap();
        assert!((marched - hit).norm() < 1e-6);
    }

    #[test]
    fn intersection_failures() {
        let dem = flat(0.0, 5, 10.0, -25.0);
        let opts = IntersectOptions::default();
        let up = Ray { origin: Vector3::new(0.0, 0.0, 10.0), direction: Vector3::new(0.0, 0.6, 0.8) };
        assert!(matches!(intersect_ground(&up, &dem, &opts), Err(TerrainError::NoIntersection)));
        let shallow = Ray {
            origin: Vector3::new(0.0, 0.0, 10.0),
            direction: Vector3::new(1.0, 0.0, -0.01).normalize(),
        };
        assert!(matches!(intersect_ground(&shallow, &dem, &opts), Err(TerrainError::NoIntersection)));
        let forced = IntersectOptions { force_march: true, ..opts };
        assert!(matches!(intersect_ground(&shallow, &dem, &forced), Err(TerrainError::NoIntersection)));
        let below = Ray { origin: Vector3::new(0.0, 0.0, -1.0), direction: Vector3::new(0.0, 0.0, -1.0) };
        assert!(matches!(intersect_ground(&below, &dem, &opts), Err(TerrainError::OriginBelowSurface)));
        let short = IntersectOptions { max_range: 5.0, ..opts };
        let nadir = Ray { origin: Vector3::new(0.0, 0.0, 10.0), direction: Vector3::new(0.0, 0.0, -1.0) };
        assert!(matches!(intersect_ground(&nadir, &dem, &short), Err(TerrainError::NoIntersection)));
    }

    #[test]
    fn marcher_finds_first_crossing_of_a_ridge() {
        // A 20 m ridge in the middle column hides the valley behind it.
        let mut z = vec![0.0; 25];
        for r in 0..5 {
            z[r * 5 + 2] = 20.0;
        }
        let dem = DemGrid::new(5, 5, 0.0, 0.0, 10.0, -9999.0, z).unwrap();
        let ray = Ray {
            origin: Vector3::new(5.0, 25.0, 28.0),
            direction: Vector3::new(1.0, 0.0, -0.5).normalize(),
        };
        let hit = intersect_ground(&ray, &dem, &IntersectOptions::default()).unwrap();
        // Surface z = 2(x - 15) on [15, 25]; ray z = 28 - (x - 5)/2.
        // Solve 2x - 30 = 30.5 - x/2 → x = 24.2.
        assert!((hit.x - 24.2).abs() < 1e-4, "{hit:?}");
        assert!((hit.z - dem.elevation_at(hit.x, hit.y).unwrap()).abs() < SURFACE_TOL);
    }

    #[test]
    fn nadir_footprint_area() {
        let h = 100.0;
        let cam = nadir_camera(h, 1000.0);
        let dem = flat(0.0, 10, 10.0, -50.0);
        let cell = pixel_footprint(&cam, &dem, 500.0, 500.0, &IntersectOptions::default()).unwrap();
        let expected = (h / 1000.0).powi(2);
        assert!((cell.area - expected).abs() / expected < 1e-3, "{}", cell.area);
    }

    fn oblique_camera() -> Camera {
        // 10° below the horizon, looking north from 10 m up.
        let pitch = 10f64.to_radians();
        Camera {
            intrinsics: Intrinsics::new(800.0, 800.0, 320.0, 240.0),
            pose: PoseParams {
                omega: std::f64::consts::FRAC_PI_2 + pitch,
                phi: 0.0,
                kappa: 0.0,
                tx: 0.0,
                ty: 0.0,
                tz: -10.0,
            },
        }
    }

    #[test]
    fn oblique_footprints_grow_toward_horizon() {
        let cam = oblique_camera();
        let dem = flat(0.0, 200, 10.0, -1000.0);
        let opts = IntersectOptions::default();
        let mut previous = f64::INFINITY;
        let mut defined = 0;
        for v in (100..480).rev() {
            match pixel_footprint(&cam, &dem, 320.0, v as f64, &opts) {
                Ok(cell) => {
                    if previous.is_finite() {
                        assert!(cell.area > previous, "row {v}");
                    }
                    previous = cell.area;
                    defined += 1;
                }
                Err(TerrainError::FootprintUndefined { .. }) => break,
                Err(e) => panic!("{e}"),
            }
        }
        assert!(defined > 50);
    }

    #[test]
    fn horizon_pixel_is_undefined() {
        let cam = oblique_camera();
        let dem = flat(0.0, 200, 10.0, -1000.0);
        // The horizon sits fy * tan(10°) ≈ 141 px above cy.
        let horizon_v = 240.0 - 800.0 * 10f64.to_radians().tan();
        let err = pixel_footprint(&cam, &dem, 320.0, horizon_v.round(), &IntersectOptions::default());
        assert!(matches!(err, Err(TerrainError::FootprintUndefined { .. })));
    }

    #[test]
    fn footprint_map_matches_single_pixel_calls() {
        let cam = oblique_camera();
        let dem = flat(0.0, 200, 10.0, -1000.0);
        let roi = Roi::new(300, 200, 6, 5);
        let opts = IntersectOptions::default();
        let map = footprint_map(&cam, &dem, roi, &opts);
        for r in 0..roi.h {
            for c in 0..roi.w {
                let single = pixel_footprint(&cam, &dem, (roi.x0 + c) as f64, (roi.y0 + r) as f64, &opts).ok();
                assert_eq!(map[r * roi.w + c], single);
            }
        }
    }

    #[test]
    fn footprints_tile_the_roi_polygon() {
        let cam = oblique_camera();
        let dem = flat(0.0, 200, 10.0, -1000.0);
        let roi = Roi::new(200, 300, 40, 30);
        let opts = IntersectOptions::default();
        let total: f64 = footprint_map(&cam, &dem, roi, &opts).iter().map(|c| c.unwrap().area).sum();
        let corner = |u: f64, v: f64| intersect_ground(&pixel_ray(&cam.intrinsics, &cam.pose, u, v), &dem, &opts).unwrap();
        let (u0, v0) = (roi.x0 as f64 - 0.5, roi.y0 as f64 - 0.5);
        let (u1, v1) = (u0 + roi.w as f64, v0 + roi.h as f64);
        let outline = planimetric_area(&[corner(u0, v0), corner(u1, v0), corner(u1, v1), corner(u0, v1)]);
        assert!((total - outline).abs() / outline < 0.01);
    }
}
