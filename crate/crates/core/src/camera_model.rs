//! Pinhole projection and monoplotting resection.
//!
//! A world point `p` maps to the camera frame as `q = R (p + T)` and to the
//! image as `(u, v) = (fx q.x / q.z + cx, fy q.y / q.z + cy)`. `T` is added
//! in world coordinates, so the camera centre is `-T`. `R` is built from
//! omega-phi-kappa angles as `Rz(kappa) Ry(phi) Rx(omega)`; it degenerates
//! (gimbal lock) near `phi = ±π/2`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmt_exact;

/// Points with camera-frame depth at or below this are behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;
/// Residual component assigned to a GCP that projects behind the camera.
pub const BEHIND_CAMERA_PENALTY: f64 = 1e6;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("point projects behind the camera (depth {depth:e})")]
    BehindCamera { depth: f64 },
    #[error("need at least {needed} GCPs for {params} free parameters, got {got}")]
    TooFewGcps { needed: usize, got: usize, params: usize },
    #[error("GCP world coordinates are collinear")]
    CollinearGcps,
    #[error("GCP {index} has a non-finite coordinate")]
    NonFiniteGcp { index: usize },
    #[error("invalid camera parameters: {0}")]
    InvalidCamera(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Omega-phi-kappa rotation (radians) and world-frame translation (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseParams {
    pub omega: f64,
    pub phi: f64,
    pub kappa: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl PoseParams {
    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_matrix(self.omega, self.phi, self.kappa)
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::new(self.tx, self.ty, self.tz)
    }
}

/// Intrinsics and pose together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    #[serde(flatten)]
    pub intrinsics: Intrinsics,
    #[serde(flatten)]
    pub pose: PoseParams,
}

impl Camera {
    pub fn project(&self, p: Vector3<f64>) -> Result<(f64, f64), CameraError> {
        project(&self.intrinsics, &self.pose, p)
    }

    pub fn center(&self) -> Vector3<f64> {
        camera_center(&self.pose)
    }

    /// Parameter vector `[fx, fy, cx, cy, omega, phi, kappa, tx, ty, tz]`.
    pub fn to_params(&self) -> [f64; 10] {
        let (k, p) = (self.intrinsics, self.pose);
        [k.fx, k.fy, k.cx, k.cy, p.omega, p.phi, p.kappa, p.tx, p.ty, p.tz]
    }

    pub fn from_params(v: &[f64; 10]) -> Self {
        Self {
            intrinsics: Intrinsics::new(v[0], v[1], v[2], v[3]),
            pose: PoseParams {
                omega: v[4],
                phi: v[5],
                kappa: v[6],
                tx: v[7],
                ty: v[8],
                tz: v[9],
            },
        }
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if self.to_params().iter().any(|v| !v.is_finite()) {
            return Err(CameraError::InvalidCamera("non-finite parameter".into()));
        }
        if self.intrinsics.fx <= 0.0 || self.intrinsics.fy <= 0.0 {
            return Err(CameraError::InvalidCamera("focal lengths must be positive".into()));
        }
        Ok(())
    }
}

/// Ground control point: image `(u, v)` in pixels, world `(x, y, z)` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gcp {
    pub u: f64,
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Gcp {
    pub fn world(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// `Rz(kappa) * Ry(phi) * Rx(omega)`, right-handed, acting on column vectors.
pub fn rotation_matrix(omega: f64, phi: f64, kappa: f64) -> Matrix3<f64> {
    let (so, co) = omega.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (sk, ck) = kappa.sin_cos();
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, co, -so, 0.0, so, co);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rz = Matrix3::new(ck, -sk, 0.0, sk, ck, 0.0, 0.0, 0.0, 1.0);
    rz * ry * rx
}

pub fn project(intr: &Intrinsics, pose: &PoseParams, p: Vector3<f64>) -> Result<(f64, f64), CameraError> {
    let q = pose.rotation() * (p + pose.translation());
    let h = intr.matrix() * q;
    if h.z <= MIN_DEPTH {
        return Err(CameraError::BehindCamera { depth: h.z });
    }
    Ok((h.x / h.z, h.y / h.z))
}

/// The world point that maps to the camera-frame origin, `-T`.
pub fn camera_center(pose: &PoseParams) -> Vector3<f64> {
    -pose.translation()
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResectOptions {
    pub fix_intrinsics: bool,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ResectOptions {
    fn default() -> Self {
        Self {
            fix_intrinsics: false,
            max_iter: 200,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResectionResult {
    pub camera: Camera,
    /// Observed minus projected image position, per GCP, in pixels.
    pub residuals: Vec<[f64; 2]>,
    pub rmse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Indices of GCPs behind the camera at the final pose.
    pub behind_camera: Vec<usize>,
    /// Sum of squared residuals after the initial guess and each accepted step.
    pub cost_history: Vec<f64>,
}

/// The least-squares problem behind [`resect`], exposed for diagnostics.
#[derive(Debug, Clone)]
pub struct ResectionProblem<'a> {
    gcps: &'a [Gcp],
    /// Fixed intrinsics when only the 6 pose parameters are free.
    fixed: Option<Intrinsics>,
}

impl<'a> ResectionProblem<'a> {
    pub fn new(gcps: &'a [Gcp], init: &Camera, fix_intrinsics: bool) -> Self {
        Self {
            gcps,
            fixed: fix_intrinsics.then_some(init.intrinsics),
        }
    }

    pub fn param_count(&self) -> usize {
        if self.fixed.is_some() {
            6
        } else {
            10
        }
    }

    pub fn params_of(&self, camera: &Camera) -> DVector<f64> {
        let all = camera.to_params();
        DVector::from_column_slice(&all[10 - self.param_count()..])
    }

    pub fn camera_of(&self, params: &DVector<f64>) -> Camera {
        let mut all = [0.0; 10];
        match self.fixed {
            Some(k) => {
                all[..4].copy_from_slice(&[k.fx, k.fy, k.cx, k.cy]);
                all[4..].copy_from_slice(params.as_slice());
            }
            None => all.copy_from_slice(params.as_slice()),
        }
        Camera::from_params(&all)
    }

    /// Stacked `(u_obs - u, v_obs - v)` per GCP; behind-camera GCPs get
    /// the fixed penalty in both components.
    pub fn residuals(&self, params: &DVector<f64>) -> DVector<f64> {
        let camera = self.camera_of(params);
        let mut r = DVector::zeros(2 * self.gcps.len());
        for (i, g) in self.gcps.iter().enumerate() {
            let (du, dv) = match camera.project(g.world()) {
                Ok((u, v)) => (g.u - u, g.v - v),
                Err(_) => (BEHIND_CAMERA_PENALTY, BEHIND_CAMERA_PENALTY),
            };
            r[2 * i] = du;
            r[2 * i + 1] = dv;
        }
        r
    }

    pub fn cost(&self, params: &DVector<f64>) -> f64 {
        self.residuals(params).norm_squared()
    }

    /// Central-difference Jacobian of [`Self::residuals`], step
    /// `max(1e-6, 1e-6 |p_i|)` per parameter.
    pub fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64> {
        let m = 2 * self.gcps.len();
        let n = params.len();
        let mut jac = DMatrix::zeros(m, n);
        let mut probe = params.clone();
        for j in 0..n {
            let h = (1e-6 * params[j].abs()).max(1e-6);
            probe[j] = params[j] + h;
            let plus = self.residuals(&probe);
            probe[j] = params[j] - h;
            let minus = self.residuals(&probe);
            probe[j] = params[j];
            jac.set_column(j, &((plus - minus) / (2.0 * h)));
        }
        jac
    }

    /// Gradient of [`Self::cost`] assembled from the Jacobian, `2 Jᵀ r`.
    pub fn gradient(&self, params: &DVector<f64>) -> DVector<f64> {
        2.0 * self.jacobian(params).transpose() * self.residuals(params)
    }
}

/// Rejects collinear (or coincident) world points: the second singular value
/// of the centred coordinates must exceed `1e-9` times the first.
fn check_not_collinear(gcps: &[Gcp]) -> Result<(), CameraError> {
    let n = gcps.len();
    let mean = gcps.iter().map(Gcp::world).sum::<Vector3<f64>>() / n as f64;
    let centred = DMatrix::from_fn(n, 3, |i, j| gcps[i].world()[j] - mean[j]);
    let mut sv: Vec<f64> = centred.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] == 0.0 || sv[1] < 1e-9 * sv[0] {
        return Err(CameraError::CollinearGcps);
    }
    Ok(())
}

/// Damping above which a rejected step means no further descent is possible.
const LAMBDA_CEILING: f64 = 1e16;

/// Fits intrinsics (unless fixed) and pose to the GCPs by Levenberg–Marquardt
/// on the summed squared reprojection error.
pub fn resect(gcps: &[Gcp], init: &Camera, opts: &ResectOptions) -> Result<ResectionResult, CameraError> {
    init.validate()?;
    if let Some(index) = gcps
        .iter()
        .position(|g| ![g.u, g.v, g.x, g.y, g.z].iter().all(|c| c.is_finite()))
    {
        return Err(CameraError::NonFiniteGcp { index });
    }
    let problem = ResectionProblem::new(gcps, init, opts.fix_intrinsics);
    let params_n = problem.param_count();
    let needed = params_n.div_ceil(2) + 1;
    if gcps.len() < needed {
        return Err(CameraError::TooFewGcps {
            needed,
            got: gcps.len(),
            params: params_n,
        });
    }
    check_not_collinear(gcps)?;

    // Zero-residual floor: an RMSE of 1e-10 px is as exact as the data gets.
    let floor = 1e-20 * gcps.len() as f64;
    let mut params = problem.params_of(init);
    let mut cost = problem.cost(&params);
    let mut history = vec![cost];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        if cost <= floor {
            converged = true;
            break;
        }
        iterations += 1;
        let r = problem.residuals(&params);
        let jac = problem.jacobian(&params);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * r;
        let mut damped = jtj.clone();
        for i in 0..params_n {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
        }
        let step = damped.cholesky().map(|c| c.solve(&(-&g)));
        let candidate = step.map(|d| &params + d);
        let new_cost = candidate.as_ref().map(|p| problem.cost(p)).unwrap_or(f64::INFINITY);
        if new_cost.is_finite() && new_cost < cost {
            let relative = (cost - new_cost) / cost;
            params = candidate.unwrap();
            cost = new_cost;
            history.push(cost);
            lambda = (lambda / 10.0).max(1e-12);
            if relative < opts.tol {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > LAMBDA_CEILING {
                // Even a vanishing gradient step fails to lower the cost.
                converged = true;
                break;
            }
        }
    }

    let mut camera = problem.camera_of(&params);
    camera.pose.omega = wrap_angle(camera.pose.omega);
    camera.pose.phi = wrap_angle(camera.pose.phi);
    camera.pose.kappa = wrap_angle(camera.pose.kappa);
    let (residuals, behind_camera) = gcp_residuals(gcps, &camera);
    let rmse = rmse(&residuals);
    Ok(ResectionResult {
        camera,
        residuals,
        rmse,
        iterations,
        converged,
        behind_camera,
        cost_history: history,
    })
}

/// Residual `observed - projected` per GCP, plus indices of GCPs behind the
/// camera (whose residual carries the penalty value).
pub fn gcp_residuals(gcps: &[Gcp], camera: &Camera) -> (Vec<[f64; 2]>, Vec<usize>) {
    let mut behind = Vec::new();
    let residuals = gcps
        .iter()
        .enumerate()
        .map(|(i, g)| match camera.project(g.world()) {
            Ok((u, v)) => [g.u - u, g.v - v],
            Err(_) => {
                behind.push(i);
                [BEHIND_CAMERA_PENALTY, BEHIND_CAMERA_PENALTY]
            }
        })
        .collect();
    (residuals, behind)
}

/// Root mean square of residual vector norms.
pub fn rmse(residuals: &[[f64; 2]]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    let sum: f64 = residuals.iter().map(|r| r[0] * r[0] + r[1] * r[1]).sum();
    (sum / residuals.len() as f64).sqrt()
}

pub const CAMERA_KEYS: [&str; 10] = ["fx", "fy", "cx", "cy", "omega", "phi", "kappa", "tx", "ty", "tz"];

/// `camera.txt`: one `key = value` line per parameter, 17 significant digits.
pub fn format_camera(camera: &Camera) -> String {
    let mut out = String::new();
    for (key, value) in CAMERA_KEYS.iter().zip(camera.to_params()) {
        let _ = writeln!(out, "{key} = {}", fmt_exact(value));
    }
    out
}

pub fn parse_camera(text: &str) -> Result<Camera, CameraError> {
    let mut values = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| CameraError::Parse { line: i + 1, message };
        let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
        let key = key.trim();
        if !CAMERA_KEYS.contains(&key) {
            return Err(err(format!("unknown key {key:?}")));
        }
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| err(format!("bad number for {key}")))?;
        if values.insert(key, value).is_some() {
            return Err(err(format!("duplicate key {key}")));
        }
    }
    let mut params = [0.0; 10];
    for (slot, key) in params.iter_mut().zip(CAMERA_KEYS) {
        *slot = *values.get(key).ok_or_else(|| CameraError::Parse {
            line: 0,
            message: format!("missing key {key}"),
        })?;
    }
    let camera = Camera::from_params(&params);
    camera.validate()?;
    Ok(camera)
}

pub fn load_camera(path: impl AsRef<Path>) -> Result<Camera, CameraError> {
    parse_camera(&std::fs::read_to_string(path)?)
}

/// `gcps.csv` with header `u,v,X,Y,Z`.
pub fn parse_gcps(text: &str) -> Result<Vec<Gcp>, CameraError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header_ok = reader
        .headers()
        .map(|h| h.iter().eq(["u", "v", "X", "Y", "Z"]))
        .unwrap_or(false);
    if !header_ok {
        return Err(CameraError::Parse {
            line: 1,
            message: "expected header `u,v,X,Y,Z`".into(),
        });
    }
    let mut gcps = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CameraError::Parse {
            line,
            message: e.to_string(),
        })?;
        let vals: Vec<f64> = record
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .filter(|v: &Vec<f64>| v.len() == 5)
            .ok_or_else(|| CameraError::Parse {
                line,
                message: "expected 5 finite reals".into(),
            })?;
        gcps.push(Gcp {
            u: vals[0],
            v: vals[1],
            x: vals[2],
            y: vals[3],
            z: vals[4],
        });
    }
    Ok(gcps)
}

pub fn load_gcps(path: impl AsRef<Path>) -> Result<Vec<Gcp>, CameraError> {
    parse_gcps(&std::fs::read_to_string(path)?)
}

pub fn format_gcps(gcps: &[Gcp]) -> String {
    let mut out = String::from("u,v,X,Y,Z\n");
    for g in gcps {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_exact(g.u),
            fmt_exact(g.v),
            fmt_exact(g.x),
            fmt_exact(g.y),
            fmt_exact(g.z)
        );
    }
    out
}
