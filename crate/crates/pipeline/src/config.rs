//! `key = value` configuration with same-named `--key value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use puddlemap::imagery::Roi;
use puddlemap::tree_classifier::TrainingMode;

use crate::error::{PipelineError, Result};

/// Which SOFI column `correlate` compares with the well series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SofiColumn {
    Pixel,
    Projected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub frames_dir: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub gcps: Option<PathBuf>,
    pub dem: Option<PathBuf>,
    /// Camera used for georeferencing.
    pub camera: Option<PathBuf>,
    /// Initial guess for resection; falls back to `camera`.
    pub camera_init: Option<PathBuf>,
    pub well: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Where `classify` writes masks and `georef`/`sofi` read them.
    pub masks_dir: Option<PathBuf>,
    /// SOFI series read by `correlate`.
    pub sofi_csv: Option<PathBuf>,

    pub sigma: f64,
    pub k: f64,
    pub min_size: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub training_mode: TrainingMode,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub smoothing_window_s: f64,
    pub max_lag_s: f64,
    pub roi: Option<Roi>,
    pub representative_frame: Option<String>,
    pub well_mount_height: Option<f64>,
    pub fix_intrinsics: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub max_range: f64,
    pub sofi_column: SofiColumn,
    /// `georef` also emits dry pixels.
    pub all: bool,
    pub port: u16,
    pub bind: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            frames_dir: None,
            seeds: None,
            gcps: None,
            dem: None,
            camera: None,
            camera_init: None,
            well: None,
            output_dir: PathBuf::from("out"),
            masks_dir: None,
            sofi_csv: None,
            sigma: 0.8,
            k: 300.0,
            min_size: 20,
            max_depth: 8,
            min_leaf: 1,
            training_mode: TrainingMode::TrainOnce,
            grid_nx: 12,
            grid_ny: 9,
            smoothing_window_s: 300.0,
            max_lag_s: 1800.0,
            roi: None,
            representative_frame: None,
            well_mount_height: None,
            fix_intrinsics: false,
            max_iter: 200,
            tol: 1e-12,
            max_range: 10_000.0,
            sofi_column: SofiColumn::Projected,
            all: false,
            port: 8080,
            bind: "127.0.0.1".into(),
        }
    }
}

pub const KEYS: [&str; 31] = [
    "frames_dir",
    "seeds",
    "gcps",
    "dem",
    "camera",
    "camera_init",
    "well",
    "output_dir",
    "masks_dir",
    "sofi_csv",
    "sigma",
    "k",
    "min_size",
    "max_depth",
    "min_leaf",
    "training_mode",
    "grid_nx",
    "grid_ny",
    "smoothing_window_s",
    "max_lag_s",
    "roi",
    "representative_frame",
    "well_mount_height",
    "fix_intrinsics",
    "max_iter",
    "tol",
    "max_range",
    "sofi_column",
    "all",
    "port",
    "bind",
];

const BOOLEAN_KEYS: [&str; 2] = ["fix_intrinsics", "all"];

/// Parses config text into raw pairs. Blank lines and `#` comments are
/// skipped; keys may not repeat.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| PipelineError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().to_string();
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(PipelineError::Config(format!("line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(out)
}

/// Parses `--key value` override tokens. Boolean keys may omit the value.
pub fn parse_overrides(tokens: &[String]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut i = 0;
    while i < tokens.len() {
        let key = tokens[i]
            .strip_prefix("--")
            .ok_or_else(|| PipelineError::Config(format!("expected `--key`, got `{}`", tokens[i])))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let next = tokens.get(i + 1).filter(|t| !t.starts_with("--"));
                match next {
                    Some(v) => {
                        i += 1;
                        (key.to_string(), v.clone())
                    }
                    None if BOOLEAN_KEYS.contains(&key) => (key.to_string(), "true".into()),
                    None => return Err(PipelineError::Config(format!("`--{key}` needs a value"))),
                }
            }
        };
        out.insert(key.replace('-', "_"), value);
        i += 1;
    }
    Ok(out)
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| PipelineError::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn real(key: &str, value: &str) -> Result<f64> {
    let v: f64 = number(key, value)?;
    if !v.is_finite() {
        return Err(PipelineError::Config(format!("`{key}` must be finite")));
    }
    Ok(v)
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(PipelineError::Config(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

/// Parses `x0,y0,w,h`.
pub fn parse_roi(value: &str) -> Result<Roi> {
    let parts: Vec<usize> = value
        .split(',')
        .map(|p| number("roi", p.trim()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [x0, y0, w, h] if w > 0 && h > 0 => Ok(Roi::new(x0, y0, w, h)),
        _ => Err(PipelineError::Config(format!("`roi`: expected x0,y0,w,h with w,h >= 1, got `{value}`"))),
    }
}

impl PipelineConfig {
    /// Builds a config from a file (optional) plus overrides. Relative paths
    /// in the file resolve against the file's directory.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut pairs = BTreeMap::new();
        let mut base = None;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
            pairs = parse_pairs(&text)?;
            base = path.parent().map(Path::to_path_buf);
        }
        let cli = parse_overrides(overrides)?;
        let mut cfg = Self::default();
        for (key, value) in &pairs {
            cfg.set(key, value, base.as_deref())?;
        }
        for (key, value) in &cli {
            cfg.set(key, value, None)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in pairs {
            cfg.set(k, v, None)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let path = || {
            let p = PathBuf::from(value);
            match base {
                Some(b) if p.is_relative() && !b.as_os_str().is_empty() => b.join(p),
                _ => p,
            }
        };
        match key {
            "frames_dir" => self.frames_dir = Some(path()),
            "seeds" => self.seeds = Some(path()),
            "gcps" => self.gcps = Some(path()),
            "dem" => self.dem = Some(path()),
            "camera" => self.camera = Some(path()),
            "camera_init" => self.camera_init = Some(path()),
            "well" => self.well = Some(path()),
            "output_dir" => self.output_dir = path(),
            "masks_dir" => self.masks_dir = Some(path()),
            "sofi_csv" => self.sofi_csv = Some(path()),
            "sigma" => self.sigma = real(key, value)?,
            "k" => self.k = real(key, value)?,
            "min_size" => self.min_size = number(key, value)?,
            "max_depth" => self.max_depth = number(key, value)?,
            "min_leaf" => self.min_leaf = number(key, value)?,
            "training_mode" => {
                self.training_mode = TrainingMode::parse(value)
                    .ok_or_else(|| PipelineError::Config(format!("`training_mode`: unknown mode `{value}`")))?
            }
            "grid_nx" => self.grid_nx = number(key, value)?,
            "grid_ny" => self.grid_ny = number(key, value)?,
            "smoothing_window_s" => self.smoothing_window_s = real(key, value)?,
            "max_lag_s" => self.max_lag_s = real(key, value)?,
            "roi" => self.roi = Some(parse_roi(value)?),
            "representative_frame" => self.representative_frame = Some(value.to_string()),
            "well_mount_height" => self.well_mount_height = Some(real(key, value)?),
            "fix_intrinsics" => self.fix_intrinsics = boolean(key, value)?,
            "max_iter" => self.max_iter = number(key, value)?,
            "tol" => self.tol = real(key, value)?,
            "max_range" => self.max_range = real(key, value)?,
            "sofi_column" => {
                self.sofi_column = match value {
                    "pixel" => SofiColumn::Pixel,
                    "projected" => SofiColumn::Projected,
                    _ => return Err(PipelineError::Config(format!("`sofi_column`: expected pixel or projected, got `{value}`"))),
                }
            }
            "all" => self.all = boolean(key, value)?,
            "port" => self.port = number(key, value)?,
            "bind" => self.bind = value.to_string(),
            _ => return Err(PipelineError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(PipelineError::Config(msg.to_string()));
        if !(0.0..=10.0).contains(&self.sigma) {
            return bad("`sigma` must be in [0, 10]");
        }
        if !(self.k > 0.0) {
            return bad("`k` must be positive");
        }
        if self.min_size == 0 {
            return bad("`min_size` must be at least 1");
        }
        if !(1..=64).contains(&self.max_depth) {
            return bad("`max_depth` must be in [1, 64]");
        }
        if self.min_leaf == 0 {
            return bad("`min_leaf` must be at least 1");
        }
        if self.grid_nx == 0 || self.grid_ny == 0 {
            return bad("`grid_nx` and `grid_ny` must be at least 1");
        }
        if !(self.smoothing_window_s > 0.0) {
            return bad("`smoothing_window_s` must be positive");
        }
        if !(self.max_lag_s >= 0.0) {
            return bad("`max_lag_s` must be non-negative");
        }
        if self.well_mount_height.is_some_and(|h| !(h > 0.0)) {
            return bad("`well_mount_height` must be positive");
        }
        if self.max_iter == 0 {
            return bad("`max_iter` must be at least 1");
        }
        if !(self.tol > 0.0) {
            return bad("`tol` must be positive");
        }
        if !(self.max_range > 0.0) {
            return bad("`max_range` must be positive");
        }
        let named = [
            ("frames_dir", &self.frames_dir),
            ("seeds", &self.seeds),
            ("gcps", &self.gcps),
            ("dem", &self.dem),
            ("camera", &self.camera),
            ("well", &self.well),
            ("masks_dir", &self.masks_dir),
            ("sofi_csv", &self.sofi_csv),
        ];
        let mut seen: Vec<(&str, &Path)> = vec![("output_dir", self.output_dir.as_path())];
        for (name, p) in named {
            let Some(p) = p else { continue };
            if let Some((other, _)) = seen.iter().find(|(_, q)| *q == p.as_path()) {
                return Err(PipelineError::Config(format!("`{name}` and `{other}` name the same path")));
            }
            seen.push((name, p));
        }
        Ok(())
    }

    pub fn require<'a>(&self, name: &'static str, value: &'a Option<PathBuf>) -> Result<&'a Path> {
        value.as_deref().ok_or(PipelineError::Missing(name))
    }

    pub fn masks_dir(&self) -> PathBuf {
        self.masks_dir.clone().unwrap_or_else(|| self.output_dir.join("masks"))
    }

    pub fn sofi_csv(&self) -> PathBuf {
        self.sofi_csv.clone().unwrap_or_else(|| self.output_dir.join("sofi.csv"))
    }

    pub fn camera_init(&self) -> Result<&Path> {
        self.camera_init
            .as_deref()
            .or(self.camera.as_deref())
            .ok_or(PipelineError::Missing("camera_init"))
    }
}
