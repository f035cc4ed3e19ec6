//! Surface-water extent mapping from a fixed oblique street camera.
//!
//! The crate is organised along the processing chain:
//!
//! - [`imagery`]: PPM frame I/O, ROI cropping and Gaussian pre-smoothing.
//! - [`segmenter`]: graph-based over-segmentation and per-segment features.
//! - [`seeds`]: sparse dry/wet seed points and training-set assembly.
//! - [`tree_classifier`]: CART decision tree and per-frame water masks.
//! - [`camera_model`]: pinhole projection and GCP-based resection.
//! - [`terrain`]: Esri ASCII DEMs, pixel rays, ground intersection and
//!   per-pixel ground footprints.
//! - [`hydro_metrics`]: pixel and projected SOFI, smoothing, phase
//!   correlation and lag estimation.

pub mod camera_model;
pub mod hydro_metrics;
pub mod imagery;
pub mod segmenter;
pub mod seeds;
pub mod terrain;
pub mod tree_classifier;

mod disjoint_set;

use serde::{Deserialize, Serialize};

/// Binary surface class of a pixel or segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Dry,
    Wet,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Dry => "dry",
            Label::Wet => "wet",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Formats a real with 17 significant digits, enough for an exact
/// `f64` round trip through text.
pub fn fmt_exact(value: f64) -> String {
    format!("{value:.16e}")
}
