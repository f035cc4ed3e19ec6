use std::path::PathBuf;

use puddlemap::camera_model::CameraError;
use puddlemap::hydro_metrics::MetricsError;
use puddlemap::imagery::ImageError;
use puddlemap::seeds::SeedError;
use puddlemap::segmenter::SegmentError;
use puddlemap::terrain::TerrainError;
use puddlemap::tree_classifier::TreeError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PROCESSING: i32 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Image {
        context: String,
        #[source]
        source: ImageError,
    },
    #[error("seed conflict in frame {frame}: segment {segment} holds both dry and wet seeds")]
    SeedConflict { frame: String, segment: u32 },
    #[error("seeds: {0}")]
    Seeds(SeedError),
    #[error("segmentation: {0}")]
    Segment(#[from] SegmentError),
    #[error("classifier: {0}")]
    Tree(TreeError),
    #[error("camera: {0}")]
    Camera(#[from] CameraError),
    #[error("terrain: {0}")]
    Terrain(#[from] TerrainError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Input(String),
}

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn image(context: impl Into<String>, source: ImageError) -> Self {
        Self::Image {
            context: context.into(),
            source,
        }
    }

    /// Wraps a seed error raised while processing `frame`.
    pub fn seeds(frame: &str, e: SeedError) -> Self {
        match e {
            SeedError::Conflict { segment } => Self::SeedConflict {
                frame: frame.to_string(),
                segment,
            },
            other => Self::Seeds(other),
        }
    }

    pub fn tree(frame: &str, e: TreeError) -> Self {
        match e {
            TreeError::Seed(s) => Self::seeds(frame, s),
            other => Self::Tree(other),
        }
    }

    /// Whether the failure is the caller's input rather than the computation.
    pub fn is_input(&self) -> bool {
        match self {
            Self::Config(_) | Self::Missing(_) | Self::Io { .. } | Self::Image { .. } | Self::Input(_) => true,
            Self::SeedConflict { .. } => false,
            Self::Seeds(_) => true,
            Self::Segment(e) => !matches!(e, SegmentError::DimensionMismatch { .. }),
            Self::Tree(e) => matches!(e, TreeError::Parse { .. } | TreeError::BadParams),
            Self::Camera(e) => !matches!(e, CameraError::BehindCamera { .. }),
            Self::Terrain(e) => matches!(
                e,
                TerrainError::MissingKey(_)
                    | TerrainError::DuplicateKey(_)
                    | TerrainError::BadHeaderValue { .. }
                    | TerrainError::WrongCount { .. }
                    | TerrainError::NonNumeric(_)
                    | TerrainError::BadGeometry
                    | TerrainError::Io(_)
            ),
            Self::Metrics(e) => matches!(
                e,
                MetricsError::Parse { .. }
                    | MetricsError::NotIncreasing(_)
                    | MetricsError::NonFinite(_)
                    | MetricsError::SensorFault { .. }
                    | MetricsError::NonPositiveDistance(_)
                    | MetricsError::BadWindow(_)
            ),
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_input() {
            EXIT_INPUT
        } else {
            EXIT_PROCESSING
        }
    }

    /// Stable machine-readable reason, shared by the CLI log and the service.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Config(_) | Self::Missing(_) => "bad_config",
            Self::Io { .. } => "io_error",
            Self::Image { .. } => "bad_image",
            Self::SeedConflict { .. } => "seed_conflict",
            Self::Seeds(_) => "bad_seeds",
            Self::Segment(_) => "segmentation_failed",
            Self::Tree(_) => "classifier_failed",
            Self::Camera(CameraError::TooFewGcps { .. }) => "too_few_gcps",
            Self::Camera(CameraError::CollinearGcps) => "degenerate_gcps",
            Self::Camera(CameraError::BehindCamera { .. }) => "behind_camera",
            Self::Camera(_) => "bad_camera",
            Self::Terrain(TerrainError::OutOfBounds { .. }) => "out_of_bounds",
            Self::Terrain(TerrainError::NoData { .. }) => "no_data",
            Self::Terrain(_) => "terrain_error",
            Self::Metrics(_) => "metrics_error",
            Self::Input(_) => "bad_input",
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
