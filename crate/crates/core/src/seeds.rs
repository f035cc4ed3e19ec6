//! Sparse seed points and the per-segment training set they induce.
//!
//! Seed coordinates are ROI-relative `(row, col)` integers; the segment map
//! they are matched against covers the same ROI.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::imagery::Roi;
use crate::segmenter::{SegmentFeatures, SegmentMap};
use crate::Label;

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("grid counts must be at least 1 (nx = {nx}, ny = {ny})")]
    EmptyGrid { nx: usize, ny: usize },
    #[error("a {nx}x{ny} grid is denser than the {w}x{h} roi")]
    GridTooDense { nx: usize, ny: usize, w: usize, h: usize },
    #[error("line {line}: seed ({row}, {col}) lies outside the {w}x{h} roi")]
    OutOfRoi {
        line: usize,
        row: i64,
        col: i64,
        w: usize,
        h: usize,
    },
    #[error("seed ({row}, {col}) outside the {width}x{height} segment map")]
    OutOfMap {
        row: usize,
        col: usize,
        width: usize,
        height: usize,
    },
    #[error("duplicate seed at ({row}, {col})")]
    Duplicate { row: usize, col: usize },
    #[error("line {line}: unknown seed label {token:?}")]
    UnknownLabel { line: usize, token: String },
    #[error("seed file must start with header `row,col,label`")]
    BadHeader,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("segment {segment} contains both dry and wet seeds")]
    Conflict { segment: u32 },
    #[error("segment map and features disagree: {map} segments vs {features} feature rows")]
    FeatureMismatch { map: usize, features: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeedLabel {
    Dry,
    Wet,
    Unlabeled,
}

impl SeedLabel {
    pub fn class(self) -> Option<Label> {
        match self {
            SeedLabel::Dry => Some(Label::Dry),
            SeedLabel::Wet => Some(Label::Wet),
            SeedLabel::Unlabeled => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeedLabel::Dry => "dry",
            SeedLabel::Wet => "wet",
            SeedLabel::Unlabeled => "unlabeled",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.trim().to_ascii_lowercase().as_str() {
            "dry" => Some(SeedLabel::Dry),
            "wet" => Some(SeedLabel::Wet),
            "unlabeled" => Some(SeedLabel::Unlabeled),
            _ => None,
        }
    }
}

impl From<Label> for SeedLabel {
    fn from(label: Label) -> Self {
        match label {
            Label::Dry => SeedLabel::Dry,
            Label::Wet => SeedLabel::Wet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedPoint {
    pub row: usize,
    pub col: usize,
    pub label: SeedLabel,
}

/// Ordered seed points with unique coordinates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedSet {
    points: Vec<SeedPoint>,
}

impl SeedSet {
    pub fn new(points: Vec<SeedPoint>) -> Result<Self, SeedError> {
        let mut seen = std::collections::HashSet::with_capacity(points.len());
        for p in &points {
            if !seen.insert((p.row, p.col)) {
                return Err(SeedError::Duplicate { row: p.row, col: p.col });
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[SeedPoint] {
        &self.points
    }

    /// Total seed count `l`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn count(&self, label: SeedLabel) -> usize {
        self.points.iter().filter(|p| p.label == label).count()
    }

    /// `l1`: permanently dry seeds.
    pub fn dry_count(&self) -> usize {
        self.count(SeedLabel::Dry)
    }

    /// `l2`: permanently wet seeds.
    pub fn wet_count(&self) -> usize {
        self.count(SeedLabel::Wet)
    }

    /// `l0`: seeds left undetermined.
    pub fn unlabeled_count(&self) -> usize {
        self.count(SeedLabel::Unlabeled)
    }

    /// Human labels carried by this set, `l1 + l2`.
    pub fn labeled_count(&self) -> usize {
        self.dry_count() + self.wet_count()
    }

    /// Returns a copy with the labels of matching coordinates replaced.
    pub fn relabel(&self, updates: &[SeedPoint]) -> Result<Self, SeedError> {
        let mut points = self.points.clone();
        for u in updates {
            match points.iter_mut().find(|p| (p.row, p.col) == (u.row, u.col)) {
                Some(p) => p.label = u.label,
                None => points.push(*u),
            }
        }
        Self::new(points)
    }
}

/// Regular `nx` x `ny` grid of unlabeled seeds centred in the cells of the ROI.
pub fn make_grid(roi: Roi, nx: usize, ny: usize) -> Result<SeedSet, SeedError> {
    if nx == 0 || ny == 0 {
        return Err(SeedError::EmptyGrid { nx, ny });
    }
    let dense = SeedError::GridTooDense {
        nx,
        ny,
        w: roi.w,
        h: roi.h,
    };
    let position = |i: usize, n: usize, extent: usize| ((i as f64 + 0.5) * extent as f64 / n as f64).round() as usize;
    let rows: Vec<usize> = (0..ny).map(|j| position(j, ny, roi.h)).collect();
    let cols: Vec<usize> = (0..nx).map(|i| position(i, nx, roi.w)).collect();
    let inside = rows.iter().all(|&r| r < roi.h) && cols.iter().all(|&c| c < roi.w);
    if !inside || rows.windows(2).any(|p| p[0] == p[1]) || cols.windows(2).any(|p| p[0] == p[1]) {
        return Err(dense);
    }
    let points = rows
        .iter()
        .flat_map(|&row| {
            cols.iter().map(move |&col| SeedPoint {
                row,
                col,
                label: SeedLabel::Unlabeled,
            })
        })
        .collect();
    SeedSet::new(points)
}

/// Parses `seeds.csv` text (header `row,col,label`).
pub fn parse_seeds(text: &str, roi: Roi) -> Result<SeedSet, SeedError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|_| SeedError::BadHeader)?;
    let names: Vec<String> = header.iter().map(str::to_ascii_lowercase).collect();
    if names != ["row", "col", "label"] {
        return Err(SeedError::BadHeader);
    }
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| SeedError::Syntax {
            line,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(SeedError::Syntax {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let int = |s: &str| {
            s.parse::<i64>().map_err(|_| SeedError::Syntax {
                line,
                message: format!("not an integer: {s:?}"),
            })
        };
        let row = int(&record[0])?;
        let col = int(&record[1])?;
        let label = SeedLabel::parse(&record[2]).ok_or_else(|| SeedError::UnknownLabel {
            line,
            token: record[2].to_string(),
        })?;
        if row < 0 || col < 0 || row as u64 >= roi.h as u64 || col as u64 >= roi.w as u64 {
            return Err(SeedError::OutOfRoi {
                line,
                row,
                col,
                w: roi.w,
                h: roi.h,
            });
        }
        points.push(SeedPoint {
            row: row as usize,
            col: col as usize,
            label,
        });
    }
    SeedSet::new(points)
}

pub fn load_seeds(path: impl AsRef<Path>, roi: Roi) -> Result<SeedSet, SeedError> {
    let text = std::fs::read_to_string(path)?;
    parse_seeds(&text, roi)
}

/// Renders `seeds.csv` with LF line endings.
pub fn format_seeds(seeds: &SeedSet) -> String {
    let mut out = String::from("row,col,label\n");
    for p in seeds.points() {
        let _ = writeln!(out, "{},{},{}", p.row, p.col, p.label.as_str());
    }
    out
}

/// One labeled segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub features: Vec<f64>,
    pub label: Label,
    pub segment: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub examples: Vec<TrainingExample>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Builds a set from bare feature vectors (no originating segment).
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Vec<f64>, Label)>) -> Self {
        Self {
            examples: pairs
                .into_iter()
                .map(|(features, label)| TrainingExample {
                    features,
                    label,
                    segment: None,
                })
                .collect(),
        }
    }
}

/// The label each seeded segment is forced to, keyed by segment id.
pub fn seeded_segments(seeds: &SeedSet, segmap: &SegmentMap) -> Result<BTreeMap<u32, Label>, SeedError> {
    let mut by_segment = BTreeMap::new();
    for p in seeds.points() {
        let Some(label) = p.label.class() else { continue };
        if p.row >= segmap.height || p.col >= segmap.width {
            return Err(SeedError::OutOfMap {
                row: p.row,
                col: p.col,
                width: segmap.width,
                height: segmap.height,
            });
        }
        let segment = segmap.label_at(p.row, p.col);
        match by_segment.insert(segment, label) {
            Some(previous) if previous != label => return Err(SeedError::Conflict { segment }),
            _ => {}
        }
    }
    Ok(by_segment)
}

/// Every segment holding both DRY and WET seeds, ascending. Seeds outside
/// the map are ignored here; [`seeded_segments`] reports them.
pub fn seed_conflicts(seeds: &SeedSet, segmap: &SegmentMap) -> Vec<u32> {
    let mut seen: BTreeMap<u32, Label> = BTreeMap::new();
    let mut conflicts = std::collections::BTreeSet::new();
    for p in seeds.points() {
        let Some(label) = p.label.class() else { continue };
        if p.row >= segmap.height || p.col >= segmap.width {
            continue;
        }
        let segment = segmap.label_at(p.row, p.col);
        if *seen.entry(segment).or_insert(label) != label {
            conflicts.insert(segment);
        }
    }
    conflicts.into_iter().collect()
}

/// One training example per seeded segment, in ascending segment order.
pub fn seeds_to_training(
    seeds: &SeedSet,
    segmap: &SegmentMap,
    feats: &SegmentFeatures,
) -> Result<TrainingSet, SeedError> {
    if feats.len() != segmap.segment_count {
        return Err(SeedError::FeatureMismatch {
            map: segmap.segment_count,
            features: feats.len(),
        });
    }
    let examples = seeded_segments(seeds, segmap)?
        .into_iter()
        .map(|(segment, label)| TrainingExample {
            features: feats.rows[segment as usize].to_vec(),
            label,
            segment: Some(segment),
        })
        .collect();
    Ok(TrainingSet { examples })
}
