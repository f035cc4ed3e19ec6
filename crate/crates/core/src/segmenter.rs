//! Graph-based over-segmentation (Felzenszwalb–Huttenlocher) and the
//! per-segment feature vectors that form the reduced-order image.

use thiserror::Error;

use crate::disjoint_set::DisjointSet;
use crate::imagery::{encode_pgm16, Frame, ImageError, Raster};

/// Length of a segment feature vector.
pub const FEATURE_COUNT: usize = 8;

/// Names of the feature vector entries, in order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mean_r", "mean_g", "mean_b", "std_r", "std_g", "std_b", "centroid_row", "size_fraction",
];

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("cannot segment an empty raster")]
    EmptyRaster,
    #[error("k must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("min_size must be at least 1")]
    BadMinSize,
    #[error("frame is {frame_w}x{frame_h} but the segment map is {map_w}x{map_h}")]
    DimensionMismatch {
        frame_w: usize,
        frame_h: usize,
        map_w: usize,
        map_h: usize,
    },
}

/// Per-pixel segment labels `0..segment_count`, numbered in raster order of
/// first occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub segment_count: usize,
    pub segment_sizes: Vec<usize>,
}

impl SegmentMap {
    pub fn label_at(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    /// 16-bit PGM of the label map, pixel value = label.
    pub fn to_pgm(&self) -> Result<Vec<u8>, ImageError> {
        if self.segment_count > usize::from(u16::MAX) {
            return Err(ImageError::TooManyLabels(self.segment_count));
        }
        let values: Vec<u16> = self.labels.iter().map(|&l| l as u16).collect();
        Ok(encode_pgm16(self.width, self.height, &values))
    }
}

#[derive(Clone, Copy)]
struct Edge {
    weight: f64,
    a: u32,
    b: u32,
}

fn grid_edges(raster: &Raster) -> Vec<Edge> {
    let (w, h) = (raster.width, raster.height);
    let dist = |p: usize, q: usize| {
        let (x, y) = (&raster.data[p * 3..p * 3 + 3], &raster.data[q * 3..q * 3 + 3]);
        ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt()
    };
    let mut edges = Vec::with_capacity(w * h * 4);
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            let mut push = |q: usize| {
                edges.push(Edge {
                    weight: dist(p, q),
                    a: p as u32,
                    b: q as u32,
                })
            };
            if c + 1 < w {
                push(p + 1);
            }
            if r + 1 < h {
                push(p + w);
                if c + 1 < w {
                    push(p + w + 1);
                }
                if c > 0 {
                    push(p + w - 1);
                }
            }
        }
    }
    // Every edge has a < b, so (weight, a, b) is a total order.
    edges.sort_unstable_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    edges
}

/// Segments a smoothed 3-band raster on its 8-connected pixel grid.
///
/// Components `C1`, `C2` joined by edge weight `w` merge iff
/// `w <= min(Int(C1) + k/|C1|, Int(C2) + k/|C2|)`, where `Int` is the
/// largest weight already merged inside the component. A second pass over
/// the same sorted edges absorbs components smaller than `min_size`.
pub fn felzenszwalb(raster: &Raster, k: f64, min_size: usize) -> Result<SegmentMap, SegmentError> {
    let n = raster.width * raster.height;
    if n == 0 || raster.data.len() != n * 3 {
        return Err(SegmentError::EmptyRaster);
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(SegmentError::BadScale(k));
    }
    if min_size == 0 {
        return Err(SegmentError::BadMinSize);
    }

    let edges = grid_edges(raster);
    let mut sets = DisjointSet::new(n);
    for e in &edges {
        let ra = sets.find(e.a as usize);
        let rb = sets.find(e.b as usize);
        if ra == rb {
            continue;
        }
        let threshold = |root: usize| sets.internal(root) + k / sets.size(root) as f64;
        if e.weight <= threshold(ra).min(threshold(rb)) {
            sets.union(ra, rb, e.weight);
        }
    }
    for e in &edges {
        let ra = sets.find(e.a as usize);
        let rb = sets.find(e.b as usize);
        if ra != rb && (sets.size(ra) < min_size || sets.size(rb) < min_size) {
            sets.union(ra, rb, e.weight);
        }
    }

    let mut root_label = vec![u32::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut segment_sizes = Vec::new();
    for p in 0..n {
        let root = sets.find(p);
        if root_label[root] == u32::MAX {
            root_label[root] = segment_sizes.len() as u32;
            segment_sizes.push(0);
        }
        let label = root_label[root];
        segment_sizes[label as usize] += 1;
        labels.push(label);
    }
    Ok(SegmentMap {
        width: raster.width,
        height: raster.height,
        labels,
        segment_count: segment_sizes.len(),
        segment_sizes,
    })
}

/// Per-segment feature vectors; row `i` describes segment `i`.
///
/// Layout: mean R, G, B (0–255), population std R, G, B, mean row / height,
/// segment size / pixel count.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    pub rows: Vec<[f64; FEATURE_COUNT]>,
}

impl SegmentFeatures {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn segment_features(frame: &Frame, segmap: &SegmentMap) -> Result<SegmentFeatures, SegmentError> {
    if frame.width() != segmap.width || frame.height() != segmap.height {
        return Err(SegmentError::DimensionMismatch {
            frame_w: frame.width(),
            frame_h: frame.height(),
            map_w: segmap.width,
            map_h: segmap.height,
        });
    }
    let f = segmap.segment_count;
    let mut sum = vec![[0.0f64; 3]; f];
    let mut row_sum = vec![0.0f64; f];
    let mut count = vec![0usize; f];
    for (p, &label) in segmap.labels.iter().enumerate() {
        let s = label as usize;
        let px = &frame.pixels()[p * 3..p * 3 + 3];
        for b in 0..3 {
            sum[s][b] += f64::from(px[b]);
        }
        row_sum[s] += (p / segmap.width) as f64;
        count[s] += 1;
    }
    let means: Vec<[f64; 3]> = (0..f)
        .map(|s| sum[s].map(|v| v / count[s] as f64))
        .collect();
    // Second pass for the variance keeps it free of cancellation.
    let mut sq = vec![[0.0f64; 3]; f];
    for (p, &label) in segmap.labels.iter().enumerate() {
        let s = label as usize;
        let px = &frame.pixels()[p * 3..p * 3 + 3];
        for b in 0..3 {
            sq[s][b] += (f64::from(px[b]) - means[s][b]).powi(2);
        }
    }
    let total = segmap.labels.len() as f64;
    let rows = (0..f)
        .map(|s| {
            let n = count[s] as f64;
            let m = means[s];
            let sd = sq[s].map(|v| (v / n).sqrt());
            [
                m[0],
                m[1],
                m[2],
                sd[0],
                sd[1],
                sd[2],
                row_sum[s] / n / segmap.height as f64,
                n / total,
            ]
        })
        .collect();
    Ok(SegmentFeatures { rows })
}
