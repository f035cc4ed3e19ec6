//! CART decision tree over segment features, and per-frame water masks.

use std::fmt::Write as _;

use thiserror::Error;

use crate::imagery::{encode_pgm8, parse_pgm8, ImageError};
use crate::seeds::{seeded_segments, SeedError, SeedSet, TrainingSet};
use crate::segmenter::{SegmentFeatures, SegmentMap};
use crate::{fmt_exact, Label};

/// Gain margin below which two candidate splits count as tied.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("max_depth and min_leaf must be at least 1")]
    BadParams,
    #[error("training examples disagree on feature count ({0} vs {1})")]
    RaggedFeatures(usize, usize),
    #[error("feature vector has {got} entries, tree expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("segment map has {map} segments but {features} feature rows")]
    FeatureMismatch { map: usize, features: usize },
    #[error("tree text line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Seed(#[from] SeedError),
}

/// How a trained classifier is carried across the frames of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainingMode {
    /// Train on the representative frame, reuse the tree on every frame.
    #[default]
    TrainOnce,
    /// Rebuild the training set from the permanent seeds on each frame.
    PerFrame,
}

impl TrainingMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train-once" => Some(TrainingMode::TrainOnce),
            "per-frame" => Some(TrainingMode::PerFrame),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrainingMode::TrainOnce => "train-once",
            TrainingMode::PerFrame => "per-frame",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: Label,
        purity: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    /// Node 0 is the root; children always have larger ids than parents.
    pub nodes: Vec<Node>,
    pub feature_count: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Set when training saw only one class and returned a single leaf.
    pub single_class: bool,
}

/// Gini impurity of a binary node with `wet` of `n` examples wet.
pub fn gini(wet: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = wet as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// A candidate split with its impurity reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Best (feature, midpoint threshold) split of `idx` by Gini reduction;
/// ties resolve to the lower feature index, then the lower threshold.
/// Zero-gain splits are admissible so impure nodes whose classes are only
/// separable jointly (e.g. XOR) still make progress.
pub fn best_split(ts: &TrainingSet, idx: &[usize], min_leaf: usize) -> Option<SplitChoice> {
    let n = idx.len();
    let wet_total = idx.iter().filter(|&&i| ts.examples[i].label == Label::Wet).count();
    let parent = gini(wet_total, n);
    let feature_count = ts.examples[idx[0]].features.len();
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for f in 0..feature_count {
        order.sort_by(|&a, &b| ts.examples[a].features[f].total_cmp(&ts.examples[b].features[f]));
        let mut wet_left = 0;
        for pos in 0..n - 1 {
            if ts.examples[order[pos]].label == Label::Wet {
                wet_left += 1;
            }
            let here = ts.examples[order[pos]].features[f];
            let next = ts.examples[order[pos + 1]].features[f];
            if here == next {
                continue;
            }
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let child = (n_left as f64 * gini(wet_left, n_left)
                + n_right as f64 * gini(wet_total - wet_left, n_right))
                / n as f64;
            let gain = parent - child;
            if best.is_none_or(|b| gain > b.gain + GAIN_EPS) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(here, next),
                    gain,
                });
            }
        }
    }
    best
}

fn leaf_for(ts: &TrainingSet, idx: &[usize]) -> Node {
    let wet = idx.iter().filter(|&&i| ts.examples[i].label == Label::Wet).count();
    let dry = idx.len() - wet;
    // Ties go to DRY.
    let (label, majority) = if wet > dry { (Label::Wet, wet) } else { (Label::Dry, dry) };
    Node::Leaf {
        label,
        purity: majority as f64 / idx.len() as f64,
    }
}

pub fn train(ts: &TrainingSet, max_depth: usize, min_leaf: usize) -> Result<DecisionTree, TreeError> {
    if ts.is_empty() {
        return Err(TreeError::EmptyTrainingSet);
    }
    if max_depth == 0 || min_leaf == 0 {
        return Err(TreeError::BadParams);
    }
    let feature_count = ts.examples[0].features.len();
    if let Some(e) = ts.examples.iter().find(|e| e.features.len() != feature_count) {
        return Err(TreeError::RaggedFeatures(feature_count, e.features.len()));
    }
    let classes: std::collections::BTreeSet<Label> = ts.examples.iter().map(|e| e.label).collect();
    let mut tree = DecisionTree {
        nodes: Vec::new(),
        feature_count,
        max_depth,
        min_leaf,
        single_class: classes.len() == 1,
    };
    let all: Vec<usize> = (0..ts.len()).collect();
    grow(ts, &all, 0, &mut tree);
    Ok(tree)
}

fn grow(ts: &TrainingSet, idx: &[usize], depth: usize, tree: &mut DecisionTree) -> usize {
    let id = tree.nodes.len();
    let leaf = leaf_for(ts, idx);
    tree.nodes.push(leaf.clone());
    let pure = matches!(leaf, Node::Leaf { purity, .. } if purity == 1.0);
    if pure || depth >= tree.max_depth || idx.len() < 2 * tree.min_leaf {
        return id;
    }
    let Some(split) = best_split(ts, idx, tree.min_leaf) else {
        return id;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| ts.examples[i].features[split.feature] <= split.threshold);
    let left = grow(ts, &left_idx, depth + 1, tree);
    let right = grow(ts, &right_idx, depth + 1, tree);
    tree.nodes[id] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    id
}

impl DecisionTree {
    /// Root-to-leaf descent; `x[f] <= threshold` goes left.
    pub fn predict(&self, x: &[f64]) -> Result<Label, TreeError> {
        if x.len() != self.feature_count {
            return Err(TreeError::DimensionMismatch {
                expected: self.feature_count,
                got: x.len(),
            });
        }
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { label, .. } => return Ok(*label),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Longest root-to-leaf path, in splits.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Line-oriented text form; thresholds keep 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "tree features {} max_depth {} min_leaf {} single_class {}\n",
            self.feature_count, self.max_depth, self.min_leaf, self.single_class
        );
        for (id, node) in self.nodes.iter().enumerate() {
            let _ = match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => writeln!(out, "node {id} split {feature} {} {left} {right}", fmt_exact(*threshold)),
                Node::Leaf { label, purity } => writeln!(out, "node {id} leaf {label} {}", fmt_exact(*purity)),
            };
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TreeError> {
        let err = |line: usize, message: &str| TreeError::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing tree header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 9 || h[0] != "tree" || h[1] != "features" || h[3] != "max_depth" || h[5] != "min_leaf" || h[7] != "single_class" {
            return Err(err(1, "expected `tree features <n> max_depth <d> min_leaf <m> single_class <b>`"));
        }
        let num = |s: &str, line: usize| s.parse::<usize>().map_err(|_| err(line, "bad integer"));
        let feature_count = num(h[2], 1)?;
        let max_depth = num(h[4], 1)?;
        let min_leaf = num(h[6], 1)?;
        let single_class = h[8].parse::<bool>().map_err(|_| err(1, "bad boolean"))?;

        let mut nodes = Vec::new();
        for (i, line) in lines {
            let ln = i + 1;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() < 2 || t[0] != "node" || num(t[1], ln)? != nodes.len() {
                return Err(err(ln, "expected `node <id>` with consecutive ids"));
            }
            let real = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(ln, "bad real"));
            let node = match (t.get(2).copied(), t.len()) {
                (Some("split"), 7) => Node::Split {
                    feature: num(t[3], ln)?,
                    threshold: real(t[4])?,
                    left: num(t[5], ln)?,
                    right: num(t[6], ln)?,
                },
                (Some("leaf"), 5) => Node::Leaf {
                    label: match t[3] {
                        "dry" => Label::Dry,
                        "wet" => Label::Wet,
                        _ => return Err(err(ln, "leaf label must be dry or wet")),
                    },
                    purity: real(t[4])?,
                },
                _ => return Err(err(ln, "expected `split <f> <thr> <l> <r>` or `leaf <label> <purity>`")),
            };
            nodes.push(node);
        }
        if nodes.is_empty() {
            return Err(err(1, "tree has no nodes"));
        }
        // Children must point forward and every non-root node needs exactly one parent.
        let mut parents = vec![0usize; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            if let Node::Split { feature, left, right, .. } = node {
                if *feature >= feature_count {
                    return Err(err(id + 2, "split feature out of range"));
                }
                for &child in [left, right] {
                    if child <= id || child >= nodes.len() {
                        return Err(err(id + 2, "child id must refer to a later node"));
                    }
                    parents[child] += 1;
                }
            }
        }
        if parents.iter().skip(1).any(|&p| p != 1) {
            return Err(err(1, "nodes do not form a single tree"));
        }
        Ok(Self {
            nodes,
            feature_count,
            max_depth,
            min_leaf,
            single_class,
        })
    }
}

/// Per-pixel wet/dry classification over an ROI.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterMask {
    pub width: usize,
    pub height: usize,
    pub wet: Vec<bool>,
    pub timestamp: Option<f64>,
}

impl WaterMask {
    pub fn new(width: usize, height: usize, wet: Vec<bool>) -> Self {
        assert_eq!(wet.len(), width * height, "mask buffer size");
        Self {
            width,
            height,
            wet,
            timestamp: None,
        }
    }

    pub fn wet_count(&self) -> usize {
        self.wet.iter().filter(|&&w| w).count()
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let values: Vec<u8> = self.wet.iter().map(|&w| if w { 255 } else { 0 }).collect();
        encode_pgm8(self.width, self.height, &values)
    }

    /// Reads a 0/255 mask PGM; any non-zero sample counts as wet.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self, ImageError> {
        let (w, h, values) = parse_pgm8(bytes)?;
        Ok(Self::new(w, h, values.into_iter().map(|v| v != 0).collect()))
    }
}

/// Predicts a label per segment, then forces seeded segments to their seed.
pub fn classify_segments(
    tree: &DecisionTree,
    segmap: &SegmentMap,
    feats: &SegmentFeatures,
    seeds: &SeedSet,
) -> Result<Vec<Label>, TreeError> {
    if feats.len() != segmap.segment_count {
        return Err(TreeError::FeatureMismatch {
            map: segmap.segment_count,
            features: feats.len(),
        });
    }
    let forced = seeded_segments(seeds, segmap)?;
    let mut labels = feats
        .rows
        .iter()
        .map(|row| tree.predict(row))
        .collect::<Result<Vec<_>, _>>()?;
    for (segment, label) in forced {
        labels[segment as usize] = label;
    }
    Ok(labels)
}

pub fn classify_frame(
    tree: &DecisionTree,
    segmap: &SegmentMap,
    feats: &SegmentFeatures,
    seeds: &SeedSet,
) -> Result<WaterMask, TreeError> {
    let labels = classify_segments(tree, segmap, feats, seeds)?;
    let wet = segmap.labels.iter().map(|&s| labels[s as usize] == Label::Wet).collect();
    Ok(WaterMask::new(segmap.width, segmap.height, wet))
}
