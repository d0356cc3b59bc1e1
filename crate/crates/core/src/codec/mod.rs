//! All-intra block encoder with recursive QT/BT/TT partitioning and explicit
//! rate-distortion search.
//!
//! Frames are padded by edge replication to whole 128x128 CTUs and coded in
//! raster order. Each CTU is searched exhaustively: every node tries the
//! four intra modes as a no-split leaf and recurses into every legal split,
//! keeping the candidate with the lowest `J = D + lambda * R`. An optional
//! [`GatingPolicy`] can skip the leaf search or prune a node entirely.
//! There is no entropy coder; rate is a bit-count proxy.

mod block;
mod intra;
mod search;
mod transform;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media::{LumaFrame, MediaError, VideoSequence};
use crate::policy::GatingPolicy;

pub use block::{allowed_splits, CodingBlock, SplitType};
pub use intra::{evaluate_modes, predict, IntraMode, ModeDecision, Neighbors, UNAVAILABLE};
pub use transform::{
    lambda_of_qp, level_bits, qstep, quantize, transform_quant, TransformResult, HEADER_BITS,
    ROUNDING_OFFSET,
};

pub(crate) use transform::forward_dct;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("policy map is {map_w}x{map_h} but the padded frame is {frame_w}x{frame_h}")]
    MapDimensions {
        map_w: usize,
        map_h: usize,
        frame_w: usize,
        frame_h: usize,
    },
    #[error("invalid encoder configuration: {0}")]
    Config(String),
    #[error("frame dimensions {width}x{height} must be even")]
    OddDimensions { width: usize, height: usize },
    #[error(transparent)]
    Media(#[from] MediaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub qp: u8,
    pub ctu_size: usize,
    pub min_cu: usize,
    /// Maximum BT/TT nesting depth.
    pub max_mt_depth: usize,
    /// Multiplier applied to the lambda model.
    pub lambda_scale: f64,
}

impl EncoderConfig {
    pub fn new(qp: u8) -> Self {
        Self {
            qp,
            ctu_size: 128,
            min_cu: 8,
            max_mt_depth: 3,
            lambda_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), EncodeError> {
        if self.qp > 51 {
            return Err(EncodeError::Config(format!(
                "qp {} out of range 0..=51",
                self.qp
            )));
        }
        if !self.ctu_size.is_power_of_two() || !(8..=128).contains(&self.ctu_size) {
            return Err(EncodeError::Config(format!(
                "ctu size {} must be a power of two in 8..=128",
                self.ctu_size
            )));
        }
        if self.min_cu < 8
            || !self.min_cu.is_power_of_two()
            || !self.ctu_size.is_multiple_of(self.min_cu)
        {
            return Err(EncodeError::Config(format!(
                "min cu {} must be a power of two >= 8 dividing the ctu size",
                self.min_cu
            )));
        }
        if !(self.lambda_scale.is_finite() && self.lambda_scale > 0.0) {
            return Err(EncodeError::Config("lambda scale must be positive".into()));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        lambda_of_qp(self.qp, self.lambda_scale)
    }

    /// Frame size rounded up to whole CTUs.
    pub fn padded_dims(&self, width: usize, height: usize) -> (usize, usize) {
        (
            width.div_ceil(self.ctu_size) * self.ctu_size,
            height.div_ceil(self.ctu_size) * self.ctu_size,
        )
    }
}

/// Work and outcome counters for one encode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodeStats {
    /// Intra-mode RD evaluations (four per leaf search).
    pub mode_evaluations: u64,
    pub nodes_visited: u64,
    pub total_bits: u64,
    /// Squared error over the padded frame.
    pub sse: u64,
    /// Nodes re-searched without gating because every candidate was pruned.
    pub fallbacks: u64,
    /// Seconds.
    pub wall_time: f64,
}

impl EncodeStats {
    pub fn accumulate(&mut self, other: &EncodeStats) {
        self.mode_evaluations += other.mode_evaluations;
        self.nodes_visited += other.nodes_visited;
        self.total_bits += other.total_bits;
        self.sse += other.sse;
        self.fallbacks += other.fallbacks;
        self.wall_time += other.wall_time;
    }

    /// Same counters with the timing zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> EncodeStats {
        EncodeStats {
            wall_time: 0.0,
            ..*self
        }
    }
}

/// Geometry of one final coding unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cu {
    pub x: usize,
    pub y: usize,
    #[serde(rename = "w")]
    pub width: usize,
    #[serde(rename = "h")]
    pub height: usize,
}

/// Final CUs of one frame in coding order; they tile the padded frame.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartitionRecord {
    pub cus: Vec<Cu>,
}

#[derive(Serialize)]
struct CuLine {
    frame: usize,
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl PartitionRecord {
    /// Checks that the CUs are disjoint and cover `width`x`height` exactly,
    /// by area sum and an overlap scan on the 4-pixel grid.
    pub fn check_tiling(&self, width: usize, height: usize) -> Result<(), String> {
        let area: usize = self.cus.iter().map(|c| c.width * c.height).sum();
        if area != width * height {
            return Err(format!("CU area {area} != frame area {}", width * height));
        }
        let (gw, gh) = (width.div_ceil(4), height.div_ceil(4));
        let mut seen = vec![false; gw * gh];
        for cu in &self.cus {
            if cu.x % 4 != 0 || cu.y % 4 != 0 || cu.width % 4 != 0 || cu.height % 4 != 0 {
                return Err(format!("CU {cu:?} is off the 4-pixel grid"));
            }
            if cu.x + cu.width > width || cu.y + cu.height > height {
                return Err(format!("CU {cu:?} leaves the frame"));
            }
            for gy in cu.y / 4..(cu.y + cu.height) / 4 {
                for gx in cu.x / 4..(cu.x + cu.width) / 4 {
                    if std::mem::replace(&mut seen[gy * gw + gx], true) {
                        return Err(format!("CU {cu:?} overlaps another CU"));
                    }
                }
            }
        }
        Ok(())
    }

    /// One `{frame, x, y, w, h}` JSON object per line.
    pub fn to_json_lines(&self, frame: usize) -> String {
        let mut out = String::new();
        for c in &self.cus {
            let line = CuLine {
                frame,
                x: c.x,
                y: c.y,
                w: c.width,
                h: c.height,
            };
            out.push_str(&serde_json::to_string(&line).expect("plain struct"));
            out.push('\n');
        }
        out
    }
}

/// A coded leaf: geometry plus the chosen mode and its cost terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodedCu {
    pub cu: Cu,
    pub mode: IntraMode,
    pub distortion: u64,
    pub bits: u64,
}

/// The chosen partition of one CTU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitTree {
    Leaf(CodedCu),
    Split {
        block: Cu,
        split: SplitType,
        children: Vec<SplitTree>,
    },
}

impl SplitTree {
    /// Leaves in coding order.
    pub fn leaves(&self) -> Vec<CodedCu> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<CodedCu>) {
        match self {
            SplitTree::Leaf(c) => out.push(*c),
            SplitTree::Split { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Visits every split node with the number of BT/TT splits above it.
    pub fn walk_splits(&self, f: &mut impl FnMut(SplitType, usize)) {
        self.walk_inner(0, f);
    }

    fn walk_inner(&self, mt_above: usize, f: &mut impl FnMut(SplitType, usize)) {
        if let SplitTree::Split {
            split, children, ..
        } = self
        {
            f(*split, mt_above);
            let next = mt_above + usize::from(*split != SplitType::Qt);
            for c in children {
                c.walk_inner(next, f);
            }
        }
    }
}

/// Output of [`encode_frame`].
#[derive(Debug, Clone)]
pub struct FrameEncode {
    /// Reconstruction cropped to the input size.
    pub recon: LumaFrame,
    pub stats: EncodeStats,
    pub record: PartitionRecord,
    /// One tree per CTU in raster order.
    pub trees: Vec<SplitTree>,
    pub padded_width: usize,
    pub padded_height: usize,
}

/// Encodes one frame. With a policy, every search node first asks it whether
/// to search, skip the leaf modes, or prune.
pub fn encode_frame(
    frame: &LumaFrame,
    config: &EncoderConfig,
    policy: Option<&dyn GatingPolicy>,
) -> Result<FrameEncode, EncodeError> {
    config.validate()?;
    let start = Instant::now();
    let (w, h) = (frame.width(), frame.height());
    if w % 2 != 0 || h % 2 != 0 {
        return Err(EncodeError::OddDimensions {
            width: w,
            height: h,
        });
    }
    let (pw, ph) = config.padded_dims(w, h);
    if let Some((map_w, map_h)) = policy.and_then(|p| p.frame_dims()) {
        if (map_w, map_h) != (pw, ph) {
            return Err(EncodeError::MapDimensions {
                map_w,
                map_h,
                frame_w: pw,
                frame_h: ph,
            });
        }
    }

    let padded = frame.pad_to(pw, ph);
    let mut search = search::Search::new(padded.samples(), pw, w, h, config, policy);
    let mut trees = Vec::new();
    let mut record = PartitionRecord::default();
    let mut stats = EncodeStats::default();
    for cy in (0..ph).step_by(config.ctu_size) {
        for cx in (0..pw).step_by(config.ctu_size) {
            let tree = search.ctu(cx, cy);
            for leaf in tree.leaves() {
                stats.total_bits += leaf.bits;
                stats.sse += leaf.distortion;
                record.cus.push(leaf.cu);
            }
            trees.push(tree);
        }
    }
    stats.mode_evaluations = search.mode_evaluations;
    stats.nodes_visited = search.nodes_visited;
    stats.fallbacks = search.fallbacks;
    let recon = LumaFrame::new(pw, ph, search.into_recon())?.crop(w, h)?;
    stats.wall_time = start.elapsed().as_secs_f64();
    Ok(FrameEncode {
        recon,
        stats,
        record,
        trees,
        padded_width: pw,
        padded_height: ph,
    })
}

/// Output of [`encode_sequence`].
#[derive(Debug, Clone)]
pub struct SequenceEncode {
    pub recon: VideoSequence,
    /// Summed over frames.
    pub stats: EncodeStats,
    pub frames: Vec<FrameEncode>,
}

/// Encodes every frame independently (all-intra). `policy_for(i)` supplies
/// the gating policy for frame `i`.
pub fn encode_sequence<'p>(
    seq: &VideoSequence,
    config: &EncoderConfig,
    policy_for: impl Fn(usize) -> Option<&'p dyn GatingPolicy>,
) -> Result<SequenceEncode, EncodeError> {
    let mut frames = Vec::with_capacity(seq.len());
    let mut stats = EncodeStats::default();
    for (i, f) in seq.frames().iter().enumerate() {
        let enc = encode_frame(f, config, policy_for(i))?;
        stats.accumulate(&enc.stats);
        frames.push(enc);
    }
    let recon = VideoSequence::new(frames.iter().map(|f| f.recon.clone()).collect(), seq.fps())?;
    Ok(SequenceEncode {
        recon,
        stats,
        frames,
    })
}
