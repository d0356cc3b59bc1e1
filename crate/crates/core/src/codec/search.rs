//! Recursive rate-distortion search over one CTU.

use super::block::{allowed_splits, CodingBlock, SplitType};
use super::intra::{evaluate_modes_with, ModeScratch, Neighbors};
use super::{transform, CodedCu, Cu, EncoderConfig, SplitTree};
use crate::policy::{GateDecision, GatingPolicy};

pub(crate) struct Search<'a> {
    src: &'a [u8],
    stride: usize,
    recon: Vec<u8>,
    frame_w: usize,
    frame_h: usize,
    config: &'a EncoderConfig,
    policy: Option<&'a dyn GatingPolicy>,
    lambda: f64,
    step: f64,
    scratch: ModeScratch,
    block_buf: Vec<u8>,
    pub mode_evaluations: u64,
    pub nodes_visited: u64,
    pub fallbacks: u64,
}

struct NodeResult {
    cost: f64,
    tree: SplitTree,
}

impl<'a> Search<'a> {
    /// `src` is the padded frame of row stride `stride`; `frame_w`x`frame_h`
    /// is the true picture size used for boundary splits.
    pub fn new(
        src: &'a [u8],
        stride: usize,
        frame_w: usize,
        frame_h: usize,
        config: &'a EncoderConfig,
        policy: Option<&'a dyn GatingPolicy>,
    ) -> Self {
        Self {
            src,
            stride,
            recon: vec![0; src.len()],
            frame_w,
            frame_h,
            config,
            policy,
            lambda: config.lambda(),
            step: transform::qstep(config.qp),
            scratch: ModeScratch::default(),
            block_buf: Vec::new(),
            mode_evaluations: 0,
            nodes_visited: 0,
            fallbacks: 0,
        }
    }

    pub fn into_recon(self) -> Vec<u8> {
        self.recon
    }

    pub fn ctu(&mut self, x: usize, y: usize) -> SplitTree {
        let root = CodingBlock::ctu(x, y, self.config.ctu_size);
        let gated = self.policy.is_some();
        match self.node(&root, gated) {
            Some(r) => r.tree,
            // The root is never pruned past the fallback; an ungated search
            // always has a finite candidate.
            None => {
                self.node(&root, false)
                    .expect("ungated search is finite")
                    .tree
            }
        }
    }

    fn qt_legal(&self, b: &CodingBlock) -> bool {
        b.width == b.height && b.width >= 2 * self.config.min_cu && !b.in_mt_subtree
    }

    fn copy_region_out(&self, b: &CodingBlock, out: &mut Vec<u8>) {
        out.clear();
        for row in b.y..b.y + b.height {
            let start = row * self.stride + b.x;
            out.extend_from_slice(&self.recon[start..start + b.width]);
        }
    }

    fn write_region(&mut self, b: &CodingBlock, pixels: &[u8]) {
        for (j, row) in pixels.chunks_exact(b.width).enumerate() {
            let start = (b.y + j) * self.stride + b.x;
            self.recon[start..start + b.width].copy_from_slice(row);
        }
    }

    /// Searches `b`. On `Some`, the reconstruction of the chosen candidate is
    /// in the recon buffer. `None` means infinite cost (pruned).
    fn node(&mut self, b: &CodingBlock, gated: bool) -> Option<NodeResult> {
        self.nodes_visited += 1;
        let splits = allowed_splits(b, self.config, self.frame_w, self.frame_h);
        let decision = match (gated, self.policy) {
            (true, Some(p)) => p.decide(b, !self.qt_legal(b)),
            _ => GateDecision::FullRdo,
        };
        let try_leaf = match decision {
            GateDecision::Prune => return None,
            GateDecision::SkipModesAllowSplit => false,
            GateDecision::FullRdo | GateDecision::DefaultRdo => true,
        };

        let cu = Cu {
            x: b.x,
            y: b.y,
            width: b.width,
            height: b.height,
        };
        let mut best_cost = f64::INFINITY;
        let mut best_tree = None;
        let mut best_pixels: Vec<u8> = Vec::new();

        for &split in &splits {
            if split == SplitType::Ns {
                if !try_leaf {
                    continue;
                }
                let mut orig = std::mem::take(&mut self.block_buf);
                orig.clear();
                for row in b.y..b.y + b.height {
                    let start = row * self.stride + b.x;
                    orig.extend_from_slice(&self.src[start..start + b.width]);
                }
                let nb = Neighbors::gather(&self.recon, self.stride, b.x, b.y, b.width, b.height);
                let d = evaluate_modes_with(
                    &orig,
                    &nb,
                    b.width,
                    b.height,
                    self.step,
                    self.lambda,
                    &mut self.scratch,
                );
                self.block_buf = orig;
                self.mode_evaluations += 4;
                if d.cost < best_cost {
                    best_cost = d.cost;
                    best_tree = Some(SplitTree::Leaf(CodedCu {
                        cu,
                        mode: d.mode,
                        distortion: d.distortion,
                        bits: d.bits,
                    }));
                    best_pixels = d.recon;
                }
                continue;
            }

            let mut total = 0.0;
            let mut children = Vec::new();
            let mut pruned = false;
            for child in b.children(split) {
                match self.node(&child, gated) {
                    Some(r) => {
                        total += r.cost;
                        children.push(r.tree);
                    }
                    None => {
                        pruned = true;
                        break;
                    }
                }
            }
            if !pruned && total < best_cost {
                best_cost = total;
                best_tree = Some(SplitTree::Split {
                    block: cu,
                    split,
                    children,
                });
                self.copy_region_out(b, &mut best_pixels);
            }
        }

        match best_tree {
            Some(tree) => {
                self.write_region(b, &best_pixels);
                Some(NodeResult {
                    cost: best_cost,
                    tree,
                })
            }
            None if gated => {
                self.fallbacks += 1;
                self.node(b, false)
            }
            None => unreachable!("ungated node without candidates at {b:?}"),
        }
    }
}
