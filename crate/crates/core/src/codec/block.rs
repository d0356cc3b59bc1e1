//! Coding-block geometry and the QT/BT/TT split rules.

use serde::{Deserialize, Serialize};

use super::EncoderConfig;

/// A node of the partition tree. The CTU is the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodingBlock {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub qt_depth: u8,
    pub mt_depth: u8,
    /// Set once any BT/TT ancestor exists.
    pub in_mt_subtree: bool,
}

impl CodingBlock {
    pub fn ctu(x: usize, y: usize, size: usize) -> Self {
        Self {
            x,
            y,
            width: size,
            height: size,
            qt_depth: 0,
            mt_depth: 0,
            in_mt_subtree: false,
        }
    }

    #[inline]
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    /// True when the block straddles the right or bottom edge of a
    /// `frame_w`x`frame_h` picture (partly inside, partly outside).
    pub fn crosses_boundary(&self, frame_w: usize, frame_h: usize) -> (bool, bool) {
        let inside = self.x < frame_w && self.y < frame_h;
        (
            inside && self.x + self.width > frame_w,
            inside && self.y + self.height > frame_h,
        )
    }

    /// Children produced by `split`, in coding order.
    pub fn children(&self, split: SplitType) -> Vec<CodingBlock> {
        let (x, y, w, h) = (self.x, self.y, self.width, self.height);
        let qt = |cx, cy| CodingBlock {
            x: cx,
            y: cy,
            width: w / 2,
            height: h / 2,
            qt_depth: self.qt_depth + 1,
            mt_depth: self.mt_depth,
            in_mt_subtree: false,
        };
        let mt = |cx, cy, cw, ch| CodingBlock {
            x: cx,
            y: cy,
            width: cw,
            height: ch,
            qt_depth: self.qt_depth,
            mt_depth: self.mt_depth + 1,
            in_mt_subtree: true,
        };
        match split {
            SplitType::Ns => Vec::new(),
            SplitType::Qt => vec![
                qt(x, y),
                qt(x + w / 2, y),
                qt(x, y + h / 2),
                qt(x + w / 2, y + h / 2),
            ],
            SplitType::BtH => vec![mt(x, y, w, h / 2), mt(x, y + h / 2, w, h / 2)],
            SplitType::BtV => vec![mt(x, y, w / 2, h), mt(x + w / 2, y, w / 2, h)],
            SplitType::TtH => vec![
                mt(x, y, w, h / 4),
                mt(x, y + h / 4, w, h / 2),
                mt(x, y + 3 * h / 4, w, h / 4),
            ],
            SplitType::TtV => vec![
                mt(x, y, w / 4, h),
                mt(x + w / 4, y, w / 2, h),
                mt(x + 3 * w / 4, y, w / 4, h),
            ],
        }
    }
}

/// One recursion outcome. Declaration order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SplitType {
    #[serde(rename = "NS")]
    Ns,
    #[serde(rename = "QT")]
    Qt,
    #[serde(rename = "BT_H")]
    BtH,
    #[serde(rename = "BT_V")]
    BtV,
    #[serde(rename = "TT_H")]
    TtH,
    #[serde(rename = "TT_V")]
    TtV,
}

impl SplitType {
    pub const ALL: [SplitType; 6] = [
        SplitType::Ns,
        SplitType::Qt,
        SplitType::BtH,
        SplitType::BtV,
        SplitType::TtH,
        SplitType::TtV,
    ];
}

/// Split candidates ignoring the picture boundary.
fn rule_splits(block: &CodingBlock, config: &EncoderConfig) -> Vec<SplitType> {
    let min = config.min_cu;
    let mt_ok = (block.mt_depth as usize) < config.max_mt_depth;
    let mut out = Vec::with_capacity(6);
    if block.area() >= min * min {
        out.push(SplitType::Ns);
    }
    if block.width == block.height && block.width >= 2 * min && !block.in_mt_subtree {
        out.push(SplitType::Qt);
    }
    if mt_ok && block.height >= 2 * min {
        out.push(SplitType::BtH);
    }
    if mt_ok && block.width >= 2 * min {
        out.push(SplitType::BtV);
    }
    if mt_ok && block.height >= 4 * min {
        out.push(SplitType::TtH);
    }
    if mt_ok && block.width >= 4 * min {
        out.push(SplitType::TtV);
    }
    out
}

/// Legal outcomes for `block` in a picture whose true (unpadded) size is
/// `frame_w`x`frame_h`, in tie-break order.
///
/// A block straddling the true edge must split: QT when legal, else the BT
/// that cuts toward the crossed edge. If no split is legal it stays NS.
pub fn allowed_splits(
    block: &CodingBlock,
    config: &EncoderConfig,
    frame_w: usize,
    frame_h: usize,
) -> Vec<SplitType> {
    let splits = rule_splits(block, config);
    let (cross_right, cross_bottom) = block.crosses_boundary(frame_w, frame_h);
    if !cross_right && !cross_bottom {
        return splits;
    }
    let has = |s| splits.contains(&s);
    let forced = if has(SplitType::Qt) {
        Some(SplitType::Qt)
    } else if cross_right && has(SplitType::BtV) {
        Some(SplitType::BtV)
    } else if cross_bottom && has(SplitType::BtH) {
        Some(SplitType::BtH)
    } else if has(SplitType::BtV) {
        Some(SplitType::BtV)
    } else if has(SplitType::BtH) {
        Some(SplitType::BtH)
    } else {
        None
    };
    match forced {
        Some(s) => vec![s],
        None => splits,
    }
}
