//! Partition-search gating driven by an interpolated reference partition map,
//! and the rule pairing each high-resolution QP with its reference QP.
//!
//! At every recursion node the encoder compares the candidate area
//! (`curr_sz`) with the area of the interpolated reference CU at that
//! position (`max_sz`):
//!
//! | condition                          | decision              |
//! |------------------------------------|-----------------------|
//! | QT split not possible here         | `DefaultRdo`          |
//! | `curr_sz > max_sz`                 | `SkipModesAllowSplit` |
//! | `max_sz / 4 <= curr_sz <= max_sz`  | `FullRdo`             |
//! | `curr_sz < max_sz / 4`             | `Prune`               |

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::CodingBlock;
use crate::partition::PartitionMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateDecision {
    /// Restricted node: ordinary mode search and recursion.
    DefaultRdo,
    /// Skip the no-split mode search, keep recursing.
    SkipModesAllowSplit,
    FullRdo,
    /// Neither mode search nor recursion.
    Prune,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateInput {
    pub curr_sz: usize,
    pub max_sz: usize,
    /// The node cannot take a QT split.
    pub qt_restricted: bool,
}

pub fn gate(input: GateInput) -> GateDecision {
    if input.qt_restricted {
        GateDecision::DefaultRdo
    } else if input.curr_sz > input.max_sz {
        GateDecision::SkipModesAllowSplit
    } else if 4 * input.curr_sz >= input.max_sz {
        GateDecision::FullRdo
    } else {
        GateDecision::Prune
    }
}

/// Something the encoder asks before searching a node.
pub trait GatingPolicy: Send + Sync {
    fn decide(&self, block: &CodingBlock, qt_restricted: bool) -> GateDecision;

    /// Padded frame size the policy was built for, if it depends on one.
    fn frame_dims(&self) -> Option<(usize, usize)> {
        None
    }
}

/// Always answers `FullRdo`; equivalent to encoding without a policy.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullRdoPolicy;

impl GatingPolicy for FullRdoPolicy {
    fn decide(&self, _: &CodingBlock, _: bool) -> GateDecision {
        GateDecision::FullRdo
    }
}

/// Gates each node on the interpolated reference CU under its top-left pixel.
#[derive(Debug, Clone)]
pub struct MapPolicy {
    map: Arc<PartitionMap>,
}

impl MapPolicy {
    pub fn new(map: Arc<PartitionMap>) -> Self {
        Self { map }
    }

    pub fn map(&self) -> &PartitionMap {
        &self.map
    }
}

impl GatingPolicy for MapPolicy {
    fn decide(&self, block: &CodingBlock, qt_restricted: bool) -> GateDecision {
        let max_sz = self
            .map
            .max_sz(block.x, block.y)
            .expect("encoder checks map dimensions before searching")
            .area();
        gate(GateInput {
            curr_sz: block.area(),
            max_sz,
            qt_restricted,
        })
    }

    fn frame_dims(&self) -> Option<(usize, usize)> {
        Some((self.map.frame_width(), self.map.frame_height()))
    }
}

/// How dependent QPs outside the standard set are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QpRule {
    /// Only 27, 32, 37 and 42 are accepted.
    Strict,
    /// Any QP in 0..=51: 32 and above use 37, below uses 32.
    Extended,
}

pub const STANDARD_QPS: [u8; 4] = [27, 32, 37, 42];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("QP {0} is outside the standard set {{27, 32, 37, 42}}; use the extended rule")]
    NonStandardQp(u8),
    #[error("QP {0} out of range 0..=51")]
    QpRange(u8),
}

/// Reference-resolution QP whose partitions guide a dependent encode at `dependent_qp`.
///
/// Mid-quality references are used for the three lower-bitrate dependents;
/// the highest-quality dependent uses the next finer reference.
pub fn reference_qp_for(dependent_qp: u8, rule: QpRule) -> Result<u8, PolicyError> {
    if dependent_qp > 51 {
        return Err(PolicyError::QpRange(dependent_qp));
    }
    match rule {
        QpRule::Strict => match dependent_qp {
            42 | 37 | 32 => Ok(37),
            27 => Ok(32),
            q => Err(PolicyError::NonStandardQp(q)),
        },
        QpRule::Extended => Ok(if dependent_qp >= 32 { 37 } else { 32 }),
    }
}
