//! Multi-resolution encoding testbed.
//!
//! A low-resolution reference encode records its CU partition; the map is
//! doubled and used to prune the partition search of full-resolution
//! encodes across all their QPs.

pub mod codec;
pub mod ladder;
pub mod media;
pub mod metrics;
pub mod partition;
pub mod policy;
pub mod synth;

pub use codec::{
    encode_frame, encode_sequence, CodingBlock, Cu, EncodeError, EncodeStats, EncoderConfig,
    FrameEncode, IntraMode, PartitionRecord, SequenceEncode, SplitTree, SplitType,
};
pub use ladder::{
    plan_ladder, run_ladder, LadderMode, LadderPlan, LadderReport, RepresentationSpec, Role,
};
pub use media::{Fps, LumaFrame, MediaError, VideoSequence};
pub use metrics::{
    bd_rate, bd_time, efficiency_ratio, psnr, ComplexityFeatures, Psnr, RdCurvePoint,
};
pub use partition::{extract_map, interpolate_2x, CuDims, MapError, PartitionMap};
pub use policy::{gate, FullRdoPolicy, GateDecision, GateInput, GatingPolicy, MapPolicy, QpRule};
