//! Multi-representation encoding: low-resolution references first, then
//! full-resolution dependents, optionally gated by the references' maps.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{encode_sequence, EncodeError, EncodeStats, EncoderConfig, SequenceEncode};
use crate::media::{crop_to_even, downscale_half, MediaError, VideoSequence};
use crate::metrics::{
    bd_rate, bd_time, efficiency_ratio, sequence_psnr, MetricsError, Psnr, RdCurvePoint,
};
use crate::partition::{extract_map, interpolate_2x, MapError, PartitionMap};
use crate::policy::{reference_qp_for, GatingPolicy, MapPolicy, PolicyError, QpRule};

#[derive(Debug, Error)]
pub enum LadderError {
    #[error("source is {width}x{height}; dimensions must be even and at least 16x16")]
    SourceDimensions { width: usize, height: usize },
    #[error("no QPs requested")]
    EmptyQps,
    #[error("QP {0} requested twice")]
    DuplicateQp(u8),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("{id}: {source}")]
    Encode {
        id: String,
        #[source]
        source: EncodeError,
    },
    #[error("{id}: {source}")]
    Map {
        id: String,
        #[source]
        source: MapError,
    },
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Reference,
    Dependent,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Reference => "reference",
            Role::Dependent => "dependent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LadderMode {
    Baseline,
    Mevhas,
}

impl LadderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LadderMode::Baseline => "baseline",
            LadderMode::Mevhas => "mevhas",
        }
    }
}

impl std::fmt::Display for LadderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentationSpec {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub qp: u8,
    pub role: Role,
    pub reference_id: Option<String>,
}

/// Which reference frame's partition guides each dependent frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapReuse {
    /// The map of reference frame 0 gates every dependent frame.
    #[default]
    FirstFrame,
    /// Dependent frame `i` uses the map of reference frame `i`.
    PerFrame,
}

#[derive(Debug, Clone)]
pub struct LadderPlan {
    pub source: Arc<VideoSequence>,
    /// References precede their dependents.
    pub representations: Vec<RepresentationSpec>,
    pub mode: LadderMode,
    pub map_reuse: MapReuse,
    /// Maps keyed by dependent QP that replace the interpolated reference map.
    pub map_overrides: BTreeMap<u8, Arc<PartitionMap>>,
}

pub fn reference_id(qp: u8) -> String {
    format!("ref_qp{qp}")
}

pub fn dependent_id(qp: u8) -> String {
    format!("dep_qp{qp}")
}

/// Size of the reference picture for a `width`x`height` source: half in each
/// dimension, rounded down to even.
pub fn reference_dims(width: usize, height: usize) -> (usize, usize) {
    (width / 2 / 2 * 2, height / 2 / 2 * 2)
}

/// Plans dependents at the source resolution for each QP; in MEVHAS mode
/// also the half-resolution references they need.
pub fn plan_ladder(
    source: Arc<VideoSequence>,
    qps: &[u8],
    mode: LadderMode,
) -> Result<LadderPlan, LadderError> {
    let (w, h) = (source.width(), source.height());
    if w % 2 != 0 || h % 2 != 0 || w < 16 || h < 16 {
        return Err(LadderError::SourceDimensions {
            width: w,
            height: h,
        });
    }
    if qps.is_empty() {
        return Err(LadderError::EmptyQps);
    }
    for (i, &q) in qps.iter().enumerate() {
        if q > 51 {
            return Err(PolicyError::QpRange(q).into());
        }
        if qps[..i].contains(&q) {
            return Err(LadderError::DuplicateQp(q));
        }
    }

    let mut refs: Vec<RepresentationSpec> = Vec::new();
    let mut deps = Vec::with_capacity(qps.len());
    let (rw, rh) = reference_dims(w, h);
    for &q in qps {
        let reference = match mode {
            LadderMode::Baseline => None,
            LadderMode::Mevhas => {
                let rq = reference_qp_for(q, QpRule::Extended)?;
                let id = reference_id(rq);
                if !refs.iter().any(|r| r.id == id) {
                    refs.push(RepresentationSpec {
                        id: id.clone(),
                        width: rw,
                        height: rh,
                        qp: rq,
                        role: Role::Reference,
                        reference_id: None,
                    });
                }
                Some(id)
            }
        };
        deps.push(RepresentationSpec {
            id: dependent_id(q),
            width: w,
            height: h,
            qp: q,
            role: Role::Dependent,
            reference_id: reference,
        });
    }
    refs.extend(deps);
    Ok(LadderPlan {
        source,
        representations: refs,
        mode,
        map_reuse: MapReuse::default(),
        map_overrides: BTreeMap::new(),
    })
}

/// One encoded representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub id: String,
    pub role: Role,
    pub reference_id: Option<String>,
    pub width: usize,
    pub height: usize,
    pub qp: u8,
    pub stats: EncodeStats,
    pub bits: u64,
    pub bitrate_bps: f64,
    /// `None` for a lossless reconstruction.
    pub psnr_db: Option<f64>,
    pub wall_s: f64,
    /// Seconds from the start of the ladder run to the start of this encode.
    pub start_s: f64,
}

impl LadderRow {
    pub fn psnr(&self) -> Psnr {
        self.psnr_db.map_or(Psnr::Lossless, Psnr::Db)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LadderTotals {
    pub stats: EncodeStats,
    pub bits: u64,
    /// Sum of per-row wall times.
    pub wall_s: f64,
    pub dependent_mode_evaluations: u64,
    pub dependent_wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub mode: LadderMode,
    pub frames: usize,
    pub fps: f64,
    pub rows: Vec<LadderRow>,
    pub totals: LadderTotals,
    /// Elapsed time of the whole run, including parallel overlap.
    pub elapsed_s: f64,
    /// Interpolated maps per reference id, one per dependent frame position.
    #[serde(skip)]
    pub maps: BTreeMap<String, Vec<Arc<PartitionMap>>>,
}

/// Column order of the CSV report.
pub const CSV_HEADER: &str =
    "id,role,width,height,qp,bits,bitrate_bps,psnr_db,mode_evals,nodes,wall_s";

/// Field names that carry wall-clock measurements in the CSV and JSON reports.
pub const TIMING_FIELDS: &[&str] = &[
    "wall_s",
    "wall_time",
    "start_s",
    "elapsed_s",
    "dependent_wall_s",
    "baseline_wall_s",
    "mevhas_wall_s",
    "delta_time_pct",
    "bd_time",
    "efficiency_ratio",
    "summary",
    "time_method",
    "time_note",
];

fn fmt_psnr(p: Option<f64>) -> String {
    p.map_or_else(|| "inf".to_string(), |v| format!("{v:.4}"))
}

impl LadderReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:.3},{},{},{},{:.6}\n",
                r.id,
                r.role.as_str(),
                r.width,
                r.height,
                r.qp,
                r.bits,
                r.bitrate_bps,
                fmt_psnr(r.psnr_db),
                r.stats.mode_evaluations,
                r.stats.nodes_visited,
                r.wall_s
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    pub fn row(&self, id: &str) -> Option<&LadderRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn dependents(&self) -> impl Iterator<Item = &LadderRow> {
        self.rows.iter().filter(|r| r.role == Role::Dependent)
    }
}

fn bitrate(bits: u64, fps: f64, frames: usize) -> f64 {
    bits as f64 * fps / frames as f64
}

fn make_row(
    spec: &RepresentationSpec,
    enc: &SequenceEncode,
    source: &VideoSequence,
    start_s: f64,
) -> Result<LadderRow, LadderError> {
    let psnr = sequence_psnr(source, &enc.recon)?;
    Ok(LadderRow {
        id: spec.id.clone(),
        role: spec.role,
        reference_id: spec.reference_id.clone(),
        width: spec.width,
        height: spec.height,
        qp: spec.qp,
        stats: enc.stats,
        bits: enc.stats.total_bits,
        bitrate_bps: bitrate(enc.stats.total_bits, source.fps().as_f64(), source.len()),
        psnr_db: match psnr {
            Psnr::Lossless => None,
            Psnr::Db(v) => Some(v),
        },
        wall_s: enc.stats.wall_time,
        start_s,
    })
}

fn validate(plan: &LadderPlan) -> Result<(), LadderError> {
    let mut seen_refs: Vec<&RepresentationSpec> = Vec::new();
    let (w, h) = (plan.source.width(), plan.source.height());
    for spec in &plan.representations {
        match spec.role {
            Role::Reference => {
                if (spec.width, spec.height) != reference_dims(w, h) {
                    return Err(LadderError::InvalidPlan(format!(
                        "{} is {}x{}, not the half-resolution reference size",
                        spec.id, spec.width, spec.height
                    )));
                }
                seen_refs.push(spec);
            }
            Role::Dependent => {
                if (spec.width, spec.height) != (w, h) {
                    return Err(LadderError::InvalidPlan(format!(
                        "{} must be at the source resolution",
                        spec.id
                    )));
                }
                match (&spec.reference_id, plan.mode) {
                    (Some(rid), LadderMode::Mevhas) => {
                        let r = seen_refs.iter().find(|r| &r.id == rid).ok_or_else(|| {
                            LadderError::InvalidPlan(format!(
                                "{} names {rid}, which is not an earlier reference",
                                spec.id
                            ))
                        })?;
                        if r.qp != reference_qp_for(spec.qp, QpRule::Extended)? {
                            return Err(LadderError::InvalidPlan(format!(
                                "{} at QP {} cannot use a QP {} reference",
                                spec.id, spec.qp, r.qp
                            )));
                        }
                    }
                    (None, LadderMode::Mevhas) => {
                        return Err(LadderError::InvalidPlan(format!(
                            "{} has no reference",
                            spec.id
                        )))
                    }
                    (_, LadderMode::Baseline) => {}
                }
            }
        }
    }
    Ok(())
}

/// Maps for one reference, one per dependent frame position.
struct ReferenceMaps {
    maps: Vec<Arc<PartitionMap>>,
}

fn reference_maps(
    spec: &RepresentationSpec,
    enc: &SequenceEncode,
    reuse: MapReuse,
    dep_dims: (usize, usize),
) -> Result<ReferenceMaps, LadderError> {
    let frames: &[_] = match reuse {
        MapReuse::FirstFrame => &enc.frames[..1],
        MapReuse::PerFrame => &enc.frames,
    };
    let maps = frames
        .iter()
        .map(|f| {
            extract_map(&f.record, f.padded_width, f.padded_height, spec.qp)
                .and_then(|m| interpolate_2x(&m).fit_to(dep_dims.0, dep_dims.1))
                .map(Arc::new)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| LadderError::Map {
            id: spec.id.clone(),
            source,
        })?;
    Ok(ReferenceMaps { maps })
}

/// Encodes the plan. References run one after another; dependents run on
/// up to `jobs` threads. Non-timing results do not depend on `jobs`.
pub fn run_ladder(plan: &LadderPlan, jobs: usize) -> Result<LadderReport, LadderError> {
    validate(plan)?;
    let t0 = Instant::now();
    let source = &*plan.source;
    let dep_config_dims = EncoderConfig::new(0).padded_dims(source.width(), source.height());

    let mut rows = Vec::with_capacity(plan.representations.len());
    let mut maps: BTreeMap<String, ReferenceMaps> = BTreeMap::new();
    let refs: Vec<&RepresentationSpec> = plan
        .representations
        .iter()
        .filter(|s| s.role == Role::Reference)
        .collect();
    if !refs.is_empty() {
        let low = source.try_map(|f| crop_to_even(&downscale_half(f)?))?;
        for spec in refs {
            let start_s = t0.elapsed().as_secs_f64();
            let enc = encode_sequence(&low, &EncoderConfig::new(spec.qp), |_| None).map_err(
                |source| LadderError::Encode {
                    id: spec.id.clone(),
                    source,
                },
            )?;
            maps.insert(
                spec.id.clone(),
                reference_maps(spec, &enc, plan.map_reuse, dep_config_dims)?,
            );
            rows.push(make_row(spec, &enc, &low, start_s)?);
        }
    }

    let deps: Vec<&RepresentationSpec> = plan
        .representations
        .iter()
        .filter(|s| s.role == Role::Dependent)
        .collect();
    let encode_dep = |spec: &RepresentationSpec| -> Result<LadderRow, LadderError> {
        let start_s = t0.elapsed().as_secs_f64();
        let policies: Vec<MapPolicy> = match (plan.mode, plan.map_overrides.get(&spec.qp)) {
            (LadderMode::Baseline, _) => Vec::new(),
            (LadderMode::Mevhas, Some(m)) => vec![MapPolicy::new(m.clone())],
            (LadderMode::Mevhas, None) => {
                let rid = spec.reference_id.as_ref().expect("validated");
                maps[rid].maps.iter().cloned().map(MapPolicy::new).collect()
            }
        };
        let enc = encode_sequence(source, &EncoderConfig::new(spec.qp), |i| {
            policies
                .get(i.min(policies.len().saturating_sub(1)))
                .map(|p| p as &dyn GatingPolicy)
        })
        .map_err(|source| LadderError::Encode {
            id: spec.id.clone(),
            source,
        })?;
        make_row(spec, &enc, source, start_s)
    };

    let dep_rows: Vec<LadderRow> = if jobs <= 1 {
        deps.iter()
            .map(|s| encode_dep(s))
            .collect::<Result<_, _>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| LadderError::Pool(e.to_string()))?
            .install(|| {
                deps.par_iter()
                    .map(|s| encode_dep(s))
                    .collect::<Result<_, _>>()
            })?
    };
    rows.extend(dep_rows);

    let mut totals = LadderTotals::default();
    for r in &rows {
        totals.stats.accumulate(&r.stats);
        totals.bits += r.bits;
        totals.wall_s += r.wall_s;
        if r.role == Role::Dependent {
            totals.dependent_mode_evaluations += r.stats.mode_evaluations;
            totals.dependent_wall_s += r.wall_s;
        }
    }
    Ok(LadderReport {
        mode: plan.mode,
        frames: source.len(),
        fps: source.fps().as_f64(),
        rows,
        totals,
        elapsed_s: t0.elapsed().as_secs_f64(),
        maps: maps.into_iter().map(|(k, v)| (k, v.maps)).collect(),
    })
}

/// Per-QP change of a MEVHAS dependent against the baseline dependent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub qp: u8,
    pub baseline_mode_evals: u64,
    pub mevhas_mode_evals: u64,
    pub delta_mode_evals_pct: f64,
    pub baseline_bits: u64,
    pub mevhas_bits: u64,
    pub delta_bits_pct: f64,
    pub baseline_psnr_db: Option<f64>,
    pub mevhas_psnr_db: Option<f64>,
    /// `None` when either side is lossless.
    pub delta_psnr_db: Option<f64>,
    pub baseline_wall_s: f64,
    pub mevhas_wall_s: f64,
    pub delta_time_pct: f64,
}

/// How the BD figures were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BdMethod {
    /// Cubic fits over the shared PSNR interval.
    Cubic,
    /// Mean of same-QP log ratios, used when the curves cannot be fitted.
    PairedLogRatio,
}

/// One BD figure and how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdFigure {
    pub value: f64,
    pub method: BdMethod,
    /// Why the cubic fit was not used.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdSummary {
    pub bd_rate: f64,
    pub rate_method: BdMethod,
    pub rate_note: Option<String>,
    pub bd_time: f64,
    pub time_method: BdMethod,
    pub time_note: Option<String>,
    /// `None` when `bd_time` is zero.
    pub efficiency_ratio: Option<f64>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub bd: BdSummary,
}

fn pct(new: f64, old: f64) -> f64 {
    if old == 0.0 {
        0.0
    } else {
        (new / old - 1.0) * 100.0
    }
}

fn paired_log_ratio(pairs: &[(f64, f64)]) -> f64 {
    pairs.iter().map(|&(a, t)| (t / a).log10()).sum::<f64>() / pairs.len() as f64
}

/// Compares MEVHAS dependents with baseline dependents at matching QPs.
pub fn compare_reports(
    baseline: &LadderReport,
    mevhas: &LadderReport,
) -> Result<ComparisonReport, LadderError> {
    let mut rows = Vec::new();
    for b in baseline.dependents() {
        let m = mevhas.dependents().find(|m| m.qp == b.qp).ok_or_else(|| {
            LadderError::InvalidPlan(format!("no mevhas dependent at QP {}", b.qp))
        })?;
        rows.push(ComparisonRow {
            qp: b.qp,
            baseline_mode_evals: b.stats.mode_evaluations,
            mevhas_mode_evals: m.stats.mode_evaluations,
            delta_mode_evals_pct: pct(
                m.stats.mode_evaluations as f64,
                b.stats.mode_evaluations as f64,
            ),
            baseline_bits: b.bits,
            mevhas_bits: m.bits,
            delta_bits_pct: pct(m.bits as f64, b.bits as f64),
            baseline_psnr_db: b.psnr_db,
            mevhas_psnr_db: m.psnr_db,
            delta_psnr_db: b.psnr_db.zip(m.psnr_db).map(|(x, y)| y - x),
            baseline_wall_s: b.wall_s,
            mevhas_wall_s: m.wall_s,
            delta_time_pct: pct(m.wall_s, b.wall_s),
        });
    }

    let rate_pairs: Vec<_> = rows
        .iter()
        .map(|r| (m_rate(baseline, r.qp), m_rate(mevhas, r.qp)))
        .collect();
    let time_pairs: Vec<_> = rows
        .iter()
        .map(|r| (r.baseline_wall_s, r.mevhas_wall_s))
        .collect();
    let quality = |r: &ComparisonRow, mev: bool| {
        let q = if mev {
            r.mevhas_psnr_db
        } else {
            r.baseline_psnr_db
        };
        q.unwrap_or(f64::INFINITY)
    };
    let rate = bd_figure(&rows, &rate_pairs, quality, false);
    let time = bd_figure(&rows, &time_pairs, quality, true);
    Ok(ComparisonReport {
        rows,
        bd: BdSummary {
            bd_rate: rate.value,
            rate_method: rate.method,
            rate_note: rate.note,
            bd_time: time.value,
            time_method: time.method,
            time_note: time.note,
            efficiency_ratio: efficiency_ratio(rate.value, time.value).ok(),
            summary: crate::metrics::format_bd_summary(time.value, rate.value),
        },
    })
}

/// Cubic BD figure over (`pairs`, quality) curves, or the paired log ratio
/// when the curves cannot be fitted. Time figures are sign-flipped savings.
fn bd_figure(
    rows: &[ComparisonRow],
    pairs: &[(f64, f64)],
    quality: impl Fn(&ComparisonRow, bool) -> f64,
    time: bool,
) -> BdFigure {
    let curve = |mev: bool| -> Vec<RdCurvePoint> {
        rows.iter()
            .zip(pairs)
            .map(|(r, &(b, m))| RdCurvePoint::new(if mev { m } else { b }, quality(r, mev)))
            .collect()
    };
    let fitted = if time {
        bd_time(&curve(false), &curve(true))
    } else {
        bd_rate(&curve(false), &curve(true))
    };
    match fitted {
        Ok(value) => BdFigure {
            value,
            method: BdMethod::Cubic,
            note: None,
        },
        Err(e) => {
            let growth = (10f64.powf(paired_log_ratio(pairs)) - 1.0) * 100.0;
            BdFigure {
                value: if time { -growth } else { growth },
                method: BdMethod::PairedLogRatio,
                note: Some(e.to_string()),
            }
        }
    }
}

fn m_rate(report: &LadderReport, qp: u8) -> f64 {
    report
        .dependents()
        .find(|r| r.qp == qp)
        .map_or(f64::NAN, |r| r.bitrate_bps)
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "qp,baseline_mode_evals,mevhas_mode_evals,delta_mode_evals_pct,baseline_bits,mevhas_bits,delta_bits_pct,baseline_psnr_db,mevhas_psnr_db,delta_psnr_db,baseline_wall_s,mevhas_wall_s,delta_time_pct\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.4},{},{},{:.4},{},{},{},{:.6},{:.6},{:.4}\n",
                r.qp,
                r.baseline_mode_evals,
                r.mevhas_mode_evals,
                r.delta_mode_evals_pct,
                r.baseline_bits,
                r.mevhas_bits,
                r.delta_bits_pct,
                fmt_psnr(r.baseline_psnr_db),
                fmt_psnr(r.mevhas_psnr_db),
                r.delta_psnr_db
                    .map_or_else(|| "nan".to_string(), |d| format!("{d:.4}")),
                r.baseline_wall_s,
                r.mevhas_wall_s,
                r.delta_time_pct
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}
