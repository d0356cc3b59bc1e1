//! Quality, rate, time and content-complexity measurements.
//!
//! Bjøntegaard deltas fit `log10(rate)` (or `log10(seconds)`) as a cubic
//! polynomial of PSNR for each curve, integrate both fits over the shared
//! PSNR interval and convert the mean log difference to a percentage.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::forward_dct;
use crate::media::{LumaFrame, VideoSequence};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("curve has {0} points; at least 4 are needed")]
    TooFewPoints(usize),
    #[error("curve values must be positive and finite (got rate {rate}, quality {quality})")]
    InvalidPoint { rate: f64, quality: f64 },
    #[error("{0}")]
    NonMonotone(String),
    #[error("quality ranges do not overlap ({a_lo:.3}..{a_hi:.3} vs {b_lo:.3}..{b_hi:.3})")]
    NoOverlap {
        a_lo: f64,
        a_hi: f64,
        b_lo: f64,
        b_hi: f64,
    },
    #[error("BDBR/BDT is undefined when BDT is zero")]
    UndefinedRatio,
    #[error("csv: {0}")]
    Csv(String),
}

/// PSNR of a sequence pair; identical inputs are reported as `Lossless`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Lossless,
    Db(f64),
}

impl Psnr {
    /// Decibels, with `Lossless` mapped to +infinity.
    pub fn value(self) -> f64 {
        match self {
            Psnr::Lossless => f64::INFINITY,
            Psnr::Db(v) => v,
        }
    }

    pub fn is_lossless(self) -> bool {
        matches!(self, Psnr::Lossless)
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Psnr::Lossless => f.write_str("inf"),
            Psnr::Db(v) => write!(f, "{v:.4}"),
        }
    }
}

/// `10 * log10(255^2 / MSE)` with MSE pooled over every luma sample of every frame.
pub fn psnr(reference: &[LumaFrame], distorted: &[LumaFrame]) -> Result<Psnr, MetricsError> {
    if reference.len() != distorted.len() {
        return Err(MetricsError::DimensionMismatch(format!(
            "{} frames vs {} frames",
            reference.len(),
            distorted.len()
        )));
    }
    let mut sse = 0u64;
    let mut count = 0u64;
    for (a, b) in reference.iter().zip(distorted) {
        if (a.width(), a.height()) != (b.width(), b.height()) {
            return Err(MetricsError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                a.width(),
                a.height(),
                b.width(),
                b.height()
            )));
        }
        sse += a
            .samples()
            .iter()
            .zip(b.samples())
            .map(|(&x, &y)| {
                let d = x as i64 - y as i64;
                (d * d) as u64
            })
            .sum::<u64>();
        count += a.samples().len() as u64;
    }
    Ok(psnr_from_sse(sse, count))
}

pub fn psnr_from_sse(sse: u64, samples: u64) -> Psnr {
    if sse == 0 {
        return Psnr::Lossless;
    }
    let mse = sse as f64 / samples as f64;
    Psnr::Db(10.0 * (255.0 * 255.0 / mse).log10())
}

pub fn sequence_psnr(
    reference: &VideoSequence,
    distorted: &VideoSequence,
) -> Result<Psnr, MetricsError> {
    psnr(reference.frames(), distorted.frames())
}

/// One operating point: rate in bits/s (or encode seconds for time curves)
/// and PSNR in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdCurvePoint {
    pub rate: f64,
    pub quality: f64,
}

impl RdCurvePoint {
    pub fn new(rate: f64, quality: f64) -> Self {
        Self { rate, quality }
    }
}

/// Curve points sorted by rate, validated, as (quality, log10 rate).
fn prepare(curve: &[RdCurvePoint]) -> Result<Vec<(f64, f64)>, MetricsError> {
    if curve.len() < 4 {
        return Err(MetricsError::TooFewPoints(curve.len()));
    }
    for p in curve {
        if !(p.rate.is_finite() && p.rate > 0.0 && p.quality.is_finite()) {
            return Err(MetricsError::InvalidPoint {
                rate: p.rate,
                quality: p.quality,
            });
        }
    }
    let mut pts: Vec<RdCurvePoint> = curve.to_vec();
    pts.sort_by(|a, b| a.rate.total_cmp(&b.rate));
    for w in pts.windows(2) {
        if w[1].rate <= w[0].rate {
            return Err(MetricsError::NonMonotone(format!(
                "rates must be distinct (repeated {})",
                w[0].rate
            )));
        }
        if w[1].quality <= w[0].quality {
            return Err(MetricsError::NonMonotone(format!(
                "quality must increase with rate ({:.4} at {} then {:.4} at {})",
                w[0].quality, w[0].rate, w[1].quality, w[1].rate
            )));
        }
    }
    Ok(pts.iter().map(|p| (p.quality, p.rate.log10())).collect())
}

fn overlap(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<(f64, f64), MetricsError> {
    let (a_lo, a_hi) = (a[0].0, a[a.len() - 1].0);
    let (b_lo, b_hi) = (b[0].0, b[b.len() - 1].0);
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    if hi <= lo {
        return Err(MetricsError::NoOverlap {
            a_lo,
            a_hi,
            b_lo,
            b_hi,
        });
    }
    Ok((lo, hi))
}

/// Least-squares cubic through (x - center, y); exact for four points.
fn cubic_fit(pts: &[(f64, f64)], center: f64) -> [f64; 4] {
    let n = pts.len();
    let vander = DMatrix::from_fn(n, 4, |r, c| (pts[r].0 - center).powi(c as i32));
    let rhs = DVector::from_iterator(n, pts.iter().map(|p| p.1));
    let sol = vander
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .expect("SVD computed with U and V");
    [sol[0], sol[1], sol[2], sol[3]]
}

fn cubic_integral(c: &[f64; 4], lo: f64, hi: f64) -> f64 {
    let prim =
        |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0;
    prim(hi) - prim(lo)
}

/// Mean log10 difference (test - anchor) over the shared quality interval,
/// using cubic fits.
pub fn bd_log_delta(anchor: &[RdCurvePoint], test: &[RdCurvePoint]) -> Result<f64, MetricsError> {
    let a = prepare(anchor)?;
    let t = prepare(test)?;
    let (lo, hi) = overlap(&a, &t)?;
    let center = (lo + hi) / 2.0;
    let (lo_c, hi_c) = (lo - center, hi - center);
    let int_a = cubic_integral(&cubic_fit(&a, center), lo_c, hi_c);
    let int_t = cubic_integral(&cubic_fit(&t, center), lo_c, hi_c);
    Ok((int_t - int_a) / (hi - lo))
}

/// Bjøntegaard delta rate in percent; positive means the test curve needs
/// more bits for the same quality.
pub fn bd_rate(anchor: &[RdCurvePoint], test: &[RdCurvePoint]) -> Result<f64, MetricsError> {
    Ok((10f64.powf(bd_log_delta(anchor, test)?) - 1.0) * 100.0)
}

/// Bjøntegaard delta time in percent of encoding time saved at equal
/// quality; positive means the test encoder is faster. Point rates are
/// encode seconds.
pub fn bd_time(anchor: &[RdCurvePoint], test: &[RdCurvePoint]) -> Result<f64, MetricsError> {
    Ok(-(10f64.powf(bd_log_delta(anchor, test)?) - 1.0) * 100.0)
}

fn linear_at(pts: &[(f64, f64)], x: f64) -> f64 {
    let i = pts
        .windows(2)
        .position(|w| x <= w[1].0)
        .unwrap_or(pts.len() - 2);
    let (x0, y0) = pts[i];
    let (x1, y1) = pts[i + 1];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn trapezoid_integral(pts: &[(f64, f64)], lo: f64, hi: f64, knots: &[f64]) -> f64 {
    knots
        .windows(2)
        .map(|w| (w[1] - w[0]) * (linear_at(pts, w[0]) + linear_at(pts, w[1])) / 2.0)
        .sum::<f64>()
        .max(f64::MIN)
        * if hi > lo { 1.0 } else { 0.0 }
}

/// BD-rate with piecewise-linear curves integrated by the trapezoid rule.
/// Serves as an independent cross-check of [`bd_rate`].
pub fn bd_rate_trapezoid(
    anchor: &[RdCurvePoint],
    test: &[RdCurvePoint],
) -> Result<f64, MetricsError> {
    let a = prepare(anchor)?;
    let t = prepare(test)?;
    let (lo, hi) = overlap(&a, &t)?;
    let mut knots: Vec<f64> = a
        .iter()
        .chain(&t)
        .map(|p| p.0)
        .filter(|&q| q > lo && q < hi)
        .collect();
    knots.push(lo);
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let delta = (trapezoid_integral(&t, lo, hi, &knots) - trapezoid_integral(&a, lo, hi, &knots))
        / (hi - lo);
    Ok((10f64.powf(delta) - 1.0) * 100.0)
}

/// BDBR / BDT; lower is better.
pub fn efficiency_ratio(bdbr: f64, bdt: f64) -> Result<f64, MetricsError> {
    if bdt == 0.0 {
        return Err(MetricsError::UndefinedRatio);
    }
    Ok(bdbr / bdt)
}

/// One-line summary in the `BDT x | BDBR y | BDBR/BDT z` layout, two decimals.
pub fn format_bd_summary(bdt: f64, bdbr: f64) -> String {
    let ratio = match efficiency_ratio(bdbr, bdt) {
        Ok(r) => fixed2(r),
        Err(_) => "undefined".to_string(),
    };
    format!(
        "BDT {} | BDBR {} | BDBR/BDT {ratio}",
        fixed2(bdt),
        fixed2(bdbr)
    )
}

/// Two decimals; values that round to zero print without a sign.
pub fn fixed2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn parse_rows<R: Read>(reader: R, columns: usize) -> Result<Vec<Vec<f64>>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| MetricsError::Csv(e.to_string()))?;
        if rec.len() != columns {
            return Err(MetricsError::Csv(format!(
                "row {} has {} fields, expected {columns}",
                i + 1,
                rec.len()
            )));
        }
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            // A leading non-numeric row is a header.
            Err(_) if i == 0 => continue,
            Err(e) => return Err(MetricsError::Csv(format!("row {}: {e}", i + 1))),
        }
    }
    Ok(rows)
}

/// Reads `rate_or_time,psnr` rows. A non-numeric first row is treated as a header.
pub fn read_curve_csv<R: Read>(reader: R) -> Result<Vec<RdCurvePoint>, MetricsError> {
    Ok(parse_rows(reader, 2)?
        .into_iter()
        .map(|r| RdCurvePoint::new(r[0], r[1]))
        .collect())
}

/// Reads `rate,seconds,psnr` rows into a rate curve and a time curve.
pub fn read_rate_time_csv<R: Read>(
    reader: R,
) -> Result<(Vec<RdCurvePoint>, Vec<RdCurvePoint>), MetricsError> {
    let rows = parse_rows(reader, 3)?;
    Ok((
        rows.iter().map(|r| RdCurvePoint::new(r[0], r[2])).collect(),
        rows.iter().map(|r| RdCurvePoint::new(r[1], r[2])).collect(),
    ))
}

/// Spatial texture energy `E` and its mean frame-to-frame change `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityFeatures {
    #[serde(rename = "E")]
    pub e: f64,
    pub h: f64,
}

const COMPLEXITY_BLOCK: usize = 32;

/// Mean weighted AC energy of one frame over 32x32 DCT blocks. Partial edge
/// blocks are completed by edge replication.
pub fn frame_energy(frame: &LumaFrame) -> f64 {
    let n = COMPLEXITY_BLOCK;
    let padded = frame.pad_to(
        frame.width().div_ceil(n) * n,
        frame.height().div_ceil(n) * n,
    );
    let (cols, rows) = (padded.width() / n, padded.height() / n);
    let weight_norm = 2.0 * (n - 1) as f64;
    let (mut block, mut tmp, mut coeffs) = (Vec::with_capacity(n * n), Vec::new(), Vec::new());
    let mut total = 0.0;
    for by in 0..rows {
        for bx in 0..cols {
            block.clear();
            let mut sum = 0u32;
            for y in 0..n {
                let row = &padded.row(by * n + y)[bx * n..(bx + 1) * n];
                sum += row.iter().map(|&v| v as u32).sum::<u32>();
                block.extend(row.iter().map(|&v| v as f32));
            }
            // Removing the mean only changes the DC term, which is excluded,
            // and makes flat blocks transform to exact zeros.
            let mean = sum as f32 / (n * n) as f32;
            block.iter_mut().for_each(|v| *v -= mean);
            forward_dct(&block, n, n, &mut tmp, &mut coeffs);
            let mut acc = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    if i + j == 0 {
                        continue;
                    }
                    acc += (coeffs[i * n + j] as f64).abs() * (i + j) as f64 / weight_norm;
                }
            }
            total += acc / (n * n - 1) as f64;
        }
    }
    total / (cols * rows) as f64
}

pub fn complexity_features(seq: &VideoSequence) -> ComplexityFeatures {
    let energies: Vec<f64> = seq.frames().iter().map(frame_energy).collect();
    let e = energies.iter().sum::<f64>() / energies.len() as f64;
    let h = if energies.len() < 2 {
        0.0
    } else {
        energies
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .sum::<f64>()
            / (energies.len() - 1) as f64
    };
    ComplexityFeatures { e, h }
}
