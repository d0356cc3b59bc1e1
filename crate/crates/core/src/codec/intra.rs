//! The four intra predictors and the per-block mode decision.

use serde::{Deserialize, Serialize};

use super::transform::{code_coefficients, forward_1d, forward_dct_cm, TransformScratch};

/// Declaration order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IntraMode {
    Dc,
    Planar,
    Horizontal,
    Vertical,
}

impl IntraMode {
    pub const ALL: [IntraMode; 4] = [
        IntraMode::Dc,
        IntraMode::Planar,
        IntraMode::Horizontal,
        IntraMode::Vertical,
    ];
}

/// Reconstructed samples bordering a block: the row above and the column to
/// the left, each as long as the block edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighbors {
    pub top: Vec<u8>,
    pub left: Vec<u8>,
}

/// Fallback sample when no neighbor exists (mid-gray for 8-bit).
pub const UNAVAILABLE: u8 = 128;

impl Neighbors {
    /// Gathers neighbors of the `w`x`h` block at (`x`, `y`) from a reconstructed
    /// plane of row stride `stride`. A missing side is filled by replicating the
    /// nearest sample of the other side, or mid-gray if both are missing.
    pub fn gather(recon: &[u8], stride: usize, x: usize, y: usize, w: usize, h: usize) -> Self {
        let top = (y > 0).then(|| recon[(y - 1) * stride + x..(y - 1) * stride + x + w].to_vec());
        let left = (x > 0).then(|| {
            (0..h)
                .map(|j| recon[(y + j) * stride + x - 1])
                .collect::<Vec<_>>()
        });
        match (top, left) {
            (Some(top), Some(left)) => Neighbors { top, left },
            (Some(top), None) => Neighbors {
                left: vec![top[0]; h],
                top,
            },
            (None, Some(left)) => Neighbors {
                top: vec![left[0]; w],
                left,
            },
            (None, None) => Neighbors {
                top: vec![UNAVAILABLE; w],
                left: vec![UNAVAILABLE; h],
            },
        }
    }
}

/// Fills `out` (row-major `w`x`h`) with the prediction for `mode`.
pub fn predict(mode: IntraMode, nb: &Neighbors, w: usize, h: usize, out: &mut [u8]) {
    debug_assert_eq!(out.len(), w * h);
    match mode {
        IntraMode::Dc => {
            let n = (w + h) as u32;
            let sum: u32 = nb.top.iter().chain(&nb.left).map(|&v| v as u32).sum();
            out.fill(((sum + n / 2) / n) as u8);
        }
        IntraMode::Horizontal => {
            for (row, &l) in out.chunks_exact_mut(w).zip(&nb.left) {
                row.fill(l);
            }
        }
        IntraMode::Vertical => {
            for row in out.chunks_exact_mut(w) {
                row.copy_from_slice(&nb.top);
            }
        }
        IntraMode::Planar => {
            // Bilinear blend toward the last top sample (right) and the last
            // left sample (bottom).
            let (w32, h32) = (w as u32, h as u32);
            let top_right = nb.top[w - 1] as u32;
            let bottom_left = nb.left[h - 1] as u32;
            let denom = 2 * w32 * h32;
            let shift = denom.trailing_zeros();
            for yy in 0..h {
                let l = nb.left[yy] as u32;
                let y32 = yy as u32;
                for xx in 0..w {
                    let x32 = xx as u32;
                    let t = nb.top[xx] as u32;
                    let horiz = ((w32 - 1 - x32) * l + (x32 + 1) * top_right) * h32;
                    let vert = ((h32 - 1 - y32) * t + (y32 + 1) * bottom_left) * w32;
                    out[yy * w + xx] = ((horiz + vert + denom / 2) >> shift) as u8;
                }
            }
        }
    }
}

/// Outcome of the four-mode search for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecision {
    pub mode: IntraMode,
    pub distortion: u64,
    pub bits: u64,
    pub cost: f64,
    pub recon: Vec<u8>,
}

#[derive(Default)]
pub(crate) struct ModeScratch {
    pub tq: TransformScratch,
    pred: Vec<u8>,
    recon: Vec<u8>,
    orig_coeffs: Vec<f32>,
    line: Vec<f32>,
}

/// Evaluates DC, planar, horizontal and vertical prediction for the `w`x`h`
/// block `original` and returns the mode minimizing `D + lambda * R`.
/// Ties keep the earlier mode.
pub fn evaluate_modes(
    original: &[u8],
    nb: &Neighbors,
    w: usize,
    h: usize,
    qp: u8,
    lambda: f64,
) -> ModeDecision {
    evaluate_modes_with(
        original,
        nb,
        w,
        h,
        super::transform::qstep(qp),
        lambda,
        &mut ModeScratch::default(),
    )
}

/// The original block is transformed once. DC, horizontal and vertical
/// predictions are separable, so their spectra come from at most one 1-D
/// transform and are subtracted in the coefficient domain.
pub(crate) fn evaluate_modes_with(
    original: &[u8],
    nb: &Neighbors,
    w: usize,
    h: usize,
    step: f64,
    lambda: f64,
    s: &mut ModeScratch,
) -> ModeDecision {
    let n = w * h;
    s.pred.resize(n, 0);
    s.recon.resize(n, 0);
    s.tq.residual.clear();
    s.tq.residual.extend(original.iter().map(|&v| v as f32));
    forward_dct_cm(&s.tq.residual, w, h, &mut s.tq.tmp, &mut s.orig_coeffs);

    let mut best: Option<ModeDecision> = None;
    for mode in IntraMode::ALL {
        predict(mode, nb, w, h, &mut s.pred);
        let (distortion, bits) = if original == &s.pred[..] {
            s.recon.copy_from_slice(&s.pred);
            (0, super::transform::HEADER_BITS)
        } else {
            prediction_residual(mode, nb, original, w, h, s);
            let (d, b, _) =
                code_coefficients(original, &s.pred, w, h, step, &mut s.tq, &mut s.recon);
            (d, b)
        };
        let cost = distortion as f64 + lambda * bits as f64;
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            match &mut best {
                Some(b) => {
                    b.mode = mode;
                    b.distortion = distortion;
                    b.bits = bits;
                    b.cost = cost;
                    b.recon.copy_from_slice(&s.recon);
                }
                None => {
                    best = Some(ModeDecision {
                        mode,
                        distortion,
                        bits,
                        cost,
                        recon: s.recon.clone(),
                    })
                }
            }
        }
    }
    best.expect("four modes evaluated")
}

/// Leaves the column-major spectrum of `original - s.pred` in `s.tq.coeffs`.
fn prediction_residual(
    mode: IntraMode,
    nb: &Neighbors,
    original: &[u8],
    w: usize,
    h: usize,
    s: &mut ModeScratch,
) {
    let coeffs = &mut s.tq.coeffs;
    match mode {
        IntraMode::Dc => {
            coeffs.clone_from(&s.orig_coeffs);
            coeffs[0] -= s.pred[0] as f32 * ((w * h) as f32).sqrt();
        }
        IntraMode::Vertical => {
            coeffs.clone_from(&s.orig_coeffs);
            s.line.clear();
            s.line.extend(nb.top.iter().map(|&v| v as f32));
            forward_1d(&mut s.line);
            let gain = (h as f32).sqrt();
            for (u, &c) in s.line.iter().enumerate() {
                coeffs[u * h] -= gain * c;
            }
        }
        IntraMode::Horizontal => {
            coeffs.clone_from(&s.orig_coeffs);
            s.line.clear();
            s.line.extend(nb.left.iter().map(|&v| v as f32));
            forward_1d(&mut s.line);
            let gain = (w as f32).sqrt();
            for (v, &c) in s.line.iter().enumerate() {
                coeffs[v] -= gain * c;
            }
        }
        IntraMode::Planar => {
            s.tq.residual.clear();
            s.tq.residual.extend(
                original
                    .iter()
                    .zip(&s.pred)
                    .map(|(&o, &p)| (o as i16 - p as i16) as f32),
            );
            forward_dct_cm(&s.tq.residual, w, h, &mut s.tq.tmp, &mut s.tq.coeffs);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::transform::{lambda_of_qp, qstep};
    use rand::{rngs::StdRng, Rng, SeedableRng};

    #[test]
    fn constant_block_dc_wins() {
        let nb = Neighbors {
            top: vec![50; 8],
            left: vec![50; 8],
        };
        let d = evaluate_modes(&[50; 64], &nb, 8, 8, 32, lambda_of_qp(32, 1.0));
        assert_eq!(d.mode, IntraMode::Dc);
        assert_eq!(d.distortion, 0);
        assert_eq!(d.bits, 16);
    }

    #[test]
    fn vertical_stripes_predicted_exactly() {
        let top: Vec<u8> = (0..16).map(|x| if x % 2 == 0 { 20 } else { 220 }).collect();
        let nb = Neighbors {
            top: top.clone(),
            left: vec![120; 16],
        };
        let block: Vec<u8> = (0..256).map(|i| top[i % 16]).collect();
        let lambda = lambda_of_qp(27, 1.0);
        let d = evaluate_modes(&block, &nb, 16, 16, 27, lambda);
        assert_eq!(d.mode, IntraMode::Vertical);
        assert_eq!(d.distortion, 0);
        assert_eq!(d.bits, 16);
        assert!(d.cost <= lambda * 16.0);
    }

    #[test]
    fn gather_edge_replication() {
        let stride = 16;
        let recon: Vec<u8> = (0..16 * 16).map(|i| i as u8).collect();
        let nb = Neighbors::gather(&recon, stride, 0, 0, 8, 8);
        assert_eq!(nb.top, vec![UNAVAILABLE; 8]);
        let nb = Neighbors::gather(&recon, stride, 8, 0, 8, 8);
        assert_eq!(
            nb.left,
            (0..8).map(|j| (j * 16 + 7) as u8).collect::<Vec<_>>()
        );
        assert_eq!(nb.top, vec![7; 8]);
        let nb = Neighbors::gather(&recon, stride, 0, 8, 8, 8);
        assert_eq!(
            nb.top,
            (0..8).map(|i| (7 * 16 + i) as u8).collect::<Vec<_>>()
        );
        assert_eq!(nb.left, vec![7 * 16; 8]);
    }

    // Independent oracle: naive f64 DCT, explicit predictors, argmin over modes.
    fn oracle_cost(block: &[u8], nb: &Neighbors, qp: u8, lambda: f64) -> f64 {
        let n = 8usize;
        let pi = std::f64::consts::PI;
        let c = |k: usize| {
            if k == 0 {
                (1.0 / 8f64).sqrt()
            } else {
                (2.0 / 8f64).sqrt()
            }
        };
        let basis = |k: usize, i: usize| c(k) * ((2 * i + 1) as f64 * k as f64 * pi / 16.0).cos();
        let step = qstep(qp);
        let mut best = f64::INFINITY;
        for mode in IntraMode::ALL {
            let pred: Vec<f64> = (0..64)
                .map(|i| {
                    let (x, y) = (i % 8, i / 8);
                    let (t, l) = (nb.top[x] as f64, nb.left[y] as f64);
                    match mode {
                        IntraMode::Dc => {
                            let s: f64 = nb.top.iter().chain(&nb.left).map(|&v| v as f64).sum();
                            (s / 16.0 + 0.5).floor()
                        }
                        IntraMode::Horizontal => l,
                        IntraMode::Vertical => t,
                        IntraMode::Planar => {
                            let tr = nb.top[7] as f64;
                            let bl = nb.left[7] as f64;
                            let hz = ((7 - x) as f64 * l + (x + 1) as f64 * tr) * 8.0;
                            let vt = ((7 - y) as f64 * t + (y + 1) as f64 * bl) * 8.0;
                            ((hz + vt + 64.0) / 128.0).floor()
                        }
                    }
                })
                .collect();
            let res: Vec<f64> = (0..64).map(|i| block[i] as f64 - pred[i]).collect();
            let mut levels = vec![0f64; 64];
            let mut bits = 16.0;
            for v in 0..n {
                for u in 0..n {
                    let mut acc = 0.0;
                    for y in 0..n {
                        for x in 0..n {
                            acc += res[y * n + x] * basis(u, x) * basis(v, y);
                        }
                    }
                    let l = (acc.abs() / step + 0.5).floor() * acc.signum();
                    if l != 0.0 {
                        bits += 3.0 + 2.0 * (l.abs() + 1.0).log2().ceil();
                    }
                    levels[v * n + u] = l * step;
                }
            }
            let mut sse = 0.0;
            for y in 0..n {
                for x in 0..n {
                    let mut acc = 0.0;
                    for v in 0..n {
                        for u in 0..n {
                            acc += levels[v * n + u] * basis(u, x) * basis(v, y);
                        }
                    }
                    let rec = (pred[y * n + x] + acc).round().clamp(0.0, 255.0);
                    sse += (block[y * n + x] as f64 - rec).powi(2);
                }
            }
            best = best.min(sse + lambda * bits);
        }
        best
    }

    #[test]
    fn random_blocks_match_exhaustive_oracle() {
        let mut rng = StdRng::seed_from_u64(0x5eed);
        for trial in 0..200 {
            let qp = [22u8, 27, 32, 37, 42][trial % 5];
            let lambda = lambda_of_qp(qp, 1.0);
            let block: Vec<u8> = (0..64).map(|_| rng.random()).collect();
            let nb = Neighbors {
                top: (0..8).map(|_| rng.random()).collect(),
                left: (0..8).map(|_| rng.random()).collect(),
            };
            let d = evaluate_modes(&block, &nb, 8, 8, qp, lambda);
            let oracle = oracle_cost(&block, &nb, qp, lambda);
            assert!(
                (d.cost - oracle).abs() <= 1e-6 * oracle.max(1.0),
                "trial {trial}: {} vs {}",
                d.cost,
                oracle
            );
        }
    }
}
