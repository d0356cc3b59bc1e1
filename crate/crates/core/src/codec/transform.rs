//! Orthonormal 2-D DCT-II, scalar quantizer and the bit-count rate proxy.

use std::cell::RefCell;
use std::sync::{Arc, OnceLock};

use rustdct::{DctPlanner, TransformType2And3};

/// Per-CU header cost in bits.
pub const HEADER_BITS: u64 = 16;

/// Supported transform sizes are 8, 16, 32, 64 and 128.
const MIN_LOG2: u32 = 3;
const MAX_LOG2: u32 = 7;

type Dct = Arc<dyn TransformType2And3<f32>>;

fn plan(n: usize) -> &'static Dct {
    static PLANS: OnceLock<Vec<Dct>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| {
        let mut planner = DctPlanner::new();
        (MIN_LOG2..=MAX_LOG2)
            .map(|l| planner.plan_dct2(1 << l))
            .collect()
    });
    assert!(
        n.is_power_of_two() && (8..=128).contains(&n),
        "unsupported transform size {n}"
    );
    &plans[(n.trailing_zeros() - MIN_LOG2) as usize]
}

thread_local! {
    static SCRATCH: RefCell<Vec<f32>> = const { RefCell::new(Vec::new()) };
}

/// Orthonormal scale factors (k = 0, k > 0).
fn scales(n: usize) -> (f32, f32) {
    ((1.0 / n as f32).sqrt(), (2.0 / n as f32).sqrt())
}

/// Orthonormal DCT-II of every length-`n` row of `data`, in place.
fn forward_rows(data: &mut [f32], n: usize) {
    let dct = plan(n);
    let (s0, s) = scales(n);
    SCRATCH.with_borrow_mut(|scratch| {
        scratch.resize(dct.get_scratch_len(), 0.0);
        for row in data.chunks_exact_mut(n) {
            dct.process_dct2_with_scratch(row, scratch);
            row[0] *= s0;
            row[1..].iter_mut().for_each(|v| *v *= s);
        }
    });
}

/// Inverse of [`forward_rows`]; all-zero rows are left untouched.
fn inverse_rows(data: &mut [f32], n: usize) {
    let dct = plan(n);
    let (s0, s) = scales(n);
    SCRATCH.with_borrow_mut(|scratch| {
        scratch.resize(dct.get_scratch_len(), 0.0);
        for row in data.chunks_exact_mut(n) {
            if row.iter().all(|&v| v == 0.0) {
                continue;
            }
            // DCT-III halves the k = 0 term.
            row[0] *= 2.0 * s0;
            row[1..].iter_mut().for_each(|v| *v *= s);
            dct.process_dct3_with_scratch(row, scratch);
        }
    });
}

/// `dst` becomes the transpose of the `w`x`h` row-major `src`.
fn transpose(src: &[f32], w: usize, h: usize, dst: &mut Vec<f32>) {
    dst.resize(w * h, 0.0);
    for (y, row) in src.chunks_exact(w).enumerate() {
        for (x, &v) in row.iter().enumerate() {
            dst[x * h + y] = v;
        }
    }
}

/// 1-D orthonormal DCT-II of `line` in place; its length must be a transform size.
pub(crate) fn forward_1d(line: &mut [f32]) {
    forward_rows(line, line.len());
}

/// Forward 2-D DCT in column-major coefficient order: horizontal frequency
/// `u` and vertical frequency `v` land at `out[u * h + v]`.
pub(crate) fn forward_dct_cm(
    input: &[f32],
    w: usize,
    h: usize,
    tmp: &mut Vec<f32>,
    out: &mut Vec<f32>,
) {
    debug_assert_eq!(w * h, input.len());
    tmp.clear();
    tmp.extend_from_slice(input);
    forward_rows(tmp, w);
    transpose(tmp, w, h, out);
    forward_rows(out, h);
}

/// Inverse of [`forward_dct_cm`]. `coeffs` is used as scratch.
pub(crate) fn inverse_dct_cm(coeffs: &mut [f32], w: usize, h: usize, out: &mut Vec<f32>) {
    inverse_rows(coeffs, h);
    transpose(coeffs, h, w, out);
    inverse_rows(out, w);
}

/// Forward 2-D DCT of a `w`x`h` row-major block into row-major `out`.
pub(crate) fn forward_dct(
    input: &[f32],
    w: usize,
    h: usize,
    tmp: &mut Vec<f32>,
    out: &mut Vec<f32>,
) {
    forward_dct_cm(input, w, h, tmp, out);
    transpose(out, h, w, tmp);
    std::mem::swap(tmp, out);
}

/// Inverse 2-D DCT of row-major coefficients.
#[cfg(test)]
fn inverse_dct(coeffs: &[f32], w: usize, h: usize, tmp: &mut Vec<f32>, out: &mut Vec<f32>) {
    transpose(coeffs, w, h, tmp);
    inverse_dct_cm(tmp, w, h, out);
}

/// Quantizer step size: 2^((qp - 4) / 6).
pub fn qstep(qp: u8) -> f64 {
    2f64.powf((qp as f64 - 4.0) / 6.0)
}

/// Rate-distortion lambda: `scale * 0.57 * 2^((qp - 12) / 3)`.
pub fn lambda_of_qp(qp: u8, scale: f64) -> f64 {
    scale * 0.57 * 2f64.powf((qp as f64 - 12.0) / 3.0)
}

/// Rounding offset of the scalar quantizer (0.5 = round to nearest).
pub const ROUNDING_OFFSET: f64 = 0.5;

/// Quantizes one coefficient: sign(c) * floor(|c| / step + offset).
#[inline]
pub fn quantize(coeff: f64, step: f64) -> i32 {
    quantize_scaled(coeff, 1.0 / step)
}

#[inline]
fn quantize_scaled(coeff: f64, inv_step: f64) -> i32 {
    // The operand is non-negative, so truncation is floor.
    let level = (coeff.abs() * inv_step + ROUNDING_OFFSET) as i32;
    if coeff < 0.0 {
        -level
    } else {
        level
    }
}

/// Bits spent on one nonzero level: 3 + 2 * ceil(log2(|level| + 1)).
#[inline]
pub fn level_bits(level: i32) -> u64 {
    debug_assert!(level != 0);
    let n = level.unsigned_abs() as u64 + 1;
    3 + 2 * n.next_power_of_two().trailing_zeros() as u64
}

/// Result of coding one residual block.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformResult {
    /// SSE between original and the clamped reconstruction.
    pub distortion: u64,
    pub bits: u64,
    pub nonzero: usize,
    /// Clamped 8-bit reconstruction, row-major.
    pub recon: Vec<u8>,
}

/// Scratch buffers reused across transform calls.
#[derive(Default)]
pub struct TransformScratch {
    pub(crate) residual: Vec<f32>,
    pub(crate) tmp: Vec<f32>,
    pub(crate) coeffs: Vec<f32>,
    rec: Vec<f32>,
}

/// Codes `original - prediction` through DCT, quantization, dequantization
/// and inverse DCT, then clamps `prediction + residual` to 8 bits.
///
/// Both slices are `w`x`h` row-major; `w` and `h` must be transform sizes.
pub fn transform_quant(
    original: &[u8],
    prediction: &[u8],
    w: usize,
    h: usize,
    qp: u8,
) -> TransformResult {
    let mut scratch = TransformScratch::default();
    let mut recon = vec![0u8; w * h];
    let (distortion, bits, nonzero) = transform_quant_into(
        original,
        prediction,
        w,
        h,
        qstep(qp),
        &mut scratch,
        &mut recon,
    );
    TransformResult {
        distortion,
        bits,
        nonzero,
        recon,
    }
}

/// Allocation-free variant. Returns (sse, bits, nonzero levels).
pub(crate) fn transform_quant_into(
    original: &[u8],
    prediction: &[u8],
    w: usize,
    h: usize,
    step: f64,
    s: &mut TransformScratch,
    recon: &mut [u8],
) -> (u64, u64, usize) {
    let n = w * h;
    debug_assert!(original.len() == n && prediction.len() == n && recon.len() == n);
    s.residual.clear();
    let mut any = false;
    s.residual
        .extend(original.iter().zip(prediction).map(|(&o, &p)| {
            let r = o as i16 - p as i16;
            any |= r != 0;
            r as f32
        }));
    if !any {
        recon.copy_from_slice(prediction);
        return (0, HEADER_BITS, 0);
    }
    forward_dct_cm(&s.residual, w, h, &mut s.tmp, &mut s.coeffs);
    code_coefficients(original, prediction, w, h, step, s, recon)
}

/// Quantizes the residual coefficients in `s.coeffs` (column-major, see
/// [`forward_dct_cm`]), reconstructs on top of `prediction` and measures the
/// result against `original`. Returns (sse, bits, nonzero levels).
pub(crate) fn code_coefficients(
    original: &[u8],
    prediction: &[u8],
    w: usize,
    h: usize,
    step: f64,
    s: &mut TransformScratch,
    recon: &mut [u8],
) -> (u64, u64, usize) {
    let inv_step = 1.0 / step;
    let mut bits = HEADER_BITS;
    let mut nonzero = 0usize;
    for c in s.coeffs.iter_mut() {
        let level = quantize_scaled(*c as f64, inv_step);
        if level != 0 {
            bits += level_bits(level);
            nonzero += 1;
            *c = (level as f64 * step) as f32;
        } else {
            *c = 0.0;
        }
    }

    let mut sse = 0u64;
    if nonzero == 0 {
        recon.copy_from_slice(prediction);
        for (&o, &p) in original.iter().zip(prediction) {
            let d = o as i32 - p as i32;
            sse += (d * d) as u64;
        }
        return (sse, bits, 0);
    }

    inverse_dct_cm(&mut s.coeffs, w, h, &mut s.rec);
    for ((r, (&o, &p)), &res) in recon
        .iter_mut()
        .zip(original.iter().zip(prediction))
        .zip(&s.rec)
    {
        let v = p as f32 + res;
        let v = if v <= 0.0 {
            0
        } else if v >= 255.0 {
            255
        } else {
            (v + 0.5) as u8
        };
        *r = v;
        let d = o as i32 - v as i32;
        sse += (d * d) as u64;
    }
    (sse, bits, nonzero)
}
