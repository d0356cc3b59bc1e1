//! Deterministic synthetic clips for tests, benchmarks and smoke runs.
//!
//! Content mixes smooth gradients, a band of fine texture, soft-edged
//! shapes that move between frames and low-amplitude noise, so a partition
//! search finds both large and small CUs.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::media::{Fps, LumaFrame, VideoSequence};

struct Blob {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    vx: f64,
    vy: f64,
    level: f64,
}

/// `frames` frames of `width`x`height` textured content, fully determined by `seed`.
pub fn textured_clip(width: usize, height: usize, frames: usize, seed: u64) -> VideoSequence {
    let mut rng = StdRng::seed_from_u64(seed);
    let (wf, hf) = (width as f64, height as f64);
    let gx = rng.random_range(-0.6..0.6);
    let gy = rng.random_range(-0.6..0.6);
    let base = rng.random_range(70.0..150.0);
    let period = rng.random_range(3.0..7.0);
    let tex_amp = rng.random_range(18.0..40.0);
    let tex_x0 = rng.random_range(0.0..wf * 0.5);
    let tex_y0 = rng.random_range(0.0..hf * 0.5);
    let (tex_w, tex_h) = (wf * 0.35, hf * 0.4);
    let blobs: Vec<Blob> = (0..4)
        .map(|_| Blob {
            cx: rng.random_range(0.0..wf),
            cy: rng.random_range(0.0..hf),
            rx: rng.random_range(10.0..wf.min(hf) * 0.3 + 11.0),
            ry: rng.random_range(10.0..wf.min(hf) * 0.3 + 11.0),
            vx: rng.random_range(-3.0..3.0),
            vy: rng.random_range(-2.0..2.0),
            level: rng.random_range(-70.0..70.0),
        })
        .collect();

    let frames: Vec<LumaFrame> = (0..frames)
        .map(|t| {
            let t = t as f64;
            LumaFrame::from_fn(width, height, |x, y| {
                let (xf, yf) = (x as f64, y as f64);
                let mut v = base + gx * xf + gy * yf;
                if xf >= tex_x0 && xf < tex_x0 + tex_w && yf >= tex_y0 && yf < tex_y0 + tex_h {
                    v += tex_amp
                        * ((xf + 2.0 * t) / period).sin()
                        * ((yf * 0.7 + xf * 0.3) / period).cos();
                }
                for b in &blobs {
                    let dx = (xf - b.cx - b.vx * t) / b.rx;
                    let dy = (yf - b.cy - b.vy * t) / b.ry;
                    let r = (dx * dx + dy * dy).sqrt();
                    // Soft edge over the outer 20% of the radius.
                    let w = ((1.0 - r) / 0.2).clamp(0.0, 1.0);
                    v += b.level * w;
                }
                v += rng.random_range(-3.0..=3.0);
                v.round().clamp(0.0, 255.0) as u8
            })
            .expect("clip dimensions are validated by the caller")
        })
        .collect();
    VideoSequence::new(frames, Fps::new(30, 1).expect("nonzero")).expect("uniform frames")
}

/// `frames` copies of a flat `value` frame.
pub fn constant_clip(width: usize, height: usize, frames: usize, value: u8) -> VideoSequence {
    let f = LumaFrame::filled(width, height, value)
        .expect("clip dimensions are validated by the caller");
    VideoSequence::new(vec![f; frames], Fps::new(30, 1).expect("nonzero")).expect("uniform frames")
}
