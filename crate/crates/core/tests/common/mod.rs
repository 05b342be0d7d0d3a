//! Fixtures and independent scalar oracles shared by the integration tests.
#![allow(dead_code)]

use hdriqa::{HdrImage, LdrImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth random scene spanning roughly `stops` stops below a peak of 1, with
/// mild per-channel tint and fine texture.
pub fn random_scene(seed: u64, width: usize, height: usize, stops: f64) -> HdrImage {
    let mut r = rng(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                r.random_range(0.5..3.0),
                r.random_range(0.5..3.0),
                r.random_range(0.0..std::f64::consts::TAU),
                r.random_range(0.5..1.0),
            )
        })
        .collect();
    let total: f64 = waves.iter().map(|w| w.3).sum();
    let tint: Vec<[f64; 3]> = (0..width * height)
        .map(|_| {
            [
                r.random_range(0.75..1.0),
                r.random_range(0.75..1.0),
                r.random_range(0.75..1.0),
            ]
        })
        .collect();
    HdrImage::from_fn(width, height, |x, y| {
        let (u, v) = (x as f64 / width as f64, y as f64 / height as f64);
        let s: f64 = waves
            .iter()
            .map(|&(fx, fy, ph, a)| a * (std::f64::consts::TAU * (fx * u + fy * v) + ph).sin())
            .sum::<f64>()
            / total;
        // s in [-1, 1] -> log2 luminance in [-stops, 0]
        let lum = ((s + 1.0) / 2.0 * stops - stops).exp2();
        let t = tint[y * width + x];
        [lum * t[0], lum * t[1], lum * t[2]]
    })
    .unwrap()
}

/// Horizontal ramp whose log2 luminance runs linearly over `stops` stops
/// ending at `top`, sampled at pixel centres.
pub fn log_ramp(width: usize, height: usize, stops: f64, top: f64) -> HdrImage {
    HdrImage::from_fn(width, height, |x, _| {
        let t = (x as f64 + 0.5) / width as f64;
        let l = (top - stops + stops * t).exp2();
        [l; 3]
    })
    .unwrap()
}

/// Two-level scene: half the pixels at `2^low`, half at `2^(low + stops)`.
pub fn two_level_scene(low: f64, stops: f64) -> HdrImage {
    HdrImage::from_fn(40, 25, |x, _| {
        let l = if x < 20 { low } else { low + stops };
        [l.exp2(); 3]
    })
    .unwrap()
}

/// Adds `sigma * n` with a fixed unit-normal pattern `n`, clamping at zero.
pub fn add_noise(h: &HdrImage, sigma: f64, seed: u64) -> HdrImage {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let data = h
        .pixels()
        .iter()
        .map(|p| p.map(|c| (c + sigma * normal.sample(&mut r)).max(0.0)))
        .collect();
    HdrImage::new(h.width(), h.height(), data).unwrap()
}

/// Multiplies each value by `1 + sigma * n`, clamping at zero.
pub fn perturb_relative(h: &HdrImage, sigma: f64, seed: u64) -> HdrImage {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let data = h
        .pixels()
        .iter()
        .map(|p| p.map(|c| (c * (1.0 + sigma * normal.sample(&mut r))).max(0.0)))
        .collect();
    HdrImage::new(h.width(), h.height(), data).unwrap()
}

pub fn random_ldr(seed: u64, width: usize, height: usize) -> LdrImage {
    let mut r = rng(seed);
    LdrImage::from_fn(width, height, |_, _| {
        [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()]
    })
    .unwrap()
}

/// `base` plus Gaussian noise of the given strength, clamped to [0, 1].
pub fn noisy_ldr(base: &LdrImage, sigma: f64, seed: u64) -> LdrImage {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let data = base
        .pixels()
        .iter()
        .map(|p| p.map(|c| (c + normal.sample(&mut r)).clamp(0.0, 1.0)))
        .collect();
    LdrImage::new(base.width(), base.height(), data).unwrap()
}

// ---- scalar oracles -------------------------------------------------------

pub fn oracle_mae_map(a: &LdrImage, b: &LdrImage) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (p, q) = (a.pixel(x, y), b.pixel(x, y));
            let mut s = 0.0;
            for c in 0..3 {
                s += (p[c] - q[c]).abs();
            }
            out.push(-s / 3.0);
        }
    }
    out
}

pub fn oracle_sqerr_map(a: &LdrImage, b: &LdrImage) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (p, q) = (a.pixel(x, y), b.pixel(x, y));
            let mut s = 0.0;
            for c in 0..3 {
                s += (p[c] - q[c]) * (p[c] - q[c]);
            }
            out.push(-s / 3.0);
        }
    }
    out
}

/// Direct 2-D windowed SSIM, 11x11 Gaussian (sigma 1.5), valid region only.
pub fn oracle_ssim_map(a: &LdrImage, b: &LdrImage) -> Vec<f64> {
    let (c1, c2) = (0.01f64 * 0.01, 0.03f64 * 0.03);
    let mut w = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (dy, row) in w.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let (fx, fy) = (dx as f64 - 5.0, dy as f64 - 5.0);
            *v = (-(fx * fx + fy * fy) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let mut out = Vec::new();
    for y in 0..=a.height() - 11 {
        for x in 0..=a.width() - 11 {
            let mut s = 0.0;
            for c in 0..3 {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..11 {
                    for dx in 0..11 {
                        let g = w[dy][dx] / total;
                        let p = a.pixel(x + dx, y + dy)[c];
                        let q = b.pixel(x + dx, y + dy)[c];
                        mx += g * p;
                        my += g * q;
                        sxx += g * p * p;
                        syy += g * q * q;
                        sxy += g * p * q;
                    }
                }
                let (vx, vy, cov) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
                s += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
            out.push(s / 3.0);
        }
    }
    out
}

/// Exhaustive grid maximum of `f` over `n` equally spaced points in `[lo, hi]`.
pub fn grid_argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
