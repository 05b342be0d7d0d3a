//! Base LDR metrics. Each produces a per-pixel quality map where larger is
//! better; pooled values are turned into the conventionally reported number
//! by [`BaseMetric::finalize`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::LdrImage;

/// Upper bound on reported PSNR, reached when the weighted MSE is zero.
pub const PSNR_CAP_DB: f64 = 120.0;
const MSE_FLOOR: f64 = 1e-12;

/// Single-scale SSIM constants for data with peak value `peak`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            peak: 1.0,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.peak).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.peak).powi(2)
    }

    /// Pixels trimmed from each side of the map.
    pub fn border(&self) -> usize {
        self.window / 2
    }

    /// Normalized 1-D Gaussian taps.
    pub fn kernel(&self) -> Vec<f64> {
        let r = self.border() as f64;
        let taps: Vec<f64> = (0..self.window)
            .map(|i| {
                let d = i as f64 - r;
                (-(d * d) / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        taps.into_iter().map(|t| t / sum).collect()
    }
}

/// The per-exposure LDR quality model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaseMetric {
    /// Negated mean absolute error.
    Mae,
    /// Negated squared error, reported as PSNR after pooling.
    PsnrMse,
    Ssim(SsimParams),
    /// Reserved: needs pretrained network weights.
    Lpips,
    /// Reserved: needs pretrained network weights.
    Dists,
}

impl BaseMetric {
    pub fn ssim() -> Self {
        BaseMetric::Ssim(SsimParams::default())
    }

    pub fn identifier(&self) -> &'static str {
        match self {
            BaseMetric::Mae => "mae",
            BaseMetric::PsnrMse => "psnr",
            BaseMetric::Ssim(_) => "ssim",
            BaseMetric::Lpips => "lpips",
            BaseMetric::Dists => "dists",
        }
    }

    /// Rows/columns dropped on each side of the local map.
    pub fn border(&self) -> usize {
        match self {
            BaseMetric::Ssim(p) => p.border(),
            _ => 0,
        }
    }

    pub fn check_supported(&self) -> Result<()> {
        match self {
            BaseMetric::Lpips | BaseMetric::Dists => {
                Err(Error::UnsupportedMetric(self.identifier().to_string()))
            }
            _ => Ok(()),
        }
    }

    pub fn local_map(&self, reference: &LdrImage, test: &LdrImage) -> Result<QualityMap> {
        match self {
            BaseMetric::Mae => local_map_mae(reference, test),
            BaseMetric::PsnrMse => local_map_sqerr(reference, test),
            BaseMetric::Ssim(p) => local_map_ssim_with(reference, test, p),
            BaseMetric::Lpips | BaseMetric::Dists => {
                Err(Error::UnsupportedMetric(self.identifier().to_string()))
            }
        }
    }

    /// Converts a pooled map value into the reported score.
    pub fn finalize(&self, pooled: f64) -> f64 {
        match self {
            BaseMetric::PsnrMse => (10.0 * (1.0 / (-pooled).max(MSE_FLOOR)).log10()).min(PSNR_CAP_DB),
            _ => pooled,
        }
    }

    /// Best attainable pooled value, reached when the images are identical.
    pub fn perfect_pooled(&self) -> f64 {
        match self {
            BaseMetric::Ssim(_) => 1.0,
            _ => 0.0,
        }
    }
}

/// Shorthand for [`BaseMetric::finalize`].
pub fn finalize_score(metric: &BaseMetric, pooled: f64) -> f64 {
    metric.finalize(pooled)
}

impl fmt::Display for BaseMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.identifier())
    }
}

impl FromStr for BaseMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mae" => Ok(BaseMetric::Mae),
            "psnr" | "psnr-mse" | "mse" => Ok(BaseMetric::PsnrMse),
            "ssim" => Ok(BaseMetric::ssim()),
            "lpips" => Ok(BaseMetric::Lpips),
            "dists" => Ok(BaseMetric::Dists),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

impl Serialize for BaseMetric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.identifier())
    }
}

impl<'de> Deserialize<'de> for BaseMetric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Channel-averaged local quality, higher is better.
///
/// `border` is the number of pixels cropped from every side of the source
/// images; map pixel `(x, y)` sits at image pixel `(x + border, y + border)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QualityMap {
    pub width: usize,
    pub height: usize,
    pub border: usize,
    pub values: Vec<f64>,
}

impl QualityMap {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        crate::pooling::compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }
}

fn check_same_dims(a: &LdrImage, b: &LdrImage) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

fn pointwise(reference: &LdrImage, test: &LdrImage, f: impl Fn(f64) -> f64) -> Result<QualityMap> {
    check_same_dims(reference, test)?;
    let values = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(r, t)| -(f(r[0] - t[0]) + f(r[1] - t[1]) + f(r[2] - t[2])) / 3.0)
        .collect();
    Ok(QualityMap {
        width: reference.width(),
        height: reference.height(),
        border: 0,
        values,
    })
}

/// Per pixel, minus the channel mean of `|ref - test|`.
pub fn local_map_mae(reference: &LdrImage, test: &LdrImage) -> Result<QualityMap> {
    pointwise(reference, test, f64::abs)
}

/// Per pixel, minus the channel mean of `(ref - test)^2`.
pub fn local_map_sqerr(reference: &LdrImage, test: &LdrImage) -> Result<QualityMap> {
    pointwise(reference, test, |d| d * d)
}

/// SSIM map with the default Gaussian window.
pub fn local_map_ssim(reference: &LdrImage, test: &LdrImage) -> Result<QualityMap> {
    local_map_ssim_with(reference, test, &SsimParams::default())
}

// Valid-region separable filtering of one plane.
fn filter_valid(plane: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    let n = kernel.len();
    let out_w = width + 1 - n;
    let out_h = height + 1 - n;
    let mut horiz = vec![0.0; out_w * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..out_w {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * row[x + k];
            }
            horiz[y * out_w + x] = acc;
        }
    }
    let mut out = vec![0.0; out_w * out_h];
    for y in 0..out_h {
        for x in 0..out_w {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * horiz[(y + k) * out_w + x];
            }
            out[y * out_w + x] = acc;
        }
    }
    out
}

pub fn local_map_ssim_with(reference: &LdrImage, test: &LdrImage, params: &SsimParams) -> Result<QualityMap> {
    check_same_dims(reference, test)?;
    let (width, height) = reference.dims();
    if width < params.window || height < params.window {
        return Err(Error::invalid(format!(
            "SSIM needs at least {0}x{0} pixels, got {width}x{height}",
            params.window
        )));
    }
    let kernel = params.kernel();
    let (c1, c2) = (params.c1(), params.c2());
    let out_w = width + 1 - params.window;
    let out_h = height + 1 - params.window;
    let mut values = vec![0.0; out_w * out_h];

    for c in 0..3 {
        let x: Vec<f64> = reference.pixels().iter().map(|p| p[c]).collect();
        let y: Vec<f64> = test.pixels().iter().map(|p| p[c]).collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        let mu_x = filter_valid(&x, width, height, &kernel);
        let mu_y = filter_valid(&y, width, height, &kernel);
        let e_xx = filter_valid(&xx, width, height, &kernel);
        let e_yy = filter_valid(&yy, width, height, &kernel);
        let e_xy = filter_valid(&xy, width, height, &kernel);
        for i in 0..values.len() {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2));
            values[i] += s / 3.0;
        }
    }
    Ok(QualityMap {
        width: out_w,
        height: out_h,
        border: params.border(),
        values,
    })
}
