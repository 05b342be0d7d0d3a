//! Gain-offset-gamma display models and exposure-window placement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{HdrImage, LdrImage};

/// Spacing between consecutive window endpoints, in stops. Three windows
/// cover every eight stops of scene range.
pub const WINDOW_SPACING: f64 = 8.0 / 3.0;

/// Luminances are clamped to this floor before taking log2.
pub const LUMINANCE_FLOOR: f64 = 1.0 / (1u64 << 30) as f64;

/// Lower and upper percentiles of positive log-luminance used as the scene
/// range endpoints.
pub const RANGE_PERCENTILES: (f64, f64) = (0.001, 0.999);

// Guards ceil() against round-off when the range is an exact multiple of the
// window spacing.
const COUNT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayModel {
    pub gamma: f64,
    pub black_level: f64,
    /// Display black luminance in cd/m².
    pub l_min: f64,
    /// Display peak luminance in cd/m².
    pub l_max: f64,
}

impl Default for DisplayModel {
    fn default() -> Self {
        Self {
            gamma: 2.2,
            black_level: 1.0 / 128.0,
            l_min: 1.0,
            l_max: 200.0,
        }
    }
}

impl DisplayModel {
    pub fn new(gamma: f64, black_level: f64, l_min: f64, l_max: f64) -> Result<Self> {
        let model = Self {
            gamma,
            black_level,
            l_min,
            l_max,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.black_level > 0.0 && self.black_level < 1.0) {
            return Err(Error::invalid(format!(
                "black level must be in (0, 1), got {}",
                self.black_level
            )));
        }
        if !(self.l_min > 0.0 && self.l_min < self.l_max && self.l_max.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 < l_min < l_max, got {} and {}",
                self.l_min, self.l_max
            )));
        }
        Ok(())
    }

    /// Display dynamic range in stops, log2(l_max / l_min).
    pub fn window_size_stops(&self) -> f64 {
        (self.l_max / self.l_min).log2()
    }

    /// Inverse model for one channel value of exposed radiance `h * v`.
    #[inline]
    pub fn encode(&self, exposed: f64) -> f64 {
        let b = self.black_level;
        ((exposed - b) / (1.0 - b)).clamp(0.0, 1.0).powf(1.0 / self.gamma)
    }

    /// Forward model for one display-encoded value, before peak scaling.
    #[inline]
    pub fn decode(&self, p: f64) -> f64 {
        (1.0 - self.black_level) * p.powf(self.gamma) + self.black_level
    }
}

/// Renders `h` at exposure gain `v` through the inverse display model,
/// channel by channel.
pub fn inverse_display(h: &HdrImage, v: f64, model: &DisplayModel) -> Result<LdrImage> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!("exposure must be positive, got {v}")));
    }
    let data = h
        .pixels()
        .iter()
        .map(|p| p.map(|c| model.encode(c * v)))
        .collect();
    Ok(LdrImage::from_raw(h.width(), h.height(), data))
}

/// Converts display-encoded values to luminance, scaled so an encoded value
/// of 1 maps to `l_max`.
pub fn forward_display(p: &LdrImage, model: &DisplayModel) -> HdrImage {
    let data = p
        .pixels()
        .iter()
        .map(|px| px.map(|c| model.decode(c) * model.l_max))
        .collect();
    HdrImage::new(p.width(), p.height(), data).expect("forward display output is finite and positive")
}

/// Placement of the exposure windows for one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    /// Scene range low end, log2 luminance.
    pub l0: f64,
    /// Scene range high end, log2 luminance.
    pub l1: f64,
    /// Upper endpoint of each window, log2 luminance, increasing.
    pub endpoints: Vec<f64>,
    /// Exposure gain per window, `2^-endpoint`.
    pub exposures: Vec<f64>,
    pub width: usize,
    pub height: usize,
}

/// Number of windows needed for a range of `stops`.
pub fn window_count(stops: f64) -> usize {
    let k = (stops / WINDOW_SPACING - COUNT_SLACK).ceil();
    if k.is_finite() && k >= 1.0 {
        k as usize
    } else {
        1
    }
}

impl WindowPlan {
    /// Windows anchored at `l0`, enough of them to reach `l1`.
    pub fn from_range(dims: (usize, usize), l0: f64, l1: f64) -> Result<Self> {
        if !(l0.is_finite() && l1.is_finite() && l1 >= l0) {
            return Err(Error::invalid(format!("bad scene range [{l0}, {l1}]")));
        }
        let count = window_count(l1 - l0);
        let endpoints: Vec<f64> = (1..=count)
            .map(|k| l0 + WINDOW_SPACING * k as f64)
            .collect();
        Ok(Self::with_endpoints(dims, l0, l1, endpoints))
    }

    /// A single window whose endpoint is `endpoint`.
    pub fn single(dims: (usize, usize), endpoint: f64) -> Self {
        Self::with_endpoints(dims, endpoint - WINDOW_SPACING, endpoint, vec![endpoint])
    }

    fn with_endpoints(dims: (usize, usize), l0: f64, l1: f64, endpoints: Vec<f64>) -> Self {
        let exposures = endpoints.iter().map(|&l| (-l).exp2()).collect();
        Self {
            l0,
            l1,
            endpoints,
            exposures,
            width: dims.0,
            height: dims.1,
        }
    }

    pub fn count(&self) -> usize {
        self.endpoints.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// Linear-interpolated percentile of an ascending slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * t
}

/// Robust log2 luminance range `(l0, l1)` of a scene, using the per-pixel
/// channel maximum as luminance.
pub fn scene_range(h: &HdrImage) -> Result<(f64, f64)> {
    let mut logs: Vec<f64> = h
        .pixels()
        .iter()
        .map(|p| p[0].max(p[1]).max(p[2]))
        .filter(|&l| l > 0.0)
        .map(|l| l.max(LUMINANCE_FLOOR).log2())
        .collect();
    if logs.is_empty() {
        return Err(Error::DegenerateInput("image has no positive luminance".into()));
    }
    logs.sort_by(f64::total_cmp);
    Ok((
        percentile(&logs, RANGE_PERCENTILES.0),
        percentile(&logs, RANGE_PERCENTILES.1),
    ))
}

/// Places exposure windows over the luminance range of `h`.
pub fn plan_windows(h: &HdrImage, model: &DisplayModel) -> Result<WindowPlan> {
    model.validate()?;
    let (l0, l1) = scene_range(h)?;
    WindowPlan::from_range(h.dims(), l0, l1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Exposure {
    /// Gain applied to radiance before the display model.
    pub gain: f64,
    pub image: LdrImage,
}

/// LDR renderings of one HDR image, one per window, in window order.
#[derive(Clone, Debug, PartialEq)]
pub struct ExposureStack {
    pub exposures: Vec<Exposure>,
    pub endpoints: Vec<f64>,
}

impl ExposureStack {
    pub fn len(&self) -> usize {
        self.exposures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exposures.is_empty()
    }

    pub fn images(&self) -> impl Iterator<Item = &LdrImage> {
        self.exposures.iter().map(|e| &e.image)
    }
}

/// Renders `h` at the given gains.
pub fn decompose_at(h: &HdrImage, gains: &[f64], model: &DisplayModel) -> Result<ExposureStack> {
    let exposures = gains
        .par_iter()
        .map(|&gain| {
            Ok(Exposure {
                gain,
                image: inverse_display(h, gain, model)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExposureStack {
        exposures,
        endpoints: gains.iter().map(|g| -g.log2()).collect(),
    })
}

/// Renders `h` at every exposure in `plan`.
pub fn decompose(h: &HdrImage, plan: &WindowPlan, model: &DisplayModel) -> Result<ExposureStack> {
    if h.dims() != plan.dims() {
        return Err(Error::DimensionMismatch {
            left: h.dims(),
            right: plan.dims(),
        });
    }
    let mut stack = decompose_at(h, &plan.exposures, model)?;
    stack.endpoints = plan.endpoints.clone();
    Ok(stack)
}
