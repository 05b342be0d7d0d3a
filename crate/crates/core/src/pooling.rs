//! Well-exposedness weighting, weighted spatial pooling and cross-exposure
//! aggregation.

use serde::{Deserialize, Serialize};

use crate::display::ExposureStack;
use crate::error::{Error, Result};
use crate::metrics::QualityMap;

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Display-encoded range counted as well exposed, inclusive.
pub const WELL_EXPOSED: (f64, f64) = (0.1, 0.9);

/// Tolerance on user-supplied global weights before renormalization.
pub const GLOBAL_WEIGHT_TOLERANCE: f64 = 1e-6;

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Per-pixel, per-exposure pooling weights.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightField {
    pub width: usize,
    pub height: usize,
    /// Pixels cropped from each side relative to the source stack.
    pub border: usize,
    pub epsilon: f64,
    pub normalized: bool,
    /// `weights[k][i]` is the weight of pixel `i` in exposure `k`.
    pub weights: Vec<Vec<f64>>,
}

impl WeightField {
    /// Unnormalized weights: 1 where the reference max-channel value lies in
    /// `[0.1, 0.9]`, `epsilon` elsewhere.
    pub fn raw(reference: &ExposureStack, epsilon: f64) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::invalid("well-exposedness needs a nonempty stack"));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let (width, height) = reference.exposures[0].image.dims();
        let weights = reference
            .images()
            .map(|img| {
                img.pixels()
                    .iter()
                    .map(|p| {
                        let l = p[0].max(p[1]).max(p[2]);
                        if (WELL_EXPOSED.0..=WELL_EXPOSED.1).contains(&l) {
                            1.0
                        } else {
                            epsilon
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            width,
            height,
            border: 0,
            epsilon,
            normalized: false,
            weights,
        })
    }

    pub fn exposures(&self) -> usize {
        self.weights.len()
    }

    /// Divides each pixel's weights by their sum across exposures.
    pub fn normalized(mut self) -> Self {
        let n = self.width * self.height;
        for i in 0..n {
            let total: f64 = compensated_sum(self.weights.iter().map(|w| w[i]));
            for w in &mut self.weights {
                w[i] /= total;
            }
        }
        self.normalized = true;
        self
    }

    /// Removes `border` further pixels from every side, renormalizing if the
    /// field was normalized.
    pub fn cropped(self, border: usize) -> Result<Self> {
        if border == 0 {
            return Ok(self);
        }
        if self.width <= 2 * border || self.height <= 2 * border {
            return Err(Error::invalid(format!(
                "cannot crop {border} pixels from a {}x{} field",
                self.width, self.height
            )));
        }
        let (w, h) = (self.width - 2 * border, self.height - 2 * border);
        let weights = self
            .weights
            .iter()
            .map(|plane| {
                (border..border + h)
                    .flat_map(|y| plane[y * self.width + border..y * self.width + border + w].iter().copied())
                    .collect()
            })
            .collect();
        let cropped = Self {
            width: w,
            height: h,
            border: self.border + border,
            epsilon: self.epsilon,
            normalized: false,
            weights,
        };
        Ok(if self.normalized { cropped.normalized() } else { cropped })
    }

    /// The weights of exposure `k` aligned to `map`'s grid.
    pub fn aligned_to(&self, k: usize, map: &QualityMap) -> Result<Vec<f64>> {
        let plane = self
            .weights
            .get(k)
            .ok_or_else(|| Error::invalid(format!("no exposure {k} in weight field")))?;
        if map.border == self.border && (map.width, map.height) == (self.width, self.height) {
            return Ok(plane.clone());
        }
        if map.border < self.border {
            return Err(Error::DimensionMismatch {
                left: (map.width, map.height),
                right: (self.width, self.height),
            });
        }
        let extra = map.border - self.border;
        if self.width < map.width + 2 * extra || self.height < map.height + 2 * extra {
            return Err(Error::DimensionMismatch {
                left: (map.width, map.height),
                right: (self.width, self.height),
            });
        }
        Ok((extra..extra + map.height)
            .flat_map(|y| plane[y * self.width + extra..y * self.width + extra + map.width].iter().copied())
            .collect())
    }
}

/// Normalized well-exposedness weights for a reference stack.
pub fn well_exposedness(reference: &ExposureStack, epsilon: f64) -> Result<WeightField> {
    Ok(WeightField::raw(reference, epsilon)?.normalized())
}

/// Normalized weights on the grid of a metric that trims `border` pixels.
pub fn well_exposedness_cropped(reference: &ExposureStack, epsilon: f64, border: usize) -> Result<WeightField> {
    Ok(WeightField::raw(reference, epsilon)?.cropped(border)?.normalized())
}

/// Weighted mean of a quality map: `sum(w * q) / sum(w)`.
pub fn pool_exposure(map: &QualityMap, weights: &[f64]) -> Result<f64> {
    if weights.len() != map.values.len() {
        return Err(Error::DimensionMismatch {
            left: (map.width, map.height),
            right: (weights.len(), 1),
        });
    }
    let den = compensated_sum(weights.iter().copied());
    if !(den > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let num = compensated_sum(map.values.iter().zip(weights).map(|(q, w)| q * w));
    Ok(num / den)
}

/// Pooling settings: the well-exposedness floor and the global per-exposure
/// weights for the final score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub epsilon: f64,
    /// `None` means uniform `1/K`.
    pub global_weights: Option<Vec<f64>>,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            global_weights: None,
        }
    }
}

impl AggregationConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    /// Validates custom weights (nonnegative, summing to 1 within 1e-6) and
    /// renormalizes them to sum to 1.
    pub fn custom(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("global weights are empty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(format!("global weights must be nonnegative: {weights:?}")));
        }
        let sum = compensated_sum(weights.iter().copied());
        if (sum - 1.0).abs() > GLOBAL_WEIGHT_TOLERANCE {
            return Err(Error::invalid(format!("global weights sum to {sum}, expected 1")));
        }
        Ok(Self {
            global_weights: Some(weights.into_iter().map(|w| w / sum).collect()),
            ..Self::default()
        })
    }

    /// Parses a comma-separated list such as `0.5,0.3,0.2`.
    pub fn parse(list: &str) -> Result<Self> {
        let weights = list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad global weight {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::custom(weights)
    }

    /// The weight vector for `count` exposures.
    pub fn weights_for(&self, count: usize) -> Result<Vec<f64>> {
        match &self.global_weights {
            None if count > 0 => Ok(vec![1.0 / count as f64; count]),
            None => Err(Error::invalid("no exposures to aggregate")),
            Some(w) if w.len() == count => Ok(w.clone()),
            Some(w) => Err(Error::invalid(format!(
                "{} global weights given for {count} exposures",
                w.len()
            ))),
        }
    }
}

/// `sum_k G_k * Q_k`.
pub fn aggregate(per_exposure: &[f64], global_weights: &[f64]) -> Result<f64> {
    if per_exposure.len() != global_weights.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} global weights",
            per_exposure.len(),
            global_weights.len()
        )));
    }
    Ok(compensated_sum(
        per_exposure.iter().zip(global_weights).map(|(q, g)| q * g),
    ))
}
