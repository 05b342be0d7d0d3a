//! Scoring pipeline and luminance-shift compensation.
//!
//! The reference is decomposed into an exposure stack; the test image is
//! rendered either at the same gains or, in `optimize` mode, at a gain chosen
//! per window to maximize that window's pooled score. Because the pooling
//! weights depend on the reference alone, the windows are independent 1-D
//! problems.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::display::{decompose, forward_display, inverse_display, plan_windows, DisplayModel, WindowPlan};
use crate::error::{Error, Result};
use crate::imageio::{HdrImage, LdrImage};
use crate::metrics::BaseMetric;
use crate::optim::{maximize_around, LineSearch};
use crate::pooling::{aggregate, pool_exposure, well_exposedness_cropped, AggregationConfig};

/// Samples scanned across the search interval before golden-section refinement.
pub const PRESCAN_POINTS: usize = 33;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompensationMode {
    /// Test exposures equal reference exposures.
    #[default]
    None,
    /// Test exposures maximize each window's score.
    Optimize,
    /// Same gains as `None`; intended for use of the score as a training loss.
    Paired,
}

impl fmt::Display for CompensationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompensationMode::None => "none",
            CompensationMode::Optimize => "optimize",
            CompensationMode::Paired => "paired",
        })
    }
}

impl FromStr for CompensationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CompensationMode::None),
            "optimize" => Ok(CompensationMode::Optimize),
            "paired" => Ok(CompensationMode::Paired),
            other => Err(Error::invalid(format!("unknown compensation mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompensationConfig {
    pub mode: CompensationMode,
    /// Half-width of the search interval around each reference exposure, stops.
    pub search_halfwidth: f64,
    /// Final bracket width, stops.
    pub tolerance: f64,
    pub max_evals: usize,
}

impl Default for CompensationConfig {
    fn default() -> Self {
        Self {
            mode: CompensationMode::None,
            search_halfwidth: 4.0,
            tolerance: 1e-4,
            max_evals: 200,
        }
    }
}

impl CompensationConfig {
    pub fn optimize() -> Self {
        Self {
            mode: CompensationMode::Optimize,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.search_halfwidth.is_finite() && self.search_halfwidth > 0.0) {
            return Err(Error::invalid(format!(
                "search half-width must be positive, got {}",
                self.search_halfwidth
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_evals < 3 {
            return Err(Error::invalid(format!("max_evals must be at least 3, got {}", self.max_evals)));
        }
        Ok(())
    }

    fn line_search(&self) -> LineSearch {
        LineSearch {
            half_width: self.search_halfwidth,
            tolerance: self.tolerance,
            max_evals: self.max_evals,
            prescan: PRESCAN_POINTS,
        }
    }
}

/// Pooled score of one window with the test image rendered at `gain`.
pub fn window_score(
    ref_ldr: &LdrImage,
    test_hdr: &HdrImage,
    gain: f64,
    weights: &[f64],
    metric: &BaseMetric,
    model: &DisplayModel,
) -> Result<f64> {
    let test_ldr = inverse_display(test_hdr, gain, model)?;
    let map = metric.local_map(ref_ldr, &test_ldr)?;
    pool_exposure(&map, weights)
}

/// Outcome of one window's exposure search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowFit {
    pub v_hat: f64,
    /// Pooled score at `v_hat`.
    pub score: f64,
    /// Pooled score at the reference gain.
    pub score_at_v: f64,
    pub evaluations: usize,
}

/// Searches `log2(v) ± search_halfwidth` for the test gain that maximizes the
/// window's pooled score. The reference gain is always evaluated, so the
/// result is never worse than it.
pub fn compensate_window(
    ref_ldr: &LdrImage,
    test_hdr: &HdrImage,
    v: f64,
    weights: &[f64],
    metric: &BaseMetric,
    model: &DisplayModel,
    config: &CompensationConfig,
) -> Result<WindowFit> {
    config.validate()?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!("exposure must be positive, got {v}")));
    }
    let center = v.log2();
    let objective = |x: f64| window_score(ref_ldr, test_hdr, x.exp2(), weights, metric, model);
    let best = maximize_around(objective, center, &config.line_search())?;
    // the center is evaluated at exactly v rather than 2^log2(v)
    let score_at_v = window_score(ref_ldr, test_hdr, v, weights, metric, model)?;
    let (v_hat, score) = if best.x == center || best.value <= score_at_v {
        (v, score_at_v)
    } else {
        (best.x.exp2(), best.value)
    };
    Ok(WindowFit {
        v_hat,
        score,
        score_at_v,
        evaluations: best.evaluations + 1,
    })
}

/// Per-window entry of a [`QualityReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    /// 1-based window index.
    pub k: usize,
    /// Window endpoint, log2 luminance.
    pub endpoint: f64,
    pub v: f64,
    pub v_hat: f64,
    /// Pooled score at `v_hat`.
    #[serde(rename = "Q_k")]
    pub q: f64,
    /// Pooled score at `v_hat` converted to the metric's reporting scale.
    #[serde(rename = "Q_k_final")]
    pub q_final: f64,
    /// `Q_k(v_hat) - Q_k(v)`.
    pub gain: f64,
    pub global_weight: f64,
    pub evaluations: usize,
}

/// Scores and diagnostics for one image pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub metric: BaseMetric,
    pub mode: CompensationMode,
    /// Final score: `Q` for `none`/`paired`, `Q*` for `optimize`.
    #[serde(rename = "Q")]
    pub score: f64,
    /// Aggregated pooled score before conversion to the reporting scale.
    pub pooled: f64,
    pub l0: f64,
    pub l1: f64,
    pub per_window: Vec<WindowReport>,
    pub evaluations: usize,
}

impl QualityReport {
    pub fn exposures(&self) -> Vec<f64> {
        self.per_window.iter().map(|w| w.v).collect()
    }

    pub fn optimized_exposures(&self) -> Vec<f64> {
        self.per_window.iter().map(|w| w.v_hat).collect()
    }
}

fn check_pair(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { left: a, right: b });
    }
    Ok(())
}

/// Runs the pipeline for a fixed window plan.
pub fn score_with_plan(
    reference: &HdrImage,
    test: &HdrImage,
    plan: &WindowPlan,
    metric: &BaseMetric,
    model: &DisplayModel,
    comp: &CompensationConfig,
    agg: &AggregationConfig,
) -> Result<QualityReport> {
    check_pair(reference.dims(), test.dims())?;
    metric.check_supported()?;
    model.validate()?;
    comp.validate()?;
    let global = agg.weights_for(plan.count())?;
    let ref_stack = decompose(reference, plan, model)?;
    let weights = well_exposedness_cropped(&ref_stack, agg.epsilon, metric.border())?;

    let fits = ref_stack
        .exposures
        .par_iter()
        .zip(weights.weights.par_iter())
        .map(|(exposure, w)| match comp.mode {
            CompensationMode::Optimize => {
                compensate_window(&exposure.image, test, exposure.gain, w, metric, model, comp)
            }
            CompensationMode::None | CompensationMode::Paired => {
                let q = window_score(&exposure.image, test, exposure.gain, w, metric, model)?;
                Ok(WindowFit {
                    v_hat: exposure.gain,
                    score: q,
                    score_at_v: q,
                    evaluations: 1,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let scores: Vec<f64> = fits.iter().map(|f| f.score).collect();
    let pooled = aggregate(&scores, &global)?;
    let per_window = fits
        .iter()
        .enumerate()
        .map(|(k, fit)| WindowReport {
            k: k + 1,
            endpoint: plan.endpoints[k],
            v: plan.exposures[k],
            v_hat: fit.v_hat,
            q: fit.score,
            q_final: metric.finalize(fit.score),
            gain: fit.score - fit.score_at_v,
            global_weight: global[k],
            evaluations: fit.evaluations,
        })
        .collect();
    Ok(QualityReport {
        metric: *metric,
        mode: comp.mode,
        score: metric.finalize(pooled),
        pooled,
        l0: plan.l0,
        l1: plan.l1,
        per_window,
        evaluations: fits.iter().map(|f| f.evaluations).sum(),
    })
}

/// Aggregated pooled score with the test image rendered at the given gains,
/// one per window of `plan`.
pub fn score_at_exposures(
    reference: &HdrImage,
    test: &HdrImage,
    plan: &WindowPlan,
    test_gains: &[f64],
    metric: &BaseMetric,
    model: &DisplayModel,
    agg: &AggregationConfig,
) -> Result<f64> {
    check_pair(reference.dims(), test.dims())?;
    if test_gains.len() != plan.count() {
        return Err(Error::invalid(format!(
            "{} test gains for {} windows",
            test_gains.len(),
            plan.count()
        )));
    }
    let global = agg.weights_for(plan.count())?;
    let ref_stack = decompose(reference, plan, model)?;
    let weights = well_exposedness_cropped(&ref_stack, agg.epsilon, metric.border())?;
    let scores = ref_stack
        .exposures
        .iter()
        .zip(&weights.weights)
        .zip(test_gains)
        .map(|((exposure, w), &gain)| window_score(&exposure.image, test, gain, w, metric, model))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&scores, &global)
}

/// Full-reference score of an HDR pair.
pub fn score_hdr(
    reference: &HdrImage,
    test: &HdrImage,
    metric: &BaseMetric,
    model: &DisplayModel,
    comp: &CompensationConfig,
    agg: &AggregationConfig,
) -> Result<QualityReport> {
    check_pair(reference.dims(), test.dims())?;
    let plan = plan_windows(reference, model)?;
    score_with_plan(reference, test, &plan, metric, model, comp, agg)
}

/// Scores an LDR pair by mapping both through the forward display model and
/// rendering them back with a single window at the display peak. The result
/// equals the base metric on the original pair.
pub fn score_ldr(
    reference: &LdrImage,
    test: &LdrImage,
    metric: &BaseMetric,
    model: &DisplayModel,
) -> Result<QualityReport> {
    check_pair(reference.dims(), test.dims())?;
    model.validate()?;
    let ref_hdr = forward_display(reference, model);
    let test_hdr = forward_display(test, model);
    let plan = WindowPlan::single(reference.dims(), model.l_max.log2());
    let comp = CompensationConfig {
        mode: CompensationMode::Paired,
        ..CompensationConfig::default()
    };
    score_with_plan(
        &ref_hdr,
        &test_hdr,
        &plan,
        metric,
        model,
        &comp,
        &AggregationConfig::default(),
    )
}
