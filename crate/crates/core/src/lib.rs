//! Full-reference quality assessment for HDR images.
//!
//! Both images are decomposed into a stack of display-referred LDR exposures
//! by an inverse gain-offset-gamma display model. Each exposure pair is scored
//! with a base LDR metric, local scores are pooled with well-exposedness
//! weights, and the per-exposure scores are combined into one number. Test
//! exposures can optionally be re-optimized per window to cancel global
//! luminance shifts between the two images.

pub mod bench;
pub mod cli;
pub mod compensate;
pub mod display;
pub mod error;
pub mod imageio;
pub mod metrics;
pub mod optim;
pub mod pooling;

pub use compensate::{score_hdr, score_ldr, CompensationConfig, CompensationMode, QualityReport};
pub use display::{DisplayModel, ExposureStack, WindowPlan};
pub use error::{Error, Result};
pub use imageio::{HdrImage, LdrImage};
pub use metrics::{BaseMetric, QualityMap};
pub use pooling::{AggregationConfig, WeightField};
