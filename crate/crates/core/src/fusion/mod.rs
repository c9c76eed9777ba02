//! Combining structured crash fields with narrative features.

mod geo;
mod structured;

use serde::{Deserialize, Serialize};

use crate::corpus::StructuredFields;
use crate::error::{Error, Result};
use crate::textpipe::FeatureVector;

pub use geo::{haversine_m, nearest_node_distance, offset_point, read_nodes, write_nodes, IntersectionNode, EARTH_RADIUS_M};
pub use structured::{
    distance_to_node, structured_features, StructuredBlock, StructuredEncoder, StructuredToggles, DEFAULT_MANEUVERS,
    DEFAULT_ROAD_CLASSES,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    #[default]
    None,
    Early,
    Late,
    Hybrid,
}

impl FusionMode {
    pub const ALL: [FusionMode; 4] = [FusionMode::None, FusionMode::Early, FusionMode::Late, FusionMode::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::None => "none",
            FusionMode::Early => "early",
            FusionMode::Late => "late",
            FusionMode::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "" => Ok(FusionMode::None),
            "early" => Ok(FusionMode::Early),
            "late" => Ok(FusionMode::Late),
            "hybrid" => Ok(FusionMode::Hybrid),
            other => Err(Error::Config(format!("unknown fusion mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub mode: FusionMode,
    /// Text-model weight for late fusion; chosen on a validation split when unset.
    pub late_weight: Option<f64>,
    /// Multiplier on the structured block in early fusion.
    pub structured_weight: f64,
    /// Hybrid: scale on intersection-indicator terms when a TCD is recorded.
    pub tcd_factor: f64,
    /// Hybrid: below this node distance proximity down-weighting is skipped.
    pub distance_threshold_m: f64,
    pub encoder: StructuredEncoder,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            mode: FusionMode::None,
            late_weight: None,
            structured_weight: 1.0,
            tcd_factor: 1.5,
            distance_threshold_m: 30.0,
            encoder: StructuredEncoder::default(),
        }
    }
}

impl FusionConfig {
    pub fn with_mode(mode: FusionMode) -> Self {
        Self { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.late_weight {
            check_weight(w)?;
        }
        if !(self.structured_weight.is_finite() && self.structured_weight > 0.0) {
            return Err(Error::Config(format!("structured_weight must be positive, got {}", self.structured_weight)));
        }
        if !(self.tcd_factor.is_finite() && self.tcd_factor > 0.0) {
            return Err(Error::Config(format!("tcd_factor must be positive, got {}", self.tcd_factor)));
        }
        if !(self.distance_threshold_m >= 0.0) {
            return Err(Error::Config("distance_threshold_m must be non-negative".into()));
        }
        if !(self.encoder.distance_cap_m > 0.0) {
            return Err(Error::Config("distance_cap_m must be positive".into()));
        }
        Ok(())
    }
}

fn check_weight(w: f64) -> Result<()> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::Config(format!("late-fusion weight {w} outside [0, 1]")))
    }
}

/// Appends the structured block after the text dimensions and re-normalizes.
/// A block with no nonzero entries leaves the text values untouched.
pub fn fuse_early(text: FeatureVector, block: &StructuredBlock, weight: f64, space: u64) -> FeatureVector {
    let pairs: Vec<(usize, f64)> = block.sparse().into_iter().map(|(i, v)| (i, v * weight)).collect();
    let touched = !pairs.is_empty();
    let fused = text.concat(&pairs, block.len(), space);
    if touched {
        fused.normalized()
    } else {
        fused
    }
}

/// `w * p_text + (1 - w) * p_structured`.
pub fn fuse_late(p_text: f64, p_structured: f64, w: f64) -> Result<f64> {
    check_weight(w)?;
    Ok(w * p_text + (1.0 - w) * p_structured)
}

/// Late-fusion grid searched when no weight is configured.
pub const LATE_WEIGHT_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// How structured evidence adjusts narrative preprocessing under hybrid fusion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridModulation {
    /// Multiplier on intersection-indicator term frequencies.
    pub intersection_scale: f64,
    /// The record sits at a node, so proximity cues do not down-weight.
    pub suppress_proximity: bool,
}

impl HybridModulation {
    pub const NEUTRAL: HybridModulation = HybridModulation { intersection_scale: 1.0, suppress_proximity: false };

    pub fn from_fields(fields: Option<&StructuredFields>, nodes: Option<&[IntersectionNode]>, cfg: &FusionConfig) -> Self {
        let Some(f) = fields else { return Self::NEUTRAL };
        let intersection_scale = if f.tcd_present == Some(true) { cfg.tcd_factor } else { 1.0 };
        let suppress_proximity = distance_to_node(f, nodes).is_some_and(|d| d < cfg.distance_threshold_m);
        Self { intersection_scale, suppress_proximity }
    }
}
