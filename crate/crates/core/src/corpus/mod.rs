//! Crash record ingestion: narrative merging, road-type coding, PII scrubbing,
//! CSV joins, and the synthetic corpus generator used by tests and demos.

mod ingest;
mod manifest;
mod merge;
mod roadtype;
mod scrub;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ingest::{
    ingest_files, ingest_readers, read_dataset, write_dataset, write_exceptions, ExceptionRow,
    IngestOutput,
};
pub use manifest::{CodeLists, DatasetManifest, ScrubToggles};
pub use merge::merge_narratives;
pub use roadtype::{map_road_type, RoadTypeMapper, INTERSECTION_SUBLEVELS, NON_INTERSECTION_SUBLEVELS};
pub use scrub::{scrub_pii, ScrubCategory, ScrubReport, Scrubber};
pub use synth::{
    generate_synthetic, AmbiguityMix, SyntheticCorpus, SyntheticRecord, SyntheticSpec,
    SynthCategory,
};

/// Binary road-type coding derived from the sub-level lexicon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoadTypeLabel {
    Intersection,
    NonIntersection,
}

impl RoadTypeLabel {
    pub const ALL: [RoadTypeLabel; 2] = [RoadTypeLabel::Intersection, RoadTypeLabel::NonIntersection];

    pub fn as_str(self) -> &'static str {
        match self {
            RoadTypeLabel::Intersection => "Intersection",
            RoadTypeLabel::NonIntersection => "NonIntersection",
        }
    }

    /// +1 for intersection, -1 otherwise.
    pub fn sign(self) -> f64 {
        match self {
            RoadTypeLabel::Intersection => 1.0,
            RoadTypeLabel::NonIntersection => -1.0,
        }
    }

    pub fn is_intersection(self) -> bool {
        self == RoadTypeLabel::Intersection
    }

    pub fn flipped(self) -> Self {
        match self {
            RoadTypeLabel::Intersection => RoadTypeLabel::NonIntersection,
            RoadTypeLabel::NonIntersection => RoadTypeLabel::Intersection,
        }
    }

    pub fn from_bool(intersection: bool) -> Self {
        if intersection {
            RoadTypeLabel::Intersection
        } else {
            RoadTypeLabel::NonIntersection
        }
    }

    /// Accepts the canonical names plus common short forms (`I`, `NI`, `1`, `0`).
    pub fn parse(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "intersection" | "i" | "1" | "intersectionrelated" => Ok(RoadTypeLabel::Intersection),
            "nonintersection" | "ni" | "0" | "notintersection" => Ok(RoadTypeLabel::NonIntersection),
            _ => Err(Error::InvalidLabel(s.to_string())),
        }
    }
}

impl std::fmt::Display for RoadTypeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuralUrban {
    Rural,
    Urban,
}

impl RuralUrban {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rural" | "r" => Some(RuralUrban::Rural),
            "urban" | "u" => Some(RuralUrban::Urban),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuralUrban::Rural => "Rural",
            RuralUrban::Urban => "Urban",
        }
    }
}

/// Structured crash fields used by multi-modal fusion. Every field may be absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructuredFields {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub road_class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tcd_present: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle_maneuver: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rural_urban: Option<RuralUrban>,
}

impl StructuredFields {
    pub fn is_empty(&self) -> bool {
        self.latitude.is_none()
            && self.longitude.is_none()
            && self.road_class.is_none()
            && self.tcd_present.is_none()
            && self.vehicle_maneuver.is_none()
            && self.rural_urban.is_none()
    }

    /// Both coordinates, when present and in range.
    pub fn coordinates(&self) -> Option<(f64, f64)> {
        match (self.latitude, self.longitude) {
            (Some(lat), Some(lon)) => Some((lat, lon)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(lat) = self.latitude {
            if !(-90.0..=90.0).contains(&lat) {
                return Err(Error::Config(format!("latitude {lat} out of range")));
            }
        }
        if let Some(lon) = self.longitude {
            if !(-180.0..=180.0).contains(&lon) {
                return Err(Error::Config(format!("longitude {lon} out of range")));
            }
        }
        Ok(())
    }
}

/// One merged crash record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrashRecord {
    pub crash_key: String,
    pub narrative: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<RoadTypeLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structured: Option<StructuredFields>,
}

impl CrashRecord {
    pub fn new(crash_key: impl Into<String>, narrative: impl Into<String>) -> Self {
        Self {
            crash_key: crash_key.into(),
            narrative: narrative.into(),
            label: None,
            structured: None,
        }
    }

    pub fn with_label(mut self, label: RoadTypeLabel) -> Self {
        self.label = Some(label);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_parse_forms() {
        assert_eq!(RoadTypeLabel::parse("Intersection").unwrap(), RoadTypeLabel::Intersection);
        assert_eq!(RoadTypeLabel::parse("non-intersection").unwrap(), RoadTypeLabel::NonIntersection);
        assert_eq!(RoadTypeLabel::parse("NI").unwrap(), RoadTypeLabel::NonIntersection);
        assert!(RoadTypeLabel::parse("maybe").is_err());
    }

    #[test]
    fn coordinate_validation() {
        let mut s = StructuredFields { latitude: Some(91.0), ..Default::default() };
        assert!(s.validate().is_err());
        s.latitude = Some(42.0);
        s.longitude = Some(-93.6);
        assert!(s.validate().is_ok());
    }
}
