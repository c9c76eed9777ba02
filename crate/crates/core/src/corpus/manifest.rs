use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RoadTypeLabel, ScrubCategory};
use crate::error::Result;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CodeLists {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub road_class: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vehicle_maneuver: Vec<String>,
}

/// Which PII categories the scrubber replaces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScrubToggles {
    pub email: bool,
    pub ssn: bool,
    pub phone: bool,
    pub dob: bool,
    pub plate: bool,
    pub address: bool,
    pub name: bool,
}

impl Default for ScrubToggles {
    fn default() -> Self {
        Self { email: true, ssn: true, phone: true, dob: true, plate: true, address: true, name: false }
    }
}

impl ScrubToggles {
    pub fn enabled(&self, c: ScrubCategory) -> bool {
        match c {
            ScrubCategory::Email => self.email,
            ScrubCategory::Ssn => self.ssn,
            ScrubCategory::Phone => self.phone,
            ScrubCategory::Dob => self.dob,
            ScrubCategory::Plate => self.plate,
            ScrubCategory::Address => self.address,
            ScrubCategory::Name => self.name,
        }
    }
}

/// Dataset manifest: declared code lists, road-type overrides, scrub toggles.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetManifest {
    pub code_lists: CodeLists,
    pub road_type_overrides: BTreeMap<String, RoadTypeLabel>,
    pub scrub: ScrubToggles,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
