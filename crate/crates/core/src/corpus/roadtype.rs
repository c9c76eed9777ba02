use std::collections::HashMap;

use super::RoadTypeLabel;
use crate::error::{Error, Result};

/// Sub-levels coded as intersection crashes.
pub const INTERSECTION_SUBLEVELS: [&str; 10] = [
    "Roundabout",
    "Traffic circle",
    "Four-way intersection",
    "T-intersection",
    "Y-intersection",
    "Five points or more",
    "L-intersection",
    "Shared use path or trail",
    "Intersection with ramp",
    "Other intersection",
];

/// Non-intersection and interchange-related sub-levels; both code as non-intersection.
pub const NON_INTERSECTION_SUBLEVELS: [&str; 13] = [
    "Non-junction/no special feature",
    "Bike lanes",
    "Railroad grade crossing",
    "Driveway access (within)",
    "Alley",
    "Crossover-related",
    "Other non-intersection",
    "On-ramp merge area",
    "Off-ramp diverge area",
    "On-ramp",
    "Off-ramp",
    "Mainline between ramps",
    "Other interchange",
];

/// Level names that sometimes appear in place of a sub-level.
const LEVEL_ALIASES: [(&str, RoadTypeLabel); 3] = [
    ("Intersection", RoadTypeLabel::Intersection),
    ("Non-intersection", RoadTypeLabel::NonIntersection),
    ("Interchange-related", RoadTypeLabel::NonIntersection),
];

/// Case-, punctuation- and whitespace-insensitive key. Drops a trailing
/// "(explain in narrative)" qualifier.
fn normalize(s: &str) -> String {
    let lower = s.trim().to_lowercase();
    let lower = lower.strip_suffix("(explain in narrative)").unwrap_or(&lower).to_string();
    lower
        .replace([',', '(', ')'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Sub-level lookup table, optionally extended by manifest overrides.
#[derive(Clone, Debug)]
pub struct RoadTypeMapper {
    table: HashMap<String, RoadTypeLabel>,
}

impl Default for RoadTypeMapper {
    fn default() -> Self {
        let mut table = HashMap::new();
        for s in INTERSECTION_SUBLEVELS {
            table.insert(normalize(s), RoadTypeLabel::Intersection);
        }
        for s in NON_INTERSECTION_SUBLEVELS {
            table.insert(normalize(s), RoadTypeLabel::NonIntersection);
        }
        for (s, l) in LEVEL_ALIASES {
            table.insert(normalize(s), l);
        }
        Self { table }
    }
}

impl RoadTypeMapper {
    pub fn with_overrides<'a>(overrides: impl IntoIterator<Item = (&'a String, &'a RoadTypeLabel)>) -> Self {
        let mut m = Self::default();
        for (k, v) in overrides {
            m.table.insert(normalize(k), *v);
        }
        m
    }

    pub fn map(&self, sub_level: &str) -> Result<RoadTypeLabel> {
        self.table
            .get(&normalize(sub_level))
            .copied()
            .ok_or_else(|| Error::UnknownRoadType(sub_level.to_string()))
    }
}

/// Maps a road-type sub-level string to the binary label using the built-in table.
pub fn map_road_type(sub_level: &str) -> Result<RoadTypeLabel> {
    RoadTypeMapper::default().map(sub_level)
}
