use serde::{Deserialize, Serialize};

use super::geo::{nearest_node_distance, IntersectionNode};
use crate::corpus::{RuralUrban, StructuredFields};

/// Which structured categories feed the fused models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuredToggles {
    pub distance: bool,
    pub road_class: bool,
    pub tcd: bool,
    pub maneuver: bool,
    pub rural_urban: bool,
}

impl Default for StructuredToggles {
    fn default() -> Self {
        Self { distance: true, road_class: true, tcd: true, maneuver: true, rural_urban: true }
    }
}

/// Dense structured block with one name per column.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredBlock {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl StructuredBlock {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Nonzero `(offset, value)` pairs.
    pub fn sparse(&self) -> Vec<(usize, f64)> {
        self.values.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect()
    }
}

pub const DEFAULT_ROAD_CLASSES: [&str; 6] = ["INTERSTATE", "US_HWY", "STATE_HWY", "COUNTY", "CITY_STREET", "LOCAL"];
pub const DEFAULT_MANEUVERS: [&str; 9] = [
    "STRAIGHT",
    "LEFT_TURN",
    "RIGHT_TURN",
    "U_TURN",
    "STOPPED",
    "CHANGING_LANES",
    "BACKING",
    "NEGOTIATING_CURVE",
    "PARKING",
];

/// Fixed column layout for structured fields. Every category carries an
/// explicit missing indicator; unseen category values land in an `OTHER` slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuredEncoder {
    pub road_classes: Vec<String>,
    pub maneuvers: Vec<String>,
    pub toggles: StructuredToggles,
    /// Distances are clamped here before scaling to unit max.
    pub distance_cap_m: f64,
}

impl Default for StructuredEncoder {
    fn default() -> Self {
        Self {
            road_classes: DEFAULT_ROAD_CLASSES.iter().map(|s| s.to_string()).collect(),
            maneuvers: DEFAULT_MANEUVERS.iter().map(|s| s.to_string()).collect(),
            toggles: StructuredToggles::default(),
            distance_cap_m: 200.0,
        }
    }
}

impl StructuredEncoder {
    pub fn names(&self) -> Vec<String> {
        let mut n = Vec::new();
        let t = self.toggles;
        if t.distance {
            n.extend(["distance_m".to_string(), "distance_missing".to_string()]);
        }
        if t.road_class {
            n.extend(self.road_classes.iter().map(|c| format!("road_class={c}")));
            n.extend(["road_class=OTHER".to_string(), "road_class_missing".to_string()]);
        }
        if t.tcd {
            n.extend(["tcd".to_string(), "tcd_missing".to_string()]);
        }
        if t.maneuver {
            n.extend(self.maneuvers.iter().map(|c| format!("maneuver={c}")));
            n.extend(["maneuver=OTHER".to_string(), "maneuver_missing".to_string()]);
        }
        if t.rural_urban {
            n.extend(["urban".to_string(), "rural_urban_missing".to_string()]);
        }
        n
    }

    pub fn dim(&self) -> usize {
        self.names().len()
    }

    /// Raw block: distance in meters, everything else 0/1.
    pub fn features(&self, fields: &StructuredFields, nodes: Option<&[IntersectionNode]>) -> StructuredBlock {
        let mut v = Vec::with_capacity(self.dim());
        let t = self.toggles;
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        if t.distance {
            match distance_to_node(fields, nodes) {
                Some(d) => v.extend([d, 0.0]),
                None => v.extend([0.0, 1.0]),
            }
        }
        if t.road_class {
            one_hot(&mut v, &self.road_classes, fields.road_class.as_deref());
        }
        if t.tcd {
            match fields.tcd_present {
                Some(b) => v.extend([flag(b), 0.0]),
                None => v.extend([0.0, 1.0]),
            }
        }
        if t.maneuver {
            one_hot(&mut v, &self.maneuvers, fields.vehicle_maneuver.as_deref());
        }
        if t.rural_urban {
            match fields.rural_urban {
                Some(r) => v.extend([flag(r == RuralUrban::Urban), 0.0]),
                None => v.extend([0.0, 1.0]),
            }
        }
        StructuredBlock { names: self.names(), values: v }
    }

    /// Block scaled to unit max per column: distances clamp at the cap and
    /// divide by it; indicator columns are already in [0, 1].
    pub fn scaled(&self, fields: &StructuredFields, nodes: Option<&[IntersectionNode]>) -> StructuredBlock {
        let mut b = self.features(fields, nodes);
        if self.toggles.distance && self.distance_cap_m > 0.0 {
            b.values[0] = b.values[0].min(self.distance_cap_m) / self.distance_cap_m;
        }
        b
    }
}

fn one_hot(v: &mut Vec<f64>, cats: &[String], value: Option<&str>) {
    let start = v.len();
    v.resize(start + cats.len() + 2, 0.0);
    match value {
        Some(s) => {
            let s = s.trim();
            let slot = cats.iter().position(|c| c.eq_ignore_ascii_case(s)).unwrap_or(cats.len());
            v[start + slot] = 1.0;
        }
        None => v[start + cats.len() + 1] = 1.0,
    }
}

/// Haversine distance to the nearest node, when both coordinates and a
/// non-empty node inventory are available.
pub fn distance_to_node(fields: &StructuredFields, nodes: Option<&[IntersectionNode]>) -> Option<f64> {
    let (lat, lon) = fields.coordinates()?;
    nearest_node_distance(lat, lon, nodes?)
}

/// Structured block under the default column layout.
pub fn structured_features(fields: &StructuredFields, nodes: Option<&[IntersectionNode]>) -> StructuredBlock {
    StructuredEncoder::default().features(fields, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{haversine_m, offset_point};

    #[test]
    fn all_missing() {
        let b = structured_features(&StructuredFields::default(), None);
        let informative: f64 = b.names.iter().zip(&b.values).filter(|(n, _)| !n.ends_with("_missing")).map(|(_, v)| v).sum();
        assert_eq!(informative, 0.0);
        for (n, v) in b.names.iter().zip(&b.values) {
            if n.ends_with("_missing") {
                assert_eq!(*v, 1.0, "{n}");
            }
        }
    }

    #[test]
    fn tcd_and_one_hot() {
        let f = StructuredFields {
            tcd_present: Some(true),
            road_class: Some("county".into()),
            vehicle_maneuver: Some("SKIDDING".into()),
            ..Default::default()
        };
        let b = structured_features(&f, None);
        assert_eq!(b.get("tcd"), Some(1.0));
        assert_eq!(b.get("tcd_missing"), Some(0.0));
        assert_eq!(b.get("road_class=COUNTY"), Some(1.0));
        assert_eq!(b.get("maneuver=OTHER"), Some(1.0));
        assert_eq!(b.get("maneuver_missing"), Some(0.0));
    }

    #[test]
    fn distance_to_fixture_node() {
        let nodes = vec![
            IntersectionNode { node_id: "a".into(), lat: 41.5, lon: -93.6 },
            IntersectionNode { node_id: "b".into(), lat: 42.0, lon: -93.0 },
        ];
        let (lat, lon) = offset_point(41.5, -93.6, 100.0, 37.0);
        let oracle = haversine_m(lat, lon, 41.5, -93.6);
        let f = StructuredFields { latitude: Some(lat), longitude: Some(lon), ..Default::default() };
        let b = structured_features(&f, Some(&nodes));
        let d = b.get("distance_m").unwrap();
        assert!((d - 100.0).abs() < 0.5 && (d - oracle).abs() < 1e-9);
        assert_eq!(b.get("distance_missing"), Some(0.0));
        // no node file: distance is missing, not zero
        let b = structured_features(&f, None);
        assert_eq!(b.get("distance_missing"), Some(1.0));
        let s = StructuredEncoder::default().scaled(&f, Some(&nodes));
        assert!((s.values[0] - d / 200.0).abs() < 1e-12);
    }

    #[test]
    fn toggles_shrink_layout() {
        let enc = StructuredEncoder {
            toggles: StructuredToggles { road_class: false, maneuver: false, ..Default::default() },
            ..Default::default()
        };
        assert_eq!(enc.dim(), 6);
        assert_eq!(enc.features(&StructuredFields::default(), None).len(), 6);
    }
}
