use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionNode {
    pub node_id: String,
    pub lat: f64,
    pub lon: f64,
}

pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
}

/// Destination point `distance_m` along `bearing_deg` on the sphere.
pub fn offset_point(lat: f64, lon: f64, distance_m: f64, bearing_deg: f64) -> (f64, f64) {
    let d = distance_m / EARTH_RADIUS_M;
    let (p1, l1, th) = (lat.to_radians(), lon.to_radians(), bearing_deg.to_radians());
    let p2 = (p1.sin() * d.cos() + p1.cos() * d.sin() * th.cos()).asin();
    let l2 = l1 + (th.sin() * d.sin() * p1.cos()).atan2(d.cos() - p1.sin() * p2.sin());
    (p2.to_degrees(), l2.to_degrees())
}

/// Distance in meters to the closest node; `None` for an empty inventory.
pub fn nearest_node_distance(lat: f64, lon: f64, nodes: &[IntersectionNode]) -> Option<f64> {
    nodes.iter().map(|n| haversine_m(lat, lon, n.lat, n.lon)).min_by(|a, b| a.total_cmp(b))
}

pub fn read_nodes(path: &Path) -> Result<Vec<IntersectionNode>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse { line, message: format!("bad coordinate in column {}", j + 1) })
        };
        let (lat, lon) = (num(1)?, num(2)?);
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Parse { line, message: "coordinate out of range".into() });
        }
        out.push(IntersectionNode { node_id: rec.get(0).unwrap_or_default().to_string(), lat, lon });
    }
    Ok(out)
}

pub fn write_nodes(path: &Path, nodes: &[IntersectionNode]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["NODE_ID", "LAT", "LON"])?;
    for n in nodes {
        w.write_record([n.node_id.clone(), format!("{:.7}", n.lat), format!("{:.7}", n.lon)])?;
    }
    w.flush()?;
    Ok(())
}
