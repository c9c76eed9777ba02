use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::RoadTypeLabel;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RaterLabel {
    Intersection,
    NonIntersection,
    Indeterminate,
    Missing,
}

impl RaterLabel {
    /// Labels that count as a rating.
    pub const RATED: [RaterLabel; 3] = [RaterLabel::Intersection, RaterLabel::NonIntersection, RaterLabel::Indeterminate];

    pub fn category(self) -> Option<usize> {
        match self {
            RaterLabel::Intersection => Some(0),
            RaterLabel::NonIntersection => Some(1),
            RaterLabel::Indeterminate => Some(2),
            RaterLabel::Missing => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RaterLabel::Intersection => "Intersection",
            RaterLabel::NonIntersection => "NonIntersection",
            RaterLabel::Indeterminate => "Indeterminate",
            RaterLabel::Missing => "Missing",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm: String = s.trim().chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match norm.as_str() {
            "intersection" | "i" | "int" => Ok(RaterLabel::Intersection),
            "nonintersection" | "ni" => Ok(RaterLabel::NonIntersection),
            "indeterminate" | "unknown" | "u" => Ok(RaterLabel::Indeterminate),
            "missing" | "" => Ok(RaterLabel::Missing),
            _ => Err(Error::InvalidLabel(s.to_string())),
        }
    }
}

impl From<RoadTypeLabel> for RaterLabel {
    fn from(l: RoadTypeLabel) -> Self {
        match l {
            RoadTypeLabel::Intersection => RaterLabel::Intersection,
            RoadTypeLabel::NonIntersection => RaterLabel::NonIntersection,
        }
    }
}

/// One line of a ratings file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRow {
    #[serde(rename = "CRASH_KEY")]
    pub crash_key: String,
    #[serde(rename = "RATER")]
    pub rater: String,
    #[serde(rename = "LABEL")]
    pub label: RaterLabel,
}

/// Items × raters; absent ratings are `Missing` cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingMatrix {
    pub items: Vec<String>,
    pub raters: Vec<String>,
    /// `cells[item][rater]`.
    pub cells: Vec<Vec<RaterLabel>>,
}

impl RatingMatrix {
    pub fn new(items: Vec<String>, raters: Vec<String>, cells: Vec<Vec<RaterLabel>>) -> Result<Self> {
        if cells.len() != items.len() || cells.iter().any(|r| r.len() != raters.len()) {
            return Err(Error::Format("rating matrix is not rectangular".into()));
        }
        let mut seen = BTreeSet::new();
        if let Some(d) = raters.iter().find(|r| !seen.insert(r.as_str())) {
            return Err(Error::DuplicateKey(format!("rater {d}")));
        }
        let mut seen = BTreeSet::new();
        if let Some(d) = items.iter().find(|r| !seen.insert(r.as_str())) {
            return Err(Error::DuplicateKey(d.clone()));
        }
        Ok(Self { items, raters, cells })
    }

    /// Items sorted by key, raters in first-appearance order. A repeated
    /// `(item, rater)` pair is an error.
    pub fn from_rows(rows: &[RatingRow]) -> Result<Self> {
        let mut raters: Vec<String> = Vec::new();
        let mut table: BTreeMap<&str, BTreeMap<&str, RaterLabel>> = BTreeMap::new();
        for r in rows {
            if !raters.contains(&r.rater) {
                raters.push(r.rater.clone());
            }
            if table.entry(&r.crash_key).or_default().insert(&r.rater, r.label).is_some() {
                return Err(Error::DuplicateKey(format!("{} rated twice by {}", r.crash_key, r.rater)));
            }
        }
        let items: Vec<String> = table.keys().map(|k| k.to_string()).collect();
        let cells = table
            .values()
            .map(|row| raters.iter().map(|r| row.get(r.as_str()).copied().unwrap_or(RaterLabel::Missing)).collect())
            .collect();
        Self::new(items, raters, cells)
    }

    pub fn rater_index(&self, rater: &str) -> Result<usize> {
        self.raters.iter().position(|r| r == rater).ok_or_else(|| Error::NotFound(format!("rater {rater}")))
    }

    /// Adds a rater column; items it rates that the matrix lacks are appended.
    pub fn add_rater(&mut self, rater: &str, labels: &BTreeMap<String, RaterLabel>) -> Result<()> {
        if self.raters.iter().any(|r| r == rater) {
            return Err(Error::DuplicateKey(format!("rater {rater}")));
        }
        self.raters.push(rater.to_string());
        for row in &mut self.cells {
            row.push(RaterLabel::Missing);
        }
        let mut pos: BTreeMap<String, usize> = self.items.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let width = self.raters.len();
        for (k, l) in labels {
            let i = *pos.entry(k.clone()).or_insert_with(|| {
                self.items.push(k.clone());
                self.cells.push(vec![RaterLabel::Missing; width]);
                self.items.len() - 1
            });
            self.cells[i][width - 1] = *l;
        }
        Ok(())
    }

    /// Restricts rows to `keep` (in that order); unknown keys become all-Missing rows.
    pub fn restrict(&self, keep: &[String]) -> Self {
        let pos: BTreeMap<&str, usize> = self.items.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
        let cells = keep
            .iter()
            .map(|k| match pos.get(k.as_str()) {
                Some(&i) => self.cells[i].clone(),
                None => vec![RaterLabel::Missing; self.raters.len()],
            })
            .collect();
        Self { items: keep.to_vec(), raters: self.raters.clone(), cells }
    }

    pub fn rows(&self) -> Vec<RatingRow> {
        let mut out = Vec::new();
        for (k, row) in self.items.iter().zip(&self.cells) {
            for (r, l) in self.raters.iter().zip(row) {
                if *l != RaterLabel::Missing {
                    out.push(RatingRow { crash_key: k.clone(), rater: r.clone(), label: *l });
                }
            }
        }
        out
    }
}

/// Reads `CRASH_KEY,RATER,LABEL` rows.
pub fn read_ratings<R: Read>(reader: R) -> Result<Vec<RatingRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |j: usize| rec.get(j).map(str::trim).unwrap_or_default();
        if field(0).is_empty() || field(1).is_empty() {
            return Err(Error::Parse { line, message: "empty CRASH_KEY or RATER".into() });
        }
        let label = RaterLabel::parse(field(2)).map_err(|_| Error::Parse { line, message: format!("bad label {:?}", field(2)) })?;
        out.push(RatingRow { crash_key: field(0).to_string(), rater: field(1).to_string(), label });
    }
    Ok(out)
}

pub fn write_ratings<W: Write>(writer: W, rows: &[RatingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["CRASH_KEY", "RATER", "LABEL"])?;
    for r in rows {
        w.write_record([r.crash_key.as_str(), r.rater.as_str(), r.label.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
