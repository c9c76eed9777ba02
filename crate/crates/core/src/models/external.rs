use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use super::{Prediction, PredictionSet};
use crate::corpus::{ExceptionRow, RoadTypeLabel};
use crate::error::{Error, Result};

/// Predictions imported from `CRASH_KEY,MODEL_NAME,LABEL,PROBABILITY`,
/// grouped by model. Keys outside `known_keys` (when given) are reported as
/// exceptions rather than loaded.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExternalPredictions {
    pub sets: BTreeMap<String, PredictionSet>,
    pub exceptions: Vec<ExceptionRow>,
}

pub fn ingest_external_predictions<R: Read>(reader: R, known_keys: Option<&BTreeSet<String>>) -> Result<ExternalPredictions> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let mut out = ExternalPredictions::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if rec.len() < 4 {
            return Err(Error::Parse { line, message: format!("expected 4 columns, found {}", rec.len()) });
        }
        let key = rec[0].trim().to_string();
        let model = rec[1].trim().to_string();
        if key.is_empty() || model.is_empty() {
            return Err(Error::Parse { line, message: "empty crash key or model name".into() });
        }
        let label = RoadTypeLabel::parse(&rec[2]).map_err(|_| Error::Parse { line, message: format!("invalid label {:?}", &rec[2]) })?;
        let probability: f64 = rec[3].trim().parse().map_err(|_| Error::Parse { line, message: format!("invalid probability {:?}", &rec[3]) })?;
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::ProbabilityRange { line, value: probability });
        }
        if known_keys.is_some_and(|k| !k.contains(&key)) {
            out.exceptions.push(ExceptionRow { crash_key: key, reason: format!("unknown crash key in predictions for model {model}") });
            continue;
        }
        let set = out.sets.entry(model.clone()).or_insert_with(|| PredictionSet::new(&model));
        if set.entries.insert(key.clone(), Prediction { label, probability }).is_some() {
            return Err(Error::DuplicatePrediction { model, crash_key: key });
        }
    }
    Ok(out)
}

pub fn ingest_external_file(path: &Path, known_keys: Option<&BTreeSet<String>>) -> Result<ExternalPredictions> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    ingest_external_predictions(std::fs::File::open(path)?, known_keys)
}

/// Writes predictions in the same four-column format.
pub fn write_predictions(path: &Path, sets: &[&PredictionSet]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["CRASH_KEY", "MODEL_NAME", "LABEL", "PROBABILITY"])?;
    for s in sets {
        for (k, p) in &s.entries {
            w.write_record([k.as_str(), s.model.as_str(), p.label.as_str(), &format!("{:.6}", p.probability)])?;
        }
    }
    w.flush()?;
    Ok(())
}
