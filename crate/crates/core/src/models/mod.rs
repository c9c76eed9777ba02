//! Classifiers (kernel SVM, boosted trees), calibration, evaluation and
//! imported predictions.

pub mod artifact;
mod calibrate;
mod external;
mod gbdt;
mod metrics;
mod split;
mod svm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use calibrate::Platt;
pub use external::{ingest_external_file, ingest_external_predictions, write_predictions, ExternalPredictions};
pub use gbdt::{train_gbdt, GbdtConfig, GbdtModel, Node, Tree};
pub use metrics::{audit, auc, evaluate, AuditResult, ClassMetrics, EvalMetrics};
pub use split::stratified_split;
pub use svm::{train_svm, KernelKind, SvmConfig, SvmModel, SvmParams};

use crate::corpus::RoadTypeLabel;
use crate::error::{Error, Result};
use crate::textpipe::FeatureVector;

/// Probability above which a record is labelled Intersection. Ties go to
/// NonIntersection.
pub const DECISION_THRESHOLD: f64 = 0.5;

pub fn label_for(probability: f64, threshold: f64) -> RoadTypeLabel {
    RoadTypeLabel::from_bool(probability > threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: RoadTypeLabel,
    pub probability: f64,
}

/// One model's predictions keyed by crash key.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model: String,
    pub entries: BTreeMap<String, Prediction>,
}

impl PredictionSet {
    pub fn new(model: &str) -> Self {
        Self { model: model.to_string(), entries: BTreeMap::new() }
    }

    pub fn labels(&self) -> BTreeMap<String, RoadTypeLabel> {
        self.entries.iter().map(|(k, p)| (k.clone(), p.label)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svm,
    Gbdt,
    External,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Gbdt => "gbdt",
            ModelKind::External => "external",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svm" => Ok(ModelKind::Svm),
            "gbdt" | "xgboost" => Ok(ModelKind::Gbdt),
            "external" => Ok(ModelKind::External),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// A trained in-crate classifier. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ClassifierModel {
    Svm(SvmModel),
    Gbdt(GbdtModel),
}

impl ClassifierModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            ClassifierModel::Svm(_) => ModelKind::Svm,
            ClassifierModel::Gbdt(_) => ModelKind::Gbdt,
        }
    }

    pub fn space(&self) -> u64 {
        match self {
            ClassifierModel::Svm(m) => m.space,
            ClassifierModel::Gbdt(m) => m.space,
        }
    }

    /// Uncalibrated score: SVM decision value or boosted log-odds.
    pub fn raw_score(&self, x: &FeatureVector) -> f64 {
        match self {
            ClassifierModel::Svm(m) => m.decision(x),
            ClassifierModel::Gbdt(m) => m.raw_score(x),
        }
    }

    pub fn probability_unchecked(&self, x: &FeatureVector) -> f64 {
        match self {
            ClassifierModel::Svm(m) => m.platt.probability(m.decision(x)),
            ClassifierModel::Gbdt(m) => m.probability(x),
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction> {
        if x.space != self.space() {
            return Err(Error::VocabularyMismatch { expected: self.space(), actual: x.space });
        }
        let probability = self.probability_unchecked(x);
        Ok(Prediction { label: label_for(probability, DECISION_THRESHOLD), probability })
    }

    pub fn config_json(&self) -> serde_json::Value {
        match self {
            ClassifierModel::Svm(m) => serde_json::to_value(&m.config),
            ClassifierModel::Gbdt(m) => serde_json::to_value(&m.config),
        }
        .expect("config serializes")
    }
}
