//! A fitted pipeline plus its classifier (and, under late fusion, the
//! structured side model), with artifact persistence.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CrashRecord, RoadTypeLabel};
use crate::error::{Error, Result};
use crate::fusion::{fuse_late, FusionMode, LATE_WEIGHT_GRID};
use crate::models::{
    artifact, label_for, stratified_split, train_gbdt, train_svm, ClassifierModel, EvalMetrics, GbdtConfig, ModelKind, Prediction,
    PredictionSet, SvmConfig, DECISION_THRESHOLD,
};
use crate::pipeline::{PipelineConfig, PipelineState, TextPipeline};
use crate::textpipe::FeatureVector;

/// Share of training data used to pick the late-fusion weight.
pub const LATE_VALIDATION_FRACTION: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub model: ModelKind,
    pub svm: SvmConfig,
    pub gbdt: GbdtConfig,
    pub pipeline: PipelineConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { model: ModelKind::Svm, svm: SvmConfig::default(), gbdt: GbdtConfig::default(), pipeline: PipelineConfig::default() }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        match self.model {
            ModelKind::Svm => self.svm.validate()?,
            ModelKind::Gbdt => self.gbdt.validate()?,
            ModelKind::External => return Err(Error::Config("external predictions cannot be trained".into())),
        }
        self.pipeline.validate()
    }
}

#[derive(Serialize, Deserialize)]
struct Bundle {
    pipeline: PipelineState,
    model: ClassifierModel,
    structured: Option<ClassifierModel>,
    late_weight: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainedSystem {
    pub pipeline: TextPipeline,
    pub model: ClassifierModel,
    pub structured: Option<ClassifierModel>,
    pub late_weight: Option<f64>,
}

fn labels_of(records: &[CrashRecord]) -> Result<Vec<RoadTypeLabel>> {
    records
        .iter()
        .map(|r| r.label.ok_or_else(|| Error::Config(format!("record {} has no label", r.crash_key))))
        .collect()
}

fn fit_model(kind: ModelKind, x: &[FeatureVector], y: &[RoadTypeLabel], cfg: &SystemConfig) -> Result<ClassifierModel> {
    match kind {
        ModelKind::Svm => Ok(ClassifierModel::Svm(train_svm(x, y, &cfg.svm)?)),
        ModelKind::Gbdt => Ok(ClassifierModel::Gbdt(train_gbdt(x, y, &cfg.gbdt)?)),
        ModelKind::External => Err(Error::Config("external predictions cannot be trained".into())),
    }
}

fn fit_once(records: &[CrashRecord], cfg: &SystemConfig, late_weight: Option<f64>) -> Result<TrainedSystem> {
    let y = labels_of(records)?;
    let pipeline = TextPipeline::fit(records, &cfg.pipeline)?;
    let x = pipeline.transform_all(records);
    let model = fit_model(cfg.model, &x, &y, cfg)?;
    let structured = if cfg.pipeline.fusion.mode == FusionMode::Late {
        let (sx, sy): (Vec<FeatureVector>, Vec<RoadTypeLabel>) =
            records.iter().zip(&y).filter_map(|(r, l)| pipeline.structured_vector(r).map(|v| (v, *l))).unzip();
        let both = sy.contains(&RoadTypeLabel::Intersection) && sy.contains(&RoadTypeLabel::NonIntersection);
        if both {
            Some(fit_model(cfg.model, &sx, &sy, cfg)?)
        } else {
            None
        }
    } else {
        None
    };
    Ok(TrainedSystem { pipeline, model, structured, late_weight })
}

/// Trains on labelled records. Under late fusion with no configured weight,
/// the weight maximizing macro-F1 on a stratified validation split of the
/// training data is chosen before refitting on everything.
pub fn train_system(records: &[CrashRecord], cfg: &SystemConfig) -> Result<TrainedSystem> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let fusion = &cfg.pipeline.fusion;
    if fusion.mode != FusionMode::Late {
        return fit_once(records, cfg, None);
    }
    let weight = match fusion.late_weight {
        Some(w) => w,
        None => {
            let y = labels_of(records)?;
            let (fit_idx, val_idx) = stratified_split(&y, LATE_VALIDATION_FRACTION, cfg.svm.seed ^ 0x5eed);
            let fit: Vec<CrashRecord> = fit_idx.iter().map(|&i| records[i].clone()).collect();
            let val: Vec<CrashRecord> = val_idx.iter().map(|&i| records[i].clone()).collect();
            let sys = fit_once(&fit, cfg, Some(1.0))?;
            let parts = sys.component_probabilities(&val)?;
            select_late_weight(&parts, &labels_of(&val)?)?
        }
    };
    fit_once(records, cfg, Some(weight))
}

/// First grid weight reaching the best validation macro-F1.
pub fn select_late_weight(parts: &[(f64, Option<f64>)], truth: &[RoadTypeLabel]) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, 1.0);
    for w in LATE_WEIGHT_GRID {
        let mut pairs = Vec::with_capacity(parts.len());
        for ((pt, ps), t) in parts.iter().zip(truth) {
            let p = match ps {
                Some(ps) => fuse_late(*pt, *ps, w)?,
                None => *pt,
            };
            pairs.push((label_for(p, DECISION_THRESHOLD), *t, p));
        }
        let f1 = EvalMetrics::from_pairs(&pairs)?.macro_f1;
        if f1 > best.0 {
            best = (f1, w);
        }
    }
    Ok(best.1)
}

impl TrainedSystem {
    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    /// Text-model and structured-model probabilities (the latter only under
    /// late fusion for records with structured fields).
    pub fn component_probabilities(&self, records: &[CrashRecord]) -> Result<Vec<(f64, Option<f64>)>> {
        records
            .par_iter()
            .map(|r| {
                let pt = self.model.predict(&self.pipeline.transform(r))?.probability;
                let ps = match (&self.structured, self.pipeline.structured_vector(r)) {
                    (Some(m), Some(v)) => Some(m.predict(&v)?.probability),
                    _ => None,
                };
                Ok((pt, ps))
            })
            .collect()
    }

    pub fn predict_one(&self, record: &CrashRecord) -> Result<Prediction> {
        let (pt, ps) = self.component_probabilities(std::slice::from_ref(record))?[0];
        self.combine(pt, ps)
    }

    fn combine(&self, pt: f64, ps: Option<f64>) -> Result<Prediction> {
        let probability = match (ps, self.late_weight) {
            (Some(ps), Some(w)) => fuse_late(pt, ps, w)?,
            _ => pt,
        };
        Ok(Prediction { label: label_for(probability, DECISION_THRESHOLD), probability })
    }

    /// Predictions keyed by crash key; duplicate keys are rejected.
    pub fn predict(&self, name: &str, records: &[CrashRecord]) -> Result<PredictionSet> {
        let parts = self.component_probabilities(records)?;
        let mut set = PredictionSet::new(name);
        for (r, (pt, ps)) in records.iter().zip(parts) {
            let p = self.combine(pt, ps)?;
            if set.entries.insert(r.crash_key.clone(), p).is_some() {
                return Err(Error::DuplicatePrediction { model: name.to_string(), crash_key: r.crash_key.clone() });
            }
        }
        Ok(set)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let bundle = Bundle {
            pipeline: self.pipeline.state(),
            model: self.model.clone(),
            structured: self.structured.clone(),
            late_weight: self.late_weight,
        };
        let config = serde_json::json!({
            "model": self.model.config_json(),
            "fusion": self.pipeline.config().fusion.mode,
            "late_weight": self.late_weight,
        });
        artifact::encode(self.kind().as_str(), config, self.pipeline.vocabulary().id(), self.pipeline.space(), &bundle)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, bundle): (_, Bundle) = artifact::decode(bytes)?;
        let pipeline = TextPipeline::from_state(bundle.pipeline)?;
        if artifact::hex_id(pipeline.space()) != header.feature_space {
            return Err(Error::VocabularyMismatch {
                expected: u64::from_str_radix(&header.feature_space, 16).unwrap_or_default(),
                actual: pipeline.space(),
            });
        }
        Ok(Self { pipeline, model: bundle.model, structured: bundle.structured, late_weight: bundle.late_weight })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use RoadTypeLabel::*;

    #[test]
    fn late_weight_grid_prefers_informative_side() {
        // the structured side is right on every item, the text side on half
        let truth = [Intersection, NonIntersection, Intersection, NonIntersection];
        let parts = [(0.9, Some(0.8)), (0.9, Some(0.1)), (0.2, Some(0.9)), (0.1, Some(0.2))];
        let w = select_late_weight(&parts, &truth).unwrap();
        assert!(w < 0.5, "{w}");
        let parts = [(0.9, None), (0.1, None), (0.9, None), (0.1, None)];
        assert_eq!(select_late_weight(&parts, &truth).unwrap(), 0.0);
    }

    #[test]
    fn external_kind_rejected() {
        let cfg = SystemConfig { model: ModelKind::External, ..Default::default() };
        assert!(matches!(train_system(&[CrashRecord::new("a", "x")], &cfg), Err(Error::Config(_))));
    }
}
