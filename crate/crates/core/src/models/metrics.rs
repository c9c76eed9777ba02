use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PredictionSet;
use crate::corpus::RoadTypeLabel;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    ClassMetrics { precision, recall, f1, support: tp + fn_ }
}

/// Confusion counts take Intersection as the positive class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub n: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub intersection: ClassMetrics,
    pub non_intersection: ClassMetrics,
    pub macro_f1: f64,
    /// Rank-statistic AUC; absent when only one class is present.
    pub auc: Option<f64>,
}

impl EvalMetrics {
    pub fn from_pairs(pairs: &[(RoadTypeLabel, RoadTypeLabel, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::NoOverlap);
        }
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for (pred, truth, _) in pairs {
            match (pred.is_intersection(), truth.is_intersection()) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        let n = pairs.len();
        let intersection = class_metrics(tp, fp, fn_);
        let non_intersection = class_metrics(tn, fn_, fp);
        let scores: Vec<(f64, bool)> = pairs.iter().map(|(_, t, p)| (*p, t.is_intersection())).collect();
        Ok(Self {
            n,
            tp,
            fp,
            fn_,
            tn,
            accuracy: (tp + tn) as f64 / n as f64,
            intersection,
            non_intersection,
            macro_f1: (intersection.f1 + non_intersection.f1) / 2.0,
            auc: auc(&scores),
        })
    }
}

/// Mann-Whitney AUC with midranks for ties.
pub fn auc(scores: &[(f64, bool)]) -> Option<f64> {
    let n_pos = scores.iter().filter(|s| s.1).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += sorted[i..=j].iter().filter(|s| s.1).count() as f64 * mid;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Metrics over the keys present in both maps.
pub fn evaluate(predictions: &PredictionSet, truth: &BTreeMap<String, RoadTypeLabel>) -> Result<EvalMetrics> {
    let pairs: Vec<_> = predictions
        .entries
        .iter()
        .filter_map(|(k, p)| truth.get(k).map(|t| (p.label, *t, p.probability)))
        .collect();
    EvalMetrics::from_pairs(&pairs)
}

/// Records whose predicted label differs from the coded label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub model: String,
    pub n: usize,
    pub flagged: Vec<String>,
    pub count: usize,
    pub rate: f64,
}

pub fn audit(predictions: &PredictionSet, coded: &BTreeMap<String, RoadTypeLabel>) -> Result<AuditResult> {
    let mut n = 0;
    let mut flagged = Vec::new();
    for (k, p) in &predictions.entries {
        if let Some(c) = coded.get(k) {
            n += 1;
            if p.label != *c {
                flagged.push(k.clone());
            }
        }
    }
    if n == 0 {
        return Err(Error::NoOverlap);
    }
    let count = flagged.len();
    Ok(AuditResult { model: predictions.model.clone(), n, flagged, count, rate: count as f64 / n as f64 })
}
