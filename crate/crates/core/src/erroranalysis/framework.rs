use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ErrorCategory, ErrorClassifier, MitigationKind, Mitigations};
use crate::corpus::CrashRecord;
use crate::error::{Error, Result};
use crate::system::{train_system, SystemConfig, TrainedSystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryDelta {
    pub category: ErrorCategory,
    pub baseline: usize,
    pub errors: usize,
    pub delta: i64,
    /// `(baseline − errors) / baseline`; absent when the baseline has none.
    pub reduction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationRow {
    pub system: String,
    pub enabled: Vec<MitigationKind>,
    pub errors: usize,
    pub error_rate: f64,
    /// `error_rate − baseline error rate`.
    pub delta: f64,
    pub reduction: Option<f64>,
    pub categories: Vec<CategoryDelta>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub model: String,
    pub n_test: usize,
    pub baseline_errors: usize,
    pub baseline_error_rate: f64,
    pub baseline_categories: BTreeMap<ErrorCategory, usize>,
    pub rows: Vec<MitigationRow>,
}

impl MitigationReport {
    pub fn row(&self, system: &str) -> Option<&MitigationRow> {
        self.rows.iter().find(|r| r.system == system)
    }
}

/// One row per mitigation system on its own, then all of them combined.
pub fn default_systems() -> Vec<(String, BTreeSet<MitigationKind>)> {
    let mut out: Vec<_> = MitigationKind::ALL.iter().map(|k| (k.as_str().to_string(), BTreeSet::from([*k]))).collect();
    out.push(("combined".to_string(), MitigationKind::ALL.into_iter().collect()));
    out
}

fn with_kinds(cfg: &SystemConfig, kinds: &BTreeSet<MitigationKind>) -> SystemConfig {
    let mut c = cfg.clone();
    c.pipeline.mitigations.enabled = kinds.clone();
    c
}

/// Error categories of `sys` on labelled `test` records, categorized with
/// the baseline's (uncanonicalized) view of each narrative.
fn categorized(sys: &TrainedSystem, test: &[CrashRecord], classifier: &ErrorClassifier, base: &TrainedSystem) -> Result<Vec<ErrorCategory>> {
    let preds = sys.predict("mitigation", test)?;
    let mut out = Vec::new();
    for r in test {
        let truth = r.label.ok_or_else(|| Error::Config(format!("record {} has no label", r.crash_key)))?;
        let pred = preds.entries[&r.crash_key].label;
        let flags = base.pipeline.flags(&r.narrative);
        if let Some(c) = classifier.categorize(&r.narrative, pred, truth, &flags) {
            out.push(c);
        }
    }
    Ok(out)
}

fn counts(errs: &[ErrorCategory]) -> BTreeMap<ErrorCategory, usize> {
    let mut m: BTreeMap<ErrorCategory, usize> = ErrorCategory::ALL.iter().map(|c| (*c, 0)).collect();
    for e in errs {
        *m.entry(*e).or_default() += 1;
    }
    m
}

fn reduction(base: f64, now: f64) -> Option<f64> {
    (base > 0.0).then(|| (base - now) / base)
}

/// Retrains with each listed set of mitigations enabled (on top of `cfg`
/// with mitigations cleared) and reports error deltas against that baseline.
pub fn integrated_framework_with(
    train: &[CrashRecord],
    test: &[CrashRecord],
    cfg: &SystemConfig,
    systems: &[(String, BTreeSet<MitigationKind>)],
) -> Result<MitigationReport> {
    if test.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let base = train_system(train, &with_kinds(cfg, &BTreeSet::new()))?;
    // pattern files are needed for categorizing even when nothing is enabled
    let patterns = Mitigations::load(&with_kinds(cfg, &MitigationKind::ALL.into_iter().collect()).pipeline.mitigations)?;
    let classifier = ErrorClassifier { lexicons: base.pipeline.lexicons(), mitigations: &patterns };
    let base_errs = categorized(&base, test, &classifier, &base)?;
    let base_counts = counts(&base_errs);
    let n = test.len() as f64;
    let base_rate = base_errs.len() as f64 / n;

    let mut rows = Vec::new();
    for (name, kinds) in systems {
        let errs = if kinds.is_empty() {
            base_errs.clone()
        } else {
            let sys = train_system(train, &with_kinds(cfg, kinds))?;
            categorized(&sys, test, &classifier, &base)?
        };
        let c = counts(&errs);
        let categories = ErrorCategory::ALL
            .iter()
            .map(|cat| {
                let (b, e) = (base_counts[cat], c[cat]);
                CategoryDelta { category: *cat, baseline: b, errors: e, delta: e as i64 - b as i64, reduction: reduction(b as f64, e as f64) }
            })
            .collect();
        let rate = errs.len() as f64 / n;
        rows.push(MitigationRow {
            system: name.clone(),
            enabled: kinds.iter().copied().collect(),
            errors: errs.len(),
            error_rate: rate,
            delta: rate - base_rate,
            reduction: reduction(base_rate, rate),
            categories,
        });
    }
    Ok(MitigationReport {
        model: cfg.model.as_str().to_string(),
        n_test: test.len(),
        baseline_errors: base_errs.len(),
        baseline_error_rate: base_rate,
        baseline_categories: base_counts,
        rows,
    })
}

pub fn integrated_framework(train: &[CrashRecord], test: &[CrashRecord], cfg: &SystemConfig) -> Result<MitigationReport> {
    integrated_framework_with(train, test, cfg, &default_systems())
}
