use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::RoadTypeLabel;
use crate::error::{Error, Result};
use crate::models::{auc, PredictionSet};

pub const MIN_RESAMPLES: usize = 100;
/// Draws allowed per resample before giving up on an undefined metric.
pub const MAX_REDRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1,
    Accuracy,
    Precision,
    Recall,
    Auc,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::F1, Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::Auc];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::F1 => "f1",
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Auc => "auc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }

    /// Intersection is the positive class. `None` when the metric is
    /// undefined on this sample.
    fn eval(self, rows: &[(bool, bool, f64)]) -> Option<f64> {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for &(pred, truth, _) in rows {
            match (pred, truth) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        match self {
            Metric::Accuracy => ratio(rows.iter().filter(|r| r.0 == r.1).count(), rows.len()),
            Metric::Precision => ratio(tp, tp + fp),
            Metric::Recall => ratio(tp, tp + fn_),
            Metric::F1 => ratio(2 * tp, 2 * tp + fp + fn_),
            Metric::Auc => auc(&rows.iter().map(|r| (r.2, r.1)).collect::<Vec<_>>()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub model_a: String,
    pub model_b: String,
    pub metric: Metric,
    pub n: usize,
    pub resamples: usize,
    /// Draws discarded because the metric was undefined for either model.
    pub redrawn: usize,
    pub metric_a: f64,
    pub metric_b: f64,
    /// Mean of `metric_a − metric_b` over resamples.
    pub mean_diff: f64,
    pub t: f64,
    pub df: usize,
    pub p_value: f64,
    pub ci95: (f64, f64),
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Paired t test on bootstrap metric differences. Resample `i` draws from
/// its own generator seeded with `seed + i`, so results do not depend on
/// thread scheduling.
pub fn bootstrap_paired_ttest(
    a: &PredictionSet,
    b: &PredictionSet,
    truth: &BTreeMap<String, RoadTypeLabel>,
    metric: Metric,
    resamples: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::Config(format!("at least {MIN_RESAMPLES} resamples required, got {resamples}")));
    }
    let mut ra = Vec::new();
    let mut rb = Vec::new();
    for (k, pa) in &a.entries {
        if let (Some(pb), Some(t)) = (b.entries.get(k), truth.get(k)) {
            let t = t.is_intersection();
            ra.push((pa.label.is_intersection(), t, pa.probability));
            rb.push((pb.label.is_intersection(), t, pb.probability));
        }
    }
    let n = ra.len();
    if n == 0 {
        return Err(Error::NoOverlap);
    }
    let undefined = || Error::Config(format!("{} is undefined on these predictions", metric.as_str()));
    let metric_a = metric.eval(&ra).ok_or_else(undefined)?;
    let metric_b = metric.eval(&rb).ok_or_else(undefined)?;

    let draws: Vec<(f64, usize)> = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let mut sa = Vec::with_capacity(n);
            let mut sb = Vec::with_capacity(n);
            for redraws in 0..MAX_REDRAWS {
                sa.clear();
                sb.clear();
                for _ in 0..n {
                    let j = rng.random_range(0..n);
                    sa.push(ra[j]);
                    sb.push(rb[j]);
                }
                if let (Some(x), Some(y)) = (metric.eval(&sa), metric.eval(&sb)) {
                    return Ok((x - y, redraws));
                }
            }
            Err(undefined())
        })
        .collect::<Result<_>>()?;

    let diffs: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let redrawn = draws.iter().map(|d| d.1).sum();
    let r = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / r;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let df = resamples - 1;
    let (t, p_value) = if var <= 1e-24 {
        // zero variance: equal models give p = 1, a constant gap p = 0
        if mean.abs() < 1e-12 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (var / r).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid t distribution");
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    let mut sorted = diffs;
    sorted.sort_by(f64::total_cmp);
    Ok(BootstrapResult {
        model_a: a.model.clone(),
        model_b: b.model.clone(),
        metric,
        n,
        resamples,
        redrawn,
        metric_a,
        metric_b,
        mean_diff: mean,
        t,
        df,
        p_value,
        ci95: (percentile(&sorted, 0.025), percentile(&sorted, 0.975)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Prediction;
    use rand::Rng;

    fn sets(n: usize) -> (PredictionSet, PredictionSet, BTreeMap<String, RoadTypeLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut truth = BTreeMap::new();
        let mut perfect = PredictionSet::new("perfect");
        let mut coin = PredictionSet::new("coin");
        for i in 0..n {
            let k = format!("K{i:04}");
            let t = RoadTypeLabel::from_bool(rng.random_bool(0.5));
            truth.insert(k.clone(), t);
            perfect.entries.insert(k.clone(), Prediction { label: t, probability: if t.is_intersection() { 0.95 } else { 0.05 } });
            let p: f64 = rng.random();
            coin.entries.insert(k, Prediction { label: RoadTypeLabel::from_bool(p > 0.5), probability: p });
        }
        (perfect, coin, truth)
    }

    #[test]
    fn identical_models_zero_variance() {
        let (a, _, truth) = sets(200);
        for m in Metric::ALL {
            let r = bootstrap_paired_ttest(&a, &a, &truth, m, 200, 1).unwrap();
            assert_eq!((r.mean_diff, r.p_value, r.t), (0.0, 1.0, 0.0), "{m:?}");
        }
    }

    #[test]
    fn perfect_beats_coin_and_is_deterministic() {
        let (a, b, truth) = sets(500);
        let r = bootstrap_paired_ttest(&a, &b, &truth, Metric::F1, 1000, 42).unwrap();
        assert!(r.p_value < 0.001 && r.mean_diff > 0.3);
        assert!(r.ci95.0 <= r.mean_diff && r.mean_diff <= r.ci95.1);
        assert_eq!(r, bootstrap_paired_ttest(&a, &b, &truth, Metric::F1, 1000, 42).unwrap());
    }

    #[test]
    fn undefined_metric_redrawn() {
        // one positive in 30 items: many resamples lack a positive for AUC
        let mut truth = BTreeMap::new();
        let mut a = PredictionSet::new("a");
        for i in 0..30 {
            let k = format!("K{i:02}");
            let t = RoadTypeLabel::from_bool(i == 0);
            truth.insert(k.clone(), t);
            a.entries.insert(k, Prediction { label: t, probability: i as f64 / 30.0 });
        }
        let r = bootstrap_paired_ttest(&a, &a, &truth, Metric::Auc, 200, 5).unwrap();
        assert!(r.redrawn > 0);
        assert!(bootstrap_paired_ttest(&a, &a, &truth, Metric::Auc, 99, 5).is_err());
    }
}
