//! Paired classifier comparisons (McNemar, bootstrap paired t), stratified
//! McNemar, chi-square homogeneity of error distributions, Wilson intervals.

mod bootstrap;
mod contingency;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

use crate::ambiguity::AmbiguityCategory;
use crate::corpus::RoadTypeLabel;
use crate::error::{Error, Result};
use crate::models::PredictionSet;

pub use bootstrap::{bootstrap_paired_ttest, BootstrapResult, Metric, MAX_REDRAWS, MIN_RESAMPLES};
pub use contingency::{chi_square_error_dist, chi_square_homogeneity, ChiSquareResult, RESIDUAL_SCREEN};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_Z: f64 = 1.96;
/// Below this many discordant pairs McNemar uses the exact binomial test.
pub const EXACT_BELOW: u64 = 10;

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof).expect("positive degrees of freedom").sf(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    ChiSquare,
    ExactBinomial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McNemarResult {
    pub model_a: String,
    pub model_b: String,
    pub n: usize,
    /// A right, B wrong.
    pub b: u64,
    /// A wrong, B right.
    pub c: u64,
    pub chi_square: f64,
    pub p_value: f64,
    /// Cohen's g, `|b/(b+c) − 0.5|`.
    pub effect_size_g: f64,
    pub method: McNemarMethod,
    /// Set when the two models err on exactly the same items.
    pub identical_error_patterns: bool,
    /// Model with fewer errors when `p < alpha`.
    pub better: Option<String>,
}

/// McNemar from discordant counts.
pub fn mcnemar_counts(b: u64, c: u64, exact_below: u64) -> (f64, f64, f64, McNemarMethod) {
    let m = b + c;
    if m == 0 {
        return (0.0, 1.0, 0.0, McNemarMethod::ChiSquare);
    }
    let chi = (b as f64 - c as f64).powi(2) / m as f64;
    let g = (b as f64 / m as f64 - 0.5).abs();
    if m < exact_below {
        let lo = b.min(c);
        let tail = Binomial::new(0.5, m).expect("valid binomial").cdf(lo);
        (chi, (2.0 * tail).min(1.0), g, McNemarMethod::ExactBinomial)
    } else {
        (chi, chi_square_sf(chi, 1.0), g, McNemarMethod::ChiSquare)
    }
}

/// `(key, a correct, b correct)` for keys present in all three inputs.
fn aligned(a: &PredictionSet, b: &PredictionSet, truth: &BTreeMap<String, RoadTypeLabel>) -> Vec<(String, bool, bool)> {
    a.entries
        .iter()
        .filter_map(|(k, pa)| {
            let pb = b.entries.get(k)?;
            let t = truth.get(k)?;
            Some((k.clone(), pa.label == *t, pb.label == *t))
        })
        .collect()
}

fn mcnemar_rows(name_a: &str, name_b: &str, rows: &[(bool, bool)], alpha: f64, exact_below: u64) -> McNemarResult {
    let b = rows.iter().filter(|(x, y)| *x && !*y).count() as u64;
    let c = rows.iter().filter(|(x, y)| !*x && *y).count() as u64;
    let (chi_square, p_value, effect_size_g, method) = mcnemar_counts(b, c, exact_below);
    let better = (p_value < alpha && b != c).then(|| if b > c { name_a } else { name_b }.to_string());
    McNemarResult {
        model_a: name_a.to_string(),
        model_b: name_b.to_string(),
        n: rows.len(),
        b,
        c,
        chi_square,
        p_value,
        effect_size_g,
        method,
        identical_error_patterns: b + c == 0,
        better,
    }
}

pub fn mcnemar(a: &PredictionSet, b: &PredictionSet, truth: &BTreeMap<String, RoadTypeLabel>, alpha: f64) -> Result<McNemarResult> {
    let rows: Vec<(bool, bool)> = aligned(a, b, truth).into_iter().map(|(_, x, y)| (x, y)).collect();
    if rows.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(mcnemar_rows(&a.model, &b.model, &rows, alpha, EXACT_BELOW))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumResult {
    pub stratum: AmbiguityCategory,
    pub n: usize,
    /// Absent when the stratum has fewer than the minimum number of items.
    pub result: Option<McNemarResult>,
    pub insufficient_data: bool,
}

pub const MIN_STRATUM: usize = 10;

/// One McNemar test per ambiguity category, in category order. Items without
/// a stratum label are ignored.
pub fn mcnemar_stratified(
    a: &PredictionSet,
    b: &PredictionSet,
    truth: &BTreeMap<String, RoadTypeLabel>,
    strata: &BTreeMap<String, AmbiguityCategory>,
    alpha: f64,
    min_size: usize,
) -> Result<Vec<StratumResult>> {
    let rows = aligned(a, b, truth);
    if rows.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mut by: BTreeMap<AmbiguityCategory, Vec<(bool, bool)>> = BTreeMap::new();
    for (k, x, y) in rows {
        if let Some(s) = strata.get(&k) {
            by.entry(*s).or_default().push((x, y));
        }
    }
    Ok(AmbiguityCategory::ALL
        .iter()
        .map(|&s| {
            let r = by.get(&s).map(Vec::as_slice).unwrap_or_default();
            let enough = r.len() >= min_size.max(1);
            StratumResult {
                stratum: s,
                n: r.len(),
                result: enough.then(|| mcnemar_rows(&a.model, &b.model, r, alpha, EXACT_BELOW)),
                insufficient_data: !enough,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilsonInterval {
    pub successes: u64,
    pub n: u64,
    pub p_hat: f64,
    pub lower: f64,
    pub upper: f64,
    pub z: f64,
}

pub fn wilson_interval(successes: u64, n: u64, z: f64) -> Result<WilsonInterval> {
    if n == 0 {
        return Err(Error::Config("Wilson interval needs n >= 1".into()));
    }
    if successes > n {
        return Err(Error::Config(format!("{successes} successes out of {n}")));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Config(format!("z must be positive, got {z}")));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lower = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let upper = if successes == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok(WilsonInterval { successes, n, p_hat: p, lower, upper, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Prediction;

    fn set(name: &str, labels: &[RoadTypeLabel]) -> PredictionSet {
        let mut s = PredictionSet::new(name);
        for (i, l) in labels.iter().enumerate() {
            s.entries.insert(format!("K{i:03}"), Prediction { label: *l, probability: if l.is_intersection() { 0.9 } else { 0.1 } });
        }
        s
    }

    #[test]
    fn mcnemar_fixtures() {
        let (chi, p, g, m) = mcnemar_counts(10, 2, EXACT_BELOW);
        assert!((chi - 5.333333333333333).abs() < 1e-12);
        assert!((p - 0.020921335337794028).abs() < 1e-9);
        assert!((g - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(m, McNemarMethod::ChiSquare);
        let (_, p, _, m) = mcnemar_counts(3, 1, EXACT_BELOW);
        assert_eq!(m, McNemarMethod::ExactBinomial);
        assert!((p - 0.625).abs() < 1e-12);
        let (chi, p, _, _) = mcnemar_counts(7, 7, EXACT_BELOW);
        assert_eq!((chi, p), (0.0, 1.0));
        let (chi, p, _, _) = mcnemar_counts(20, 20, EXACT_BELOW);
        assert_eq!((chi, p), (0.0, 1.0));
    }

    #[test]
    fn identical_predictions_flagged() {
        use RoadTypeLabel::*;
        let truth: BTreeMap<String, RoadTypeLabel> = (0..4).map(|i| (format!("K{i:03}"), Intersection)).collect();
        let a = set("a", &[Intersection, NonIntersection, Intersection, Intersection]);
        let r = mcnemar(&a, &a, &truth, DEFAULT_ALPHA).unwrap();
        assert!(r.identical_error_patterns);
        assert_eq!((r.p_value, r.effect_size_g, r.better.clone()), (1.0, 0.0, None));
        assert!(matches!(mcnemar(&a, &set("b", &[]), &truth, DEFAULT_ALPHA), Err(Error::NoOverlap)));
    }

    #[test]
    fn stratified_partition() {
        use RoadTypeLabel::*;
        let n = 40;
        let truth: BTreeMap<String, RoadTypeLabel> = (0..n).map(|i| (format!("K{i:03}"), Intersection)).collect();
        let la: Vec<_> = (0..n).map(|i| if i % 3 == 0 { NonIntersection } else { Intersection }).collect();
        let lb: Vec<_> = (0..n).map(|i| if i % 4 == 0 { NonIntersection } else { Intersection }).collect();
        let (a, b) = (set("a", &la), set("b", &lb));
        let strata: BTreeMap<String, AmbiguityCategory> = (0..n)
            .map(|i| (format!("K{i:03}"), if i < 25 { AmbiguityCategory::Clear } else { AmbiguityCategory::Proximity }))
            .collect();
        let global = mcnemar(&a, &b, &truth, DEFAULT_ALPHA).unwrap();
        let per = mcnemar_stratified(&a, &b, &truth, &strata, DEFAULT_ALPHA, MIN_STRATUM).unwrap();
        assert_eq!(per.len(), AmbiguityCategory::ALL.len());
        let sum_b: u64 = per.iter().filter_map(|s| s.result.as_ref()).map(|r| r.b).sum();
        assert_eq!(sum_b, global.b);
        let short = per.iter().find(|s| s.stratum == AmbiguityCategory::Short).unwrap();
        assert!(short.insufficient_data && short.n == 0);
    }

    #[test]
    fn wilson_fixtures() {
        let w = wilson_interval(50, 100, DEFAULT_Z).unwrap();
        assert!((w.lower - 0.40383).abs() < 5e-5 && (w.upper - 0.59617).abs() < 5e-5);
        assert_eq!(wilson_interval(0, 10, DEFAULT_Z).unwrap().lower, 0.0);
        assert_eq!(wilson_interval(100, 100, DEFAULT_Z).unwrap().upper, 1.0);
        assert!(wilson_interval(0, 0, DEFAULT_Z).is_err());
        assert!(wilson_interval(5, 4, DEFAULT_Z).is_err());
    }
}
