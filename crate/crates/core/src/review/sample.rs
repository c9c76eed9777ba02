use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ambiguity::{detect_text, AmbiguityCategory, AmbiguityLexicons};
use crate::corpus::{CrashRecord, RoadTypeLabel};
use crate::error::{Error, Result};
use crate::models::PredictionSet;

pub const DEFAULT_SAMPLE_SIZE: usize = 100;

/// A record at least one model labels differently from the coded label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolItem {
    pub crash_key: String,
    pub narrative: String,
    /// Models whose prediction differs from the coded label.
    pub disagreeing: BTreeSet<String>,
    pub category: AmbiguityCategory,
}

/// Records flagged by any model, with the ambiguity category of each narrative.
pub fn disagreement_pool(
    records: &[CrashRecord],
    predictions: &[PredictionSet],
    coded: &BTreeMap<String, RoadTypeLabel>,
    lexicons: &AmbiguityLexicons,
) -> Vec<PoolItem> {
    records
        .iter()
        .filter_map(|r| {
            let truth = coded.get(&r.crash_key)?;
            let disagreeing: BTreeSet<String> = predictions
                .iter()
                .filter(|p| p.entries.get(&r.crash_key).is_some_and(|x| x.label != *truth))
                .map(|p| p.model.clone())
                .collect();
            (!disagreeing.is_empty()).then(|| PoolItem {
                crash_key: r.crash_key.clone(),
                narrative: r.narrative.clone(),
                disagreeing,
                category: detect_text(&r.narrative, lexicons).category,
            })
        })
        .collect()
}

/// The text a rater sees.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub crash_key: String,
    pub narrative: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemStratum {
    pub crash_key: String,
    pub disagreeing: Vec<String>,
    pub category: AmbiguityCategory,
}

/// Sample manifest. Only `items` is ever served to raters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewSample {
    pub sample_id: String,
    pub seed: u64,
    pub requested: usize,
    pub items: Vec<ReviewItem>,
    pub strata: Vec<ItemStratum>,
    /// Items drawn per stratum, keyed `"model+model|category"`.
    pub allocation: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

impl ReviewSample {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, crash_key: &str) -> bool {
        self.items.iter().any(|i| i.crash_key == crash_key)
    }

    pub fn keys(&self) -> Vec<String> {
        self.items.iter().map(|i| i.crash_key.clone()).collect()
    }

    pub fn blinded(&self) -> SampleView {
        SampleView { sample_id: self.sample_id.clone(), items: self.items.clone() }
    }
}

/// Wire form of a sample: identifiers and narrative text only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleView {
    pub sample_id: String,
    pub items: Vec<ReviewItem>,
}

fn stratum_key(item: &PoolItem) -> String {
    let models: Vec<&str> = item.disagreeing.iter().map(String::as_str).collect();
    format!("{}|{}", models.join("+"), item.category.as_str())
}

/// Largest-remainder apportionment of `total` over `weights`; ties in the
/// remainder go to the earlier stratum.
pub fn largest_remainder(weights: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|&w| w as f64 * total as f64 / sum as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    let short = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Stratified sample over (disagreeing-model set × ambiguity category) with
/// proportional allocation. Item order is shuffled so strata do not cluster.
pub fn build_sample(pool: &[PoolItem], size: usize, seed: u64) -> Result<ReviewSample> {
    if pool.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut seen = BTreeSet::new();
    if let Some(d) = pool.iter().find(|p| !seen.insert(p.crash_key.as_str())) {
        return Err(Error::DuplicateKey(d.crash_key.clone()));
    }
    let mut warnings = Vec::new();
    let n = if size > pool.len() {
        warnings.push(format!("requested {size} items but the pool holds {}; using the full pool", pool.len()));
        pool.len()
    } else {
        size
    };
    let mut strata: BTreeMap<String, Vec<&PoolItem>> = BTreeMap::new();
    for p in pool {
        strata.entry(stratum_key(p)).or_default().push(p);
    }
    let weights: Vec<usize> = strata.values().map(Vec::len).collect();
    let counts = largest_remainder(&weights, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<&PoolItem> = Vec::with_capacity(n);
    let mut allocation = BTreeMap::new();
    for ((key, members), k) in strata.iter_mut().zip(counts) {
        members.sort_by(|a, b| a.crash_key.cmp(&b.crash_key));
        members.shuffle(&mut rng);
        chosen.extend(members.iter().take(k));
        allocation.insert(key.clone(), k);
    }
    chosen.shuffle(&mut rng);

    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for c in &chosen {
        h.update(c.crash_key.as_bytes());
        h.update([0]);
    }
    let digest = h.finalize();
    let sample_id = format!("s{}", digest[..6].iter().map(|b| format!("{b:02x}")).collect::<String>());
    Ok(ReviewSample {
        sample_id,
        seed,
        requested: size,
        items: chosen.iter().map(|c| ReviewItem { crash_key: c.crash_key.clone(), narrative: c.narrative.clone() }).collect(),
        strata: chosen
            .iter()
            .map(|c| ItemStratum {
                crash_key: c.crash_key.clone(),
                disagreeing: c.disagreeing.iter().cloned().collect(),
                category: c.category,
            })
            .collect(),
        allocation,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(spec: &[(&str, AmbiguityCategory, usize)]) -> Vec<PoolItem> {
        let mut out = Vec::new();
        for (model, cat, n) in spec {
            for i in 0..*n {
                out.push(PoolItem {
                    crash_key: format!("{model}-{}-{i:03}", cat.as_str()),
                    narrative: format!("narrative {i}"),
                    disagreeing: BTreeSet::from([model.to_string()]),
                    category: *cat,
                });
            }
        }
        out
    }

    #[test]
    fn proportional_strata() {
        let p = pool(&[("svm", AmbiguityCategory::Clear, 20), ("gbdt", AmbiguityCategory::Clear, 20)]);
        let s = build_sample(&p, 10, 1).unwrap();
        assert_eq!(s.allocation.values().copied().collect::<Vec<_>>(), vec![5, 5]);
        assert_eq!(s.len(), 10);
        assert_eq!(s, build_sample(&p, 10, 1).unwrap());
        assert_ne!(s.keys(), build_sample(&p, 10, 2).unwrap().keys());
    }

    #[test]
    fn oversized_request_takes_pool() {
        let p = pool(&[("svm", AmbiguityCategory::Proximity, 7), ("svm", AmbiguityCategory::Short, 3)]);
        let s = build_sample(&p, 100, 9).unwrap();
        assert_eq!(s.len(), 10);
        assert_eq!(s.warnings.len(), 1);
        let exact = build_sample(&p, 10, 9).unwrap();
        assert!(exact.warnings.is_empty());
        assert!(build_sample(&[], 5, 1).is_err());
    }

    #[test]
    fn remainder_rounding() {
        assert_eq!(largest_remainder(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(largest_remainder(&[5, 3, 2], 7).iter().sum::<usize>(), 7);
        assert_eq!(largest_remainder(&[70, 20, 10], 10), vec![7, 2, 1]);
    }
}
