//! Percent agreement, Cohen's κ and Fleiss' κ over rating matrices built from
//! model outputs, coded labels and expert ratings.

mod matrix;

use rayon::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub use matrix::{read_ratings, write_ratings, RaterLabel, RatingMatrix, RatingRow};

/// Per-rater base rates over jointly rated items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaterMarginal {
    pub rater: String,
    pub p_intersection: f64,
    pub p_non_intersection: f64,
    pub p_indeterminate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    /// `a|b` for a pair, `+`-joined names for a group.
    pub id: String,
    pub raters: Vec<String>,
    pub n_items: usize,
    /// Items left out because a rater in the pair/group has no rating.
    pub dropped: usize,
    pub p0: f64,
    pub pe: f64,
    pub kappa: f64,
    pub marginals: Vec<RaterMarginal>,
    /// Fleiss only: Z statistic and one-sided p-value for κ > 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

fn marginal(rater: &str, cells: &[RaterLabel]) -> RaterMarginal {
    let n = cells.len().max(1) as f64;
    let frac = |l: RaterLabel| cells.iter().filter(|&&c| c == l).count() as f64 / n;
    RaterMarginal {
        rater: rater.to_string(),
        p_intersection: frac(RaterLabel::Intersection),
        p_non_intersection: frac(RaterLabel::NonIntersection),
        p_indeterminate: frac(RaterLabel::Indeterminate),
    }
}

/// Jointly rated `(a, b)` cells.
fn joint(m: &RatingMatrix, a: &str, b: &str) -> Result<(Vec<RaterLabel>, Vec<RaterLabel>, usize)> {
    let (ia, ib) = (m.rater_index(a)?, m.rater_index(b)?);
    let mut xa = Vec::new();
    let mut xb = Vec::new();
    for row in &m.cells {
        if row[ia] != RaterLabel::Missing && row[ib] != RaterLabel::Missing {
            xa.push(row[ia]);
            xb.push(row[ib]);
        }
    }
    if xa.is_empty() {
        return Err(Error::NoOverlap);
    }
    let dropped = m.items.len() - xa.len();
    Ok((xa, xb, dropped))
}

pub fn percent_agreement(m: &RatingMatrix, a: &str, b: &str) -> Result<f64> {
    let (xa, xb, _) = joint(m, a, b)?;
    Ok(xa.iter().zip(&xb).filter(|(x, y)| x == y).count() as f64 / xa.len() as f64)
}

/// κ = (P0 − Pe)/(1 − Pe) with Pe = Σ_labels p_a(label)·p_b(label).
pub fn cohens_kappa(m: &RatingMatrix, a: &str, b: &str) -> Result<AgreementResult> {
    let (xa, xb, dropped) = joint(m, a, b)?;
    let n = xa.len() as f64;
    let p0 = xa.iter().zip(&xb).filter(|(x, y)| x == y).count() as f64 / n;
    let pe: f64 = RaterLabel::RATED
        .iter()
        .map(|l| {
            let pa = xa.iter().filter(|x| *x == l).count() as f64 / n;
            let pb = xb.iter().filter(|x| *x == l).count() as f64 / n;
            pa * pb
        })
        .sum();
    if pe >= 1.0 {
        return Err(Error::DegenerateMarginals { p0 });
    }
    Ok(AgreementResult {
        id: format!("{a}|{b}"),
        raters: vec![a.to_string(), b.to_string()],
        n_items: xa.len(),
        dropped,
        p0,
        pe,
        kappa: (p0 - pe) / (1.0 - pe),
        marginals: vec![marginal(a, &xa), marginal(b, &xb)],
        z: None,
        p_value: None,
    })
}

/// Category counts per complete item (3 categories).
fn group_counts(m: &RatingMatrix, group: &[String]) -> Result<(Vec<[u32; 3]>, Vec<Vec<RaterLabel>>, usize)> {
    if group.len() < 2 {
        return Err(Error::Config("Fleiss' kappa needs at least two raters".into()));
    }
    let idx: Vec<usize> = group.iter().map(|r| m.rater_index(r)).collect::<Result<_>>()?;
    let mut counts = Vec::new();
    let mut cols = vec![Vec::new(); group.len()];
    for row in &m.cells {
        if idx.iter().any(|&i| row[i] == RaterLabel::Missing) {
            continue;
        }
        let mut c = [0u32; 3];
        for (k, &i) in idx.iter().enumerate() {
            c[row[i].category().expect("non-missing")] += 1;
            cols[k].push(row[i]);
        }
        counts.push(c);
    }
    if counts.is_empty() {
        return Err(Error::NoOverlap);
    }
    let dropped = m.items.len() - counts.len();
    Ok((counts, cols, dropped))
}

/// `(P̄, P̄e, κ, p_j)` for complete count rows with `raters` ratings each.
pub fn fleiss_from_counts(counts: &[[u32; 3]], raters: usize) -> Result<(f64, f64, f64, [f64; 3])> {
    let n = raters as f64;
    let items = counts.len() as f64;
    let mut p = [0.0; 3];
    let mut pbar = 0.0;
    for c in counts {
        let mut s = 0.0;
        for j in 0..3 {
            p[j] += c[j] as f64;
            s += (c[j] as f64) * (c[j] as f64);
        }
        pbar += (s - n) / (n * (n - 1.0));
    }
    pbar /= items;
    for pj in &mut p {
        *pj /= items * n;
    }
    let pe: f64 = p.iter().map(|x| x * x).sum();
    if pe >= 1.0 {
        return Err(Error::DegenerateMarginals { p0: pbar });
    }
    Ok((pbar, pe, (pbar - pe) / (1.0 - pe), p))
}

/// Fleiss' κ over items every rater in `group` rated, with the large-sample
/// Z test of κ = 0.
pub fn fleiss_kappa(m: &RatingMatrix, group: &[String]) -> Result<AgreementResult> {
    let (counts, cols, dropped) = group_counts(m, group)?;
    let (p0, pe, kappa, p) = fleiss_from_counts(&counts, group.len())?;
    let (nn, n) = (counts.len() as f64, group.len() as f64);
    let pq: f64 = p.iter().map(|x| x * (1.0 - x)).sum();
    let pq_skew: f64 = p.iter().map(|x| x * (1.0 - x) * ((1.0 - x) - x)).sum();
    let var = 2.0 / (nn * n * (n - 1.0)) * (pq * pq - pq_skew) / (pq * pq);
    let (z, p_value) = if var > 0.0 {
        let z = kappa / var.sqrt();
        let norm = Normal::standard();
        (Some(z), Some(norm.sf(z)))
    } else {
        (None, None)
    };
    Ok(AgreementResult {
        id: group.join("+"),
        raters: group.to_vec(),
        n_items: counts.len(),
        dropped,
        p0,
        pe,
        kappa,
        marginals: group.iter().zip(&cols).map(|(r, c)| marginal(r, c)).collect(),
        z,
        p_value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaDiff {
    pub group_a: String,
    pub group_b: String,
    pub kappa_a: f64,
    pub kappa_b: f64,
    /// κ_a − κ_b on the observed items.
    pub delta: f64,
    pub p_value: f64,
    pub resamples: usize,
    /// Resamples where either κ was undefined; excluded from the p-value.
    pub undefined: usize,
}

pub const MIN_RESAMPLES: usize = 100;

/// Item-level bootstrap of κ_a − κ_b over items complete in both groups.
/// The p-value is twice the share of resamples whose difference is zero or
/// of the opposite sign to the observed one, capped at 1.
pub fn kappa_diff_bootstrap(m: &RatingMatrix, group_a: &[String], group_b: &[String], resamples: usize, seed: u64) -> Result<KappaDiff> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::Config(format!("at least {MIN_RESAMPLES} resamples required, got {resamples}")));
    }
    let mut union: Vec<String> = group_a.to_vec();
    union.extend(group_b.iter().filter(|r| !group_a.contains(r)).cloned());
    let complete: Vec<usize> = {
        let idx: Vec<usize> = union.iter().map(|r| m.rater_index(r)).collect::<Result<_>>()?;
        (0..m.items.len()).filter(|&i| idx.iter().all(|&j| m.cells[i][j] != RaterLabel::Missing)).collect()
    };
    if complete.is_empty() {
        return Err(Error::NoOverlap);
    }
    let counts_for = |group: &[String]| -> Result<Vec<[u32; 3]>> {
        let idx: Vec<usize> = group.iter().map(|r| m.rater_index(r)).collect::<Result<_>>()?;
        Ok(complete
            .iter()
            .map(|&i| {
                let mut c = [0u32; 3];
                for &j in &idx {
                    c[m.cells[i][j].category().expect("complete item")] += 1;
                }
                c
            })
            .collect())
    };
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(Error::Config("Fleiss' kappa needs at least two raters".into()));
    }
    let (ca, cb) = (counts_for(group_a)?, counts_for(group_b)?);
    let ka = fleiss_from_counts(&ca, group_a.len())?.2;
    let kb = fleiss_from_counts(&cb, group_b.len())?.2;
    let delta = ka - kb;
    let n = complete.len();
    let diffs: Vec<Option<f64>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let pick: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sa: Vec<[u32; 3]> = pick.iter().map(|&i| ca[i]).collect();
            let sb: Vec<[u32; 3]> = pick.iter().map(|&i| cb[i]).collect();
            let a = fleiss_from_counts(&sa, group_a.len()).ok()?.2;
            let b = fleiss_from_counts(&sb, group_b.len()).ok()?.2;
            Some(a - b)
        })
        .collect();
    let defined: Vec<f64> = diffs.iter().flatten().copied().collect();
    let undefined = resamples - defined.len();
    let p_value = if defined.is_empty() {
        1.0
    } else {
        let reversed = defined.iter().filter(|&&d| d == 0.0 || d.signum() != delta.signum() || delta == 0.0).count();
        (2.0 * reversed as f64 / defined.len() as f64).min(1.0)
    };
    Ok(KappaDiff {
        group_a: group_a.join("+"),
        group_b: group_b.join("+"),
        kappa_a: ka,
        kappa_b: kb,
        delta,
        p_value,
        resamples,
        undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use RaterLabel::*;

    fn matrix(cols: &[(&str, &[RaterLabel])]) -> RatingMatrix {
        let n = cols[0].1.len();
        let items = (0..n).map(|i| format!("K{i}")).collect();
        let raters = cols.iter().map(|(r, _)| r.to_string()).collect();
        let cells = (0..n).map(|i| cols.iter().map(|(_, c)| c[i]).collect()).collect();
        RatingMatrix::new(items, raters, cells).unwrap()
    }

    #[test]
    fn percent_and_overlap() {
        let a = [Intersection, NonIntersection, Intersection, Intersection, NonIntersection, Intersection, NonIntersection, Intersection, Intersection, NonIntersection];
        let mut b = a;
        b[0] = NonIntersection;
        b[1] = Indeterminate;
        let m = matrix(&[("a", &a), ("b", &b)]);
        assert_eq!(percent_agreement(&m, "a", "a").unwrap(), 1.0);
        assert!((percent_agreement(&m, "a", "b").unwrap() - 0.8).abs() < 1e-12);
        let m = matrix(&[("a", &[Intersection, Missing]), ("b", &[Missing, Intersection])]);
        assert!(matches!(percent_agreement(&m, "a", "b"), Err(Error::NoOverlap)));
    }

    #[test]
    fn cohen_fixture() {
        // P0 = 0.7, p_a(I) = 0.6, p_b(I) = 0.5 → Pe = 0.5, κ = 0.4
        let a = [Intersection, Intersection, Intersection, Intersection, Intersection, Intersection, NonIntersection, NonIntersection, NonIntersection, NonIntersection];
        let b = [Intersection, Intersection, Intersection, Intersection, NonIntersection, NonIntersection, NonIntersection, NonIntersection, NonIntersection, Intersection];
        let m = matrix(&[("a", &a), ("b", &b)]);
        let r = cohens_kappa(&m, "a", "b").unwrap();
        assert!((r.p0 - 0.7).abs() < 1e-12);
        assert!((r.pe - 0.5).abs() < 1e-12);
        assert!((r.kappa - 0.4).abs() < 1e-12);
        assert!((r.marginals[0].p_intersection - 0.6).abs() < 1e-12);
        let same = cohens_kappa(&m, "a", "a").unwrap();
        assert_eq!(same.kappa, 1.0);
        let m = matrix(&[("a", &[Intersection; 4]), ("b", &[Intersection; 4])]);
        assert!(matches!(cohens_kappa(&m, "a", "b"), Err(Error::DegenerateMarginals { p0 }) if p0 == 1.0));
    }

    #[test]
    fn fleiss_fixture() {
        let r1 = [Intersection, NonIntersection, Intersection];
        let r2 = [Intersection, NonIntersection, Intersection];
        let r3 = [Intersection, NonIntersection, NonIntersection];
        let m = matrix(&[("x", &r1), ("y", &r2), ("z", &r3)]);
        let g: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let r = fleiss_kappa(&m, &g).unwrap();
        assert!((r.kappa - 0.55).abs() < 1e-9, "{}", r.kappa);
        assert!(r.z.unwrap() > 0.0);
        let m = matrix(&[("x", &[Intersection; 3]), ("y", &[Intersection; 3])]);
        assert!(matches!(fleiss_kappa(&m, &g[..2]), Err(Error::DegenerateMarginals { .. })));
        assert!(fleiss_kappa(&m, &g[..1]).is_err());
    }

    #[test]
    fn fleiss_drops_missing_items() {
        let m = matrix(&[("x", &[Intersection, NonIntersection, Missing]), ("y", &[Intersection, NonIntersection, Intersection])]);
        let r = fleiss_kappa(&m, &["x".to_string(), "y".to_string()]).unwrap();
        assert_eq!((r.n_items, r.dropped), (2, 1));
        assert_eq!(r.kappa, 1.0);
    }

    #[test]
    fn bootstrap_identity_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut col = || -> Vec<RaterLabel> { (0..60).map(|_| if rng.random_bool(0.5) { Intersection } else { NonIntersection }).collect() };
        let (a, b, c) = (col(), col(), col());
        let m = matrix(&[("a", &a), ("b", &b), ("c", &c)]);
        let g: Vec<String> = vec!["a".into(), "b".into()];
        let d = kappa_diff_bootstrap(&m, &g, &g, 200, 1).unwrap();
        assert_eq!(d.delta, 0.0);
        assert_eq!(d.p_value, 1.0);
        let h: Vec<String> = vec!["a".into(), "c".into()];
        assert_eq!(kappa_diff_bootstrap(&m, &g, &h, 200, 9).unwrap(), kappa_diff_bootstrap(&m, &g, &h, 200, 9).unwrap());
        assert!(matches!(kappa_diff_bootstrap(&m, &g, &h, 99, 9), Err(Error::Config(_))));
    }
}
