use serde::{Deserialize, Serialize};

use super::chi_square_sf;
use crate::erroranalysis::{ErrorCategory, FIVE_WAY_NAMES};
use crate::error::{Error, Result};

/// Residual magnitude worth calling out in error-pattern reports.
pub const RESIDUAL_SCREEN: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub rows: Vec<String>,
    /// Categories kept after dropping those with no observations.
    pub categories: Vec<String>,
    pub observed: Vec<Vec<f64>>,
    pub expected: Vec<Vec<f64>>,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub cramers_v: f64,
    /// Haberman adjusted standardized residuals, `[row][category]`.
    pub adjusted_residuals: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl ChiSquareResult {
    /// `(row, category, residual)` with `|residual| > RESIDUAL_SCREEN`.
    pub fn notable_residuals(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        for (i, row) in self.adjusted_residuals.iter().enumerate() {
            for (j, r) in row.iter().enumerate() {
                if r.abs() > RESIDUAL_SCREEN {
                    out.push((self.rows[i].clone(), self.categories[j].clone(), *r));
                }
            }
        }
        out
    }
}

/// Homogeneity test on an r×c table of counts.
pub fn chi_square_homogeneity(rows: &[String], categories: &[String], table: &[Vec<f64>]) -> Result<ChiSquareResult> {
    if rows.len() < 2 || table.len() != rows.len() || table.iter().any(|r| r.len() != categories.len()) {
        return Err(Error::Format("contingency table shape does not match its labels".into()));
    }
    if table.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Format("contingency counts must be non-negative".into()));
    }
    let mut warnings = Vec::new();
    let keep: Vec<usize> = (0..categories.len())
        .filter(|&j| {
            let total: f64 = table.iter().map(|r| r[j]).sum();
            if total == 0.0 {
                warnings.push(format!("category {} has expected count 0 and was dropped", categories[j]));
            }
            total > 0.0
        })
        .collect();
    let observed: Vec<Vec<f64>> = table.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect();
    let row_tot: Vec<f64> = observed.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<f64> = (0..keep.len()).map(|j| observed.iter().map(|r| r[j]).sum()).collect();
    let n: f64 = row_tot.iter().sum();
    if row_tot.iter().any(|&t| t == 0.0) {
        return Err(Error::Format("every row needs at least one observation".into()));
    }
    let mut expected = vec![vec![0.0; keep.len()]; rows.len()];
    let mut adjusted = vec![vec![0.0; keep.len()]; rows.len()];
    let mut chi = 0.0;
    for i in 0..rows.len() {
        for j in 0..keep.len() {
            let e = row_tot[i] * col_tot[j] / n;
            expected[i][j] = e;
            let d = observed[i][j] - e;
            chi += d * d / e;
            let v = e * (1.0 - row_tot[i] / n) * (1.0 - col_tot[j] / n);
            adjusted[i][j] = if v > 0.0 { d / v.sqrt() } else { 0.0 };
        }
    }
    let dof = (rows.len() - 1) * keep.len().saturating_sub(1);
    let k = (rows.len().min(keep.len()) as f64 - 1.0).max(0.0);
    let (p_value, cramers_v) = if dof == 0 { (1.0, 0.0) } else { (chi_square_sf(chi, dof as f64), (chi / (n * k)).sqrt()) };
    Ok(ChiSquareResult {
        rows: rows.to_vec(),
        categories: keep.iter().map(|&j| categories[j].clone()).collect(),
        observed,
        expected,
        chi_square: chi,
        dof,
        p_value,
        cramers_v,
        adjusted_residuals: adjusted,
        warnings,
    })
}

/// 2×5 test on two models' errors grouped into the five reporting categories.
pub fn chi_square_error_dist(
    name_a: &str,
    errors_a: &[ErrorCategory],
    name_b: &str,
    errors_b: &[ErrorCategory],
) -> Result<ChiSquareResult> {
    let count = |errs: &[ErrorCategory]| {
        let mut c = vec![0.0; FIVE_WAY_NAMES.len()];
        for e in errs {
            c[e.five_way()] += 1.0;
        }
        c
    };
    let cats: Vec<String> = FIVE_WAY_NAMES.iter().map(|s| s.to_string()).collect();
    chi_square_homogeneity(&[name_a.to_string(), name_b.to_string()], &cats, &[count(errors_a), count(errors_b)])
}
