//! Report sections as JSON and aligned-column text. Every section is
//! named by its content and rendered deterministically from its inputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::erroranalysis::MitigationReport;
use crate::error::Result;
use crate::models::{AuditResult, EvalMetrics};
use crate::review::{SessionReport, TABULAR};
use crate::workflow::AgreementReport;
use crate::stattests::{wilson_interval, BootstrapResult, ChiSquareResult, McNemarResult, StratumResult, RESIDUAL_SCREEN};

/// A titled grid of pre-formatted cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TextTable {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        Self { title: title.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// First column left-aligned, the rest right-aligned.
    pub fn render(&self) -> String {
        let width: Vec<usize> = (0..self.columns.len())
            .map(|j| self.rows.iter().map(|r| r.get(j).map_or(0, |c| c.chars().count())).chain([self.columns[j].chars().count()]).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(j, c)| if j == 0 { format!("{c:<w$}", w = width[j]) } else { format!("{c:>w$}", w = width[j]) })
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let total: usize = width.iter().sum::<usize>() + 2 * width.len().saturating_sub(1);
        let mut out = format!("{}\n{}\n", self.title, "=".repeat(self.title.chars().count()));
        out.push_str(&line(&self.columns));
        out.push('\n');
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

fn f(x: f64, digits: usize) -> String {
    if x.is_finite() {
        format!("{x:.digits$}")
    } else if x > 0.0 {
        "inf".into()
    } else if x < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

fn pct(x: f64) -> String {
    format!("{}%", f(100.0 * x, 1))
}

fn opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "n/a".into(), |v| f(v, digits))
}

fn pval(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        f(p, 4)
    }
}

fn sig(p: f64, alpha: f64) -> String {
    if p < alpha { "yes" } else { "no" }.into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelAccuracy {
    pub model: String,
    pub metrics: EvalMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyInterval {
    pub model: String,
    pub correct: usize,
    pub n: usize,
    pub accuracy: f64,
    pub lower: f64,
    pub upper: f64,
    pub z: f64,
}

pub fn accuracy_interval(model: &str, m: &EvalMetrics, z: f64) -> Result<AccuracyInterval> {
    let correct = m.tp + m.tn;
    let w = wilson_interval(correct as u64, m.n as u64, z)?;
    Ok(AccuracyInterval { model: model.to_string(), correct, n: m.n, accuracy: w.p_hat, lower: w.lower, upper: w.upper, z })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratifiedComparison {
    pub model_a: String,
    pub model_b: String,
    pub strata: Vec<StratumResult>,
}

/// Paired model comparisons on one test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub mcnemar: Vec<McNemarResult>,
    pub paired_bootstrap: Vec<BootstrapResult>,
    pub stratified_mcnemar: Vec<StratifiedComparison>,
    pub error_distribution: Vec<ChiSquareResult>,
}

/// Everything `report` assembles. Sections without inputs are absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub potentially_misclassified: Vec<AuditResult>,
    pub model_accuracy: Vec<ModelAccuracy>,
    pub accuracy_intervals: Vec<AccuracyInterval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<SessionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mitigation: Option<MitigationReport>,
}

pub fn potentially_misclassified_table(rows: &[AuditResult]) -> TextTable {
    let mut t = TextTable::new("Potentially misclassified records", &["Model", "Records", "Flagged", "Rate"]);
    for r in rows {
        t.push(vec![r.model.clone(), r.n.to_string(), r.count.to_string(), pct(r.rate)]);
    }
    t
}

pub fn model_accuracy_table(rows: &[ModelAccuracy]) -> TextTable {
    let mut t = TextTable::new("Model accuracy on the test split", &["Model", "n", "Accuracy", "Precision", "Recall", "F1", "Macro F1", "AUC"]);
    for r in rows {
        let m = &r.metrics;
        t.push(vec![
            r.model.clone(),
            m.n.to_string(),
            f(m.accuracy, 4),
            f(m.intersection.precision, 4),
            f(m.intersection.recall, 4),
            f(m.intersection.f1, 4),
            f(m.macro_f1, 4),
            opt(m.auc, 4),
        ]);
    }
    t
}

pub fn accuracy_intervals_table(rows: &[AccuracyInterval]) -> TextTable {
    let mut t = TextTable::new("Accuracy with Wilson score intervals", &["Model", "Correct", "n", "Accuracy", "Lower", "Upper"]);
    for r in rows {
        t.push(vec![r.model.clone(), r.correct.to_string(), r.n.to_string(), pct(r.accuracy), pct(r.lower), pct(r.upper)]);
    }
    t
}

pub fn tabular_agreement_table(r: &SessionReport) -> TextTable {
    let mut t = TextTable::new("Agreement with the coded label", &["Rater", "Kind", "Agree", "n", "Agreement", "Lower", "Upper"]);
    for row in &r.tabular_agreement {
        let kind = serde_json::to_value(row.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        t.push(vec![
            row.rater.clone(),
            kind,
            row.agree.to_string(),
            row.n.to_string(),
            format!("{}%", f(row.percent, 1)),
            pct(row.interval.lower),
            pct(row.interval.upper),
        ]);
    }
    t
}

pub fn pairwise_agreement_table(r: &SessionReport) -> TextTable {
    let m = &r.pairwise_agreement;
    let mut cols = vec![""];
    cols.extend(m.raters.iter().map(String::as_str));
    let mut t = TextTable::new("Pairwise percent agreement", &cols);
    for (name, row) in m.raters.iter().zip(&m.percent) {
        let mut cells = vec![name.clone()];
        cells.extend(row.iter().map(|x| x.map_or_else(|| "n/a".into(), |v| format!("{}%", f(v, 1)))));
        t.push(cells);
    }
    t
}

pub fn kappa_matrix_table(r: &SessionReport) -> TextTable {
    let m = &r.kappa_matrix;
    let mut cols = vec![""];
    cols.extend(m.columns.iter().map(String::as_str));
    let mut t = TextTable::new("Cohen's kappa against each expert", &cols);
    for (name, row) in m.rows.iter().zip(&m.kappa) {
        let mut cells = vec![name.clone()];
        cells.extend(row.iter().map(|x| opt(*x, 3)));
        t.push(cells);
    }
    t
}

pub fn fleiss_groups_table(r: &SessionReport) -> TextTable {
    let mut t = TextTable::new("Fleiss' kappa by rater group", &["Group", "Raters", "Items", "Kappa", "Z", "p"]);
    for g in &r.fleiss_groups {
        t.push(vec![
            g.group.clone(),
            g.raters.join("+"),
            g.n_items.to_string(),
            opt(g.kappa, 3),
            opt(g.z, 2),
            g.p_value.map_or_else(|| "n/a".into(), pval),
        ]);
    }
    t
}

pub fn mcnemar_table(rows: &[McNemarResult], alpha: f64) -> TextTable {
    let mut t = TextTable::new("McNemar tests", &["Comparison", "b", "c", "Chi-square", "p", "Significant", "Cohen's g", "Method", "Better"]);
    for r in rows {
        t.push(vec![
            format!("{} vs {}", r.model_a, r.model_b),
            r.b.to_string(),
            r.c.to_string(),
            f(r.chi_square, 3),
            pval(r.p_value),
            sig(r.p_value, alpha),
            f(r.effect_size_g, 3),
            format!("{:?}", r.method),
            r.better.clone().unwrap_or_else(|| "-".into()),
        ]);
    }
    t
}

pub fn paired_bootstrap_table(rows: &[BootstrapResult], alpha: f64) -> TextTable {
    let mut t =
        TextTable::new("Bootstrap paired t-tests", &["Comparison", "Metric", "Mean diff", "t", "df", "p", "Significant", "CI low", "CI high", "Redrawn"]);
    for r in rows {
        t.push(vec![
            format!("{} vs {}", r.model_a, r.model_b),
            r.metric.as_str().to_string(),
            f(r.mean_diff, 4),
            f(r.t, 3),
            r.df.to_string(),
            pval(r.p_value),
            sig(r.p_value, alpha),
            f(r.ci95.0, 4),
            f(r.ci95.1, 4),
            r.redrawn.to_string(),
        ]);
    }
    t
}

pub fn stratified_mcnemar_table(rows: &[StratifiedComparison], alpha: f64) -> TextTable {
    let mut t = TextTable::new("McNemar tests by narrative category", &["Comparison", "Stratum", "n", "b", "c", "Chi-square", "p", "Significant", "Cohen's g"]);
    for cmp in rows {
        for s in &cmp.strata {
            let name = format!("{} vs {}", cmp.model_a, cmp.model_b);
            match &s.result {
                Some(r) => t.push(vec![
                    name,
                    s.stratum.as_str().to_string(),
                    s.n.to_string(),
                    r.b.to_string(),
                    r.c.to_string(),
                    f(r.chi_square, 3),
                    pval(r.p_value),
                    sig(r.p_value, alpha),
                    f(r.effect_size_g, 3),
                ]),
                None => {
                    let mut row = vec![name, s.stratum.as_str().to_string(), s.n.to_string()];
                    row.extend(["insufficient data".to_string(), String::new(), String::new(), String::new(), String::new(), String::new()]);
                    t.push(row);
                }
            }
        }
    }
    t
}

pub fn error_distribution_table(rows: &[ChiSquareResult], alpha: f64) -> TextTable {
    let mut t = TextTable::new(
        "Error distribution chi-square tests",
        &["Comparison", "Chi-square", "df", "p", "Significant", "Cramer's V", &format!("Residuals > {RESIDUAL_SCREEN}")],
    );
    for r in rows {
        let notable: Vec<String> = r.notable_residuals().iter().map(|(row, cat, z)| format!("{row}/{cat} {}", f(*z, 2))).collect();
        t.push(vec![
            r.rows.join(" vs "),
            f(r.chi_square, 3),
            r.dof.to_string(),
            pval(r.p_value),
            sig(r.p_value, alpha),
            f(r.cramers_v, 3),
            if notable.is_empty() { "-".into() } else { notable.join("; ") },
        ]);
    }
    t
}

pub fn mitigation_table(r: &MitigationReport) -> TextTable {
    let mut t = TextTable::new(
        &format!("Mitigation systems ({}; baseline {} errors, {})", r.model, r.baseline_errors, pct(r.baseline_error_rate)),
        &["System", "Errors", "Error rate", "Delta", "Reduction", "Proximity errors"],
    );
    for row in &r.rows {
        let prox = row.categories.first().map_or_else(String::new, |c| format!("{} -> {}", c.baseline, c.errors));
        t.push(vec![
            row.system.clone(),
            row.errors.to_string(),
            pct(row.error_rate),
            format!("{:+.1} pts", 100.0 * row.delta),
            row.reduction.map_or_else(|| "n/a".into(), pct),
            prox,
        ]);
    }
    t
}

fn square_table(title: &str, names: &[String], cells: &[Vec<Option<f64>>], cell: impl Fn(f64) -> String) -> TextTable {
    let mut cols = vec![""];
    cols.extend(names.iter().map(String::as_str));
    let mut t = TextTable::new(title, &cols);
    for (name, row) in names.iter().zip(cells) {
        let mut line = vec![name.clone()];
        line.extend(row.iter().map(|x| x.map_or_else(|| "n/a".into(), &cell)));
        t.push(line);
    }
    t
}

/// Text form of a ratings-file agreement report.
pub fn render_agreement(r: &AgreementReport) -> String {
    let mut out = String::new();
    out.push_str(&square_table("Pairwise percent agreement", &r.raters, &r.pairwise_agreement.percent, |v| format!("{}%", f(v, 1))).render());
    out.push('\n');
    out.push_str(&square_table("Cohen's kappa", &r.raters, &r.kappa_matrix.kappa, |v| f(v, 3)).render());
    out.push('\n');
    let mut t = TextTable::new("Fleiss' kappa by rater group", &["Group", "Raters", "Items", "Kappa", "Z", "p"]);
    for g in &r.fleiss_groups {
        t.push(vec![g.group.clone(), g.raters.join("+"), g.n_items.to_string(), opt(g.kappa, 3), opt(g.z, 2), g.p_value.map_or_else(|| "n/a".into(), pval)]);
    }
    out.push_str(&t.render());
    if let Some(d) = &r.kappa_difference {
        out.push_str(&format!(
            "\nKappa difference {} - {}: {} - {} = {}, bootstrap p = {} ({} resamples, {} undefined)\n",
            d.group_a,
            d.group_b,
            f(d.kappa_a, 3),
            f(d.kappa_b, 3),
            f(d.delta, 3),
            pval(d.p_value),
            d.resamples,
            d.undefined
        ));
    }
    out
}

impl AuditReport {
    /// Named sections in output order.
    pub fn tables(&self) -> Vec<(&'static str, TextTable)> {
        let mut out = vec![
            ("potentially_misclassified", potentially_misclassified_table(&self.potentially_misclassified)),
            ("model_accuracy", model_accuracy_table(&self.model_accuracy)),
            ("accuracy_intervals", accuracy_intervals_table(&self.accuracy_intervals)),
        ];
        if let Some(r) = &self.review {
            out.push(("tabular_agreement", tabular_agreement_table(r)));
            out.push(("pairwise_agreement", pairwise_agreement_table(r)));
            out.push(("kappa_matrix", kappa_matrix_table(r)));
            out.push(("fleiss_groups", fleiss_groups_table(r)));
        }
        if let Some(c) = &self.comparison {
            out.push(("mcnemar", mcnemar_table(&c.mcnemar, c.alpha)));
            out.push(("paired_bootstrap", paired_bootstrap_table(&c.paired_bootstrap, c.alpha)));
            out.push(("stratified_mcnemar", stratified_mcnemar_table(&c.stratified_mcnemar, c.alpha)));
            out.push(("error_distribution", error_distribution_table(&c.error_distribution, c.alpha)));
        }
        if let Some(m) = &self.mitigation {
            out.push(("mitigation", mitigation_table(m)));
        }
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (_, t) in self.tables() {
            s.push_str(&t.render());
            s.push('\n');
        }
        if let Some(r) = &self.review {
            s.push_str(&format!("Review sample {}: {} items, {} ratings read, experts {}, coded label column {TABULAR:?}\n", r.sample_id, r.n_items, r.watermark, r.experts.join(", ")));
            for w in &r.warnings {
                s.push_str(&format!("warning: {w}\n"));
            }
        }
        s
    }

    /// Writes `report.json`, `report.txt` and one `<section>.txt` per table.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        fs::write(dir.join("report.json"), json)?;
        fs::write(dir.join("report.txt"), self.render())?;
        for (name, t) in self.tables() {
            fs::write(dir.join(format!("{name}.txt")), t.render())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_columns() {
        let mut t = TextTable::new("T", &["Model", "Rate"]);
        t.push(vec!["svm".into(), "14.0%".into()]);
        t.push(vec!["albert".into(), "5.1%".into()]);
        assert_eq!(t.render(), "T\n=\nModel    Rate\n-------------\nsvm     14.0%\nalbert   5.1%\n");
    }

    #[test]
    fn number_formats() {
        assert_eq!(pval(0.0004), "<0.001");
        assert_eq!(pval(0.02092), "0.0209");
        assert_eq!(f(f64::INFINITY, 2), "inf");
        assert_eq!(pct(0.5), "50.0%");
    }
}
