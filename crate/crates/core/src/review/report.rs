use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sample::ReviewSample;
use super::session::{Answer, ReviewStore};
use crate::agreement::{cohens_kappa, fleiss_kappa, percent_agreement, RaterLabel, RatingMatrix};
use crate::corpus::RoadTypeLabel;
use crate::error::{Error, Result};
use crate::models::PredictionSet;
use crate::stattests::{wilson_interval, WilsonInterval, DEFAULT_Z};

/// Column name for the coded labels in every matrix.
pub const TABULAR: &str = "tabular";

/// What a report needs beyond the ratings. Never served to raters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportContext {
    pub predictions: Vec<PredictionSet>,
    pub tabular: BTreeMap<String, RoadTypeLabel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaterGroup {
    pub name: String,
    pub raters: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub include_incomplete: bool,
    pub answer: Answer,
    /// Fleiss groups; empty means experts, models, and everyone.
    pub groups: Vec<RaterGroup>,
    pub z: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { include_incomplete: false, answer: Answer::Final, groups: Vec::new(), z: DEFAULT_Z }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaterKind {
    Expert,
    Model,
}

/// Agreement of one rater or model with the coded label. Indeterminate
/// counts as disagreement since the coded data has no such label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularAgreementRow {
    pub rater: String,
    pub kind: RaterKind,
    pub n: usize,
    pub agree: usize,
    pub percent: f64,
    pub interval: WilsonInterval,
}

/// Square matrix over `raters`; `None` where two raters share no items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub raters: Vec<String>,
    pub percent: Vec<Vec<Option<f64>>>,
}

/// κ with models and experts as rows, experts as columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub kappa: Vec<Vec<Option<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleissRow {
    pub group: String,
    pub raters: Vec<String>,
    pub n_items: usize,
    pub dropped: usize,
    pub kappa: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub rater_id: String,
    pub rated: usize,
    pub complete: bool,
    pub closed: bool,
    pub revised: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub sample_id: String,
    pub n_items: usize,
    /// Rating entries read when the report was built.
    pub watermark: usize,
    pub include_incomplete: bool,
    pub answer: Answer,
    pub sessions: Vec<SessionSummary>,
    pub experts: Vec<String>,
    pub models: Vec<String>,
    pub tabular_agreement: Vec<TabularAgreementRow>,
    pub pairwise_agreement: PairwiseMatrix,
    pub kappa_matrix: KappaMatrix,
    pub fleiss_groups: Vec<FleissRow>,
    pub warnings: Vec<String>,
}

fn to_rater(m: &BTreeMap<String, RoadTypeLabel>, keys: &[String]) -> BTreeMap<String, RaterLabel> {
    keys.iter().filter_map(|k| m.get(k).map(|l| (k.clone(), RaterLabel::from(*l)))).collect()
}

/// Builds the combined matrix: tabular, models, then experts, over sample items.
pub fn combined_matrix(sample: &ReviewSample, experts: &RatingMatrix, ctx: &ReportContext) -> Result<RatingMatrix> {
    let keys = sample.keys();
    let mut m = RatingMatrix::new(keys.clone(), Vec::new(), vec![Vec::new(); keys.len()])?;
    m.add_rater(TABULAR, &to_rater(&ctx.tabular, &keys))?;
    for p in &ctx.predictions {
        if p.model == TABULAR {
            return Err(Error::Config(format!("model name {TABULAR:?} is reserved")));
        }
        m.add_rater(&p.model, &to_rater(&p.labels(), &keys))?;
    }
    let experts = experts.restrict(&keys);
    for (j, r) in experts.raters.iter().enumerate() {
        if m.raters.contains(r) {
            return Err(Error::DuplicateKey(format!("rater {r} clashes with a model name")));
        }
        let col = keys
            .iter()
            .zip(&experts.cells)
            .filter(|(_, row)| row[j] != RaterLabel::Missing)
            .map(|(k, row)| (k.clone(), row[j]))
            .collect();
        m.add_rater(r, &col)?;
    }
    Ok(m)
}

fn default_groups(experts: &[String], models: &[String]) -> Vec<RaterGroup> {
    let mut out = Vec::new();
    if experts.len() >= 2 {
        out.push(RaterGroup { name: "experts".into(), raters: experts.to_vec() });
    }
    if models.len() >= 2 {
        out.push(RaterGroup { name: "models".into(), raters: models.to_vec() });
    }
    if !experts.is_empty() && !models.is_empty() {
        let mut all = models.to_vec();
        all.extend_from_slice(experts);
        out.push(RaterGroup { name: "models+experts".into(), raters: all });
    }
    out
}

/// Fleiss' κ per group; a group where κ is undefined gets a note instead.
pub fn fleiss_rows(m: &RatingMatrix, groups: &[RaterGroup]) -> Vec<FleissRow> {
    groups
        .iter()
        .map(|g| match fleiss_kappa(m, &g.raters) {
            Ok(r) => FleissRow {
                group: g.name.clone(),
                raters: g.raters.clone(),
                n_items: r.n_items,
                dropped: r.dropped,
                kappa: Some(r.kappa),
                z: r.z,
                p_value: r.p_value,
                note: None,
            },
            Err(e) => FleissRow {
                group: g.name.clone(),
                raters: g.raters.clone(),
                n_items: 0,
                dropped: m.items.len(),
                kappa: None,
                z: None,
                p_value: None,
                note: Some(e.to_string()),
            },
        })
        .collect()
}

/// Agreement bundle for one sample from an already assembled matrix.
pub fn agreement_bundle(
    m: &RatingMatrix,
    experts: &[String],
    models: &[String],
    opts: &ReportOptions,
) -> Result<(Vec<TabularAgreementRow>, PairwiseMatrix, KappaMatrix, Vec<FleissRow>, Vec<String>)> {
    let mut warnings = Vec::new();
    let t = m.rater_index(TABULAR)?;
    let mut tabular_agreement = Vec::new();
    let kinds = models.iter().map(|r| (r, RaterKind::Model)).chain(experts.iter().map(|r| (r, RaterKind::Expert)));
    for (r, kind) in kinds {
        let j = m.rater_index(r)?;
        let pairs: Vec<_> = m.cells.iter().filter(|row| row[t] != RaterLabel::Missing && row[j] != RaterLabel::Missing).collect();
        if pairs.is_empty() {
            warnings.push(format!("{r} shares no items with the coded labels"));
            continue;
        }
        let agree = pairs.iter().filter(|row| row[t] == row[j]).count();
        tabular_agreement.push(TabularAgreementRow {
            rater: r.clone(),
            kind,
            n: pairs.len(),
            agree,
            percent: 100.0 * agree as f64 / pairs.len() as f64,
            interval: wilson_interval(agree as u64, pairs.len() as u64, opts.z)?,
        });
    }

    let everyone: Vec<String> = std::iter::once(TABULAR.to_string()).chain(models.iter().cloned()).chain(experts.iter().cloned()).collect();
    let percent = everyone
        .iter()
        .map(|a| everyone.iter().map(|b| percent_agreement(m, a, b).ok().map(|p| 100.0 * p)).collect())
        .collect();
    let pairwise_agreement = PairwiseMatrix { raters: everyone, percent };

    let rows: Vec<String> = models.iter().chain(experts).cloned().collect();
    let mut kappa = Vec::new();
    for a in &rows {
        let mut line = Vec::new();
        for b in experts {
            match cohens_kappa(m, a, b) {
                Ok(r) => line.push(Some(r.kappa)),
                Err(e) => {
                    warnings.push(format!("kappa {a}|{b}: {e}"));
                    line.push(None);
                }
            }
        }
        kappa.push(line);
    }
    let kappa_matrix = KappaMatrix { rows, columns: experts.to_vec(), kappa };

    let groups = if opts.groups.is_empty() { default_groups(experts, models) } else { opts.groups.clone() };
    let fleiss_groups = fleiss_rows(m, &groups);
    Ok((tabular_agreement, pairwise_agreement, kappa_matrix, fleiss_groups, warnings))
}

/// Report for a sample from the store's sessions. Each rater contributes
/// their most recent session.
pub fn session_report(store: &ReviewStore, sample_id: &str, ctx: &ReportContext, opts: &ReportOptions) -> Result<SessionReport> {
    let sample = store.sample(sample_id)?;
    let (ratings, watermark) = store.ratings(sample_id, opts.include_incomplete, opts.answer)?;
    let sessions: Vec<SessionSummary> = store
        .sessions_for(sample_id)
        .into_iter()
        .map(|s| SessionSummary {
            rated: s.rated(),
            complete: s.is_complete(&sample),
            closed: s.closed,
            revised: s.entries.len() - s.rated(),
            session_id: s.session_id,
            rater_id: s.rater_id,
        })
        .collect();
    let m = combined_matrix(&sample, &ratings, ctx)?;
    let experts = ratings.raters.clone();
    let models: Vec<String> = ctx.predictions.iter().map(|p| p.model.clone()).collect();
    let (tabular_agreement, pairwise_agreement, kappa_matrix, fleiss_groups, mut warnings) =
        agreement_bundle(&m, &experts, &models, opts)?;
    let skipped = sessions.iter().filter(|s| !s.complete).count();
    if skipped > 0 && !opts.include_incomplete {
        warnings.insert(0, format!("{skipped} incomplete session(s) left out"));
    }
    Ok(SessionReport {
        sample_id: sample_id.to_string(),
        n_items: sample.len(),
        watermark,
        include_incomplete: opts.include_incomplete,
        answer: opts.answer,
        sessions,
        experts,
        models,
        tabular_agreement,
        pairwise_agreement,
        kappa_matrix,
        fleiss_groups,
        warnings,
    })
}
