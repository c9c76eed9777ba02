//! The file-level workflow behind each command: where artifacts live and
//! how each step turns its inputs into outputs.
//!
//! ```text
//! <data_dir>/dataset.jsonl, nodes.csv
//! <out>/split.json
//! <out>/models/<name>.model
//! <out>/predictions/<name>.csv      one file per model; external files welcome
//! <out>/evaluation.json, audit.json, comparison.json, mitigation.json
//! <out>/review/                     sample manifests, session logs
//! <out>/reports/                    report.json, report.txt, <section>.txt
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::agreement::{cohens_kappa, kappa_diff_bootstrap, percent_agreement, read_ratings, write_ratings, KappaDiff, RatingMatrix};
use crate::ambiguity::{detect_text, AmbiguityCategory, AmbiguityFlags, AmbiguityLexicons};
use crate::config::RunConfig;
use crate::corpus::{
    generate_synthetic, ingest_files, read_dataset, write_dataset, write_exceptions, CrashRecord, DatasetManifest, RoadTypeLabel,
    ScrubReport, Scrubber, SyntheticSpec,
};
use crate::erroranalysis::{integrated_framework, ErrorCategory, ErrorClassifier, MitigationConfig, MitigationKind, MitigationReport, Mitigations};
use crate::error::{Error, Result};
use crate::models::{audit as audit_set, evaluate as eval_set, ingest_external_file, stratified_split, write_predictions, AuditResult, ModelKind, PredictionSet};
use crate::report::{accuracy_interval, AuditReport, ComparisonReport, ModelAccuracy, StratifiedComparison};
use crate::review::{build_sample, fleiss_rows, FleissRow, KappaMatrix, PairwiseMatrix, RaterGroup, disagreement_pool, session_report, Answer, ReportContext, ReportOptions, ReviewSample, ReviewStore};
use crate::stattests::{bootstrap_paired_ttest, chi_square_error_dist, mcnemar, mcnemar_stratified, MIN_STRATUM};
use crate::system::{train_system, TrainedSystem};

/// Artifact paths for one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub data_dir: PathBuf,
    pub out: PathBuf,
}

impl Layout {
    pub fn new(cfg: &RunConfig) -> Self {
        Self { data_dir: cfg.data_dir.clone(), out: cfg.out.clone() }
    }
    pub fn dataset(&self) -> PathBuf {
        self.data_dir.join("dataset.jsonl")
    }
    pub fn nodes(&self) -> PathBuf {
        self.data_dir.join("nodes.csv")
    }
    pub fn split(&self) -> PathBuf {
        self.out.join("split.json")
    }
    pub fn models(&self) -> PathBuf {
        self.out.join("models")
    }
    pub fn model(&self, name: &str) -> PathBuf {
        self.models().join(format!("{name}.model"))
    }
    pub fn predictions_dir(&self) -> PathBuf {
        self.out.join("predictions")
    }
    pub fn predictions(&self, name: &str) -> PathBuf {
        self.predictions_dir().join(format!("{name}.csv"))
    }
    pub fn evaluation(&self) -> PathBuf {
        self.out.join("evaluation.json")
    }
    pub fn audit(&self) -> PathBuf {
        self.out.join("audit.json")
    }
    pub fn comparison(&self) -> PathBuf {
        self.out.join("comparison.json")
    }
    pub fn mitigation(&self) -> PathBuf {
        self.out.join("mitigation.json")
    }
    pub fn review(&self) -> PathBuf {
        self.out.join("review")
    }
    /// Id of the most recently drawn sample.
    pub fn current_sample(&self) -> PathBuf {
        self.out.join("review").join("current_sample")
    }
    pub fn reports(&self) -> PathBuf {
        self.out.join("reports")
    }
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingInput(path.to_path_buf()))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    require(path)?;
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

fn valid_name(name: &str) -> Result<()> {
    if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) && !name.starts_with('.') {
        Ok(())
    } else {
        Err(Error::Config(format!("model name {name:?} must use [A-Za-z0-9_.-]")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub records: usize,
    pub intersection: usize,
    pub noisy_labels: usize,
    pub nodes: usize,
}

/// Writes the synthetic corpus as source CSVs plus a ready `dataset.jsonl`.
pub fn synth(cfg: &RunConfig) -> Result<SynthSummary> {
    let s = &cfg.synth;
    let mut spec = SyntheticSpec::new(s.n_records, s.class_balance, s.ambiguous, cfg.seed);
    spec.label_noise = s.label_noise;
    let corpus = generate_synthetic(&spec)?;
    let layout = Layout::new(cfg);
    corpus.write_csvs(&layout.data_dir)?;
    let records = corpus.crash_records();
    write_dataset(&layout.dataset(), &records)?;
    Ok(SynthSummary {
        records: records.len(),
        intersection: records.iter().filter(|r| r.label == Some(RoadTypeLabel::Intersection)).count(),
        noisy_labels: corpus.records.iter().filter(|r| r.label_noisy()).count(),
        nodes: corpus.nodes.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub records: usize,
    pub exceptions: usize,
    pub invalid_utf8_fields: usize,
    pub scrub: ScrubReport,
}

/// Joins the two source CSVs into `dataset.jsonl`, with `exceptions.csv`
/// and `scrub_report.json` alongside.
pub fn ingest(cfg: &RunConfig, narratives: &Path, tabular: Option<&Path>, manifest: Option<&Path>) -> Result<IngestSummary> {
    let manifest = match manifest {
        Some(p) => {
            require(p)?;
            DatasetManifest::load(p)?
        }
        None => DatasetManifest::default(),
    };
    let out = ingest_files(narratives, tabular, &manifest)?;
    let layout = Layout::new(cfg);
    fs::create_dir_all(&layout.data_dir)?;
    write_dataset(&layout.dataset(), &out.records)?;
    write_exceptions(&layout.data_dir.join("exceptions.csv"), &out.exceptions)?;
    write_json(&layout.data_dir.join("scrub_report.json"), &out.scrub)?;
    Ok(IngestSummary { records: out.records.len(), exceptions: out.exceptions.len(), invalid_utf8_fields: out.invalid_utf8_fields, scrub: out.scrub })
}

/// Re-scrubs a dataset file; `output` may equal `input`.
pub fn scrub(input: &Path, output: &Path, manifest: Option<&Path>) -> Result<ScrubReport> {
    let toggles = match manifest {
        Some(p) => DatasetManifest::load(p)?.scrub,
        None => Default::default(),
    };
    let scrubber = Scrubber::new(toggles);
    let mut records = read_dataset(input)?;
    let mut report = ScrubReport::default();
    for r in &mut records {
        let (text, rep) = scrubber.scrub(&r.narrative);
        r.narrative = text;
        report.merge(&rep);
    }
    write_dataset(output, &records)?;
    Ok(report)
}

/// Train/test partition by crash key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub test_fraction: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    /// Stratified on the coded label. Unlabelled records are left out.
    pub fn new(records: &[CrashRecord], test_fraction: f64, seed: u64) -> Result<Self> {
        let labelled: Vec<&CrashRecord> = records.iter().filter(|r| r.label.is_some()).collect();
        if labelled.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let labels: Vec<RoadTypeLabel> = labelled.iter().map(|r| r.label.expect("filtered")).collect();
        let (train, test) = stratified_split(&labels, test_fraction, seed);
        let keys = |idx: Vec<usize>| idx.into_iter().map(|i| labelled[i].crash_key.clone()).collect();
        Ok(Self { seed, test_fraction, train: keys(train), test: keys(test) })
    }

    pub fn partition(&self, records: &[CrashRecord]) -> (Vec<CrashRecord>, Vec<CrashRecord>) {
        let by_key: BTreeMap<&str, &CrashRecord> = records.iter().map(|r| (r.crash_key.as_str(), r)).collect();
        let pick = |keys: &[String]| keys.iter().filter_map(|k| by_key.get(k.as_str()).map(|r| (*r).clone())).collect();
        (pick(&self.train), pick(&self.test))
    }
}

/// The run's split; created from config on first use and reused after,
/// unless the stored one was made with other settings.
pub fn load_or_create_split(cfg: &RunConfig, records: &[CrashRecord]) -> Result<Split> {
    let path = Layout::new(cfg).split();
    if path.exists() {
        let s: Split = read_json(&path)?;
        if s.seed == cfg.seed && s.test_fraction == cfg.test_fraction {
            return Ok(s);
        }
    }
    let s = Split::new(records, cfg.test_fraction, cfg.seed)?;
    write_json(&path, &s)?;
    Ok(s)
}

fn load_records(layout: &Layout) -> Result<Vec<CrashRecord>> {
    require(&layout.dataset())?;
    read_dataset(&layout.dataset())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub name: String,
    pub model: ModelKind,
    pub n_train: usize,
    pub n_test: usize,
    pub test_accuracy: f64,
    pub artifact: PathBuf,
}

/// Trains on the training split, saves the artifact and writes test-split
/// predictions.
pub fn train(cfg: &RunConfig, model: ModelKind, name: &str) -> Result<TrainSummary> {
    valid_name(name)?;
    cfg.validate()?;
    let layout = Layout::new(cfg);
    let records = load_records(&layout)?;
    let split = load_or_create_split(cfg, &records)?;
    let (train_set, test_set) = split.partition(&records);
    let mut sys_cfg = cfg.system_for(model);
    if sys_cfg.pipeline.nodes.is_none() && layout.nodes().exists() {
        sys_cfg.pipeline.nodes = Some(layout.nodes());
    }
    let sys = train_system(&train_set, &sys_cfg)?;
    fs::create_dir_all(layout.models())?;
    sys.save(&layout.model(name))?;
    let preds = sys.predict(name, &test_set)?;
    fs::create_dir_all(layout.predictions_dir())?;
    write_predictions(&layout.predictions(name), &[&preds])?;
    let truth = coded_labels(&test_set);
    Ok(TrainSummary {
        name: name.to_string(),
        model,
        n_train: train_set.len(),
        n_test: test_set.len(),
        test_accuracy: eval_set(&preds, &truth)?.accuracy,
        artifact: layout.model(name),
    })
}

/// Predictions from a saved model on the test split, or on every record.
pub fn predict(cfg: &RunConfig, name: &str, all: bool, output: Option<&Path>) -> Result<PredictionSet> {
    valid_name(name)?;
    let layout = Layout::new(cfg);
    require(&layout.model(name))?;
    let sys = TrainedSystem::load(&layout.model(name))?;
    let records = load_records(&layout)?;
    let target = if all {
        records
    } else {
        let split = load_or_create_split(cfg, &records)?;
        split.partition(&records).1
    };
    let preds = sys.predict(name, &target)?;
    let path = output.map_or_else(|| layout.predictions(name), Path::to_path_buf);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    write_predictions(&path, &[&preds])?;
    Ok(preds)
}

pub fn coded_labels(records: &[CrashRecord]) -> BTreeMap<String, RoadTypeLabel> {
    records.iter().filter_map(|r| r.label.map(|l| (r.crash_key.clone(), l))).collect()
}

/// Every prediction file under `predictions/`, sorted by model name.
pub fn load_predictions(layout: &Layout) -> Result<Vec<PredictionSet>> {
    let dir = layout.predictions_dir();
    require(&dir)?;
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut sets: BTreeMap<String, PredictionSet> = BTreeMap::new();
    for f in files {
        for (name, set) in ingest_external_file(&f, None)?.sets {
            if sets.insert(name.clone(), set).is_some() {
                return Err(Error::DuplicateKey(format!("model {name} appears in more than one prediction file")));
            }
        }
    }
    if sets.is_empty() {
        return Err(Error::MissingInput(dir));
    }
    Ok(sets.into_values().collect())
}

/// Per-model metrics on the test split, written to `evaluation.json`.
pub fn evaluate(cfg: &RunConfig) -> Result<Vec<ModelAccuracy>> {
    let layout = Layout::new(cfg);
    let records = load_records(&layout)?;
    let split = load_or_create_split(cfg, &records)?;
    let truth = coded_labels(&split.partition(&records).1);
    let mut out = Vec::new();
    for p in load_predictions(&layout)? {
        let test_only = restrict(&p, &truth);
        out.push(ModelAccuracy { model: p.model.clone(), metrics: eval_set(&test_only, &truth)? });
    }
    write_json(&layout.evaluation(), &out)?;
    Ok(out)
}

fn restrict(p: &PredictionSet, keys: &BTreeMap<String, RoadTypeLabel>) -> PredictionSet {
    PredictionSet { model: p.model.clone(), entries: p.entries.iter().filter(|(k, _)| keys.contains_key(*k)).map(|(k, v)| (k.clone(), *v)).collect() }
}

/// Mitigation framework on the run's split for one model kind.
pub fn mitigation(cfg: &RunConfig, model: ModelKind) -> Result<MitigationReport> {
    let layout = Layout::new(cfg);
    let records = load_records(&layout)?;
    let split = load_or_create_split(cfg, &records)?;
    let (train_set, test_set) = split.partition(&records);
    let mut sys_cfg = cfg.system_for(model);
    if sys_cfg.pipeline.nodes.is_none() && layout.nodes().exists() {
        sys_cfg.pipeline.nodes = Some(layout.nodes());
    }
    let report = integrated_framework(&train_set, &test_set, &sys_cfg)?;
    write_json(&layout.mitigation(), &report)?;
    Ok(report)
}

/// A record at least one model disagrees with, with its ambiguity flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlaggedRecord {
    pub crash_key: String,
    pub coded: RoadTypeLabel,
    pub predictions: BTreeMap<String, RoadTypeLabel>,
    pub flags: AmbiguityFlags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditArtifact {
    pub models: Vec<AuditResult>,
    pub records: Vec<FlaggedRecord>,
}

/// Compares every model's predictions with the coded labels.
pub fn audit(cfg: &RunConfig) -> Result<AuditArtifact> {
    let layout = Layout::new(cfg);
    let records = load_records(&layout)?;
    let coded = coded_labels(&records);
    let preds = load_predictions(&layout)?;
    let lex = AmbiguityLexicons::load(&cfg.system.pipeline.lexicons)?;
    let models = preds.iter().map(|p| audit_set(p, &coded)).collect::<Result<Vec<_>>>()?;
    let flagged: BTreeSet<&str> = models.iter().flat_map(|m| m.flagged.iter().map(String::as_str)).collect();
    let by_key: BTreeMap<&str, &CrashRecord> = records.iter().map(|r| (r.crash_key.as_str(), r)).collect();
    let records = flagged
        .into_iter()
        .map(|k| FlaggedRecord {
            crash_key: k.to_string(),
            coded: coded[k],
            predictions: preds.iter().filter_map(|p| p.entries.get(k).map(|x| (p.model.clone(), x.label))).collect(),
            flags: detect_text(&by_key[k].narrative, &lex),
        })
        .collect();
    let out = AuditArtifact { models, records };
    write_json(&layout.audit(), &out)?;
    Ok(out)
}

/// Draws a review sample from audit disagreements and registers it with the
/// review store along with what its report needs.
pub fn sample(cfg: &RunConfig) -> Result<ReviewSample> {
    let layout = Layout::new(cfg);
    require(&layout.audit())?;
    let records = load_records(&layout)?;
    let coded = coded_labels(&records);
    let preds = load_predictions(&layout)?;
    let lex = AmbiguityLexicons::load(&cfg.system.pipeline.lexicons)?;
    let pool = disagreement_pool(&records, &preds, &coded, &lex);
    let s = build_sample(&pool, cfg.review.sample_size, cfg.seed)?;
    let store = ReviewStore::open(&layout.review())?;
    let s = (*store.add_sample(s)?).clone();
    let tabular = s.items.iter().filter_map(|i| coded.get(&i.crash_key).map(|l| (i.crash_key.clone(), *l))).collect();
    store.set_context(&s.sample_id, &ReportContext { predictions: preds, tabular })?;
    fs::write(layout.current_sample(), format!("{}\n", s.sample_id))?;
    Ok(s)
}

pub fn current_sample_id(layout: &Layout) -> Result<String> {
    require(&layout.current_sample())?;
    Ok(fs::read_to_string(layout.current_sample())?.trim().to_string())
}

/// Paired comparisons between every pair of models on the test split.
pub fn compare(cfg: &RunConfig) -> Result<ComparisonReport> {
    let layout = Layout::new(cfg);
    let records = load_records(&layout)?;
    let split = load_or_create_split(cfg, &records)?;
    let test = split.partition(&records).1;
    let truth = coded_labels(&test);
    let preds: Vec<PredictionSet> = load_predictions(&layout)?.iter().map(|p| restrict(p, &truth)).collect();
    if preds.len() < 2 {
        return Err(Error::Config(format!("comparison needs at least two models, found {}", preds.len())));
    }
    let lex = AmbiguityLexicons::load(&cfg.system.pipeline.lexicons)?;
    let patterns = Mitigations::load(&MitigationConfig { enabled: MitigationKind::ALL.into_iter().collect(), ..cfg.system.pipeline.mitigations.clone() })?;
    let classifier = ErrorClassifier { lexicons: &lex, mitigations: &patterns };
    let flags: BTreeMap<&str, AmbiguityFlags> = test.iter().map(|r| (r.crash_key.as_str(), detect_text(&r.narrative, &lex))).collect();
    let strata: BTreeMap<String, AmbiguityCategory> = flags.iter().map(|(k, f)| (k.to_string(), f.primary())).collect();
    let errors = |p: &PredictionSet| -> Vec<ErrorCategory> {
        test.iter()
            .filter_map(|r| {
                let pred = p.entries.get(&r.crash_key)?.label;
                classifier.categorize(&r.narrative, pred, truth[&r.crash_key], &flags[r.crash_key.as_str()])
            })
            .collect()
    };
    let alpha = cfg.stats.alpha;
    let mut out = ComparisonReport { alpha, mcnemar: Vec::new(), paired_bootstrap: Vec::new(), stratified_mcnemar: Vec::new(), error_distribution: Vec::new() };
    for (i, a) in preds.iter().enumerate() {
        for b in &preds[i + 1..] {
            out.mcnemar.push(mcnemar(a, b, &truth, alpha)?);
            for m in &cfg.stats.metrics {
                out.paired_bootstrap.push(bootstrap_paired_ttest(a, b, &truth, *m, cfg.stats.resamples, cfg.seed)?);
            }
            out.stratified_mcnemar.push(StratifiedComparison {
                model_a: a.model.clone(),
                model_b: b.model.clone(),
                strata: mcnemar_stratified(a, b, &truth, &strata, alpha, MIN_STRATUM)?,
            });
            let (ea, eb) = (errors(a), errors(b));
            if ea.is_empty() && eb.is_empty() {
                continue;
            }
            out.error_distribution.push(chi_square_error_dist(&a.model, &ea, &b.model, &eb)?);
        }
    }
    write_json(&layout.comparison(), &out)?;
    Ok(out)
}

/// Assembles every available section into `reports/`. The audit is
/// required; evaluation, review, comparison and mitigation are optional.
pub fn report(cfg: &RunConfig) -> Result<AuditReport> {
    let layout = Layout::new(cfg);
    let audit: AuditArtifact = read_json(&layout.audit())?;
    let model_accuracy: Vec<ModelAccuracy> = if layout.evaluation().exists() { read_json(&layout.evaluation())? } else { Vec::new() };
    let accuracy_intervals = model_accuracy.iter().map(|m| accuracy_interval(&m.model, &m.metrics, cfg.stats.z)).collect::<Result<Vec<_>>>()?;
    let review = if layout.current_sample().exists() {
        let id = current_sample_id(&layout)?;
        let store = ReviewStore::open(&layout.review())?;
        let ctx = store.context(&id)?;
        let opts = ReportOptions { include_incomplete: cfg.review.include_incomplete, answer: Answer::Final, groups: Vec::new(), z: cfg.stats.z };
        Some(session_report(&store, &id, &ctx, &opts)?)
    } else {
        None
    };
    if let Some(r) = &review {
        let store = ReviewStore::open(&layout.review())?;
        let (m, _) = store.ratings(&r.sample_id, cfg.review.include_incomplete, Answer::Final)?;
        fs::create_dir_all(layout.reports())?;
        write_ratings(fs::File::create(layout.reports().join("ratings.csv"))?, &m.rows())?;
    }
    let comparison = if layout.comparison().exists() { Some(read_json(&layout.comparison())?) } else { None };
    let mitigation = if layout.mitigation().exists() { Some(read_json(&layout.mitigation())?) } else { None };
    let r = AuditReport { potentially_misclassified: audit.models, model_accuracy, accuracy_intervals, review, comparison, mitigation };
    r.write(&layout.reports())?;
    Ok(r)
}

/// Agreement among the raters of a ratings file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub raters: Vec<String>,
    pub n_items: usize,
    pub pairwise_agreement: PairwiseMatrix,
    pub kappa_matrix: KappaMatrix,
    pub fleiss_groups: Vec<FleissRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_difference: Option<KappaDiff>,
}

/// Percent agreement and κ for every rater pair, Fleiss' κ per group
/// (everyone when no groups are given) and, for exactly two groups, the
/// bootstrap test of their κ difference.
pub fn agreement(m: &RatingMatrix, groups: &[RaterGroup], resamples: usize, seed: u64) -> Result<AgreementReport> {
    let raters = m.raters.clone();
    let percent = raters.iter().map(|a| raters.iter().map(|b| percent_agreement(m, a, b).ok().map(|p| 100.0 * p)).collect()).collect();
    let kappa = raters.iter().map(|a| raters.iter().map(|b| cohens_kappa(m, a, b).ok().map(|r| r.kappa)).collect()).collect();
    let groups = if groups.is_empty() { vec![RaterGroup { name: "all".into(), raters: raters.clone() }] } else { groups.to_vec() };
    for g in &groups {
        for r in &g.raters {
            m.rater_index(r)?;
        }
    }
    let kappa_difference = match groups.as_slice() {
        [a, b] => Some(kappa_diff_bootstrap(m, &a.raters, &b.raters, resamples, seed)?),
        _ => None,
    };
    Ok(AgreementReport {
        n_items: m.items.len(),
        pairwise_agreement: PairwiseMatrix { raters: raters.clone(), percent },
        kappa_matrix: KappaMatrix { rows: raters.clone(), columns: raters.clone(), kappa },
        fleiss_groups: fleiss_rows(m, &groups),
        raters,
        kappa_difference,
    })
}

/// Reads a `CRASH_KEY,RATER,LABEL` file and writes `agreement.json` and
/// `agreement.txt` under `reports/`.
pub fn agree(cfg: &RunConfig, ratings: &Path, groups: &[RaterGroup]) -> Result<AgreementReport> {
    let f = fs::File::open(ratings).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(ratings.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let m = RatingMatrix::from_rows(&read_ratings(f)?)?;
    let r = agreement(&m, groups, cfg.stats.resamples, cfg.seed)?;
    let layout = Layout::new(cfg);
    write_json(&layout.reports().join("agreement.json"), &r)?;
    fs::write(layout.reports().join("agreement.txt"), crate::report::render_agreement(&r))?;
    Ok(r)
}
