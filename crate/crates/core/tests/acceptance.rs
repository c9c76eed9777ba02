//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances are pinned below.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use narrative_audit::agreement::{cohens_kappa, fleiss_kappa, RaterLabel, RatingMatrix};
use narrative_audit::corpus::{generate_synthetic, RoadTypeLabel, SynthCategory, SyntheticCorpus, SyntheticSpec};
use narrative_audit::erroranalysis::{MitigationConfig, MitigationKind};
use narrative_audit::fusion::FusionMode;
use narrative_audit::models::{ClassifierModel, ModelKind, Prediction, PredictionSet};
use narrative_audit::stattests::{chi_square_homogeneity, mcnemar, wilson_interval};
use narrative_audit::system::{train_system, SystemConfig};
use narrative_audit::textpipe::NgramRange;
use narrative_audit::workflow::{Layout, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KAPPA_TOL: f64 = 1e-12;
const FLEISS_FIXTURE: (f64, f64) = (0.550, 1e-3);
const MCNEMAR_CHI: (f64, f64) = (5.3333, 1e-4);
const MCNEMAR_P: (f64, f64) = (0.0209, 1e-3);
const MCNEMAR_G: (f64, f64) = (0.3333, 1e-4);
const WILSON_50_100: (f64, f64, f64) = (0.4038, 0.5962, 5e-4);
const STATS_BUDGET: Duration = Duration::from_secs(30);

const SANITY_N: usize = 2000;
const SANITY_SEED: u64 = 42;
const MIN_ACCURACY: f64 = 0.90;
const FEASIBILITY_TOL: f64 = 1e-3;
const SANITY_BUDGET: Duration = Duration::from_secs(120);

const DIRECTION_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const BIGRAM_MARGIN: f64 = 0.01;
const AWARE_MARGIN: f64 = 0.02;

const FALSE_ALARM_TRIALS: usize = 1000;
const FALSE_ALARM_ITEMS: usize = 400;
const FALSE_ALARM_NOISE: f64 = 0.10;
const FALSE_ALARM_BAND: (f64, f64) = (0.03, 0.07);

const E2E_RECORDS: usize = 2000;
const E2E_SAMPLE: usize = 100;
const E2E_BUDGET: Duration = Duration::from_secs(300);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn close(x: f64, want: f64, tol: f64) -> bool {
    (x - want).abs() <= tol
}

const LABELS: [RaterLabel; 3] = [RaterLabel::Intersection, RaterLabel::NonIntersection, RaterLabel::Indeterminate];

fn matrix(columns: &[&[RaterLabel]]) -> RatingMatrix {
    let n = columns[0].len();
    let items = (0..n).map(|i| format!("K{i:04}")).collect();
    let raters = (0..columns.len()).map(|j| format!("r{j}")).collect();
    let cells = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    RatingMatrix::new(items, raters, cells).unwrap()
}

/// Cohen's κ straight from the label arrays.
fn oracle_cohen(a: &[RaterLabel], b: &[RaterLabel]) -> Option<f64> {
    let n = a.len() as f64;
    let p0 = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let share = |v: &[RaterLabel], l: RaterLabel| v.iter().filter(|x| **x == l).count() as f64 / n;
    let pe: f64 = LABELS.iter().map(|&l| share(a, l) * share(b, l)).sum();
    (pe < 1.0).then(|| (p0 - pe) / (1.0 - pe))
}

/// Fleiss' κ from per-item category counts.
fn oracle_fleiss(counts: &[[f64; 2]]) -> f64 {
    let m: f64 = counts[0].iter().sum();
    let n = counts.len() as f64;
    let p_bar = counts.iter().map(|c| (c.iter().map(|x| x * x).sum::<f64>() - m) / (m * (m - 1.0))).sum::<f64>() / n;
    let pe: f64 = (0..2).map(|j| (counts.iter().map(|c| c[j]).sum::<f64>() / (n * m)).powi(2)).sum();
    (p_bar - pe) / (1.0 - pe)
}

fn pair_sets(b: usize, c: usize, both: usize) -> (PredictionSet, PredictionSet, BTreeMap<String, RoadTypeLabel>) {
    let mut pa = PredictionSet::new("a");
    let mut pb = PredictionSet::new("b");
    let mut truth = BTreeMap::new();
    let rows = std::iter::repeat_n((true, false), b).chain(std::iter::repeat_n((false, true), c)).chain(std::iter::repeat_n((true, true), both));
    for (i, (x, y)) in rows.enumerate() {
        let k = format!("K{i:04}");
        truth.insert(k.clone(), RoadTypeLabel::Intersection);
        pa.entries.insert(k.clone(), Prediction { label: RoadTypeLabel::from_bool(x), probability: 0.5 });
        pb.entries.insert(k, Prediction { label: RoadTypeLabel::from_bool(y), probability: 0.5 });
    }
    (pa, pb, truth)
}

fn stats_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let (mut worst, mut defined, mut mismatched) = (0.0f64, 0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(5..150);
        let a: Vec<RaterLabel> = (0..n).map(|_| LABELS[rng.random_range(0..3)]).collect();
        let b: Vec<RaterLabel> = a.iter().map(|x| if rng.random_bool(0.5) { *x } else { LABELS[rng.random_range(0..3)] }).collect();
        match (oracle_cohen(&a, &b), cohens_kappa(&matrix(&[&a, &b]), "r0", "r1")) {
            (Some(k), Ok(r)) => {
                worst = worst.max((k - r.kappa).abs());
                defined += 1;
            }
            (None, Err(_)) => {}
            _ => mismatched += 1,
        }
    }
    let cohen_ok = worst <= KAPPA_TOL && mismatched == 0 && defined > 0;

    use RaterLabel::{Intersection as I, NonIntersection as N};
    let fm = matrix(&[&[I, N, I], &[I, N, I], &[I, N, N]]);
    let fleiss = fleiss_kappa(&fm, &fm.raters).unwrap().kappa;
    let fleiss_oracle = oracle_fleiss(&[[3.0, 0.0], [0.0, 3.0], [2.0, 1.0]]);
    let fleiss_ok = close(fleiss, FLEISS_FIXTURE.0, FLEISS_FIXTURE.1) && close(fleiss, fleiss_oracle, KAPPA_TOL);

    let (pa, pb, truth) = pair_sets(10, 2, 30);
    let mc = mcnemar(&pa, &pb, &truth, 0.05).unwrap();
    let mc_ok = close(mc.chi_square, MCNEMAR_CHI.0, MCNEMAR_CHI.1)
        && close(mc.p_value, MCNEMAR_P.0, MCNEMAR_P.1)
        && close(mc.effect_size_g, MCNEMAR_G.0, MCNEMAR_G.1)
        && close(mc.chi_square, 64.0 / 12.0, 1e-12);

    let w = wilson_interval(50, 100, 1.96).unwrap();
    let wilson_ok = close(w.lower, WILSON_50_100.0, WILSON_50_100.2) && close(w.upper, WILSON_50_100.1, WILSON_50_100.2);

    let row = vec![12.0, 7.0, 3.0, 9.0, 4.0];
    let names = |p: &str, k: usize| (0..k).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let cs = chi_square_homogeneity(&names("m", 2), &names("c", 5), &[row.clone(), row]).unwrap();
    let chi_ok = cs.dof == 4 && cs.cramers_v.abs() < 1e-12;

    let elapsed = start.elapsed();
    let pass = cohen_ok && fleiss_ok && mc_ok && wilson_ok && chi_ok && elapsed < STATS_BUDGET;
    outcome(
        pass,
        format!(
            "cohen max|Δ|={worst:.1e} over {defined} matrices; fleiss={fleiss:.4}; mcnemar chi2={:.4} p={:.4} g={:.4}; wilson=[{:.4}, {:.4}]; 2x5 dof={} V={:.1e}; {:.2}s",
            mc.chi_square,
            mc.p_value,
            mc.effect_size_g,
            w.lower,
            w.upper,
            cs.dof,
            cs.cramers_v,
            elapsed.as_secs_f64()
        ),
    )
}

fn split_corpus(corpus: &SyntheticCorpus, seed: u64) -> (Vec<narrative_audit::corpus::CrashRecord>, Vec<narrative_audit::corpus::CrashRecord>) {
    let records = corpus.crash_records();
    Split::new(&records, 0.3, seed).unwrap().partition(&records)
}

fn accuracy(p: &PredictionSet, test: &[narrative_audit::corpus::CrashRecord]) -> f64 {
    test.iter().filter(|r| Some(p.entries[&r.crash_key].label) == r.label).count() as f64 / test.len() as f64
}

fn classifier_sanity() -> Outcome {
    let start = Instant::now();
    let corpus = generate_synthetic(&SyntheticSpec::new(SANITY_N, 0.5, 0.2, SANITY_SEED)).unwrap();
    let (train, test) = split_corpus(&corpus, SANITY_SEED);
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [ModelKind::Svm, ModelKind::Gbdt] {
        let cfg = SystemConfig { model: kind, ..Default::default() };
        let sys = train_system(&train, &cfg).unwrap();
        let acc = accuracy(&sys.predict(kind.as_str(), &test).unwrap(), &test);
        pass &= acc >= MIN_ACCURACY;
        parts.push(format!("{} acc={:.4}", kind.as_str(), acc));
        match &sys.model {
            ClassifierModel::Svm(m) => match m.dual_summary() {
                Some((alpha, sum)) => {
                    let c = cfg.svm.c;
                    let in_box = alpha.iter().all(|a| *a >= 0.0 && *a <= c + 1e-9);
                    pass &= in_box && sum.abs() < FEASIBILITY_TOL;
                    parts.push(format!("0<=alpha<=C {in_box} |sum alpha y|={:.1e}", sum.abs()));
                }
                None => {
                    pass = false;
                    parts.push("svm trained in the primal".into());
                }
            },
            ClassifierModel::Gbdt(m) => {
                let rises = m.train_loss.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();
                pass &= rises == 0 && m.train_loss.len() > 1;
                parts.push(format!("gbdt loss {:.4}->{:.4} rises={rises}", m.train_loss[0], m.train_loss.last().unwrap()));
            }
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < SANITY_BUDGET;
    parts.push(format!("{:.1}s", elapsed.as_secs_f64()));
    outcome(pass, parts.join("; "))
}

#[derive(Default)]
struct Tally {
    right: f64,
    n: f64,
    amb_right: f64,
    amb_n: f64,
    prox_errors: usize,
}

impl Tally {
    fn acc(&self) -> f64 {
        self.right / self.n
    }
    fn amb(&self) -> f64 {
        self.amb_right / self.amb_n
    }
}

/// Every variant scored against the generator's truth, pooled over both
/// models and all seeds.
fn directional() -> Outcome {
    let variants = ["bigram", "trigram", "aware", "early", "late", "hybrid", "mitigated"];
    let mut tally: BTreeMap<&str, Tally> = BTreeMap::new();
    for seed in DIRECTION_SEEDS {
        let corpus = generate_synthetic(&SyntheticSpec::new(SANITY_N, 0.5, 0.2, seed)).unwrap();
        let (train, test) = split_corpus(&corpus, seed);
        let info: BTreeMap<&str, (RoadTypeLabel, SynthCategory)> =
            corpus.records.iter().map(|r| (r.record.crash_key.as_str(), (r.truth, r.category))).collect();
        for kind in [ModelKind::Svm, ModelKind::Gbdt] {
            let mut base = SystemConfig { model: kind, ..Default::default() };
            base.pipeline.node_inventory = Some(corpus.nodes.clone());
            for v in variants {
                let mut cfg = base.clone();
                match v {
                    "trigram" => cfg.pipeline.vocabulary.ngram_range = NgramRange::TRIGRAM,
                    "aware" => cfg.pipeline.ambiguity_aware = true,
                    "early" => cfg.pipeline.fusion.mode = FusionMode::Early,
                    "late" => cfg.pipeline.fusion.mode = FusionMode::Late,
                    "hybrid" => cfg.pipeline.fusion.mode = FusionMode::Hybrid,
                    "mitigated" => cfg.pipeline.mitigations = MitigationConfig::with(MitigationKind::ALL),
                    _ => {}
                }
                let p = train_system(&train, &cfg).unwrap().predict(v, &test).unwrap();
                let t = tally.entry(v).or_default();
                for r in &test {
                    let (truth, cat) = info[r.crash_key.as_str()];
                    let right = p.entries[&r.crash_key].label == truth;
                    t.right += right as u8 as f64;
                    t.n += 1.0;
                    if cat != SynthCategory::Clear {
                        t.amb_right += right as u8 as f64;
                        t.amb_n += 1.0;
                    }
                    if cat == SynthCategory::Proximity && !right {
                        t.prox_errors += 1;
                    }
                }
            }
        }
    }
    let base = &tally["bigram"];
    let bigram_ok = base.acc() >= tally["trigram"].acc() + BIGRAM_MARGIN;
    let aware_ok = tally["aware"].amb() >= base.amb() + AWARE_MARGIN;
    let fusion_ok = ["early", "late", "hybrid"].iter().all(|m| tally[m].acc() >= base.acc());
    let mitig_ok = tally["mitigated"].prox_errors < base.prox_errors;
    outcome(
        bigram_ok && aware_ok && fusion_ok && mitig_ok,
        format!(
            "bigram {:.4} vs trigram {:.4}; ambiguous aware {:.4} vs {:.4}; early/late/hybrid {:.4}/{:.4}/{:.4} vs {:.4}; proximity errors {} -> {}",
            base.acc(),
            tally["trigram"].acc(),
            tally["aware"].amb(),
            base.amb(),
            tally["early"].acc(),
            tally["late"].acc(),
            tally["hybrid"].acc(),
            base.acc(),
            base.prox_errors,
            tally["mitigated"].prox_errors
        ),
    )
}

/// Two models of equal skill judged against noisy coded labels.
fn false_alarm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0fa1);
    let mut rejections = 0;
    for _ in 0..FALSE_ALARM_TRIALS {
        let mut pa = PredictionSet::new("a");
        let mut pb = PredictionSet::new("b");
        let mut coded = BTreeMap::new();
        for i in 0..FALSE_ALARM_ITEMS {
            let k = format!("K{i:04}");
            let truth = RoadTypeLabel::from_bool(rng.random_bool(0.5));
            let flip = |l: RoadTypeLabel, p: f64, rng: &mut ChaCha8Rng| if rng.random_bool(p) { RoadTypeLabel::from_bool(l != RoadTypeLabel::Intersection) } else { l };
            coded.insert(k.clone(), flip(truth, FALSE_ALARM_NOISE, &mut rng));
            pa.entries.insert(k.clone(), Prediction { label: flip(truth, 0.1, &mut rng), probability: 0.5 });
            pb.entries.insert(k, Prediction { label: flip(truth, 0.1, &mut rng), probability: 0.5 });
        }
        if mcnemar(&pa, &pb, &coded, 0.05).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / FALSE_ALARM_TRIALS as f64;
    outcome(
        (FALSE_ALARM_BAND.0..=FALSE_ALARM_BAND.1).contains(&rate),
        format!("{rejections}/{FALSE_ALARM_TRIALS} rejections at alpha=0.05 ({:.1}%)", 100.0 * rate),
    )
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

const TABLE_FILES: [&str; 11] = [
    "potentially_misclassified.txt",
    "model_accuracy.txt",
    "accuracy_intervals.txt",
    "tabular_agreement.txt",
    "pairwise_agreement.txt",
    "kappa_matrix.txt",
    "fleiss_groups.txt",
    "mcnemar.txt",
    "paired_bootstrap.txt",
    "stratified_mcnemar.txt",
    "error_distribution.txt",
];

fn end_to_end(served: &mut Vec<serde_json::Value>) -> Outcome {
    let start = Instant::now();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut files = Vec::new();
    let mut items = 0;
    for d in &dirs {
        let mut cfg = common::config(d.path(), E2E_RECORDS);
        cfg.synth.label_noise = 0.1;
        cfg.review.sample_size = E2E_SAMPLE;
        let (report, payloads) = rt.block_on(common::full_run(&cfg, true));
        items = report.review.as_ref().map_or(0, |r| r.n_items);
        *served = payloads;
        files.push(read_dir_bytes(&Layout::new(&cfg).reports()));
    }
    let missing: Vec<&str> = TABLE_FILES.iter().copied().filter(|f| !files[0].contains_key(*f)).collect();
    let identical = files[0] == files[1];
    let elapsed = start.elapsed();
    outcome(
        missing.is_empty() && identical && items == E2E_SAMPLE && elapsed < E2E_BUDGET,
        format!(
            "{} report files, byte-identical {identical}, missing {missing:?}, {items} reviewed items, {:.1}s for two runs",
            files[0].len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn blinding(served: &[serde_json::Value]) -> Outcome {
    let v = common::blinding_violations(served, &["svm", "gbdt", "tabular"]);
    outcome(!served.is_empty() && v.is_empty(), format!("{} payloads checked, violations {v:?}", served.len()))
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    let mut served = Vec::new();
    let results = [
        run("statistics oracles", stats_oracles),
        run("classifier sanity", classifier_sanity),
        run("directional checks", directional),
        run("mcnemar false alarm rate", false_alarm),
        run("end-to-end audit", || end_to_end(&mut served)),
        run("review blinding", || blinding(&served)),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
