//! End-to-end runs through the workflow functions.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use narrative_audit::agreement::{write_ratings, RaterLabel, RatingRow};
use narrative_audit::erroranalysis::{default_systems, ErrorCategory};
use narrative_audit::models::ModelKind;
use narrative_audit::review::RaterGroup;
use narrative_audit::workflow::{self, Layout};
use narrative_audit::Error;

fn report_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn full_run_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ca, cb) = (common::config(a.path(), 400), common::config(b.path(), 400));
    let (ra, served) = common::full_run(&ca, false).await;
    let (rb, _) = common::full_run(&cb, false).await;
    assert_eq!(common::blinding_violations(&served, &["svm", "gbdt"]), Vec::<String>::new());
    assert_eq!(ra, rb);

    let names: Vec<&str> = ra.potentially_misclassified.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(names, ["gbdt", "svm"]);
    let review = ra.review.as_ref().unwrap();
    assert_eq!(review.experts, ["alice", "bob", "carol"]);
    let alice = review.tabular_agreement.iter().find(|r| r.rater == "alice").unwrap();
    assert_eq!((alice.agree, alice.percent), (alice.n, 100.0));
    assert!(review.fleiss_groups.iter().any(|g| g.group == "experts" && g.kappa.is_some()));
    let cmp = ra.comparison.as_ref().unwrap();
    assert_eq!(cmp.mcnemar.len(), 1);
    assert_eq!(cmp.paired_bootstrap.len(), 2);

    let (fa, fb) = (report_files(&Layout::new(&ca).reports()), report_files(&Layout::new(&cb).reports()));
    for name in ["report.json", "report.txt", "ratings.csv", "potentially_misclassified.txt", "kappa_matrix.txt", "mcnemar.txt"] {
        assert!(fa.contains_key(name), "missing {name}");
    }
    assert_eq!(fa, fb);
}

#[test]
fn report_needs_an_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::config(dir.path(), 200);
    match workflow::report(&cfg) {
        Err(Error::MissingInput(p)) => assert!(p.ends_with("audit.json")),
        other => panic!("expected missing input, got {other:?}"),
    }
    assert!(matches!(workflow::train(&cfg, ModelKind::Svm, "svm"), Err(Error::MissingInput(_))));
}

#[test]
fn mitigation_rows_against_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::config(dir.path(), 400);
    workflow::synth(&cfg).unwrap();
    let r = workflow::mitigation(&cfg, ModelKind::Gbdt).unwrap();
    let systems: Vec<String> = default_systems().into_iter().map(|(n, _)| n).collect();
    let rows: Vec<String> = r.rows.iter().map(|x| x.system.clone()).collect();
    assert_eq!(rows, systems);
    assert_eq!(rows.last().unwrap(), "combined");
    let total: usize = r.baseline_categories.values().sum();
    assert_eq!(total, r.baseline_errors);
    for row in &r.rows {
        assert!((row.delta - (row.error_rate - r.baseline_error_rate)).abs() < 1e-12);
        assert_eq!(row.categories.len(), ErrorCategory::ALL.len());
    }
    assert!(Layout::new(&cfg).mitigation().exists());
}

#[test]
fn empty_mitigation_set_matches_baseline() {
    use narrative_audit::erroranalysis::integrated_framework_with;
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::config(dir.path(), 300);
    workflow::synth(&cfg).unwrap();
    let records = narrative_audit::corpus::read_dataset(&Layout::new(&cfg).dataset()).unwrap();
    let split = workflow::Split::new(&records, cfg.test_fraction, cfg.seed).unwrap();
    let (train, test) = split.partition(&records);
    let r = integrated_framework_with(&train, &test, &cfg.system_for(ModelKind::Svm), &[("none".into(), Default::default())]).unwrap();
    assert_eq!(r.rows[0].errors, r.baseline_errors);
    assert_eq!(r.rows[0].delta, 0.0);
    assert!(r.rows[0].categories.iter().all(|c| c.delta == 0));
}

#[test]
fn agree_on_a_ratings_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::config(dir.path(), 200);
    let labels = ["I", "NI", "U"];
    let mut rows = Vec::new();
    for i in 0..40 {
        for (j, rater) in ["a", "b", "c", "d"].into_iter().enumerate() {
            let l = if j >= 2 && i % 5 == 0 { labels[(i / 5 + j) % 3] } else { labels[i % 2] };
            rows.push(RatingRow { crash_key: format!("K{i:03}"), rater: rater.into(), label: RaterLabel::parse(l).unwrap() });
        }
    }
    let path = dir.path().join("ratings.csv");
    write_ratings(fs::File::create(&path).unwrap(), &rows).unwrap();
    let groups =
        vec![RaterGroup { name: "first".into(), raters: vec!["a".into(), "b".into()] }, RaterGroup { name: "second".into(), raters: vec!["c".into(), "d".into()] }];
    let r = workflow::agree(&cfg, &path, &groups).unwrap();
    assert_eq!(r.n_items, 40);
    assert_eq!(r.pairwise_agreement.percent[0][1], Some(100.0));
    assert_eq!(r.fleiss_groups[0].kappa, Some(1.0));
    let d = r.kappa_difference.as_ref().unwrap();
    assert!(d.delta > 0.0);
    let txt = fs::read_to_string(Layout::new(&cfg).reports().join("agreement.txt")).unwrap();
    assert!(txt.contains("Fleiss' kappa by rater group"));
    assert!(matches!(workflow::agree(&cfg, &dir.path().join("nope.csv"), &[]), Err(Error::MissingInput(_))));
}
