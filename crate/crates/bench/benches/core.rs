use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use narrative_audit::agreement::{cohens_kappa, fleiss_kappa, RaterLabel, RatingMatrix};
use narrative_audit::corpus::{generate_synthetic, RoadTypeLabel, SyntheticSpec};
use narrative_audit::models::{Prediction, PredictionSet};
use narrative_audit::pipeline::{PipelineConfig, TextPipeline};
use narrative_audit::stattests::{bootstrap_paired_ttest, mcnemar, Metric};
use narrative_audit::system::{train_system, SystemConfig};
use narrative_audit::models::ModelKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LABELS: [RaterLabel; 3] = [RaterLabel::Intersection, RaterLabel::NonIntersection, RaterLabel::Indeterminate];

fn ratings(items: usize, raters: usize) -> RatingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cells = (0..items).map(|_| (0..raters).map(|_| LABELS[rng.random_range(0..3)]).collect()).collect();
    RatingMatrix::new((0..items).map(|i| format!("K{i:05}")).collect(), (0..raters).map(|j| format!("r{j}")).collect(), cells).unwrap()
}

fn agreement(c: &mut Criterion) {
    let m = ratings(1000, 6);
    c.bench_function("cohens_kappa 1000 items", |b| b.iter(|| cohens_kappa(black_box(&m), "r0", "r1").unwrap()));
    c.bench_function("fleiss_kappa 1000 items x 6 raters", |b| b.iter(|| fleiss_kappa(black_box(&m), &m.raters).unwrap()));
}

fn paired(n: usize) -> (PredictionSet, PredictionSet, BTreeMap<String, RoadTypeLabel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut a, mut b, mut truth) = (PredictionSet::new("a"), PredictionSet::new("b"), BTreeMap::new());
    for i in 0..n {
        let k = format!("K{i:05}");
        truth.insert(k.clone(), RoadTypeLabel::from_bool(rng.random_bool(0.5)));
        a.entries.insert(k.clone(), Prediction { label: RoadTypeLabel::from_bool(rng.random_bool(0.5)), probability: rng.random() });
        b.entries.insert(k, Prediction { label: RoadTypeLabel::from_bool(rng.random_bool(0.5)), probability: rng.random() });
    }
    (a, b, truth)
}

fn tests(c: &mut Criterion) {
    let (a, b, truth) = paired(2000);
    c.bench_function("mcnemar 2000 items", |bn| bn.iter(|| mcnemar(black_box(&a), &b, &truth, 0.05).unwrap()));
    c.bench_function("paired bootstrap F1 200 resamples", |bn| {
        bn.iter(|| bootstrap_paired_ttest(black_box(&a), &b, &truth, Metric::F1, 200, 1).unwrap())
    });
}

fn models(c: &mut Criterion) {
    let records = generate_synthetic(&SyntheticSpec::new(600, 0.5, 0.2, 9)).unwrap().crash_records();
    let cfg = PipelineConfig::default();
    c.bench_function("tfidf fit+transform 600 narratives", |b| {
        b.iter(|| TextPipeline::fit(black_box(&records), &cfg).unwrap().transform_all(&records))
    });
    let mut g = c.benchmark_group("train 600 records");
    g.sample_size(10);
    for kind in [ModelKind::Svm, ModelKind::Gbdt] {
        let sys = SystemConfig { model: kind, ..Default::default() };
        g.bench_function(kind.as_str(), |b| b.iter(|| train_system(black_box(&records), &sys).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, agreement, tests, models);
criterion_main!(benches);
