//! Agreement and hypothesis-test routines checked against direct formula
//! evaluation, frozen reference values, and randomized properties.

use std::collections::BTreeMap;

use narrative_audit::agreement::{cohens_kappa, fleiss_kappa, RaterLabel, RatingMatrix};
use narrative_audit::corpus::RoadTypeLabel;
use narrative_audit::models::{Prediction, PredictionSet};
use narrative_audit::stattests::{chi_square_sf, mcnemar, mcnemar_counts, wilson_interval, EXACT_BELOW};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LABELS: [RaterLabel; 3] = [RaterLabel::Intersection, RaterLabel::NonIntersection, RaterLabel::Indeterminate];

fn two_rater(a: &[RaterLabel], b: &[RaterLabel]) -> RatingMatrix {
    let items = (0..a.len()).map(|i| format!("K{i:04}")).collect();
    let cells = a.iter().zip(b).map(|(x, y)| vec![*x, *y]).collect();
    RatingMatrix::new(items, vec!["a".into(), "b".into()], cells).unwrap()
}

/// κ = (P0 − Pe)/(1 − Pe) written out over the raw label arrays.
fn direct_kappa(a: &[RaterLabel], b: &[RaterLabel]) -> Option<f64> {
    let n = a.len() as f64;
    let p0 = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let share = |v: &[RaterLabel], l: RaterLabel| v.iter().filter(|x| **x == l).count() as f64 / n;
    let pe: f64 = LABELS.iter().map(|&l| share(a, l) * share(b, l)).sum();
    (pe < 1.0).then(|| (p0 - pe) / (1.0 - pe))
}

#[test]
fn cohen_matches_direct_evaluation_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let mut checked = 0;
    for _ in 0..1000 {
        let n = rng.random_range(5..120);
        let skew: f64 = rng.random_range(0.0..1.0);
        let draw = |rng: &mut ChaCha8Rng| {
            let u: f64 = rng.random();
            if u < skew { LABELS[0] } else if u < 0.5 + skew / 2.0 { LABELS[1] } else { LABELS[2] }
        };
        let a: Vec<RaterLabel> = (0..n).map(|_| draw(&mut rng)).collect();
        let b: Vec<RaterLabel> = a.iter().map(|x| if rng.random_bool(0.6) { *x } else { draw(&mut rng) }).collect();
        let m = two_rater(&a, &b);
        match (direct_kappa(&a, &b), cohens_kappa(&m, "a", "b")) {
            (Some(k), Ok(r)) => {
                assert!((k - r.kappa).abs() < 1e-12, "{k} vs {}", r.kappa);
                checked += 1;
            }
            (None, Err(_)) => {}
            (k, r) => panic!("disagree on definedness: {k:?} {r:?}"),
        }
    }
    assert!(checked > 900);
}

/// With two raters Fleiss' κ equals Scott's π: pooled marginals for chance.
#[test]
fn fleiss_two_raters_equals_scott_pi() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let group = vec!["a".to_string(), "b".to_string()];
    for _ in 0..100 {
        let n = rng.random_range(10..80);
        let a: Vec<RaterLabel> = (0..n).map(|_| LABELS[rng.random_range(0..3)]).collect();
        let b: Vec<RaterLabel> = a.iter().map(|x| if rng.random_bool(0.5) { *x } else { LABELS[rng.random_range(0..3)] }).collect();
        let nf = n as f64;
        let p0 = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / nf;
        let pooled = |l: RaterLabel| (a.iter().chain(&b).filter(|x| **x == l).count()) as f64 / (2.0 * nf);
        let pe: f64 = LABELS.iter().map(|&l| pooled(l).powi(2)).sum();
        let pi = (p0 - pe) / (1.0 - pe);
        let r = fleiss_kappa(&two_rater(&a, &b), &group).unwrap();
        assert!((r.kappa - pi).abs() < 1e-12, "{} vs {pi}", r.kappa);
    }
}

/// Upper-tail chi-square probabilities from a 50-digit incomplete-gamma
/// evaluation, at x = 0.1, 0.5, 1, 2.5, 5, 10, 20.
const CHI_X: [f64; 7] = [0.1, 0.5, 1.0, 2.5, 5.0, 10.0, 20.0];
const CHI_SF: [[f64; 7]; 10] = [
    [0.7518296340458492, 0.4795001221869535, 0.3173105078629141, 0.11384629800665805, 0.025347318677468263, 0.0015654022580025497, 7.744216431044084e-06],
    [0.951229424500714, 0.7788007830714049, 0.6065306597126334, 0.2865047968601901, 0.0820849986238988, 0.006737946999085467, 4.5399929762484854e-05],
    [0.9918374237318764, 0.9188914116546758, 0.8012519569012008, 0.4752910833430206, 0.17179714429673312, 0.018566135463043233, 0.00016974243555282643],
    [0.9987908957257497, 0.9735009788392561, 0.9097959895689501, 0.6446357929354277, 0.2872974951836458, 0.040427681994512805, 0.0004993992273873333],
    [0.9998376833880774, 0.9921232932326296, 0.9625657732472964, 0.7764950711233227, 0.41588018699550794, 0.07523524614651218, 0.0012497305630313753],
    [0.9999799325063756, 0.9978385033102375, 0.9856123220330293, 0.8684676654824512, 0.5438131158833295, 0.12465201948308115, 0.002769395715511576],
    [0.9999976885812014, 0.9994464813904249, 0.9948285365165155, 0.9270970650134738, 0.6599632296942827, 0.18857346751345008, 0.005569683072945571],
    [0.9999997497860527, 0.999866630349486, 0.9982483774437092, 0.9617309457103778, 0.7575761331330659, 0.2650259152973617, 0.010336050675925718],
    [0.9999999743696746, 0.9999695662588389, 0.9994375026978325, 0.9808834914028134, 0.8343082601934075, 0.35048521232336133, 0.017912404529843273],
    [0.9999999975020487, 0.999993388289439, 0.9998278843700441, 0.9908757207816047, 0.8911780189141513, 0.4404932850652124, 0.029252688076961072],
];

#[test]
fn chi_square_tail_matches_reference() {
    for (df, row) in CHI_SF.iter().enumerate() {
        for (x, want) in CHI_X.iter().zip(row) {
            let got = chi_square_sf(*x, (df + 1) as f64);
            assert!((got - want).abs() < 1e-6, "df {} x {x}: {got} vs {want}", df + 1);
        }
    }
}

/// Two models with the same error rate, erring independently on noisy
/// labels: the test should reject about as often as α.
#[test]
fn mcnemar_false_alarm_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d63_6e65);
    let mut rejections = 0;
    for _ in 0..1000 {
        let (mut b, mut c) = (0u64, 0u64);
        for _ in 0..400 {
            let a_right = rng.random_bool(0.85);
            let b_right = rng.random_bool(0.85);
            match (a_right, b_right) {
                (true, false) => b += 1,
                (false, true) => c += 1,
                _ => {}
            }
        }
        if mcnemar_counts(b, c, EXACT_BELOW).1 < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 1000.0;
    assert!((0.03..=0.07).contains(&rate), "false alarm rate {rate}");
}

fn prediction_sets(a: &[bool], b: &[bool]) -> (PredictionSet, PredictionSet, BTreeMap<String, RoadTypeLabel>) {
    let mut pa = PredictionSet::new("a");
    let mut pb = PredictionSet::new("b");
    let mut truth = BTreeMap::new();
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let k = format!("K{i:04}");
        truth.insert(k.clone(), RoadTypeLabel::Intersection);
        let pred = |right: bool| Prediction { label: RoadTypeLabel::from_bool(right), probability: if right { 0.9 } else { 0.1 } };
        pa.entries.insert(k.clone(), pred(*x));
        pb.entries.insert(k, pred(*y));
    }
    (pa, pb, truth)
}

fn rating() -> impl Strategy<Value = RaterLabel> {
    prop_oneof![Just(LABELS[0]), Just(LABELS[1]), Just(LABELS[2])]
}

proptest! {
    #[test]
    fn mcnemar_swap_symmetry(rows in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
        let (a, b): (Vec<bool>, Vec<bool>) = rows.into_iter().unzip();
        let (pa, pb, truth) = prediction_sets(&a, &b);
        let ab = mcnemar(&pa, &pb, &truth, 0.05).unwrap();
        let ba = mcnemar(&pb, &pa, &truth, 0.05).unwrap();
        prop_assert_eq!((ab.b, ab.c), (ba.c, ba.b));
        prop_assert_eq!(ab.chi_square, ba.chi_square);
        prop_assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn wilson_contains_estimate_and_narrows(k in 0u64..200, n in 1u64..200) {
        let k = k.min(n);
        let w = wilson_interval(k, n, 1.96).unwrap();
        prop_assert!(w.lower <= w.p_hat && w.p_hat <= w.upper);
        let wide = wilson_interval(k * 4, n * 4, 1.96).unwrap();
        prop_assert!(wide.upper - wide.lower < w.upper - w.lower);
    }

    #[test]
    fn kappa_symmetric_and_order_free(
        pairs in prop::collection::vec((rating(), rating()), 4..60),
        shift in 0usize..60,
    ) {
        let (a, b): (Vec<RaterLabel>, Vec<RaterLabel>) = pairs.iter().copied().unzip();
        let m = two_rater(&a, &b);
        if let Ok(ab) = cohens_kappa(&m, "a", "b") {
            let ba = cohens_kappa(&m, "b", "a").unwrap();
            prop_assert!((ab.kappa - ba.kappa).abs() < 1e-12);
            let s = shift % a.len();
            let (mut ra, mut rb) = (a.clone(), b.clone());
            ra.rotate_left(s);
            rb.rotate_left(s);
            let rotated = cohens_kappa(&two_rater(&ra, &rb), "a", "b").unwrap();
            prop_assert!((ab.kappa - rotated.kappa).abs() < 1e-12);
        }
    }
}
