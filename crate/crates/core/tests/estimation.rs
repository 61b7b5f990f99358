use std::collections::BTreeMap;

use approx::assert_abs_diff_eq;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tailored_bench::baselines::{anchor_points_baseline, random_baseline};
use tailored_bench::estimation::{calibrate_correctness, calibrate_raw, scale_factor};
use tailored_bench::{
    estimate_calibrated, estimate_weighted, kmedoids, CorrectnessMatrix, Coreset, MatrixKind, Metric, ModelSplit,
    NSetResult,
};

fn coreset(medoids: Vec<usize>, assignment: Vec<usize>) -> Coreset {
    let k = medoids.len();
    Coreset {
        medoid_indices: medoids,
        anchored: vec![false; k],
        assignment,
        objective: 0.0,
        iterations: 1,
        converged: true,
        trace: Vec::new(),
    }
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn matrix(rows: Vec<Vec<f64>>) -> CorrectnessMatrix {
    let n_models = rows.len();
    let n_examples = rows[0].len();
    CorrectnessMatrix::from_rows(ids("m", n_models), ids("x", n_examples), rows, Some(MatrixKind::Continuous)).unwrap()
}

/// Written out independently: Scale = (c̄' + 1/2)/(c̄ + 1/2), c' = (c + 1/2)·Scale − 1/2.
fn reference_raw(mean_member: f64, mean_medoid: f64, c: f64) -> (f64, f64) {
    let scale = (mean_member + 0.5) / (mean_medoid + 0.5);
    (scale, (c + 0.5) * scale - 0.5)
}

#[test]
fn calibration_formulas_match_reference_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (member, medoid, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let (scale, raw) = reference_raw(member, medoid, c);
        assert_abs_diff_eq!(scale_factor(member, medoid), scale, epsilon = 1e-12);
        assert_abs_diff_eq!(calibrate_raw(c, scale_factor(member, medoid)), raw, epsilon = 1e-12);
        assert_eq!(calibrate_correctness(c, scale), raw.clamp(0.0, 1.0));
    }
}

#[test]
fn calibration_extremes() {
    assert_eq!(scale_factor(1.0, 0.0), 3.0);
    assert_eq!(scale_factor(0.0, 1.0), 1.0 / 3.0);
    assert_eq!(calibrate_correctness(1.0, 0.5), 0.25);
    assert_eq!(calibrate_raw(1.0, 3.0), 4.0);
    assert_eq!(calibrate_correctness(1.0, 3.0), 1.0);
    for c in [0.0, 0.3, 1.0] {
        assert_abs_diff_eq!(calibrate_correctness(c, 1.0), c, epsilon = 1e-15);
    }
}

#[test]
fn three_cluster_hand_computed() {
    // Clusters {0,1}, {2,3}, {4,5} with medoids 0, 2, 4.
    // Native means: x0 .2, x1 .5, x2 .5, x3 .8, x4 .8, x5 .2.
    let means = vec![0.2, 0.5, 0.5, 0.8, 0.8, 0.2];
    let target = vec![0.0, 0.9, 0.5, 0.1, 1.0, 0.4];
    let m = matrix(vec![means.clone(), means, target]);
    let nset = NSetResult {
        target_id: "m2".into(),
        coreset: coreset(vec![0, 2, 4], vec![0, 0, 1, 1, 2, 2]),
        basis: vec!["m0".into(), "m1".into()],
        gset_indices: vec![0],
    };
    let preds = BTreeMap::from([(0, 0.0), (2, 0.5), (4, 1.0)]);
    let est = estimate_calibrated(&m, &nset, &preds).unwrap();
    // x1: 0.5/0.7 - 0.5 = 3/14; x3: 1.0*1.3 - 0.5 = 0.8; x5: 1.5*0.7/1.3 - 0.5 = 4/13.
    let expected = (0.0 + 3.0 / 14.0 + 0.5 + 0.8 + 1.0 + 4.0 / 13.0) / 6.0;
    assert_abs_diff_eq!(est.estimate, expected, epsilon = 1e-12);
    let per = est.per_example.unwrap();
    assert_eq!((per[0], per[2], per[4]), (0.0, 0.5, 1.0));
    assert_abs_diff_eq!(per[1], 3.0 / 14.0, epsilon = 1e-12);
    assert_abs_diff_eq!(per[3], 0.8, epsilon = 1e-12);
    assert_abs_diff_eq!(per[5], 4.0 / 13.0, epsilon = 1e-12);
    assert_eq!(est.inference_count, 3);
}

#[test]
fn constant_natives_make_calibration_a_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let n = 15;
        let level: f64 = rng.random();
        let target: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let m = matrix(vec![vec![level; n], vec![level; n], target.clone()]);
        let medoids = vec![0, 5, 10];
        let assignment: Vec<usize> = (0..n).map(|k| k / 5).collect();
        let c = coreset(medoids.clone(), assignment);
        let preds: BTreeMap<usize, f64> = medoids.iter().map(|&k| (k, target[k])).collect();
        let nset = NSetResult {
            target_id: "m2".into(),
            coreset: c.clone(),
            basis: vec!["m0".into(), "m1".into()],
            gset_indices: vec![0],
        };
        let cal = estimate_calibrated(&m, &nset, &preds).unwrap();
        let w = estimate_weighted("m2", &c, &preds).unwrap();
        assert_abs_diff_eq!(cal.estimate, w.estimate, epsilon = 1e-15);
    }
}

#[test]
fn full_coverage_recovers_true_performance() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 12;
    let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
    let m = matrix(rows.clone());
    let all: Vec<usize> = (0..n).collect();
    let nset = NSetResult {
        target_id: "m0".into(),
        coreset: coreset(all.clone(), all.clone()),
        basis: vec!["m0".into(), "m1".into()],
        gset_indices: vec![3],
    };
    let preds: BTreeMap<usize, f64> = all.iter().map(|&k| (k, rows[0][k])).collect();
    let est = estimate_calibrated(&m, &nset, &preds).unwrap();
    assert_eq!(est.estimate, m.true_performance("m0").unwrap());
}

#[test]
fn missing_or_extra_predictions_rejected() {
    let m = matrix(vec![vec![0.5; 4], vec![0.5; 4]]);
    let c = coreset(vec![0, 2], vec![0, 0, 1, 1]);
    let nset = NSetResult {
        target_id: "m1".into(),
        coreset: c.clone(),
        basis: vec!["m0".into()],
        gset_indices: vec![0],
    };
    assert!(estimate_calibrated(&m, &nset, &BTreeMap::from([(0, 1.0)])).is_err());
    assert!(estimate_calibrated(&m, &nset, &BTreeMap::from([(0, 1.0), (2, 0.0), (3, 1.0)])).is_err());
    assert!(estimate_weighted("m1", &c, &BTreeMap::from([(2, 1.0)])).is_err());
}

#[test]
fn weighted_cases() {
    let one = coreset(vec![2], vec![0; 5]);
    assert_eq!(estimate_weighted("t", &one, &BTreeMap::from([(2, 0.7)])).unwrap().estimate, 0.7);
    let halves = coreset(vec![0, 3], vec![0, 0, 0, 1, 1, 1]);
    assert_eq!(estimate_weighted("t", &halves, &BTreeMap::from([(0, 0.0), (3, 1.0)])).unwrap().estimate, 0.5);

    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let n = rng.random_range(3..40);
        let k = rng.random_range(1..=n.min(6));
        let medoids: Vec<usize> = (0..k).collect();
        let assignment: Vec<usize> = (0..n).map(|x| if x < k { x } else { rng.random_range(0..k) }).collect();
        let c = coreset(medoids.clone(), assignment);
        let preds: BTreeMap<usize, f64> = medoids.iter().map(|&m| (m, rng.random())).collect();
        let sizes = c.cluster_sizes();
        let direct: f64 = medoids.iter().enumerate().map(|(p, m)| preds[m] * sizes[p] as f64).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(estimate_weighted("t", &c, &preds).unwrap().estimate, direct, epsilon = 1e-12);
    }
}

fn random_instance(seed: u64) -> (CorrectnessMatrix, NSetResult, BTreeMap<usize, f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..30);
    let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
    let m = matrix(rows);
    let k = rng.random_range(1..=n.min(5));
    let medoids: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_vec();
    let mut assignment: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    for (p, &med) in medoids.iter().enumerate() {
        assignment[med] = p;
    }
    let preds = medoids.iter().map(|&x| (x, rng.random::<f64>())).collect();
    let nset = NSetResult {
        target_id: "m3".into(),
        coreset: coreset(medoids, assignment),
        basis: vec!["m0".into(), "m1".into(), "m2".into()],
        gset_indices: vec![],
    };
    (m, nset, preds)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn calibrated_estimate_bounded_and_faithful(seed in any::<u64>()) {
        let (m, nset, preds) = random_instance(seed);
        let est = estimate_calibrated(&m, &nset, &preds).unwrap();
        prop_assert!((0.0..=1.0).contains(&est.estimate));
        let per = est.per_example.unwrap();
        for (&x, &v) in &preds {
            prop_assert_eq!(per[x], v);
        }
        let w = estimate_weighted("m3", &nset.coreset, &preds).unwrap();
        prop_assert!((0.0..=1.0).contains(&w.estimate));
    }

    #[test]
    fn raising_one_medoid_never_lowers_the_estimate(seed in any::<u64>(), bump in 0.0f64..1.0) {
        let (m, nset, preds) = random_instance(seed);
        let before = estimate_calibrated(&m, &nset, &preds).unwrap().estimate;
        let mut raised = preds.clone();
        let (&x, &v) = preds.iter().next().unwrap();
        raised.insert(x, v + (1.0 - v) * bump);
        let after = estimate_calibrated(&m, &nset, &raised).unwrap().estimate;
        prop_assert!(after >= before - 1e-15);
    }
}

fn split_for(m: &CorrectnessMatrix, n_sources: usize) -> ModelSplit {
    let ids = m.model_ids();
    ModelSplit::new(m, ids[..n_sources].to_vec(), ids[n_sources..].to_vec()).unwrap()
}

#[test]
fn anchor_points_equals_kmedoids_then_weighted() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let rows: Vec<Vec<f64>> = (0..8).map(|_| (0..20).map(|_| f64::from(u8::from(rng.random_bool(0.6)))).collect()).collect();
    let m = CorrectnessMatrix::from_rows(ids("m", 8), ids("x", 20), rows, None).unwrap();
    let split = split_for(&m, 5);
    for (seed, metric) in [(1, Metric::Correlation), (2, Metric::Manhattan)] {
        let got = anchor_points_baseline(&m, &split, 6, metric, seed, 100).unwrap();
        let emb = m.embed_examples(&split.source_ids, None).unwrap();
        let c = kmedoids(&emb, 6, metric, seed, 100).unwrap();
        for (est, id) in got.iter().zip(&split.target_ids) {
            let row = m.model_index(id).unwrap();
            let preds = c.medoid_indices.iter().map(|&k| (k, m.get(row, k))).collect();
            let expected = estimate_weighted(id, &c, &preds).unwrap();
            assert_eq!(est.estimate, expected.estimate);
            assert_eq!(est.inference_count, 6);
        }
    }
}

#[test]
fn baselines_at_full_budget_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let values = Array2::from_shape_fn((6, 15), |_| rng.random::<f64>());
    let m = CorrectnessMatrix::new(ids("m", 6), ids("x", 15), values, None).unwrap();
    let split = split_for(&m, 3);
    let truths: Vec<f64> = split.target_ids.iter().map(|id| m.true_performance(id).unwrap()).collect();
    let random = random_baseline(&m, &split, 15, 3).unwrap();
    let anchor = anchor_points_baseline(&m, &split, 15, Metric::Correlation, 3, 100).unwrap();
    for i in 0..truths.len() {
        assert_eq!(random[i].estimate, truths[i]);
        assert_eq!(anchor[i].estimate, truths[i]);
    }
    assert!(random_baseline(&m, &split, 0, 3).is_err());
    assert!(random_baseline(&m, &split, 16, 3).is_err());
}

#[test]
fn random_baseline_is_deterministic_and_single_example_is_observed() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let values = Array2::from_shape_fn((6, 15), |_| rng.random::<f64>());
    let m = CorrectnessMatrix::new(ids("m", 6), ids("x", 15), values, None).unwrap();
    let split = split_for(&m, 3);
    assert_eq!(random_baseline(&m, &split, 4, 9).unwrap(), random_baseline(&m, &split, 4, 9).unwrap());
    let single = random_baseline(&m, &split, 1, 9).unwrap();
    for (est, id) in single.iter().zip(&split.target_ids) {
        let row = m.row(m.model_index(id).unwrap());
        assert!(row.iter().any(|&v| v == est.estimate));
    }
}
