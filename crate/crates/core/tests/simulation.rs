//! Behavior of the synthetic benchmark: class geometry, trainer, shifts.

mod oracles;

use mano_core::estimators::Estimator;
use mano_core::evaluation::accuracy;
use mano_core::mano::distance_to_hyperplane;
use mano_core::simulator::{
    apply_shift, class_counts, export_benchmark, generate_task, run_benchmark, severity_grid, train_logistic,
    ShiftSpec, TaskSpec, TrainConfig,
};
use mano_core::SoftrunConfig;

#[test]
fn two_class_accuracy_near_bayes() {
    let spec = TaskSpec {
        n_classes: 2,
        input_dim: 2,
        radius: 3.0,
        n_train_per_class: 500,
        n_test_per_class: 5000,
        n_val_per_class: 10,
        seed: 3,
        ..Default::default()
    };
    let task = generate_task(&spec).unwrap();
    let clf = train_logistic(&task.train, 2, 0.1, 500).unwrap();
    let acc = accuracy(&clf.logits(&task.test).unwrap(), &task.test.labels).unwrap();
    // Means 2r apart with σ = 1: the midpoint boundary errs with probability 1 − Φ(r).
    let bayes = oracles::normal_cdf(3.0);
    assert!((acc - bayes).abs() < 0.02, "accuracy {acc}, Bayes {bayes}");
}

#[test]
fn tiny_sigma_puts_samples_on_means() {
    let spec = TaskSpec { class_cov_scale: 1e-6, seed: 1, ..Default::default() };
    let task = generate_task(&spec).unwrap();
    let d = spec.input_dim;
    for i in 0..task.train.len() {
        let y = task.train.labels[i];
        for (x, m) in task.train.row(i).iter().zip(&task.means[y * d..(y + 1) * d]) {
            assert!((x - m).abs() < 1e-4);
        }
    }
}

#[test]
fn generation_is_deterministic() {
    let spec = TaskSpec { seed: 9, n_classes: 4, ..Default::default() };
    let (a, b) = (generate_task(&spec).unwrap(), generate_task(&spec).unwrap());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.train.x), bits(&b.train.x));
    assert_eq!(bits(&a.test.x), bits(&b.test.x));
    assert_eq!(a.train.labels, b.train.labels);
}

fn small_spec(seed: u64) -> TaskSpec {
    TaskSpec {
        n_classes: 4,
        input_dim: 6,
        radius: 3.0,
        n_train_per_class: 100,
        n_test_per_class: 150,
        n_val_per_class: 50,
        seed,
        ..Default::default()
    }
}

#[test]
fn severity_degrades_accuracy_on_average() {
    let shifts: Vec<ShiftSpec> = [0, 1, 5]
        .iter()
        .map(|&s| ShiftSpec { severity: s, mean_drift: 1.0, ..Default::default() })
        .collect();
    let train = TrainConfig { lr: 0.1, epochs: 200 };
    let mut totals = [0.0; 3];
    let seeds = 12;
    for seed in 0..seeds {
        let run = run_benchmark(&small_spec(seed), &shifts, &[Estimator::Mano], &SoftrunConfig::default(), &train)
            .unwrap();
        for (t, r) in totals.iter_mut().zip(&run.records) {
            *t += r.true_accuracy.unwrap() / seeds as f64;
        }
        assert_eq!(run.records[0].true_accuracy, Some(run.clean_accuracy));
    }
    assert!(totals[2] < totals[1], "severity 5 {} vs severity 1 {}", totals[2], totals[1]);
    assert!(totals[0] >= totals[2]);
}

#[test]
fn zero_tilt_keeps_labels_balanced_and_tilt_skews_them() {
    let task = generate_task(&small_spec(4)).unwrap();
    let plain = apply_shift(&task, &task.test, &ShiftSpec { severity: 3, ..Default::default() }).unwrap();
    let counts = class_counts(&plain.labels, 4);
    assert!(counts.values().all(|&c| c == 150), "{counts:?}");

    let tilted = apply_shift(
        &task,
        &task.test,
        &ShiftSpec { severity: 5, label_marginal_tilt: 0.5, ..Default::default() },
    )
    .unwrap();
    let counts = class_counts(&tilted.labels, 4);
    // Class k is kept with probability 0.5^k: expected 150, 75, 37.5, 18.75.
    for (k, &c) in &counts {
        let p = 0.5f64.powi(*k as i32);
        let (mean, sd) = (150.0 * p, (150.0 * p * (1.0 - p)).sqrt());
        assert!((c as f64 - mean).abs() <= 4.0 * sd + 1e-9, "class {k}: {c} vs {mean}");
    }
}

#[test]
fn severity_zero_is_identity() {
    let task = generate_task(&small_spec(5)).unwrap();
    let same = apply_shift(&task, &task.test, &ShiftSpec { mean_drift: 2.0, ..Default::default() }).unwrap();
    assert_eq!(same, task.test);
}

#[test]
fn logit_margin_equals_hyperplane_distance() {
    let spec = small_spec(6);
    let task = generate_task(&spec).unwrap();
    let clf = train_logistic(&task.train, spec.n_classes, 0.1, 100).unwrap();
    let logits = clf.logits(&task.test).unwrap();
    for i in 0..task.test.len() {
        for k in 0..spec.n_classes {
            let w = clf.class_weights(k);
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let d = distance_to_hyperplane(w, clf.bias[k], task.test.row(i)).unwrap();
            assert!((logits.row(i)[k].abs() / norm - d).abs() < 1e-10);
        }
    }
}

#[test]
fn estimator_list_controls_score_keys() {
    let shifts = severity_grid(1, &[1, 2], &ShiftSpec::default());
    let run = run_benchmark(
        &small_spec(7),
        &shifts,
        &[Estimator::Mano, Estimator::ConfScore],
        &SoftrunConfig::default(),
        &TrainConfig { lr: 0.1, epochs: 50 },
    )
    .unwrap();
    for r in &run.records {
        assert_eq!(r.scores.keys().collect::<Vec<_>>(), ["confscore", "mano"]);
    }
}

#[test]
fn export_writes_manifest_and_arrays() {
    let shifts = severity_grid(2, &[1, 3], &ShiftSpec::default());
    let run = run_benchmark(
        &small_spec(8),
        &shifts,
        &[Estimator::Mano],
        &SoftrunConfig::default(),
        &TrainConfig { lr: 0.1, epochs: 50 },
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = export_benchmark(&run, dir.path()).unwrap();
    assert_eq!(manifest.entries.len(), 5);
    let back = mano_core::data_io::read_manifest(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(back, manifest);
    for (entry, set) in back.tests().zip(&run.sets) {
        assert_eq!(mano_core::data_io::read_logits(&entry.logits_path).unwrap(), set.logits);
        let labels = mano_core::data_io::read_labels(entry.labels_path.as_ref().unwrap(), Some(4)).unwrap();
        assert_eq!(labels, set.labels);
    }
}
