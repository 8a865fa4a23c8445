//! Invariants of the numeric kernels, the estimator and the metrics,
//! checked on randomly generated inputs.

mod oracles;

use std::collections::BTreeMap;

use proptest::prelude::*;

use mano_core::baselines::{conf_score, entropy_score, mde_score, nuclear_score};
use mano_core::data_io::{encode_npy, parse_npy, ArrayData, ArrayFile};
use mano_core::evaluation::{benchmark_report, r_squared, spearman_rho, EvalRecord};
use mano_core::mano::{mano_score, mean_tsallis, softrun, taylor_normalize, SoftrunConfig};
use mano_core::numerics::{
    kl_divergence, phi, softmax, tsallis_entropy, LogitsMatrix, ProbMatrix, ProbVector,
};
use mano_core::simulator::{softmax_ce_gradient, softmax_ce_loss, Dataset, LinearClassifier};

fn logits_matrix(max_n: usize, max_k: usize, bound: f64) -> impl Strategy<Value = LogitsMatrix> {
    (1..=max_n, 2..=max_k).prop_flat_map(move |(n, k)| {
        prop::collection::vec(-bound..bound, n * k).prop_map(move |v| LogitsMatrix::new(v, n, k).unwrap())
    })
}

fn prob_vector(max_k: usize) -> impl Strategy<Value = ProbVector> {
    prop::collection::vec(0.0f64..1.0, 2..=max_k).prop_filter_map("zero mass", |v| {
        let s: f64 = v.iter().sum();
        (s > 1e-6).then(|| ProbVector::new(v.iter().map(|x| x / s).collect()).ok()).flatten()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn softmax_shift_invariant(q in prop::collection::vec(-50.0f64..50.0, 2..40), c in -100.0f64..100.0) {
        let a = softmax(&q).unwrap();
        let shifted: Vec<f64> = q.iter().map(|x| x + c).collect();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_matches_definition(q in prop::collection::vec(-20.0f64..20.0, 2..30)) {
        let s = softmax(&q).unwrap();
        for (x, y) in s.iter().zip(oracles::softmax_naive(&q)) {
            prop_assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn softmax_dispersion(raw in prop::collection::vec(-1.0f64..1.0, 2..=100), c in 0.01f64..3.0) {
        let l1: f64 = raw.iter().map(|x| x.abs()).sum();
        prop_assume!(l1 > 0.0);
        let q: Vec<f64> = raw.iter().map(|x| x * c / l1).collect();
        let k = q.len() as f64;
        let (lo, hi) = ((-2.0 * c).exp() / k, (2.0 * c).exp() / k);
        for &s in softmax(&q).unwrap().iter() {
            prop_assert!(s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn phi_scale_invariant(u in prop::collection::vec(0.0f64..10.0, 2..30), alpha in 1e-3f64..1e3) {
        prop_assume!(u.iter().any(|&x| x > 0.0));
        let a = phi(&u).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| alpha * x).collect();
        let b = phi(&scaled).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn phi_constant_is_uniform(c in 1e-6f64..1e6, k in 2usize..60) {
        let p = phi(&vec![c; k]).unwrap();
        for &x in p.iter() {
            prop_assert!((x - 1.0 / k as f64).abs() <= 1e-15);
        }
    }

    #[test]
    fn tsallis_identity(logits in logits_matrix(60, 20, 8.0), p in prop::sample::select(vec![1.5, 2.0, 4.0, 8.0])) {
        let k = logits.n_cols() as f64;
        let cfg = SoftrunConfig { p, ..Default::default() };
        let r = mano_score(&logits, &cfg).unwrap();
        let rhs = 1.0 / k - p * (p - 1.0) / k * r.mean_tsallis;
        prop_assert!((r.score.powf(p) - rhs).abs() < 1e-10);
    }

    #[test]
    fn score_bounds(logits in logits_matrix(40, 30, 30.0), p in 1.1f64..10.0) {
        let k = logits.n_cols() as f64;
        let cfg = SoftrunConfig { p, ..Default::default() };
        let s = mano_score(&logits, &cfg).unwrap().score;
        prop_assert!(s >= 1.0 / k * (1.0 - 1e-12));
        prop_assert!(s <= k.powf(-1.0 / p) * (1.0 + 1e-12));
    }

    #[test]
    fn taylor_preserves_argmax_above_minus_one(q in prop::collection::vec(-0.999f64..10.0, 2..30)) {
        let t = taylor_normalize(&q, 2).unwrap();
        let argmax = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, &x)| if x > v[b] { i } else { b });
        prop_assert_eq!(argmax(&q), argmax(&t));
    }

    #[test]
    fn mixing_toward_uniform_lowers_score(logits in logits_matrix(30, 12, 6.0), t in 0.05f64..1.0) {
        let cfg = SoftrunConfig::default();
        let base = softrun(&logits, &cfg).unwrap().probs;
        let k = base.n_cols();
        let mixed: Vec<f64> = base.as_slice().iter().map(|q| (1.0 - t) * q + t / k as f64).collect();
        let mixed = ProbMatrix::new(mixed, base.n_rows(), k).unwrap();
        let spread = base.as_slice().iter().fold(0.0f64, |m, &q| m.max((q - 1.0 / k as f64).abs()));
        prop_assume!(spread > 1e-6);
        for alpha in [1.5, 2.0, 4.0] {
            prop_assert!(mean_tsallis(&mixed, alpha) > mean_tsallis(&base, alpha));
        }
        let lp = |m: &ProbMatrix| -> f64 {
            (m.as_slice().iter().map(|q| q.powi(4)).sum::<f64>() / m.as_slice().len() as f64).powf(0.25)
        };
        prop_assert!(lp(&mixed) < lp(&base));
    }

    #[test]
    fn tsallis_maximized_by_uniform(p in prob_vector(20), alpha in prop::sample::select(vec![1.5, 2.0, 4.0])) {
        let u = ProbVector::uniform(p.len());
        prop_assert!(tsallis_entropy(&p, alpha).unwrap() <= tsallis_entropy(&u, alpha).unwrap() + 1e-12);
    }

    #[test]
    fn kl_nonnegative_and_zero_on_self(p in prob_vector(30)) {
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
        let q = softmax(&p.iter().map(|x| 3.0 * x).collect::<Vec<_>>()).unwrap();
        prop_assert!(kl_divergence(&q, &p).map_or(true, |d| d >= 0.0));
        prop_assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
    }

    #[test]
    fn kl_prediction_bias_bound(
        q in prop::collection::vec(-8.0f64..8.0, 2..=50),
        eps_seed in prop::collection::vec(-3.0f64..3.0, 50),
    ) {
        let eps = &eps_seed[..q.len()];
        let p = softmax(&q).unwrap();
        let biased: Vec<f64> = q.iter().zip(eps).map(|(a, e)| a + e).collect();
        let s = softmax(&biased).unwrap();
        let max_eps = eps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bound: f64 = eps.iter().zip(p.iter()).map(|(e, pk)| (max_eps - e) * pk).sum();
        let kl = kl_divergence(&p, &s).unwrap();
        prop_assert!(kl >= 0.0 && kl <= bound + 1e-10);
    }

    #[test]
    fn baselines_invariant_to_row_shifts(logits in logits_matrix(20, 10, 10.0), shifts in prop::collection::vec(-20.0f64..20.0, 20)) {
        let k = logits.n_cols();
        let moved: Vec<f64> = logits
            .rows()
            .zip(&shifts)
            .flat_map(|(r, c)| r.iter().map(move |x| x + c))
            .collect();
        let moved = LogitsMatrix::new(moved, logits.n_rows(), k).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * (1.0 + a.abs());
        prop_assert!(close(conf_score(&logits), conf_score(&moved)));
        prop_assert!(close(entropy_score(&logits), entropy_score(&moved)));
        prop_assert!(close(nuclear_score(&logits).unwrap(), nuclear_score(&moved).unwrap()));
        let mean_shift = shifts[..logits.n_rows()].iter().sum::<f64>() / logits.n_rows() as f64;
        prop_assert!(close(mde_score(&moved, 1.0).unwrap(), mde_score(&logits, 1.0).unwrap() + mean_shift));
    }

    #[test]
    fn spearman_invariant_to_monotone_maps(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(x.iter().any(|&v| v != x[0]) && y.iter().any(|&v| v != y[0]));
        let rho = spearman_rho(&x, &y).unwrap();
        let fx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let gy: Vec<f64> = y.iter().map(|v| v * v * v + 2.0 * v).collect();
        prop_assert!((spearman_rho(&fx, &gy).unwrap() - rho).abs() < 1e-12);
        prop_assert!((rho - oracles::spearman_naive(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn spearman_with_ties_matches_average_rank_oracle(pairs in prop::collection::vec((0u8..5, 0u8..5), 3..40)) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        prop_assume!(x.iter().any(|&v| v != x[0]) && y.iter().any(|&v| v != y[0]));
        prop_assert!((spearman_rho(&x, &y).unwrap() - oracles::spearman_naive(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn r_squared_affine_invariant(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
        a in prop::sample::select(vec![-3.0, -0.5, 0.25, 2.0, 7.0]),
        b in -5.0f64..5.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(x.iter().any(|&v| (v - x[0]).abs() > 1e-3) && y.iter().any(|&v| (v - y[0]).abs() > 1e-3));
        let r2 = r_squared(&x, &y).unwrap();
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        prop_assert!((r_squared(&ax, &y).unwrap() - r2).abs() < 1e-9);
        let rho = oracles::pearson(&x, &y);
        prop_assert!((r2 - rho * rho).abs() < 1e-9);
    }

    #[test]
    fn report_independent_of_record_order(
        rows in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 3..25),
        seed in any::<u64>(),
    ) {
        let records: Vec<EvalRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(a, b, acc))| EvalRecord {
                dataset_id: format!("set{i:03}"),
                scores: BTreeMap::from([("mano".to_string(), a), ("confscore".to_string(), b)]),
                true_accuracy: Some(acc),
                n_samples: 100,
            })
            .collect();
        let mut shuffled = records.clone();
        // Deterministic Fisher–Yates from the seed.
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(benchmark_report(&records).unwrap(), benchmark_report(&shuffled).unwrap());
    }

    #[test]
    fn ce_gradient_matches_finite_differences(
        k in 2usize..5,
        d in 2usize..5,
        params in prop::collection::vec(-1.0f64..1.0, 4 * 4 + 4),
        xs in prop::collection::vec(-2.0f64..2.0, 12 * 4),
    ) {
        let n = 12;
        let data = Dataset { x: xs[..n * d].to_vec(), labels: (0..n).map(|i| i % k).collect(), dim: d };
        let mut clf = LinearClassifier::zeros(k, d);
        clf.weights.copy_from_slice(&params[..k * d]);
        clf.bias.copy_from_slice(&params[16..16 + k]);
        let (gw, gb) = softmax_ce_gradient(&clf, &data);
        let analytic: Vec<f64> = gw.iter().chain(&gb).copied().collect();
        let h = 1e-5;
        let mut numeric = Vec::with_capacity(analytic.len());
        for idx in 0..analytic.len() {
            let eval = |delta: f64| {
                let mut c = clf.clone();
                if idx < k * d { c.weights[idx] += delta } else { c.bias[idx - k * d] += delta }
                softmax_ce_loss(&c, &data)
            };
            numeric.push((eval(h) - eval(-h)) / (2.0 * h));
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-3);
        prop_assert!(diff / scale < 1e-6, "relative error {}", diff / scale);
    }
}

fn array_strategy() -> impl Strategy<Value = ArrayFile> {
    let shape = prop_oneof![
        (0usize..20).prop_map(|n| vec![n]),
        (0usize..8, 0usize..8).prop_map(|(a, b)| vec![a, b]),
    ];
    (shape, 0u8..3).prop_flat_map(|(shape, dt)| {
        let len: usize = shape.iter().product();
        let bits = prop::collection::vec(any::<u64>(), len);
        bits.prop_map(move |b| {
            let data = match dt {
                0 => ArrayData::F32(b.iter().map(|&x| f32::from_bits(x as u32)).collect()),
                1 => ArrayData::F64(b.iter().map(|&x| f64::from_bits(x)).collect()),
                _ => ArrayData::I64(b.iter().map(|&x| x as i64).collect()),
            };
            ArrayFile::new(shape.clone(), data).unwrap()
        })
    })
}

fn data_bits(a: &ArrayData) -> Vec<u64> {
    match a {
        ArrayData::F32(v) => v.iter().map(|x| x.to_bits() as u64).collect(),
        ArrayData::F64(v) => v.iter().map(|x| x.to_bits()).collect(),
        ArrayData::I64(v) => v.iter().map(|&x| x as u64).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn npy_round_trip_is_bit_exact(arr in array_strategy()) {
        let bytes = encode_npy(&arr);
        let back = parse_npy(&bytes).unwrap();
        prop_assert_eq!(back.shape(), arr.shape());
        prop_assert_eq!(back.dtype(), arr.dtype());
        prop_assert_eq!(data_bits(back.data()), data_bits(arr.data()));
        prop_assert_eq!(encode_npy(&back), bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mutated_npy_never_panics(
        arr in array_strategy(),
        edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..6),
        cut in any::<prop::sample::Index>(),
        truncate in any::<bool>(),
    ) {
        let mut bytes = encode_npy(&arr);
        let header_end = bytes.len().min(128);
        for (at, b) in edits {
            let i = at.index(header_end);
            bytes[i] = b;
        }
        if truncate {
            bytes.truncate(cut.index(bytes.len() + 1));
        }
        // Either a clean parse or a typed error; a panic fails the test.
        let _ = parse_npy(&bytes);
    }
}

#[test]
fn score_is_mean_of_fourth_powers() {
    let logits = LogitsMatrix::from_rows(&[[0.2, -0.4, 1.0], [2.0, 0.0, -1.0]]).unwrap();
    let cfg = SoftrunConfig::default();
    let probs = softrun(&logits, &cfg).unwrap().probs;
    let direct = (probs.as_slice().iter().map(|q| q.powi(4)).sum::<f64>() / 6.0).powf(0.25);
    assert!((mano_score(&logits, &cfg).unwrap().score - direct).abs() < 1e-15);
}
