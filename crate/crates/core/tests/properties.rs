mod common;

use colontcn::data::{
    augment_indices, decode_features, draw_segments, encode_features, parse_annotations, rasterize, resample_indices,
    segmentize, write_annotations, LabelClass, SyntheticSpec, DEFAULT_DURATIONS,
};
use colontcn::loss::{
    combined_loss, median_frequency_weights, truncated_mse, weighted_cross_entropy, ClassWeights, LossConfig,
};
use colontcn::metrics::{confusion, f1_scores, jaccard_scores, weighted_scores, WeightMode};
use colontcn::seqcore::{log_softmax_rows, RngState, SeqMatrix};
use colontcn::train::{five_fold, validate_folds};
use proptest::prelude::*;

fn labels_strategy(max_len: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<bool>)> {
    (1..=max_len).prop_flat_map(|t| {
        (
            prop::collection::vec(0..9usize, t),
            prop::collection::vec(0..9usize, t),
            prop::collection::vec(prop::bool::weighted(0.9), t),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn confusion_matches_set_oracle((gt, pred, mask) in labels_strategy(200)) {
        let c = confusion(&pred, &gt, &mask, 9).unwrap();
        let o = common::set_scores(&pred, &gt, &mask, 9);
        for k in 0..9 {
            prop_assert_eq!(c.gt[k] as usize, o.gt[k]);
            prop_assert_eq!(c.pred[k] as usize, o.pred[k]);
            prop_assert_eq!(c.intersection[k] as usize, o.inter[k]);
            prop_assert!(c.intersection[k] <= c.gt[k].min(c.pred[k]));
        }
        prop_assert_eq!(c.gt.iter().sum::<u64>(), c.pred.iter().sum::<u64>());
        prop_assert_eq!(c.frames() as usize, mask.iter().filter(|&&m| m).count());
    }

    #[test]
    fn f1_jaccard_identity_and_range((gt, pred, mask) in labels_strategy(200)) {
        let c = confusion(&pred, &gt, &mask, 9).unwrap();
        let f = f1_scores(&c);
        for (s, j) in f.iter().zip(jaccard_scores(&c)) {
            for v in [s.precision, s.recall, s.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if let Some(j) = j {
                prop_assert!((s.f1 - 2.0 * j / (1.0 + j)).abs() < 1e-12);
            }
        }
        if let Ok((w, j)) = weighted_scores(&c, WeightMode::Support) {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&w) && (0.0..=1.0 + 1e-12).contains(&j));
        }
    }

    #[test]
    fn metrics_invariant_to_frame_permutation((gt, pred, mask) in labels_strategy(120), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..gt.len()).collect();
        RngState::new(seed).shuffle(&mut order);
        let p = |v: &[usize]| order.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let m: Vec<bool> = order.iter().map(|&i| mask[i]).collect();
        prop_assert_eq!(confusion(&pred, &gt, &mask, 9).unwrap(), confusion(&p(&pred), &p(&gt), &m, 9).unwrap());
    }

    #[test]
    fn micro_aggregation_equals_concatenation(a in labels_strategy(80), b in labels_strategy(80)) {
        let mut sum = confusion(&a.1, &a.0, &a.2, 9).unwrap();
        sum.add(&confusion(&b.1, &b.0, &b.2, 9).unwrap());
        let cat = |x: &[usize], y: &[usize]| x.iter().chain(y).copied().collect::<Vec<_>>();
        let mask: Vec<bool> = a.2.iter().chain(&b.2).copied().collect();
        prop_assert_eq!(sum, confusion(&cat(&a.1, &b.1), &cat(&a.0, &b.0), &mask, 9).unwrap());
    }

    #[test]
    fn annotations_round_trip(seed in any::<u64>(), len in 1usize..400) {
        let mut rng = RngState::new(seed);
        let labels: Vec<LabelClass> = common::random_runs(&mut rng, len, 10)
            .into_iter()
            .map(|i| LabelClass::from_index(i).unwrap())
            .collect();
        let segs = segmentize("vid-1", &labels);
        let parsed = parse_annotations(&write_annotations(&segs)).unwrap();
        prop_assert_eq!(&parsed, &segs);
        prop_assert_eq!(rasterize(&parsed, len).unwrap(), labels);
    }

    #[test]
    fn feature_files_round_trip(t in 0usize..40, d in 1usize..8, seed in any::<u64>(), fps in 1.0f32..60.0) {
        let mut rng = RngState::new(seed);
        let data: Vec<f64> = (0..t * d).map(|_| ((rng.uniform() - 0.5) * 1e3) as f32 as f64).collect();
        let m = SeqMatrix::from_vec(t, d, data).unwrap();
        let f = decode_features(&encode_features(fps as f64, &m).unwrap(), std::path::Path::new("p")).unwrap();
        prop_assert_eq!(f.features, m);
        prop_assert_eq!(f.fps, fps);
    }

    #[test]
    fn tmse_bounded_and_shift_invariant(seed in any::<u64>(), t in 2usize..30, shift in -50.0f64..50.0) {
        let mut rng = RngState::new(seed);
        let logits = SeqMatrix::from_vec(t, 9, (0..t * 9).map(|_| 40.0 * rng.uniform() - 20.0).collect()).unwrap();
        let lp = log_softmax_rows(&logits);
        let mask: Vec<bool> = (0..t).map(|_| rng.uniform() > 0.2).collect();
        let l = truncated_mse(&lp, 4.0, &mask);
        prop_assert!(l.value >= 0.0 && l.value <= 16.0 + 1e-12);
        let shifted = lp.map(|v| v + shift);
        prop_assert!((truncated_mse(&shifted, 4.0, &mask).value - l.value).abs() < 1e-9);
    }

    #[test]
    fn equal_stage_outputs_equal_single_stage(seed in any::<u64>(), t in 2usize..30, stages in 1usize..5) {
        let mut rng = RngState::new(seed);
        let lp = log_softmax_rows(&SeqMatrix::from_vec(t, 9, (0..t * 9).map(|_| 4.0 * rng.uniform()).collect()).unwrap());
        let labels: Vec<usize> = (0..t).map(|_| rng.below(9)).collect();
        let mask = vec![true; t];
        let w = ClassWeights::uniform(9);
        let one = combined_loss(std::slice::from_ref(&lp), &labels, &w, &LossConfig::default(), &mask).unwrap();
        let many = combined_loss(&vec![lp.clone(); stages], &labels, &w, &LossConfig::default(), &mask).unwrap();
        prop_assert!((one.value - many.value).abs() < 1e-12);
    }

    #[test]
    fn masked_frames_never_matter(seed in any::<u64>(), t in 3usize..30) {
        let mut rng = RngState::new(seed);
        let mut lp = log_softmax_rows(&SeqMatrix::from_vec(t, 9, (0..t * 9).map(|_| 4.0 * rng.uniform()).collect()).unwrap());
        let mut labels: Vec<usize> = (0..t).map(|_| rng.below(9)).collect();
        let mask: Vec<bool> = (0..t).map(|i| i % 3 != 1).collect();
        let w = ClassWeights::uniform(9);
        let before = combined_loss(std::slice::from_ref(&lp), &labels, &w, &LossConfig::default(), &mask).unwrap();
        for i in (0..t).filter(|i| !mask[*i]) {
            lp.row_mut(i).iter_mut().for_each(|v| *v = f64::NAN);
            labels[i] = 1000;
        }
        let after = combined_loss(std::slice::from_ref(&lp), &labels, &w, &LossConfig::default(), &mask).unwrap();
        prop_assert_eq!(before.value, after.value);
        let ce = weighted_cross_entropy(&lp, &labels, &w, &mask).unwrap();
        prop_assert!(ce.value.is_finite());
    }

    #[test]
    fn median_frequency_balances_present_classes(counts in prop::collection::vec(0u64..1000, 9)) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let w = median_frequency_weights(&counts).unwrap();
        let total: u64 = counts.iter().sum();
        let mut freqs: Vec<f64> = counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / total as f64).collect();
        freqs.sort_by(f64::total_cmp);
        let n = freqs.len();
        let median = if n % 2 == 1 { freqs[n / 2] } else { (freqs[n / 2 - 1] + freqs[n / 2]) / 2.0 };
        for (c, &k) in counts.iter().enumerate() {
            if k == 0 {
                prop_assert_eq!(w.0[c], 0.0);
            } else {
                prop_assert!((w.0[c] * k as f64 / total as f64 - median).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn resample_index_formula(t in 0usize..2000, ratio in 1usize..8) {
        let idx = resample_indices(t, 5.0 * ratio as f64, 5.0).unwrap();
        prop_assert_eq!(idx.len(), t.div_ceil(ratio));
        for (i, &k) in idx.iter().enumerate() {
            prop_assert_eq!(k, i * ratio);
        }
    }

    #[test]
    fn augmentation_length_bound(t in 1usize..3000, f in 1usize..10, seed in any::<u64>()) {
        let idx = augment_indices(t, f as f64, &mut RngState::new(seed));
        let expect = t.div_ceil(f) as i64;
        prop_assert!((idx.len() as i64 - expect).abs() <= 1, "{} vs {}", idx.len(), expect);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().all(|&i| i < t));
    }

    #[test]
    fn five_fold_valid_for_any_cohort_layout(sizes in prop::collection::vec(5usize..20, 1..6), seed in any::<u64>()) {
        let mut videos = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            for k in 0..n {
                videos.push((format!("{c:03}-{k:03}"), format!("{c:03}")));
            }
        }
        let folds = five_fold(&videos, seed).unwrap();
        validate_folds(&folds, Some(&videos)).unwrap();
        for f in &folds {
            prop_assert_eq!(f.train.len() + f.valid.len() + f.test.len(), videos.len());
        }
    }

    #[test]
    fn synthetic_plans_follow_the_grammar(seed in any::<u64>(), scale in 0.01f64..1.0) {
        use LabelClass::*;
        let spec = SyntheticSpec::default().with_duration_scale(scale);
        let plan = draw_segments(&spec, &mut RngState::new(seed)).unwrap();
        let order: Vec<LabelClass> = plan.iter().map(|p| p.0).collect();
        let mut base = vec![Outside, Insertion, Cecum, Ascending, Transverse, Descending, Sigmoid, Rectum, Outside];
        if order.contains(&Ileum) {
            base.splice(3..3, [Ileum, Cecum]);
        }
        prop_assert_eq!(order, base);

        let mut totals = [0usize; 9];
        for (c, n) in &plan {
            prop_assert!(*n > 0);
            totals[c.index()] += n;
        }
        for (c, total) in totals.iter().enumerate() {
            if *total == 0 {
                continue;
            }
            let d = &spec.durations[c];
            let lo = ((d.min * spec.fps).round() as usize).max(1);
            let hi = ((d.max * spec.fps).round() as usize).max(2);
            prop_assert!((lo..=hi).contains(total), "class {} has {} frames outside [{}, {}]", c, total, lo, hi);
        }
    }
}

#[test]
fn sampled_durations_match_their_means() {
    let spec = SyntheticSpec::default();
    let mut rng = RngState::new(99);
    for (c, d) in DEFAULT_DURATIONS.iter().enumerate() {
        let law = spec.duration_law(LabelClass::TARGETS[c]).unwrap();
        let n = 20_000;
        let mean = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
        // the ileum law is conditional on the ileum being reached
        let target = if c == LabelClass::Ileum.index() { d.mean / spec.ileum_presence_prob } else { d.mean };
        assert!((mean - target).abs() < 0.1 * target, "class {c}: {mean} vs {target}");
    }
}
