use proptest::prelude::*;

use ifclass::benchmark::{inject_label_noise, sample_reference, selection_size, BlobSpec, NoiseSpec};
use ifclass::detection::{detect, Algorithm, DetectOptions};
use ifclass::influence::{MeasureKind, ModelArtifacts, SimilarityMeasure};
use ifclass::model::{MlpConfig, ModelParams};
use ifclass::theory::{
    cross_class_product, numeric_cross_class_product, numeric_same_class_product, same_class_product,
};

fn untrained(seed: u64, classes: usize) -> ModelArtifacts {
    let mut cfg = MlpConfig::new(2, vec![6], classes);
    cfg.seed = seed;
    ModelArtifacts::new(ModelParams::init(&cfg).unwrap(), vec![])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noise_flips_exact_count_to_other_labels(
        n in 10usize..200, classes in 2usize..6, p in 0.0f64..0.6, seed in any::<u64>()
    ) {
        let ds = BlobSpec::new(n, classes, 2, 3.0).generate(seed).unwrap();
        let (noisy, mask) = inject_label_noise(&ds, &NoiseSpec::new(p, seed ^ 1)).unwrap();
        prop_assert_eq!(mask.num_corrupted(), (p * n as f64 + 0.5).floor() as usize);
        for i in 0..n {
            prop_assert_eq!(mask.is_corrupted(i), noisy.label(i) != ds.label(i));
            prop_assert_eq!(noisy.x(i), ds.x(i));
        }
    }

    #[test]
    fn rankings_are_sorted_permutations_with_call_parity(
        n in 30usize..90, m_k in 1usize..5, seed in any::<u64>(), include in any::<bool>()
    ) {
        let ds = BlobSpec::new(n, 3, 2, 4.0).generate(seed).unwrap();
        let (noisy, mask) = inject_label_noise(&ds, &NoiseSpec::new(0.1, seed)).unwrap();
        let reference = sample_reference(&noisy, &mask, m_k, seed).unwrap();
        let art = untrained(seed, 3);
        let opts = DetectOptions { include_reference: include, class_scores: true };
        for kind in [MeasureKind::Gd, MeasureKind::Gc, MeasureKind::If] {
            for alg in Algorithm::ALL {
                let r = detect(alg, &noisy, &reference, SimilarityMeasure::new(kind), &art, opts).unwrap();
                let expected = if include { n } else { n - reference.len() };
                prop_assert_eq!(r.len(), expected);
                prop_assert_eq!(r.sim_calls, (expected * reference.len()) as u64);
                let mut order = r.order();
                let scores = r.scores();
                prop_assert!(scores.windows(2).all(|w| w[0] <= w[1]));
                order.sort_unstable();
                order.dedup();
                prop_assert_eq!(order.len(), expected);
            }
        }
    }

    #[test]
    fn class_score_never_exceeds_plain_with_equal_groups(
        n in 30usize..90, m_k in 1usize..5, seed in any::<u64>()
    ) {
        let ds = BlobSpec::new(n, 3, 2, 4.0).generate(seed).unwrap();
        let (noisy, mask) = inject_label_noise(&ds, &NoiseSpec::new(0.2, seed)).unwrap();
        let reference = sample_reference(&noisy, &mask, m_k, seed).unwrap();
        let art = untrained(seed, 3);
        let run = |alg| {
            detect(alg, &noisy, &reference, SimilarityMeasure::new(MeasureKind::Gd), &art, DetectOptions::default())
                .unwrap()
        };
        let (plain, class) = (run(Algorithm::Plain), run(Algorithm::ClassBased));
        let mut by_index = vec![0.0; n];
        for e in &plain.entries {
            by_index[e.index] = e.score;
        }
        for e in &class.entries {
            let p = by_index[e.index];
            prop_assert!(e.score <= p + 1e-12 * (1.0 + p.abs()), "{} > {}", e.score, p);
        }
    }

    #[test]
    fn closed_forms_match_direct_products(alpha_frac in 0.001f64..0.999, classes in 2usize..40) {
        let lo = 1.0 / classes as f64;
        let alpha = lo + alpha_frac * (1.0 - lo);
        let cross = cross_class_product(alpha, classes).unwrap();
        let same = same_class_product(alpha, classes).unwrap();
        let tol = 1e-12 * same.max(1e-300);
        prop_assert!((cross - numeric_cross_class_product(alpha, classes).unwrap()).abs() <= tol.max(1e-15));
        prop_assert!((same - numeric_same_class_product(alpha, classes).unwrap()).abs() <= tol.max(1e-15));
        prop_assert!(cross < 0.0 && cross.abs() <= same);
        let ratio = same / cross.abs();
        prop_assert!((ratio - (classes - 1) as f64).abs() <= 1e-12 * classes as f64);
    }

    #[test]
    fn cross_product_decays_quadratically(k in 4i32..40, classes in 2usize..12) {
        let a = cross_class_product(1.0 - 2f64.powi(-k), classes).unwrap();
        let b = cross_class_product(1.0 - 2f64.powi(-(k - 1)), classes).unwrap();
        prop_assert_eq!(a / b, 0.25);
    }

    #[test]
    fn selection_size_is_bounded_and_monotone(n in 1usize..5000, q in 0.0f64..100.0) {
        let k = selection_size(n, q);
        prop_assert!(k <= n);
        prop_assert!(k as f64 >= q * n as f64 / 100.0 - 1e-6);
        prop_assert!(selection_size(n, (q + 1.0).min(100.0)) >= k);
    }
}
