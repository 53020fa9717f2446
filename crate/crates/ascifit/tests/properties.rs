//! Property tests for the projection, the folded-normal kernel, and the
//! pipeline's corruption invariance.

use proptest::prelude::*;

use ascifit::datagen::{self, AdversaryPolicy, AsciModel};
use ascifit::estimator::{fit, EstimatorConfig};
use ascifit::folded::{self, EvalAccuracy, FoldedParams};
use ascifit::isotonic;

proptest! {
    #[test]
    fn pava_is_a_projection(y in prop::collection::vec(-50.0..50.0f64, 1..40)) {
        let fit = isotonic::pava(&y).unwrap();
        let v = &fit.values;

        prop_assert!(v.windows(2).all(|w| w[0] <= w[1]), "not monotone");

        let scale = y.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let sum_in: f64 = y.iter().sum();
        let sum_out: f64 = v.iter().sum();
        prop_assert!(
            (sum_in - sum_out).abs() <= 1e-9 * y.len() as f64 * scale,
            "total not preserved: {sum_in} vs {sum_out}"
        );

        // projection onto a cone: <v, y - v> = 0
        let cone: f64 = v.iter().zip(&y).map(|(vi, yi)| vi * (yi - vi)).sum();
        prop_assert!(cone.abs() <= 1e-8 * y.len() as f64 * scale * scale);

        let again = isotonic::pava(v).unwrap();
        prop_assert_eq!(&again.values, v, "not idempotent");

        // block structure describes the values exactly
        for b in &fit.blocks {
            prop_assert!(v[b.start..b.end].iter().all(|x| *x == b.level));
        }
    }

    #[test]
    fn pava_matches_maxmin_oracle(y in prop::collection::vec(-10.0..10.0f64, 1..=12)) {
        let fit = isotonic::pava(&y).unwrap().values;
        let oracle = isotonic::maxmin_oracle(&y).unwrap();
        for (a, b) in fit.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9, "{:?} vs {:?}", fit, oracle);
        }
    }

    #[test]
    fn pava_satisfies_variational_inequality(
        y in prop::collection::vec(-20.0..20.0f64, 1..25),
        probe in prop::collection::vec(-20.0..20.0f64, 25),
    ) {
        // <y - v, w - v> <= 0 for any monotone w when v is the projection;
        // sorting an arbitrary vector gives a random monotone probe.
        let v = isotonic::pava(&y).unwrap().values;
        let mut w = probe[..y.len()].to_vec();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let dot: f64 = y
            .iter()
            .zip(&v)
            .zip(&w)
            .map(|((yi, vi), wi)| (yi - vi) * (wi - vi))
            .sum();
        prop_assert!(dot <= 1e-8, "variational inequality violated: {dot}");
    }

    #[test]
    fn lower_bounded_is_exactly_clamped(
        y in prop::collection::vec(-10.0..10.0f64, 1..30),
        floor in -5.0..5.0f64,
    ) {
        let plain = isotonic::pava(&y).unwrap().values;
        let bounded = isotonic::pava_lower_bounded(&y, floor).unwrap().values;
        for (b, p) in bounded.iter().zip(&plain) {
            prop_assert_eq!(*b, p.max(floor));
        }
    }

    #[test]
    fn folded_mean_bounds_and_lipschitz(
        mu1 in 0.01..10.0f64,
        mu2 in 0.01..10.0f64,
        sigma in 0.01..5.0f64,
    ) {
        let f1 = folded::folded_mean(FoldedParams { mu: mu1, sigma }).unwrap();
        let f2 = folded::folded_mean(FoldedParams { mu: mu2, sigma }).unwrap();
        prop_assert!(f1 >= mu1.max(0.0));
        prop_assert!(f1 * f1 <= mu1 * mu1 + sigma * sigma + 1e-10);
        prop_assert!((f1 - f2).abs() <= (mu1 - mu2).abs() + 1e-12, "not 1-Lipschitz");
        if mu1 < mu2 {
            prop_assert!(f1 < f2 + 1e-15, "not increasing");
        }
    }

    #[test]
    fn folded_inverse_roundtrips(mu in 0.2..10.2f64, sigma in 0.1..5.0f64) {
        let acc = EvalAccuracy::default();
        let u = folded::folded_mean(FoldedParams { mu, sigma }).unwrap();
        let back = folded::folded_mean_inverse(u, sigma, 0.2, &acc).unwrap();
        let tol = 10.0 * acc.inverse_rel_tol * u.abs().max(1.0);
        prop_assert!((back - mu).abs() <= tol, "mu {mu} -> u {u} -> {back}");
    }

    #[test]
    fn fit_ignores_any_sign_pattern(
        data in prop::collection::vec((0.05..4.0f64, any::<bool>()), 2..50),
    ) {
        let r: Vec<f64> = data.iter().map(|(v, _)| *v).collect();
        let corrupted: Vec<f64> = data
            .iter()
            .map(|(v, flip)| if *flip { -v } else { *v })
            .collect();
        let cfg = EstimatorConfig::new(0.2);
        let a = fit(&r, &cfg).unwrap();
        let b = fit(&corrupted, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn generation_is_reproducible_with_valid_signs(
        seed in any::<u64>(),
        n in 1usize..50,
        sigma in 0.0..3.0f64,
        p in 0.0..=1.0f64,
    ) {
        let model = AsciModel::new(
            datagen::linear_signal(n, 0.2).unwrap(),
            0.2,
            sigma,
            AdversaryPolicy::Rademacher { p },
        )
        .unwrap();
        let a = datagen::generate(&model, n, seed).unwrap();
        let b = datagen::generate(&model, n, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for i in 0..n {
            prop_assert!(a.xi[i] == 1.0 || a.xi[i] == -1.0);
            prop_assert_eq!(a.r[i], a.xi[i] * a.clean[i]);
        }
    }
}
