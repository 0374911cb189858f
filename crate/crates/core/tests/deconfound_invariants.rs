mod common;

use common::*;
use learned_deconfound::deconfound::{adjust_test, confounder_column, fit_and_adjust_train, DeconfoundFit};
use learned_deconfound::stats::ols_fit;
use learned_deconfound::Error;
use ndarray::Array2;
use proptest::prelude::*;

fn fit_scm(n: usize, pr: f64, k: usize, seed: u64) -> (learned_deconfound::dataset::SynthScmDataset, Array2<f64>, DeconfoundFit) {
    let data = scm(n, pr, &scm_coefficients(k, seed), 0.1, seed + 1);
    let (adjusted, fit) = fit_and_adjust_train(
        data.x.view(),
        column(&data.y_column()).view(),
        confounder_column(&data.c_column()).view(),
    )
    .unwrap();
    (data, adjusted.values, fit)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjusted_training_features_carry_no_confounder_coefficient(seed in 0u64..10_000, pr in 0.6f64..0.95) {
        let (data, adjusted, _) = fit_scm(500, pr, 5, seed);
        let design = label_confounder_design(&data.y_column(), &data.c_column());
        for col in adjusted.columns() {
            let refit = ols_fit(col, design.view(), &names(&["1", "y", "c"])).unwrap();
            prop_assert!(refit.coefficients[2].abs() < 1e-8);
        }
    }

    #[test]
    fn both_forms_of_the_adjustment_agree(seed in 0u64..10_000) {
        let (data, adjusted, fit) = fit_scm(400, 0.8, 4, seed);
        let y = data.y_column();
        let design = label_confounder_design(&y, &data.c_column());
        for (j, coef) in fit.per_feature.iter().enumerate() {
            let ols = ols_fit(data.x.column(j), design.view(), &names(&["1", "y", "c"])).unwrap();
            for i in 0..y.len() {
                let other = coef.intercept + coef.label * y[i] + ols.residuals[i];
                prop_assert!((adjusted[[i, j]] - other).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn adjustment_is_idempotent(seed in 0u64..10_000) {
        let (data, adjusted, _) = fit_scm(300, 0.75, 3, seed);
        let (again, fit) = fit_and_adjust_train(
            adjusted.view(),
            column(&data.y_column()).view(),
            confounder_column(&data.c_column()).view(),
        )
        .unwrap();
        prop_assert!(fit.per_feature.iter().all(|f| f.confounders[0].abs() < 1e-8));
        prop_assert!(again.values.iter().zip(adjusted.iter()).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn test_adjustment_ignores_labels(seed in 0u64..10_000) {
        let (_, _, fit) = fit_scm(300, 0.8, 3, seed);
        let test = scm(50, 0.3, &scm_coefficients(3, seed), 0.1, seed + 7);
        let c = confounder_column(&test.c_column());
        let a = adjust_test(test.x.view(), c.view(), &fit).unwrap();
        let b = adjust_test(test.x.view(), c.view(), &fit).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}

#[test]
fn scm_coefficients_are_recovered_within_three_standard_errors() {
    let k = 200;
    let data = scm(10_000, 0.9, &scm_coefficients(k, 3), 0.1, 4);
    let design = label_confounder_design(&data.y_column(), &data.c_column());
    let mut within = 0;
    for j in 0..k {
        let fit = ols_fit(data.x.column(j), design.view(), &names(&["1", "y", "c"])).unwrap();
        let truth = data.true_coefs[j].confounder;
        within += usize::from((fit.coefficients[2] - truth).abs() <= 3.0 * fit.standard_errors[2]);
    }
    assert!(within as f64 >= 0.99 * k as f64, "{within}/{k}");
}

#[test]
fn no_confounding_leaves_features_nearly_unchanged() {
    let mut coefs = scm_coefficients(20, 9);
    for c in &mut coefs {
        c.confounder = 0.0;
    }
    let data = scm(10_000, 0.8, &coefs, 0.1, 10);
    let c = data.c_column();
    let (adjusted, fit) =
        fit_and_adjust_train(data.x.view(), column(&data.y_column()).view(), confounder_column(&c).view()).unwrap();
    let design = label_confounder_design(&data.y_column(), &c);
    let mean_c = c.iter().sum::<f64>() / c.len() as f64;
    for j in 0..20 {
        let se = ols_fit(data.x.column(j), design.view(), &names(&["1", "y", "c"])).unwrap().standard_errors[2];
        let mad = (&data.x.column(j) - &adjusted.values.column(j)).mapv(f64::abs).mean().unwrap();
        assert!(mad < 3.0 * se * mean_c, "feature {j}: {mad} vs {}", 3.0 * se * mean_c);
        assert!(fit.per_feature[j].confounders[0].abs() < 3.0 * se);
    }
}

#[test]
fn estimation_error_shrinks_like_one_over_root_n() {
    // Mean absolute deviation of X* from μ + β_Y·Y + W, averaged over seeds.
    let deviation = |n: usize| -> f64 {
        let mut total = 0.0;
        let seeds = 40;
        for s in 0..seeds {
            let coefs = scm_coefficients(4, 1000 + s);
            let data = scm(n, 0.8, &coefs, 0.1, 2000 + s);
            let (adjusted, _) = fit_and_adjust_train(
                data.x.view(),
                column(&data.y_column()).view(),
                confounder_column(&data.c_column()).view(),
            )
            .unwrap();
            let mut dev = 0.0;
            for j in 0..4 {
                for i in 0..n {
                    let clean = data.x[[i, j]] - coefs[j].confounder * data.c[i] as f64;
                    dev += (adjusted.values[[i, j]] - clean).abs();
                }
            }
            total += dev / (4 * n) as f64;
        }
        total / seeds as f64
    };
    let ratio = deviation(10_000) / deviation(1_000);
    let predicted = 1.0 / 10f64.sqrt();
    assert!((0.2..=0.5).contains(&ratio), "ratio {ratio}, predicted {predicted}");
}

#[test]
fn perfectly_coupled_training_colors_are_singular() {
    let data = scm(500, 1.0, &scm_coefficients(2, 1), 0.1, 2);
    let err = fit_and_adjust_train(
        data.x.view(),
        column(&data.y_column()).view(),
        confounder_column(&data.c_column()).view(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::SingularDesign { ref column, .. } if column == "color"), "{err:?}");
}

#[test]
fn shifted_test_features_lose_their_confounder_coefficient() {
    let k = 200;
    let coefs = scm_coefficients(k, 21);
    let train = scm(10_000, 0.9, &coefs, 0.1, 22);
    let (_, fit) = fit_and_adjust_train(
        train.x.view(),
        column(&train.y_column()).view(),
        confounder_column(&train.c_column()).view(),
    )
    .unwrap();
    let test = scm(10_000, 0.2, &coefs, 0.1, 23);
    let adjusted = adjust_test(test.x.view(), confounder_column(&test.c_column()).view(), &fit).unwrap();
    let train_design = label_confounder_design(&train.y_column(), &train.c_column());
    let design = label_confounder_design(&test.y_column(), &test.c_column());
    let mut within = 0;
    for (j, col) in adjusted.values.columns().into_iter().enumerate() {
        let refit = ols_fit(col, design.view(), &names(&["1", "y", "c"])).unwrap();
        // The residual coefficient is the test estimate minus the training
        // estimate, so its standard error combines both fits.
        let train_se = ols_fit(train.x.column(j), train_design.view(), &names(&["1", "y", "c"])).unwrap().standard_errors[2];
        let se = (refit.standard_errors[2].powi(2) + train_se.powi(2)).sqrt();
        within += usize::from(refit.coefficients[2].abs() <= 3.0 * se);
    }
    assert!(within as f64 >= 0.99 * k as f64, "{within}/{k}");
}
