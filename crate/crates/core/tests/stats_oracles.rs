mod common;

use common::*;
use learned_deconfound::stats::{
    classify, logistic_fit, ols_fit, partial_corr, pearson_corr, predict_proba, LogisticOptions, QrDecomposition,
};
use learned_deconfound::Error;
use ndarray::{Array1, Array2};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qr_matches_normal_equations(seed in any::<u64>(), n in 20usize..200, p in 2usize..6) {
        let (design, response) = random_regression(n, p, seed);
        let cols: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
        let fit = ols_fit(column(&response).view(), design.view(), &cols).unwrap();
        let oracle = normal_equations(&design, &response);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_the_design(seed in any::<u64>()) {
        let (design, response) = random_regression(80, 4, seed);
        let fit = ols_fit(column(&response).view(), design.view(), &names(&["a", "b", "c", "d"])).unwrap();
        for col in design.columns() {
            prop_assert!(col.dot(&fit.residuals).abs() < 1e-9);
        }
    }

    #[test]
    fn partial_corr_matches_residual_oracle(seed in any::<u64>(), n in 10usize..300) {
        let (a, b, z) = correlated_triple(n, seed);
        let formula = partial_corr(&a, &b, &z).unwrap();
        let oracle = residual_partial_corr(&a, &b, &z);
        prop_assert!((formula - oracle).abs() < 1e-10, "{formula} vs {oracle}");
        prop_assert!((-1.0..=1.0).contains(&formula));
    }

    #[test]
    fn pearson_is_symmetric_and_scale_invariant(seed in any::<u64>(), scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        let (a, b, _) = correlated_triple(50, seed);
        let r = pearson_corr(&a, &b).unwrap();
        prop_assert!((r - pearson_corr(&b, &a).unwrap()).abs() < 1e-14);
        let scaled: Vec<f64> = a.iter().map(|v| v * scale + shift).collect();
        prop_assert!((r - pearson_corr(&scaled, &b).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn standard_errors_match_the_closed_form() {
    let (design, response) = random_regression(60, 3, 11);
    let fit = ols_fit(column(&response).view(), design.view(), &names(&["1", "a", "b"])).unwrap();
    // σ² (XᵀX)⁻¹ via the normal equations, one unit vector at a time.
    let n = design.nrows();
    let rss: f64 = fit.residuals.iter().map(|r| r * r).sum();
    let sigma2 = rss / (n - 3) as f64;
    let gram = design.t().dot(&design);
    for j in 0..3 {
        let mut e = vec![0.0; 3];
        e[j] = 1.0;
        // Solve G x = e through the oracle by feeding an identity design.
        let inv_col = normal_equations(&gram, &e);
        let se = (sigma2 * inv_col[j]).sqrt();
        assert!((se - fit.standard_errors[j]).abs() < 1e-10 * se.max(1.0), "{se} vs {}", fit.standard_errors[j]);
    }
}

#[test]
fn near_collinear_design_is_rejected_with_a_name() {
    let n = 100;
    let design = Array2::from_shape_fn((n, 3), |(i, j)| match j {
        0 => 1.0,
        1 => i as f64,
        _ => 2.0 * i as f64 + 1e-12 * (i % 3) as f64,
    });
    let err = QrDecomposition::new(design.view(), &names(&["intercept", "t", "twice_t"])).unwrap_err();
    match err {
        Error::SingularDesign { column, min_singular_value } => {
            assert!(column == "t" || column == "twice_t", "{column}");
            assert!(min_singular_value < 1e-8);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn logistic_optimum_has_zero_penalized_gradient() {
    let (x, _) = random_regression(300, 3, 5);
    let features = x.slice(ndarray::s![.., 1..]).to_owned();
    let labels: Vec<u8> = features
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| u8::from(r[0] - 0.5 * r[1] + 0.3 * ((i * 37 % 11) as f64 - 5.0) / 5.0 > 0.0))
        .collect();
    let opts = LogisticOptions::default();
    let fit = logistic_fit(features.view(), &labels, &opts).unwrap();
    assert!(fit.converged);
    // Independent gradient of the mean log-likelihood minus λ/2‖w‖².
    let p = predict_proba(&fit, features.view()).unwrap();
    let resid: Array1<f64> = labels.iter().zip(&p).map(|(&y, &pi)| y as f64 - pi).collect();
    let n = labels.len() as f64;
    assert!((resid.sum() / n).abs() < 1e-6);
    for j in 0..features.ncols() {
        let g = features.column(j).dot(&resid) / n - opts.l2 * fit.weights[j + 1];
        assert!(g.abs() < 1e-6, "feature {j}: {g}");
    }
    let preds = classify(p.as_slice().unwrap(), 0.5);
    let acc = preds.iter().zip(&labels).filter(|(a, b)| a == b).count() as f64 / n;
    assert!(acc > 0.8);
}
