//! Counterfactual feature adjustment.
//!
//! Each training feature `X_j` is regressed on `[1, Y, C_1..C_m]`. The
//! adjusted feature subtracts only the confounder terms,
//! `X*_j = X_j − Σ_i β̂_{j,i} C_i`, which equals `μ̂_j + β̂_{j,Y} Y + Ŵ_j`.
//! Test features are adjusted with the training coefficients and the test
//! confounders alone; test labels never enter.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::stats::QrDecomposition;

/// Per-feature regression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCoefficients {
    pub intercept: f64,
    pub label: f64,
    pub confounders: Vec<f64>,
}

/// Coefficients estimated on the training set, reused for test adjustment.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconfoundFit {
    pub per_feature: Vec<FeatureCoefficients>,
    pub confounder_names: Vec<String>,
}

/// Adjusted features `X*`, same shape as the input features.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualFeatures {
    pub values: Array2<f64>,
}

impl DeconfoundFit {
    pub fn n_features(&self) -> usize {
        self.per_feature.len()
    }

    pub fn n_confounders(&self) -> usize {
        self.confounder_names.len()
    }

    /// Tab-separated table, one row per feature: index, intercept, label
    /// coefficient, then one coefficient per confounder. Preceded by a `#`
    /// header line naming the columns.
    pub fn write_table<W: Write>(&self, writer: &mut W) -> Result<()> {
        let mut header = String::from("# feature\tintercept\tlabel");
        for name in &self.confounder_names {
            write!(header, "\t{name}").expect("string write");
        }
        writeln!(writer, "{header}")?;
        for (j, coef) in self.per_feature.iter().enumerate() {
            let mut line = format!("{j}\t{:?}\t{:?}", coef.intercept, coef.label);
            for b in &coef.confounders {
                write!(line, "\t{b:?}").expect("string write");
            }
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }

    pub fn read_table<R: BufRead>(reader: R) -> Result<Self> {
        let mut names: Option<Vec<String>> = None;
        let mut per_feature = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let cols: Vec<&str> = rest.trim().split('\t').collect();
                names = Some(cols.iter().skip(3).map(|s| s.to_string()).collect());
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 3 {
                return Err(Error::Parse(format!("line {}: expected at least 3 fields", lineno + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: '{s}': {e}", lineno + 1)))
            };
            let index: usize = fields[0]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: feature index: {e}", lineno + 1)))?;
            if index != per_feature.len() {
                return Err(Error::Parse(format!(
                    "line {}: feature index {index}, expected {}",
                    lineno + 1,
                    per_feature.len()
                )));
            }
            per_feature.push(FeatureCoefficients {
                intercept: parse(fields[1])?,
                label: parse(fields[2])?,
                confounders: fields[3..].iter().map(|s| parse(s)).collect::<Result<_>>()?,
            });
        }
        let m = per_feature.first().map_or(0, |c| c.confounders.len());
        if per_feature.iter().any(|c| c.confounders.len() != m) {
            return Err(Error::Parse("rows disagree on the number of confounders".into()));
        }
        let confounder_names = match names {
            Some(n) if n.len() == m => n,
            _ => (0..m).map(|i| format!("c{i}")).collect(),
        };
        Ok(Self {
            per_feature,
            confounder_names,
        })
    }
}

/// Dummy coding of a categorical confounder with `levels` levels: `levels − 1`
/// columns, the first level is the reference.
pub fn dummy_encode(values: &[usize], levels: usize) -> Result<Array2<f64>> {
    if levels < 2 {
        return Err(Error::Domain(format!("categorical confounder with {levels} levels")));
    }
    let mut out = Array2::zeros((values.len(), levels - 1));
    for (i, &v) in values.iter().enumerate() {
        if v >= levels {
            return Err(Error::Domain(format!("level {v} outside 0..{levels}")));
        }
        if v > 0 {
            out[[i, v - 1]] = 1.0;
        }
    }
    Ok(out)
}

/// A single binary confounder as an `n × 1` matrix.
pub fn confounder_column(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column shape")
}

fn check_finite(what: &str, values: ArrayView2<f64>) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{what} contains non-finite values")));
    }
    Ok(())
}

fn design_names(m: usize, names: Option<&[String]>) -> Vec<String> {
    let mut out = vec!["intercept".to_string(), "label".to_string()];
    match names {
        Some(n) => out.extend(n.iter().cloned()),
        None if m == 1 => out.push("color".into()),
        None => out.extend((0..m).map(|i| format!("c{i}"))),
    }
    out
}

/// Fits the per-feature regressions on the training set and returns the
/// adjusted training features with the fit.
pub fn fit_and_adjust_train(
    features: ArrayView2<f64>,
    labels: ArrayView1<f64>,
    confounders: ArrayView2<f64>,
) -> Result<(CounterfactualFeatures, DeconfoundFit)> {
    fit_and_adjust_train_named(features, labels, confounders, None)
}

pub fn fit_and_adjust_train_named(
    features: ArrayView2<f64>,
    labels: ArrayView1<f64>,
    confounders: ArrayView2<f64>,
    confounder_names: Option<&[String]>,
) -> Result<(CounterfactualFeatures, DeconfoundFit)> {
    let (n, k) = features.dim();
    let m = confounders.ncols();
    if labels.len() != n {
        return Err(Error::Shape {
            context: "training labels vs feature rows",
            expected: n,
            found: labels.len(),
        });
    }
    if confounders.nrows() != n {
        return Err(Error::Shape {
            context: "training confounder rows vs feature rows",
            expected: n,
            found: confounders.nrows(),
        });
    }
    if let Some(names) = confounder_names {
        if names.len() != m {
            return Err(Error::Shape {
                context: "confounder names",
                expected: m,
                found: names.len(),
            });
        }
    }
    if n <= m + 2 {
        return Err(Error::Domain(format!(
            "adjustment needs more than {} rows, got {n}",
            m + 2
        )));
    }
    check_finite("training features", features)?;
    check_finite("training confounders", confounders)?;

    let mut design = Array2::zeros((n, m + 2));
    design.column_mut(0).fill(1.0);
    design.column_mut(1).assign(&labels);
    design.slice_mut(ndarray::s![.., 2..]).assign(&confounders);
    let names = design_names(m, confounder_names);
    let qr = QrDecomposition::new(design.view(), &names)?;

    let mut per_feature = Vec::with_capacity(k);
    for column in features.axis_iter(Axis(1)) {
        let coefs = qr.solve(column)?;
        per_feature.push(FeatureCoefficients {
            intercept: coefs[0],
            label: coefs[1],
            confounders: coefs[2..].to_vec(),
        });
    }
    let fit = DeconfoundFit {
        per_feature,
        confounder_names: names[2..].to_vec(),
    };
    let adjusted = subtract_confounder_terms(features, confounders, &fit);
    Ok((adjusted, fit))
}

/// Adjusts test features with training coefficients. Takes no labels.
pub fn adjust_test(
    features: ArrayView2<f64>,
    confounders: ArrayView2<f64>,
    fit: &DeconfoundFit,
) -> Result<CounterfactualFeatures> {
    if features.ncols() != fit.n_features() {
        return Err(Error::Shape {
            context: "test feature columns vs fit",
            expected: fit.n_features(),
            found: features.ncols(),
        });
    }
    if confounders.ncols() != fit.n_confounders() {
        return Err(Error::Shape {
            context: "test confounder columns vs fit",
            expected: fit.n_confounders(),
            found: confounders.ncols(),
        });
    }
    if confounders.nrows() != features.nrows() {
        return Err(Error::Shape {
            context: "test confounder rows vs feature rows",
            expected: features.nrows(),
            found: confounders.nrows(),
        });
    }
    check_finite("test features", features)?;
    check_finite("test confounders", confounders)?;
    Ok(subtract_confounder_terms(features, confounders, fit))
}

fn subtract_confounder_terms(
    features: ArrayView2<f64>,
    confounders: ArrayView2<f64>,
    fit: &DeconfoundFit,
) -> CounterfactualFeatures {
    let mut values = features.to_owned();
    for (mut col, coef) in values.axis_iter_mut(Axis(1)).zip(&fit.per_feature) {
        for (i, beta) in coef.confounders.iter().enumerate() {
            col.scaled_add(-beta, &confounders.column(i));
        }
    }
    CounterfactualFeatures { values }
}
