//! Conditional-independence checks among the predicted probability `R`,
//! the confounder `C` and the label `Y`.
//!
//! A classifier that ignores the confounder should leave `R ⊥ C | Y` while
//! every other pair stays dependent. Dependence and independence are judged
//! by correlation magnitude against two thresholds.

use std::fmt;

use crate::dataset::ShiftLevel;
use crate::error::{Error, Result};
use crate::stats::{partial_corr, pearson_corr};

pub const MIN_SAMPLE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiThresholds {
    /// Magnitudes at or below this count as independence.
    pub independence: f64,
    /// Magnitudes at or above this count as dependence.
    pub dependence: f64,
}

impl Default for CiThresholds {
    fn default() -> Self {
        Self {
            independence: 0.1,
            dependence: 0.2,
        }
    }
}

impl CiThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.independence && self.independence < self.dependence && self.dependence <= 1.0) {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 <= independence < dependence <= 1, got {} and {}",
                self.independence, self.dependence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    RY,
    RC,
    CY,
    RYGivenC,
    RCGivenY,
    CYGivenR,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::RY,
        Relation::RC,
        Relation::CY,
        Relation::RYGivenC,
        Relation::RCGivenY,
        Relation::CYGivenR,
    ];

    /// Column name used in CSV output.
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::RY => "corRY",
            Relation::RC => "corRC",
            Relation::CY => "corCY",
            Relation::RYGivenC => "corRY_givenC",
            Relation::RCGivenY => "corRC_givenY",
            Relation::CYGivenR => "corCY_givenR",
        }
    }

    /// Whether the expected pattern calls for independence.
    pub fn expects_independence(self) -> bool {
        self == Relation::RCGivenY
    }

    /// Relations whose expected dependence cannot hold when the color is
    /// assigned independently of the label. With `C ⊥ Y` and `R ⊥ C | Y`,
    /// `C` is independent of `(R, Y)` jointly, so all three pairs that
    /// involve `C` without conditioning on `Y` vanish.
    fn undefined_when_decoupled(self) -> bool {
        matches!(self, Relation::RC | Relation::CY | Relation::CYGivenR)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotEvaluated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotEvaluated => "not-evaluated",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiReport {
    pub cor_ry: f64,
    pub cor_rc: f64,
    pub cor_cy: f64,
    pub cor_ry_given_c: f64,
    pub cor_rc_given_y: f64,
    pub cor_cy_given_r: f64,
    pub thresholds: CiThresholds,
    /// Per-relation verdicts in [`Relation::ALL`] order.
    pub verdicts: [Verdict; 6],
    /// Pass iff no evaluated relation fails.
    pub overall: Verdict,
}

impl CiReport {
    pub fn value(&self, relation: Relation) -> f64 {
        match relation {
            Relation::RY => self.cor_ry,
            Relation::RC => self.cor_rc,
            Relation::CY => self.cor_cy,
            Relation::RYGivenC => self.cor_ry_given_c,
            Relation::RCGivenY => self.cor_rc_given_y,
            Relation::CYGivenR => self.cor_cy_given_r,
        }
    }

    pub fn verdict(&self, relation: Relation) -> Verdict {
        let idx = Relation::ALL.iter().position(|&r| r == relation).unwrap_or(0);
        self.verdicts[idx]
    }

    /// CSV header for the fields written by [`CiReport::csv_fields`].
    pub fn csv_header() -> String {
        let mut cols: Vec<String> = Relation::ALL.iter().map(|r| r.as_str().to_string()).collect();
        cols.extend(Relation::ALL.iter().map(|r| format!("{}_verdict", r.as_str())));
        cols.push("verdict".into());
        cols.join(",")
    }

    /// Six correlations at full precision, six per-relation verdicts, and
    /// the overall verdict.
    pub fn csv_fields(&self) -> String {
        let mut cols: Vec<String> = Relation::ALL.iter().map(|&r| format!("{:?}", self.value(r))).collect();
        cols.extend(self.verdicts.iter().map(|v| v.as_str().to_string()));
        cols.push(self.overall.as_str().to_string());
        cols.join(",")
    }
}

fn distinct_values(values: &[f64]) -> usize {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted.len()
}

fn judge(relation: Relation, value: f64, thresholds: &CiThresholds) -> Verdict {
    let pass = if relation.expects_independence() {
        value.abs() <= thresholds.independence
    } else {
        value.abs() >= thresholds.dependence
    };
    if pass {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Computes the six marginal and partial correlations and judges them
/// against the expected pattern. When `shift` decouples color from label,
/// relations that cannot show dependence are reported as not evaluated.
pub fn ci_report(r: &[f64], c: &[f64], y: &[f64], thresholds: &CiThresholds, shift: Option<ShiftLevel>) -> Result<CiReport> {
    thresholds.validate()?;
    for (name, v) in [("confounder", c), ("label", y)] {
        if v.len() != r.len() {
            return Err(Error::Consistency(format!(
                "{name} has {} values but predictions have {}",
                v.len(),
                r.len()
            )));
        }
    }
    if r.len() < MIN_SAMPLE {
        return Err(Error::Domain(format!("CI report needs at least {MIN_SAMPLE} examples, got {}", r.len())));
    }
    if distinct_values(c) < 2 {
        return Err(Error::DegenerateVariance("confounder takes a single value".into()));
    }
    if distinct_values(y) < 2 {
        return Err(Error::DegenerateVariance("label takes a single value".into()));
    }

    let cor_ry = pearson_corr(r, y)?;
    let cor_rc = pearson_corr(r, c)?;
    let cor_cy = pearson_corr(c, y)?;
    let cor_ry_given_c = partial_corr(r, y, c)?;
    let cor_rc_given_y = partial_corr(r, c, y)?;
    let cor_cy_given_r = partial_corr(c, y, r)?;
    let values = [cor_ry, cor_rc, cor_cy, cor_ry_given_c, cor_rc_given_y, cor_cy_given_r];

    let decoupled = shift.is_some_and(ShiftLevel::decouples_color);
    let mut verdicts = [Verdict::NotEvaluated; 6];
    for (i, &rel) in Relation::ALL.iter().enumerate() {
        verdicts[i] = if decoupled && rel.undefined_when_decoupled() {
            Verdict::NotEvaluated
        } else {
            judge(rel, values[i], thresholds)
        };
    }
    let overall = if verdicts.contains(&Verdict::Fail) {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    Ok(CiReport {
        cor_ry,
        cor_rc,
        cor_cy,
        cor_ry_given_c,
        cor_rc_given_y,
        cor_cy_given_r,
        thresholds: *thresholds,
        verdicts,
        overall,
    })
}
