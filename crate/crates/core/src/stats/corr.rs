use crate::error::{Error, Result};

/// `|r|` within this distance of 1 is treated as exact collinearity.
const COLLINEAR_GAP: f64 = 1e-12;

fn centered_moments(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        saa += dx * dx;
        sbb += dy * dy;
        sab += dx * dy;
    }
    (saa, sbb, sab)
}

fn is_degenerate(values: &[f64], ss: f64) -> bool {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ss <= values.len() as f64 * (1e-12 * scale).powi(2)
}

/// Sample Pearson correlation.
pub fn pearson_corr(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            context: "correlation inputs",
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(Error::Domain(format!("correlation needs n >= 3, got {}", a.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Domain("correlation input contains non-finite values".into()));
    }
    let (saa, sbb, sab) = centered_moments(a, b);
    if is_degenerate(a, saa) {
        return Err(Error::DegenerateVariance("first variable is constant".into()));
    }
    if is_degenerate(b, sbb) {
        return Err(Error::DegenerateVariance("second variable is constant".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// First-order partial correlation of `a` and `b` given `z`:
/// `(r_ab − r_az·r_bz) / √((1 − r_az²)(1 − r_bz²))`.
pub fn partial_corr(a: &[f64], b: &[f64], z: &[f64]) -> Result<f64> {
    let r_ab = pearson_corr(a, b)?;
    let r_az = pearson_corr(a, z)?;
    let r_bz = pearson_corr(b, z)?;
    if 1.0 - r_az.abs() < COLLINEAR_GAP {
        return Err(Error::Collinearity(format!("first variable is collinear with the conditioning variable (r = {r_az})")));
    }
    if 1.0 - r_bz.abs() < COLLINEAR_GAP {
        return Err(Error::Collinearity(format!("second variable is collinear with the conditioning variable (r = {r_bz})")));
    }
    let denom = ((1.0 - r_az * r_az) * (1.0 - r_bz * r_bz)).sqrt();
    Ok(((r_ab - r_az * r_bz) / denom).clamp(-1.0, 1.0))
}
