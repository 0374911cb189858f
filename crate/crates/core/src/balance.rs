//! Rotation-based balancing of the four (label, color) categories.
//!
//! Categories larger than the target are subsampled without replacement.
//! Smaller ones keep every original and gain randomly rotated copies until
//! they reach the target, with at most `copies_per_minority_image` copies
//! per original.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::{ColoredDataset, CHANNELS};
use crate::error::{Error, Result};
use crate::rng;

pub const MAX_ROTATION_DEGREES: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BalanceTarget {
    /// The largest count every category can reach.
    Equalized,
    PerCategory(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceConfig {
    pub target: BalanceTarget,
    pub copies_per_minority_image: usize,
    /// Rotation angles are uniform on `±rotation_range` degrees.
    pub rotation_range: f64,
    pub seed: u64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            target: BalanceTarget::Equalized,
            copies_per_minority_image: 24,
            rotation_range: 25.0,
            seed: 0,
        }
    }
}

impl BalanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.copies_per_minority_image == 0 {
            return Err(Error::Config("copies per minority image must be positive".into()));
        }
        if let BalanceTarget::PerCategory(0) = self.target {
            return Err(Error::Config("per-category target must be positive".into()));
        }
        if !(self.rotation_range > 0.0 && self.rotation_range <= MAX_ROTATION_DEGREES) {
            return Err(Error::Config(format!(
                "rotation range {} outside (0, {MAX_ROTATION_DEGREES}]",
                self.rotation_range
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BalanceOutcome {
    pub dataset: ColoredDataset,
    /// Examples per category in the output.
    pub per_category: usize,
    /// For each output example: the index of its source in the input.
    pub sources: Vec<usize>,
    /// For each output example: the applied rotation, `None` for originals.
    pub rotations: Vec<Option<f64>>,
    pub warnings: Vec<String>,
}

/// Rotates a single-channel `height × width` image about its centre with
/// nearest-neighbour sampling. Source pixels outside the image read as 0.
pub fn rotate_image(image: &[u8], height: usize, width: usize, degrees: f64) -> Result<Vec<u8>> {
    if image.len() != height * width {
        return Err(Error::Shape {
            context: "rotated image",
            expected: height * width,
            found: image.len(),
        });
    }
    if !(degrees.abs() <= MAX_ROTATION_DEGREES) {
        return Err(Error::Domain(format!(
            "rotation of {degrees} degrees exceeds ±{MAX_ROTATION_DEGREES}"
        )));
    }
    let (sin, cos) = degrees.to_radians().sin_cos();
    let cy = (height as f64 - 1.0) / 2.0;
    let cx = (width as f64 - 1.0) / 2.0;
    let mut out = vec![0u8; image.len()];
    for r in 0..height {
        for c in 0..width {
            // Inverse map: rotate the destination offset by −θ.
            let dy = r as f64 - cy;
            let dx = c as f64 - cx;
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            let (sr, sc) = (sy.round(), sx.round());
            if sr >= 0.0 && sc >= 0.0 && (sr as usize) < height && (sc as usize) < width {
                out[r * width + c] = image[sr as usize * width + sc as usize];
            }
        }
    }
    Ok(out)
}

/// Rotates every channel of a colored image by the same angle.
pub fn rotate_colored(image: &[u8], height: usize, width: usize, degrees: f64) -> Result<Vec<u8>> {
    let plane = height * width;
    let mut out = vec![0u8; CHANNELS * plane];
    for ch in 0..CHANNELS {
        let src = &image[ch * plane..(ch + 1) * plane];
        if src.iter().all(|&p| p == 0) {
            continue;
        }
        out[ch * plane..(ch + 1) * plane].copy_from_slice(&rotate_image(src, height, width, degrees)?);
    }
    Ok(out)
}

pub fn smote_balance(data: &ColoredDataset, config: &BalanceConfig) -> Result<BalanceOutcome> {
    config.validate()?;
    let mut members: [Vec<usize>; 4] = Default::default();
    for (i, (&y, &c)) in data.labels().iter().zip(data.colors()).enumerate() {
        members[(y as usize) * 2 + c as usize].push(i);
    }
    if let Some(empty) = members.iter().position(|m| m.is_empty()) {
        return Err(Error::CannotBalance(format!(
            "category (label {}, color {}) is empty",
            empty / 2,
            empty % 2
        )));
    }

    let smallest = members.iter().map(Vec::len).min().unwrap_or(0);
    let largest = members.iter().map(Vec::len).max().unwrap_or(0);
    let reachable = largest.min(smallest * (config.copies_per_minority_image + 1));
    let mut warnings = Vec::new();
    let target = match config.target {
        BalanceTarget::Equalized => reachable,
        BalanceTarget::PerCategory(t) if t > reachable => {
            warnings.push(format!(
                "requested {t} examples per category; capped at {reachable} (largest category {largest}, smallest {smallest} with {} copies each)",
                config.copies_per_minority_image
            ));
            reachable
        }
        BalanceTarget::PerCategory(t) => t,
    };
    for w in &warnings {
        log::warn!("{w}");
    }

    let mut rng = rng::rng_from_seed(config.seed);
    let mut sources = Vec::with_capacity(4 * target);
    let mut rotations = Vec::with_capacity(4 * target);
    for group in members.iter_mut() {
        group.shuffle(&mut rng);
        if group.len() >= target {
            sources.extend_from_slice(&group[..target]);
            rotations.extend(std::iter::repeat_n(None, target));
        } else {
            sources.extend_from_slice(group);
            rotations.extend(std::iter::repeat_n(None, group.len()));
            // Round-robin over the shuffled originals.
            for extra in 0..target - group.len() {
                sources.push(group[extra % group.len()]);
                let angle = rng.random_range(-config.rotation_range..=config.rotation_range);
                rotations.push(Some(angle));
            }
        }
    }

    let mut order: Vec<usize> = (0..sources.len()).collect();
    order.shuffle(&mut rng);
    let sources: Vec<usize> = order.iter().map(|&i| sources[i]).collect();
    let rotations: Vec<Option<f64>> = order.iter().map(|&i| rotations[i]).collect();

    let (h, w) = (data.height(), data.width());
    let mut images = Vec::with_capacity(sources.len() * data.image_size());
    for (&src, rot) in sources.iter().zip(&rotations) {
        match rot {
            None => images.extend_from_slice(data.image(src)),
            Some(angle) => images.extend(rotate_colored(data.image(src), h, w, *angle)?),
        }
    }
    let labels = sources.iter().map(|&i| data.labels()[i]).collect();
    let colors = sources.iter().map(|&i| data.colors()[i]).collect();
    let mut dataset = ColoredDataset::from_parts(images, labels, colors, h, w, 0.0)?;
    let pr = dataset.empirical_pr();
    dataset = ColoredDataset::from_parts(
        dataset.images().to_vec(),
        dataset.labels().to_vec(),
        dataset.colors().to_vec(),
        h,
        w,
        pr,
    )?;
    Ok(BalanceOutcome {
        dataset,
        per_category: target,
        sources,
        rotations,
        warnings,
    })
}
