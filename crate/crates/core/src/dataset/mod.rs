//! Raw MNIST, the binary colored variant, and the shift ladder.
//!
//! Labels are binarized (digits 0-4 → 0, 5-9 → 1) and each image is placed in
//! either the red or the green channel. A coupling proportion `pr` fixes
//! exactly how many label-1 images are red and how many label-0 images are
//! green; the remaining images get the other color.

mod colored;
mod idx;
mod synth;

pub use colored::{ColoredDataset, CHANNELS, GREEN, RED};
pub use idx::{
    load_mnist_dir, load_mnist_idx, read_idx_images, read_idx_labels, save_mnist_idx,
    write_idx_images, write_idx_labels, IdxImages, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use synth::{synth_scm, JointTable, ScmCoefficients, SynthScmDataset};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Grayscale digit images with their original 0-9 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMnist {
    pixels: Vec<u8>,
    digits: Vec<u8>,
    rows: usize,
    cols: usize,
}

impl RawMnist {
    pub fn new(pixels: Vec<u8>, digits: Vec<u8>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Consistency(format!("image shape {rows}x{cols}")));
        }
        if pixels.len() != digits.len() * rows * cols {
            return Err(Error::Consistency(format!(
                "{} pixels do not hold {} images of {rows}x{cols}",
                pixels.len(),
                digits.len()
            )));
        }
        if let Some(bad) = digits.iter().find(|&&d| d > 9) {
            return Err(Error::Domain(format!("digit label {bad} outside 0..=9")));
        }
        Ok(Self {
            pixels,
            digits,
            rows,
            cols,
        })
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }

    /// The first `n` examples after a seeded shuffle.
    pub fn subset(&self, n: usize, seed: u64) -> Result<Self> {
        if n > self.len() {
            return Err(Error::Config(format!(
                "requested {n} examples from a set of {}",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut rng::rng_from_seed(seed));
        order.truncate(n);
        Ok(self.select(&order))
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let size = self.rows * self.cols;
        let mut pixels = Vec::with_capacity(indices.len() * size);
        let mut digits = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
            digits.push(self.digits[i]);
        }
        Self {
            pixels,
            digits,
            rows: self.rows,
            cols: self.cols,
        }
    }

    /// 2x2 average pooling (rounded to nearest). Odd trailing rows/columns
    /// are dropped.
    pub fn downscale_2x2(&self) -> Result<Self> {
        let (rows, cols) = (self.rows / 2, self.cols / 2);
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!(
                "cannot downscale {}x{} images",
                self.rows, self.cols
            )));
        }
        let mut pixels = Vec::with_capacity(self.len() * rows * cols);
        for i in 0..self.len() {
            let img = self.image(i);
            for r in 0..rows {
                for c in 0..cols {
                    let at = |dr: usize, dc: usize| img[(2 * r + dr) * self.cols + 2 * c + dc] as u32;
                    let sum = at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1);
                    pixels.push(((sum + 2) / 4) as u8);
                }
            }
        }
        Self::new(pixels, self.digits.clone(), rows, cols)
    }
}

/// Maps digits 0-4 to label 0 and digits 5-9 to label 1.
pub fn binarize_labels(digits: &[u8]) -> Result<Vec<u8>> {
    digits
        .iter()
        .map(|&d| match d {
            0..=4 => Ok(0),
            5..=9 => Ok(1),
            _ => Err(Error::Domain(format!("digit label {d} outside 0..=9"))),
        })
        .collect()
}

/// Colors `round(pr·n₁)` label-1 images red and `round(pr·n₀)` label-0 images
/// green, choosing which ones by a seeded shuffle. All other images get the
/// opposite color. Image order is preserved.
pub fn colorize(raw: &RawMnist, pr: f64, seed: u64) -> Result<ColoredDataset> {
    if !(0.0..=1.0).contains(&pr) {
        return Err(Error::Domain(format!("coupling proportion {pr} outside [0, 1]")));
    }
    let labels = binarize_labels(raw.digits())?;
    let mut rng = rng::rng_from_seed(seed);
    let mut colors = vec![0u8; labels.len()];
    for label in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        members.shuffle(&mut rng);
        let coupled = (pr * members.len() as f64).round() as usize;
        let (usual, unusual) = if label == 1 { (RED, GREEN) } else { (GREEN, RED) };
        for (rank, &i) in members.iter().enumerate() {
            colors[i] = if rank < coupled { usual } else { unusual };
        }
    }

    let size = raw.rows() * raw.cols();
    let mut images = vec![0u8; labels.len() * CHANNELS * size];
    for (i, &color) in colors.iter().enumerate() {
        let start = i * CHANNELS * size + ColoredDataset::channel_of(color) * size;
        images[start..start + size].copy_from_slice(raw.image(i));
    }
    ColoredDataset::from_parts(images, labels, colors, raw.rows(), raw.cols(), pr)
}

/// The six test conditions, from no shift to the strongest reversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShiftLevel {
    NoShift,
    Shift1,
    Shift2,
    Shift3,
    Shift4,
    Shift5,
}

impl ShiftLevel {
    pub const ALL: [ShiftLevel; 6] = [
        ShiftLevel::NoShift,
        ShiftLevel::Shift1,
        ShiftLevel::Shift2,
        ShiftLevel::Shift3,
        ShiftLevel::Shift4,
        ShiftLevel::Shift5,
    ];

    /// Coupling proportion used to color the test set at this level.
    pub fn pr(self) -> f64 {
        match self {
            ShiftLevel::NoShift => TRAIN_PR,
            ShiftLevel::Shift1 => 0.9,
            ShiftLevel::Shift2 => 0.7,
            ShiftLevel::Shift3 => 0.5,
            ShiftLevel::Shift4 => 0.3,
            ShiftLevel::Shift5 => 0.1,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ShiftLevel::NoShift => "no-shift",
            ShiftLevel::Shift1 => "shift-1",
            ShiftLevel::Shift2 => "shift-2",
            ShiftLevel::Shift3 => "shift-3",
            ShiftLevel::Shift4 => "shift-4",
            ShiftLevel::Shift5 => "shift-5",
        }
    }

    /// True when color and label are independent at this level.
    pub fn decouples_color(self) -> bool {
        self.pr() == 0.5
    }
}

impl fmt::Display for ShiftLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShiftLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShiftLevel::ALL
            .into_iter()
            .find(|level| level.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown shift level '{s}'")))
    }
}

/// Coupling proportion of the training set.
pub const TRAIN_PR: f64 = 0.98;

/// One colored training set plus the six colored test sets.
#[derive(Debug, Clone)]
pub struct ShiftSuite {
    pub train: ColoredDataset,
    pub tests: Vec<(ShiftLevel, ColoredDataset)>,
}

impl ShiftSuite {
    pub fn test(&self, level: ShiftLevel) -> &ColoredDataset {
        &self.tests[level.index()].1
    }
}

/// Colors the training images once at `pr = 0.98` and the same test images
/// six times, once per shift level, each with its own seed stream.
pub fn make_shift_suite(train: &RawMnist, test: &RawMnist, seed: u64) -> Result<ShiftSuite> {
    let train_set = colorize(train, TRAIN_PR, rng::derive_seed(seed, 0))?;
    let tests = ShiftLevel::ALL
        .into_iter()
        .map(|level| {
            let stream = 1 + level.index() as u64;
            colorize(test, level.pr(), rng::derive_seed(seed, stream)).map(|d| (level, d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShiftSuite {
        train: train_set,
        tests,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn fake_mnist(n: usize, side: usize, seed: u64) -> RawMnist {
        use rand::Rng;
        let mut rng = rng::rng_from_seed(seed);
        let mut pixels = vec![0u8; n * side * side];
        for p in pixels.iter_mut() {
            *p = if rng.random_bool(0.3) { rng.random_range(1..=255) } else { 0 };
        }
        // Guarantee at least one lit pixel per image.
        for i in 0..n {
            pixels[i * side * side + side / 2] = 200;
        }
        let digits = (0..n).map(|i| (i % 10) as u8).collect();
        RawMnist::new(pixels, digits, side, side).unwrap()
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize_labels(&[0, 3, 4]).unwrap(), vec![0, 0, 0]);
        assert_eq!(binarize_labels(&[5, 9]).unwrap(), vec![1, 1]);
        assert_eq!(binarize_labels(&[4, 5]).unwrap(), vec![0, 1]);
        assert!(matches!(binarize_labels(&[10]), Err(Error::Domain(_))));
    }

    #[test]
    fn colorize_exact_counts() {
        let raw = fake_mnist(1000, 6, 1);
        for pr in [0.0, 0.1, 0.5, 0.98, 1.0] {
            let data = colorize(&raw, pr, 3).unwrap();
            let counts = data.category_counts();
            let n1 = counts[1][0] + counts[1][1];
            let n0 = counts[0][0] + counts[0][1];
            assert_eq!(counts[1][RED as usize], (pr * n1 as f64).round() as usize);
            assert_eq!(counts[0][GREEN as usize], (pr * n0 as f64).round() as usize);
            data.validate().unwrap();
        }
    }

    #[test]
    fn full_coupling_colors_every_image_by_label() {
        let raw = fake_mnist(200, 4, 2);
        let data = colorize(&raw, 1.0, 9).unwrap();
        for (&y, &c) in data.labels().iter().zip(data.colors()) {
            assert_eq!(c, if y == 1 { RED } else { GREEN });
        }
    }

    #[test]
    fn full_scale_category_proportions() {
        let raw = fake_mnist(10_000, 2, 4);
        let data = colorize(&raw, 0.98, 5).unwrap();
        let counts = data.category_counts();
        let n = data.len() as f64;
        assert!((counts[0][GREEN as usize] as f64 / n - 0.49).abs() < 1e-3);
        assert!((counts[1][GREEN as usize] as f64 / n - 0.01).abs() < 1e-3);
        assert!((counts[0][RED as usize] as f64 / n - 0.01).abs() < 1e-3);
        assert!((counts[1][RED as usize] as f64 / n - 0.49).abs() < 1e-3);
    }

    #[test]
    fn rejects_out_of_range_pr() {
        let raw = fake_mnist(10, 2, 4);
        assert!(matches!(colorize(&raw, 1.5, 0), Err(Error::Domain(_))));
        assert!(matches!(colorize(&raw, -0.1, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn colorize_is_deterministic() {
        let raw = fake_mnist(300, 4, 6);
        assert_eq!(colorize(&raw, 0.7, 11).unwrap(), colorize(&raw, 0.7, 11).unwrap());
        assert_ne!(
            colorize(&raw, 0.7, 11).unwrap().colors(),
            colorize(&raw, 0.7, 12).unwrap().colors()
        );
    }

    #[test]
    fn shift_suite_ladder() {
        let train = fake_mnist(400, 4, 7);
        let test = fake_mnist(200, 4, 8);
        let suite = make_shift_suite(&train, &test, 1).unwrap();
        assert_eq!(suite.train.pr(), 0.98);
        let prs: Vec<f64> = suite.tests.iter().map(|(_, d)| d.pr()).collect();
        assert_eq!(prs, vec![0.98, 0.9, 0.7, 0.5, 0.3, 0.1]);
        let names: Vec<&str> = suite.tests.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(names, ["no-shift", "shift-1", "shift-2", "shift-3", "shift-4", "shift-5"]);
        for (_, d) in &suite.tests {
            assert_eq!(d.labels(), suite.test(ShiftLevel::NoShift).labels());
        }
        assert_eq!("shift-3".parse::<ShiftLevel>().unwrap(), ShiftLevel::Shift3);
        assert!(ShiftLevel::Shift3.decouples_color());
    }

    #[test]
    fn subset_and_downscale() {
        let raw = fake_mnist(50, 4, 9);
        let sub = raw.subset(20, 3).unwrap();
        assert_eq!(sub.len(), 20);
        assert_eq!(sub, raw.subset(20, 3).unwrap());
        assert!(raw.subset(51, 3).is_err());

        let img = RawMnist::new(vec![0, 4, 8, 8, 1, 3, 8, 8, 0, 0, 0, 0, 0, 0, 0, 255], vec![3], 4, 4)
            .unwrap();
        let small = img.downscale_2x2().unwrap();
        assert_eq!((small.rows(), small.cols()), (2, 2));
        assert_eq!(small.pixels(), &[2, 8, 0, 64]);
    }
}
