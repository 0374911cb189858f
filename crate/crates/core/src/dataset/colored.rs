use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const GREEN: u8 = 0;
pub const RED: u8 = 1;
/// Channels per image: red (0) and green (1). Blue is always empty and is
/// not stored.
pub const CHANNELS: usize = 2;

/// Two-channel colored digits with binary labels and colors.
///
/// Images are stored as `n × 2 × H × W` bytes. For every image the channel
/// that does not match its color is all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredDataset {
    images: Vec<u8>,
    labels: Vec<u8>,
    colors: Vec<u8>,
    height: usize,
    width: usize,
    pr: f64,
}

impl ColoredDataset {
    pub fn from_parts(
        images: Vec<u8>,
        labels: Vec<u8>,
        colors: Vec<u8>,
        height: usize,
        width: usize,
        pr: f64,
    ) -> Result<Self> {
        let n = labels.len();
        if colors.len() != n {
            return Err(Error::Consistency(format!(
                "{n} labels but {} colors",
                colors.len()
            )));
        }
        if images.len() != n * CHANNELS * height * width {
            return Err(Error::Consistency(format!(
                "{} image bytes do not hold {n} images of {CHANNELS}x{height}x{width}",
                images.len()
            )));
        }
        if let Some(bad) = labels.iter().chain(&colors).find(|&&v| v > 1) {
            return Err(Error::Domain(format!("label/color value {bad} is not binary")));
        }
        Ok(Self {
            images,
            labels,
            colors,
            height,
            width,
            pr,
        })
    }

    pub fn channel_of(color: u8) -> usize {
        if color == RED {
            0
        } else {
            1
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Bytes per image across both channels.
    pub fn image_size(&self) -> usize {
        CHANNELS * self.height * self.width
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.image_size();
        &self.images[i * size..(i + 1) * size]
    }

    pub fn images(&self) -> &[u8] {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn colors(&self) -> &[u8] {
        &self.colors
    }

    /// The coupling proportion the set was generated with. For decoded or
    /// rebalanced sets this is the empirical share of label-1/red and
    /// label-0/green images.
    pub fn pr(&self) -> f64 {
        self.pr
    }

    pub fn empirical_pr(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let coupled = self
            .labels
            .iter()
            .zip(&self.colors)
            .filter(|(&y, &c)| (y == 1 && c == RED) || (y == 0 && c == GREEN))
            .count();
        coupled as f64 / self.len() as f64
    }

    /// Counts indexed `[label][color]`.
    pub fn category_counts(&self) -> [[usize; 2]; 2] {
        let mut counts = [[0usize; 2]; 2];
        for (&y, &c) in self.labels.iter().zip(&self.colors) {
            counts[y as usize][c as usize] += 1;
        }
        counts
    }

    /// Confounder column (color as 0/1) for the adjustment design.
    pub fn color_column(&self) -> Vec<f64> {
        self.colors.iter().map(|&c| c as f64).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let size = self.image_size();
        let mut images = Vec::with_capacity(indices.len() * size);
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        let mut out = Self {
            images,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            colors: indices.iter().map(|&i| self.colors[i]).collect(),
            height: self.height,
            width: self.width,
            pr: self.pr,
        };
        out.pr = out.empirical_pr();
        out
    }

    /// Checks that each image's inactive channel is empty.
    pub fn validate(&self) -> Result<()> {
        let plane = self.height * self.width;
        for i in 0..self.len() {
            let img = self.image(i);
            let inactive = 1 - Self::channel_of(self.colors[i]);
            if img[inactive * plane..(inactive + 1) * plane].iter().any(|&p| p != 0) {
                return Err(Error::Consistency(format!(
                    "image {i} has content outside its {} channel",
                    if self.colors[i] == RED { "red" } else { "green" }
                )));
            }
        }
        Ok(())
    }

    /// Binary container: `n, channels, H, W` as little-endian `u32`, then the
    /// image bytes, then one byte per label, then one byte per color.
    pub fn write_to<W: Write>(&self, writer: &mut W) -> Result<()> {
        for v in [self.len(), CHANNELS, self.height, self.width] {
            writer.write_all(&(v as u32).to_le_bytes())?;
        }
        writer.write_all(&self.images)?;
        writer.write_all(&self.labels)?;
        writer.write_all(&self.colors)?;
        Ok(())
    }

    pub fn read_from<R: Read>(reader: &mut R) -> Result<Self> {
        let mut header = [0u32; 4];
        for v in header.iter_mut() {
            let mut buf = [0u8; 4];
            reader.read_exact(&mut buf)?;
            *v = u32::from_le_bytes(buf);
        }
        let [n, channels, height, width] = header.map(|v| v as usize);
        if channels != CHANNELS {
            return Err(Error::Format(format!(
                "colored dataset has {channels} channels, expected {CHANNELS}"
            )));
        }
        let mut images = vec![0u8; n * channels * height * width];
        reader.read_exact(&mut images)?;
        let mut labels = vec![0u8; n];
        reader.read_exact(&mut labels)?;
        let mut colors = vec![0u8; n];
        reader.read_exact(&mut colors)?;
        let mut out = Self::from_parts(images, labels, colors, height, width, 0.0)?;
        out.pr = out.empirical_pr();
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}
