//! IDX container used by the MNIST distribution: a big-endian magic number,
//! big-endian `u32` dimension sizes, then row-major unsigned bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::RawMnist;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32_be<R: Read>(reader: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_be_bytes(buf))
}

/// Parsed IDX image tensor.
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn read_idx_images<R: Read>(reader: &mut R) -> Result<IdxImages> {
    let magic = read_u32_be(reader)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "image file magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}"
        )));
    }
    let count = read_u32_be(reader)? as usize;
    let rows = read_u32_be(reader)? as usize;
    let cols = read_u32_be(reader)? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    reader.read_exact(&mut pixels)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn read_idx_labels<R: Read>(reader: &mut R) -> Result<Vec<u8>> {
    let magic = read_u32_be(reader)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "label file magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}"
        )));
    }
    let count = read_u32_be(reader)? as usize;
    let mut labels = vec![0u8; count];
    reader.read_exact(&mut labels)?;
    Ok(labels)
}

pub fn write_idx_images<W: Write>(
    writer: &mut W,
    pixels: &[u8],
    count: usize,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if pixels.len() != count * rows * cols {
        return Err(Error::Shape {
            context: "IDX image payload",
            expected: count * rows * cols,
            found: pixels.len(),
        });
    }
    writer.write_all(&IMAGE_MAGIC.to_be_bytes())?;
    for dim in [count, rows, cols] {
        writer.write_all(&(dim as u32).to_be_bytes())?;
    }
    writer.write_all(pixels)?;
    Ok(())
}

pub fn write_idx_labels<W: Write>(writer: &mut W, labels: &[u8]) -> Result<()> {
    writer.write_all(&LABEL_MAGIC.to_be_bytes())?;
    writer.write_all(&(labels.len() as u32).to_be_bytes())?;
    writer.write_all(labels)?;
    Ok(())
}

/// Loads an image/label file pair into a [`RawMnist`].
pub fn load_mnist_idx(image_path: impl AsRef<Path>, label_path: impl AsRef<Path>) -> Result<RawMnist> {
    let images = read_idx_images(&mut BufReader::new(File::open(image_path.as_ref())?))?;
    let digits = read_idx_labels(&mut BufReader::new(File::open(label_path.as_ref())?))?;
    if images.count != digits.len() {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            images.count,
            digits.len()
        )));
    }
    RawMnist::new(images.pixels, digits, images.rows, images.cols)
}

/// Loads the standard train and test splits from a directory holding the
/// four uncompressed MNIST files.
pub fn load_mnist_dir(dir: impl AsRef<Path>) -> Result<(RawMnist, RawMnist)> {
    let dir = dir.as_ref();
    let train = load_mnist_idx(
        dir.join("train-images-idx3-ubyte"),
        dir.join("train-labels-idx1-ubyte"),
    )?;
    let test = load_mnist_idx(
        dir.join("t10k-images-idx3-ubyte"),
        dir.join("t10k-labels-idx1-ubyte"),
    )?;
    Ok((train, test))
}

/// Writes a [`RawMnist`] back out as an IDX file pair.
pub fn save_mnist_idx(
    raw: &RawMnist,
    image_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(image_path)?);
    write_idx_images(&mut w, raw.pixels(), raw.len(), raw.rows(), raw.cols())?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(label_path)?);
    write_idx_labels(&mut w, raw.digits())?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn round_trip_small_file() {
        let pixels: Vec<u8> = (0..2 * 3 * 4).map(|v| v as u8).collect();
        let mut buf = Vec::new();
        write_idx_images(&mut buf, &pixels, 2, 3, 4).unwrap();
        assert_eq!(&buf[..4], &[0, 0, 8, 3]);
        assert_eq!(&buf[4..8], &[0, 0, 0, 2]);
        let parsed = read_idx_images(&mut Cursor::new(buf)).unwrap();
        assert_eq!((parsed.count, parsed.rows, parsed.cols), (2, 3, 4));
        assert_eq!(parsed.pixels, pixels);
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let mut buf = Vec::new();
        write_idx_labels(&mut buf, &[1, 2, 3]).unwrap();
        let err = read_idx_images(&mut Cursor::new(buf)).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn truncated_payload_is_an_io_error() {
        let mut buf = Vec::new();
        write_idx_images(&mut buf, &[0u8; 8], 2, 2, 2).unwrap();
        buf.truncate(buf.len() - 3);
        let err = read_idx_images(&mut Cursor::new(buf)).unwrap_err();
        assert!(matches!(err, Error::Io(_)), "{err}");
    }
}
