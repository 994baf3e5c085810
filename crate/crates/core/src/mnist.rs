//! IDX reader/writer and the MNIST directory convention.
//!
//! Images: big-endian `0x00000803`, count, rows, cols, then `count*rows*cols`
//! unsigned bytes. Labels: big-endian `0x00000801`, count, then `count` bytes.
//! Files starting with the gzip signature `1f 8b` are inflated first.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const CLASSES: usize = 10;
pub const IMAGE_SIDE: usize = 28;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Reference MD5 sums of the uncompressed official files.
pub const OFFICIAL_MD5: [(&str, &str); 4] = [
    (TRAIN_IMAGES, "6bbc9ace898e44ae57da46a324031adb"),
    (TRAIN_LABELS, "a25bea736e30d166cdddb491f175f624"),
    (TEST_IMAGES, "2646ac647ad5339dbf082846283269ea"),
    (TEST_LABELS, "27ae3e4e09519cfbb04c329615203637"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, image-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols)
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxLabels {
    pub labels: Vec<u8>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn check_header(path: &Path, bytes: &[u8], magic: u32, header_len: usize) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            path: path.into(),
            expected: header_len,
            actual: bytes.len(),
        });
    }
    let actual = be_u32(bytes, 0);
    if actual != magic {
        return Err(Error::Magic {
            path: path.into(),
            expected: magic,
            actual,
        });
    }
    if bytes.len() < header_len {
        return Err(Error::Truncated {
            path: path.into(),
            expected: header_len,
            actual: bytes.len(),
        });
    }
    Ok(())
}

pub fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<IdxImages> {
    check_header(path, bytes, IMAGES_MAGIC, 16)?;
    let count = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8) as usize;
    let cols = be_u32(bytes, 12) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "{}: image dimensions {rows}x{cols}",
            path.display()
        )));
    }
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            actual: bytes.len(),
        });
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: bytes[16..expected].to_vec(),
    })
}

pub fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<IdxLabels> {
    check_header(path, bytes, LABELS_MAGIC, 8)?;
    let count = be_u32(bytes, 4) as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            actual: bytes.len(),
        });
    }
    Ok(IdxLabels {
        labels: bytes[8..expected].to_vec(),
    })
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    parse_idx_images(path, &read_bytes(path)?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<IdxLabels> {
    let path = path.as_ref();
    parse_idx_labels(path, &read_bytes(path)?)
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count() as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &IdxLabels) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.labels.len() as u32).to_be_bytes());
    out.extend_from_slice(&labels.labels);
    out
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_idx_images(images)).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &IdxLabels) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_idx_labels(labels)).map_err(|e| Error::io(path, e))
}

/// Scales pixels to `[0, 1]` and one-hot encodes labels over ten classes.
pub fn normalize(images: &IdxImages, labels: &IdxLabels) -> Result<Dataset> {
    let n = images.count();
    if n != labels.labels.len() {
        return Err(Error::Pairing {
            images: n,
            labels: labels.labels.len(),
        });
    }
    if n == 0 {
        return Err(Error::invalid("dataset must not be empty"));
    }
    if let Some(&bad) = labels.labels.iter().find(|&&l| l as usize >= CLASSES) {
        return Err(Error::invalid(format!("label {bad} outside 0..9")));
    }
    let dim = images.rows * images.cols;
    // Pixel p of image i lands at row p, column i.
    let mut data = vec![0.0; dim * n];
    for i in 0..n {
        for (p, &px) in images.image(i).iter().enumerate() {
            data[p * n + i] = px as f64 / 255.0;
        }
    }
    let inputs = Matrix::new(dim, n, data)?;
    let classes: Vec<usize> = labels.labels.iter().map(|&l| l as usize).collect();
    Dataset::from_class_indices(inputs, CLASSES, &classes)
}

/// Inverse of [`normalize`]: rounds inputs back to bytes and labels to class indices.
pub fn denormalize(data: &Dataset, rows: usize, cols: usize) -> Result<(IdxImages, IdxLabels)> {
    if rows * cols != data.input_dim() {
        return Err(Error::invalid(format!(
            "{rows}x{cols} images do not match input dimension {}",
            data.input_dim()
        )));
    }
    let n = data.len();
    let dim = data.input_dim();
    let mut pixels = vec![0u8; n * dim];
    for p in 0..dim {
        for (i, &x) in data.inputs().row(p).iter().enumerate() {
            pixels[i * dim + p] = (x * 255.0).round() as u8;
        }
    }
    let labels = data.class_indices().into_iter().map(|c| c as u8).collect();
    Ok((IdxImages { rows, cols, pixels }, IdxLabels { labels }))
}

/// Loads and normalizes one image/label file pair.
pub fn load_pair(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let images = load_idx_images(images)?;
    let labels = load_idx_labels(labels)?;
    normalize(&images, &labels)
}

fn locate(dir: &Path, stem: &str) -> Option<PathBuf> {
    [stem.to_string(), format!("{stem}.gz")]
        .into_iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}

/// Paths of the four MNIST files in `dir` (plain or `.gz`), or an error
/// listing every expected filename when any is missing.
pub fn locate_files(dir: &Path) -> Result<[PathBuf; 4]> {
    let stems = [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS];
    let found: Vec<Option<PathBuf>> = stems.iter().map(|s| locate(dir, s)).collect();
    if found.iter().any(Option::is_none) {
        return Err(Error::MissingData {
            dir: dir.into(),
            expected: stems.iter().map(|s| format!("{s}[.gz]")).collect(),
        });
    }
    let mut it = found.into_iter().map(Option::unwrap);
    Ok([
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    ])
}

pub fn has_mnist(dir: &Path) -> bool {
    locate_files(dir).is_ok()
}

/// `(train, test)` from a directory following the standard MNIST names.
pub fn load_mnist_dir(dir: impl AsRef<Path>) -> Result<(Dataset, Dataset)> {
    let [train_x, train_y, test_x, test_y] = locate_files(dir.as_ref())?;
    Ok((load_pair(train_x, train_y)?, load_pair(test_x, test_y)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    // Two 28x28 images: the first all zeros except pixel 0 = 255, the second
    // a ramp of (p mod 256). Labels 3 and 9.
    fn fixture_bytes() -> (Vec<u8>, Vec<u8>) {
        let mut images = vec![0x00, 0x00, 0x08, 0x03, 0, 0, 0, 2, 0, 0, 0, 28, 0, 0, 0, 28];
        let mut first = vec![0u8; 784];
        first[0] = 255;
        images.extend_from_slice(&first);
        images.extend((0..784).map(|p| (p % 256) as u8));
        let labels = vec![0x00, 0x00, 0x08, 0x01, 0, 0, 0, 2, 3, 9];
        (images, labels)
    }

    #[test]
    fn fixture_pixels_recovered_exactly() {
        let (img, lbl) = fixture_bytes();
        let images = parse_idx_images(Path::new("fx"), &img).unwrap();
        let labels = parse_idx_labels(Path::new("fx"), &lbl).unwrap();
        assert_eq!(images.count(), 2);
        assert_eq!((images.rows, images.cols), (28, 28));
        assert_eq!(images.image(0)[0], 255);
        assert_eq!(images.image(1)[300], 44);
        assert_eq!(labels.labels, vec![3, 9]);

        let data = normalize(&images, &labels).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.inputs().get(0, 0), 1.0);
        assert_eq!(data.inputs().get(1, 0), 0.0);
        assert_eq!(data.inputs().get(255, 1), 1.0);
        assert_eq!(data.class_of(0), 3);
        assert_eq!(data.labels().column_values(0)[3], 1.0);
        for c in 0..data.len() {
            assert_eq!(data.labels().column_values(c).iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn bad_magic_names_both_values() {
        let (mut img, _) = fixture_bytes();
        img[3] = 0x01;
        let err = parse_idx_images(Path::new("x"), &img).unwrap_err();
        assert!(matches!(
            err,
            Error::Magic {
                expected: 0x803,
                actual: 0x801,
                ..
            }
        ));
        assert!(err.to_string().contains("0x00000803"));
    }

    #[test]
    fn truncated_files_are_rejected() {
        let (img, lbl) = fixture_bytes();
        let err = parse_idx_images(Path::new("x"), &img[..img.len() - 1]).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }));
        assert!(parse_idx_labels(Path::new("x"), &lbl[..9]).is_err());
        assert!(parse_idx_labels(Path::new("x"), &lbl[..2]).is_err());
    }

    #[test]
    fn pairing_and_label_range() {
        let (img, _) = fixture_bytes();
        let images = parse_idx_images(Path::new("x"), &img).unwrap();
        let one = IdxLabels { labels: vec![1] };
        assert!(matches!(
            normalize(&images, &one).unwrap_err(),
            Error::Pairing { images: 2, labels: 1 }
        ));
        let bad = IdxLabels { labels: vec![1, 10] };
        assert!(matches!(normalize(&images, &bad).unwrap_err(), Error::Validation(_)));
    }

    #[test]
    fn gzip_is_transparent() {
        let (img, lbl) = fixture_bytes();
        let dir = tempfile::tempdir().unwrap();
        let gz_path = dir.path().join("images.gz");
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&img).unwrap();
        fs::write(&gz_path, enc.finish().unwrap()).unwrap();
        let lbl_path = dir.path().join("labels");
        fs::write(&lbl_path, &lbl).unwrap();
        let data = load_pair(&gz_path, &lbl_path).unwrap();
        assert_eq!(data.len(), 2);
    }

    #[test]
    fn missing_directory_lists_expected_names() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_mnist_dir(dir.path()).unwrap_err();
        let msg = err.to_string();
        for stem in [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS] {
            assert!(msg.contains(stem), "{msg}");
        }
    }

    #[test]
    fn encode_round_trips_bytes() {
        let (img, lbl) = fixture_bytes();
        let images = parse_idx_images(Path::new("x"), &img).unwrap();
        let labels = parse_idx_labels(Path::new("x"), &lbl).unwrap();
        assert_eq!(encode_idx_images(&images), img);
        assert_eq!(encode_idx_labels(&labels), lbl);
        let data = normalize(&images, &labels).unwrap();
        let (back_images, back_labels) = denormalize(&data, 28, 28).unwrap();
        assert_eq!(encode_idx_images(&back_images), img);
        assert_eq!(encode_idx_labels(&back_labels), lbl);
    }
}
