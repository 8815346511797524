//! IDX file reader (plain or gzip-compressed).

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use super::data::Dataset;
use super::FlError;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_all(path: &Path) -> Result<Vec<u8>, FlError> {
    let io = |e: std::io::Error| FlError::Io { path: path.to_path_buf(), message: e.to_string() };
    let mut raw = Vec::new();
    BufReader::new(File::open(path).map_err(io)?).read_to_end(&mut raw).map_err(io)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(io)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn header(bytes: &[u8], words: usize, path: &Path) -> Result<Vec<u32>, FlError> {
    if bytes.len() < 4 * words {
        return Err(FlError::Format { path: path.to_path_buf(), message: "truncated header".into() });
    }
    Ok(bytes[..4 * words].chunks(4).map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]])).collect())
}

/// Returns `(rows, cols, pixels)` with pixels stored image after image.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, Vec<u8>), FlError> {
    let bytes = read_all(path)?;
    let h = header(&bytes, 4, path)?;
    if h[0] != IMAGES_MAGIC {
        return Err(FlError::Format { path: path.to_path_buf(), message: format!("bad magic {:#x}", h[0]) });
    }
    let (n, rows, cols) = (h[1] as usize, h[2] as usize, h[3] as usize);
    let body = &bytes[16..];
    if body.len() != n * rows * cols {
        return Err(FlError::Format {
            path: path.to_path_buf(),
            message: format!("expected {} pixel bytes, found {}", n * rows * cols, body.len()),
        });
    }
    Ok((rows, cols, body.to_vec()))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>, FlError> {
    let bytes = read_all(path)?;
    let h = header(&bytes, 2, path)?;
    if h[0] != LABELS_MAGIC {
        return Err(FlError::Format { path: path.to_path_buf(), message: format!("bad magic {:#x}", h[0]) });
    }
    let body = &bytes[8..];
    if body.len() != h[1] as usize {
        return Err(FlError::Format {
            path: path.to_path_buf(),
            message: format!("expected {} labels, found {}", h[1], body.len()),
        });
    }
    Ok(body.to_vec())
}

fn locate(dir: &Path, stem: &str) -> PathBuf {
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        gz
    } else {
        dir.join(stem)
    }
}

fn load_split(dir: &Path, prefix: &str, limit: Option<usize>) -> Result<Dataset, FlError> {
    let img_path = locate(dir, &format!("{prefix}-images-idx3-ubyte"));
    let lbl_path = locate(dir, &format!("{prefix}-labels-idx1-ubyte"));
    let (rows, cols, pixels) = read_idx_images(&img_path)?;
    let labels = read_idx_labels(&lbl_path)?;
    let dim = rows * cols;
    if pixels.len() != dim * labels.len() {
        return Err(FlError::Format { path: img_path, message: "image and label counts differ".into() });
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1).max(10);
    let features = pixels.iter().map(|&p| p as f32 / 255.0).collect();
    let data = Dataset::new(dim, classes, features, labels)?;
    Ok(match limit {
        Some(n) => data.truncate(n),
        None => data,
    })
}

/// Loads `train-*` and `t10k-*` IDX files from `dir`, keeping the first
/// `train_limit` / `test_limit` samples. Pixels are scaled to `[0, 1]`.
pub fn load_mnist(
    dir: &Path,
    train_limit: Option<usize>,
    test_limit: Option<usize>,
) -> Result<(Dataset, Dataset), FlError> {
    Ok((load_split(dir, "train", train_limit)?, load_split(dir, "t10k", test_limit)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx(dir: &Path, prefix: &str, n: usize, gz: bool) {
        let mut img = vec![0, 0, 8, 3];
        for v in [n as u32, 2, 2] {
            img.extend_from_slice(&v.to_be_bytes());
        }
        img.extend((0..n * 4).map(|i| (i * 17 % 256) as u8));
        let mut lbl = vec![0, 0, 8, 1];
        lbl.extend_from_slice(&(n as u32).to_be_bytes());
        lbl.extend((0..n).map(|i| (i % 10) as u8));
        for (stem, bytes) in [("images-idx3-ubyte", img), ("labels-idx1-ubyte", lbl)] {
            if gz {
                let f = File::create(dir.join(format!("{prefix}-{stem}.gz"))).unwrap();
                let mut enc = flate2::write::GzEncoder::new(f, flate2::Compression::default());
                enc.write_all(&bytes).unwrap();
                enc.finish().unwrap();
            } else {
                std::fs::write(dir.join(format!("{prefix}-{stem}")), bytes).unwrap();
            }
        }
    }

    #[test]
    fn reads_plain_and_gzip() {
        let dir = tempfile::tempdir().unwrap();
        write_idx(dir.path(), "train", 12, true);
        write_idx(dir.path(), "t10k", 5, false);
        let (train, test) = load_mnist(dir.path(), Some(8), None).unwrap();
        assert_eq!((train.len(), train.dim(), train.classes()), (8, 4, 10));
        assert_eq!(test.len(), 5);
        assert_eq!(train.label(3), 3);
        assert!((train.features(0)[1] - 17.0 / 255.0).abs() < 1e-7);
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_mnist(dir.path(), None, None).unwrap_err();
        assert!(err.to_string().contains("train-images-idx3-ubyte"), "{err}");
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, [0u8; 16]).unwrap();
        assert!(matches!(read_idx_images(&p), Err(FlError::Format { .. })));
    }
}
