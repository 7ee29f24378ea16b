//! IDX tensor files (the MNIST distribution format).
//!
//! Layout: `00 00 <type> <ndims>`, then `ndims` big-endian u32 sizes, then the
//! payload in big-endian element order.

use std::fs;
use std::path::{Path, PathBuf};

use super::{DataError, Dataset, Provenance, Result, Split};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    U8(Vec<u8>),
    I8(Vec<i8>),
    I16(Vec<i16>),
    I32(Vec<i32>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl IdxData {
    fn type_code(&self) -> u8 {
        match self {
            IdxData::U8(_) => 0x08,
            IdxData::I8(_) => 0x09,
            IdxData::I16(_) => 0x0B,
            IdxData::I32(_) => 0x0C,
            IdxData::F32(_) => 0x0D,
            IdxData::F64(_) => 0x0E,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            IdxData::U8(v) => v.len(),
            IdxData::I8(v) => v.len(),
            IdxData::I16(v) => v.len(),
            IdxData::I32(v) => v.len(),
            IdxData::F32(v) => v.len(),
            IdxData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn element_size(code: u8) -> Result<usize> {
    match code {
        0x08 | 0x09 => Ok(1),
        0x0B => Ok(2),
        0x0C | 0x0D => Ok(4),
        0x0E => Ok(8),
        other => Err(DataError::UnsupportedType(other)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: IdxData,
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor> {
    if bytes.len() < 4 {
        return Err(DataError::Truncated {
            expected: 4,
            found: bytes.len(),
        });
    }
    let magic = [bytes[0], bytes[1], bytes[2], bytes[3]];
    if magic[0] != 0 || magic[1] != 0 || magic[3] == 0 {
        return Err(DataError::BadMagic(magic));
    }
    let code = magic[2];
    let size = element_size(code)?;
    let ndims = magic[3] as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(DataError::Truncated {
            expected: header,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| DataError::Layout("dimension product overflows".into()))?;
    let expected = count
        .checked_mul(size)
        .and_then(|p| p.checked_add(header))
        .ok_or_else(|| DataError::Layout("payload size overflows".into()))?;
    if bytes.len() < expected {
        return Err(DataError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(DataError::TrailingBytes(bytes.len() - expected));
    }
    let payload = &bytes[header..];
    let data = match code {
        0x08 => IdxData::U8(payload.to_vec()),
        0x09 => IdxData::I8(payload.iter().map(|&b| b as i8).collect()),
        0x0B => IdxData::I16(
            payload
                .chunks_exact(2)
                .map(|c| i16::from_be_bytes([c[0], c[1]]))
                .collect(),
        ),
        0x0C => IdxData::I32(
            payload
                .chunks_exact(4)
                .map(|c| i32::from_be_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        0x0D => IdxData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_be_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        _ => IdxData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_be_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };
    Ok(IdxTensor { dims, data })
}

pub fn serialize_idx(t: &IdxTensor) -> Result<Vec<u8>> {
    if t.dims.is_empty() || t.dims.len() > 255 {
        return Err(DataError::Layout(format!("{} dimensions", t.dims.len())));
    }
    let count: usize = t.dims.iter().product();
    if count != t.data.len() {
        return Err(DataError::Layout(format!(
            "dims {:?} hold {count} elements, data has {}",
            t.dims,
            t.data.len()
        )));
    }
    let mut out = vec![0, 0, t.data.type_code(), t.dims.len() as u8];
    for &d in &t.dims {
        let d = u32::try_from(d).map_err(|_| DataError::Layout(format!("dimension {d} too large")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    match &t.data {
        IdxData::U8(v) => out.extend_from_slice(v),
        IdxData::I8(v) => out.extend(v.iter().map(|&x| x as u8)),
        IdxData::I16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        IdxData::I32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        IdxData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
        IdxData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_be_bytes())),
    }
    Ok(out)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Locates the image/label files for a split in an MNIST-style directory,
/// accepting both `train-images-idx3-ubyte` and `train-images.idx3-ubyte` spellings.
pub fn find_idx_pair(dir: &Path, split: Split) -> Result<(PathBuf, PathBuf)> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let find = |kind: &str, nd: u8| -> Result<PathBuf> {
        for sep in ['-', '.'] {
            let p = dir.join(format!("{prefix}-{kind}{sep}idx{nd}-ubyte"));
            if p.is_file() {
                return Ok(p);
            }
        }
        Err(DataError::Io {
            path: dir.join(format!("{prefix}-{kind}-idx{nd}-ubyte")).display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "IDX file not found"),
        })
    };
    Ok((find("images", 3)?, find("labels", 1)?))
}

/// Loads an image/label IDX pair: images flattened to rows and scaled to `[0, 1]`.
pub fn load_image_label_pair(image_file: &Path, label_file: &Path, split: Split) -> Result<Dataset> {
    let images = parse_idx(&read(image_file)?)?;
    let labels = parse_idx(&read(label_file)?)?;
    let (IdxData::U8(pixels), IdxData::U8(raw_labels)) = (&images.data, &labels.data) else {
        return Err(DataError::Layout("images and labels must be unsigned bytes".into()));
    };
    if images.dims.len() < 2 || labels.dims.len() != 1 {
        return Err(DataError::Layout(format!(
            "image dims {:?}, label dims {:?}",
            images.dims, labels.dims
        )));
    }
    let n = images.dims[0];
    if n != labels.dims[0] {
        return Err(DataError::CountMismatch {
            images: n,
            labels: labels.dims[0],
        });
    }
    let dim: usize = images.dims[1..].iter().product();
    let inputs = Matrix::from_vec(n, dim, pixels.iter().map(|&p| p as f32 / 255.0).collect())?;
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    Dataset::new(
        inputs,
        labels,
        num_classes,
        split,
        Provenance {
            source: image_file.display().to_string(),
            indices: (0..n).collect(),
            fine_labels: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_2x3_bytes() {
        let bytes = [0, 0, 8, 2, 0, 0, 0, 2, 0, 0, 0, 3, 1, 2, 3, 4, 5, 6];
        let t = parse_idx(&bytes).unwrap();
        assert_eq!(t.dims, vec![2, 3]);
        assert_eq!(t.data, IdxData::U8(vec![1, 2, 3, 4, 5, 6]));
        assert_eq!(serialize_idx(&t).unwrap(), bytes);
    }

    #[test]
    fn truncated_payload() {
        let bytes = [0, 0, 8, 2, 0, 0, 0, 2, 0, 0, 0, 3, 1, 2, 3, 4, 5];
        assert!(matches!(
            parse_idx(&bytes),
            Err(DataError::Truncated { expected: 18, found: 17 })
        ));
    }

    #[test]
    fn distinct_header_errors() {
        assert!(matches!(parse_idx(&[1, 0, 8, 1, 0, 0, 0, 0]), Err(DataError::BadMagic(_))));
        assert!(matches!(
            parse_idx(&[0, 0, 0x0A, 1, 0, 0, 0, 0]),
            Err(DataError::UnsupportedType(0x0A))
        ));
        assert!(matches!(parse_idx(&[0, 0, 8]), Err(DataError::Truncated { .. })));
    }

    #[test]
    fn label_vector() {
        let mut bytes = vec![0, 0, 8, 1, 0, 0, 0, 10];
        bytes.extend(0..10u8);
        let t = parse_idx(&bytes).unwrap();
        assert_eq!(t.dims, vec![10]);
        assert_eq!(t.data.len(), 10);
    }

    #[test]
    fn mismatched_counts_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let img = IdxTensor {
            dims: vec![3, 2, 2],
            data: IdxData::U8(vec![0, 255, 0, 255, 1, 2, 3, 4, 9, 9, 9, 9]),
        };
        let lab = IdxTensor {
            dims: vec![2],
            data: IdxData::U8(vec![0, 1]),
        };
        let ip = dir.path().join("img");
        let lp = dir.path().join("lab");
        fs::write(&ip, serialize_idx(&img).unwrap()).unwrap();
        fs::write(&lp, serialize_idx(&lab).unwrap()).unwrap();
        assert!(matches!(
            load_image_label_pair(&ip, &lp, Split::Train),
            Err(DataError::CountMismatch { images: 3, labels: 2 })
        ));
        let lab3 = IdxTensor {
            dims: vec![3],
            data: IdxData::U8(vec![0, 1, 1]),
        };
        fs::write(&lp, serialize_idx(&lab3).unwrap()).unwrap();
        let ds = load_image_label_pair(&ip, &lp, Split::Train).unwrap();
        assert_eq!(ds.inputs.shape(), (3, 4));
        assert_eq!(ds.inputs.row(0), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(ds.num_classes, 2);
    }
}
