//! `NCF1` feature files.
//!
//! ```text
//! "NCF1" | n u32 | d u32 | k u32 | layer u32 | iteration u64 | n·d f32 | n u32 labels
//! ```
//! All integers and floats little-endian, features row-major.

use super::{CollapseError, FeatureMatrix, Result};
use crate::data::Split;
use crate::numerics::Matrix;

pub const NCF1_MAGIC: &[u8; 4] = b"NCF1";
const HEADER: usize = 4 + 4 * 4 + 8;

pub fn write_ncf1(fm: &FeatureMatrix) -> Vec<u8> {
    let (n, d) = fm.features.shape();
    let mut out = Vec::with_capacity(HEADER + n * d * 4 + n * 4);
    out.extend_from_slice(NCF1_MAGIC);
    for v in [n as u32, d as u32, fm.num_classes as u32, fm.layer] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&fm.iteration.to_le_bytes());
    for v in fm.features.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &y in &fm.labels {
        out.extend_from_slice(&(y as u32).to_le_bytes());
    }
    out
}

/// Parses an NCF1 buffer; the split is not stored in the file and is supplied by the caller.
pub fn read_ncf1(bytes: &[u8], split: Split) -> Result<FeatureMatrix> {
    if bytes.len() < HEADER {
        return Err(CollapseError::Truncated {
            expected: HEADER,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != NCF1_MAGIC {
        return Err(CollapseError::BadMagic(bytes[..4].try_into().unwrap()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let (n, d, k, layer) = (u32_at(4) as usize, u32_at(8) as usize, u32_at(12) as usize, u32_at(16));
    let iteration = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_add(n))
        .and_then(|c| c.checked_mul(4))
        .and_then(|c| c.checked_add(HEADER))
        .ok_or(CollapseError::Truncated {
            expected: usize::MAX,
            found: bytes.len(),
        })?;
    if bytes.len() < expected {
        return Err(CollapseError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CollapseError::TrailingBytes(bytes.len() - expected));
    }
    let feat_end = HEADER + n * d * 4;
    let features: Vec<f32> = bytes[HEADER..feat_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels: Vec<usize> = bytes[feat_end..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let features = Matrix::from_vec(n, d, features)
        .map_err(|e| CollapseError::Shape(e.to_string()))?;
    FeatureMatrix::new(features, labels, k, layer, iteration, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_truncation() {
        let fm = FeatureMatrix::new(
            Matrix::from_rows(&[vec![1.5, -2.0], vec![0.0, 3.25], vec![7.0, 7.0]]).unwrap(),
            vec![0, 2, 1],
            3,
            2,
            1234,
            Split::Test,
        )
        .unwrap();
        let bytes = write_ncf1(&fm);
        assert_eq!(bytes.len(), HEADER + 6 * 4 + 3 * 4);
        assert_eq!(read_ncf1(&bytes, Split::Test).unwrap(), fm);
        assert!(matches!(
            read_ncf1(&bytes[..bytes.len() - 1], Split::Test),
            Err(CollapseError::Truncated { .. })
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_ncf1(&bad, Split::Test), Err(CollapseError::BadMagic(_))));
    }
}
