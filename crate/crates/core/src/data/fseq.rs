//! Little-endian binary layout for dense float matrices.
//!
//! | bytes        | content                               |
//! |--------------|---------------------------------------|
//! | 0..4         | ASCII magic (`FSEQ`, or `ATTR` for attribution dumps) |
//! | 4..8         | `u32` column count D                  |
//! | 8..12        | `u32` row count T                     |
//! | 12..12+4·T·D | `f32` payload, row-major              |
//!
//! No padding, no trailer. Values are widened to `f64` on read.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: [u8; 4] = *b"FSEQ";
pub const ATTRIBUTION_MAGIC: [u8; 4] = *b"ATTR";
pub const HEADER_LEN: usize = 12;

/// Exact encoded size for a `rows × cols` matrix.
pub fn encoded_len(rows: usize, cols: usize) -> usize {
    HEADER_LEN + 4 * rows * cols
}

pub fn encode_matrix(magic: [u8; 4], matrix: ArrayView2<'_, f64>) -> Result<Vec<u8>> {
    let (rows, cols) = matrix.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::Domain(format!("cannot encode an empty {rows}x{cols} matrix")));
    }
    let rows32 = u32::try_from(rows).map_err(|_| Error::Domain("too many rows".into()))?;
    let cols32 = u32::try_from(cols).map_err(|_| Error::Domain("too many columns".into()))?;

    let mut out = Vec::with_capacity(encoded_len(rows, cols));
    out.extend_from_slice(&magic);
    out.extend_from_slice(&cols32.to_le_bytes());
    out.extend_from_slice(&rows32.to_le_bytes());
    for (i, &v) in matrix.iter().enumerate() {
        let narrowed = v as f32;
        if !narrowed.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite value {v} at row {}, column {}",
                i / cols,
                i % cols
            )));
        }
        out.extend_from_slice(&narrowed.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(magic: [u8; 4], bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format {
            offset: bytes.len(),
            reason: format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()),
        });
    }
    if bytes[..4] != magic {
        return Err(Error::Format {
            offset: 0,
            reason: format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[..4]),
                String::from_utf8_lossy(&magic)
            ),
        });
    }
    let cols = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format {
            offset: if cols == 0 { 4 } else { 8 },
            reason: format!("empty {rows}x{cols} matrix"),
        });
    }
    let expected = encoded_len(rows, cols);
    if bytes.len() < expected {
        return Err(Error::Format {
            offset: bytes.len(),
            reason: format!("truncated payload: {} of {expected} bytes", bytes.len()),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format {
            offset: expected,
            reason: format!("{} trailing bytes", bytes.len() - expected),
        });
    }

    let mut values = Vec::with_capacity(rows * cols);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format {
                offset: HEADER_LEN + 4 * i,
                reason: format!("non-finite value {v}"),
            });
        }
        values.push(f64::from(v));
    }
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked above"))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_matrix_file(magic: [u8; 4], matrix: ArrayView2<'_, f64>, path: &Path) -> Result<()> {
    let bytes = encode_matrix(magic, matrix)?;
    write_bytes(path, &bytes)
}

pub fn read_matrix_file(magic: [u8; 4], path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(magic, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_value_file_is_sixteen_bytes() {
        let bytes = encode_matrix(FEATURE_MAGIC, array![[0.0]].view()).unwrap();
        // 4 magic + 4 D + 4 T + 4 payload
        assert_eq!(bytes.len(), 16);
        assert_eq!(bytes, [b'F', b'S', b'E', b'Q', 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn header_stores_columns_before_rows() {
        let m = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let bytes = encode_matrix(FEATURE_MAGIC, m.view()).unwrap();
        assert_eq!(&bytes[4..8], &3u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
        assert_eq!(decode_matrix(FEATURE_MAGIC, &bytes).unwrap(), m);
    }

    #[test]
    fn rejects_wrong_magic() {
        let mut bytes = encode_matrix(FEATURE_MAGIC, array![[1.0]].view()).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        let err = decode_matrix(FEATURE_MAGIC, &bytes).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");
    }

    #[test]
    fn attribution_magic_is_not_a_feature_file() {
        let bytes = encode_matrix(ATTRIBUTION_MAGIC, array![[-1.0]].view()).unwrap();
        assert!(decode_matrix(FEATURE_MAGIC, &bytes).is_err());
        assert_eq!(decode_matrix(ATTRIBUTION_MAGIC, &bytes).unwrap()[[0, 0]], -1.0);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = encode_matrix(FEATURE_MAGIC, array![[1.0, 2.0]].view()).unwrap();
        match decode_matrix(FEATURE_MAGIC, &bytes[..17]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 17),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            decode_matrix(FEATURE_MAGIC, &bytes[..7]),
            Err(Error::Format { offset: 7, .. })
        ));
    }

    #[test]
    fn stored_nan_is_reported_with_offset() {
        let mut bytes = encode_matrix(FEATURE_MAGIC, array![[1.0, 2.0]].view()).unwrap();
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        match decode_matrix(FEATURE_MAGIC, &bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn encode_rejects_empty_and_nonfinite() {
        assert!(encode_matrix(FEATURE_MAGIC, Array2::<f64>::zeros((0, 3)).view()).is_err());
        assert!(encode_matrix(FEATURE_MAGIC, array![[f64::NAN]].view()).is_err());
        // finite in f64, overflows f32
        assert!(encode_matrix(FEATURE_MAGIC, array![[1e300]].view()).is_err());
    }
}
