//! Binary and JSON containers for dictionaries and data matrices.
//!
//! Layout: 4-byte magic, 1 version byte, two little-endian `u64` dimensions
//! (rows, cols), then `rows * cols` little-endian `f64` in column-major order.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{DltfError, Result};
use crate::model::{DataMatrix, Dictionary};

pub const DICTIONARY_MAGIC: &[u8; 4] = b"DLTF";
pub const DATA_MAGIC: &[u8; 4] = b"DLTX";
pub const FORMAT_VERSION: u8 = 1;

const HEADER_LEN: usize = 4 + 1 + 8 + 8;

/// Serializes a matrix with the given magic.
pub fn encode_matrix(magic: &[u8; 4], a: &Array2<f64>) -> Vec<u8> {
    let (rows, cols) = a.dim();
    let mut buf = Vec::with_capacity(HEADER_LEN + rows * cols * 8);
    buf.extend_from_slice(magic);
    buf.push(FORMAT_VERSION);
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for j in 0..cols {
        for i in 0..rows {
            buf.extend_from_slice(&a[[i, j]].to_le_bytes());
        }
    }
    buf
}

/// Parses a matrix container, checking magic, version and payload length.
pub fn decode_matrix(magic: &[u8; 4], bytes: &[u8]) -> Result<Array2<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(DltfError::MalformedHeader(format!(
            "file has {} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != magic {
        return Err(DltfError::MalformedHeader(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(DltfError::MalformedHeader(format!(
            "unsupported version {}",
            bytes[4]
        )));
    }
    let rows = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| DltfError::DimensionMismatch(format!("{rows}x{cols} overflows")))?;
    if payload.len() as u64 != expected {
        return Err(DltfError::DimensionMismatch(format!(
            "header says {rows}x{cols} ({expected} bytes), payload has {} bytes",
            payload.len()
        )));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut a = Array2::zeros((rows, cols));
    for (idx, chunk) in payload.chunks_exact(8).enumerate() {
        let (j, i) = (idx / rows, idx % rows);
        a[[i, j]] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    Ok(a)
}

pub fn save_dictionary(w: &Dictionary, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_matrix(DICTIONARY_MAGIC, &w.view().to_owned()))?;
    Ok(())
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<Dictionary> {
    let bytes = fs::read(path)?;
    Dictionary::new(decode_matrix(DICTIONARY_MAGIC, &bytes)?)
}

pub fn save_data(x: &DataMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_matrix(DATA_MAGIC, &x.view().to_owned()))?;
    Ok(())
}

pub fn load_data(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let bytes = fs::read(path)?;
    DataMatrix::new(decode_matrix(DATA_MAGIC, &bytes)?)
}

/// JSON interop form; `data` is row-major.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DictionaryJson {
    pub n: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

impl From<&Dictionary> for DictionaryJson {
    fn from(w: &Dictionary) -> Self {
        Self {
            n: w.n(),
            m: w.m(),
            data: w.view().iter().copied().collect(),
        }
    }
}

impl TryFrom<DictionaryJson> for Dictionary {
    type Error = DltfError;

    fn try_from(j: DictionaryJson) -> Result<Self> {
        let a = Array2::from_shape_vec((j.n, j.m), j.data)
            .map_err(|e| DltfError::DimensionMismatch(e.to_string()))?;
        Dictionary::new(a)
    }
}

pub fn dictionary_to_json(w: &Dictionary) -> Result<String> {
    Ok(serde_json::to_string(&DictionaryJson::from(w))?)
}

pub fn dictionary_from_json(s: &str) -> Result<Dictionary> {
    let j: DictionaryJson = serde_json::from_str(s)?;
    j.try_into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::normalize_columns;
    use ndarray::array;

    fn sample() -> Dictionary {
        normalize_columns(&array![[1.0, 2.0, -0.3], [0.5, -1.0, 0.7]]).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_matrix(DICTIONARY_MAGIC, &array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(&bytes[..4], b"DLTF");
        assert_eq!(bytes[4], 1);
        assert_eq!(u64::from_le_bytes(bytes[5..13].try_into().unwrap()), 2);
        // column-major: second payload value is row 1 of column 0
        assert_eq!(f64::from_le_bytes(bytes[29..37].try_into().unwrap()), 3.0);
        assert_eq!(bytes.len(), 21 + 32);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.dltf");
        let w = sample();
        save_dictionary(&w, &path).unwrap();
        assert_eq!(load_dictionary(&path).unwrap(), w);
    }

    #[test]
    fn truncated_is_malformed() {
        let bytes = encode_matrix(DICTIONARY_MAGIC, &sample().view().to_owned());
        assert!(matches!(
            decode_matrix(DICTIONARY_MAGIC, &bytes[..10]),
            Err(DltfError::MalformedHeader(_))
        ));
    }

    #[test]
    fn wrong_magic_is_malformed() {
        let bytes = encode_matrix(DATA_MAGIC, &array![[1.0]]);
        assert!(matches!(
            decode_matrix(DICTIONARY_MAGIC, &bytes),
            Err(DltfError::MalformedHeader(_))
        ));
    }

    #[test]
    fn payload_length_mismatch() {
        let mut bytes = encode_matrix(DICTIONARY_MAGIC, &sample().view().to_owned());
        bytes.truncate(bytes.len() - 8);
        assert!(matches!(
            decode_matrix(DICTIONARY_MAGIC, &bytes),
            Err(DltfError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn json_round_trip_is_row_major() {
        let w = sample();
        let s = dictionary_to_json(&w).unwrap();
        let j: DictionaryJson = serde_json::from_str(&s).unwrap();
        assert_eq!(j.data[1], w.view()[[0, 1]]);
        assert_eq!(dictionary_from_json(&s).unwrap(), w);
    }
}
