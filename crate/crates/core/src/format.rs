//! The MLAB1 array container.
//!
//! Layout: the five bytes `MLAB1`, a little-endian `u32` header length, a
//! UTF-8 JSON header `{"dtype":"c128","order":"row-major","shape":[..],
//! "lo":[..],"hi":[..]}`, then `(re, im)` pairs as little-endian IEEE-754
//! doubles in row-major order.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::field::SampledField;
use crate::grid::GridSpec;

pub const MAGIC: &[u8; 5] = b"MLAB1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub dtype: String,
    pub order: String,
    pub shape: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Header {
    pub fn for_grid(grid: &GridSpec) -> Self {
        Header {
            dtype: "c128".into(),
            order: "row-major".into(),
            shape: grid.points().to_vec(),
            lo: grid.lo().to_vec(),
            hi: grid.hi().to_vec(),
        }
    }
}

pub fn encode(grid: &GridSpec, values: &[Complex64]) -> Result<Vec<u8>> {
    if values.len() != grid.len() {
        return Err(Error::InvalidInput("value count does not match grid".into()));
    }
    let header = serde_json::to_vec(&Header::for_grid(grid))?;
    let mut out = Vec::with_capacity(9 + header.len() + 16 * values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    Ok(out)
}

/// Parses a container into its grid and raw values (any axis count up to 4).
pub fn decode(bytes: &[u8]) -> Result<(GridSpec, Vec<Complex64>)> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        let found = bytes[..bytes.len().min(MAGIC.len())].to_vec();
        return Err(FormatError::BadMagic { found }.into());
    }
    let rest = &bytes[MAGIC.len()..];
    if rest.len() < 4 {
        return Err(FormatError::Truncated {
            expected: MAGIC.len() + 4,
            found: bytes.len(),
        }
        .into());
    }
    let hlen = u32::from_le_bytes([rest[0], rest[1], rest[2], rest[3]]) as usize;
    let rest = &rest[4..];
    if rest.len() < hlen {
        return Err(FormatError::Truncated {
            expected: hlen,
            found: rest.len(),
        }
        .into());
    }
    let text = std::str::from_utf8(&rest[..hlen]).map_err(|e| FormatError::BadHeader(e.to_string()))?;
    let header: Header = serde_json::from_str(text).map_err(|e| FormatError::BadHeader(e.to_string()))?;
    if header.dtype != "c128" || header.order != "row-major" {
        return Err(FormatError::BadHeader(format!("unsupported dtype/order {}/{}", header.dtype, header.order)).into());
    }
    if header.lo.len() != header.shape.len() || header.hi.len() != header.shape.len() {
        return Err(FormatError::ShapeMismatch {
            shape: header.shape.clone(),
            what: "lo/hi axis count".into(),
        }
        .into());
    }
    let grid = GridSpec::new(header.lo.clone(), header.hi.clone(), header.shape.clone()).map_err(|e| FormatError::ShapeMismatch {
        shape: header.shape.clone(),
        what: e.to_string(),
    })?;
    let payload = &rest[hlen..];
    let expected = grid.len() * 16;
    if payload.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: payload.len(),
        }
        .into());
    }
    if payload.len() > expected {
        return Err(FormatError::TrailingBytes {
            extra: payload.len() - expected,
        }
        .into());
    }
    let values = payload
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((grid, values))
}

pub fn write_array(path: &Path, grid: &GridSpec, values: &[Complex64]) -> Result<()> {
    let bytes = encode(grid, values)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_array(path: &Path) -> Result<(GridSpec, Vec<Complex64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn save_field(field: &SampledField, path: &Path) -> Result<()> {
    write_array(path, field.grid(), field.values())
}

pub fn load_field(path: &Path) -> Result<SampledField> {
    let (grid, values) = read_array(path)?;
    SampledField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SampledField {
        let g = GridSpec::line(-1.0, 1.0, 16).unwrap();
        SampledField::from_fn(g, |x| Complex64::new(x[0].sin(), x[0].cos() * 0.3)).unwrap()
    }

    #[test]
    fn header_is_byte_stable() {
        let g = GridSpec::line(-1.0, 1.0, 4).unwrap();
        let bytes = encode(&g, &[Complex64::new(0.0, 0.0); 4]).unwrap();
        let hlen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        assert_eq!(
            std::str::from_utf8(&bytes[9..9 + hlen]).unwrap(),
            r#"{"dtype":"c128","order":"row-major","shape":[4],"lo":[-1.0],"hi":[1.0]}"#
        );
        assert_eq!(bytes.len(), 9 + hlen + 64);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode(sample().grid(), sample().values()).unwrap();
        bytes[0] = b'X';
        let err = decode(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format(FormatError::BadMagic { .. })));
    }

    #[test]
    fn truncated_payload() {
        let g = GridSpec::cube(2, 0.0, 1.0, 4).unwrap();
        let vals = vec![Complex64::new(1.0, 2.0); 16];
        let mut bytes = encode(&g, &vals).unwrap();
        bytes.truncate(bytes.len() - 16);
        match decode(&bytes).unwrap_err() {
            Error::Format(e @ FormatError::Truncated { .. }) => assert_eq!(e.code(), 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch() {
        let header = r#"{"dtype":"c128","order":"row-major","shape":[4,4],"lo":[0.0],"hi":[1.0]}"#;
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header.as_bytes());
        bytes.extend(std::iter::repeat_n(0u8, 16 * 16));
        assert!(matches!(decode(&bytes), Err(Error::Format(FormatError::ShapeMismatch { .. }))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        let u = sample();
        save_field(&u, &path).unwrap();
        let v = load_field(&path).unwrap();
        assert_eq!(u, v);
        assert_eq!(fs::read(&path).unwrap(), encode(v.grid(), v.values()).unwrap());
    }
}
