//! Artifact writers: PGM heatmaps with JSON sidecars, CSV and JSON files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbi::PhaseField;

pub struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Artifacts { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write_text(name, &s)
    }

    /// `|Tu|` of a one-dimensional phase field as `<stem>.pgm` plus
    /// `<stem>.json`.
    pub fn write_heatmap(&self, stem: &str, t: &PhaseField) -> Result<()> {
        let (pgm, meta) = heatmap(t)?;
        self.write_bytes(&format!("{stem}.pgm"), &pgm)?;
        self.write_json(&format!("{stem}.json"), &meta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapMeta {
    pub quantity: &'static str,
    pub rows: &'static str,
    pub cols: &'static str,
    pub width: usize,
    pub height: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub xi_lo: f64,
    pub xi_hi: f64,
    /// `|Tu|` mapped to 65535.
    pub max_abs: f64,
}

/// Binary 16-bit PGM (`P5`, big-endian samples), one row per x node, scaled
/// linearly so the largest `|Tu|` is 65535.
pub fn heatmap(t: &PhaseField) -> Result<(Vec<u8>, HeatmapMeta)> {
    if t.x_grid().dim() != 1 {
        return Err(Error::InvalidInput("heatmaps need a one-dimensional phase field".into()));
    }
    let height = t.x_grid().len();
    let width = t.xi_grid().len();
    let max = t.max_abs();
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(2 * width * height);
    for v in t.values() {
        let level = if max > 0.0 { (v.norm() / max * 65535.0).round() as u16 } else { 0 };
        out.extend_from_slice(&level.to_be_bytes());
    }
    let meta = HeatmapMeta {
        quantity: "|Tu|",
        rows: "x",
        cols: "xi",
        width,
        height,
        x_lo: t.x_grid().lo()[0],
        x_hi: t.x_grid().hi()[0],
        xi_lo: t.xi_grid().lo()[0],
        xi_hi: t.xi_grid().hi()[0],
        max_abs: max,
    };
    Ok((out, meta))
}

/// Parses a `P5` 16-bit PGM back into `(width, height, samples)`.
pub fn read_pgm16(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let bad = |m: &str| Error::InvalidInput(format!("pgm: {m}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(bad("not a 16-bit P5 file"));
    }
    let w: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let h: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let body = &bytes[pos.min(bytes.len())..];
    if body.len() != 2 * w * h {
        return Err(bad("sample count"));
    }
    Ok((w, h, body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use num_complex::Complex64;

    #[test]
    fn pgm_round_trip() {
        let xg = GridSpec::line(-1.0, 1.0, 3).unwrap();
        let kg = GridSpec::line(0.0, 1.0, 2).unwrap();
        let vals: Vec<Complex64> = (0..6).map(|k| Complex64::new(k as f64, 0.0)).collect();
        let t = PhaseField::new(xg, kg, vals).unwrap();
        let (bytes, meta) = heatmap(&t).unwrap();
        let (w, h, s) = read_pgm16(&bytes).unwrap();
        assert_eq!((w, h), (2, 3));
        assert_eq!(s, vec![0, 13107, 26214, 39321, 52428, 65535]);
        assert_eq!(meta.max_abs, 5.0);
    }
}
