//! Plain-text artifacts: frequency tracks, matrices and a checksummed manifest.
//!
//! Floats are written in shortest round-trip scientific notation, so every
//! finite value reads back bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GwError, Result};
use crate::freq::{make_grid, MatrixTrack};
use crate::linalg::{CMat, RMat};

pub const MANIFEST: &str = "manifest.json";

fn io_err(path: &Path, source: std::io::Error) -> GwError {
    GwError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn track_err(msg: impl Into<String>) -> GwError {
    GwError::Track(msg.into())
}

/// Header lines `# key = value`, then one row per node: `ω` followed by the
/// real and imaginary parts of the entries in row-major order.
pub fn render_track(t: &MatrixTrack) -> String {
    let m = t.dim();
    let mut s = String::new();
    let _ = writeln!(s, "# gw0lab track");
    let _ = writeln!(s, "# M = {m}");
    let _ = writeln!(s, "# K = {}", t.len());
    let _ = writeln!(s, "# axis_offset = {:e}", t.axis_offset);
    let _ = writeln!(s, "# grid_scale = {:e}", t.grid.scale);
    let _ = writeln!(s, "# columns = omega, then re/im of each entry, row-major");
    for (w, v) in t.grid.nodes.iter().zip(&t.values) {
        let _ = write!(s, "{w:e}");
        for i in 0..m {
            for j in 0..m {
                let z = v[(i, j)];
                let _ = write!(s, " {:e} {:e}", z.re, z.im);
            }
        }
        s.push('\n');
    }
    s
}

fn header<'a>(lines: &[&'a str], key: &str) -> Result<&'a str> {
    lines
        .iter()
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
        .ok_or_else(|| track_err(format!("missing header '{key}'")))
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| track_err(format!("bad {what} '{s}'")))
}

pub fn parse_track(text: &str) -> Result<MatrixTrack> {
    let lines: Vec<&str> = text.lines().collect();
    let m: usize = num(header(&lines, "M")?, "M")?;
    let k: usize = num(header(&lines, "K")?, "K")?;
    let offset: f64 = num(header(&lines, "axis_offset")?, "axis_offset")?;
    let scale: f64 = num(header(&lines, "grid_scale")?, "grid_scale")?;
    let grid = Arc::new(make_grid(k, scale)?);
    let rows: Vec<&str> = lines.iter().copied().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).collect();
    if rows.len() != k {
        return Err(track_err(format!("{} data rows, header declares K = {k}", rows.len())));
    }
    let mut values = Vec::with_capacity(k);
    for (j, row) in rows.iter().enumerate() {
        let xs = row.split_whitespace().map(|x| num::<f64>(x, "value")).collect::<Result<Vec<_>>>()?;
        if xs.len() != 1 + 2 * m * m {
            return Err(track_err(format!("row {j}: {} columns, expected {}", xs.len(), 1 + 2 * m * m)));
        }
        if xs[0] != grid.nodes[j] {
            return Err(track_err(format!("row {j}: ω = {} is not node {}", xs[0], grid.nodes[j])));
        }
        values.push(CMat::from_fn(m, m, |a, b| {
            let c = 1 + 2 * (a * m + b);
            Complex64::new(xs[c], xs[c + 1])
        }));
    }
    MatrixTrack::new(grid, values, offset)
}

pub fn render_matrix(a: &RMat) -> String {
    let mut s = format!("# rows = {}\n# cols = {}\n", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| format!("{:e}", a[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_matrix(text: &str) -> Result<RMat> {
    let lines: Vec<&str> = text.lines().collect();
    let r: usize = num(header(&lines, "rows")?, "rows")?;
    let c: usize = num(header(&lines, "cols")?, "cols")?;
    let data = lines
        .iter()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.split_whitespace())
        .map(|x| num::<f64>(x, "value"))
        .collect::<Result<Vec<_>>>()?;
    if data.len() != r * c {
        return Err(track_err(format!("{} entries for a {r}×{c} matrix", data.len())));
    }
    Ok(RMat::from_row_slice(r, c, &data))
}

/// Everything a run can write.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    pub tracks: Vec<(String, MatrixTrack)>,
    pub matrices: Vec<(String, RMat)>,
    pub texts: Vec<(String, String)>,
}

impl Artifacts {
    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty() && self.matrices.is_empty() && self.texts.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<ManifestEntry> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    Ok(ManifestEntry {
        file: name.to_string(),
        bytes: body.len() as u64,
        sha256: sha256_hex(body.as_bytes()),
    })
}

/// Writes every artifact into `dir` plus `manifest.json` listing them.
pub fn export_tracks(art: &Artifacts, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    for (name, t) in &art.tracks {
        files.push(write_file(dir, &format!("{name}.track"), &render_track(t))?);
    }
    for (name, a) in &art.matrices {
        files.push(write_file(dir, &format!("{name}.mat"), &render_matrix(a))?);
    }
    for (name, body) in &art.texts {
        files.push(write_file(dir, name, body)?);
    }
    let manifest = Manifest { files };
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| GwError::Input(e.to_string()))?;
    let path: PathBuf = dir.join(MANIFEST);
    fs::write(&path, body + "\n").map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| GwError::Input(format!("{}: {e}", path.display())))
}

/// Names of manifest entries whose file is missing or whose checksum differs.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let m = read_manifest(dir)?;
    Ok(m.files
        .iter()
        .filter(|e| fs::read(dir.join(&e.file)).map_or(true, |b| sha256_hex(&b) != e.sha256))
        .map(|e| e.file.clone())
        .collect())
}
