//! Everything a run writes goes through one [`RunWriter`], which records a
//! content hash per file for the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

pub struct RunWriter {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl RunWriter {
    pub fn create(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root, entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to `relative` (forward slashes) under the run directory.
    pub fn write(&mut self, relative: &str, contents: &[u8]) -> CliResult<()> {
        if relative == "manifest.json" || self.entries.iter().any(|e| e.path == relative) {
            return Err(CliError::Io(std::io::Error::other(format!("{relative} written twice"))));
        }
        let path = self.root.join(relative);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, contents)?;
        self.entries.push(ManifestEntry {
            path: relative.to_string(),
            bytes: contents.len(),
            sha256: sha256_hex(contents),
        });
        Ok(())
    }

    pub fn write_csv<T: Serialize>(&mut self, relative: &str, rows: &[T]) -> CliResult<()> {
        let bytes = csv_bytes(rows)?;
        self.write(relative, &bytes)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(self) -> CliResult<Vec<ManifestEntry>> {
        let mut entries = self.entries;
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        let text = serde_json::to_string_pretty(&serde_json::json!({ "files": entries }))
            .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(entries)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    }
    w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
}

/// File-name-safe version of a label.
pub fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// ROC curve as an SVG polyline on the unit square, with the chance diagonal.
pub fn roc_svg(title: &str, points: &[(f64, f64)]) -> String {
    const SIZE: f64 = 320.0;
    const PAD: f64 = 40.0;
    let px = |x: f64| PAD + x * SIZE;
    let py = |y: f64| PAD + (1.0 - y) * SIZE;
    let mut poly = String::new();
    for (i, (f, t)) in points.iter().enumerate() {
        if i > 0 {
            poly.push(' ');
        }
        let _ = write!(poly, "{:.2},{:.2}", px(*f), py(*t));
    }
    let total = SIZE + 2.0 * PAD;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(svg, r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    let _ = writeln!(svg, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{poly}"/>"#);
    let _ = writeln!(svg, r#"<text x="{PAD}" y="{}" font-size="13">{}</text>"#, PAD - 12.0, xml_escape(title));
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">FPR</text>"#,
        PAD + SIZE / 2.0,
        total - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="12" y="{}" font-size="11" transform="rotate(-90 12 {})" text-anchor="middle">TPR</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
