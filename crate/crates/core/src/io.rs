//! Field CSV files, JSON sidecars and run manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimate::{FieldMeta, GreensField, GridGeometry};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Header lines `# time=`, `# extents=`, `# nx= ny=`, then `ny` rows of `nx` values (row 0 at `y_min`).
pub fn field_to_csv(field: &GreensField) -> String {
    let g = &field.geometry;
    let mut s = String::with_capacity(g.len() * 24 + 128);
    let _ = writeln!(s, "# time={}", fmt17(field.time));
    let _ = writeln!(
        s,
        "# extents={},{},{},{}",
        fmt17(g.x_min),
        fmt17(g.x_max),
        fmt17(g.y_min),
        fmt17(g.y_max)
    );
    let _ = writeln!(s, "# nx={} ny={}", g.nx, g.ny);
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&fmt17(field.get(i, j)));
        }
        s.push('\n');
    }
    s
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{what}: `{s}`: {e}")))
}

pub fn parse_field_csv(text: &str) -> Result<GreensField> {
    let mut time = None;
    let mut extents = None;
    let mut dims = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("time=") {
                time = Some(parse_f64(v, "time")?);
            } else if let Some(v) = rest.strip_prefix("extents=") {
                let e: Vec<f64> = v.split(',').map(|x| parse_f64(x, "extents")).collect::<Result<_>>()?;
                if e.len() != 4 {
                    return Err(Error::Parse("extents needs 4 values".into()));
                }
                extents = Some([e[0], e[1], e[2], e[3]]);
            } else if rest.starts_with("nx=") {
                let mut nx = None;
                let mut ny = None;
                for tok in rest.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("nx=") {
                        nx = v.parse::<usize>().ok();
                    } else if let Some(v) = tok.strip_prefix("ny=") {
                        ny = v.parse::<usize>().ok();
                    }
                }
                match (nx, ny) {
                    (Some(a), Some(b)) => dims = Some((a, b)),
                    _ => return Err(Error::Parse(format!("bad size line `{line}`"))),
                }
            }
            continue;
        }
        rows += 1;
        for v in line.split(',') {
            values.push(parse_f64(v, "value")?);
        }
    }
    let (Some(time), Some(e), Some((nx, ny))) = (time, extents, dims) else {
        return Err(Error::Parse("missing time, extents or size header".into()));
    };
    if rows != ny || values.len() != nx * ny {
        return Err(Error::Parse(format!(
            "expected {ny} rows of {nx} values, found {rows} rows and {} values",
            values.len()
        )));
    }
    let geometry = GridGeometry::new(e[0], e[1], e[2], e[3], nx, ny).map_err(|err| Error::Parse(err.to_string()))?;
    Ok(GreensField {
        geometry,
        time,
        values,
        meta: FieldMeta {
            cell_area: geometry.cell_area(),
            ..FieldMeta::default()
        },
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut p = csv.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Writes `<dir>/<name>.csv` and its `.csv.json` sidecar.
pub fn write_field(dir: &Path, name: &str, field: &GreensField, extra: serde_json::Value) -> Result<OutputEntry> {
    std::fs::create_dir_all(dir)?;
    let file = format!("{name}.csv");
    let path = dir.join(&file);
    let csv = field_to_csv(field);
    std::fs::write(&path, csv.as_bytes())?;
    let mut side = serde_json::to_value(&field.meta).map_err(|e| Error::Parse(e.to_string()))?;
    if let (Some(obj), serde_json::Value::Object(more)) = (side.as_object_mut(), extra) {
        obj.insert("time".into(), serde_json::json!(field.time));
        obj.extend(more);
    }
    let text = serde_json::to_string_pretty(&side).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(sidecar_path(&path), text + "\n")?;
    Ok(OutputEntry {
        file,
        sha256: sha256_hex(csv.as_bytes()),
    })
}

/// Reads a field CSV, picking up metadata from its sidecar when present.
pub fn read_field(path: &Path) -> Result<GreensField> {
    let text = std::fs::read_to_string(path)?;
    let mut f = parse_field_csv(&text)?;
    if let Ok(side) = std::fs::read_to_string(sidecar_path(path)) {
        if let Ok(meta) = serde_json::from_str::<FieldMeta>(&side) {
            f.meta = meta;
        }
    }
    Ok(f)
}

/// Everything needed to reproduce a run, plus hashes of what it wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub parameters: serde_json::Value,
    pub outputs: Vec<OutputEntry>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
    }
}
