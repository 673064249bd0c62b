//! Plain-text feature files, one file per feature set.
//!
//! ```text
//! # affect-features 1
//! # schema <sha256 of the feature schema>
//! # set R1+M1,M0
//! # dims local=84 global=132
//! G <tab> id <tab> label <tab> v0 v1 ...
//! L <tab> id <tab> label <tab> t <tab> v0 v1 ...
//! ```
//!
//! Each sample contributes an optional `G` line followed by its `L` rows in
//! frame order. Values use the shortest round-trip float representation.

use std::fmt::Write as _;

use super::{FeatureSet, FeatureWindow};
use crate::matrix::Matrix;
use crate::{AffectLabel, Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const KIND: &str = "feature";

fn join(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 12);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}

/// Serializes windows that all share `set`.
pub fn write_features(schema_hash: &str, set: FeatureSet, windows: &[FeatureWindow]) -> Result<String> {
    let local_dim = windows
        .iter()
        .find_map(|w| w.local.as_ref().map(Matrix::cols))
        .unwrap_or(0);
    let global_dim = windows
        .iter()
        .find_map(|w| w.global.as_ref().map(Vec::len))
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "# affect-features {FORMAT_VERSION}");
    let _ = writeln!(out, "# schema {schema_hash}");
    let _ = writeln!(out, "# set {set}");
    let _ = writeln!(out, "# dims local={local_dim} global={global_dim}");
    for w in windows {
        if w.set != set {
            return Err(Error::format(KIND, format!("sample {} has set {}, expected {set}", w.source_id, w.set)));
        }
        if w.source_id.contains(char::is_whitespace) {
            return Err(Error::format(KIND, format!("sample id `{}` contains whitespace", w.source_id)));
        }
        if let Some(g) = &w.global {
            let _ = writeln!(out, "G\t{}\t{}\t{}", w.source_id, w.label, join(g));
        }
        if let Some(l) = &w.local {
            for (t, row) in l.iter_rows().enumerate() {
                let _ = writeln!(out, "L\t{}\t{}\t{t}\t{}", w.source_id, w.label, join(row));
            }
        }
    }
    Ok(out)
}

/// Parsed feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub schema_hash: String,
    pub set: FeatureSet,
    pub windows: Vec<FeatureWindow>,
}

fn parse_values(line: usize, text: &str, dim: usize) -> Result<Vec<f64>> {
    let values = text
        .split_whitespace()
        .map(|v| v.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(KIND, format!("line {line}: {e}")))?;
    if values.len() != dim {
        return Err(Error::format(KIND, format!("line {line}: expected {dim} values, found {}", values.len())));
    }
    Ok(values)
}

pub fn read_features(text: &str) -> Result<FeatureFile> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut header = |prefix: &str| -> Result<String> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| Error::format(KIND, "truncated header"))?;
        line.strip_prefix(prefix)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| Error::format(KIND, format!("line {n}: expected `{prefix}`")))
    };
    let version = header("# affect-features ")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::format(KIND, format!("unsupported version {version}")));
    }
    let schema_hash = header("# schema ")?;
    let set: FeatureSet = header("# set ")?.parse()?;
    let dims = header("# dims ")?;
    let mut local_dim = 0;
    let mut global_dim = 0;
    for part in dims.split_whitespace() {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::format(KIND, "bad dims header"))?;
        let v: usize = v.parse().map_err(|_| Error::format(KIND, "bad dims header"))?;
        match k {
            "local" => local_dim = v,
            "global" => global_dim = v,
            _ => return Err(Error::format(KIND, format!("unknown dim `{k}`"))),
        }
    }

    let mut windows: Vec<FeatureWindow> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let flush = |windows: &mut Vec<FeatureWindow>, rows: &mut Vec<Vec<f64>>| {
        if let Some(w) = windows.last_mut() {
            if !rows.is_empty() {
                w.local = Some(Matrix::from_rows(rows));
                rows.clear();
            }
        }
    };
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = || Error::format(KIND, format!("line {n}: malformed record"));
        let (kind, id, label) = match fields.as_slice() {
            [k, id, label, ..] => (*k, *id, label.parse::<AffectLabel>()?),
            _ => return Err(bad()),
        };
        let same = windows.last().is_some_and(|w| w.source_id == id);
        match (kind, fields.len()) {
            ("G", 4) => {
                flush(&mut windows, &mut rows);
                windows.push(FeatureWindow {
                    source_id: id.to_string(),
                    label,
                    set,
                    local: None,
                    global: Some(parse_values(n, fields[3], global_dim)?),
                });
            }
            ("L", 5) => {
                let t: usize = fields[3].parse().map_err(|_| bad())?;
                if !same || (t == 0 && !rows.is_empty()) {
                    flush(&mut windows, &mut rows);
                    if !same || windows.last().is_some_and(|w| w.local.is_some()) {
                        windows.push(FeatureWindow {
                            source_id: id.to_string(),
                            label,
                            set,
                            local: None,
                            global: None,
                        });
                    }
                }
                if t != rows.len() {
                    return Err(Error::format(KIND, format!("line {n}: frame {t} out of order")));
                }
                rows.push(parse_values(n, fields[4], local_dim)?);
            }
            _ => return Err(bad()),
        }
    }
    flush(&mut windows, &mut rows);
    for w in &windows {
        if w.local.is_some() != set.local.is_some() || w.global.is_some() != set.global {
            return Err(Error::format(KIND, format!("sample {} lacks blocks required by {set}", w.source_id)));
        }
    }
    Ok(FeatureFile {
        schema_hash,
        set,
        windows,
    })
}
