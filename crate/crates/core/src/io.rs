//! File formats: numeric CSV, label and manifest tables, JSON models.
//!
//! Floats in CSV are written as `{:.16e}` (17 significant digits), which
//! round-trips every finite f64 exactly, so files written and re-read on
//! any platform reproduce the original bits. JSON uses the shortest exact
//! decimal form for the same reason. Parsers are strict: ragged rows,
//! malformed numbers, and malformed manifest lines are errors with the
//! offending file and line, never silently skipped.

use crate::classify::{LinearModel, ModelKind};
use crate::error::{Error, Result};
use crate::spd::{SpdMatrix, DEFAULT_SYM_TOL};
use crate::tangent::{PgaModel, TangentVariant};
use nalgebra::{DMatrix, DVector};
use std::collections::HashSet;
use std::path::Path;

/// Exact decimal form of a float: 17 significant digits round-trip any
/// finite f64.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path_str(path), e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path_str(path), e))
}

pub fn matrix_to_csv_string(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format_float(m[(r, c)]));
        }
        out.push('\n');
    }
    out
}

/// Strict CSV matrix parser. `origin` names the source in errors.
pub fn parse_matrix_csv(text: &str, skip_header: bool, origin: &str) -> Result<DMatrix<f64>> {
    let bad = |line: usize, msg: String| Error::FormatError {
        path: origin.to_string(),
        msg: format!("line {line}: {msg}"),
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if skip_header && idx == 0 {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split(',') {
            let token = token.trim();
            row.push(
                token
                    .parse::<f64>()
                    .map_err(|_| bad(lineno, format!("malformed number {token:?}")))?,
            );
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(bad(lineno, format!("expected {w} fields, found {}", row.len())));
            }
            _ => {}
        }
        rows.push(row);
    }
    let width = width.ok_or_else(|| Error::FormatError {
        path: origin.to_string(),
        msg: "no data rows".to_string(),
    })?;
    let nrows = rows.len();
    Ok(DMatrix::from_fn(nrows, width, |r, c| rows[r][c]))
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_text(path, &matrix_to_csv_string(m))
}

pub fn read_matrix_csv(path: &Path, skip_header: bool) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&read_text(path)?, skip_header, &path_str(path))
}

/// Write `id,label` rows under a header line.
pub fn write_labels_csv(path: &Path, ids: &[String], labels: &[u32]) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(Error::dim(
            format!("{} ids", ids.len()),
            format!("{} labels", labels.len()),
        ));
    }
    let mut out = String::from("id,label\n");
    for (id, label) in ids.iter().zip(labels) {
        out.push_str(id);
        out.push(',');
        out.push_str(&label.to_string());
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<(String, u32)>> {
    let text = read_text(path)?;
    let origin = path_str(path);
    let bad = |line: usize, msg: String| Error::FormatError {
        path: origin.clone(),
        msg: format!("line {line}: {msg}"),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "id,label")) => {}
        Some((_, other)) => return Err(bad(1, format!("expected header \"id,label\", found {other:?}"))),
        None => return Err(bad(1, "empty file".to_string())),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let (id, label) = line
            .split_once(',')
            .ok_or_else(|| bad(lineno, "expected id,label".to_string()))?;
        if id.is_empty() {
            return Err(bad(lineno, "empty id".to_string()));
        }
        let label = label
            .trim()
            .parse::<u32>()
            .map_err(|_| bad(lineno, format!("malformed label {label:?}")))?;
        out.push((id.to_string(), label));
    }
    Ok(out)
}

/// Feature rows as CSV; `labels` appends an integer label column.
pub fn write_features_csv(path: &Path, rows: &DMatrix<f64>, labels: Option<&[u32]>) -> Result<()> {
    if let Some(labels) = labels {
        if labels.len() != rows.nrows() {
            return Err(Error::dim(
                format!("{} rows", rows.nrows()),
                format!("{} labels", labels.len()),
            ));
        }
    }
    let mut out = String::new();
    for r in 0..rows.nrows() {
        for c in 0..rows.ncols() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format_float(rows[(r, c)]));
        }
        if let Some(labels) = labels {
            if rows.ncols() > 0 {
                out.push(',');
            }
            out.push_str(&labels[r].to_string());
        }
        out.push('\n');
    }
    write_text(path, &out)
}

/// One manifest line: `id,path,label`, no header, no quoting (so no commas
/// in paths).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub label: u32,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = read_text(path)?;
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let bad = |msg: String| Error::ManifestError {
            line: lineno,
            msg,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected id,path,label, found {} fields", fields.len())));
        }
        let (id, file, label) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
        if id.is_empty() || file.is_empty() {
            return Err(bad("empty id or path".to_string()));
        }
        if !seen.insert(id.to_string()) {
            return Err(bad(format!("duplicate id {id:?}")));
        }
        let label = label
            .parse::<u32>()
            .map_err(|_| bad(format!("malformed label {label:?}")))?;
        entries.push(ManifestEntry {
            id: id.to_string(),
            path: file.to_string(),
            label,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(entries)
}

fn json_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::FormatError {
        path: path_str(path),
        msg: msg.into(),
    }
}

fn json_field<'a>(
    path: &Path,
    v: &'a serde_json::Value,
    name: &str,
) -> Result<&'a serde_json::Value> {
    v.get(name).ok_or_else(|| json_err(path, format!("missing field {name:?}")))
}

fn json_f64(path: &Path, v: &serde_json::Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| json_err(path, format!("{what} is not a number")))
}

fn json_f64_vec(path: &Path, v: &serde_json::Value, what: &str) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| json_err(path, format!("{what} is not an array")))?
        .iter()
        .map(|x| json_f64(path, x, what))
        .collect()
}

fn json_f64_matrix(path: &Path, v: &serde_json::Value, what: &str) -> Result<DMatrix<f64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| json_err(path, format!("{what} is not an array")))?;
    if rows.is_empty() {
        return Err(json_err(path, format!("{what} has no rows")));
    }
    let parsed: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| json_f64_vec(path, r, what))
        .collect::<Result<_>>()?;
    let width = parsed[0].len();
    if parsed.iter().any(|r| r.len() != width) {
        return Err(json_err(path, format!("{what} is ragged")));
    }
    Ok(DMatrix::from_fn(parsed.len(), width, |r, c| parsed[r][c]))
}

fn matrix_json(m: &DMatrix<f64>) -> serde_json::Value {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect();
    serde_json::json!(rows)
}

pub fn write_pga_model(path: &Path, model: &PgaModel) -> Result<()> {
    let value = serde_json::json!({
        "kind": "pga",
        "variant": model.variant.name(),
        "n": model.n,
        "base_csv": matrix_to_csv_string(model.base.matrix()),
        "center": model.center.iter().copied().collect::<Vec<f64>>(),
        "axes": matrix_json(&model.axes),
        "explained_variance": model.explained_variance,
    });
    write_text(path, &format!("{}\n", serde_json::to_string_pretty(&value).expect("static json")))
}

pub fn read_pga_model(path: &Path) -> Result<PgaModel> {
    let text = read_text(path)?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| json_err(path, format!("bad json: {e}")))?;
    let kind = json_field(path, &v, "kind")?
        .as_str()
        .ok_or_else(|| json_err(path, "kind is not a string"))?;
    if kind != "pga" {
        return Err(json_err(path, format!("expected kind \"pga\", found {kind:?}")));
    }
    let variant = TangentVariant::parse(
        json_field(path, &v, "variant")?
            .as_str()
            .ok_or_else(|| json_err(path, "variant is not a string"))?,
    )?;
    let n = json_field(path, &v, "n")?
        .as_u64()
        .ok_or_else(|| json_err(path, "n is not an integer"))? as usize;
    let base_csv = json_field(path, &v, "base_csv")?
        .as_str()
        .ok_or_else(|| json_err(path, "base_csv is not a string"))?;
    let base_raw = parse_matrix_csv(base_csv, false, &format!("{} (base_csv)", path_str(path)))?;
    let base = SpdMatrix::from_raw(base_raw, DEFAULT_SYM_TOL)?;
    if base.dim() != n {
        return Err(json_err(path, format!("base is {}x{0}, but n = {n}", base.dim())));
    }
    let center = DVector::from_vec(json_f64_vec(path, json_field(path, &v, "center")?, "center")?);
    let axes = json_f64_matrix(path, json_field(path, &v, "axes")?, "axes")?;
    let explained_variance = json_f64_vec(
        path,
        json_field(path, &v, "explained_variance")?,
        "explained_variance",
    )?;
    let d = n * (n + 1) / 2;
    if center.len() != d || axes.ncols() != d {
        return Err(json_err(
            path,
            format!("expected {d} tangent coordinates, found center {} / axes {}", center.len(), axes.ncols()),
        ));
    }
    if explained_variance.len() != axes.nrows() {
        return Err(json_err(path, "one explained variance per axis required"));
    }
    Ok(PgaModel {
        base,
        variant,
        n,
        center,
        axes,
        explained_variance,
    })
}

pub fn write_linear_model(path: &Path, model: &LinearModel) -> Result<()> {
    let value = serde_json::json!({
        "kind": model.kind.name(),
        "class_ids": model.class_ids,
        "bias": model.bias.iter().copied().collect::<Vec<f64>>(),
        "weights": matrix_json(&model.weights),
    });
    write_text(path, &format!("{}\n", serde_json::to_string_pretty(&value).expect("static json")))
}

pub fn read_linear_model(path: &Path) -> Result<LinearModel> {
    let text = read_text(path)?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| json_err(path, format!("bad json: {e}")))?;
    let kind = ModelKind::parse(
        json_field(path, &v, "kind")?
            .as_str()
            .ok_or_else(|| json_err(path, "kind is not a string"))?,
    )?;
    let class_ids: Vec<u32> = json_field(path, &v, "class_ids")?
        .as_array()
        .ok_or_else(|| json_err(path, "class_ids is not an array"))?
        .iter()
        .map(|x| {
            x.as_u64()
                .and_then(|u| u32::try_from(u).ok())
                .ok_or_else(|| json_err(path, "class id is not a u32"))
        })
        .collect::<Result<_>>()?;
    let bias = DVector::from_vec(json_f64_vec(path, json_field(path, &v, "bias")?, "bias")?);
    let weights = json_f64_matrix(path, json_field(path, &v, "weights")?, "weights")?;
    if class_ids.len() != weights.nrows() || bias.len() != weights.nrows() {
        return Err(json_err(
            path,
            format!(
                "inconsistent shape: {} classes, {} bias entries, {} weight rows",
                class_ids.len(),
                bias.len(),
                weights.nrows()
            ),
        ));
    }
    if class_ids.len() < 2 {
        return Err(json_err(path, "a model needs at least 2 classes"));
    }
    Ok(LinearModel {
        class_ids,
        weights,
        bias,
        kind,
    })
}
