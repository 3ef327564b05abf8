//! Single-step subcommands and the file plumbing they share.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde_json::json;
use spdgeom::nalgebra::DMatrix;

use spdgeom::airm::BasePoint;
use spdgeom::classify::{evaluate, ridge_fit, svm_fit, ModelKind, SvmConfig};
use spdgeom::image::{
    feature_stack, image_covariance, load_image, save_pgm, FeatureBank, FilterSpec,
};
use spdgeom::io::{
    format_float, read_labels_csv, read_linear_model, read_manifest, read_matrix_csv, write_text,
    write_features_csv, write_labels_csv, write_linear_model, write_matrix_csv, write_pga_model,
};
use spdgeom::mean::{swelling_report, MeanConfig, MeanInit, MeanResult};
use spdgeom::synthetic::{ClassBenchmark, BenchmarkConfig, TextureConfig, TextureSample};
use spdgeom::tangent::{embed, pga_fit, pga_project_rows, point_from_tangent, tangent_at, TangentVariant};
use spdgeom::ts::{build_cov_set, load_runs_from, CovOptions, LabeledCovSet};
use spdgeom::{
    airm_distance, geodesic, karcher_mean, log_euclidean_mean, Error, Result, SpdMatrix, SymMatrix,
    DEFAULT_FLOOR_RATIO, DEFAULT_SYM_TOL,
};

pub fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| io_err(p, e))
}

/// Strict SPD load: symmetric within tolerance, strictly positive spectrum.
pub fn load_spd(path: &Path) -> Result<SpdMatrix> {
    let m = read_matrix_csv(path, false)?;
    let s = SymMatrix::from_raw(m, DEFAULT_SYM_TOL)?;
    SpdMatrix::from_sym(s, false, DEFAULT_FLOOR_RATIO)
}

pub fn load_sym(path: &Path) -> Result<SymMatrix> {
    SymMatrix::from_raw(read_matrix_csv(path, false)?, DEFAULT_SYM_TOL)
}

/// Expands directories into their sorted `*.csv` members; bookkeeping files
/// (`labels.csv`, `manifest.csv`) are skipped so a covariance output
/// directory can be used directly.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut members: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| io_err(p, e))?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|q| {
                    let name = q.file_name().map(|s| s.to_string_lossy().to_string());
                    match name {
                        Some(name) => {
                            name.ends_with(".csv") && name != "labels.csv" && name != "manifest.csv"
                        }
                        None => false,
                    }
                })
                .collect();
            members.sort();
            files.extend(members);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(files)
}

/// `run_0007.cov.csv` -> `run_0007`, the id a labels file knows it by.
fn stem_of(p: &Path) -> String {
    let name = p
        .file_name()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_default();
    let name = name.strip_suffix(".csv").unwrap_or(&name);
    name.strip_suffix(".cov").unwrap_or(name).to_string()
}

fn labels_for(files: &[PathBuf], labels_path: &Path) -> Result<Vec<u32>> {
    let pairs = read_labels_csv(labels_path)?;
    let map: HashMap<&str, u32> = pairs.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    files
        .iter()
        .map(|f| {
            let stem = stem_of(f);
            map.get(stem.as_str()).copied().ok_or_else(|| {
                Error::InvalidInput(format!("labels file has no entry for input {stem:?}"))
            })
        })
        .collect()
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn matrix_json(m: &DMatrix<f64>) -> serde_json::Value {
    serde_json::Value::Array(
        (0..m.nrows())
            .map(|r| {
                serde_json::Value::Array((0..m.ncols()).map(|c| json!(m[(r, c)])).collect())
            })
            .collect(),
    )
}

/// Confusion counts are whole numbers; write them as such.
pub fn write_counts_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", m[(r, c)] as u64));
        }
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn cmd_dist(a: &Path, b: &Path) -> Result<()> {
    let d = airm_distance(&load_spd(a)?, &load_spd(b)?)?;
    println!("{}", format_float(d));
    Ok(())
}

pub fn cmd_geodesic(a: &Path, b: &Path, t: f64, out: &Path) -> Result<()> {
    let g = geodesic(&load_spd(a)?, &load_spd(b)?, t)?;
    write_matrix_csv(out, g.matrix())
}

pub fn cmd_logmap(base: &Path, point: &Path, variant: &str, out: &Path) -> Result<()> {
    let variant = TangentVariant::parse(variant)?;
    let bp = BasePoint::new(load_spd(base)?)?;
    let t = tangent_at(&bp, &load_spd(point)?, variant)?;
    write_matrix_csv(out, t.matrix())
}

pub fn cmd_expmap(base: &Path, tangent: &Path, variant: &str, out: &Path) -> Result<()> {
    let variant = TangentVariant::parse(variant)?;
    let bp = BasePoint::new(load_spd(base)?)?;
    let p = point_from_tangent(&bp, &load_sym(tangent)?, variant)?;
    write_matrix_csv(out, p.matrix())
}

fn mean_report_json(
    method: &str,
    set: &[SpdMatrix],
    mean_det: f64,
    karcher: Option<&MeanResult>,
) -> serde_json::Value {
    let input_dets: Vec<serde_json::Value> = set.iter().map(|p| json!(p.det())).collect();
    let mut report = json!({
        "method": method,
        "inputs": set.len(),
        "dim": set[0].dim(),
        "input_dets": input_dets,
        "mean_det": mean_det,
    });
    if let Some(r) = karcher {
        let extra = json!({
            "iterations": r.iterations,
            "converged": r.converged,
            "final_grad_norm": r.final_grad_norm,
            "scale": r.scale,
            "objective_initial": r.objective_trace.first(),
            "objective_final": r.objective_trace.last(),
        });
        for (k, v) in extra.as_object().unwrap() {
            report[k] = v.clone();
        }
    }
    report
}

pub fn cmd_mean(
    inputs: &[PathBuf],
    method: &str,
    out: &Path,
    report: Option<&Path>,
    max_iters: usize,
    grad_tol: f64,
) -> Result<()> {
    let files = expand_inputs(inputs)?;
    let set: Vec<SpdMatrix> = files.iter().map(|f| load_spd(f)).collect::<Result<_>>()?;
    let (matrix, report_value) = match method {
        "karcher" => {
            let cfg = MeanConfig {
                max_iters,
                grad_tol,
                init: MeanInit::LogEuclidean,
                ..MeanConfig::default()
            };
            let r = karcher_mean(&set, &cfg)?;
            let value = mean_report_json("karcher", &set, r.mean.det(), Some(&r));
            println!(
                "karcher mean of {} matrices: {} iterations, gradient {}",
                set.len(),
                r.iterations,
                format_float(r.final_grad_norm)
            );
            (r.mean.matrix().clone(), value)
        }
        "logeuclid" => {
            let m = log_euclidean_mean(&set)?;
            let value = mean_report_json("logeuclid", &set, m.det(), None);
            (m.matrix().clone(), value)
        }
        "euclid" => {
            let m = spdgeom::euclidean_mean(&set)?;
            let det = SpdMatrix::from_sym(m.clone(), false, DEFAULT_FLOOR_RATIO)?.det();
            let value = mean_report_json("euclid", &set, det, None);
            (m.matrix().clone(), value)
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown mean method {other:?}, expected karcher, logeuclid or euclid"
            )))
        }
    };
    write_matrix_csv(out, &matrix)?;
    if let Some(path) = report {
        write_json(path, &report_value)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_pga_fit(
    inputs: &[PathBuf],
    k: usize,
    variant: &str,
    base: Option<&Path>,
    model_path: &Path,
    scores: Option<&Path>,
    labels: Option<&Path>,
) -> Result<()> {
    let variant = TangentVariant::parse(variant)?;
    let files = expand_inputs(inputs)?;
    let set: Vec<SpdMatrix> = files.iter().map(|f| load_spd(f)).collect::<Result<_>>()?;
    let base = base.map(load_spd).transpose()?;
    let ds = embed(&set, base.as_ref(), variant)?;
    let model = pga_fit(&ds, k)?;
    write_pga_model(model_path, &model)?;
    println!(
        "pga: {} inputs, k = {}, explained variance {:?}",
        set.len(),
        k,
        model.explained_variance
    );
    if let Some(path) = scores {
        let rows = pga_project_rows(&model, &ds.rows)?;
        let labels = labels.map(|lp| labels_for(&files, lp)).transpose()?;
        write_features_csv(path, &rows, labels.as_deref())?;
    }
    Ok(())
}

/// Writes one `<id>.cov.csv` per descriptor plus `labels.csv`.
pub fn write_cov_dir(dir: &Path, set: &LabeledCovSet, labels_out: Option<&Path>) -> Result<()> {
    ensure_dir(dir)?;
    for (cov, meta) in set.covs.iter().zip(&set.meta) {
        write_matrix_csv(&dir.join(format!("{}.cov.csv", meta.id)), cov.matrix())?;
    }
    let ids: Vec<String> = set.meta.iter().map(|m| m.id.clone()).collect();
    let default_labels = dir.join("labels.csv");
    let labels_path = labels_out.unwrap_or(&default_labels);
    write_labels_csv(labels_path, &ids, &set.labels())
}

pub fn cmd_cov_ts(
    manifest: &Path,
    data_dir: Option<&Path>,
    center: bool,
    repair: bool,
    skip_header: bool,
    out_dir: &Path,
    labels: Option<&Path>,
) -> Result<()> {
    let runs = load_runs_from(manifest, data_dir, skip_header)?;
    let opts = CovOptions {
        center,
        repair,
        ..CovOptions::default()
    };
    let set = build_cov_set(&runs, &opts)?;
    write_cov_dir(out_dir, &set, labels)?;
    for meta in &set.meta {
        if meta.repaired {
            println!("repaired: {}", meta.id);
        }
    }
    println!(
        "wrote {} covariance descriptors to {} ({} repaired)",
        set.len(),
        out_dir.display(),
        set.repaired_count()
    );
    Ok(())
}

pub fn parse_bank(spec: &str, polarity: &str) -> Result<FeatureBank> {
    let frangi_dark = match polarity {
        "bright" => false,
        "dark" => true,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown polarity {other:?}, expected bright or dark"
            )))
        }
    };
    if spec == "default" {
        return Ok(FeatureBank {
            frangi_dark,
            ..FeatureBank::default()
        });
    }
    let path = Path::new(spec);
    let text = spdgeom::io::read_text(path)?;
    let mut filters = Vec::new();
    let mut names = std::collections::HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::FormatError {
            path: spec.to_string(),
            msg: format!("line {}: {msg}", idx + 1),
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(bad(format!("expected name,kind,sigma, found {} fields", fields.len())));
        }
        if !names.insert(fields[0].to_string()) {
            return Err(bad(format!("duplicate filter name {:?}", fields[0])));
        }
        let sigma: f64 = fields[2]
            .parse()
            .map_err(|_| bad(format!("malformed sigma {:?}", fields[2])))?;
        let filter = match fields[1] {
            "identity" => FilterSpec::Identity,
            kind => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(bad(format!("filter kind {kind:?} needs sigma > 0, got {sigma}")));
                }
                match kind {
                    "gaussian" => FilterSpec::Gaussian { sigma },
                    "frangi" => FilterSpec::Frangi { sigma },
                    "hessian" => FilterSpec::Hessian { sigma },
                    other => return Err(bad(format!("unknown filter kind {other:?}"))),
                }
            }
        };
        filters.push(filter);
    }
    if filters.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "feature bank needs at least 2 filters, found {}",
            filters.len()
        )));
    }
    Ok(FeatureBank {
        filters,
        frangi_dark,
        ..FeatureBank::default()
    })
}

/// Covariance descriptors for a manifest of images. Returns ids, labels,
/// covariance matrices, repair flags, and the flattened pixel rows (one row
/// per image) for raw-feature baselines.
pub fn image_cov_set(
    manifest: &Path,
    data_dir: Option<&Path>,
    bank: &FeatureBank,
) -> Result<(LabeledCovSet, DMatrix<f64>)> {
    let entries = read_manifest(manifest)?;
    let default_base = manifest.parent().unwrap_or(Path::new("")).to_path_buf();
    let base = data_dir.map(Path::to_path_buf).unwrap_or(default_base);
    let mut covs = Vec::with_capacity(entries.len());
    let mut meta = Vec::with_capacity(entries.len());
    let mut pixel_rows: Option<DMatrix<f64>> = None;
    for (i, e) in entries.iter().enumerate() {
        let img = load_image(&base.join(&e.path))?;
        let stack = feature_stack(&img, bank)?;
        let (cov, repaired) = image_covariance(&stack, &CovOptions::default())?;
        let flat = img.flatten();
        let rows = pixel_rows
            .get_or_insert_with(|| DMatrix::zeros(entries.len(), flat.len()));
        if rows.ncols() != flat.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} pixels", rows.ncols()),
                found: format!("{} in image {}", flat.len(), e.id),
            });
        }
        rows.row_mut(i).copy_from(&flat.transpose());
        covs.push(cov);
        meta.push(spdgeom::ts::CovMeta {
            id: e.id.clone(),
            label: e.label,
            repaired,
        });
    }
    Ok((LabeledCovSet { covs, meta }, pixel_rows.unwrap()))
}

pub fn cmd_cov_img(
    manifest: &Path,
    data_dir: Option<&Path>,
    bank: &str,
    polarity: &str,
    out_dir: &Path,
    labels: Option<&Path>,
) -> Result<()> {
    let bank = parse_bank(bank, polarity)?;
    let (set, _) = image_cov_set(manifest, data_dir, &bank)?;
    write_cov_dir(out_dir, &set, labels)?;
    for meta in &set.meta {
        if meta.repaired {
            println!("repaired: {}", meta.id);
        }
    }
    println!(
        "wrote {count} image descriptors ({d}x{d}) to {dir} ({rep} repaired)",
        count = set.len(),
        d = set.covs[0].dim(),
        dir = out_dir.display(),
        rep = set.repaired_count()
    );
    Ok(())
}

/// Lays out a generated benchmark as files: per-run CSVs, `manifest.csv`,
/// `labels.csv`, and `benchmark.json` recording the full generating
/// configuration (class specs and per-run gains included).
pub fn write_ts_dataset(dir: &Path, bench: &ClassBenchmark, cfg: &BenchmarkConfig) -> Result<()> {
    ensure_dir(dir)?;
    let mut manifest = String::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for run in &bench.runs {
        write_matrix_csv(&dir.join(format!("{}.csv", run.run_id)), &run.data)?;
        manifest.push_str(&format!("{0},{0}.csv,{1}\n", run.run_id, run.label));
        ids.push(run.run_id.clone());
        labels.push(run.label);
    }
    write_text(&dir.join("manifest.csv"), &manifest)?;
    write_labels_csv(&dir.join("labels.csv"), &ids, &labels)?;
    let specs: Vec<serde_json::Value> = bench
        .specs
        .iter()
        .map(|s| {
            json!({
                "coeffs": matrix_json(s.coeffs()),
                "noise_cov": matrix_json(s.noise_cov().matrix()),
                "spectral_radius": s.spectral_radius(),
            })
        })
        .collect();
    let gains: Vec<serde_json::Value> = bench
        .runs
        .iter()
        .map(|r| json!({"id": r.run_id, "gains": r.gains}))
        .collect();
    write_json(
        &dir.join("benchmark.json"),
        &json!({
            "classes": cfg.n_classes,
            "runs_per_class": cfg.runs_per_class,
            "n": cfg.n,
            "m": cfg.m,
            "delta": cfg.delta,
            "gain_jitter": cfg.gain_jitter,
            "burn_in": cfg.burn_in,
            "seed": cfg.seed,
            "specs": specs,
            "gains": gains,
        }),
    )
}

pub fn cmd_synth_ts(cfg: &BenchmarkConfig, out_dir: &Path) -> Result<()> {
    let bench = spdgeom::synthetic::gen_class_benchmark(cfg)?;
    write_ts_dataset(out_dir, &bench, cfg)?;
    println!(
        "wrote {} runs ({} classes, {}x{}) to {}",
        bench.runs.len(),
        cfg.n_classes,
        cfg.m,
        cfg.n,
        out_dir.display()
    );
    Ok(())
}

/// PGM images plus `manifest.csv` and `labels.csv`.
pub fn write_img_dataset(dir: &Path, set: &[TextureSample], cfg: &TextureConfig) -> Result<()> {
    ensure_dir(dir)?;
    let mut manifest = String::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for s in set {
        save_pgm(&dir.join(format!("{}.pgm", s.id)), &s.image)?;
        manifest.push_str(&format!("{0},{0}.pgm,{1}\n", s.id, s.label));
        ids.push(s.id.clone());
        labels.push(s.label);
    }
    write_text(&dir.join("manifest.csv"), &manifest)?;
    write_labels_csv(&dir.join("labels.csv"), &ids, &labels)?;
    write_json(
        &dir.join("textures.json"),
        &json!({
            "size": cfg.size,
            "normal": cfg.normal,
            "defect": cfg.defect,
            "seed": cfg.seed,
        }),
    )
}

pub fn cmd_synth_img(cfg: &TextureConfig, out_dir: &Path) -> Result<()> {
    let set = spdgeom::synthetic::gen_texture_set(cfg)?;
    write_img_dataset(out_dir, &set, cfg)?;
    println!(
        "wrote {} textures ({}x{}, {} defective) to {}",
        set.len(),
        cfg.size,
        cfg.size,
        cfg.defect,
        out_dir.display()
    );
    Ok(())
}

fn ordered_labels(labels_path: &Path, expected: usize) -> Result<Vec<u32>> {
    let pairs = read_labels_csv(labels_path)?;
    if pairs.len() != expected {
        return Err(Error::DimensionMismatch {
            expected: format!("{expected} labels"),
            found: format!("{} in {}", pairs.len(), labels_path.display()),
        });
    }
    Ok(pairs.into_iter().map(|(_, l)| l).collect())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    features: &Path,
    labels: &Path,
    model_kind: &str,
    lambda: f64,
    cost: f64,
    epochs: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let kind = ModelKind::parse(model_kind)?;
    let rows = read_matrix_csv(features, false)?;
    let labels = ordered_labels(labels, rows.nrows())?;
    let model = match kind {
        ModelKind::Ridge => ridge_fit(&rows, &labels, lambda)?,
        ModelKind::Svm => svm_fit(
            &rows,
            &labels,
            &SvmConfig {
                c: cost,
                epochs,
                seed,
                ..SvmConfig::default()
            },
        )?,
    };
    write_linear_model(out, &model)?;
    println!(
        "trained {} model on {} samples x {} features, {} classes",
        kind.name(),
        rows.nrows(),
        rows.ncols(),
        model.class_ids.len()
    );
    Ok(())
}

pub fn cmd_eval(
    model: &Path,
    features: &Path,
    labels: &Path,
    confusion: Option<&Path>,
    normalized: bool,
) -> Result<()> {
    let model = read_linear_model(model)?;
    let rows = read_matrix_csv(features, false)?;
    let labels = ordered_labels(labels, rows.nrows())?;
    let ev = evaluate(&model, &rows, &labels)?;
    if let Some(path) = confusion {
        if normalized {
            write_matrix_csv(path, &ev.confusion.normalized)?;
        } else {
            write_counts_csv(path, &ev.confusion.counts)?;
        }
    }
    println!("accuracy: {}", format_float(ev.accuracy));
    println!("correct: {} of {}", ev.n_correct, ev.n_total);
    Ok(())
}

pub fn cmd_report_swelling(inputs: &[PathBuf], json_out: Option<&Path>) -> Result<()> {
    let files = expand_inputs(inputs)?;
    let set: Vec<SpdMatrix> = files.iter().map(|f| load_spd(f)).collect::<Result<_>>()?;
    let rep = swelling_report(&set)?;
    for (i, det) in rep.input_dets.iter().enumerate() {
        println!("det_input_{i:04}: {}", format_float(*det));
    }
    println!("det_euclidean_mean: {}", format_float(rep.euclid_det));
    println!("det_karcher_mean: {}", format_float(rep.karcher_det));
    println!("ratio: {}", format_float(rep.ratio));
    if let Some(path) = json_out {
        let dets: Vec<serde_json::Value> = rep.input_dets.iter().map(|d| json!(d)).collect();
        write_json(
            path,
            &json!({
                "input_dets": dets,
                "euclid_det": rep.euclid_det,
                "karcher_det": rep.karcher_det,
                "ratio": rep.ratio,
            }),
        )?;
    }
    Ok(())
}
