//! End-to-end run driver: data generation through evaluation, leaving every
//! intermediate artifact in the run directory. Reruns with the same flags
//! and seed reproduce every file byte for byte.

use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use spdgeom::nalgebra::DMatrix;

use spdgeom::classify::{evaluate, ridge_fit, split, svm_fit, Evaluation, ModelKind, SvmConfig};
use spdgeom::image::FeatureBank;
use spdgeom::io::{format_float, write_features_csv, write_linear_model, write_matrix_csv, write_pga_model, write_text};
use spdgeom::mean::{MeanConfig, MeanResult};
use spdgeom::rng::mix_seed;
use spdgeom::synthetic::{
    gen_class_benchmark, gen_texture_set, BenchmarkConfig, TextureConfig, DEFAULT_BURN_IN,
};
use spdgeom::tangent::{embed, pga_fit, pga_project_rows, sym_vec, TangentVariant};
use spdgeom::ts::{build_cov_set, load_runs, CovOptions, LabeledCovSet};
use spdgeom::{karcher_mean, Error, Result};

use crate::ops::{
    ensure_dir, image_cov_set, write_cov_dir, write_counts_csv, write_img_dataset, write_json,
    write_ts_dataset,
};

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Benchmark recipe: tep-synthetic (labeled multivariate runs) or
    /// textile-synthetic (woven textures with defects).
    #[arg(long)]
    pub preset: String,
    /// Master seed; every random stage derives its stream from it.
    #[arg(long)]
    pub seed: u64,
    /// Run directory for all artifacts.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Classifier input representation: raw, tangent, or pga.
    #[arg(long, default_value = "tangent")]
    pub features: String,
    /// Tangent chart: whitened (norms equal manifold distances, the right
    /// coordinates for Euclidean classifiers) or ambient. The embedding
    /// subcommands default to ambient; the pipeline defaults to whitened.
    #[arg(long, default_value = "whitened")]
    pub variant: String,
    /// ridge or svm; defaults to ridge for tep-synthetic, svm for
    /// textile-synthetic.
    #[arg(long)]
    pub model_kind: Option<String>,
    /// Principal component count when --features pga.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 0.3)]
    pub test_frac: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub cost: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// tep-synthetic: class count including the baseline class 0.
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    /// tep-synthetic: runs per class.
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    /// tep-synthetic: variables per run.
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    /// tep-synthetic: time steps per run.
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    /// tep-synthetic: class perturbation magnitude.
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    /// tep-synthetic: per-run sensor gain drift, ln-uniform half-width.
    #[arg(long, default_value_t = 0.8)]
    pub gain_jitter: f64,
    /// textile-synthetic: defect-free image count.
    #[arg(long, default_value_t = 60)]
    pub normal: usize,
    /// textile-synthetic: defective image count.
    #[arg(long, default_value_t = 60)]
    pub defect: usize,
    /// textile-synthetic: square image side length.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Preset {
    Tep,
    Textile,
}

#[derive(Clone, Copy, PartialEq)]
enum FeatureSpace {
    Raw,
    Tangent,
    Pga,
}

impl FeatureSpace {
    fn name(self) -> &'static str {
        match self {
            FeatureSpace::Raw => "raw",
            FeatureSpace::Tangent => "tangent",
            FeatureSpace::Pga => "pga",
        }
    }
}

fn parse_preset(s: &str) -> Result<Preset> {
    match s {
        "tep-synthetic" => Ok(Preset::Tep),
        "textile-synthetic" => Ok(Preset::Textile),
        other => Err(Error::InvalidInput(format!(
            "unknown preset {other:?}, expected tep-synthetic or textile-synthetic"
        ))),
    }
}

fn parse_features(s: &str) -> Result<FeatureSpace> {
    match s {
        "raw" => Ok(FeatureSpace::Raw),
        "tangent" => Ok(FeatureSpace::Tangent),
        "pga" => Ok(FeatureSpace::Pga),
        other => Err(Error::InvalidInput(format!(
            "unknown feature space {other:?}, expected raw, tangent or pga"
        ))),
    }
}

fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(idx.len(), m.ncols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from(&m.row(i));
    }
    out
}

fn select_labels(labels: &[u32], idx: &[usize]) -> Vec<u32> {
    idx.iter().map(|&i| labels[i]).collect()
}

/// Accuracy of the collapsed two-class problem: baseline class 0 against
/// everything else.
fn binary_separation(truth: &[u32], predicted: &[u32]) -> f64 {
    let agree = truth
        .iter()
        .zip(predicted)
        .filter(|(&t, &p)| (t == 0) == (p == 0))
        .count();
    agree as f64 / truth.len() as f64
}

pub fn run(args: &PipelineArgs) -> Result<()> {
    let preset = parse_preset(&args.preset)?;
    let fspace = parse_features(&args.features)?;
    let variant = TangentVariant::parse(&args.variant)?;
    let kind = match &args.model_kind {
        Some(s) => ModelKind::parse(s)?,
        None => match preset {
            Preset::Tep => ModelKind::Ridge,
            Preset::Textile => ModelKind::Svm,
        },
    };
    let out_dir = &args.out_dir;
    let data_dir = out_dir.join("data");
    let covs_dir = out_dir.join("covs");
    ensure_dir(out_dir)?;
    let mut log: Vec<String> = Vec::new();

    let mut config = json!({
        "preset": args.preset,
        "seed": args.seed,
        "features": fspace.name(),
        "classifier": kind.name(),
        "test_frac": args.test_frac,
    });
    if fspace != FeatureSpace::Raw {
        config["variant"] = json!(variant.name());
    }
    if fspace == FeatureSpace::Pga {
        config["k"] = json!(args.k);
    }
    match kind {
        ModelKind::Ridge => {
            config["lambda"] = json!(args.lambda);
        }
        ModelKind::Svm => {
            config["cost"] = json!(args.cost);
            config["epochs"] = json!(args.epochs);
        }
    }

    // Stage 1: data on disk, then loaded back through the same readers any
    // external dataset would use, so the artifact chain has no shortcuts.
    // Stage 2: one covariance descriptor per sample.
    let (set, raw_rows): (LabeledCovSet, DMatrix<f64>) = match preset {
        Preset::Tep => {
            let cfg = BenchmarkConfig {
                n_classes: args.classes,
                runs_per_class: args.runs,
                n: args.n,
                m: args.m,
                delta: args.delta,
                gain_jitter: args.gain_jitter,
                burn_in: DEFAULT_BURN_IN,
                seed: mix_seed(args.seed, 1),
            };
            config["generator"] = json!({
                "classes": cfg.n_classes,
                "runs_per_class": cfg.runs_per_class,
                "n": cfg.n,
                "m": cfg.m,
                "delta": cfg.delta,
                "gain_jitter": cfg.gain_jitter,
                "seed": cfg.seed,
            });
            let bench = gen_class_benchmark(&cfg)?;
            write_ts_dataset(&data_dir, &bench, &cfg)?;
            log.push(format!(
                "synth: {} runs, {} classes, {} steps x {} variables",
                bench.runs.len(),
                cfg.n_classes,
                cfg.m,
                cfg.n
            ));
            let runs = load_runs(&data_dir.join("manifest.csv"), false)?;
            let set = build_cov_set(&runs, &CovOptions::default())?;
            let d = spdgeom::tangent::vec_dim(args.n);
            let mut raw = DMatrix::zeros(set.len(), d);
            for (r, cov) in set.covs.iter().enumerate() {
                raw.row_mut(r).copy_from(&sym_vec(&cov.to_sym()).transpose());
            }
            (set, raw)
        }
        Preset::Textile => {
            let cfg = TextureConfig::new(args.size, args.normal, args.defect, mix_seed(args.seed, 1));
            config["generator"] = json!({
                "size": cfg.size,
                "normal": cfg.normal,
                "defect": cfg.defect,
                "seed": cfg.seed,
            });
            let samples = gen_texture_set(&cfg)?;
            write_img_dataset(&data_dir, &samples, &cfg)?;
            log.push(format!(
                "synth: {} textures ({}x{}), {} defective",
                samples.len(),
                cfg.size,
                cfg.size,
                cfg.defect
            ));
            image_cov_set(&data_dir.join("manifest.csv"), None, &FeatureBank::default())?
        }
    };
    write_cov_dir(&covs_dir, &set, None)?;
    let labels = set.labels();
    let ids: Vec<String> = set.meta.iter().map(|m| m.id.clone()).collect();
    log.push(format!(
        "cov: {} descriptors of size {d}x{d}, {} repaired",
        set.len(),
        set.repaired_count(),
        d = set.covs[0].dim(),
    ));

    // Stage 3 and 4: intrinsic mean (geometry paths only) and feature rows.
    let mut mean_result: Option<MeanResult> = None;
    let feats: DMatrix<f64> = match fspace {
        FeatureSpace::Raw => {
            log.push(format!("features: raw, {} columns", raw_rows.ncols()));
            raw_rows
        }
        FeatureSpace::Tangent | FeatureSpace::Pga => {
            let mr = karcher_mean(&set.covs, &MeanConfig::default())?;
            write_matrix_csv(&out_dir.join("mean.csv"), mr.mean.matrix())?;
            log.push(format!(
                "mean: {} iterations, gradient {:.3e}, converged {}",
                mr.iterations, mr.final_grad_norm, mr.converged
            ));
            let ds = embed(&set.covs, Some(&mr.mean), variant)?;
            mean_result = Some(mr);
            if fspace == FeatureSpace::Pga {
                let model = pga_fit(&ds, args.k)?;
                write_pga_model(&out_dir.join("pga_model.json"), &model)?;
                let scores = pga_project_rows(&model, &ds.rows)?;
                log.push(format!(
                    "features: pga scores, k = {}, top variance {:.6e}",
                    args.k, model.explained_variance[0]
                ));
                scores
            } else {
                log.push(format!(
                    "features: {} tangent coordinates, {} columns",
                    variant.name(),
                    ds.rows.ncols()
                ));
                ds.rows
            }
        }
    };
    write_features_csv(&out_dir.join("features.csv"), &feats, None)?;

    // Stage 5: stratified split.
    let split_seed = mix_seed(args.seed, 2);
    let parts = split(&labels, args.test_frac, split_seed)?;
    let train_idx: Vec<serde_json::Value> = parts.train.iter().map(|&i| json!(i)).collect();
    let test_idx: Vec<serde_json::Value> = parts.test.iter().map(|&i| json!(i)).collect();
    write_json(
        &out_dir.join("split.json"),
        &json!({
            "seed": split_seed,
            "test_frac": args.test_frac,
            "train": train_idx,
            "test": test_idx,
        }),
    )?;
    log.push(format!(
        "split: {} train, {} test",
        parts.train.len(),
        parts.test.len()
    ));

    // Stage 6: fit on the training rows only.
    let train_rows = select_rows(&feats, &parts.train);
    let train_labels = select_labels(&labels, &parts.train);
    let model = match kind {
        ModelKind::Ridge => ridge_fit(&train_rows, &train_labels, args.lambda)?,
        ModelKind::Svm => svm_fit(
            &train_rows,
            &train_labels,
            &SvmConfig {
                c: args.cost,
                epochs: args.epochs,
                seed: mix_seed(args.seed, 3),
                ..SvmConfig::default()
            },
        )?,
    };
    write_linear_model(&out_dir.join("model.json"), &model)?;
    log.push(format!("train: {} on {} samples", kind.name(), parts.train.len()));

    // Stage 7: held-out evaluation.
    let test_rows = select_rows(&feats, &parts.test);
    let test_labels = select_labels(&labels, &parts.test);
    let ev: Evaluation = evaluate(&model, &test_rows, &test_labels)?;
    write_counts_csv(&out_dir.join("confusion.csv"), &ev.confusion.counts)?;
    write_matrix_csv(&out_dir.join("confusion_normalized.csv"), &ev.confusion.normalized)?;
    let mut predictions = String::from("id,truth,predicted\n");
    for (j, &i) in parts.test.iter().enumerate() {
        predictions.push_str(&format!("{},{},{}\n", ids[i], test_labels[j], ev.predictions[j]));
    }
    write_text(&out_dir.join("test_predictions.csv"), &predictions)?;
    let bin = binary_separation(&test_labels, &ev.predictions);
    log.push(format!(
        "eval: accuracy {:.6} on {} held-out samples",
        ev.accuracy,
        parts.test.len()
    ));

    let mut summary = String::new();
    summary.push_str(&format!("preset: {}\n", args.preset));
    summary.push_str(&format!("seed: {}\n", args.seed));
    summary.push_str(&format!("feature_space: {}\n", fspace.name()));
    if fspace != FeatureSpace::Raw {
        summary.push_str(&format!("variant: {}\n", variant.name()));
    }
    if fspace == FeatureSpace::Pga {
        summary.push_str(&format!("pga_components: {}\n", args.k));
    }
    summary.push_str(&format!("classifier: {}\n", kind.name()));
    match kind {
        ModelKind::Ridge => summary.push_str(&format!("lambda: {}\n", format_float(args.lambda))),
        ModelKind::Svm => {
            summary.push_str(&format!("cost: {}\n", format_float(args.cost)));
            summary.push_str(&format!("epochs: {}\n", args.epochs));
        }
    }
    summary.push_str(&format!("samples: {}\n", set.len()));
    summary.push_str(&format!("train_size: {}\n", parts.train.len()));
    summary.push_str(&format!("test_size: {}\n", parts.test.len()));
    summary.push_str(&format!("repaired_covariances: {}\n", set.repaired_count()));
    if let Some(mr) = &mean_result {
        summary.push_str(&format!("mean_iterations: {}\n", mr.iterations));
        summary.push_str(&format!("mean_grad_norm: {}\n", format_float(mr.final_grad_norm)));
        summary.push_str(&format!("mean_converged: {}\n", mr.converged));
    }
    summary.push_str(&format!("accuracy: {}\n", format_float(ev.accuracy)));
    summary.push_str(&format!("correct: {}\n", ev.n_correct));
    summary.push_str(&format!("total: {}\n", ev.n_total));
    summary.push_str(&format!("binary_normal_vs_rest: {}\n", format_float(bin)));
    summary.push_str("confusion: confusion.csv\n");
    summary.push_str("confusion_normalized: confusion_normalized.csv\n");
    summary.push_str("config: config.json\n");
    write_text(&out_dir.join("summary"), &summary)?;

    write_json(&out_dir.join("config.json"), &config)?;
    let mut log_text = log.join("\n");
    log_text.push('\n');
    write_text(&out_dir.join("run.log"), &log_text)?;

    println!("accuracy: {}", format_float(ev.accuracy));
    println!("run_dir: {}", out_dir.display());
    Ok(())
}
