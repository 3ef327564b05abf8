//! Command line front end: geometry operations, descriptor pipelines, and
//! the end-to-end benchmark driver, all file based and seed deterministic.
//!
//! Exit codes: 0 success; 2 validation problems (bad flags, malformed or
//! inconsistent inputs), reported as a single `ERROR <Kind>: ...` line on
//! stderr; 1 internal numerical failure.

mod ops;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spdgeom::synthetic::{BenchmarkConfig, TextureConfig, DEFAULT_BURN_IN};

#[derive(Parser)]
#[command(
    name = "spdgeom",
    version,
    about = "Covariance descriptors on the curved geometry of positive definite matrices",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Geodesic distance between two SPD matrices given as CSV files.
    Dist { a: PathBuf, b: PathBuf },
    /// Point at parameter t on the geodesic from A to B.
    Geodesic {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tangent coordinates of a point in the chart at BASE.
    Logmap {
        base: PathBuf,
        point: PathBuf,
        /// Chart: paper (ambient) or whitened.
        #[arg(long, default_value = "paper")]
        variant: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Manifold point for a tangent vector in the chart at BASE.
    Expmap {
        base: PathBuf,
        tangent: PathBuf,
        #[arg(long, default_value = "paper")]
        variant: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Intrinsic (karcher), log-euclidean, or euclidean mean of SPD files.
    Mean {
        /// Matrix CSV files, or directories of them.
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "karcher")]
        method: String,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON report: iteration count, gradient norm,
        /// determinants.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        grad_tol: f64,
    },
    /// Principal geodesic analysis.
    #[command(subcommand)]
    Pga(PgaCommand),
    /// Covariance descriptors for multivariate time-series runs.
    CovTs {
        /// CSV manifest: id,path,label per line.
        #[arg(long)]
        manifest: PathBuf,
        /// Base directory for relative data paths (default: the
        /// manifest's directory).
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Keep raw second moments instead of centering each column.
        #[arg(long)]
        no_center: bool,
        /// Fail on rank-deficient covariance instead of flooring its
        /// spectrum.
        #[arg(long)]
        no_repair: bool,
        /// Data files carry a header line to drop.
        #[arg(long)]
        skip_header: bool,
        #[arg(long)]
        out_dir: PathBuf,
        /// Labels CSV destination (default: <out-dir>/labels.csv).
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Filter-bank covariance descriptors for grayscale images.
    CovImg {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// "default" for the nine-filter bank, or a CSV of
        /// name,kind,sigma lines (kinds: identity, gaussian, frangi,
        /// hessian).
        #[arg(long, default_value = "default")]
        bank: String,
        /// Ridge polarity the vesselness filters respond to: bright or
        /// dark.
        #[arg(long, default_value = "bright")]
        polarity: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Seeded synthetic datasets.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Fit a ridge or linear SVM classifier on feature rows.
    Train {
        /// Feature matrix CSV, one sample per row, no label column.
        #[arg(long)]
        features: PathBuf,
        /// Labels CSV (id,label) in the same row order.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value = "ridge")]
        model_kind: String,
        /// Ridge penalty.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// SVM inverse regularization.
        #[arg(long, default_value_t = 1.0)]
        cost: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained model; prints accuracy, optionally writes the
    /// confusion matrix.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        confusion: Option<PathBuf>,
        /// Write row-normalized frequencies instead of counts.
        #[arg(long)]
        normalized: bool,
    },
    /// Determinant comparison of euclidean and intrinsic means.
    ReportSwelling {
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Full benchmark: generate, descriptors, mean, embed, split, train,
    /// evaluate; every artifact lands in --out-dir.
    Pipeline(pipeline::PipelineArgs),
}

#[derive(Subcommand)]
enum PgaCommand {
    /// Fit principal geodesic axes to a set of SPD files.
    Fit {
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        /// Component count.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value = "paper")]
        variant: String,
        /// Base point CSV; computed as the intrinsic mean when absent.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        /// Score rows (k columns per input) destination.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Labels CSV; adds a label column to the scores, matched by
        /// input file stem.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Labeled multivariate benchmark runs from perturbed VAR processes.
    Ts {
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        m: usize,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value_t = 0.8)]
        gain_jitter: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Woven textures, plain and with a seeded defect streak.
    Img {
        #[arg(long, default_value_t = 60)]
        normal: usize,
        #[arg(long, default_value_t = 60)]
        defect: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn run(cli: Cli) -> spdgeom::Result<()> {
    match cli.command {
        Command::Dist { a, b } => ops::cmd_dist(&a, &b),
        Command::Geodesic { a, b, t, out } => ops::cmd_geodesic(&a, &b, t, &out),
        Command::Logmap {
            base,
            point,
            variant,
            out,
        } => ops::cmd_logmap(&base, &point, &variant, &out),
        Command::Expmap {
            base,
            tangent,
            variant,
            out,
        } => ops::cmd_expmap(&base, &tangent, &variant, &out),
        Command::Mean {
            inputs,
            method,
            out,
            report,
            max_iters,
            grad_tol,
        } => ops::cmd_mean(&inputs, &method, &out, report.as_deref(), max_iters, grad_tol),
        Command::Pga(PgaCommand::Fit {
            inputs,
            k,
            variant,
            base,
            model,
            scores,
            labels,
        }) => ops::cmd_pga_fit(
            &inputs,
            k,
            &variant,
            base.as_deref(),
            &model,
            scores.as_deref(),
            labels.as_deref(),
        ),
        Command::CovTs {
            manifest,
            data_dir,
            no_center,
            no_repair,
            skip_header,
            out_dir,
            labels,
        } => ops::cmd_cov_ts(
            &manifest,
            data_dir.as_deref(),
            !no_center,
            !no_repair,
            skip_header,
            &out_dir,
            labels.as_deref(),
        ),
        Command::CovImg {
            manifest,
            data_dir,
            bank,
            polarity,
            out_dir,
            labels,
        } => ops::cmd_cov_img(
            &manifest,
            data_dir.as_deref(),
            &bank,
            &polarity,
            &out_dir,
            labels.as_deref(),
        ),
        Command::Synth(SynthCommand::Ts {
            classes,
            runs,
            n,
            m,
            delta,
            gain_jitter,
            seed,
            out_dir,
        }) => {
            let cfg = BenchmarkConfig {
                n_classes: classes,
                runs_per_class: runs,
                n,
                m,
                delta,
                gain_jitter,
                burn_in: DEFAULT_BURN_IN,
                seed,
            };
            ops::cmd_synth_ts(&cfg, &out_dir)
        }
        Command::Synth(SynthCommand::Img {
            normal,
            defect,
            size,
            seed,
            out_dir,
        }) => {
            let cfg = TextureConfig::new(size, normal, defect, seed);
            ops::cmd_synth_img(&cfg, &out_dir)
        }
        Command::Train {
            features,
            labels,
            model_kind,
            lambda,
            cost,
            epochs,
            seed,
            out,
        } => ops::cmd_train(&features, &labels, &model_kind, lambda, cost, epochs, seed, &out),
        Command::Eval {
            model,
            features,
            labels,
            confusion,
            normalized,
        } => ops::cmd_eval(&model, &features, &labels, confusion.as_deref(), normalized),
        Command::ReportSwelling { inputs, json } => {
            ops::cmd_report_swelling(&inputs, json.as_deref())
        }
        Command::Pipeline(args) => pipeline::run(&args),
    }
}

fn main() -> ExitCode {
    // Restore default SIGPIPE handling so `spdgeom ... | head` terminates
    // quietly instead of panicking on the closed pipe.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("ERROR {}: {}", e.kind(), msg);
            match e.kind() {
                // Numerical non-convergence is an internal failure; every
                // other error traces back to the invocation or its inputs.
                "NoConvergence" | "ConvergenceFailure" | "Overflow" => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
