//! Linear classifiers over feature rows, with a stratified split and
//! confusion-matrix evaluation.
//!
//! Both trainers are one-vs-rest with ±1 targets and an unpenalized bias.
//! Ridge solves the normal equations once per class through a shared
//! Cholesky factorization. The SVM is the Pegasos subgradient method:
//! step size `1/(λt)`, one seeded permutation per epoch, and the returned
//! weights are the average of the last tenth of the iterates, which
//! smooths out the tail oscillation of the raw subgradient path.
//!
//! Everything is deterministic: class order is ascending label order,
//! permutations come from an explicit seeded generator, and score argmax
//! breaks ties toward the lowest class id.

use crate::error::{Error, Result};
use crate::rng::{mix_seed, SplitMix64};
use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Ridge,
    Svm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ridge => "ridge",
            ModelKind::Svm => "svm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ridge" => Ok(ModelKind::Ridge),
            "svm" => Ok(ModelKind::Svm),
            other => Err(Error::InvalidInput(format!(
                "unknown model kind {other:?}, expected \"ridge\" or \"svm\""
            ))),
        }
    }
}

/// One-vs-rest linear scorer: row `c` of `weights` and `bias[c]` score
/// class `class_ids[c]`; prediction is the argmax, ties to the lowest id.
#[derive(Clone, Debug)]
pub struct LinearModel {
    pub class_ids: Vec<u32>,
    /// `C × D`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub kind: ModelKind,
}

impl LinearModel {
    pub fn feature_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn decision_values(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rows.ncols() != self.feature_dim() {
            return Err(Error::dim(
                format!("{} features", self.feature_dim()),
                format!("{}", rows.ncols()),
            ));
        }
        let mut scores = rows * self.weights.transpose();
        for r in 0..scores.nrows() {
            for c in 0..scores.ncols() {
                scores[(r, c)] += self.bias[c];
            }
        }
        Ok(scores)
    }

    pub fn predict(&self, rows: &DMatrix<f64>) -> Result<Vec<u32>> {
        let scores = self.decision_values(rows)?;
        let mut out = Vec::with_capacity(rows.nrows());
        for r in 0..scores.nrows() {
            let mut best = 0;
            for c in 1..scores.ncols() {
                // Strict > keeps the lowest class index on ties.
                if scores[(r, c)] > scores[(r, best)] {
                    best = c;
                }
            }
            out.push(self.class_ids[best]);
        }
        Ok(out)
    }
}

fn check_rows(rows: &DMatrix<f64>, labels: &[u32]) -> Result<()> {
    if rows.nrows() == 0 {
        return Err(Error::EmptySet);
    }
    if rows.nrows() != labels.len() {
        return Err(Error::dim(
            format!("{} labels", rows.nrows()),
            format!("{}", labels.len()),
        ));
    }
    for r in 0..rows.nrows() {
        for c in 0..rows.ncols() {
            if !rows[(r, c)].is_finite() {
                return Err(Error::NonFiniteValue {
                    context: format!("feature ({r}, {c})"),
                });
            }
        }
    }
    Ok(())
}

fn sorted_class_ids(labels: &[u32]) -> Vec<u32> {
    let mut ids: Vec<u32> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Indices of a stratified train/test partition, each sorted ascending.
#[derive(Clone, Debug)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split: each class sends `ceil(count * test_frac)` samples to
/// the test side, drawn by a per-class seeded shuffle so the assignment of
/// one class does not depend on the others.
pub fn split(labels: &[u32], test_frac: f64, seed: u64) -> Result<SplitIndices> {
    if labels.is_empty() {
        return Err(Error::EmptySet);
    }
    if !test_frac.is_finite() || !(0.0..1.0).contains(&test_frac) {
        return Err(Error::InvalidInput(format!(
            "test fraction {test_frac} outside [0, 1)"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in sorted_class_ids(labels) {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        let take = (members.len() as f64 * test_frac).ceil() as usize;
        if take >= members.len() && take > 0 {
            return Err(Error::DegenerateSplit { class });
        }
        let mut rng = SplitMix64::new(mix_seed(seed, class as u64));
        rng.shuffle(&mut members);
        test.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

/// Ridge regression to ±1 one-vs-rest targets.
///
/// Solves `(X̃ᵀX̃ + λĨ) w̃ = X̃ᵀy` where `X̃` carries an appended column of
/// ones and `Ĩ` is the identity with a zero in the bias slot, so the bias
/// is fit but never shrunk. One Cholesky factorization serves all classes.
pub fn ridge_fit(rows: &DMatrix<f64>, labels: &[u32], lambda: f64) -> Result<LinearModel> {
    check_rows(rows, labels)?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidInput(format!("ridge penalty {lambda} must be finite and >= 0")));
    }
    let class_ids = sorted_class_ids(labels);
    if class_ids.len() < 2 {
        return Err(Error::SingleClass { found: class_ids.len() });
    }
    let n = rows.nrows();
    let d = rows.ncols();

    let mut xt = DMatrix::zeros(n, d + 1);
    xt.view_mut((0, 0), (n, d)).copy_from(rows);
    for r in 0..n {
        xt[(r, d)] = 1.0;
    }
    let mut gram = xt.transpose() * &xt;
    for j in 0..d {
        gram[(j, j)] += lambda;
    }
    let chol = nalgebra::Cholesky::new(gram).ok_or(Error::SingularSystem)?;

    let mut weights = DMatrix::zeros(class_ids.len(), d);
    let mut bias = DVector::zeros(class_ids.len());
    for (ci, &class) in class_ids.iter().enumerate() {
        let y = DVector::from_iterator(
            n,
            labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }),
        );
        let sol = chol.solve(&(xt.transpose() * y));
        for j in 0..d {
            weights[(ci, j)] = sol[j];
        }
        bias[ci] = sol[d];
    }
    Ok(LinearModel {
        class_ids,
        weights,
        bias,
        kind: ModelKind::Ridge,
    })
}

#[derive(Clone, Debug)]
pub struct SvmConfig {
    /// Inverse regularization: the Pegasos rate is `λ = 1 / (c · N)`.
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of trailing iterates averaged into the returned weights.
    pub average_frac: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            epochs: 200,
            seed: 0,
            average_frac: 0.1,
        }
    }
}

/// Hinge-loss primal objective `λ/2 ‖w‖² + mean hinge`, used for traces.
fn svm_objective(
    rows: &DMatrix<f64>,
    y: &[f64],
    w: &DVector<f64>,
    b: f64,
    lambda: f64,
) -> f64 {
    let n = rows.nrows();
    let mut hinge = 0.0;
    for r in 0..n {
        let mut s = b;
        for c in 0..rows.ncols() {
            s += rows[(r, c)] * w[c];
        }
        hinge += (1.0 - y[r] * s).max(0.0);
    }
    0.5 * lambda * w.dot(w) + hinge / n as f64
}

/// One binary Pegasos run. Returns the averaged `(w, b)` and the per-epoch
/// objective of the raw (unaveraged) iterate.
fn pegasos_binary(
    rows: &DMatrix<f64>,
    y: &[f64],
    cfg: &SvmConfig,
    stream: u64,
) -> (DVector<f64>, f64, Vec<f64>) {
    let n = rows.nrows();
    let d = rows.ncols();
    let lambda = 1.0 / (cfg.c * n as f64);
    let mut rng = SplitMix64::new(stream);
    let mut w = DVector::zeros(d);
    let mut b = 0.0;
    let total = cfg.epochs * n;
    let window = ((total as f64 * cfg.average_frac).ceil() as usize).clamp(1, total);
    let first_averaged = total - window + 1;
    let mut acc_w = DVector::zeros(d);
    let mut acc_b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut t = 0usize;
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let mut s = b;
            for c in 0..d {
                s += rows[(i, c)] * w[c];
            }
            let shrink = 1.0 - eta * lambda; // = 1 - 1/t
            for c in 0..d {
                w[c] *= shrink;
            }
            if y[i] * s < 1.0 {
                let step = eta * y[i];
                for c in 0..d {
                    w[c] += step * rows[(i, c)];
                }
                b += step;
            }
            if t >= first_averaged {
                acc_w.axpy(1.0, &w, 1.0);
                acc_b += b;
            }
        }
        trace.push(svm_objective(rows, y, &w, b, lambda));
    }
    let inv = 1.0 / window as f64;
    (acc_w.scale(inv), acc_b * inv, trace)
}

/// Pegasos SVM, plus the per-epoch objective trace of each binary problem
/// (one problem for two classes, one per class otherwise).
pub fn svm_fit_with_trace(
    rows: &DMatrix<f64>,
    labels: &[u32],
    cfg: &SvmConfig,
) -> Result<(LinearModel, Vec<Vec<f64>>)> {
    check_rows(rows, labels)?;
    if !cfg.c.is_finite() || cfg.c <= 0.0 {
        return Err(Error::InvalidInput(format!("svm cost {} must be finite and > 0", cfg.c)));
    }
    if cfg.epochs == 0 {
        return Err(Error::InvalidInput("epoch count must be at least 1".into()));
    }
    if !cfg.average_frac.is_finite() || !(cfg.average_frac > 0.0 && cfg.average_frac <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "averaging fraction {} outside (0, 1]",
            cfg.average_frac
        )));
    }
    let class_ids = sorted_class_ids(labels);
    if class_ids.len() < 2 {
        return Err(Error::SingleClass { found: class_ids.len() });
    }
    let d = rows.ncols();
    let mut weights = DMatrix::zeros(class_ids.len(), d);
    let mut bias = DVector::zeros(class_ids.len());
    let mut traces = Vec::new();

    if class_ids.len() == 2 {
        // One binary problem: positive = higher class id, the negative row
        // is its exact mirror.
        let pos = class_ids[1];
        let y: Vec<f64> = labels.iter().map(|&l| if l == pos { 1.0 } else { -1.0 }).collect();
        let (w, b, trace) = pegasos_binary(rows, &y, cfg, mix_seed(cfg.seed, pos as u64));
        for j in 0..d {
            weights[(1, j)] = w[j];
            weights[(0, j)] = -w[j];
        }
        bias[1] = b;
        bias[0] = -b;
        traces.push(trace);
    } else {
        for (ci, &class) in class_ids.iter().enumerate() {
            let y: Vec<f64> =
                labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            let (w, b, trace) = pegasos_binary(rows, &y, cfg, mix_seed(cfg.seed, class as u64));
            for j in 0..d {
                weights[(ci, j)] = w[j];
            }
            bias[ci] = b;
            traces.push(trace);
        }
    }
    Ok((
        LinearModel {
            class_ids,
            weights,
            bias,
            kind: ModelKind::Svm,
        },
        traces,
    ))
}

pub fn svm_fit(rows: &DMatrix<f64>, labels: &[u32], cfg: &SvmConfig) -> Result<LinearModel> {
    svm_fit_with_trace(rows, labels, cfg).map(|(m, _)| m)
}

/// Row-stochastic view of prediction outcomes. `counts[(i, j)]` is the
/// number of samples of true class `class_ids[i]` predicted as
/// `class_ids[j]`; `normalized` divides each row by its total, leaving
/// zero rows (classes absent from the evaluated set, listed in
/// `empty_rows`) as zeros.
#[derive(Clone, Debug)]
pub struct ConfusionMatrix {
    pub class_ids: Vec<u32>,
    pub counts: DMatrix<f64>,
    pub normalized: DMatrix<f64>,
    pub empty_rows: Vec<u32>,
}

impl ConfusionMatrix {
    pub fn from_pairs(class_ids: &[u32], truth: &[u32], predicted: &[u32]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::dim(
                format!("{} predictions", truth.len()),
                format!("{}", predicted.len()),
            ));
        }
        let index = |label: u32| -> Result<usize> {
            class_ids
                .iter()
                .position(|&c| c == label)
                .ok_or_else(|| Error::InvalidInput(format!("label {label} not among model classes")))
        };
        let k = class_ids.len();
        let mut counts = DMatrix::zeros(k, k);
        for (&t, &p) in truth.iter().zip(predicted) {
            counts[(index(t)?, index(p)?)] += 1.0;
        }
        let mut normalized = DMatrix::zeros(k, k);
        let mut empty_rows = Vec::new();
        for i in 0..k {
            let row_total: f64 = (0..k).map(|j| counts[(i, j)]).sum();
            if row_total > 0.0 {
                for j in 0..k {
                    normalized[(i, j)] = counts[(i, j)] / row_total;
                }
            } else {
                empty_rows.push(class_ids[i]);
            }
        }
        Ok(ConfusionMatrix {
            class_ids: class_ids.to_vec(),
            counts,
            normalized,
            empty_rows,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub accuracy: f64,
    pub n_correct: usize,
    pub n_total: usize,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<u32>,
}

pub fn evaluate(model: &LinearModel, rows: &DMatrix<f64>, labels: &[u32]) -> Result<Evaluation> {
    check_rows(rows, labels)?;
    let predictions = model.predict(rows)?;
    let n_total = labels.len();
    let n_correct = labels
        .iter()
        .zip(&predictions)
        .filter(|(&t, &p)| t == p)
        .count();
    let confusion = ConfusionMatrix::from_pairs(&model.class_ids, labels, &predictions)?;
    Ok(Evaluation {
        accuracy: n_correct as f64 / n_total as f64,
        n_correct,
        n_total,
        confusion,
        predictions,
    })
}
