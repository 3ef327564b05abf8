//! Intrinsic and extrinsic means of SPD sets.
//!
//! The Karcher mean minimizes `F(M) = Σ_i d(M, A_i)²` over the manifold. It
//! is computed by the classical fixed-point iteration: average the whitened
//! tangent vectors at the current estimate and take the exponential map of
//! that mean tangent. A step-halving safeguard keeps the objective
//! non-increasing (up to floating-point resolution), and the gradient norm
//! is measured against a scale derived from the inputs so the stopping rule
//! is unit-free.
//!
//! The log-Euclidean mean `exp(mean(log A_i))` is a cheap one-shot stand-in
//! (exact whenever the inputs commute) and the default initializer. The
//! Euclidean mean is included for contrast: it inflates determinants (the
//! swelling effect), which [`swelling_report`] quantifies.

use crate::airm::{exp_map_whitened, log_map_whitened, BasePoint};
use crate::error::{Error, Result};
use crate::spd::{frob_norm, matrix_exp, matrix_log, SpdMatrix, SymMatrix, DEFAULT_FLOOR_RATIO};

/// Initial estimate for the Karcher iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeanInit {
    LogEuclidean,
    Euclidean,
    Identity,
    /// Start from `set[k]`.
    Index(usize),
}

#[derive(Clone, Debug)]
pub struct MeanConfig {
    pub max_iters: usize,
    /// Convergence when the gradient norm falls below `grad_tol * scale`.
    pub grad_tol: f64,
    /// Initial step length; halved on objective increase.
    pub step: f64,
    pub max_halvings: usize,
    pub init: MeanInit,
}

impl Default for MeanConfig {
    fn default() -> Self {
        MeanConfig {
            max_iters: 100,
            grad_tol: 1e-10,
            step: 1.0,
            max_halvings: 20,
            init: MeanInit::LogEuclidean,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeanResult {
    pub mean: SpdMatrix,
    /// Accepted update steps (halved retries do not count).
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub converged: bool,
    /// `Σ_i d(μ_t, A_i)²` at the initial estimate and after each accepted
    /// step. Non-increasing up to floating-point resolution.
    pub objective_trace: Vec<f64>,
    /// `max(1, mean_i ‖log A_i‖_F)` — the unit in which `final_grad_norm`
    /// is judged.
    pub scale: f64,
}

fn check_dims(set: &[SpdMatrix]) -> Result<usize> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = set[0].dim();
    for p in set {
        if p.dim() != n {
            return Err(Error::dim(format!("{n}x{n}"), format!("{0}x{0}", p.dim())));
        }
    }
    Ok(n)
}

/// Whitened tangent vectors at `at`, their mean, and the objective value.
struct IterState {
    base: BasePoint,
    mean_tangent: SymMatrix,
    grad_norm: f64,
    objective: f64,
}

fn eval_state(at: &SpdMatrix, set: &[SpdMatrix]) -> Result<IterState> {
    let base = BasePoint::new(at.clone())?;
    let n = at.dim();
    let mut sum = SymMatrix::zeros(n);
    let mut objective = 0.0;
    for p in set {
        let w = log_map_whitened(&base, p)?;
        let norm = frob_norm(&w);
        objective += norm * norm;
        sum = sum.axpy(1.0, &w, 1.0)?;
    }
    let mean_tangent = sum.scale(1.0 / set.len() as f64);
    let grad_norm = frob_norm(&mean_tangent);
    Ok(IterState {
        base,
        mean_tangent,
        grad_norm,
        objective,
    })
}

/// Karcher mean of a set of SPD matrices.
///
/// Returns [`Error::NoConvergence`] (carrying the best iterate) when the
/// gradient tolerance is not reached within `max_iters` accepted steps or
/// the line search stalls; callers may loosen the tolerance and retry, or
/// accept the carried iterate.
pub fn karcher_mean(set: &[SpdMatrix], cfg: &MeanConfig) -> Result<MeanResult> {
    let n = check_dims(set)?;
    if set.len() == 1 {
        // A single point is its own mean, exactly.
        let scale = frob_norm(&matrix_log(&set[0])?).max(1.0);
        return Ok(MeanResult {
            mean: set[0].clone(),
            iterations: 0,
            final_grad_norm: 0.0,
            converged: true,
            objective_trace: vec![0.0],
            scale,
        });
    }

    let logs: Vec<SymMatrix> = set.iter().map(matrix_log).collect::<Result<_>>()?;
    let scale = {
        let mut acc = 0.0;
        for l in &logs {
            acc += frob_norm(l);
        }
        (acc / set.len() as f64).max(1.0)
    };

    let mut current = match cfg.init {
        MeanInit::LogEuclidean => mean_of_logs_exp(&logs, n)?,
        MeanInit::Euclidean => {
            SpdMatrix::from_sym(euclidean_mean(set)?, false, DEFAULT_FLOOR_RATIO)?
        }
        MeanInit::Identity => SpdMatrix::identity(n),
        MeanInit::Index(k) => set
            .get(k)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("init index {k} out of range for {} inputs", set.len())))?,
    };

    let mut state = eval_state(&current, set)?;
    let mut trace = vec![state.objective];
    let mut iterations = 0;

    loop {
        if state.grad_norm <= cfg.grad_tol * scale {
            return Ok(MeanResult {
                mean: current,
                iterations,
                final_grad_norm: state.grad_norm,
                converged: true,
                objective_trace: trace,
                scale,
            });
        }
        if iterations >= cfg.max_iters {
            return Err(Error::NoConvergence {
                best: Box::new(MeanResult {
                    mean: current,
                    iterations,
                    final_grad_norm: state.grad_norm,
                    converged: false,
                    objective_trace: trace,
                    scale,
                }),
            });
        }

        let mut step = cfg.step;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let cand = exp_map_whitened(&state.base, &state.mean_tangent.scale(step))?;
            let cand_state = eval_state(&cand, set)?;
            // Near the optimum a genuine descent step moves the objective
            // by less than its floating-point resolution; accept within a
            // few ulps so the gradient, not roundoff, decides termination.
            if cand_state.objective <= state.objective * (1.0 + 16.0 * f64::EPSILON) {
                accepted = Some((cand, cand_state));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((cand, cand_state)) => {
                current = cand;
                state = cand_state;
                iterations += 1;
                trace.push(state.objective);
            }
            None => {
                return Err(Error::NoConvergence {
                    best: Box::new(MeanResult {
                        mean: current,
                        iterations,
                        final_grad_norm: state.grad_norm,
                        converged: false,
                        objective_trace: trace,
                        scale,
                    }),
                });
            }
        }
    }
}

fn mean_of_logs_exp(logs: &[SymMatrix], n: usize) -> Result<SpdMatrix> {
    let mut sum = SymMatrix::zeros(n);
    for l in logs {
        sum = sum.axpy(1.0, l, 1.0)?;
    }
    matrix_exp(&sum.scale(1.0 / logs.len() as f64))
}

/// Log-Euclidean mean `exp(mean_i log A_i)`.
pub fn log_euclidean_mean(set: &[SpdMatrix]) -> Result<SpdMatrix> {
    let n = check_dims(set)?;
    let logs: Vec<SymMatrix> = set.iter().map(matrix_log).collect::<Result<_>>()?;
    mean_of_logs_exp(&logs, n)
}

/// Entry-wise arithmetic mean. Symmetric, and positive definite for SPD
/// inputs, but not an intrinsic mean: see [`swelling_report`].
pub fn euclidean_mean(set: &[SpdMatrix]) -> Result<SymMatrix> {
    let n = check_dims(set)?;
    let mut sum = SymMatrix::zeros(n);
    for p in set {
        sum = sum.axpy(1.0, &p.to_sym(), 1.0)?;
    }
    Ok(sum.scale(1.0 / set.len() as f64))
}

/// Determinant comparison of the Euclidean and Karcher means.
///
/// The Karcher mean's determinant is the geometric mean of the input
/// determinants, while the Euclidean mean's is at least that (Minkowski's
/// determinant inequality), so `ratio ≥ 1` with equality only for sets
/// that average without swelling (e.g. identical inputs).
#[derive(Clone, Debug)]
pub struct SwellingReport {
    pub input_dets: Vec<f64>,
    pub euclid_det: f64,
    pub karcher_det: f64,
    /// `euclid_det / karcher_det`.
    pub ratio: f64,
}

pub fn swelling_report(set: &[SpdMatrix]) -> Result<SwellingReport> {
    check_dims(set)?;
    let input_dets: Vec<f64> = set.iter().map(|p| p.det()).collect();
    let euclid = euclidean_mean(set)?;
    let euclid_det = SpdMatrix::from_sym(euclid, false, DEFAULT_FLOOR_RATIO)?.det();
    let karcher = karcher_mean(set, &MeanConfig::default())?;
    let karcher_det = karcher.mean.det();
    Ok(SwellingReport {
        input_dets,
        euclid_det,
        karcher_det,
        ratio: euclid_det / karcher_det,
    })
}
