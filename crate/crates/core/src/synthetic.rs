//! Seeded synthetic data: random SPD matrices, stable VAR(1) time series,
//! and a labeled multi-class benchmark generator.
//!
//! All randomness flows from [`crate::rng`]; per-run streams are derived
//! with [`mix_seed`] so that run `r` of seed `s` is the same on every
//! machine, and adding runs never perturbs earlier ones.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::{mix_seed, NormalSource, SplitMix64};
use crate::spd::{symmetrize_exact, SpdMatrix, SymMatrix};

pub const DEFAULT_BURN_IN: usize = 200;

/// Random orthogonal matrix: QR factor of a seeded standard normal matrix.
/// Entries are drawn row major, one Box-Muller stream per call.
fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut gauss = NormalSource::new(seed);
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g[(i, j)] = gauss.next_normal();
        }
    }
    g.qr().q()
}

/// Random SPD matrix `Q diag(λ) Qᵀ` with `Q` from a seeded QR and `λ`
/// uniform in `[eig_lo, eig_hi]`. The rotation is drawn first, then the
/// eigenvalues, so the draw order is part of the reproducibility contract.
pub fn random_spd(n: usize, eig_lo: f64, eig_hi: f64, seed: u64) -> SpdMatrix {
    assert!(n > 0, "random_spd needs n > 0");
    assert!(
        eig_lo > 0.0 && eig_hi >= eig_lo,
        "random_spd needs 0 < eig_lo <= eig_hi, got [{eig_lo}, {eig_hi}]"
    );
    let q = random_orthogonal(n, seed);
    let mut uni = SplitMix64::new(mix_seed(seed, 0x5bd));
    let eigs: Vec<f64> = (0..n).map(|_| uni.uniform(eig_lo, eig_hi)).collect();
    let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut scaled = q.clone();
    for (c, &l) in eigs.iter().enumerate() {
        for r in 0..n {
            scaled[(r, c)] *= l;
        }
    }
    let mut m = &scaled * q.transpose();
    symmetrize_exact(&mut m);
    SpdMatrix::from_symmetric_unchecked(m, Some(min))
}

/// Random symmetric matrix with eigenvalues uniform in `[eig_lo, eig_hi]`
/// (any sign). Same construction as [`random_spd`] without the positivity
/// restriction.
pub fn random_sym_with_eigs(n: usize, eig_lo: f64, eig_hi: f64, seed: u64) -> SymMatrix {
    assert!(n > 0 && eig_hi >= eig_lo);
    let q = random_orthogonal(n, seed);
    let mut uni = SplitMix64::new(mix_seed(seed, 0x5bd));
    let eigs: Vec<f64> = (0..n).map(|_| uni.uniform(eig_lo, eig_hi)).collect();
    let mut scaled = q.clone();
    for (c, &l) in eigs.iter().enumerate() {
        for r in 0..n {
            scaled[(r, c)] *= l;
        }
    }
    let m = &scaled * q.transpose();
    SymMatrix::from_symmetric_unchecked(m)
}

/// First-order vector autoregression `x(t+1) = A x(t) + ε(t)`, with
/// `ε ~ N(0, noise_cov)`.
#[derive(Clone, Debug)]
pub struct VarSpec {
    coeffs: DMatrix<f64>,
    noise_cov: SpdMatrix,
    burn_in: usize,
    spectral_radius: f64,
}

impl VarSpec {
    /// Validates dimensions and stability (spectral radius of `coeffs`
    /// strictly below 0.95).
    pub fn new(coeffs: DMatrix<f64>, noise_cov: SpdMatrix, burn_in: usize) -> Result<Self> {
        let n = noise_cov.dim();
        if coeffs.nrows() != n || coeffs.ncols() != n {
            return Err(Error::dim(
                format!("{n}x{n} coefficient matrix"),
                format!("{}x{}", coeffs.nrows(), coeffs.ncols()),
            ));
        }
        for v in coeffs.iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    context: "VAR coefficient matrix".into(),
                });
            }
        }
        let radius = coeffs
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if !(radius < 0.95) {
            return Err(Error::InvalidInput(format!(
                "VAR coefficient matrix has spectral radius {radius:.4}, must be < 0.95"
            )));
        }
        Ok(VarSpec {
            coeffs,
            noise_cov,
            burn_in,
            spectral_radius: radius,
        })
    }

    pub fn dim(&self) -> usize {
        self.noise_cov.dim()
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn noise_cov(&self) -> &SpdMatrix {
        &self.noise_cov
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }
}

/// Simulates one run of `m` observations (rows are time steps).
///
/// The state starts at zero, runs `burn_in` warm-up steps, then records `m`
/// steps. Noise is `L z` with `L` the Cholesky factor of the noise
/// covariance and `z` standard normal, components drawn in index order.
pub fn gen_var_run(spec: &VarSpec, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(Error::InvalidInput("gen_var_run needs m > 0".into()));
    }
    let n = spec.dim();
    let chol = Cholesky::new(spec.noise_cov.matrix().clone()).ok_or_else(|| {
        Error::NotPositiveDefinite {
            min_eig: spec.noise_cov.min_eig_hint().unwrap_or(f64::NAN),
        }
    })?;
    let l = chol.l();
    let mut gauss = NormalSource::new(seed);
    let mut x = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    let mut out = DMatrix::zeros(m, n);
    for t in 0..(spec.burn_in + m) {
        for j in 0..n {
            z[j] = gauss.next_normal();
        }
        x = &spec.coeffs * &x + &l * &z;
        if t >= spec.burn_in {
            let row = t - spec.burn_in;
            for j in 0..n {
                out[(row, j)] = x[j];
            }
        }
    }
    Ok(out)
}

/// Configuration of the labeled VAR benchmark.
///
/// Class 0 is the baseline process; class `k ≥ 1` applies a structured
/// perturbation of magnitude `delta` to a three-variable block: odd classes
/// scale the block's noise variance by `(1 + delta)²`, even classes edit
/// the block's coupling coefficients by `delta`-proportional amounts. The
/// blocks march through the variable range offset by one, so each noise
/// block straddles a sensor-bank boundary (see below).
///
/// Variables are grouped into sensor banks of three. Each run draws one
/// independent gain `exp(U(-gain_jitter, gain_jitter))` per bank and
/// multiplies that bank's columns by it, modelling per-bank calibration
/// drift between runs. The sample covariance is hit by the exact diagonal
/// congruence `D Σ D`: in a log chart every bank contributes one fixed
/// nuisance direction that a linear model projects out, while raw
/// covariance entries are scaled entry-dependently by `g_k g_l`, a
/// heavy-tailed corruption no linear model undoes. With `delta = 0` all
/// classes are distributionally identical, drift included.
#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub n_classes: usize,
    pub runs_per_class: usize,
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub gain_jitter: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl BenchmarkConfig {
    pub fn new(n_classes: usize, runs_per_class: usize, n: usize, m: usize, seed: u64) -> Self {
        BenchmarkConfig {
            n_classes,
            runs_per_class,
            n,
            m,
            delta: 0.5,
            gain_jitter: 0.8,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }
}

/// Variables per sensor bank; each bank shares one per-run gain draw.
pub const GAIN_GROUP: usize = 3;

#[derive(Clone, Debug)]
pub struct BenchmarkRun {
    pub run_id: String,
    pub label: u32,
    /// `m x n`, rows are time steps, already gain-scaled.
    pub data: DMatrix<f64>,
    /// One gain per sensor bank, bank `k` covering variables
    /// `[3k, 3k+3)` (the last bank may be narrower).
    pub gains: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ClassBenchmark {
    pub runs: Vec<BenchmarkRun>,
    /// One spec per class, index = class label.
    pub specs: Vec<VarSpec>,
}

fn baseline_spec(n: usize, burn_in: usize) -> Result<VarSpec> {
    // Heterogeneous noise scales spanning four orders of magnitude in
    // variance, mimicking unnormalized physical units. The unit spread is
    // load-bearing: entry-wise descriptors inherit it, congruence-invariant
    // ones do not.
    let mut noise = DMatrix::zeros(n, n);
    for j in 0..n {
        let expo = if n > 1 {
            -1.0 + 2.0 * j as f64 / (n - 1) as f64
        } else {
            0.0
        };
        let sd = 10f64.powf(expo);
        noise[(j, j)] = sd * sd;
    }
    let mut coeffs = DMatrix::zeros(n, n);
    for j in 0..n {
        coeffs[(j, j)] = 0.55;
        if j + 1 < n {
            coeffs[(j, j + 1)] = 0.12;
        }
    }
    let noise = SpdMatrix::from_sym(
        SymMatrix::from_raw(noise, crate::spd::DEFAULT_SYM_TOL)?,
        false,
        crate::spd::DEFAULT_FLOOR_RATIO,
    )?;
    VarSpec::new(coeffs, noise, burn_in)
}

fn perturbed_spec(base: &VarSpec, class: usize, delta: f64) -> Result<VarSpec> {
    let n = base.dim();
    let block = 3.min(n);
    // Offset by one so noise blocks straddle sensor-bank boundaries; a
    // block aligned with a bank would be indistinguishable from that
    // bank's gain drift.
    let start = if n > 2 { ((class - 1) * 3 + 1) % (n - 2) } else { 0 };
    let mut coeffs = base.coeffs().clone();
    let mut noise = base.noise_cov().matrix().clone();
    if class % 2 == 1 {
        // Scale the block's noise standard deviation by (1 + delta).
        let f = (1.0 + delta) * (1.0 + delta);
        for j in start..(start + block).min(n) {
            noise[(j, j)] *= f;
        }
    } else {
        // Strengthen the block's self- and neighbor coupling. The
        // coefficient matrix is upper triangular, so its eigenvalues are
        // its diagonal; capping the bump keeps the spectral radius < 0.95
        // for any delta.
        coeffs[(start, start)] += (0.5 * delta).min(0.39);
        coeffs[(start, (start + 1) % n)] += 0.3 * delta;
    }
    let noise = SpdMatrix::from_sym(
        SymMatrix::from_raw(noise, crate::spd::DEFAULT_SYM_TOL)?,
        false,
        crate::spd::DEFAULT_FLOOR_RATIO,
    )?;
    VarSpec::new(coeffs, noise, base.burn_in())
}

/// Generates the labeled benchmark: `n_classes * runs_per_class` runs in
/// class-major order, run ids `run_0000`, `run_0001`, ...
///
/// Per-run streams: run `r` uses `mix_seed(mix_seed(seed, r), 1)` for its
/// gain draws (one per bank, in bank order) and
/// `mix_seed(mix_seed(seed, r), 2)` for its noise sequence.
pub fn gen_class_benchmark(cfg: &BenchmarkConfig) -> Result<ClassBenchmark> {
    if cfg.n_classes < 1 {
        return Err(Error::InvalidInput("benchmark needs at least one class".into()));
    }
    if cfg.runs_per_class == 0 {
        return Err(Error::EmptySet);
    }
    if cfg.n < 2 {
        return Err(Error::InvalidInput(format!(
            "benchmark needs n >= 2 variables, got {}",
            cfg.n
        )));
    }
    if !(cfg.delta >= 0.0 && cfg.delta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "perturbation delta must be finite and non-negative, got {}",
            cfg.delta
        )));
    }
    let base = baseline_spec(cfg.n, cfg.burn_in)?;
    let mut specs = Vec::with_capacity(cfg.n_classes);
    for k in 0..cfg.n_classes {
        if k == 0 || cfg.delta == 0.0 {
            specs.push(base.clone());
        } else {
            specs.push(perturbed_spec(&base, k, cfg.delta)?);
        }
    }
    let n_banks = cfg.n.div_ceil(GAIN_GROUP);
    let mut runs = Vec::with_capacity(cfg.n_classes * cfg.runs_per_class);
    for class in 0..cfg.n_classes {
        for _ in 0..cfg.runs_per_class {
            let r = runs.len() as u64;
            let run_seed = mix_seed(cfg.seed, r);
            let mut gain_rng = SplitMix64::new(mix_seed(run_seed, 1));
            let gains: Vec<f64> = (0..n_banks)
                .map(|_| gain_rng.uniform(-cfg.gain_jitter, cfg.gain_jitter).exp())
                .collect();
            let mut data = gen_var_run(&specs[class], cfg.m, mix_seed(run_seed, 2))?;
            for v in 0..cfg.n {
                let g = gains[v / GAIN_GROUP];
                for t in 0..cfg.m {
                    data[(t, v)] *= g;
                }
            }
            runs.push(BenchmarkRun {
                run_id: format!("run_{:04}", runs.len()),
                label: class as u32,
                data,
                gains,
            });
        }
    }
    Ok(ClassBenchmark { runs, specs })
}

/// Woven-texture image collection: two classes of seeded cloth-like
/// patterns, where the defect class carries one oriented streak.
#[derive(Clone, Debug)]
pub struct TextureConfig {
    /// Square image side length.
    pub size: usize,
    pub normal: usize,
    pub defect: usize,
    pub seed: u64,
}

impl TextureConfig {
    pub fn new(size: usize, normal: usize, defect: usize, seed: u64) -> Self {
        TextureConfig {
            size,
            normal,
            defect,
            seed,
        }
    }
}

/// One generated image with its id and label (0 normal, 1 defect).
#[derive(Clone, Debug)]
pub struct TextureSample {
    pub id: String,
    pub label: u32,
    pub image: crate::image::GrayImage,
}

/// A cloth-like plain weave: two crossed sinusoids with per-image
/// frequency and phase jitter plus pixel noise; the defect variant adds a
/// streak with a Gaussian cross-section along a random chord.
pub fn gen_texture(size: usize, seed: u64, defect: bool) -> Result<crate::image::GrayImage> {
    if size < 8 {
        return Err(Error::InvalidInput(format!(
            "texture side {size} too small, need at least 8"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let tau = std::f64::consts::TAU;
    // Weave spacing near 6 px, jittered a few percent per image.
    let f_col = tau / 6.0 * rng.uniform(0.95, 1.05);
    let f_row = tau / 6.0 * rng.uniform(0.95, 1.05);
    let phase_col = rng.uniform(0.0, tau);
    let phase_row = rng.uniform(0.0, tau);
    let cross = rng.uniform(0.02, 0.05);

    // Streak geometry is drawn even for normal images so both classes
    // consume the stream identically and differ only by the streak itself.
    let r0 = rng.uniform(0.2, 0.8) * size as f64;
    let c0 = rng.uniform(0.2, 0.8) * size as f64;
    let angle = rng.uniform(0.0, tau);
    let half_len = rng.uniform(0.25, 0.4) * size as f64;
    let width = rng.uniform(1.0, 1.8);
    let amp = rng.uniform(0.25, 0.4) * if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
    let (dr, dc) = (angle.sin(), angle.cos());

    let mut gauss = NormalSource::from_rng(rng);
    let mut pixels = DMatrix::zeros(size, size);
    for r in 0..size {
        for c in 0..size {
            let rf = r as f64;
            let cf = c as f64;
            let mut v = 0.5
                + 0.16 * (f_col * cf + phase_col).sin()
                + 0.16 * (f_row * rf + phase_row).sin()
                + cross * (f_col * cf + phase_col).sin() * (f_row * rf + phase_row).sin()
                + 0.03 * gauss.next_normal();
            if defect {
                // Distance from the pixel to the streak segment.
                let pr = rf - r0;
                let pc = cf - c0;
                let t = (pr * dr + pc * dc).clamp(-half_len, half_len);
                let d = (pr - t * dr).hypot(pc - t * dc);
                v += amp * (-d * d / (2.0 * width * width)).exp();
            }
            pixels[(r, c)] = v.clamp(0.0, 1.0);
        }
    }
    crate::image::GrayImage::new(pixels)
}

/// Generate the full two-class collection, normals first, each image on
/// its own derived stream.
pub fn gen_texture_set(cfg: &TextureConfig) -> Result<Vec<TextureSample>> {
    if cfg.normal + cfg.defect == 0 {
        return Err(Error::EmptySet);
    }
    let mut out = Vec::with_capacity(cfg.normal + cfg.defect);
    for i in 0..cfg.normal {
        out.push(TextureSample {
            id: format!("normal_{i:04}"),
            label: 0,
            image: gen_texture(cfg.size, mix_seed(mix_seed(cfg.seed, 0), i as u64), false)?,
        });
    }
    for i in 0..cfg.defect {
        out.push(TextureSample {
            id: format!("defect_{i:04}"),
            label: 1,
            image: gen_texture(cfg.size, mix_seed(mix_seed(cfg.seed, 1), i as u64), true)?,
        });
    }
    Ok(out)
}
