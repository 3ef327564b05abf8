//! Symmetric and symmetric positive definite matrix types with spectral
//! primitives.
//!
//! Everything else in this crate reduces to one primitive: the
//! eigendecomposition of a real symmetric matrix. [`eig_sym`] wraps the
//! symmetric eigensolver behind a deterministic contract — eigenvalues
//! ascending, eigenvector signs fixed — so repeated calls on identical input
//! are identical bit for bit. The spectral functions [`matrix_exp`],
//! [`matrix_log`] and [`matrix_power`] apply a scalar map to the eigenvalues
//! and rebuild `U f(Λ) Uᵀ`.
//!
//! [`SymMatrix`] and [`SpdMatrix`] are validated wrappers: a `SymMatrix` is
//! exactly symmetric in storage (both triangles hold the same bits) with all
//! entries finite; an `SpdMatrix` additionally has strictly positive
//! eigenvalues, established at construction and preserved by the operations
//! here.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Default relative tolerance for accepting nearly-symmetric input.
pub const DEFAULT_SYM_TOL: f64 = 1e-8;
/// Default eigenvalue clamp, relative to the largest eigenvalue, used by
/// repair-mode validation.
pub const DEFAULT_FLOOR_RATIO: f64 = 1e-10;

/// Iteration cap handed to the eigensolver. Generous: tridiagonal QL needs
/// a few sweeps per eigenvalue, so hitting this indicates pathological input.
const EIG_MAX_ITER: usize = 10_000;

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFiniteValue {
                    context: format!("{what} entry ({i},{j})"),
                });
            }
        }
    }
    Ok(())
}

/// Frobenius norm of a raw matrix, accumulated in column-major order.
pub(crate) fn frob_norm_raw(m: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for v in m.iter() {
        acc += v * v;
    }
    acc.sqrt()
}

pub(crate) fn frob_inner_raw(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

/// Makes both triangles bitwise equal by averaging mirrored entries once.
pub(crate) fn symmetrize_exact(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// A real symmetric matrix: square, finite, both triangles bitwise equal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    /// Accepts `raw` if its relative skew `‖M − Mᵀ‖_F / max(1, ‖M‖_F)` is
    /// within `tol`, returning the symmetrized part `(M + Mᵀ)/2`.
    pub fn from_raw(raw: DMatrix<f64>, tol: f64) -> Result<Self> {
        if raw.nrows() != raw.ncols() {
            return Err(Error::dim(
                "square matrix",
                format!("{}x{}", raw.nrows(), raw.ncols()),
            ));
        }
        if !(tol >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "symmetry tolerance must be non-negative, got {tol}"
            )));
        }
        check_finite(&raw, "matrix")?;
        let mut skew_sq = 0.0;
        for i in 0..raw.nrows() {
            for j in 0..raw.ncols() {
                let d = raw[(i, j)] - raw[(j, i)];
                skew_sq += d * d;
            }
        }
        let skew = skew_sq.sqrt();
        let scale = frob_norm_raw(&raw).max(1.0);
        if skew > tol * scale {
            return Err(Error::AsymmetricInput {
                skew: skew / scale,
                tol,
            });
        }
        let mut m = raw;
        symmetrize_exact(&mut m);
        Ok(SymMatrix { m })
    }

    /// Wraps a matrix already known to be symmetric and finite. The storage
    /// is symmetrized so the bitwise invariant holds regardless of caller
    /// roundoff.
    pub(crate) fn from_symmetric_unchecked(mut m: DMatrix<f64>) -> Self {
        symmetrize_exact(&mut m);
        SymMatrix { m }
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            m: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Entry-wise linear combination `alpha * self + beta * other`.
    pub fn axpy(&self, alpha: f64, other: &SymMatrix, beta: f64) -> Result<SymMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::dim(
                format!("{0}x{0}", self.dim()),
                format!("{0}x{0}", other.dim()),
            ));
        }
        Ok(SymMatrix {
            m: &self.m * alpha + &other.m * beta,
        })
    }

    pub fn scale(&self, alpha: f64) -> SymMatrix {
        SymMatrix { m: &self.m * alpha }
    }
}

/// A symmetric positive definite matrix.
///
/// Construction goes through [`SpdMatrix::from_sym`] (spectral validation,
/// optionally with repair) or through operations that preserve positivity by
/// construction. `min_eig` caches the smallest eigenvalue when validation
/// computed it; it is a hint, not re-derived from the entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
    min_eig: Option<f64>,
}

impl SpdMatrix {
    /// Validates positive definiteness, like `from_sym_report`, discarding
    /// the repair flag.
    pub fn from_sym(s: SymMatrix, repair: bool, floor_ratio: f64) -> Result<Self> {
        Ok(Self::from_sym_report(s, repair, floor_ratio)?.0)
    }

    /// Validates positive definiteness by eigendecomposition.
    ///
    /// Without repair: all eigenvalues must be strictly positive, and the
    /// input is returned unchanged (bitwise). With repair: any eigenvalue at
    /// or below `floor_ratio * λ_max` (or below `floor_ratio` absolute when
    /// `λ_max ≤ 0`) is clamped to that floor and the matrix rebuilt; the
    /// returned flag says whether clamping happened.
    pub fn from_sym_report(s: SymMatrix, repair: bool, floor_ratio: f64) -> Result<(Self, bool)> {
        if !(floor_ratio > 0.0 && floor_ratio.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "floor ratio must be positive and finite, got {floor_ratio}"
            )));
        }
        let eig = eig_sym(&s)?;
        let min = eig.eigenvalues[0];
        let max = eig.eigenvalues[eig.eigenvalues.len() - 1];
        let floor = if max > 0.0 { floor_ratio * max } else { floor_ratio };
        if repair {
            if min <= floor {
                let m = eig.rebuild_with(|l| l.max(floor));
                return Ok((
                    SpdMatrix {
                        m,
                        min_eig: Some(floor),
                    },
                    true,
                ));
            }
            return Ok((
                SpdMatrix {
                    m: s.m,
                    min_eig: Some(min),
                },
                false,
            ));
        }
        if min > 0.0 {
            Ok((
                SpdMatrix {
                    m: s.m,
                    min_eig: Some(min),
                },
                false,
            ))
        } else {
            Err(Error::NotPositiveDefinite { min_eig: min })
        }
    }

    /// Convenience: symmetry check followed by strict validation.
    pub fn from_raw(raw: DMatrix<f64>, sym_tol: f64) -> Result<Self> {
        Self::from_sym(SymMatrix::from_raw(raw, sym_tol)?, false, DEFAULT_FLOOR_RATIO)
    }

    /// Wraps a matrix that is positive definite by construction (for example
    /// `U f(Λ) Uᵀ` with `f > 0`). Storage is exactly symmetrized.
    pub(crate) fn from_symmetric_unchecked(mut m: DMatrix<f64>, min_eig: Option<f64>) -> Self {
        symmetrize_exact(&mut m);
        SpdMatrix { m, min_eig }
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix {
            m: DMatrix::identity(n, n),
            min_eig: Some(1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Cached smallest eigenvalue, when the constructor established one.
    pub fn min_eig_hint(&self) -> Option<f64> {
        self.min_eig
    }

    pub fn to_sym(&self) -> SymMatrix {
        SymMatrix { m: self.m.clone() }
    }

    /// Determinant via LU. Independent of the spectral route, which makes it
    /// usable as a cross-check against eigenvalue products.
    pub fn det(&self) -> f64 {
        self.m.clone().lu().determinant()
    }
}

/// Eigendecomposition of a symmetric matrix: `A = U diag(Λ) Uᵀ`.
///
/// Deterministic contract: eigenvalues ascend (ties keep solver order);
/// each eigenvector column is scaled so its largest-magnitude entry is
/// positive, ties resolved by the lowest row index.
#[derive(Clone, Debug)]
pub struct EigDecomp {
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigDecomp {
    /// Rebuilds `U diag(f(Λ)) Uᵀ`, exactly symmetrized.
    pub fn rebuild_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for (c, &l) in self.eigenvalues.iter().enumerate() {
            let fl = f(l);
            for r in 0..n {
                scaled[(r, c)] *= fl;
            }
        }
        let mut m = &scaled * self.eigenvectors.transpose();
        symmetrize_exact(&mut m);
        m
    }

    pub fn rebuild(&self) -> DMatrix<f64> {
        self.rebuild_with(|l| l)
    }
}

/// Symmetric eigendecomposition with the deterministic ordering and sign
/// convention described on [`EigDecomp`].
pub fn eig_sym(s: &SymMatrix) -> Result<EigDecomp> {
    let n = s.dim();
    if n == 0 {
        return Err(Error::dim("non-empty matrix", "0x0"));
    }
    let se = SymmetricEigen::try_new(s.m.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::ConvergenceFailure {
            max_iter: EIG_MAX_ITER,
        })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[a]
            .total_cmp(&se.eigenvalues[b])
            .then(a.cmp(&b))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (c, &src) in order.iter().enumerate() {
        // Sign convention: largest-magnitude entry positive; the strict
        // comparison keeps the lowest row index on exact ties.
        let col = se.eigenvectors.column(src);
        let mut lead = 0;
        for r in 1..n {
            if col[r].abs() > col[lead].abs() {
                lead = r;
            }
        }
        let flip = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            eigenvectors[(r, c)] = flip * col[r];
        }
    }
    Ok(EigDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Matrix exponential of a symmetric matrix; the result is positive definite.
pub fn matrix_exp(s: &SymMatrix) -> Result<SpdMatrix> {
    let eig = eig_sym(s)?;
    let mut min = f64::INFINITY;
    for &l in &eig.eigenvalues {
        let e = l.exp();
        if !e.is_finite() {
            return Err(Error::Overflow {
                context: format!("matrix_exp: exp({l:.6e}) overflows"),
            });
        }
        min = min.min(e);
    }
    let m = eig.rebuild_with(f64::exp);
    Ok(SpdMatrix::from_symmetric_unchecked(m, Some(min)))
}

/// Matrix logarithm of a positive definite matrix.
pub fn matrix_log(p: &SpdMatrix) -> Result<SymMatrix> {
    let eig = eig_sym(&p.to_sym())?;
    if eig.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eig: eig.eigenvalues[0],
        });
    }
    Ok(SymMatrix::from_symmetric_unchecked(
        eig.rebuild_with(f64::ln),
    ))
}

/// Real matrix power `P^t` of a positive definite matrix; `t` may be any
/// real number, so `t = 1/2` is the principal square root and `t = -1/2`
/// its inverse.
pub fn matrix_power(p: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("matrix power exponent must be finite, got {t}")));
    }
    let eig = eig_sym(&p.to_sym())?;
    if eig.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eig: eig.eigenvalues[0],
        });
    }
    let mut min = f64::INFINITY;
    for &l in &eig.eigenvalues {
        let v = l.powf(t);
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Overflow {
                context: format!("matrix_power: {l:.6e}^{t} is not a positive finite number"),
            });
        }
        min = min.min(v);
    }
    let m = eig.rebuild_with(|l| l.powf(t));
    Ok(SpdMatrix::from_symmetric_unchecked(m, Some(min)))
}

/// Frobenius inner product `Tr(AᵀB) = Σ_ij a_ij b_ij`.
pub fn frob_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::dim(
            format!("{0}x{0}", a.dim()),
            format!("{0}x{0}", b.dim()),
        ));
    }
    Ok(frob_inner_raw(&a.m, &b.m))
}

/// Frobenius norm `sqrt(Σ_ij a_ij²)`.
pub fn frob_norm(a: &SymMatrix) -> f64 {
    frob_norm_raw(&a.m)
}
