//! The affine-invariant metric on the SPD cone: distances, geodesics, and
//! the exponential/logarithm maps at a base point.
//!
//! For a base `A` and tangent `T` (symmetric), the maps are
//!
//! ```text
//! exp_A(T) = A^1/2 exp(A^-1/2 T A^-1/2) A^1/2
//! log_A(B) = A^1/2 log(A^-1/2 B A^-1/2) A^1/2
//! d(A, B)  = ‖log(A^-1/2 B A^-1/2)‖_F
//! ```
//!
//! Every formula is evaluated through the symmetric congruence
//! `A^-1/2 B A^-1/2`, never through the similar-but-nonsymmetric product
//! `A^-1 B`: the congruence keeps the eigenproblem symmetric, which is both
//! numerically stable and what makes the deterministic eigensolver contract
//! apply.
//!
//! Distances are invariant under congruence (`d(XᵀAX, XᵀBX) = d(A,B)` for
//! invertible `X`) and under inversion; geodesics have constant speed
//! `d(A, B)`.
//!
//! Note that `‖log_A(B)‖_F` generally differs from `d(A, B)`: the ambient
//! Frobenius norm of the tangent vector is not the metric norm at `A`.
//! The whitened form `log(A^-1/2 B A^-1/2)` (see [`log_map_whitened`]) is
//! the same vector expressed in a chart where the metric at the base IS the
//! Frobenius inner product, so its norm does equal the distance. Callers
//! that need norm-faithful coordinates (embeddings, mean iterations) use
//! the whitened variants.

use crate::error::{Error, Result};
use crate::spd::{eig_sym, symmetrize_exact, SpdMatrix, SymMatrix};

/// A base point with cached square root and inverse square root, all three
/// derived from one eigendecomposition.
#[derive(Clone, Debug)]
pub struct BasePoint {
    point: SpdMatrix,
    sqrt: SpdMatrix,
    inv_sqrt: SpdMatrix,
}

impl BasePoint {
    pub fn new(point: SpdMatrix) -> Result<Self> {
        let eig = eig_sym(&point.to_sym())?;
        let min = eig.eigenvalues[0];
        if min <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eig: min });
        }
        let max = eig.eigenvalues[eig.eigenvalues.len() - 1];
        let sqrt = SpdMatrix::from_symmetric_unchecked(
            eig.rebuild_with(f64::sqrt),
            Some(min.sqrt()),
        );
        let inv_sqrt = SpdMatrix::from_symmetric_unchecked(
            eig.rebuild_with(|l| 1.0 / l.sqrt()),
            Some(1.0 / max.sqrt()),
        );
        Ok(BasePoint {
            point,
            sqrt,
            inv_sqrt,
        })
    }

    pub fn dim(&self) -> usize {
        self.point.dim()
    }

    pub fn point(&self) -> &SpdMatrix {
        &self.point
    }

    pub fn sqrt(&self) -> &SpdMatrix {
        &self.sqrt
    }

    pub fn inv_sqrt(&self) -> &SpdMatrix {
        &self.inv_sqrt
    }

    /// Whitening congruence `A^-1/2 M A^-1/2`, exactly symmetrized.
    fn whiten_spd(&self, p: &SpdMatrix) -> Result<SymMatrix> {
        self.check_dim(p.dim())?;
        let mut w = self.inv_sqrt.matrix() * p.matrix() * self.inv_sqrt.matrix();
        symmetrize_exact(&mut w);
        Ok(SymMatrix::from_symmetric_unchecked(w))
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim() != other {
            return Err(Error::dim(
                format!("{0}x{0}", self.dim()),
                format!("{0}x{0}", other),
            ));
        }
        Ok(())
    }
}

/// Log-eigenvalues of the whitened matrix `base^-1/2 P base^-1/2`; the
/// distance is the Euclidean norm of this vector.
fn whitened_log_eigs(base: &BasePoint, p: &SpdMatrix) -> Result<Vec<f64>> {
    let w = base.whiten_spd(p)?;
    let eig = eig_sym(&w)?;
    if eig.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eig: eig.eigenvalues[0],
        });
    }
    Ok(eig.eigenvalues.iter().map(|l| l.ln()).collect())
}

/// Affine-invariant distance `‖log(A^-1/2 B A^-1/2)‖_F`.
pub fn airm_distance(a: &SpdMatrix, b: &SpdMatrix) -> Result<f64> {
    airm_distance_from(&BasePoint::new(a.clone())?, b)
}

/// Distance from an already-prepared base point; avoids refactoring the
/// base when many distances share it.
pub fn airm_distance_from(base: &BasePoint, b: &SpdMatrix) -> Result<f64> {
    let logs = whitened_log_eigs(base, b)?;
    let mut acc = 0.0;
    for l in logs {
        acc += l * l;
    }
    Ok(acc.sqrt())
}

/// Point at parameter `t` on the geodesic from `a` (t = 0) to `b` (t = 1):
/// `A^1/2 (A^-1/2 B A^-1/2)^t A^1/2`. `t` outside `[0, 1]` extrapolates;
/// the result stays inside the cone for every real `t`.
pub fn geodesic(a: &SpdMatrix, b: &SpdMatrix, t: f64) -> Result<SpdMatrix> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!(
            "geodesic parameter must be finite, got {t}"
        )));
    }
    let base = BasePoint::new(a.clone())?;
    let w = base.whiten_spd(b)?;
    let eig = eig_sym(&w)?;
    if eig.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eig: eig.eigenvalues[0],
        });
    }
    for &l in &eig.eigenvalues {
        if !l.powf(t).is_finite() {
            return Err(Error::Overflow {
                context: format!("geodesic: {l:.6e}^{t} overflows"),
            });
        }
    }
    let wt = eig.rebuild_with(|l| l.powf(t));
    let mut m = base.sqrt().matrix() * wt * base.sqrt().matrix();
    symmetrize_exact(&mut m);
    for v in m.iter() {
        if !v.is_finite() {
            return Err(Error::Overflow {
                context: format!("geodesic at t = {t}"),
            });
        }
    }
    Ok(SpdMatrix::from_symmetric_unchecked(m, None))
}

/// Exponential map `exp_A(T) = A^1/2 exp(A^-1/2 T A^-1/2) A^1/2`.
pub fn exp_map(base: &BasePoint, tangent: &SymMatrix) -> Result<SpdMatrix> {
    base.check_dim(tangent.dim())?;
    let mut w = base.inv_sqrt().matrix() * tangent.matrix() * base.inv_sqrt().matrix();
    symmetrize_exact(&mut w);
    exp_map_whitened(base, &SymMatrix::from_symmetric_unchecked(w))
}

/// Logarithm map `log_A(B) = A^1/2 log(A^-1/2 B A^-1/2) A^1/2`, the tangent
/// vector at `A` pointing to `B` in ambient coordinates.
pub fn log_map(base: &BasePoint, p: &SpdMatrix) -> Result<SymMatrix> {
    let w = log_map_whitened(base, p)?;
    let mut m = base.sqrt().matrix() * w.matrix() * base.sqrt().matrix();
    symmetrize_exact(&mut m);
    Ok(SymMatrix::from_symmetric_unchecked(m))
}

/// Whitened logarithm `log(A^-1/2 B A^-1/2)`: the tangent vector in the
/// chart where the metric at the base is Frobenius, so
/// `‖log_map_whitened(A, B)‖_F = d(A, B)`.
pub fn log_map_whitened(base: &BasePoint, p: &SpdMatrix) -> Result<SymMatrix> {
    let w = base.whiten_spd(p)?;
    let eig = eig_sym(&w)?;
    if eig.eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eig: eig.eigenvalues[0],
        });
    }
    Ok(SymMatrix::from_symmetric_unchecked(
        eig.rebuild_with(f64::ln),
    ))
}

/// Inverse of [`log_map_whitened`]: `A^1/2 exp(W) A^1/2`.
pub fn exp_map_whitened(base: &BasePoint, w: &SymMatrix) -> Result<SpdMatrix> {
    base.check_dim(w.dim())?;
    let inner = crate::spd::matrix_exp(w)?;
    let mut m = base.sqrt().matrix() * inner.matrix() * base.sqrt().matrix();
    symmetrize_exact(&mut m);
    for v in m.iter() {
        if !v.is_finite() {
            return Err(Error::Overflow {
                context: "exp_map".into(),
            });
        }
    }
    Ok(SpdMatrix::from_symmetric_unchecked(m, None))
}
