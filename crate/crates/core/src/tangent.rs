//! Tangent-space coordinates and principal geodesic analysis.
//!
//! Symmetric matrices are flattened to vectors of length `n(n+1)/2`: the
//! diagonal is copied as-is and each strict upper-triangle entry is scaled
//! by `√2` (row-major order over the upper triangle). The scaling makes the
//! Euclidean dot product of two flattened vectors equal the Frobenius inner
//! product of the matrices, so norms and angles survive the flattening.
//!
//! The inverse cannot be bit-exact for arbitrary input: `x ↦ round(x·√2)`
//! maps two adjacent doubles to the same value wherever the target binade
//! is coarser than the source, so information is lost before [`sym_unvec`]
//! ever runs. The inverse therefore divides by `√2` and then snaps to a
//! neighboring double that multiplies back to the stored value exactly
//! when one exists. All preimages of a stored value are within one ulp of
//! each other, so the round-trip error is at most one ulp per entry, and
//! entries whose true off-diagonal is a power of two come back bit-exact.
//!
//! On top of the flattening sits [`embed`] (a whole SPD set into tangent
//! coordinates at a base point, the Karcher mean by default) and PGA:
//! ordinary PCA applied to the tangent vectors, with geodesic
//! reconstruction through the exponential map.

use crate::airm::{exp_map, exp_map_whitened, log_map, log_map_whitened, BasePoint};
use crate::error::{Error, Result};
use crate::mean::{karcher_mean, MeanConfig};
use crate::spd::{SpdMatrix, SymMatrix};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::SQRT_2;

/// Length of the flattened form of an `n × n` symmetric matrix.
pub fn vec_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Matrix side length recovered from a flattened length.
pub fn mat_dim(d: usize) -> Result<usize> {
    let n = (((8.0 * d as f64 + 1.0).sqrt() - 1.0) / 2.0).round() as usize;
    if d > 0 && vec_dim(n) == d {
        Ok(n)
    } else {
        Err(Error::InvalidInput(format!(
            "vector length {d} is not n(n+1)/2 for any n"
        )))
    }
}

pub fn sym_vec(s: &SymMatrix) -> DVector<f64> {
    let n = s.dim();
    let mut v = DVector::zeros(vec_dim(n));
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            v[k] = if i == j { s.get(i, j) } else { s.get(i, j) * SQRT_2 };
            k += 1;
        }
    }
    v
}

/// Divide by √2, then snap to a preimage of `x` when one exists within two
/// ulps. See the module docs for why this is the best an inverse can do.
fn unscale(x: f64) -> f64 {
    let y = x / SQRT_2;
    let up = y.next_up();
    let down = y.next_down();
    for c in [y, up, down, up.next_up(), down.next_down()] {
        if c * SQRT_2 == x {
            return c;
        }
    }
    y
}

pub fn sym_unvec(v: &DVector<f64>) -> Result<SymMatrix> {
    let n = mat_dim(v.len())?;
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let x = v[k];
            if !x.is_finite() {
                return Err(Error::NonFiniteValue {
                    context: format!("flattened entry {k}"),
                });
            }
            if i == j {
                m[(i, j)] = x;
            } else {
                let y = unscale(x);
                m[(i, j)] = y;
                m[(j, i)] = y;
            }
            k += 1;
        }
    }
    Ok(SymMatrix::from_symmetric_unchecked(m))
}

/// Which tangent coordinates a dataset lives in.
///
/// `Ambient` keeps the logarithm in the original coordinates, so the vector
/// norm is not the geodesic distance to the base. `Whitened` conjugates by
/// the inverse square root of the base first, which makes the norm equal
/// the distance exactly. Serialized files and the command line call the
/// ambient form `paper`, its long-standing external name.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TangentVariant {
    #[default]
    Ambient,
    Whitened,
}

impl TangentVariant {
    pub fn name(self) -> &'static str {
        match self {
            TangentVariant::Ambient => "paper",
            TangentVariant::Whitened => "whitened",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper" | "ambient" => Ok(TangentVariant::Ambient),
            "whitened" => Ok(TangentVariant::Whitened),
            other => Err(Error::InvalidInput(format!(
                "unknown tangent variant {other:?}, expected \"paper\" or \"whitened\""
            ))),
        }
    }
}

/// The tangent vector of `p` at `base`, in the chosen coordinates.
pub fn tangent_at(base: &BasePoint, p: &SpdMatrix, variant: TangentVariant) -> Result<SymMatrix> {
    match variant {
        TangentVariant::Ambient => log_map(base, p),
        TangentVariant::Whitened => log_map_whitened(base, p),
    }
}

/// Inverse of [`tangent_at`].
pub fn point_from_tangent(
    base: &BasePoint,
    t: &SymMatrix,
    variant: TangentVariant,
) -> Result<SpdMatrix> {
    match variant {
        TangentVariant::Ambient => exp_map(base, t),
        TangentVariant::Whitened => exp_map_whitened(base, t),
    }
}

/// An SPD set flattened at a common base point. Row `i` of `rows` is the
/// flattened tangent vector of input `i`.
#[derive(Clone, Debug)]
pub struct TangentDataset {
    pub rows: DMatrix<f64>,
    pub base: SpdMatrix,
    pub variant: TangentVariant,
    /// Side length of the original matrices.
    pub n: usize,
}

/// Flatten a set into tangent coordinates. With `base: None` the Karcher
/// mean of the set is computed and used, which centers the dataset.
pub fn embed(
    set: &[SpdMatrix],
    base: Option<&SpdMatrix>,
    variant: TangentVariant,
) -> Result<TangentDataset> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let base = match base {
        Some(b) => b.clone(),
        None => karcher_mean(set, &MeanConfig::default())?.mean,
    };
    let n = base.dim();
    for p in set {
        if p.dim() != n {
            return Err(Error::dim(format!("{n}x{n}"), format!("{0}x{0}", p.dim())));
        }
    }
    let bp = BasePoint::new(base.clone())?;
    let mut rows = DMatrix::zeros(set.len(), vec_dim(n));
    for (r, p) in set.iter().enumerate() {
        let v = sym_vec(&tangent_at(&bp, p, variant)?);
        rows.row_mut(r).copy_from(&v.transpose());
    }
    Ok(TangentDataset {
        rows,
        base,
        variant,
        n,
    })
}

/// Principal geodesic axes fitted to a tangent dataset.
///
/// `axes` is `k × D` with orthonormal rows, ordered by decreasing
/// explained variance; `explained_variance[i]` is the sample variance of
/// the scores along axis `i`. Each axis row has its largest-magnitude
/// entry positive so refits are reproducible.
#[derive(Clone, Debug)]
pub struct PgaModel {
    pub base: SpdMatrix,
    pub variant: TangentVariant,
    pub n: usize,
    pub center: DVector<f64>,
    pub axes: DMatrix<f64>,
    pub explained_variance: Vec<f64>,
}

const SVD_MAX_ITER: usize = 10_000;

pub fn pga_fit(data: &TangentDataset, k: usize) -> Result<PgaModel> {
    let n_samples = data.rows.nrows();
    let d = data.rows.ncols();
    if n_samples < 2 {
        return Err(Error::RankDeficient {
            msg: format!("need at least 2 samples to fit axes, found {n_samples}"),
        });
    }
    let k_max = d.min(n_samples - 1);
    if k == 0 || k > k_max {
        return Err(Error::InvalidInput(format!(
            "component count {k} outside 1..={k_max} for {n_samples} samples of length {d}"
        )));
    }

    let mut center = DVector::zeros(d);
    for c in 0..d {
        let mut acc = 0.0;
        for r in 0..n_samples {
            acc += data.rows[(r, c)];
        }
        center[c] = acc / n_samples as f64;
    }
    let mut centered = data.rows.clone();
    for r in 0..n_samples {
        for c in 0..d {
            centered[(r, c)] -= center[c];
        }
    }

    let svd = nalgebra::SVD::try_new(centered, false, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::ConvergenceFailure { max_iter: SVD_MAX_ITER })?;
    let vt = svd.v_t.expect("v_t requested from SVD");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut axes = DMatrix::zeros(k, d);
    let mut explained_variance = Vec::with_capacity(k);
    for (row, &src) in order.iter().take(k).enumerate() {
        axes.row_mut(row).copy_from(&vt.row(src));
        // Sign convention: largest-magnitude entry positive, scanning from
        // the front so ties resolve to the lowest index.
        let mut lead = 0;
        for c in 1..d {
            if axes[(row, c)].abs() > axes[(row, lead)].abs() {
                lead = c;
            }
        }
        if axes[(row, lead)] < 0.0 {
            for c in 0..d {
                axes[(row, c)] = -axes[(row, c)];
            }
        }
        explained_variance.push(sv[src] * sv[src] / (n_samples - 1) as f64);
    }

    Ok(PgaModel {
        base: data.base.clone(),
        variant: data.variant,
        n: data.n,
        center,
        axes,
        explained_variance,
    })
}

/// Scores of already-flattened rows: `(rows − center) · axesᵀ`.
pub fn pga_project_rows(model: &PgaModel, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = model.center.len();
    if rows.ncols() != d {
        return Err(Error::dim(format!("rows of length {d}"), format!("length {}", rows.ncols())));
    }
    let mut centered = rows.clone();
    for r in 0..rows.nrows() {
        for c in 0..d {
            centered[(r, c)] -= model.center[c];
        }
    }
    Ok(&centered * model.axes.transpose())
}

/// Embed a set at the model's base and project onto its axes.
pub fn pga_project(model: &PgaModel, set: &[SpdMatrix]) -> Result<DMatrix<f64>> {
    let ds = embed(set, Some(&model.base), model.variant)?;
    pga_project_rows(model, &ds.rows)
}

/// Map score rows back to SPD matrices through the exponential map.
pub fn pga_reconstruct(model: &PgaModel, scores: &DMatrix<f64>) -> Result<Vec<SpdMatrix>> {
    let k = model.axes.nrows();
    if scores.ncols() != k {
        return Err(Error::dim(format!("{k} score columns"), format!("{}", scores.ncols())));
    }
    let bp = BasePoint::new(model.base.clone())?;
    let flat = scores * &model.axes;
    let mut out = Vec::with_capacity(scores.nrows());
    for r in 0..scores.nrows() {
        let mut v = model.center.clone();
        for c in 0..v.len() {
            v[c] += flat[(r, c)];
        }
        let t = sym_unvec(&v)?;
        out.push(point_from_tangent(&bp, &t, model.variant)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airm::airm_distance_from;
    use crate::rng::SplitMix64;
    use crate::spd::{frob_inner, frob_norm, matrix_log, DEFAULT_SYM_TOL};
    use crate::synthetic::{random_spd, random_sym_with_eigs};
    use crate::test_util::{assert_close, assert_rel, rel_err};

    fn sym2(a: f64, b: f64, d: f64) -> SymMatrix {
        SymMatrix::from_raw(DMatrix::from_row_slice(2, 2, &[a, b, b, d]), DEFAULT_SYM_TOL).unwrap()
    }

    #[test]
    fn dims_round_trip() {
        assert_eq!(vec_dim(52), 1378);
        assert_eq!(mat_dim(1378).unwrap(), 52);
        assert_eq!(mat_dim(1).unwrap(), 1);
        assert_eq!(mat_dim(3).unwrap(), 2);
        assert_eq!(mat_dim(4).unwrap_err().kind(), "InvalidInput");
        assert_eq!(mat_dim(0).unwrap_err().kind(), "InvalidInput");
    }

    #[test]
    fn known_flattening() {
        let v = sym_vec(&sym2(1.0, 2.0, 3.0));
        assert_eq!(v.len(), 3);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 2.0 * SQRT_2, "off-diagonal must be scaled by sqrt(2)");
        assert_eq!(v[2], 3.0);
    }

    #[test]
    fn dyadic_entries_round_trip_bitwise() {
        let s = sym2(1.0, 2.0, 3.0);
        let back = sym_unvec(&sym_vec(&s)).unwrap();
        assert_eq!(back.matrix(), s.matrix(), "power-of-two off-diagonal must come back exact");

        let m = DMatrix::from_row_slice(
            3,
            3,
            &[0.5, -8.0, 0.25, -8.0, 1.0, 4.0, 0.25, 4.0, 2.0],
        );
        let s = SymMatrix::from_raw(m, DEFAULT_SYM_TOL).unwrap();
        let back = sym_unvec(&sym_vec(&s)).unwrap();
        assert_eq!(back.matrix(), s.matrix());
    }

    #[test]
    fn round_trip_is_within_one_ulp() {
        let mut rng = SplitMix64::new(2024);
        let mut exact = 0usize;
        let mut total = 0usize;
        for trial in 0..200 {
            let n = 2 + (trial % 5);
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let x = rng.uniform(-10.0, 10.0) * 10f64.powi(rng.bounded(7) as i32 - 3);
                    m[(i, j)] = x;
                    m[(j, i)] = x;
                }
            }
            let s = SymMatrix::from_raw(m, DEFAULT_SYM_TOL).unwrap();
            let back = sym_unvec(&sym_vec(&s)).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let want = s.get(i, j);
                    let got = back.get(i, j);
                    total += 1;
                    if got == want {
                        exact += 1;
                    } else {
                        assert!(
                            got == want.next_up() || got == want.next_down(),
                            "entry ({i},{j}) off by more than one ulp: {want:e} vs {got:e}"
                        );
                    }
                }
            }
        }
        // About one in seven off-diagonal values has two preimages under
        // the forward scaling, and no inverse can tell them apart (see the
        // module docs); diagonals always come back exact. The order of
        // magnitude is what this guards.
        assert!(
            exact as f64 >= 0.8 * total as f64,
            "only {exact}/{total} entries round-tripped exactly"
        );
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let v = DVector::from_vec(vec![1.0, f64::NAN, 2.0]);
        assert_eq!(sym_unvec(&v).unwrap_err().kind(), "NonFiniteValue");
    }

    #[test]
    fn flattening_preserves_inner_products() {
        for seed in 0..20 {
            let n = 2 + (seed as usize % 4);
            let a = random_sym_with_eigs(n, -2.0, 3.0, 300 + seed);
            let b = random_sym_with_eigs(n, -1.0, 2.0, 400 + seed);
            let dot = sym_vec(&a).dot(&sym_vec(&b));
            let frob = frob_inner(&a, &b).unwrap();
            assert!(
                (dot - frob).abs() <= 1e-12 * (1.0 + frob.abs()),
                "dot {dot:e} vs frobenius {frob:e}"
            );
        }
    }

    #[test]
    fn whitened_row_norm_is_geodesic_distance() {
        let base = random_spd(4, 0.5, 2.0, 50);
        let set: Vec<SpdMatrix> = (0..6).map(|i| random_spd(4, 0.2, 5.0, 60 + i)).collect();
        let ds = embed(&set, Some(&base), TangentVariant::Whitened).unwrap();
        let bp = BasePoint::new(base).unwrap();
        for (i, p) in set.iter().enumerate() {
            let d = airm_distance_from(&bp, p).unwrap();
            let norm = ds.rows.row(i).norm();
            assert_rel(norm, d, 1e-10, "whitened tangent norm vs distance");
        }
    }

    #[test]
    fn ambient_row_norm_differs_from_distance_off_identity() {
        let base = random_spd(3, 0.1, 4.0, 70);
        let p = random_spd(3, 0.3, 3.0, 71);
        let ds = embed(std::slice::from_ref(&p), Some(&base), TangentVariant::Ambient).unwrap();
        let d = airm_distance_from(&BasePoint::new(base).unwrap(), &p).unwrap();
        let norm = ds.rows.row(0).norm();
        assert!(
            (norm - d).abs() > 1e-3 * d,
            "ambient norm should not match distance at a generic base ({norm} vs {d})"
        );
    }

    #[test]
    fn default_base_centers_the_dataset() {
        let set: Vec<SpdMatrix> = (0..8).map(|i| random_spd(3, 0.2, 4.0, 80 + i)).collect();
        let ds = embed(&set, None, TangentVariant::Whitened).unwrap();
        // At the Karcher mean the whitened tangent vectors sum to zero.
        for c in 0..ds.rows.ncols() {
            let mean: f64 = (0..ds.rows.nrows()).map(|r| ds.rows[(r, c)]).sum::<f64>()
                / ds.rows.nrows() as f64;
            assert!(
                mean.abs() <= 1e-9,
                "column {c} of the embedded set has mean {mean:e}"
            );
        }
    }

    #[test]
    fn embed_rejects_mixed_dims_and_empty_sets() {
        assert_eq!(
            embed(&[], None, TangentVariant::Ambient).unwrap_err().kind(),
            "EmptySet"
        );
        let set = vec![random_spd(3, 0.5, 2.0, 1), random_spd(4, 0.5, 2.0, 2)];
        assert_eq!(
            embed(&set, None, TangentVariant::Ambient).unwrap_err().kind(),
            "DimensionMismatch"
        );
    }

    /// Points generated inside a known 2-plane of the tangent space.
    fn planar_set(base: &SpdMatrix) -> (Vec<SpdMatrix>, SymMatrix, SymMatrix) {
        let n = base.dim();
        let mut u1 = DMatrix::zeros(n, n);
        u1[(0, 0)] = 1.0;
        let mut u2 = DMatrix::zeros(n, n);
        u2[(0, 1)] = 1.0 / SQRT_2;
        u2[(1, 0)] = 1.0 / SQRT_2;
        let u1 = SymMatrix::from_raw(u1, DEFAULT_SYM_TOL).unwrap();
        let u2 = SymMatrix::from_raw(u2, DEFAULT_SYM_TOL).unwrap();
        let bp = BasePoint::new(base.clone()).unwrap();
        let mut set = Vec::new();
        for i in 0..10 {
            let theta = i as f64 * std::f64::consts::PI / 5.0;
            let r = if i % 2 == 0 { 0.35 } else { 0.6 };
            let t = u1.scale(r * theta.cos()).axpy(1.0, &u2, r * theta.sin()).unwrap();
            set.push(exp_map_whitened(&bp, &t).unwrap());
        }
        (set, u1, u2)
    }

    #[test]
    fn pga_recovers_a_planar_family() {
        let base = random_spd(4, 0.5, 2.0, 90);
        let (set, u1, u2) = planar_set(&base);
        let ds = embed(&set, Some(&base), TangentVariant::Whitened).unwrap();
        let model = pga_fit(&ds, 3).unwrap();
        assert!(
            model.explained_variance[2] <= 1e-18,
            "third axis should carry nothing, got {:e}",
            model.explained_variance[2]
        );
        assert!(model.explained_variance[0] >= model.explained_variance[1]);
        assert!(model.explained_variance[1] > 1e-4);

        // The two leading axes span {u1, u2}: removing the projection onto
        // that plane leaves nothing.
        for row in 0..2 {
            let axis = sym_unvec(&DVector::from_iterator(
                model.axes.ncols(),
                model.axes.row(row).iter().copied(),
            ))
            .unwrap();
            let c1 = frob_inner(&axis, &u1).unwrap();
            let c2 = frob_inner(&axis, &u2).unwrap();
            let resid = axis.axpy(1.0, &u1, -c1).unwrap().axpy(1.0, &u2, -c2).unwrap();
            assert!(
                frob_norm(&resid) <= 1e-7,
                "axis {row} sticks out of the generating plane by {:e}",
                frob_norm(&resid)
            );
        }

        // Two scores reconstruct the inputs through the exponential map.
        let model2 = pga_fit(&ds, 2).unwrap();
        let scores = pga_project(&model2, &set).unwrap();
        let back = pga_reconstruct(&model2, &scores).unwrap();
        for (orig, rec) in set.iter().zip(&back) {
            assert!(
                rel_err(rec.matrix(), orig.matrix()) <= 1e-8,
                "planar reconstruction off by {:e}",
                rel_err(rec.matrix(), orig.matrix())
            );
        }
    }

    #[test]
    fn axes_are_orthonormal_and_sign_fixed() {
        let set: Vec<SpdMatrix> = (0..12).map(|i| random_spd(3, 0.2, 4.0, 500 + i)).collect();
        let ds = embed(&set, None, TangentVariant::Whitened).unwrap();
        let model = pga_fit(&ds, 5).unwrap();
        let gram = &model.axes * model.axes.transpose();
        assert!(
            rel_err(&gram, &DMatrix::identity(5, 5)) <= 1e-10,
            "axes are not orthonormal"
        );
        for row in 0..5 {
            let mut lead = 0;
            for c in 1..model.axes.ncols() {
                if model.axes[(row, c)].abs() > model.axes[(row, lead)].abs() {
                    lead = c;
                }
            }
            assert!(
                model.axes[(row, lead)] > 0.0,
                "axis {row} violates the sign convention"
            );
        }
    }

    #[test]
    fn refit_is_bitwise_reproducible() {
        let set: Vec<SpdMatrix> = (0..9).map(|i| random_spd(4, 0.3, 3.0, 700 + i)).collect();
        let ds = embed(&set, None, TangentVariant::Ambient).unwrap();
        let a = pga_fit(&ds, 4).unwrap();
        let b = pga_fit(&ds, 4).unwrap();
        assert_eq!(a.axes, b.axes);
        assert_eq!(a.center, b.center);
        assert_eq!(a.explained_variance, b.explained_variance);
    }

    #[test]
    fn score_variances_match_explained_variance() {
        let set: Vec<SpdMatrix> = (0..10).map(|i| random_spd(3, 0.2, 5.0, 800 + i)).collect();
        let ds = embed(&set, None, TangentVariant::Whitened).unwrap();
        let k = 6.min(set.len() - 1);
        let model = pga_fit(&ds, k).unwrap();
        let scores = pga_project_rows(&model, &ds.rows).unwrap();
        let n_samples = scores.nrows();
        for j in 0..k {
            let mean: f64 =
                (0..n_samples).map(|r| scores[(r, j)]).sum::<f64>() / n_samples as f64;
            assert!(mean.abs() <= 1e-9, "score column {j} has mean {mean:e}");
            let var: f64 = (0..n_samples).map(|r| scores[(r, j)] * scores[(r, j)]).sum::<f64>()
                / (n_samples - 1) as f64;
            let want = model.explained_variance[j];
            assert!(
                (var - want).abs() <= 1e-9 * (1.0 + want),
                "score variance {var:e} vs explained {want:e}"
            );
        }
        // Total variance is conserved by a full-rank fit.
        let total_scores: f64 = model.explained_variance.iter().sum();
        let mut total_data = 0.0;
        for c in 0..ds.rows.ncols() {
            let mean: f64 =
                (0..n_samples).map(|r| ds.rows[(r, c)]).sum::<f64>() / n_samples as f64;
            total_data += (0..n_samples)
                .map(|r| (ds.rows[(r, c)] - mean).powi(2))
                .sum::<f64>()
                / (n_samples - 1) as f64;
        }
        assert_rel(total_scores, total_data, 1e-9, "variance budget of a full-rank fit");
    }

    #[test]
    fn full_rank_reconstruction_reproduces_inputs() {
        let set: Vec<SpdMatrix> = (0..7).map(|i| random_spd(3, 0.3, 3.0, 900 + i)).collect();
        for variant in [TangentVariant::Ambient, TangentVariant::Whitened] {
            let ds = embed(&set, None, variant).unwrap();
            let model = pga_fit(&ds, 6).unwrap();
            let scores = pga_project(&model, &set).unwrap();
            let back = pga_reconstruct(&model, &scores).unwrap();
            for (orig, rec) in set.iter().zip(&back) {
                assert!(
                    rel_err(rec.matrix(), orig.matrix()) <= 1e-7,
                    "{variant:?} full-rank reconstruction off by {:e}",
                    rel_err(rec.matrix(), orig.matrix())
                );
            }
        }
    }

    #[test]
    fn component_count_is_validated() {
        let set: Vec<SpdMatrix> = (0..4).map(|i| random_spd(3, 0.5, 2.0, 40 + i)).collect();
        let ds = embed(&set, None, TangentVariant::Whitened).unwrap();
        assert_eq!(pga_fit(&ds, 0).unwrap_err().kind(), "InvalidInput");
        // min(N-1, D) = min(3, 6) = 3
        assert!(pga_fit(&ds, 3).is_ok());
        assert_eq!(pga_fit(&ds, 4).unwrap_err().kind(), "InvalidInput");

        let single = embed(&set[..1], Some(&set[0]), TangentVariant::Whitened).unwrap();
        assert_eq!(pga_fit(&single, 1).unwrap_err().kind(), "RankDeficient");
    }

    #[test]
    fn projection_checks_dimensions() {
        let set: Vec<SpdMatrix> = (0..5).map(|i| random_spd(3, 0.5, 2.0, 20 + i)).collect();
        let ds = embed(&set, None, TangentVariant::Whitened).unwrap();
        let model = pga_fit(&ds, 2).unwrap();
        let bad = DMatrix::zeros(2, 5);
        assert_eq!(pga_project_rows(&model, &bad).unwrap_err().kind(), "DimensionMismatch");
        let bad_scores = DMatrix::zeros(2, 3);
        assert_eq!(pga_reconstruct(&model, &bad_scores).unwrap_err().kind(), "DimensionMismatch");
    }

    #[test]
    fn variant_names_round_trip() {
        assert_eq!(TangentVariant::parse("paper").unwrap(), TangentVariant::Ambient);
        assert_eq!(TangentVariant::parse("ambient").unwrap(), TangentVariant::Ambient);
        assert_eq!(TangentVariant::parse("whitened").unwrap(), TangentVariant::Whitened);
        assert_eq!(TangentVariant::parse("euclid").unwrap_err().kind(), "InvalidInput");
        assert_eq!(TangentVariant::Ambient.name(), "paper");
        assert_eq!(TangentVariant::parse(TangentVariant::Whitened.name()).unwrap(), TangentVariant::Whitened);
    }

    #[test]
    fn tangent_round_trip_through_both_variants() {
        let base = random_spd(4, 0.5, 2.0, 33);
        let bp = BasePoint::new(base).unwrap();
        let p = random_spd(4, 0.2, 4.0, 34);
        for variant in [TangentVariant::Ambient, TangentVariant::Whitened] {
            let t = tangent_at(&bp, &p, variant).unwrap();
            let back = point_from_tangent(&bp, &t, variant).unwrap();
            assert!(
                rel_err(back.matrix(), p.matrix()) <= 1e-8,
                "{variant:?} tangent round trip off by {:e}",
                rel_err(back.matrix(), p.matrix())
            );
        }
    }

    #[test]
    fn ambient_tangent_matches_matrix_log_at_identity() {
        let bp = BasePoint::new(SpdMatrix::identity(3)).unwrap();
        let p = random_spd(3, 0.5, 2.0, 35);
        let t = tangent_at(&bp, &p, TangentVariant::Ambient).unwrap();
        let w = tangent_at(&bp, &p, TangentVariant::Whitened).unwrap();
        let l = matrix_log(&p).unwrap();
        assert!(rel_err(t.matrix(), l.matrix()) <= 1e-12);
        assert!(rel_err(w.matrix(), l.matrix()) <= 1e-12, "variants coincide at the identity");
        assert_close(
            sym_vec(&t).norm(),
            frob_norm(&t),
            1e-12,
            "flattened norm vs frobenius norm",
        );
    }
}
