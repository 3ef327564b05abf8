//! Shared assertion helpers for the test suites.

use nalgebra::DMatrix;

use crate::spd::frob_norm_raw;

/// Relative Frobenius distance `‖got − want‖ / max(1, ‖want‖)`.
pub fn rel_err(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    frob_norm_raw(&(got - want)) / frob_norm_raw(want).max(1.0)
}

/// Asserts `|got − want| ≤ tol · max(1, |want|)`.
pub fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    let bound = tol * want.abs().max(1.0);
    assert!(
        (got - want).abs() <= bound,
        "{what}: got {got:.17e}, want {want:.17e} (allowed {bound:.3e})"
    );
}

/// Asserts `|got − want| ≤ tol · |want|` — strict relative comparison for
/// targets far from 1.
pub fn assert_rel(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        want != 0.0,
        "{what}: relative comparison against zero target"
    );
    let bound = tol * want.abs();
    assert!(
        (got - want).abs() <= bound,
        "{what}: got {got:.17e}, want {want:.17e} (allowed {bound:.3e})"
    );
}
