use super::{Mat, OrthogonalMatrix};
use crate::error::{IcaError, Result};

const MAX_NEWTON_ITERS: usize = 100;

/// Orthogonal polar factor `(C Cᵀ)^{-1/2} C` of an invertible matrix.
///
/// Computed with Higham's scaled Newton iteration
/// `X ← (γX + γ⁻¹X⁻ᵀ)/2`, which converges quadratically once the iterate is
/// close to orthogonal and leaves it orthogonal to working precision.
pub fn polar_factor(c: &Mat) -> Result<OrthogonalMatrix> {
    if !c.is_square() {
        return Err(IcaError::Dimension(format!(
            "polar factor of a non-square {}x{} matrix",
            c.nrows(),
            c.ncols()
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(IcaError::NumericOverflow("polar_factor input"));
    }
    let n = c.nrows();
    let inv = c
        .clone()
        .try_inverse()
        .ok_or_else(|| IcaError::Degenerate("matrix is singular".into()))?;
    // ‖C‖_F ‖C⁻¹‖_F bounds the 2-norm condition number within a factor N
    let cond = c.norm() * inv.norm();
    if !cond.is_finite() || cond > 1e12 * n as f64 {
        return Err(IcaError::Degenerate(format!(
            "matrix is numerically singular (condition estimate {cond:e})"
        )));
    }

    let mut x = c.clone();
    let mut x_inv = inv;
    let mut scaling = true;
    for _ in 0..MAX_NEWTON_ITERS {
        let gamma = if scaling {
            (x_inv.norm() / x.norm()).sqrt()
        } else {
            1.0
        };
        let next = (&x * gamma + x_inv.transpose() / gamma) * 0.5;
        let delta = (&next - &x).norm() / next.norm();
        x = next;
        if delta < 1e-2 {
            scaling = false;
        }
        if delta < 1e-15 * (n as f64).sqrt() * 10.0 {
            break;
        }
        x_inv = x
            .clone()
            .try_inverse()
            .ok_or_else(|| IcaError::Degenerate("Newton polar iterate became singular".into()))?;
    }
    // Newton-Schulz polish: X ← X(3I − XᵀX)/2
    let id = Mat::identity(n, n);
    let xtx = x.transpose() * &x;
    x = &x * (id * 3.0 - xtx) * 0.5;
    Ok(OrthogonalMatrix::from_matrix_unchecked(x))
}

/// Snaps a nearly orthogonal matrix back onto the orthogonal group.
pub fn reproject_orthogonal(q: &Mat) -> Result<OrthogonalMatrix> {
    if !q.is_square() {
        return Err(IcaError::Dimension(
            "reprojecting a non-square matrix".into(),
        ));
    }
    let n = q.nrows();
    let drift = (q * q.transpose() - Mat::identity(n, n)).norm();
    if !(drift < 0.5) {
        return Err(IcaError::Degenerate(format!(
            "matrix is too far from orthogonal to reproject (‖QQᵀ − I‖ = {drift:e})"
        )));
    }
    polar_factor(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn spd_polar_factor_is_identity() {
        let c = Mat::from_diagonal(&DVector::from_vec(vec![2.0, 5.0]));
        let q = polar_factor(&c).unwrap();
        assert!((q.as_matrix() - Mat::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_input_is_fixed() {
        let (s, c) = 0.3f64.sin_cos();
        let r = Mat::from_row_slice(2, 2, &[c, -s, s, c]);
        let q = polar_factor(&r).unwrap();
        assert!((q.as_matrix() - &r).norm() < 1e-15);
    }

    #[test]
    fn singular_is_degenerate() {
        let c = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(polar_factor(&c), Err(IcaError::Degenerate(_))));
        let nearly = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-15]);
        assert!(matches!(
            polar_factor(&nearly),
            Err(IcaError::Degenerate(_))
        ));
    }

    #[test]
    fn reproject_rejects_far_matrices() {
        let q = Mat::identity(3, 3) * 2.0;
        assert!(reproject_orthogonal(&q).is_err());
    }

    #[test]
    fn reproject_symmetric_perturbation_of_identity() {
        let s = Mat::from_row_slice(3, 3, &[1.0, 0.5, -0.2, 0.5, -1.0, 0.3, -0.2, 0.3, 0.7]);
        let q = Mat::identity(3, 3) + s * 1e-6;
        let r = reproject_orthogonal(&q).unwrap();
        assert!((r.as_matrix() - Mat::identity(3, 3)).norm() < 2e-6);
        assert!(r.orthogonality_error() <= 1e-12);
    }
}
