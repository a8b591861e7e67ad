use super::{Mat, OrthogonalMatrix, SkewSymmetricMatrix};
use crate::error::{IcaError, Result};

// Degree-13 diagonal Padé coefficients and the 1-norm bound up to which the
// approximant is accurate to double precision.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential of a skew-symmetric matrix by scaling and squaring
/// with a degree-13 Padé approximant.
///
/// For skew `A` the diagonal approximant `p(A)/p(−A)` is itself orthogonal,
/// so the result is orthogonal up to rounding regardless of the scaling.
pub fn expm_skew(e: &SkewSymmetricMatrix) -> Result<OrthogonalMatrix> {
    if !e.is_finite() {
        return Err(IcaError::NumericOverflow("expm_skew input"));
    }
    let n = e.dim();
    let a = e.as_matrix();
    let norm1 = a
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if norm1 == 0.0 {
        return Ok(OrthogonalMatrix::identity(n));
    }
    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-squarings);

    let id = Mat::identity(n, n);
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];

    let num = &v + &u;
    let den = &v - &u;
    let mut r = den
        .lu()
        .solve(&num)
        .ok_or_else(|| IcaError::Degenerate("Padé denominator is singular".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(IcaError::NumericOverflow("expm_skew"));
    }
    Ok(OrthogonalMatrix::from_matrix_unchecked(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    /// Truncated Taylor series, the independent reference.
    fn series(a: &Mat, terms: usize) -> Mat {
        let n = a.nrows();
        let mut sum = Mat::identity(n, n);
        let mut term = Mat::identity(n, n);
        for k in 1..terms {
            term = &term * a / k as f64;
            sum += &term;
        }
        sum
    }

    #[test]
    fn zero_is_identity() {
        let q = expm_skew(&SkewSymmetricMatrix::zeros(4)).unwrap();
        assert_eq!(q.as_matrix(), &Mat::identity(4, 4));
    }

    #[test]
    fn quarter_turn() {
        let e = SkewSymmetricMatrix::from_upper_fn(2, |_, _| FRAC_PI_2);
        let q = expm_skew(&e).unwrap();
        let expected = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((q.as_matrix() - &expected).norm() < 1e-12);
        assert!((q.as_matrix() - series(e.as_matrix(), 30)).norm() < 1e-12);
    }

    #[test]
    fn large_argument_stays_orthogonal() {
        let e = SkewSymmetricMatrix::from_upper_fn(6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let q = expm_skew(&e.scaled(10.0 / e.norm())).unwrap();
        assert!(q.orthogonality_error() < 1e-12);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let e = SkewSymmetricMatrix::from_upper_fn(3, |_, _| f64::INFINITY);
        assert!(expm_skew(&e).is_err());
    }
}
