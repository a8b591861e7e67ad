//! Dense linear algebra for ICA under a whiteness constraint.
//!
//! Signals are stored as `N × T` matrices (one row per channel). Everything
//! on the rotation side is `N × N` and small, so plain dense storage is used
//! throughout.

mod expm;
mod polar;

pub use expm::expm_skew;
pub use polar::{polar_factor, reproject_orthogonal};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{IcaError, Result};

pub type Mat = DMatrix<f64>;

/// Default relative eigenvalue floor used when whitening.
pub const DEFAULT_EIG_FLOOR: f64 = 1e-10;

/// Multichannel samples, one channel per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalMatrix(Mat);

impl SignalMatrix {
    /// Wraps `data`, checking that all entries are finite, that there is at
    /// least one channel and that there are at least as many samples as
    /// channels.
    pub fn new(data: Mat) -> Result<Self> {
        let (n, t) = data.shape();
        if n == 0 {
            return Err(IcaError::Dimension("signal has no channels".into()));
        }
        if t < n {
            return Err(IcaError::Dimension(format!(
                "need at least as many samples as channels, got {n} channels and {t} samples"
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(IcaError::Precondition(format!(
                "non-finite entry at channel {}, sample {}",
                pos % n,
                pos / n
            )));
        }
        Ok(SignalMatrix(data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return Err(IcaError::Dimension("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(n, t, |i, j| rows[i][j]))
    }

    /// For products of already validated signals with finite matrices.
    pub(crate) fn from_matrix_unchecked(data: Mat) -> Self {
        debug_assert!(data.iter().all(|v| v.is_finite()));
        SignalMatrix(data)
    }

    pub fn n_channels(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_inner(self) -> Mat {
        self.0
    }

    /// Left-multiplies by an `N × N` matrix.
    pub fn transform(&self, m: &Mat) -> Result<SignalMatrix> {
        if m.ncols() != self.n_channels() {
            return Err(IcaError::Dimension(format!(
                "cannot apply a {}x{} matrix to {} channels",
                m.nrows(),
                m.ncols(),
                self.n_channels()
            )));
        }
        SignalMatrix::new(m * &self.0)
    }

    /// `(1/T) Y Yᵀ`.
    pub fn covariance(&self) -> Mat {
        let t = self.n_samples() as f64;
        (&self.0 * self.0.transpose()) / t
    }

    /// `‖(1/T) Y Yᵀ − I‖_F`.
    pub fn whiteness_error(&self) -> f64 {
        let n = self.n_channels();
        (self.covariance() - Mat::identity(n, n)).norm()
    }

    pub fn row_means(&self) -> DVector<f64> {
        self.0.column_mean()
    }
}

/// `N × N` matrix with `Aᵀ = −A` held exactly.
///
/// Every mutating operation writes the strict upper triangle and mirrors it
/// with a negation, so `A + Aᵀ` is exactly zero at all times.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewSymmetricMatrix(Mat);

impl SkewSymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        SkewSymmetricMatrix(Mat::zeros(n, n))
    }

    /// `(M − Mᵀ)/2`.
    pub fn skew_part(m: &Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(IcaError::Dimension(format!(
                "skew part of a non-square {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::from_upper_fn(m.nrows(), |i, j| {
            (m[(i, j)] - m[(j, i)]) / 2.0
        }))
    }

    /// Builds the matrix from its strict upper triangle.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        SkewSymmetricMatrix(m)
    }

    /// Inverse of [`upper_coords`](Self::upper_coords).
    pub fn from_upper_coords(n: usize, coords: &[f64]) -> Result<Self> {
        if coords.len() != n * n.saturating_sub(1) / 2 {
            return Err(IcaError::Dimension(format!(
                "{} coordinates do not describe a {n}x{n} skew matrix",
                coords.len()
            )));
        }
        let mut it = coords.iter();
        Ok(Self::from_upper_fn(n, |_, _| *it.next().unwrap()))
    }

    /// Strict upper triangle, row by row: `(0,1), (0,2), …, (1,2), …`.
    pub fn upper_coords(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_inner(self) -> Mat {
        self.0
    }

    /// Frobenius inner product with another skew matrix.
    pub fn inner(&self, other: &SkewSymmetricMatrix) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.dot(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let n = self.dim();
        Self::from_upper_fn(n, |i, j| alpha * self.0[(i, j)])
    }

    /// `self ← self + alpha · other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &SkewSymmetricMatrix) {
        debug_assert_eq!(self.dim(), other.dim());
        let n = self.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.0[(i, j)] + alpha * other.0[(i, j)];
                self.0[(i, j)] = v;
                self.0[(j, i)] = -v;
            }
        }
    }

    /// Applies `f(i, j, value)` to every upper-triangle entry.
    pub fn map_upper(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        Self::from_upper_fn(self.dim(), |i, j| f(i, j, self.0[(i, j)]))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// `N × N` orthogonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalMatrix(Mat);

impl OrthogonalMatrix {
    pub fn identity(n: usize) -> Self {
        OrthogonalMatrix(Mat::identity(n, n))
    }

    /// Caller guarantees orthogonality (products of orthogonal factors,
    /// outputs of the constructions in this module).
    pub(crate) fn from_matrix_unchecked(m: Mat) -> Self {
        OrthogonalMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_inner(self) -> Mat {
        self.0
    }

    /// `‖Q Qᵀ − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.dim();
        (&self.0 * self.0.transpose() - Mat::identity(n, n)).norm()
    }

    /// `self · other`, itself orthogonal up to rounding.
    pub fn compose(&self, other: &OrthogonalMatrix) -> OrthogonalMatrix {
        OrthogonalMatrix(&self.0 * &other.0)
    }
}

/// `Σ_ij a_ij b_ij`.
pub fn frobenius_inner(a: &Mat, b: &Mat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(IcaError::Dimension(format!(
            "inner product of {:?} and {:?} matrices",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
}

/// Inverse square root of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct InvSqrt {
    pub matrix: Mat,
    /// Number of eigenvalues raised to the floor before inversion.
    pub n_floored: usize,
}

enum Floor {
    Absolute(f64),
    RelativeToMax(f64),
}

/// Returns `M` with `M c M = I`. Eigenvalues below `eig_floor` are raised to
/// it before inversion; non-positive eigenvalues are an error.
pub fn sym_inv_sqrt(c: &Mat, eig_floor: f64) -> Result<InvSqrt> {
    inv_sqrt_impl(c, Floor::Absolute(eig_floor))
}

fn inv_sqrt_impl(c: &Mat, floor: Floor) -> Result<InvSqrt> {
    if !c.is_square() {
        return Err(IcaError::Dimension(format!(
            "inverse square root of a non-square {}x{} matrix",
            c.nrows(),
            c.ncols()
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(IcaError::NumericOverflow("sym_inv_sqrt input"));
    }
    let n = c.nrows();
    let scale = c.amax().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (c[(i, j)] - c[(j, i)]).abs() > 1e-10 * scale {
                return Err(IcaError::Precondition(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lambda_min = eig.eigenvalues.min();
    if lambda_min <= 0.0 {
        return Err(IcaError::RankDeficient {
            eigenvalue: lambda_min,
        });
    }
    let floor = match floor {
        Floor::Absolute(f) => f,
        Floor::RelativeToMax(r) => r * eig.eigenvalues.max(),
    };
    let mut n_floored = 0;
    let scales = eig.eigenvalues.map(|l| {
        if l < floor {
            n_floored += 1;
            1.0 / floor.sqrt()
        } else {
            1.0 / l.sqrt()
        }
    });
    let v = &eig.eigenvectors;
    let m = v * Mat::from_diagonal(&scales) * v.transpose();
    Ok(InvSqrt {
        matrix: (&m + m.transpose()) * 0.5,
        n_floored,
    })
}

/// Result of centering and sphering a signal.
#[derive(Clone, Debug)]
pub struct Whitening {
    /// Sphering matrix `W₀ = ((1/T) X_c X_cᵀ)^{-1/2}`.
    pub w0: Mat,
    /// `W₀ (X − means)`.
    pub y: SignalMatrix,
    pub means: DVector<f64>,
    /// Covariance eigenvalues that were raised to the floor. Non-zero means
    /// the input is close to rank-deficient and `y` is only approximately white.
    pub n_floored: usize,
}

impl Whitening {
    pub fn is_floored(&self) -> bool {
        self.n_floored > 0
    }
}

/// Removes the per-channel mean and spheres the result.
///
/// `rel_floor` is relative to the largest covariance eigenvalue.
pub fn whiten(x: &SignalMatrix, rel_floor: f64) -> Result<Whitening> {
    let means = x.row_means();
    let mut xc = x.as_matrix().clone();
    for mut col in xc.column_iter_mut() {
        col -= &means;
    }
    let t = x.n_samples() as f64;
    let cov = (&xc * xc.transpose()) / t;
    let inv = inv_sqrt_impl(&cov, Floor::RelativeToMax(rel_floor))?;
    if inv.n_floored > 0 {
        log::warn!(
            "whitening floored {} covariance eigenvalue(s); input is near rank-deficient",
            inv.n_floored
        );
    }
    let y = SignalMatrix::new(&inv.matrix * xc)?;
    Ok(Whitening {
        w0: inv.matrix,
        y,
        means,
        n_floored: inv.n_floored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn frobenius_inner_basics() {
        let i2 = Mat::identity(2, 2);
        assert_eq!(frobenius_inner(&i2, &i2).unwrap(), 2.0);
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(frobenius_inner(&a, &Mat::zeros(2, 2)).unwrap(), 0.0);
        assert!(matches!(
            frobenius_inner(&a, &Mat::zeros(3, 2)),
            Err(IcaError::Dimension(_))
        ));
    }

    #[test]
    fn frobenius_inner_skew_symmetric_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = randn(&mut rng, 4, 4);
            let a = SkewSymmetricMatrix::skew_part(&m).unwrap().into_inner();
            let r = randn(&mut rng, 4, 4);
            let b = &r + r.transpose();
            // direct summation oracle
            let mut direct = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    direct += a[(i, j)] * b[(i, j)];
                }
            }
            let got = frobenius_inner(&a, &b).unwrap();
            assert!(direct.abs() <= 1e-14 * a.norm() * b.norm());
            assert!(got.abs() <= 1e-14 * a.norm() * b.norm());
        }
    }

    #[test]
    fn sym_inv_sqrt_diagonal_and_identity() {
        let c = Mat::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let m = sym_inv_sqrt(&c, 1e-12).unwrap();
        assert!((m.matrix[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((m.matrix[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert!(m.matrix[(0, 1)].abs() < 1e-15);
        assert_eq!(m.n_floored, 0);
        let id = sym_inv_sqrt(&Mat::identity(5, 5), 1e-12).unwrap();
        assert!((id.matrix - Mat::identity(5, 5)).norm() < 1e-14);
    }

    #[test]
    fn sym_inv_sqrt_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = randn(&mut rng, 5, 5);
        let c = &a * a.transpose() + Mat::identity(5, 5) * 0.1;
        let m = sym_inv_sqrt(&c, 1e-14).unwrap().matrix;
        assert!((&m * &c * &m - Mat::identity(5, 5)).norm() < 1e-10);
        assert!((&m - m.transpose()).norm() == 0.0);
    }

    #[test]
    fn sym_inv_sqrt_errors() {
        let nonsym = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            sym_inv_sqrt(&nonsym, 1e-12),
            Err(IcaError::Precondition(_))
        ));
        let indefinite = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        match sym_inv_sqrt(&indefinite, 1e-12) {
            Err(IcaError::RankDeficient { eigenvalue }) => assert_eq!(eigenvalue, -2.0),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn sym_inv_sqrt_floors_small_eigenvalues() {
        let c = Mat::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14]));
        let m = sym_inv_sqrt(&c, 1e-10).unwrap();
        assert_eq!(m.n_floored, 1);
        assert!((m.matrix[(1, 1)] - 1e5).abs() < 1e-6);
    }

    #[test]
    fn whiten_already_white_is_identity() {
        // ±1 patterns over 4 samples: zero mean, identity covariance
        let x = SignalMatrix::from_rows(&[vec![1.0, -1.0, 1.0, -1.0], vec![1.0, 1.0, -1.0, -1.0]])
            .unwrap();
        let w = whiten(&x, DEFAULT_EIG_FLOOR).unwrap();
        assert!((&w.w0 - Mat::identity(2, 2)).norm() < 1e-14);
        assert!((w.y.as_matrix() - x.as_matrix()).norm() < 1e-14);
    }

    #[test]
    fn whiten_scaled_white_recovers_scaling() {
        let u = SignalMatrix::from_rows(&[vec![1.0, -1.0, 1.0, -1.0], vec![1.0, 1.0, -1.0, -1.0]])
            .unwrap();
        let d = Mat::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let x = u.transform(&d).unwrap();
        // direct covariance of x is diag(4, 9)
        assert!(
            (x.covariance() - Mat::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).norm()
                < 1e-14
        );
        let w = whiten(&x, DEFAULT_EIG_FLOOR).unwrap();
        let expected = Mat::from_diagonal(&DVector::from_vec(vec![0.5, 1.0 / 3.0]));
        assert!((&w.w0 - expected).norm() < 1e-10);
    }

    #[test]
    fn whiten_centers_and_whitens() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = randn(&mut rng, 6, 6);
        let mut s = randn(&mut rng, 6, 500);
        s.add_scalar_mut(3.0);
        let x = SignalMatrix::new(a * s).unwrap();
        let w = whiten(&x, DEFAULT_EIG_FLOOR).unwrap();
        assert!(w.y.whiteness_error() < 1e-10);
        assert!(w.y.row_means().amax() < 1e-12);
        assert!(!w.is_floored());
    }

    #[test]
    fn whiten_rank_deficient_errors() {
        // second row is a copy of the first
        let x =
            SignalMatrix::from_rows(&[vec![1.0, 2.0, 4.0, 0.0], vec![1.0, 2.0, 4.0, 0.0]]).unwrap();
        let err = whiten(&x, DEFAULT_EIG_FLOOR).unwrap_err();
        assert!(err.is_numerical(), "{err}");
    }

    #[test]
    fn signal_matrix_validation() {
        assert!(SignalMatrix::new(Mat::zeros(3, 2)).is_err());
        assert!(SignalMatrix::new(Mat::from_element(2, 3, f64::NAN)).is_err());
        assert!(SignalMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn skew_matrix_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = randn(&mut rng, 5, 5);
        let mut a = SkewSymmetricMatrix::skew_part(&m).unwrap();
        let b = SkewSymmetricMatrix::skew_part(&randn(&mut rng, 5, 5)).unwrap();
        a.add_scaled(0.3, &b);
        let a = a.scaled(1.7);
        assert_eq!(a.as_matrix() + a.as_matrix().transpose(), Mat::zeros(5, 5));
        let coords = a.upper_coords();
        assert_eq!(coords.len(), 10);
        assert_eq!(
            SkewSymmetricMatrix::from_upper_coords(5, &coords).unwrap(),
            a
        );
    }
}
