//! Reference computations used only by the tests. Each one takes a route
//! deliberately different from the library's.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use picardo::linalg::{Mat, SkewSymmetricMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_skew(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> SkewSymmetricMatrix {
    SkewSymmetricMatrix::from_upper_fn(n, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Truncated power series with repeated halving, then squaring.
pub fn expm_series(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm = a.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = a / 2f64.powi(squarings as i32);
    let mut term = Mat::identity(n, n);
    let mut sum = Mat::identity(n, n);
    for k in 1..40 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `log(Q)` by the Mercator series, for `Q` close to the identity.
pub fn logm_near_identity(q: &Mat) -> Mat {
    let n = q.nrows();
    let x = q - Mat::identity(n, n);
    assert!(x.norm() < 0.5, "logm series needs ‖Q − I‖ < 1/2");
    let mut power = x.clone();
    let mut sum = Mat::zeros(n, n);
    for k in 1..200 {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += &power * (sign / k as f64);
        power = &power * &x;
        if power.norm() < 1e-20 {
            break;
        }
    }
    sum
}

/// Polar factor `U Vᵀ` from the SVD.
pub fn polar_svd(c: &Mat) -> Mat {
    let svd = SVD::new(c.clone(), true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Solves `(P X + X P)/2 = K` for `X` through the Kronecker system
/// `½(I ⊗ P + Pᵀ ⊗ I) vec X = vec K`.
pub fn sylvester_symmetric(p: &Mat, k: &Mat) -> Mat {
    let n = p.nrows();
    let id = Mat::identity(n, n);
    let system = (id.kronecker(p) + p.transpose().kronecker(&id)) * 0.5;
    let rhs = DVector::from_column_slice(k.as_slice());
    let sol = system.lu().solve(&rhs).expect("singular Sylvester system");
    Mat::from_column_slice(n, n, sol.as_slice())
}

/// Dense BFGS inverse-Hessian recursion on upper-triangle coordinates.
///
/// `h0` is the diagonal initial inverse Hessian, `pairs` holds `(s, y)`
/// oldest first. Returns `H·(−g)`.
pub fn dense_bfgs_direction(h0: &[f64], pairs: &[(Vec<f64>, Vec<f64>)], g: &[f64]) -> Vec<f64> {
    let d = h0.len();
    let mut h = DMatrix::from_diagonal(&DVector::from_column_slice(h0));
    let id = DMatrix::<f64>::identity(d, d);
    for (s, y) in pairs {
        let s = DVector::from_column_slice(s);
        let y = DVector::from_column_slice(y);
        let rho = 1.0 / s.dot(&y);
        let left = &id - (&s * y.transpose()) * rho;
        let right = &id - (&y * s.transpose()) * rho;
        h = &left * &h * &right + (&s * s.transpose()) * rho;
    }
    (h * DVector::from_column_slice(g) * -1.0)
        .as_slice()
        .to_vec()
}

/// Uniform and Laplace rows with unit variance, not standardized
/// empirically.
pub fn independent_sources(uniform: usize, laplace: usize, t: usize, rng: &mut ChaCha8Rng) -> Mat {
    let n = uniform + laplace;
    Mat::from_fn(n, t, |i, _| {
        if i < uniform {
            (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt()
        } else {
            let e: f64 = rng.sample(rand_distr::Exp1);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * e / std::f64::consts::SQRT_2
        }
    })
}
