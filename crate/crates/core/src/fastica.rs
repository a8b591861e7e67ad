//! Sign-adaptive symmetric FastICA.
//!
//! FastICA is insensitive to the sign given to each score: flipping `ψ_i`
//! only flips row `i` of the next iterate. Its scores here are signed so
//! that the diagonal of `C(Y)` is `κ_i ≥ 0`, i.e. with the opposite sign to
//! the curvature-stabilizing signs of the likelihood solver. With that
//! choice a fixed point satisfies `C_w(Y) = I` and, near one, the FastICA
//! move coincides with a quasi-Newton step on the same likelihood.

use std::time::Instant;

use nalgebra::SymmetricEigen;

use crate::error::{IcaError, Result};
use crate::linalg::{
    polar_factor, reproject_orthogonal, whiten, Mat, OrthogonalMatrix, SignalMatrix,
    SkewSymmetricMatrix, Whitening,
};
use crate::model::{compute_moments, relative_gradient, surrogate_loss, MomentSet, ScoreFunction};
use crate::picardo::{
    gradient_norm, IterationRecord, IterationTrace, SolveResult, SolverConfig, Termination,
};

/// `C_ij = Ê[ψ_i(y_i) y_j] − δ_ij Ê[ψ'_i(y_i)]` with its symmetric and
/// skew parts.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub c: Mat,
    pub c_plus: Mat,
    pub c_minus: SkewSymmetricMatrix,
}

impl CMatrix {
    pub fn c_plus_is_positive_definite(&self) -> bool {
        SymmetricEigen::new(self.c_plus.clone()).eigenvalues.min() > 0.0
    }
}

/// Score signs FastICA uses: `−sign(k_i)`, which makes `C_ii = |k_i|`.
pub fn fastica_signs(moments: &MomentSet) -> Vec<f64> {
    moments.signs.iter().map(|s| -s).collect()
}

pub fn c_matrix(y: &SignalMatrix, score: ScoreFunction, signs: &[f64]) -> Result<CMatrix> {
    let n = y.n_channels();
    let t = y.n_samples() as f64;
    let grad = relative_gradient(y, score, signs)?;
    let mut c = grad.g;
    let ym = y.as_matrix().as_slice();
    let mut dpsi = vec![0.0; n];
    for sample in ym.chunks_exact(n) {
        for (acc, &u) in dpsi.iter_mut().zip(sample) {
            *acc += score.dpsi(u);
        }
    }
    for i in 0..n {
        // G already carries −1 on the diagonal
        c[(i, i)] += 1.0 - signs[i] * dpsi[i] / t;
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(IcaError::NumericOverflow("FastICA C matrix"));
    }
    let c_plus = (&c + c.transpose()) * 0.5;
    Ok(CMatrix {
        c_plus,
        c_minus: grad.g_minus,
        c,
    })
}

#[derive(Clone, Debug)]
pub struct FastIcaStep {
    /// `C_w = (C Cᵀ)^{-1/2} C`.
    pub c_w: OrthogonalMatrix,
    pub y_next: SignalMatrix,
    pub signs: Vec<f64>,
}

/// One symmetric FastICA iteration `Y ← C_w(Y) Y` with freshly adapted signs.
pub fn fastica_step(y: &SignalMatrix, score: ScoreFunction) -> Result<FastIcaStep> {
    let moments = compute_moments(y, score)?;
    let signs = fastica_signs(&moments);
    let c = c_matrix(y, score, &signs)?;
    let c_w = polar_factor(&c.c)?;
    let y_next = SignalMatrix::from_matrix_unchecked(c_w.as_matrix() * y.as_matrix());
    Ok(FastIcaStep { c_w, y_next, signs })
}

/// `‖C_w(Y) − I‖_F` under adapted signs; zero exactly at fixed points.
pub fn fixed_point_residual(y: &SignalMatrix, score: ScoreFunction) -> Result<f64> {
    let moments = compute_moments(y, score)?;
    let c = c_matrix(y, score, &fastica_signs(&moments))?;
    if !c.c_plus_is_positive_definite() {
        log::warn!("symmetric part of C(Y) is not positive definite; fixed points and stationary points may differ here");
    }
    let n = y.n_channels();
    Ok((polar_factor(&c.c)?.into_inner() - Mat::identity(n, n)).norm())
}

pub fn fastica_solve(x: &SignalMatrix, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let whitening = whiten(x, config.eig_floor)?;
    fastica_solve_whitened(&whitening, config)
}

/// FastICA from an existing whitening. Records the same trace as the
/// likelihood solver: `‖G − Gᵀ‖_F` and the loss under the curvature signs.
pub fn fastica_solve_whitened(whitening: &Whitening, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let n = whitening.y.n_channels();
    let y0 = &whitening.y;
    let start = Instant::now();

    let mut rotation = OrthogonalMatrix::identity(n);
    let mut y = y0.clone();
    let mut trace = IterationTrace::new();
    let mut prev_signs: Option<Vec<f64>> = None;
    let mut signs;
    let termination;
    let mut iter = 0;
    loop {
        let moments = compute_moments(&y, config.score)?;
        signs = moments.signs.clone();
        let flips = prev_signs.as_deref().map_or(0, |p| moments.sign_flips(p));
        let grad = relative_gradient(&y, config.score, &signs)?;
        let grad_norm = gradient_norm(&grad);
        let loss = surrogate_loss(&y, config.score, &signs)?;
        trace.push(IterationRecord {
            iter,
            grad_norm,
            loss,
            elapsed_s: start.elapsed().as_secs_f64(),
            ls_count: 0,
            sign_flips: flips,
        });
        if grad_norm < config.tol {
            termination = Termination::Converged;
            break;
        }
        if iter >= config.max_iter {
            termination = Termination::MaxIter;
            break;
        }

        let c = c_matrix(&y, config.score, &fastica_signs(&moments))?;
        let c_w = match polar_factor(&c.c) {
            Ok(q) => q,
            Err(err) => {
                log::warn!("FastICA stopped at iteration {iter}: {err}");
                termination = Termination::Failed(err.to_string());
                break;
            }
        };
        rotation = c_w.compose(&rotation);
        iter += 1;
        if iter % config.reproject_every == 0 {
            rotation = reproject_orthogonal(rotation.as_matrix())?;
            y = SignalMatrix::from_matrix_unchecked(rotation.as_matrix() * y0.as_matrix());
        } else {
            y = SignalMatrix::from_matrix_unchecked(c_w.as_matrix() * y.as_matrix());
        }
        prev_signs = Some(signs);
    }

    let w = rotation.as_matrix() * &whitening.w0;
    Ok(SolveResult {
        w,
        w0: whitening.w0.clone(),
        rotation,
        means: whitening.means.clone(),
        y,
        trace,
        converged: termination == Termination::Converged,
        termination,
        signs,
    })
}
