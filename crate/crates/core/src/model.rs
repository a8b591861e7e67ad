//! Likelihood machinery under the orthogonal constraint: score functions,
//! nonlinear moments and sign adaptation, the surrogate loss, the relative
//! gradient and the curvature models.
//!
//! Sign convention: the curvature moment of source `i` is
//! `k_i = Ê[ψ'(y_i)] − Ê[ψ(y_i) y_i]`. It is positive for super-Gaussian
//! sources under `ψ = tanh`, and with `ψ_i = sign(k_i) ψ` the second-order
//! term of `L(e^ℰ W)` along `ℰ_ij` is `(κ_i + κ_j)/2 · ℰ_ij²` with
//! `κ_i = |k_i| ≥ 0`.

use std::fmt;
use std::str::FromStr;

use crate::error::{IcaError, Result};
use crate::linalg::{Mat, SignalMatrix, SkewSymmetricMatrix};

/// Nonlinearity `ψ` and its primitive `ρ` (`ρ' = ψ`), both odd/even
/// respectively.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ScoreFunction {
    /// `ψ(u) = tanh u`, `ρ(u) = log cosh u`.
    #[default]
    Tanh,
    /// `ψ(u) = u³`, `ρ(u) = u⁴/4`.
    Cube,
    /// `ψ(u) = u e^{−u²/2}`, `ρ(u) = −e^{−u²/2}`.
    ExpQuad,
}

impl ScoreFunction {
    #[inline]
    pub fn psi(self, u: f64) -> f64 {
        match self {
            ScoreFunction::Tanh => u.tanh(),
            ScoreFunction::Cube => u * u * u,
            ScoreFunction::ExpQuad => u * (-0.5 * u * u).exp(),
        }
    }

    #[inline]
    pub fn dpsi(self, u: f64) -> f64 {
        match self {
            ScoreFunction::Tanh => {
                let t = u.tanh();
                1.0 - t * t
            }
            ScoreFunction::Cube => 3.0 * u * u,
            ScoreFunction::ExpQuad => (1.0 - u * u) * (-0.5 * u * u).exp(),
        }
    }

    /// Primitive of `ψ` with additive constants dropped.
    #[inline]
    pub fn rho(self, u: f64) -> f64 {
        match self {
            ScoreFunction::Tanh => log_cosh(u),
            ScoreFunction::Cube => 0.25 * u * u * u * u,
            ScoreFunction::ExpQuad => -(-0.5 * u * u).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreFunction::Tanh => "tanh",
            ScoreFunction::Cube => "cube",
            ScoreFunction::ExpQuad => "exp_quad",
        }
    }
}

impl fmt::Display for ScoreFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreFunction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(ScoreFunction::Tanh),
            "cube" => Ok(ScoreFunction::Cube),
            "exp_quad" | "exp-quad" => Ok(ScoreFunction::ExpQuad),
            other => Err(format!("unknown score function '{other}'")),
        }
    }
}

/// `log cosh u` without overflow for large `|u|`.
#[inline]
pub fn log_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Per-source nonlinear moments and the adapted signs.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSet {
    /// `k_i = Ê[ψ'(y_i)] − Ê[ψ(y_i) y_i]` for the fixed base score.
    pub k: Vec<f64>,
    /// `κ_i = |k_i|`.
    pub kappa: Vec<f64>,
    /// `s_i = sign(k_i)` with `sign(0) = +1`, stored as `±1.0`.
    pub signs: Vec<f64>,
}

impl MomentSet {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// Number of sources whose sign differs from `previous`.
    pub fn sign_flips(&self, previous: &[f64]) -> usize {
        self.signs
            .iter()
            .zip(previous)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// `G_ij = Ê[ψ_i(y_i) y_j] − δ_ij` and its skew part.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeGradient {
    pub g: Mat,
    pub g_minus: SkewSymmetricMatrix,
}

impl RelativeGradient {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

fn check_signs(y: &SignalMatrix, signs: &[f64]) -> Result<()> {
    if signs.len() != y.n_channels() {
        return Err(IcaError::Dimension(format!(
            "{} signs for {} channels",
            signs.len(),
            y.n_channels()
        )));
    }
    Ok(())
}

/// Per-channel sums of `f(i, y_it)` over samples. Sequential, so the
/// result is bit-reproducible.
fn channel_sums(y: &SignalMatrix, mut f: impl FnMut(usize, f64) -> f64) -> Vec<f64> {
    let n = y.n_channels();
    let mut sums = vec![0.0; n];
    for sample in y.as_matrix().as_slice().chunks_exact(n) {
        for (i, (acc, &u)) in sums.iter_mut().zip(sample).enumerate() {
            *acc += f(i, u);
        }
    }
    sums
}

fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(IcaError::NumericOverflow(what))
    }
}

pub fn compute_moments(y: &SignalMatrix, score: ScoreFunction) -> Result<MomentSet> {
    let t = y.n_samples() as f64;
    let psi_y = channel_sums(y, |_, u| score.psi(u) * u);
    let dpsi = channel_sums(y, |_, u| score.dpsi(u));
    let k: Vec<f64> = dpsi.iter().zip(&psi_y).map(|(d, p)| (d - p) / t).collect();
    ensure_finite(&k, "nonlinear moments")?;
    let signs: Vec<f64> = k
        .iter()
        .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let kappa = k.iter().zip(&signs).map(|(v, s)| v * s).collect();
    Ok(MomentSet { k, kappa, signs })
}

/// Sign-adapted score values `s_i ψ(y_it)` as an `N × T` matrix.
fn adapted_scores(y: &SignalMatrix, score: ScoreFunction, signs: &[f64]) -> Mat {
    let n = y.n_channels();
    let mut psi = y.as_matrix().clone();
    for sample in psi.as_mut_slice().chunks_exact_mut(n) {
        for (v, s) in sample.iter_mut().zip(signs) {
            *v = s * score.psi(*v);
        }
    }
    psi
}

/// `Ê[ψ_i(y_i) y_j]` without the identity subtracted.
fn score_cross_moments(y: &SignalMatrix, score: ScoreFunction, signs: &[f64]) -> Result<Mat> {
    check_signs(y, signs)?;
    let t = y.n_samples() as f64;
    let psi = adapted_scores(y, score, signs);
    let m = psi * y.as_matrix().transpose() / t;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(IcaError::NumericOverflow("relative gradient"));
    }
    Ok(m)
}

pub fn relative_gradient(
    y: &SignalMatrix,
    score: ScoreFunction,
    signs: &[f64],
) -> Result<RelativeGradient> {
    let n = y.n_channels();
    let g = score_cross_moments(y, score, signs)? - Mat::identity(n, n);
    let g_minus = SkewSymmetricMatrix::skew_part(&g)?;
    Ok(RelativeGradient { g, g_minus })
}

/// `Ê[Σ_i s_i ρ(y_i)]`. The `−log|det W|` term is constant on the
/// orthogonal group and omitted, so values are only comparable between
/// iterates sharing the same signs.
pub fn surrogate_loss(y: &SignalMatrix, score: ScoreFunction, signs: &[f64]) -> Result<f64> {
    check_signs(y, signs)?;
    let t = y.n_samples() as f64;
    let sums = channel_sums(y, |_, u| score.rho(u));
    let loss = sums.iter().zip(signs).map(|(v, s)| s * v).sum::<f64>() / t;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(IcaError::NumericOverflow("surrogate loss"))
    }
}

/// `L(y_new) − L(y_old)` accumulated sample by sample.
///
/// Equal to the difference of two [`surrogate_loss`] calls in exact
/// arithmetic, but without the cancellation that makes that difference
/// meaningless once steps shrink below the loss's rounding level.
pub fn loss_change(
    y_old: &SignalMatrix,
    y_new: &SignalMatrix,
    score: ScoreFunction,
    signs: &[f64],
) -> Result<f64> {
    check_signs(y_old, signs)?;
    if y_old.as_matrix().shape() != y_new.as_matrix().shape() {
        return Err(IcaError::Dimension(
            "loss change between differently shaped signals".into(),
        ));
    }
    let n = y_old.n_channels();
    let t = y_old.n_samples() as f64;
    let mut sums = vec![0.0; n];
    let old = y_old.as_matrix().as_slice().chunks_exact(n);
    let new = y_new.as_matrix().as_slice().chunks_exact(n);
    for (a, b) in old.zip(new) {
        for i in 0..n {
            sums[i] += score.rho(b[i]) - score.rho(a[i]);
        }
    }
    let change = sums.iter().zip(signs).map(|(v, s)| s * v).sum::<f64>() / t;
    if change.is_finite() {
        Ok(change)
    } else {
        Err(IcaError::NumericOverflow("loss change"))
    }
}

/// Local model of `L(e^ℰ W) − L(W)` under the approximate Hessian:
/// `Σ_{i<j} (G_ij − G_ji) ℰ_ij + (κ_i + κ_j)/2 · ℰ_ij²`.
pub fn hessian_quadratic_form(
    g: &RelativeGradient,
    moments: &MomentSet,
    e: &SkewSymmetricMatrix,
) -> f64 {
    let n = e.dim();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let eij = e.get(i, j);
            total += (g.g[(i, j)] - g.g[(j, i)]) * eij
                + 0.5 * (moments.kappa[i] + moments.kappa[j]) * eij * eij;
        }
    }
    total
}

/// Exact Hessian of `ℰ ↦ L(e^ℰ W)` at `ℰ = 0` applied to `e`.
///
/// Returns `Hℰ = ½(Mℰᵀ + ℰᵀM) + P` where `M_ij = Ê[ψ_i(y_i) y_j]` and
/// `P_ij = Ê[ψ'_i(y_i) (ℰy)_i y_j]`, so that `⟨ℰ, Hℰ⟩` is the second
/// derivative of the loss along `e^{hℰ}`. Costs `O(N²T)`; intended for
/// checking the curvature models, not for solving.
pub fn exact_hessian_apply(
    y: &SignalMatrix,
    score: ScoreFunction,
    signs: &[f64],
    e: &SkewSymmetricMatrix,
) -> Result<Mat> {
    check_signs(y, signs)?;
    let n = y.n_channels();
    if e.dim() != n {
        return Err(IcaError::Dimension(format!(
            "{}x{} direction for {n} channels",
            e.dim(),
            e.dim()
        )));
    }
    let t = y.n_samples() as f64;
    let cross = score_cross_moments(y, score, signs)?;
    let em = e.as_matrix();
    let first = (&cross * em.transpose() + em.transpose() * &cross) * 0.5;

    let ym = y.as_matrix();
    let mut weighted = em * ym;
    for (z_col, y_col) in weighted
        .as_mut_slice()
        .chunks_exact_mut(n)
        .zip(ym.as_slice().chunks_exact(n))
    {
        for i in 0..n {
            z_col[i] *= signs[i] * score.dpsi(y_col[i]);
        }
    }
    let second = weighted * ym.transpose() / t;
    let h = first + second;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(IcaError::NumericOverflow("exact Hessian"));
    }
    Ok(h)
}
