//! The orthogonal-constraint solver: sign adaptation, preconditioned
//! L-BFGS direction, backtracking line search and exponential update.

use std::time::Instant;

use crate::error::{IcaError, Result};
use crate::lbfgs::{
    two_loop_direction, LbfgsMemory, Preconditioner, RhoConvention, DEFAULT_KAPPA_MIN,
    DEFAULT_MEMORY,
};
use crate::linalg::{
    expm_skew, reproject_orthogonal, whiten, Mat, OrthogonalMatrix, SignalMatrix,
    SkewSymmetricMatrix, Whitening, DEFAULT_EIG_FLOOR,
};
use crate::model::{
    compute_moments, loss_change, relative_gradient, surrogate_loss, RelativeGradient,
    ScoreFunction,
};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop once `‖G − Gᵀ‖_F` drops below this.
    pub tol: f64,
    pub memory_size: usize,
    pub kappa_min: f64,
    pub ls_max_halvings: usize,
    pub score: ScoreFunction,
    /// Snap the rotation back onto the orthogonal group every this many
    /// iterations.
    pub reproject_every: usize,
    pub rho_convention: RhoConvention,
    /// Relative covariance eigenvalue floor used when whitening.
    pub eig_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 500,
            tol: 1e-8,
            memory_size: DEFAULT_MEMORY,
            kappa_min: DEFAULT_KAPPA_MIN,
            ls_max_halvings: 10,
            score: ScoreFunction::Tanh,
            reproject_every: 50,
            rho_convention: RhoConvention::Reciprocal,
            eig_floor: DEFAULT_EIG_FLOOR,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(IcaError::Precondition(format!(
                "invalid solver config: {what}"
            )))
        };
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad("tol must lie in (0, 1)");
        }
        if !(self.kappa_min > 0.0) {
            return bad("kappa_min must be positive");
        }
        if self.memory_size == 0 {
            return bad("memory size must be positive");
        }
        if self.ls_max_halvings == 0 {
            return bad("ls_max_halvings must be positive");
        }
        if self.reproject_every == 0 {
            return bad("reproject_every must be positive");
        }
        if !(self.eig_floor > 0.0) {
            return bad("eig_floor must be positive");
        }
        Ok(())
    }
}

/// State of the solver at one iterate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖G − Gᵀ‖_F` at this iterate.
    pub grad_norm: f64,
    /// Surrogate loss at this iterate, under this iterate's signs.
    pub loss: f64,
    /// Monotonic seconds since the solver started (whitening excluded).
    pub elapsed_s: f64,
    /// Step halvings the line search needed to reach this iterate.
    pub ls_count: usize,
    /// Sources whose sign changed on arrival at this iterate.
    pub sign_flips: usize,
}

/// One record per iterate, starting with the whitened input at `iter = 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationTrace {
    records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if `iter` does not increase or time runs backwards.
    pub fn push(&mut self, record: IterationRecord) {
        if let Some(last) = self.records.last() {
            assert!(record.iter > last.iter, "trace iterations must increase");
            assert!(
                record.elapsed_s >= last.elapsed_s,
                "trace time must not decrease"
            );
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// Number of updates applied, i.e. the index of the last iterate.
    pub fn n_steps(&self) -> usize {
        self.last().map_or(0, |r| r.iter)
    }

    /// First iterate whose gradient norm is below `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.grad_norm < threshold)
            .map(|r| r.iter)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Converged,
    MaxIter,
    /// The line search failed even after flushing the memory.
    Stagnation,
    /// A numerical failure (e.g. a singular matrix) ended the run early.
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// Unmixing matrix `O·W₀`, applied to centered data.
    pub w: Mat,
    pub w0: Mat,
    pub rotation: OrthogonalMatrix,
    pub means: nalgebra::DVector<f64>,
    /// `w · (x − means)`.
    pub y: SignalMatrix,
    pub trace: IterationTrace,
    pub converged: bool,
    pub termination: Termination,
    /// Signs in effect at the final iterate.
    pub signs: Vec<f64>,
}

/// `‖G − Gᵀ‖_F`.
pub fn gradient_norm(g: &RelativeGradient) -> f64 {
    let n = g.dim();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = g.g[(i, j)] - g.g[(j, i)];
            sum += d * d;
        }
    }
    sum.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchOutcome {
    /// Accepted step, or the last one tried when nothing was accepted.
    pub alpha: f64,
    pub accepted: bool,
    pub halvings: usize,
}

/// Backtracking from `α = 1`, halving up to `max_halvings` times, until
/// `trial_loss(α) < loss_now`. Non-finite trial losses count as rejections.
pub fn line_search(
    mut trial_loss: impl FnMut(f64) -> f64,
    loss_now: f64,
    max_halvings: usize,
) -> LineSearchOutcome {
    let mut alpha = 1.0;
    for halvings in 0..=max_halvings {
        let loss = trial_loss(alpha);
        if loss.is_finite() && loss < loss_now {
            return LineSearchOutcome {
                alpha,
                accepted: true,
                halvings,
            };
        }
        if halvings < max_halvings {
            alpha *= 0.5;
        }
    }
    LineSearchOutcome {
        alpha,
        accepted: false,
        halvings: max_halvings,
    }
}

struct Trial {
    rotation: OrthogonalMatrix,
    y: SignalMatrix,
}

/// Searches along `direction` from `y`. Trial losses are measured as
/// changes relative to the current iterate, so the comparison is against 0.
fn search_along(
    y: &SignalMatrix,
    direction: &SkewSymmetricMatrix,
    config: &SolverConfig,
    signs: &[f64],
) -> (LineSearchOutcome, Option<Trial>) {
    let mut last: Option<Trial> = None;
    let outcome = line_search(
        |alpha| {
            let Ok(rotation) = expm_skew(&direction.scaled(alpha)) else {
                last = None;
                return f64::NAN;
            };
            let moved = rotation.as_matrix() * y.as_matrix();
            if moved.iter().any(|v| !v.is_finite()) {
                last = None;
                return f64::NAN;
            }
            let moved = SignalMatrix::from_matrix_unchecked(moved);
            let change = loss_change(y, &moved, config.score, signs).unwrap_or(f64::NAN);
            last = Some(Trial { rotation, y: moved });
            change
        },
        0.0,
        config.ls_max_halvings,
    );
    (outcome, if outcome.accepted { last } else { None })
}

/// Runs the solver on raw (uncentered, unwhitened) observations.
pub fn solve(x: &SignalMatrix, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let whitening = whiten(x, config.eig_floor)?;
    solve_whitened(&whitening, config)
}

/// Runs the solver starting from an existing whitening of the data.
pub fn solve_whitened(whitening: &Whitening, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let n = whitening.y.n_channels();
    let y0 = &whitening.y;
    let start = Instant::now();

    let mut rotation = OrthogonalMatrix::identity(n);
    let mut y = y0.clone();
    let mut memory = LbfgsMemory::with_convention(config.memory_size, config.rho_convention);
    let mut trace = IterationTrace::new();
    let mut prev_signs: Option<Vec<f64>> = None;
    let mut prev_g_minus: Option<SkewSymmetricMatrix> = None;
    let mut last_step: Option<SkewSymmetricMatrix> = None;
    let mut arrival_halvings = 0;
    let termination;
    let mut signs;

    let mut iter = 0;
    loop {
        let moments = compute_moments(&y, config.score)?;
        signs = moments.signs.clone();
        let flips = prev_signs.as_deref().map_or(0, |p| moments.sign_flips(p));
        if flips > 0 {
            memory.flush();
        }
        let grad = relative_gradient(&y, config.score, &signs)?;
        if let (Some(step), Some(prev)) = (last_step.take(), prev_g_minus.take()) {
            if flips == 0 {
                let mut delta = grad.g_minus.clone();
                delta.add_scaled(-1.0, &prev);
                memory.push(step, delta);
            }
        }
        let grad_norm = gradient_norm(&grad);
        let loss = surrogate_loss(&y, config.score, &signs)?;
        trace.push(IterationRecord {
            iter,
            grad_norm,
            loss,
            elapsed_s: start.elapsed().as_secs_f64(),
            ls_count: arrival_halvings,
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

        let precond = Preconditioner::new(moments.kappa, config.kappa_min);
        let mut direction = two_loop_direction(&grad, &precond, &memory);
        let (mut outcome, mut trial) = search_along(&y, &direction, config, &signs);
        let mut halvings = outcome.halvings;
        if !outcome.accepted && !memory.is_empty() {
            log::debug!("line search failed at iteration {iter}; retrying from flushed memory");
            memory.flush();
            direction = two_loop_direction(&grad, &precond, &memory);
            (outcome, trial) = search_along(&y, &direction, config, &signs);
            halvings += outcome.halvings;
        }
        let Some(accepted) = trial else {
            log::warn!(
                "stagnation at iteration {iter}: no decrease along the preconditioned gradient \
                 (‖G − Gᵀ‖_F = {grad_norm:e})"
            );
            termination = Termination::Stagnation;
            break;
        };

        rotation = accepted.rotation.compose(&rotation);
        y = accepted.y;
        iter += 1;
        if iter % config.reproject_every == 0 {
            rotation = reproject_orthogonal(rotation.as_matrix())?;
            y = SignalMatrix::from_matrix_unchecked(rotation.as_matrix() * y0.as_matrix());
        }
        last_step = Some(direction.scaled(outcome.alpha));
        prev_g_minus = Some(grad.g_minus);
        prev_signs = Some(signs);
        arrival_halvings = halvings;
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_norm_cases() {
        let sym = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let g = RelativeGradient {
            g_minus: SkewSymmetricMatrix::skew_part(&sym).unwrap(),
            g: sym,
        };
        assert_eq!(gradient_norm(&g), 0.0);
        let rot = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let g = RelativeGradient {
            g_minus: SkewSymmetricMatrix::skew_part(&rot).unwrap(),
            g: rot,
        };
        assert!((gradient_norm(&g) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn line_search_rejects_zero_direction() {
        let out = line_search(|_| 1.0, 1.0, 10);
        assert!(!out.accepted);
        assert_eq!(out.halvings, 10);
    }

    #[test]
    fn line_search_scripted_quarter_step() {
        let mut tried = Vec::new();
        let out = line_search(
            |a| {
                tried.push(a);
                if a <= 0.25 {
                    0.5
                } else {
                    2.0
                }
            },
            1.0,
            10,
        );
        assert!(out.accepted);
        assert_eq!(out.alpha, 0.25);
        assert_eq!(out.halvings, 2);
        assert_eq!(tried, vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn line_search_treats_nan_as_rejection() {
        let out = line_search(|a| if a == 1.0 { f64::NAN } else { 0.0 }, 1.0, 3);
        assert!(out.accepted);
        assert_eq!(out.alpha, 0.5);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            tol: 1.5,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            kappa_min: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    #[should_panic(expected = "increase")]
    fn trace_rejects_non_increasing_iterations() {
        let rec = IterationRecord {
            iter: 0,
            grad_norm: 1.0,
            loss: 0.0,
            elapsed_s: 0.0,
            ls_count: 0,
            sign_flips: 0,
        };
        let mut trace = IterationTrace::new();
        trace.push(rec);
        trace.push(rec);
    }
}
