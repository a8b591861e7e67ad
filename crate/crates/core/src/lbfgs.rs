//! Preconditioned two-loop L-BFGS recursion over skew-symmetric matrices.

use std::collections::VecDeque;

use crate::linalg::SkewSymmetricMatrix;
use crate::model::RelativeGradient;

pub const DEFAULT_MEMORY: usize = 7;
pub const DEFAULT_KAPPA_MIN: f64 = 1e-2;

/// Pairs whose curvature `⟨ℰ, Δ⟩` falls below this fraction of
/// `‖ℰ‖‖Δ‖` are not stored.
const CURVATURE_GUARD: f64 = 1e-12;

/// How the auxiliary scalar of each stored pair is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RhoConvention {
    /// `ρ = 1/⟨ℰ, Δ⟩`, the usual L-BFGS quantity.
    #[default]
    Reciprocal,
    /// `ρ = ⟨ℰ, Δ⟩`, kept only to compare against the reciprocal form.
    Literal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MemoryEntry {
    /// Accepted relative move `αD`.
    pub step: SkewSymmetricMatrix,
    /// Difference of consecutive skew gradients.
    pub grad_diff: SkewSymmetricMatrix,
    pub rho: f64,
}

/// Ring buffer of the most recent `(ℰ, Δ, ρ)` triplets, oldest first.
#[derive(Clone, Debug)]
pub struct LbfgsMemory {
    capacity: usize,
    convention: RhoConvention,
    entries: VecDeque<MemoryEntry>,
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        Self::with_convention(capacity, RhoConvention::Reciprocal)
    }

    pub fn with_convention(capacity: usize, convention: RhoConvention) -> Self {
        LbfgsMemory {
            capacity,
            convention,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl DoubleEndedIterator<Item = &MemoryEntry> + ExactSizeIterator {
        self.entries.iter()
    }

    /// Stores a pair, evicting the oldest beyond capacity. Returns `false`
    /// (leaving the memory untouched) when the pair's curvature is not
    /// safely positive.
    pub fn push(&mut self, step: SkewSymmetricMatrix, grad_diff: SkewSymmetricMatrix) -> bool {
        let curvature = step.inner(&grad_diff);
        if !(curvature > CURVATURE_GUARD * step.norm() * grad_diff.norm()) || self.capacity == 0 {
            return false;
        }
        let rho = match self.convention {
            RhoConvention::Reciprocal => 1.0 / curvature,
            RhoConvention::Literal => curvature,
        };
        if !rho.is_finite() {
            return false;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(MemoryEntry {
            step,
            grad_diff,
            rho,
        });
        true
    }

    pub fn flush(&mut self) {
        self.entries.clear();
    }
}

/// Diagonal curvature model `max((κ_i + κ_j)/2, κ_min)` for pair `(i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Preconditioner {
    pub kappa: Vec<f64>,
    pub kappa_min: f64,
}

impl Preconditioner {
    pub fn new(kappa: Vec<f64>, kappa_min: f64) -> Self {
        Preconditioner { kappa, kappa_min }
    }

    #[inline]
    pub fn curvature(&self, i: usize, j: usize) -> f64 {
        (0.5 * (self.kappa[i] + self.kappa[j])).max(self.kappa_min)
    }

    /// Divides each off-diagonal entry by its pair curvature.
    pub fn apply(&self, q: &SkewSymmetricMatrix) -> SkewSymmetricMatrix {
        q.map_upper(|i, j, v| v / self.curvature(i, j))
    }
}

/// Search direction from the preconditioned two-loop recursion.
///
/// Starts from `Q = −(G − Gᵀ)/2`, runs the backward loop newest to oldest,
/// applies the diagonal preconditioner, then runs the forward loop oldest
/// to newest.
pub fn two_loop_direction(
    g: &RelativeGradient,
    precond: &Preconditioner,
    memory: &LbfgsMemory,
) -> SkewSymmetricMatrix {
    let mut q = g.g_minus.scaled(-1.0);
    let mut alphas = Vec::with_capacity(memory.len());
    for entry in memory.entries().rev() {
        let a = entry.rho * entry.step.inner(&q);
        q.add_scaled(-a, &entry.grad_diff);
        alphas.push(a);
    }
    let mut d = precond.apply(&q);
    for (entry, a) in memory.entries().zip(alphas.into_iter().rev()) {
        let beta = entry.rho * entry.grad_diff.inner(&d);
        d.add_scaled(a - beta, &entry.step);
    }
    d
}
